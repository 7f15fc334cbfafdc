use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use spatial_sign::experiment::parse_family;
use spatial_sign::{Error, Family, Hypothesis, Method, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Test,
    Experiment,
    Suite,
    Limits,
    Kappa4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Markdown,
    JsonLines,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    TInfinity,
    Qp,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::TInfinity => "t-infinity",
            Law::Qp => "qp",
        })
    }
}

/// Spatial-sign location tests and their Monte Carlo study.
///
/// List-valued options (n, p, rho, model, hypothesis, methods) take
/// comma-separated values; `experiment` and `suite` run every combination.
#[derive(Parser, Debug, Default)]
#[command(name = "spatial-sign", version)]
pub struct Cli {
    #[arg(long, value_enum)]
    pub command: Option<Command>,

    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Data file for `test`: one observation per row, comma, semicolon, tab or space separated.
    #[arg(long)]
    pub input: Option<PathBuf>,

    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    /// normal, t[:nu] or mixture[:weight:scale2].
    #[arg(long)]
    pub model: Option<String>,
    /// null or power.
    #[arg(long)]
    pub hypothesis: Option<String>,
    /// Monte Carlo replications (draws for `limits`, sign pairs for `kappa4`).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Bootstrap replicates per test.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Any of WPL, ZGCZ, TR, TN.
    #[arg(long)]
    pub methods: Option<String>,
    /// Master seed; drawn from the OS and echoed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for experiments; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (a directory for `suite`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Eigenvalue file for `limits`; otherwise the sign scatter of the model is simulated.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub law: Option<Law>,
    /// Record compute time in the `seconds` column.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<Command>,
    input: Option<PathBuf>,
    n: Option<ListValue>,
    p: Option<ListValue>,
    rho: Option<ListValue>,
    model: Option<ListValue>,
    hypothesis: Option<ListValue>,
    reps: Option<usize>,
    bootstrap: Option<usize>,
    alpha: Option<f64>,
    methods: Option<ListValue>,
    seed: Option<u64>,
    workers: Option<usize>,
    format: Option<Format>,
    out: Option<PathBuf>,
    weights: Option<PathBuf>,
    law: Option<Law>,
    timing: Option<bool>,
}

/// A config value given either as a scalar, a comma-separated string or an array.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ListValue {
    Int(i64),
    Float(f64),
    Text(String),
    Many(Vec<ListItem>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ListItem {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ListValue {
    fn render(self) -> String {
        let item = |i: ListItem| match i {
            ListItem::Int(v) => v.to_string(),
            ListItem::Float(v) => v.to_string(),
            ListItem::Text(v) => v,
        };
        match self {
            ListValue::Int(v) => v.to_string(),
            ListValue::Float(v) => v.to_string(),
            ListValue::Text(v) => v,
            ListValue::Many(v) => v.into_iter().map(item).collect::<Vec<_>>().join(","),
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: Command,
    pub input: Option<PathBuf>,
    /// Grid options stay unset when not given, since defaults differ by command.
    pub n: Option<Vec<usize>>,
    pub p: Option<Vec<usize>>,
    pub rho: Option<Vec<f64>>,
    pub model: Option<Vec<Family<f64>>>,
    pub hypothesis: Option<Vec<Hypothesis>>,
    pub reps: Option<usize>,
    pub bootstrap: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub law: Law,
    pub timing: bool,
}

fn list<T, F>(raw: Option<String>, what: &str, parse: F) -> Result<Option<Vec<T>>>
where
    F: Fn(&str) -> Result<T>,
{
    let Some(raw) = raw else { return Ok(None) };
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Domain(format!("--{what} is empty")));
    }
    Ok(Some(items))
}

fn number<T: std::str::FromStr>(what: &'static str) -> impl Fn(&str) -> Result<T> {
    move |s| {
        s.parse::<T>()
            .map_err(|_| Error::Domain(format!("invalid value '{s}' for --{what}")))
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Domain(format!("config {}: {}", path.display(), e.message())))
}

impl Settings {
    pub fn resolve(cli: Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => read_file_config(path)?,
            None => FileConfig::default(),
        };
        let pick = |flag: Option<String>, key: Option<ListValue>| flag.or(key.map(ListValue::render));
        let command = cli
            .command
            .or(file.command)
            .ok_or_else(|| Error::Domain("no command given (use --command)".into()))?;

        let n = list(pick(cli.n, file.n), "n", number::<usize>("n"))?;
        let p = list(pick(cli.p, file.p), "p", number::<usize>("p"))?;
        let rho = list(pick(cli.rho, file.rho), "rho", number::<f64>("rho"))?;
        let model = list(pick(cli.model, file.model), "model", parse_family)?;
        let hypothesis = list(pick(cli.hypothesis, file.hypothesis), "hypothesis", |s| {
            s.parse::<Hypothesis>()
        })?;
        let methods = list(pick(cli.methods, file.methods), "methods", |s| {
            s.parse::<Method>()
        })?;

        Ok(Self {
            command,
            input: cli.input.or(file.input),
            n,
            p,
            rho,
            model,
            hypothesis,
            reps: cli.reps.or(file.reps),
            bootstrap: cli.bootstrap.or(file.bootstrap).unwrap_or(200),
            alpha: cli.alpha.or(file.alpha).unwrap_or(0.05),
            methods: methods.unwrap_or_else(|| Method::ALL.to_vec()),
            seed: cli.seed.or(file.seed),
            workers: cli.workers.or(file.workers).unwrap_or(0),
            format: cli.format.or(file.format).unwrap_or(Format::Csv),
            out: cli.out.or(file.out),
            weights: cli.weights.or(file.weights),
            law: cli.law.or(file.law).unwrap_or(Law::TInfinity),
            timing: cli.timing || file.timing.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> Result<Settings> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        Settings::resolve(Cli {
            config: Some(path),
            seed: Some(5),
            ..Cli::default()
        })
    }

    #[test]
    fn file_keys_and_flag_precedence() {
        let s = config(
            "command = \"experiment\"\nn = [40, 80]\nrho = 0.5\nmodel = \"t\"\nmethods = \"TR,TN\"\nseed = 9\nformat = \"json-lines\"\n",
        )
        .unwrap();
        assert_eq!(s.command, Command::Experiment);
        assert_eq!(s.n, Some(vec![40, 80]));
        assert_eq!(s.rho, Some(vec![0.5]));
        assert_eq!(s.model, Some(vec![Family::StudentT { nu: 3.0 }]));
        assert_eq!(s.p, None);
        assert_eq!(s.methods, vec![Method::Tr, Method::Tn]);
        assert_eq!(s.seed, Some(5));
        assert_eq!(s.format, Format::JsonLines);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = config("command = \"suite\"\nbogus_key = 3\n").unwrap_err();
        assert!(e.to_string().contains("bogus_key"), "{e}");
    }

    #[test]
    fn missing_command() {
        assert!(Settings::resolve(Cli::default()).is_err());
    }
}
