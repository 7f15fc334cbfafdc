//! Monte Carlo size/power experiments over `(n, p, ρ, model)` grids.
//!
//! Every replication draws its dataset from the stream keyed by
//! `(seed, replication, 0, Data)` and each method gets its own stream
//! `(seed, replication, method tag, Bootstrap)`, so results depend only on
//! the configuration and never on scheduling or on which other methods run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::median::{spatial_median, MedianOptions};
use crate::procedures::{bootstrap_test_from_summaries, wpl_from_summary, zgcz_from_summary, Method};
use crate::rng::{Purpose, StreamKey};
use crate::scatter::{self, build_equicorrelated, power_shift_delta, DistributionModel, Family};
use crate::sign::sign_summary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `μ = 0`.
    Null,
    /// `μ = δ·1` with δ from [`power_shift_delta`].
    PowerShift,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::Null => "null",
            Hypothesis::PowerShift => "power",
        })
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "null" | "size" => Ok(Hypothesis::Null),
            "power" | "power_shift" | "powershift" | "alternative" => Ok(Hypothesis::PowerShift),
            other => Err(Error::domain(format!(
                "unknown hypothesis '{other}' (expected null or power)"
            ))),
        }
    }
}

/// Parses `normal`, `t`, `t:<nu>`, `mixture` or `mixture:<weight>:<scale2>`.
/// Bare `t` and `mixture` mean the reference design (`ν = 3`; `0.2`, `9`).
pub fn parse_family(s: &str) -> Result<Family<f64>> {
    let lower = s.trim().to_ascii_lowercase();
    let parts: Vec<&str> = lower.split(':').collect();
    let num = |v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| Error::domain(format!("'{v}' is not a number in model '{s}'")))
    };
    let family = match parts.as_slice() {
        ["normal"] | ["gaussian"] => Family::Normal,
        ["t"] | ["student"] | ["student_t"] => Family::StudentT { nu: 3.0 },
        ["t" | "student" | "student_t", nu] => Family::StudentT { nu: num(nu)? },
        ["mixture"] => Family::reference_mixture(),
        ["mixture", w, s2] => Family::MixtureNormal {
            weight: num(w)?,
            scale2: num(s2)?,
        },
        _ => {
            return Err(Error::domain(format!(
                "unknown model '{s}' (expected normal, t[:nu] or mixture[:weight:scale2])"
            )))
        }
    };
    family.validate()?;
    Ok(family)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub family: Family<f64>,
    pub hypothesis: Hypothesis,
    pub reps: usize,
    pub bootstrap_m: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 2000 replications, 200 bootstrap draws, α = 0.05,
    /// all four methods.
    pub fn new(n: usize, p: usize, rho: f64, family: Family<f64>, hypothesis: Hypothesis, seed: u64) -> Self {
        Self {
            n,
            p,
            rho,
            family,
            hypothesis,
            reps: 2000,
            bootstrap_m: 200,
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::domain(format!("n must be at least 4, got {}", self.n)));
        }
        if self.p == 0 {
            return Err(Error::domain("p must be positive"));
        }
        if self.reps == 0 {
            return Err(Error::domain("reps must be at least 1"));
        }
        if self.bootstrap_m == 0 {
            return Err(Error::domain("bootstrap replicate count must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::domain("no methods selected"));
        }
        self.family.validate()?;
        build_equicorrelated(self.p, self.rho, 1.0)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `0` means one per available core.
    pub workers: usize,
    /// Record per-method compute time. Off by default so reports are reproducible byte for byte.
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// `√(r(1−r)/reps)`.
    pub stderr: f64,
    /// Summed compute time over replications, including the sign summaries
    /// the method needs; `None` unless timing was requested.
    pub seconds: Option<f64>,
    /// Replications that raised at least one warning.
    pub warned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Location shift used under the alternative; 0 under the null.
    pub delta: f64,
    pub results: Vec<MethodResult>,
}

impl ExperimentReport {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }

    pub fn rate(&self, method: Method) -> Option<f64> {
        self.result(method).map(|r| r.rejection_rate)
    }
}

struct Tally {
    reject: Vec<bool>,
    warned: Vec<bool>,
    seconds: Vec<f64>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("could not start worker pool: {e}")))
}

pub fn run_experiment(config: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentReport> {
    config.validate()?;
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let scatter = build_equicorrelated(config.p, config.rho, 1.0)?;
    let delta = match config.hypothesis {
        Hypothesis::Null => 0.0,
        Hypothesis::PowerShift => power_shift_delta(config.n, config.p, &scatter, &config.family)?,
    };
    let model = DistributionModel::new(config.family, Array1::from_elem(config.p, delta))?;
    let needs_median = methods.iter().any(|m| m.multiplier().is_some());

    let one = |rep: usize| -> Result<Tally> {
        let mut data_rng = StreamKey::new(config.seed, rep as u64, 0, Purpose::Data).stream();
        let data = scatter::sample(&model, &scatter, config.n, &mut data_rng)?;
        let clock = Instant::now();
        let observed = sign_summary(&data, None)?;
        let shared = clock.elapsed().as_secs_f64();
        let centered = if needs_median {
            let clock = Instant::now();
            let median = spatial_median(&data, MedianOptions::default())?;
            let c = sign_summary(&data, Some(median.mu_hat.view()))?;
            Some((median, c, clock.elapsed().as_secs_f64()))
        } else {
            None
        };
        let mut t = Tally {
            reject: Vec::with_capacity(methods.len()),
            warned: Vec::with_capacity(methods.len()),
            seconds: Vec::with_capacity(methods.len()),
        };
        for &method in &methods {
            let clock = Instant::now();
            let mut extra = 0.0;
            let outcome = match method.multiplier() {
                None if method == Method::Wpl => wpl_from_summary(&observed, config.alpha)?,
                None => zgcz_from_summary(&observed, config.alpha)?,
                Some(mult) => {
                    let (median, c, cost) = centered.as_ref().expect("median computed");
                    extra = *cost;
                    let mut rng =
                        StreamKey::new(config.seed, rep as u64, method.tag(), Purpose::Bootstrap).stream();
                    bootstrap_test_from_summaries(
                        &observed,
                        c,
                        median,
                        config.alpha,
                        config.bootstrap_m,
                        mult,
                        &mut rng,
                    )?
                }
            };
            t.seconds.push(shared + extra + clock.elapsed().as_secs_f64());
            t.reject.push(outcome.reject);
            t.warned.push(!outcome.warnings.is_empty());
        }
        Ok(t)
    };

    let tallies: Vec<Result<Tally>> = pool(opts.workers)?.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                one(rep).map_err(|e| Error::Replication {
                    replication: rep,
                    source: Box::new(e),
                })
            })
            .collect()
    });

    let reps = config.reps as f64;
    let mut rejections = vec![0usize; methods.len()];
    let mut warned = vec![0usize; methods.len()];
    let mut seconds = vec![0.0f64; methods.len()];
    // first failing replication in index order, whatever the schedule
    for t in tallies {
        let t = t?;
        for k in 0..methods.len() {
            rejections[k] += t.reject[k] as usize;
            warned[k] += t.warned[k] as usize;
            seconds[k] += t.seconds[k];
        }
    }
    let results = methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let r = rejections[k] as f64 / reps;
            MethodResult {
                method,
                rejections: rejections[k],
                rejection_rate: r,
                stderr: (r * (1.0 - r) / reps).sqrt(),
                seconds: opts.timing.then_some(seconds[k]),
                warned: warned[k],
            }
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        delta,
        results,
    })
}

/// Average relative error `100 · mean |α̂_j − α| / α`.
pub fn are_summary(sizes: &[f64], alpha: f64) -> Result<f64> {
    if sizes.is_empty() {
        return Err(Error::domain("ARE needs at least one size"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    let total: f64 = sizes.iter().map(|s| (s - alpha).abs()).sum();
    Ok(100.0 * total / (sizes.len() as f64 * alpha))
}

pub const DESK_N: [usize; 3] = [40, 80, 120];
pub const DESK_P: [usize; 3] = [100, 200, 400];
pub const DESK_RHO: [f64; 3] = [0.1, 0.5, 0.9];

/// The full design: three models × size/power × ρ × n × p, 162 cells.
pub fn desk_grid(seed: u64, reps: usize, bootstrap_m: usize, alpha: f64) -> Vec<ExperimentConfig> {
    let families = [
        Family::Normal,
        Family::StudentT { nu: 3.0 },
        Family::reference_mixture(),
    ];
    let mut grid = Vec::with_capacity(162);
    for family in families {
        for hypothesis in [Hypothesis::Null, Hypothesis::PowerShift] {
            for rho in DESK_RHO {
                for p in DESK_P {
                    for n in DESK_N {
                        let mut c = ExperimentConfig::new(n, p, rho, family, hypothesis, seed);
                        c.reps = reps;
                        c.bootstrap_m = bootstrap_m;
                        c.alpha = alpha;
                        grid.push(c);
                    }
                }
            }
        }
    }
    grid
}

#[derive(Debug)]
pub struct SuiteCell {
    pub config: ExperimentConfig,
    pub outcome: Result<ExperimentReport>,
}

#[derive(Debug)]
pub struct SuiteReport {
    pub cells: Vec<SuiteCell>,
}

impl SuiteReport {
    pub fn reports(&self) -> impl Iterator<Item = &ExperimentReport> {
        self.cells.iter().filter_map(|c| c.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&ExperimentConfig, &Error)> {
        self.cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().err().map(|e| (&c.config, e)))
    }
}

/// Runs every cell in order; a failing cell is recorded and the suite moves on.
pub fn run_suite<F>(grid: &[ExperimentConfig], opts: RunOptions, mut progress: F) -> Result<SuiteReport>
where
    F: FnMut(usize, &SuiteCell),
{
    if grid.is_empty() {
        return Err(Error::domain("suite grid is empty"));
    }
    let mut cells = Vec::with_capacity(grid.len());
    for (i, config) in grid.iter().enumerate() {
        let cell = SuiteCell {
            config: config.clone(),
            outcome: run_experiment(config, opts),
        };
        progress(i, &cell);
        cells.push(cell);
    }
    Ok(SuiteReport { cells })
}

/// One line of the CSV report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub model: String,
    pub hypothesis: String,
    pub method: String,
    pub reps: usize,
    #[serde(rename = "bootstrap_M")]
    pub bootstrap_m: usize,
    pub alpha: f64,
    pub rejection_rate: f64,
    pub stderr: f64,
    pub seconds: Option<f64>,
}

pub fn csv_rows(report: &ExperimentReport) -> Vec<CsvRow> {
    let c = &report.config;
    report
        .results
        .iter()
        .map(|r| CsvRow {
            n: c.n,
            p: c.p,
            rho: c.rho,
            model: c.family.to_string(),
            hypothesis: c.hypothesis.to_string(),
            method: r.method.to_string(),
            reps: c.reps,
            bootstrap_m: c.bootstrap_m,
            alpha: c.alpha,
            rejection_rate: r.rejection_rate,
            stderr: r.stderr,
            seconds: r.seconds,
        })
        .collect()
}

/// Writes the header and one row per (cell, method). Floats are written in
/// shortest round-trip form, so parsing recovers them exactly.
pub fn write_csv<'a, W, I>(out: W, reports: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ExperimentReport>,
{
    let mut w = csv::Writer::from_writer(out);
    for report in reports {
        for row in csv_rows(report) {
            w.serialize(row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`]; lines starting with `#` are skipped.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    let (row, column) = e.position().map(|p| (p.line() as usize, 0)).unwrap_or((0, 0));
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            row,
            column,
            message: format!("{other:?}"),
        },
    }
}

/// A markdown table for one (model, hypothesis) block.
#[derive(Clone, Debug)]
pub struct MarkdownTable {
    pub model: String,
    pub hypothesis: Hypothesis,
    pub body: String,
}

impl MarkdownTable {
    /// File stem such as `normal_size` or `t_3_power`.
    pub fn stem(&self) -> String {
        let model: String = self
            .model
            .chars()
            .map(|c| match c {
                ':' => '_',
                '.' => 'p',
                c => c,
            })
            .collect();
        let kind = match self.hypothesis {
            Hypothesis::Null => "size",
            Hypothesis::PowerShift => "power",
        };
        format!("{model}_{kind}")
    }
}

/// Lays results out as comparison tables: one table per model and
/// hypothesis, a column group of methods per ρ, rows by `p` then `n`, and for
/// size tables an ARE row. Entries are percentages.
pub fn markdown_tables<'a, I>(reports: I) -> Vec<MarkdownTable>
where
    I: IntoIterator<Item = &'a ExperimentReport>,
{
    let mut blocks: BTreeMap<(String, Hypothesis), Vec<&ExperimentReport>> = BTreeMap::new();
    for r in reports {
        blocks
            .entry((r.config.family.to_string(), r.config.hypothesis))
            .or_default()
            .push(r);
    }
    blocks
        .into_iter()
        .map(|((model, hypothesis), cells)| MarkdownTable {
            body: render_block(&model, hypothesis, &cells),
            model,
            hypothesis,
        })
        .collect()
}

fn render_block(model: &str, hypothesis: Hypothesis, cells: &[&ExperimentReport]) -> String {
    let mut rhos: Vec<f64> = Vec::new();
    for c in cells {
        if !rhos.contains(&c.config.rho) {
            rhos.push(c.config.rho);
        }
    }
    rhos.sort_by(f64::total_cmp);
    let methods: BTreeSet<Method> = cells
        .iter()
        .flat_map(|c| c.results.iter().map(|r| r.method))
        .collect();
    let methods: Vec<Method> = methods.into_iter().collect();
    let sizes: BTreeSet<(usize, usize)> = cells.iter().map(|c| (c.config.p, c.config.n)).collect();
    let alpha = cells[0].config.alpha;
    let lookup = |p: usize, n: usize, rho: f64, m: Method| {
        cells
            .iter()
            .find(|c| c.config.p == p && c.config.n == n && c.config.rho == rho)
            .and_then(|c| c.rate(m))
    };

    let what = match hypothesis {
        Hypothesis::Null => "Empirical sizes",
        Hypothesis::PowerShift => "Empirical powers",
    };
    let mut s = format!("{what} (%), model {model}, alpha = {alpha}\n\n");
    s.push_str("| n | p |");
    for rho in &rhos {
        for m in &methods {
            s.push_str(&format!(" {m} (rho={rho}) |"));
        }
    }
    s.push_str("\n|---|---|");
    for _ in 0..rhos.len() * methods.len() {
        s.push_str("---:|");
    }
    s.push('\n');
    for &(p, n) in &sizes {
        s.push_str(&format!("| {n} | {p} |"));
        for &rho in &rhos {
            for &m in &methods {
                match lookup(p, n, rho, m) {
                    Some(r) => s.push_str(&format!(" {:.2} |", 100.0 * r)),
                    None => s.push_str(" - |"),
                }
            }
        }
        s.push('\n');
    }
    if hypothesis == Hypothesis::Null {
        s.push_str("| ARE (%) | |");
        for &rho in &rhos {
            for &m in &methods {
                let col: Vec<f64> = sizes.iter().filter_map(|&(p, n)| lookup(p, n, rho, m)).collect();
                match are_summary(&col, alpha) {
                    Ok(a) => s.push_str(&format!(" {a:.2} |")),
                    Err(_) => s.push_str(" - |"),
                }
            }
        }
        s.push('\n');
    }
    s
}
