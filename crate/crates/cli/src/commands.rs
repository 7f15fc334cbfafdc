use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use spatial_sign::experiment::{self, desk_grid, ExperimentConfig, RunOptions, DESK_N, DESK_P, DESK_RHO};
use spatial_sign::limits::{self, mc_sign_scatter, Kappa4Method, Kappa4Report, SpectralWeights};
use spatial_sign::{
    run_method, stats, DistributionModel, Error, Family, Hypothesis, Purpose, Result, ScatterSpec, StreamKey,
    TestOutcome,
};

use crate::args::{Format, Law, Settings};
use crate::data;

/// Signs drawn to estimate a model's sign scatter for `limits`.
const SCATTER_DRAWS: usize = 20_000;

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Full-precision float: 17 significant digits.
fn full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn seed_of(s: &Settings) -> u64 {
    s.seed.unwrap_or_else(rand::random)
}

fn seed_line(format: Format, seed: u64) -> String {
    match format {
        Format::JsonLines => format!("{{\"seed\":{seed}}}"),
        Format::Csv | Format::Markdown => format!("# seed={seed}"),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Numeric(format!("serialization failed: {e}")))
}

pub fn test(s: &Settings) -> Result<()> {
    let path = s
        .input
        .as_deref()
        .ok_or_else(|| Error::Domain("test needs --input <data file>".into()))?;
    let data = data::read_dataset(path)?;
    let seed = seed_of(s);
    let outcomes = s
        .methods
        .iter()
        .map(|&m| {
            let mut rng = StreamKey::new(seed, 0, m.tag(), Purpose::Bootstrap).stream();
            run_method(m, &data, s.alpha, s.bootstrap, &mut rng)
        })
        .collect::<Result<Vec<TestOutcome<f64>>>>()?;

    let mut out = open_out(s.out.as_deref())?;
    writeln!(out, "{}", seed_line(s.format, seed))?;
    match s.format {
        Format::Csv => {
            writeln!(out, "method,statistic,critical_value,reject,alpha,warnings")?;
            for o in &outcomes {
                let warnings: Vec<String> = o.warnings.iter().map(|w| format!("{w:?}")).collect();
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    o.method,
                    full(o.statistic),
                    full(o.critical_value),
                    o.reject,
                    o.alpha,
                    warnings.join(";")
                )?;
            }
        }
        Format::Markdown => {
            writeln!(out, "\n| method | statistic | critical value | decision |")?;
            writeln!(out, "|---|---:|---:|---|")?;
            for o in &outcomes {
                let decision = if o.reject { "reject" } else { "retain" };
                writeln!(
                    out,
                    "| {} | {} | {} | {decision} |",
                    o.method,
                    full(o.statistic),
                    full(o.critical_value)
                )?;
            }
        }
        Format::JsonLines => {
            for o in &outcomes {
                writeln!(out, "{}", json(o)?)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn grid(s: &Settings, seed: u64, suite: bool) -> Vec<ExperimentConfig> {
    let reps = s.reps.unwrap_or(2000);
    let configure = |mut c: ExperimentConfig| {
        c.reps = reps;
        c.bootstrap_m = s.bootstrap;
        c.alpha = s.alpha;
        c.methods = s.methods.clone();
        c
    };
    if suite {
        // the full design, narrowed by whichever lists were given
        return desk_grid(seed, reps, s.bootstrap, s.alpha)
            .into_iter()
            .filter(|c| {
                s.n.as_ref().is_none_or(|v| v.contains(&c.n))
                    && s.p.as_ref().is_none_or(|v| v.contains(&c.p))
                    && s.rho.as_ref().is_none_or(|v| v.contains(&c.rho))
                    && s.model.as_ref().is_none_or(|v| v.contains(&c.family))
                    && s.hypothesis.as_ref().is_none_or(|v| v.contains(&c.hypothesis))
            })
            .map(configure)
            .collect();
    }
    let models = s.model.clone().unwrap_or_else(|| vec![Family::Normal]);
    let hyps = s.hypothesis.clone().unwrap_or_else(|| vec![Hypothesis::Null]);
    let rhos = s.rho.clone().unwrap_or_else(|| vec![0.1]);
    let ps = s.p.clone().unwrap_or_else(|| vec![100]);
    let ns = s.n.clone().unwrap_or_else(|| vec![40]);
    let mut cells = Vec::new();
    for &family in &models {
        for &h in &hyps {
            for &rho in &rhos {
                for &p in &ps {
                    for &n in &ns {
                        cells.push(configure(ExperimentConfig::new(n, p, rho, family, h, seed)));
                    }
                }
            }
        }
    }
    cells
}

fn run_options(s: &Settings) -> RunOptions {
    RunOptions {
        workers: s.workers,
        timing: s.timing,
    }
}

fn describe(c: &ExperimentConfig) -> String {
    format!(
        "n={} p={} rho={} model={} hypothesis={}",
        c.n, c.p, c.rho, c.family, c.hypothesis
    )
}

pub fn experiment(s: &Settings) -> Result<()> {
    let seed = seed_of(s);
    let cells = grid(s, seed, false);
    let total = cells.len();
    let mut reports = Vec::with_capacity(total);
    for (i, c) in cells.iter().enumerate() {
        if total > 1 {
            eprintln!("[{}/{total}] {}", i + 1, describe(c));
        }
        reports.push(experiment::run_experiment(c, run_options(s))?);
    }
    let mut out = open_out(s.out.as_deref())?;
    writeln!(out, "{}", seed_line(s.format, seed))?;
    write_reports(&mut out, s.format, &reports)?;
    out.flush()?;
    Ok(())
}

fn write_reports(
    out: &mut dyn Write,
    format: Format,
    reports: &[experiment::ExperimentReport],
) -> Result<()> {
    match format {
        Format::Csv => experiment::write_csv(out, reports)?,
        Format::Markdown => {
            for t in experiment::markdown_tables(reports) {
                writeln!(out, "\n{}", t.body)?;
            }
        }
        Format::JsonLines => {
            for r in reports {
                for row in experiment::csv_rows(r) {
                    writeln!(out, "{}", json(&row)?)?;
                }
            }
        }
    }
    Ok(())
}

pub fn suite(s: &Settings) -> Result<()> {
    let dir = s
        .out
        .as_deref()
        .ok_or_else(|| Error::Domain("suite needs --out <directory>".into()))?;
    let seed = seed_of(s);
    let cells = grid(s, seed, true);
    if cells.is_empty() {
        return Err(Error::Domain(format!(
            "the selection matches no cell of the design (n in {DESK_N:?}, p in {DESK_P:?}, rho in {DESK_RHO:?})"
        )));
    }
    fs::create_dir_all(dir)?;
    let total = cells.len();
    let report = experiment::run_suite(&cells, run_options(s), |i, cell| {
        let status = match &cell.outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("FAILED: {e}"),
        };
        eprintln!("[{}/{total}] {} {status}", i + 1, describe(&cell.config));
    })?;
    let reports: Vec<_> = report.reports().cloned().collect();

    let mut csv = BufWriter::new(File::create(dir.join("suite.csv"))?);
    writeln!(csv, "{}", seed_line(Format::Csv, seed))?;
    experiment::write_csv(&mut csv, &reports)?;
    csv.flush()?;
    for t in experiment::markdown_tables(&reports) {
        fs::write(
            dir.join(format!("{}.md", t.stem())),
            format!("{}\n{}", seed_line(Format::Markdown, seed), t.body),
        )?;
    }
    if s.format == Format::JsonLines {
        let mut jl = BufWriter::new(File::create(dir.join("suite.jsonl"))?);
        writeln!(jl, "{}", seed_line(Format::JsonLines, seed))?;
        write_reports(&mut jl, Format::JsonLines, &reports)?;
        jl.flush()?;
    }

    let failures: Vec<_> = report.failures().collect();
    if let Some((_, first)) = failures.first() {
        let mut log = String::new();
        for (c, e) in &failures {
            log.push_str(&format!("{}: {e}\n", describe(c)));
        }
        fs::write(dir.join("failures.txt"), log)?;
        let numeric = failures.iter().any(|(_, e)| e.is_numeric());
        let msg = format!("{} of {total} cells failed; first: {first}", failures.len());
        return Err(if numeric {
            Error::Numeric(msg)
        } else {
            Error::Domain(msg)
        });
    }
    Ok(())
}

fn first<T: Copy>(v: &Option<Vec<T>>, default: T) -> T {
    v.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
}

pub fn limits(s: &Settings) -> Result<()> {
    let seed = seed_of(s);
    let weights = match &s.weights {
        Some(path) => SpectralWeights::from_eigenvalues(&data::read_numbers(path)?)?,
        None => {
            let p = first(&s.p, 100);
            let rho = first(&s.rho, 0.1);
            let model = DistributionModel::centered(first(&s.model, Family::Normal), p)?;
            let scatter = ScatterSpec::equicorrelated(p, rho, 1.0)?;
            let mut rng = StreamKey::root(seed, Purpose::Auxiliary).stream();
            let sigma_u = mc_sign_scatter(&model, &scatter, SCATTER_DRAWS, &mut rng)?;
            limits::spectral_weights(sigma_u.view())?
        }
    };
    let count = s.reps.unwrap_or(10_000);
    if count < 2 {
        return Err(Error::Domain("limits needs --reps of at least 2".into()));
    }
    let mut rng = StreamKey::root(seed, Purpose::LimitLaw).stream();
    let (draws, rescaled) = match s.law {
        Law::TInfinity => (limits::sample_t_infinity(&weights.alpha, count, &mut rng)?, false),
        Law::Qp => {
            let d = limits::sample_qp(&weights, count, &mut rng);
            (d.values, d.rescaled)
        }
    };
    let m = stats::moments(&draws)?;

    let mut out = open_out(s.out.as_deref())?;
    writeln!(out, "# seed={seed}")?;
    writeln!(
        out,
        "# law={} p={} tau={} clt_gate={}{}",
        s.law,
        weights.dim(),
        full(weights.tau),
        full(weights.alpha.iter().map(|a| a.powi(4)).sum()),
        if rescaled { " rescaled=true" } else { "" }
    )?;
    writeln!(
        out,
        "# count={} mean={} variance={} skewness={} third_central={}",
        m.count,
        full(m.mean),
        full(m.variance),
        full(m.skewness),
        full(m.third_central)
    )?;
    for v in &draws {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Kappa4Row {
    p: usize,
    rho: f64,
    #[serde(flatten)]
    report: Kappa4Report,
}

pub fn kappa4(s: &Settings) -> Result<()> {
    let seed = seed_of(s);
    let p = first(&s.p, 100);
    let rho = first(&s.rho, 0.0);
    let mut rows = Vec::new();
    if rho == 0.0 {
        rows.push(Kappa4Report {
            value: limits::kappa4_spherical(p)?,
            method: Kappa4Method::SphericalClosedForm,
            stderr: None,
            tau: Some(1.0 / p as f64),
        });
    }
    if p >= 2 {
        rows.push(limits::kappa4_compound_symmetric(p, rho)?);
    }
    if let Some(pairs) = s.reps {
        let model = DistributionModel::centered(first(&s.model, Family::Normal), p)?;
        let scatter = ScatterSpec::equicorrelated(p, rho, 1.0)?;
        let mut rng = StreamKey::root(seed, Purpose::Kappa).stream();
        rows.push(limits::kappa4_mc(&model, &scatter, pairs, &mut rng)?);
    }

    let opt = |v: Option<f64>| v.map(full).unwrap_or_default();
    let mut out = open_out(s.out.as_deref())?;
    writeln!(out, "{}", seed_line(s.format, seed))?;
    match s.format {
        Format::Csv => {
            writeln!(out, "p,rho,method,kappa4,stderr,tau")?;
            for r in &rows {
                writeln!(
                    out,
                    "{p},{rho},{:?},{},{},{}",
                    r.method,
                    full(r.value),
                    opt(r.stderr),
                    opt(r.tau)
                )?;
            }
        }
        Format::Markdown => {
            writeln!(out, "\n| p | rho | method | kappa4 | stderr | tau |")?;
            writeln!(out, "|---:|---:|---|---:|---:|---:|")?;
            for r in &rows {
                writeln!(
                    out,
                    "| {p} | {rho} | {:?} | {} | {} | {} |",
                    r.method,
                    full(r.value),
                    opt(r.stderr),
                    opt(r.tau)
                )?;
            }
        }
        Format::JsonLines => {
            for &report in &rows {
                writeln!(out, "{}", json(&Kappa4Row { p, rho, report })?)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
