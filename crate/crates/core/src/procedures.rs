//! The four calibrations of the spatial-sign location test.
//!
//! * `WPL`: standard normal calibration of `S_n / √(C(n,2)·tr̂(Σ_U²))`.
//! * `ZGCZ`: `χ²_d̂` calibration of `d̂·n‖Ū‖²`, `d̂ = n/((n−1)·tr̂(Σ_U²))`.
//! * `TR` / `TN`: wild bootstrap with Rademacher or Gaussian multipliers applied
//!   to signs centred at the spatial median.
//!
//! All four reject for large positive statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::median::{spatial_median, MedianOptions, MedianResult};
use crate::scalar::Real;
use crate::scatter::Dataset;
use crate::sign::{sign_summary, SignSummary};

/// Floor under the trace estimate inside the WPL denominator.
const TRACE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "WPL")]
    Wpl,
    #[serde(rename = "ZGCZ")]
    Zgcz,
    #[serde(rename = "TR")]
    Tr,
    #[serde(rename = "TN")]
    Tn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Wpl, Method::Zgcz, Method::Tr, Method::Tn];

    /// Stable numeric tag used when keying random streams.
    pub fn tag(self) -> u64 {
        match self {
            Method::Wpl => 1,
            Method::Zgcz => 2,
            Method::Tr => 3,
            Method::Tn => 4,
        }
    }

    pub fn multiplier(self) -> Option<Multiplier> {
        match self {
            Method::Tr => Some(Multiplier::Rademacher),
            Method::Tn => Some(Multiplier::Gaussian),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Wpl => "WPL",
            Method::Zgcz => "ZGCZ",
            Method::Tr => "TR",
            Method::Tn => "TN",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "WPL" => Ok(Method::Wpl),
            "ZGCZ" => Ok(Method::Zgcz),
            "TR" => Ok(Method::Tr),
            "TN" => Ok(Method::Tn),
            other => Err(Error::domain(format!(
                "unknown method '{other}' (expected WPL, ZGCZ, TR or TN)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    Rademacher,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// The trace estimate was not positive; the test did not reject.
    DegenerateTrace,
    /// Fewer replicates than `1/α`: the critical value is the sample maximum.
    LowResolution,
    /// Fewer replicates than the recommended `20/α`.
    FewReplicates,
    MedianNotConverged,
    /// Observations that coincided with the centre and got a zero sign.
    ZeroSignRows(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct TestOutcome<T> {
    pub method: Method,
    pub statistic: T,
    pub critical_value: T,
    pub reject: bool,
    pub alpha: f64,
    pub extras: BTreeMap<String, f64>,
    pub warnings: Vec<Warning>,
}

impl<T: Real> TestOutcome<T> {
    fn decided(method: Method, statistic: T, critical_value: T, alpha: f64) -> Self {
        Self {
            method,
            statistic,
            critical_value,
            reject: statistic > critical_value,
            alpha,
            extras: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn degenerate(method: Method, statistic: T, alpha: f64) -> Self {
        Self {
            method,
            statistic,
            critical_value: T::infinity(),
            reject: false,
            alpha,
            extras: BTreeMap::new(),
            warnings: vec![Warning::DegenerateTrace],
        }
    }
}

/// Bootstrap replicates of `Σ_{i<j} w_i w_j Û_iᵀÛ_j / √C(n,2)`.
#[derive(Clone, Debug)]
pub struct BootstrapDraws<T> {
    pub values: Vec<T>,
    pub multiplier: Multiplier,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n >= 4 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "the sign tests need n >= 4 observations, got {n}"
        )))
    }
}

/// `1 / √(n(n−1)/2)`.
fn pair_scale<T: Real>(n: usize) -> T {
    let pairs = T::of_usize(n) * T::of_usize(n - 1) * T::lit(0.5);
    T::one() / pairs.sqrt()
}

pub fn wpl_test<T: Real>(data: &Dataset<T>, alpha: f64) -> Result<TestOutcome<T>> {
    check_alpha(alpha)?;
    check_n(data.n())?;
    let s = sign_summary(data, None)?;
    wpl_from_summary(&s, alpha)
}

/// WPL on precomputed uncentred signs.
pub fn wpl_from_summary<T: Real>(s: &SignSummary<T>, alpha: f64) -> Result<TestOutcome<T>> {
    check_alpha(alpha)?;
    check_n(s.n())?;
    let tr2 = s.trace2_hat().expect("n >= 4 checked");
    let pairs = T::of_usize(s.n()) * T::of_usize(s.n() - 1) * T::lit(0.5);
    let statistic = s.sn() / (pairs * tr2.max(T::lit(TRACE_FLOOR))).sqrt();
    let mut out = if tr2 > T::zero() {
        let z = Normal::standard().inverse_cdf(1.0 - alpha);
        TestOutcome::decided(Method::Wpl, statistic, T::lit(z), alpha)
    } else {
        TestOutcome::degenerate(Method::Wpl, statistic, alpha)
    };
    out.extras.insert("trace2_hat".into(), tr2.to_f64_lossy());
    note_zero_rows(&mut out, s);
    Ok(out)
}

pub fn zgcz_test<T: Real>(data: &Dataset<T>, alpha: f64) -> Result<TestOutcome<T>> {
    check_alpha(alpha)?;
    check_n(data.n())?;
    let s = sign_summary(data, None)?;
    zgcz_from_summary(&s, alpha)
}

/// ZGCZ on precomputed uncentred signs.
pub fn zgcz_from_summary<T: Real>(s: &SignSummary<T>, alpha: f64) -> Result<TestOutcome<T>> {
    check_alpha(alpha)?;
    check_n(s.n())?;
    let n = T::of_usize(s.n());
    let tr2 = s.trace2_hat().expect("n >= 4 checked");
    // n‖Ū‖² = ‖Σ U_i‖² / n
    let norm_sq = s.total().dot(s.total()) / n;
    let mut out = if tr2 > T::zero() {
        let d_hat = n / ((n - T::one()) * tr2);
        let statistic = d_hat * norm_sq;
        let chi = ChiSquared::new(d_hat.to_f64_lossy())
            .map_err(|e| Error::Numeric(format!("chi-square reference: {e}")))?;
        let crit = chi.inverse_cdf(1.0 - alpha);
        let mut o = TestOutcome::decided(Method::Zgcz, statistic, T::lit(crit), alpha);
        o.extras.insert("d_hat".into(), d_hat.to_f64_lossy());
        o
    } else {
        TestOutcome::degenerate(Method::Zgcz, norm_sq, alpha)
    };
    out.extras.insert("trace2_hat".into(), tr2.to_f64_lossy());
    note_zero_rows(&mut out, s);
    Ok(out)
}

fn note_zero_rows<T: Real>(out: &mut TestOutcome<T>, s: &SignSummary<T>) {
    if !s.zero_rows().is_empty() {
        out.warnings.push(Warning::ZeroSignRows(s.zero_rows().len()));
    }
}

/// Draws an `M × n` matrix of multipliers, row by row.
fn multipliers<T, R>(m: usize, n: usize, kind: Multiplier, rng: &mut R) -> Array2<T>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    let mut w = Array2::<T>::zeros((m, n));
    match kind {
        Multiplier::Rademacher => {
            let (one, minus) = (T::one(), -T::one());
            for mut row in w.axis_iter_mut(Axis(0)) {
                let mut bits = 0u64;
                for (i, v) in row.iter_mut().enumerate() {
                    if i % 64 == 0 {
                        bits = rng.random();
                    }
                    *v = if bits & 1 == 1 { one } else { minus };
                    bits >>= 1;
                }
            }
        }
        Multiplier::Gaussian => {
            for v in w.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
    }
    w
}

/// Evaluates `½(‖Σ w_i Û_i‖² − Σ w_i² ‖Û_i‖²) / √C(n,2)` for each row of `w`,
/// through the Gram matrix when `n ≤ p` and through `W Û` otherwise.
fn evaluate_draws<T: Real>(
    signs: ArrayView2<'_, T>,
    gram: Option<ArrayView2<'_, T>>,
    w: &Array2<T>,
) -> Vec<T> {
    let (n, p) = signs.dim();
    let scale = pair_scale::<T>(n) * T::lit(0.5);
    let norms: Vec<T> = signs.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
    let diag_term = |row: ndarray::ArrayView1<'_, T>| -> T {
        row.iter().zip(&norms).map(|(&wi, &ni)| wi * wi * ni).sum()
    };
    match gram {
        Some(g) if n <= p => {
            let wg = w.dot(&g);
            wg.axis_iter(Axis(0))
                .zip(w.axis_iter(Axis(0)))
                .map(|(a, b)| (a.dot(&b) - diag_term(b)) * scale)
                .collect()
        }
        _ => {
            let wu = w.dot(&signs);
            wu.axis_iter(Axis(0))
                .zip(w.axis_iter(Axis(0)))
                .map(|(a, b)| (a.dot(&a) - diag_term(b)) * scale)
                .collect()
        }
    }
}

/// `M` wild-bootstrap replicates from centred sign vectors (rows unit or zero).
pub fn bootstrap_draws<T, R>(
    u_hat: ArrayView2<'_, T>,
    m: usize,
    multiplier: Multiplier,
    rng: &mut R,
) -> Result<BootstrapDraws<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    draws_with_gram(u_hat, None, m, multiplier, rng)
}

fn draws_with_gram<T, R>(
    u_hat: ArrayView2<'_, T>,
    gram: Option<ArrayView2<'_, T>>,
    m: usize,
    multiplier: Multiplier,
    rng: &mut R,
) -> Result<BootstrapDraws<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    if m == 0 {
        return Err(Error::domain("bootstrap needs at least one replicate"));
    }
    let n = u_hat.nrows();
    if n < 2 {
        return Err(Error::domain(format!("bootstrap needs n >= 2 signs, got {n}")));
    }
    let w = multipliers(m, n, multiplier, rng);
    let values = evaluate_draws(u_hat, gram, &w);
    Ok(BootstrapDraws { values, multiplier })
}

/// Replicates for given multipliers, one row of `w` per replicate.
pub fn draws_for_multipliers<T: Real>(u_hat: ArrayView2<'_, T>, w: ArrayView2<'_, T>) -> Result<Vec<T>> {
    if w.ncols() != u_hat.nrows() {
        return Err(Error::Dimension {
            expected: u_hat.nrows(),
            actual: w.ncols(),
        });
    }
    Ok(evaluate_draws(u_hat, None, &w.to_owned()))
}

/// Draws from a summary, reusing its Gram matrix.
pub fn bootstrap_from_summary<T, R>(
    centered: &SignSummary<T>,
    m: usize,
    multiplier: Multiplier,
    rng: &mut R,
) -> Result<BootstrapDraws<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    draws_with_gram(
        centered.signs().view(),
        Some(centered.gram().view()),
        m,
        multiplier,
        rng,
    )
}

/// The `k`-th smallest draw with `k = ⌈(1−α)(M+1)⌉` clipped to `[1, M]`.
pub fn bootstrap_critical_value<T: Real>(draws: &[T], alpha: f64) -> Result<T> {
    check_alpha(alpha)?;
    let m = draws.len();
    if m == 0 {
        return Err(Error::domain("no bootstrap draws"));
    }
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite bootstrap draw".into()));
    }
    let k = order_statistic_index(m, alpha);
    let mut sorted = draws.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
    Ok(*kth)
}

fn order_statistic_index(m: usize, alpha: f64) -> usize {
    let target = (1.0 - alpha) * (m as f64 + 1.0);
    // absorb representation error in products that are exact integers
    let k = (target - 1e-9 * target).ceil() as usize;
    k.clamp(1, m)
}

/// Observed statistic of the bootstrap tests, `S_n / √C(n,2)` on uncentred signs.
pub fn unscaled_statistic<T: Real>(s: &SignSummary<T>) -> T {
    s.sn() * pair_scale::<T>(s.n())
}

/// Full TR/TN procedure on data: spatial median, centred signs, `M` draws.
pub fn wild_bootstrap_test<T, R>(
    data: &Dataset<T>,
    alpha: f64,
    m: usize,
    multiplier: Multiplier,
    rng: &mut R,
) -> Result<TestOutcome<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    check_alpha(alpha)?;
    check_n(data.n())?;
    let observed = sign_summary(data, None)?;
    let median = spatial_median(data, MedianOptions::for_scalar::<T>())?;
    let centered = sign_summary(data, Some(median.mu_hat.view()))?;
    bootstrap_test_from_summaries(&observed, &centered, &median, alpha, m, multiplier, rng)
}

/// TR/TN given uncentred signs, median-centred signs and the median itself.
pub fn bootstrap_test_from_summaries<T, R>(
    observed: &SignSummary<T>,
    centered: &SignSummary<T>,
    median: &MedianResult<T>,
    alpha: f64,
    m: usize,
    multiplier: Multiplier,
    rng: &mut R,
) -> Result<TestOutcome<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    check_alpha(alpha)?;
    check_n(observed.n())?;
    let draws = bootstrap_from_summary(centered, m, multiplier, rng)?;
    let crit = bootstrap_critical_value(&draws.values, alpha)?;
    let method = match multiplier {
        Multiplier::Rademacher => Method::Tr,
        Multiplier::Gaussian => Method::Tn,
    };
    let mut out = TestOutcome::decided(method, unscaled_statistic(observed), crit, alpha);
    out.extras.insert("bootstrap_replicates".into(), m as f64);
    out.extras
        .insert("median_iterations".into(), median.iterations as f64);
    if (m as f64) < 1.0 / alpha {
        out.warnings.push(Warning::LowResolution);
    } else if (m as f64) < 20.0 / alpha {
        out.warnings.push(Warning::FewReplicates);
    }
    if !median.converged {
        out.warnings.push(Warning::MedianNotConverged);
    }
    if !centered.zero_rows().is_empty() {
        out.warnings
            .push(Warning::ZeroSignRows(centered.zero_rows().len()));
    }
    Ok(out)
}

/// Runs any of the four methods on a dataset.
pub fn run_method<T, R>(
    method: Method,
    data: &Dataset<T>,
    alpha: f64,
    m: usize,
    rng: &mut R,
) -> Result<TestOutcome<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    match method {
        Method::Wpl => wpl_test(data, alpha),
        Method::Zgcz => zgcz_test(data, alpha),
        Method::Tr => wild_bootstrap_test(data, alpha, m, Multiplier::Rademacher, rng),
        Method::Tn => wild_bootstrap_test(data, alpha, m, Multiplier::Gaussian, rng),
    }
}
