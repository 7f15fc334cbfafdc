//! High-dimensional location tests based on spatial signs.
//!
//! The numeric core is generic over `f32`/`f64` through [`Real`]; the
//! aliases below fix the scalar for the common cases.

pub mod error;
pub mod experiment;

pub mod limits;
pub mod linalg;
pub mod median;
pub mod procedures;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod scatter;
pub mod sign;
pub mod stats;

pub use error::{Error, Result};
pub use experiment::{
    are_summary, run_experiment, run_suite, ExperimentConfig, ExperimentReport, Hypothesis, RunOptions,
};
pub use limits::{
    clt_gate, kappa4_compound_symmetric, kappa4_mc, kappa4_spherical, sample_qp, sample_t_infinity,
    spectral_weights, Kappa4Method, Kappa4Report, SpectralWeights,
};
pub use median::{spatial_median, MedianOptions, MedianResult};
pub use procedures::{
    bootstrap_critical_value, bootstrap_draws, draws_for_multipliers, run_method, wild_bootstrap_test,
    wpl_test, zgcz_test, BootstrapDraws, Method, Multiplier, TestOutcome, Warning,
};
pub use rng::{Purpose, Stream, StreamKey};
pub use scalar::Real;
pub use scatter::{
    build_equicorrelated, model_covariance_factor, power_shift_delta, sample, Dataset, DistributionModel,
    Family, ScatterForm, ScatterSpec,
};
pub use sign::{sign_summary, spatial_sign, trace2_estimator, SignSummary};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type ScatterSpec64 = ScatterSpec<f64>;
pub type ScatterSpec32 = ScatterSpec<f32>;
pub type DistributionModel64 = DistributionModel<f64>;
pub type DistributionModel32 = DistributionModel<f32>;
pub type SignSummary64 = SignSummary<f64>;
pub type SignSummary32 = SignSummary<f32>;
pub type TestOutcome64 = TestOutcome<f64>;
pub type TestOutcome32 = TestOutcome<f32>;
pub type MedianResult64 = MedianResult<f64>;
