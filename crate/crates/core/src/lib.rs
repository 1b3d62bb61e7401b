//! Model-free tests for invariance and equivariance of regression functions.
//!
//! Given i.i.d. data `{(X_i, Y_i)}` and a finite (semi-)group `G` acting on
//! inputs (`g · x`) and linearly on outputs (`g ⋆ y`), this crate tests the
//! hypothesis that the regression function `f(x) = E(Y | X = x)` satisfies
//! `f(g · x) = g ⋆ f(x)` — before any model is trained.
//!
//! Two tests are provided:
//!
//! * [`avt`] — the asymmetric variation test. Requires a known bound
//!   `V(x, y)` on `|f(x) − f(y)|` (e.g. a Hölder bound `L·d(x,y)^α`) and a
//!   concentration bound `p_t` on the noise. Counts how often the output
//!   distance of a transformed pair exceeds what the bound plus noise allows,
//!   and converts the count into a binomial tail p-value.
//! * [`pvt`] — the permutation variant. Only needs the *order* of the bound
//!   (`|f(x) − f(y)| ≤ L_f · 𝒱(x, y)` for an unknown constant) and no noise
//!   model; compares batch quantiles of ratio statistics against an
//!   identity-action baseline.
//!
//! The companion modules supply everything around the engines: group actions
//! and their declarative JSON specs ([`action`]), seeded sampling
//! ([`sampling`]), synthetic targets and a kernel-symmetrisation demo
//! ([`synth`]), IDX image ingestion and the digit-orientation experiment
//! ([`mnist`]), and a Monte Carlo rejection-rate harness ([`experiments`]).

pub mod action;
pub mod avt;
pub mod bound;
pub mod dataset;
pub mod experiments;
pub mod metric;
pub mod mnist;
pub mod noise;
pub mod pvt;
pub mod sampling;
pub mod synth;

pub use action::{ActionSpec, GeneratorDistribution, GroupAction};
pub use avt::{binomial_tail, run_avt, AvtConfig, AvtReport, ThresholdSpec};
pub use bound::VariationBound;
pub use dataset::Dataset;
pub use metric::{Metric, OutputNorm};
pub use noise::NoiseModel;
pub use pvt::{quantile_type7, run_pvt, Pairing, PvtConfig, PvtReport};
pub use sampling::{mix_seed, nearest_neighbour, SampledPair, SeededRng};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
