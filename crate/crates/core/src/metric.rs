//! Distances on the input space and norms on the output space.

use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// User-registered distance function.
pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A metric on input vectors.
#[derive(Clone)]
pub enum Metric {
    Euclidean,
    /// Minkowski distance with exponent `p ≥ 1`; use [`Metric::minkowski`].
    Minkowski(f64),
    /// A user-registered metric. The caller is responsible for the metric
    /// axioms; the test engines only require symmetry and nonnegativity.
    Custom { name: String, eval: DistanceFn },
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => write!(f, "euclidean"),
            Metric::Minkowski(p) => write!(f, "minkowski({p})"),
            Metric::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

impl Metric {
    pub fn minkowski(p: f64) -> Result<Self> {
        if p < 1.0 || !p.is_finite() {
            return Err(Error::InvalidConfig(format!("Minkowski exponent must be ≥ 1, got {p}")));
        }
        Ok(Metric::Minkowski(p))
    }

    pub fn custom<F>(name: &str, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Metric::Custom { name: name.to_string(), eval: Arc::new(eval) }
    }

    /// Evaluates the distance. Panics on dimension mismatch; the public
    /// operations validate dimensions before reaching this hot path.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), y.len(), "metric arguments must share a dimension");
        match self {
            Metric::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::Minkowski(p) => {
                if *p == 1.0 {
                    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
                } else {
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| (a - b).abs().powf(*p))
                        .sum::<f64>()
                        .powf(1.0 / p)
                }
            }
            Metric::Custom { eval, .. } => eval(x, y),
        }
    }

    /// Tag used in report config echoes.
    pub fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// A norm on output vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputNorm {
    Euclidean,
    /// Max (ℓ∞) norm. The default for multi-dimensional outputs: paired with
    /// a per-dimension noise tail it admits a union bound over dimensions.
    Max,
    /// Absolute value; requires one-dimensional outputs.
    Abs,
}

impl OutputNorm {
    pub fn norm(&self, y: &[f64]) -> f64 {
        match self {
            OutputNorm::Euclidean => y.iter().map(|v| v * v).sum::<f64>().sqrt(),
            OutputNorm::Max => y.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            OutputNorm::Abs => {
                assert_eq!(y.len(), 1, "absolute-value norm needs scalar outputs");
                y[0].abs()
            }
        }
    }

    /// `|a − b|` in this norm.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len(), "norm arguments must share a dimension");
        match self {
            OutputNorm::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = x - y;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            OutputNorm::Max => a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
            OutputNorm::Abs => {
                assert_eq!(a.len(), 1, "absolute-value norm needs scalar outputs");
                (a[0] - b[0]).abs()
            }
        }
    }

    /// Default choice for a given output dimension: absolute value for
    /// scalars, max-norm otherwise.
    pub fn default_for_dim(d: usize) -> Self {
        if d == 1 {
            OutputNorm::Abs
        } else {
            OutputNorm::Max
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            OutputNorm::Euclidean => "euclidean",
            OutputNorm::Max => "max",
            OutputNorm::Abs => "abs",
        }
    }
}
