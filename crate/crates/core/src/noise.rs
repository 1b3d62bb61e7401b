//! Concentration bounds `p_t ≥ ℙ(|ε_i − ε_j| > t)` for the additive noise.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    /// No noise: `p_t = 0` for every `t > 0`.
    Noiseless,
    /// i.i.d. Gaussian noise with standard deviation `sigma` per dimension:
    /// `p_t = (2σ/t) · exp(−t²/4σ²) / √(2π)`, clamped to `[0, 1]` (the raw
    /// expression exceeds 1 for small `t`).
    Gaussian { sigma: f64 },
    /// A user-supplied table of `(t, p_t)` points, interpolated linearly.
    /// `t` must be strictly increasing and `p_t` nonincreasing in `[0, 1]`.
    Table { points: Vec<(f64, f64)> },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || sigma.is_nan() || sigma.is_infinite() {
            return Err(Error::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(NoiseModel::Gaussian { sigma })
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("noise table is empty".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidConfig("noise table t values must strictly increase".into()));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::InvalidConfig("noise table p values must be nonincreasing".into()));
            }
        }
        for &(t, p) in &points {
            if t <= 0.0 || t.is_nan() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "noise table entries need t > 0 and p in [0,1], got ({t}, {p})"
                )));
            }
        }
        Ok(NoiseModel::Table { points })
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self, NoiseModel::Noiseless)
    }

    /// The tail bound `p_t` at threshold `t > 0`.
    pub fn tail(&self, t: f64) -> Result<f64> {
        if t <= 0.0 || t.is_nan() || t.is_infinite() {
            return Err(Error::InvalidInput(format!("threshold must be > 0, got {t}")));
        }
        Ok(match self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Gaussian { sigma } => {
                let raw = (2.0 * sigma / t) * (-t * t / (4.0 * sigma * sigma)).exp()
                    / (2.0 * std::f64::consts::PI).sqrt();
                raw.clamp(0.0, 1.0)
            }
            NoiseModel::Table { points } => {
                if t <= points[0].0 {
                    points[0].1
                } else if t >= points[points.len() - 1].0 {
                    points[points.len() - 1].1
                } else {
                    let k = points.partition_point(|&(ti, _)| ti < t);
                    let (t0, p0) = points[k - 1];
                    let (t1, p1) = points[k];
                    p0 + (p1 - p0) * (t - t0) / (t1 - t0)
                }
            }
        })
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("noise model serializes")
    }
}
