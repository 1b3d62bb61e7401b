//! Bounds on the variation `|f(x) − f(y)|` of the regression function.

use std::fmt;
use std::sync::Arc;

use crate::metric::Metric;
use crate::{Error, Result};

type CustomEvaluator = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// The bound is fully known: `V(x, y) = L · d(x, y)^α`.
    KnownScale { l: f64 },
    /// Only the order is known: `𝒱(x, y) = d(x, y)^α`, the constant is not.
    OrderOnly,
}

/// A Hölder-parameterised variation bound, optionally overridden by a custom
/// evaluator for non-Hölder function classes.
#[derive(Clone)]
pub struct VariationBound {
    mode: Mode,
    alpha: f64,
    custom: Option<(String, CustomEvaluator)>,
}

impl fmt::Debug for VariationBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.mode, &self.custom) {
            (Mode::KnownScale { l }, None) => write!(f, "holder(L={l}, alpha={})", self.alpha),
            (Mode::OrderOnly, None) => write!(f, "order-only(alpha={})", self.alpha),
            (_, Some((name, _))) => write!(f, "custom({name})"),
        }
    }
}

impl VariationBound {
    /// Known bound `V(x, y) = L · d(x, y)^α` with `L ≥ 0` and `α ∈ (0, 1]`.
    pub fn holder(l: f64, alpha: f64) -> Result<Self> {
        if l < 0.0 || !l.is_finite() {
            return Err(Error::InvalidConfig(format!("Hölder constant must be ≥ 0, got {l}")));
        }
        check_alpha(alpha)?;
        Ok(Self { mode: Mode::KnownScale { l }, alpha, custom: None })
    }

    /// Order-only bound `𝒱(x, y) = d(x, y)^α`.
    pub fn order_only(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { mode: Mode::OrderOnly, alpha, custom: None })
    }

    /// Replaces the Hölder form with a custom evaluator (must be symmetric,
    /// nonnegative and zero on the diagonal).
    pub fn with_custom_evaluator<F>(mut self, name: &str, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.custom = Some((name.to_string(), Arc::new(eval)));
        self
    }

    /// Whether the scale of the bound is known (required by the asymmetric
    /// variation test; the permutation variant only needs the order).
    pub fn is_known_scale(&self) -> bool {
        matches!(self.mode, Mode::KnownScale { .. })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The Hölder constant, or `None` in order-only mode.
    pub fn scale(&self) -> Option<f64> {
        match self.mode {
            Mode::KnownScale { l } => Some(l),
            Mode::OrderOnly => None,
        }
    }

    pub fn has_custom_evaluator(&self) -> bool {
        self.custom.is_some()
    }

    /// Evaluates the bound at a pair of input points.
    pub fn evaluate(&self, x: &[f64], y: &[f64], metric: &Metric) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "bound arguments have dimensions {} and {}",
                x.len(),
                y.len()
            )));
        }
        if let Some((_, eval)) = &self.custom {
            return Ok(eval(x, y));
        }
        Ok(self.evaluate_from_distance(metric.distance(x, y)))
    }

    /// Evaluates the Hölder form given a precomputed distance. Not valid for
    /// custom evaluators; callers check [`has_custom_evaluator`] first.
    ///
    /// [`has_custom_evaluator`]: VariationBound::has_custom_evaluator
    pub fn evaluate_from_distance(&self, distance: f64) -> f64 {
        debug_assert!(self.custom.is_none(), "custom bounds need the raw points");
        let base = if self.alpha == 1.0 { distance } else { distance.powf(self.alpha) };
        match self.mode {
            Mode::KnownScale { l } => l * base,
            Mode::OrderOnly => base,
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        match (&self.mode, &self.custom) {
            (Mode::KnownScale { l }, None) => {
                serde_json::json!({ "mode": "known", "L": l, "alpha": self.alpha })
            }
            (Mode::OrderOnly, None) => {
                serde_json::json!({ "mode": "order-only", "alpha": self.alpha })
            }
            (_, Some((name, _))) => serde_json::json!({ "mode": "custom", "name": name }),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!("Hölder exponent must be in (0, 1], got {alpha}")));
    }
    Ok(())
}
