//! The permutation variant of the asymmetric variation test.
//!
//! Drops the known-scale requirement: only the order of the variation bound
//! is needed. Each of `B` batches draws `m` uniform pairs with sampled group
//! elements and is reduced to the `q`-quantile `A_k` of its ratio statistics
//! `S = |g ⋆ Y_i − Y_j| / 𝒱(g·X_i, X_j)`. The baseline `A_0` does the same
//! with `g = e`; under equivariance the batch and baseline statistics share
//! a distribution, so the proportion of `A_k ≤ A_0` approximates a
//! permutation p-value. Small batch quantiles relative to the baseline are
//! the equivariant-looking outcome; an inflated upper quantile across most
//! batches is evidence against equivariance.

use serde::{Deserialize, Serialize};

use crate::action::{GeneratorDistribution, GroupAction};
use crate::bound::VariationBound;
use crate::dataset::Dataset;
use crate::metric::{Metric, OutputNorm};
use crate::sampling::{sample_pairs_nn, sample_pairs_uniform, SampledPair, SeededRng};
use crate::{Error, Result};

/// The default R quantile (type 7): linear interpolation at rank
/// `1 + (n−1)q` on the sorted sample.
pub fn quantile_type7(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    if q.is_nan() || q <= 0.0 || q > 1.0 {
        return Err(Error::InvalidInput(format!("quantile level must be in (0, 1], got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let n = sorted.len();
    let pos = (n - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        return Ok(sorted[lo.min(n - 1)]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// The ratio statistic `S = |g ⋆ Y_i − Y_j| / 𝒱(g·X_i, X_j)`.
///
/// The samplers guarantee a positive transformed distance, so the
/// denominator is positive; a zero denominator is a broken contract, not a
/// user error.
pub fn ratio_statistic(
    pair: &SampledPair,
    dataset: &Dataset,
    action: &GroupAction,
    bound: &VariationBound,
    metric: &Metric,
    norm: OutputNorm,
) -> Result<f64> {
    let gy = action.apply_output(pair.element, dataset.response(pair.i))?;
    let numerator = norm.distance(&gy, dataset.response(pair.j));
    let denominator = if bound.has_custom_evaluator() {
        bound.evaluate(&pair.transformed_point, dataset.point(pair.j), metric)?
    } else {
        bound.evaluate_from_distance(pair.pair_distance)
    };
    if denominator <= 0.0 || denominator.is_nan() {
        return Err(Error::Internal(
            "zero variation bound in a ratio statistic; the pair sampler must exclude \
             zero-distance pairs"
                .into(),
        ));
    }
    Ok(numerator / denominator)
}

/// How a set of pairs is drawn: both indices uniform, or `J` as the nearest
/// neighbour of the (transformed) first point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Pair each drawn index with the nearest neighbour of its transformed
    /// point (self excluded on exact coincidence). For the baseline this
    /// makes the quantile an estimate of the local variation constant of the
    /// regression function; for batches it concentrates the sample on the
    /// pairs most sensitive to a broken symmetry.
    NearestNeighbour,
    /// Both indices uniform with replacement.
    Uniform,
}

impl Pairing {
    pub fn describe(&self) -> &'static str {
        match self {
            Pairing::NearestNeighbour => "nearest-neighbour",
            Pairing::Uniform => "uniform",
        }
    }
}


#[derive(Debug, Clone)]
pub struct PvtConfig {
    /// Pairs per batch.
    pub m: usize,
    /// Number of batches `B`.
    pub batches: usize,
    /// Quantile level `q ∈ (0, 1]`; 0.95 is a good default.
    pub q: f64,
    /// Order-only bound (a known-scale bound also works; the scale cancels).
    pub bound: VariationBound,
    pub generator_dist: Option<GeneratorDistribution>,
    /// How batch pairs are drawn. Uniform is the default; the
    /// nearest-neighbour mode concentrates batches on the most symmetry-
    /// sensitive pairs and is markedly more powerful at moderate sample
    /// sizes, at the cost of a mildly inflated size (see module tests).
    pub batch_pairing: Pairing,
    pub baseline_pairing: Pairing,
    pub metric: Metric,
    pub norm: Option<OutputNorm>,
    pub seed: u64,
    pub stream: u64,
    /// Retain every batch's raw ratio sample in memory (not serialized).
    pub keep_samples: bool,
}

impl PvtConfig {
    pub fn new(m: usize, batches: usize, q: f64, bound: VariationBound, seed: u64) -> Self {
        Self {
            m,
            batches,
            q,
            bound,
            generator_dist: None,
            batch_pairing: Pairing::Uniform,
            baseline_pairing: Pairing::NearestNeighbour,
            metric: Metric::Euclidean,
            norm: None,
            seed,
            stream: 0,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PvtReport {
    /// `|{k : A_k ≤ A_0}| / B`; can be exactly 0.
    pub p_value: f64,
    /// The add-one-smoothed variant `(1 + |{A_k ≤ A_0}|) / (1 + B)`,
    /// carried as a diagnostic.
    pub p_value_smoothed: f64,
    /// Baseline quantile `A_0`.
    pub baseline_quantile: f64,
    /// Batch quantiles `A_1..A_B`.
    pub batch_quantiles: Vec<f64>,
    pub m: usize,
    pub batches: usize,
    pub q: f64,
    pub batch_pairing: Pairing,
    pub baseline_pairing: Pairing,
    pub seed: u64,
    pub stream: u64,
    pub config: serde_json::Value,
}

impl PvtReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Raw ratio samples: `B` transformed batches plus the identity baseline.
/// Useful when several quantile levels are evaluated over one draw.
pub struct RatioBatches {
    pub batches: Vec<Vec<f64>>,
    pub baseline: Vec<f64>,
}

/// Draws all batches and the baseline for the given config.
pub fn collect_ratio_batches(
    dataset: &Dataset,
    action: &GroupAction,
    config: &PvtConfig,
) -> Result<RatioBatches> {
    if config.m == 0 {
        return Err(Error::InvalidConfig("need at least one pair per batch (m ≥ 1)".into()));
    }
    if config.batches == 0 {
        return Err(Error::InvalidConfig("need at least one batch (B ≥ 1)".into()));
    }
    if !(config.q > 0.0 && config.q <= 1.0) {
        return Err(Error::InvalidConfig(format!("q must be in (0, 1], got {}", config.q)));
    }
    let norm = config.norm.unwrap_or_else(|| OutputNorm::default_for_dim(dataset.output_dim()));

    let default_dist;
    let dist = match &config.generator_dist {
        Some(d) => d,
        None => {
            default_dist = GeneratorDistribution::uniform_non_identity(action)?;
            &default_dist
        }
    };

    let mut rng = SeededRng::with_stream(config.seed, config.stream);
    let mut batches = Vec::with_capacity(config.batches);
    for _ in 0..config.batches {
        let pairs = match config.batch_pairing {
            Pairing::Uniform => {
                sample_pairs_uniform(dataset, action, dist, config.m, &config.metric, &mut rng)?
            }
            Pairing::NearestNeighbour => {
                sample_pairs_nn(dataset, action, dist, config.m, &config.metric, &mut rng)?
            }
        };
        let ratios = pairs
            .iter()
            .map(|p| ratio_statistic(p, dataset, action, &config.bound, &config.metric, norm))
            .collect::<Result<Vec<f64>>>()?;
        batches.push(ratios);
    }

    let identity = GeneratorDistribution::uniform_over(action, &[action.element_name(0)])?;
    let baseline_pairs = match config.baseline_pairing {
        // With g = e the transformed point coincides with the original, so
        // the nearest-neighbour sampler always excludes the self-match.
        Pairing::NearestNeighbour => {
            sample_pairs_nn(dataset, action, &identity, config.m, &config.metric, &mut rng)?
        }
        Pairing::Uniform => {
            sample_pairs_uniform(dataset, action, &identity, config.m, &config.metric, &mut rng)?
        }
    };
    let baseline = baseline_pairs
        .iter()
        .map(|p| ratio_statistic(p, dataset, action, &config.bound, &config.metric, norm))
        .collect::<Result<Vec<f64>>>()?;

    Ok(RatioBatches { batches, baseline })
}

/// Reduces drawn batches to the permutation p-value at one quantile level.
pub fn pvalue_for_quantile(batches: &RatioBatches, q: f64) -> Result<(f64, f64, Vec<f64>)> {
    let a0 = quantile_type7(&batches.baseline, q)?;
    let aks = batches
        .batches
        .iter()
        .map(|s| quantile_type7(s, q))
        .collect::<Result<Vec<f64>>>()?;
    let count = aks.iter().filter(|&&a| a <= a0).count();
    Ok((count as f64 / batches.batches.len() as f64, a0, aks))
}

/// Runs the permutation variant end to end.
pub fn run_pvt(dataset: &Dataset, action: &GroupAction, config: &PvtConfig) -> Result<PvtReport> {
    let drawn = collect_ratio_batches(dataset, action, config)?;
    let (p_value, a0, aks) = pvalue_for_quantile(&drawn, config.q)?;
    let count = (p_value * config.batches as f64).round();
    let p_value_smoothed = (1.0 + count) / (1.0 + config.batches as f64);

    let norm = config.norm.unwrap_or_else(|| OutputNorm::default_for_dim(dataset.output_dim()));
    let default_dist;
    let dist = match &config.generator_dist {
        Some(d) => d,
        None => {
            default_dist = GeneratorDistribution::uniform_non_identity(action)?;
            &default_dist
        }
    };
    let config_echo = serde_json::json!({
        "test": "pvt",
        "m": config.m,
        "batches": config.batches,
        "q": config.q,
        "bound": config.bound.echo(),
        "action": action.echo(),
        "generator_dist": dist.echo(action),
        "metric": config.metric.describe(),
        "norm": norm.describe(),
        "batch_pairing": config.batch_pairing.describe(),
        "baseline_pairing": config.baseline_pairing.describe(),
        "index_sampling": "uniform-with-replacement",
        "zero_distance_pairs": "resampled",
        "tie_rule": "A_k = A_0 counts toward rejection side",
        "seed": config.seed,
        "stream": config.stream,
    });

    Ok(PvtReport {
        p_value,
        p_value_smoothed,
        baseline_quantile: a0,
        batch_quantiles: aks,
        m: config.m,
        batches: config.batches,
        q: config.q,
        batch_pairing: config.batch_pairing,
        baseline_pairing: config.baseline_pairing,
        seed: config.seed,
        stream: config.stream,
        config: config_echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::GroupAction;
    use rand::Rng;

    #[test]
    fn quantile_reference_values() {
        // Reference values from R's default quantile (type 7).
        assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile_type7(&[10.0, 20.0, 30.0], 0.35).unwrap(), 17.0);
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        assert!((quantile_type7(&xs, 0.9).unwrap() - 6.9).abs() < 1e-12);
        assert_eq!(quantile_type7(&xs, 1.0).unwrap(), 9.0);
        assert_eq!(quantile_type7(&[10.0], 0.123).unwrap(), 10.0);
        // 0:100/100 at q = 0.975.
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        assert!((quantile_type7(&grid, 0.975).unwrap() - 0.975).abs() < 1e-12);
    }

    #[test]
    fn quantile_rejects_bad_inputs() {
        assert!(quantile_type7(&[], 0.5).is_err());
        assert!(quantile_type7(&[1.0], 0.0).is_err());
        assert!(quantile_type7(&[1.0], 1.1).is_err());
    }

    #[test]
    fn quantile_is_monotone_in_q() {
        let mut rng = SeededRng::new(4);
        let xs: Vec<f64> = (0..57).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut last = f64::NEG_INFINITY;
        for i in 1..=20 {
            let q = i as f64 / 20.0;
            let v = quantile_type7(&xs, q).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    fn f2_dataset(points: Vec<Vec<f64>>) -> Dataset {
        let responses = points.iter().map(|x| (-x[0].abs()).exp()).collect();
        Dataset::with_scalar_responses(points, responses).unwrap()
    }

    #[test]
    fn ratio_statistic_hand_cases() {
        let ds = f2_dataset(vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
        let action = GroupAction::axis_rotation(2).unwrap();
        let r = action.element_id("R").unwrap();
        let metric = Metric::Euclidean;
        let bound = VariationBound::order_only(1.0).unwrap();

        // g·x_0 = (−2, 0); numerator |f(x_0) − f(x_1)| = 1 − e⁻²,
        // denominator d((−2,0),(2,0)) = 4.
        let gx = action.apply_input(r, ds.point(0)).unwrap();
        let d = metric.distance(&gx, ds.point(1));
        assert_eq!(d, 4.0);
        let pair = SampledPair { element: r, i: 0, j: 1, transformed_point: gx, pair_distance: d };
        let s = ratio_statistic(&pair, &ds, &action, &bound, &metric, OutputNorm::Abs).unwrap();
        let expect = (1.0 - (-2.0f64).exp()) / 4.0;
        assert!((s - expect).abs() < 1e-12);

        // Equal responses and a trivial output action give S = 0.
        let ds2 = Dataset::with_scalar_responses(
            vec![vec![1.0, 0.0], vec![0.0, 3.0]],
            vec![0.7, 0.7],
        )
        .unwrap();
        let gx = action.apply_input(r, ds2.point(0)).unwrap();
        let d = metric.distance(&gx, ds2.point(1));
        let pair = SampledPair { element: r, i: 0, j: 1, transformed_point: gx, pair_distance: d };
        let s = ratio_statistic(&pair, &ds2, &action, &bound, &metric, OutputNorm::Abs).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn zero_denominator_is_an_internal_error() {
        let ds = f2_dataset(vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let action = GroupAction::axis_rotation(2).unwrap();
        let r = action.element_id("R").unwrap();
        // Manufactured pair with g·x_0 exactly on x_1.
        let gx = action.apply_input(r, ds.point(0)).unwrap();
        let pair =
            SampledPair { element: r, i: 0, j: 1, transformed_point: gx, pair_distance: 0.0 };
        let bound = VariationBound::order_only(1.0).unwrap();
        let err = ratio_statistic(&pair, &ds, &action, &bound, &Metric::Euclidean, OutputNorm::Abs)
            .unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    #[test]
    fn noiseless_lipschitz_ratios_are_bounded_by_the_constant() {
        // |f_2(x) − f_2(y)| ≤ 1·‖x − y‖ and the sign-flip action is a true
        // symmetry, so every ratio is at most 1.
        let mut rng = SeededRng::new(10);
        let points: Vec<Vec<f64>> =
            (0..100).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let ds = f2_dataset(points);
        let action = GroupAction::axis_rotation_sign_flip(2).unwrap();
        let config = PvtConfig::new(400, 5, 0.95, VariationBound::order_only(1.0).unwrap(), 3);
        let drawn = collect_ratio_batches(&ds, &action, &config).unwrap();
        for batch in &drawn.batches {
            assert!(batch.iter().all(|&s| s <= 1.0 + 1e-12));
        }
        assert!(drawn.baseline.iter().all(|&s| s <= 1.0 + 1e-12));
    }

    fn random_f2(n: usize, seed: u64, scale: f64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let points: Vec<Vec<f64>> =
            (0..n).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let responses = points.iter().map(|x| scale * (-x[0].abs()).exp()).collect();
        Dataset::with_scalar_responses(points, responses).unwrap()
    }

    #[test]
    fn p_value_is_a_grid_value_and_deterministic() {
        let ds = random_f2(80, 5, 1.0);
        let action = GroupAction::axis_rotation(2).unwrap();
        let config = PvtConfig::new(60, 40, 0.95, VariationBound::order_only(1.0).unwrap(), 9);
        let a = run_pvt(&ds, &action, &config).unwrap();
        let b = run_pvt(&ds, &action, &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let grid = (a.p_value * config.batches as f64).round() / config.batches as f64;
        assert!((a.p_value - grid).abs() < 1e-12, "p must be a multiple of 1/B");
        assert!(a.p_value_smoothed > 0.0);
    }

    #[test]
    fn scaling_responses_leaves_the_p_value_unchanged() {
        let action = GroupAction::axis_rotation(2).unwrap();
        let config = PvtConfig::new(80, 50, 0.95, VariationBound::order_only(1.0).unwrap(), 21);
        let p1 = run_pvt(&random_f2(90, 8, 1.0), &action, &config).unwrap().p_value;
        let p2 = run_pvt(&random_f2(90, 8, 37.5), &action, &config).unwrap().p_value;
        assert_eq!(p1, p2);
    }

    #[test]
    fn uniform_baseline_mode_runs_and_differs_in_echo() {
        let ds = random_f2(60, 12, 1.0);
        let action = GroupAction::axis_rotation(2).unwrap();
        let mut config = PvtConfig::new(40, 20, 0.9, VariationBound::order_only(1.0).unwrap(), 2);
        config.baseline_pairing = Pairing::Uniform;
        let report = run_pvt(&ds, &action, &config).unwrap();
        assert_eq!(report.baseline_pairing, Pairing::Uniform);
        assert!(report.config.to_string().contains("uniform"));
    }

    #[test]
    fn invalid_configs_error() {
        let ds = random_f2(20, 1, 1.0);
        let action = GroupAction::axis_rotation(2).unwrap();
        let bound = VariationBound::order_only(1.0).unwrap();
        assert!(run_pvt(&ds, &action, &PvtConfig::new(0, 10, 0.95, bound.clone(), 1)).is_err());
        assert!(run_pvt(&ds, &action, &PvtConfig::new(10, 0, 0.95, bound.clone(), 1)).is_err());
        assert!(run_pvt(&ds, &action, &PvtConfig::new(10, 10, 0.0, bound, 1)).is_err());
    }
}
