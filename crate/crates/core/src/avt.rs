//! The asymmetric variation test.
//!
//! For `m` sampled pairs, the statistic
//! `D = |g ⋆ Y_{I(j)} − Y_{J(j)}| − V(g·X_{I(j)}, X_{J(j)})` can only exceed a
//! threshold `t` through noise when the regression function is equivariant
//! and the bound `V` is valid, so the exceedance count `N_t` is
//! stochastically dominated by `Binom(m, p_t)`. The reported p-value is the
//! upper binomial tail at the observed count, minimised over a threshold
//! grid: every threshold reads the same statistic sample, so the information
//! of the test is entirely contained in the set of `D` values and the
//! infimum over `t` is a valid bound.

use serde::{Deserialize, Serialize};

use crate::action::{GeneratorDistribution, GroupAction};
use crate::bound::VariationBound;
use crate::dataset::Dataset;
use crate::metric::{Metric, OutputNorm};
use crate::noise::NoiseModel;
use crate::sampling::{sample_pairs_nn, SampledPair, SeededRng};
use crate::{Error, Result};

/// Upper binomial tail `ℙ(Binom(m, p) ≥ n)`.
///
/// Log-space terms with compensated summation; exact at the `p ∈ {0, 1}` and
/// `n = 0` boundaries.
pub fn binomial_tail(m: u64, n: u64, p: f64) -> Result<f64> {
    if n > m {
        return Err(Error::InvalidInput(format!("exceedance count {n} > sample count {m}")));
    }
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("probability {p} outside [0, 1]")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }

    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mf = m as f64;

    // Log-probability of each term, peak factored out before exponentiating.
    let mut max_log = f64::NEG_INFINITY;
    let mut logs = Vec::with_capacity((m - n + 1) as usize);
    for k in n..=m {
        let kf = k as f64;
        let lt = ln_choose(mf, kf) + kf * ln_p + (mf - kf) * ln_q;
        logs.push(lt);
        if lt > max_log {
            max_log = lt;
        }
    }
    if max_log == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    // Kahan summation of the rescaled terms.
    let mut sum = 0.0;
    let mut carry = 0.0;
    for lt in logs {
        let term = (lt - max_log).exp();
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    Ok((max_log + sum.ln()).exp().clamp(0.0, 1.0))
}

/// `ℙ(Binom(m, p) ≤ k)`.
pub fn binomial_cdf(m: u64, k: u64, p: f64) -> Result<f64> {
    if k >= m {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("probability {p} outside [0, 1]")));
        }
        return Ok(1.0);
    }
    Ok(1.0 - binomial_tail(m, k + 1, p)?)
}

fn ln_choose(m: f64, k: f64) -> f64 {
    if k == 0.0 || k == m {
        return 0.0;
    }
    ln_gamma(m + 1.0) - ln_gamma(k + 1.0) - ln_gamma(m - k + 1.0)
}

/// Stirling series with argument lifting; absolute error well under 1e-12
/// over the integer arguments used here.
fn ln_gamma(mut z: f64) -> f64 {
    debug_assert!(z > 0.0);
    let mut shift = 0.0;
    while z < 10.0 {
        shift -= z.ln();
        z += 1.0;
    }
    const COEFFS: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        7.0 / 1092.0,
    ];
    let z2 = z * z;
    let mut series = 0.0;
    let mut zp = z;
    for c in COEFFS {
        series += c / zp;
        zp *= z2;
    }
    shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Thresholds for the exceedance counts: either an explicit increasing list
/// or an automatic grid whose tail levels are spread evenly over (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSpec {
    Explicit(Vec<f64>),
    AutoGrid { k: usize },
}

impl ThresholdSpec {
    pub fn single(t: f64) -> Self {
        ThresholdSpec::Explicit(vec![t])
    }

    fn resolve(&self, noise: &NoiseModel) -> Result<Vec<f64>> {
        match self {
            ThresholdSpec::Explicit(ts) => {
                if ts.is_empty() {
                    return Err(Error::InvalidConfig("empty threshold list".into()));
                }
                for w in ts.windows(2) {
                    if w[1] <= w[0] || w[1].is_nan() || w[0].is_nan() {
                        return Err(Error::InvalidConfig(
                            "thresholds must be strictly increasing".into(),
                        ));
                    }
                }
                let min_allowed = if noise.is_noiseless() { 0.0 } else { f64::MIN_POSITIVE };
                if ts.iter().any(|&t| !t.is_finite() || t < min_allowed) {
                    return Err(Error::InvalidConfig(if noise.is_noiseless() {
                        "thresholds must be ≥ 0".into()
                    } else {
                        "thresholds must be > 0".into()
                    }));
                }
                Ok(ts.clone())
            }
            ThresholdSpec::AutoGrid { k } => auto_threshold_grid(noise, *k),
        }
    }
}

/// Chooses `k` thresholds whose tail levels `p_{t_i}` sit at
/// `1/(k+1), …, k/(k+1)`, by monotone bisection on the tail function.
pub fn auto_threshold_grid(noise: &NoiseModel, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidConfig("threshold grid needs k ≥ 1".into()));
    }
    if noise.is_noiseless() {
        return Err(Error::InvalidConfig(
            "noiseless models have a degenerate tail; supply an explicit threshold".into(),
        ));
    }
    // Upper end of the search window: a t with tail below every target.
    let smallest_target = 1.0 / (k + 1) as f64;
    let mut hi = match noise {
        NoiseModel::Gaussian { sigma } => *sigma,
        NoiseModel::Table { points } => points[points.len() - 1].0,
        NoiseModel::Noiseless => unreachable!(),
    };
    let mut guard = 0;
    while noise.tail(hi)? > smallest_target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidConfig(
                "noise tail does not fall below the requested grid levels".into(),
            ));
        }
    }
    if let NoiseModel::Table { points } = noise {
        let p_max = points[0].1;
        let p_min = points[points.len() - 1].1;
        let largest_target = k as f64 / (k + 1) as f64;
        if largest_target > p_max || smallest_target < p_min {
            return Err(Error::InvalidConfig(format!(
                "noise table spans tail levels [{p_min}, {p_max}], cannot place a grid of size {k}"
            )));
        }
    }

    let mut ts = Vec::with_capacity(k);
    for i in (1..=k).rev() {
        let target = i as f64 / (k + 1) as f64;
        let mut lo = f64::MIN_POSITIVE;
        let mut hi_i = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi_i);
            if noise.tail(mid)? >= target {
                lo = mid;
            } else {
                hi_i = mid;
            }
        }
        ts.push(0.5 * (lo + hi_i));
    }
    for w in ts.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Internal("auto grid produced non-increasing thresholds".into()));
        }
    }
    Ok(ts)
}

/// The pair statistic `D = |g ⋆ Y_i − Y_j| − V(g·X_i, X_j)`; negative values
/// are expected under equivariance.
pub fn asym_statistic(
    pair: &SampledPair,
    dataset: &Dataset,
    action: &GroupAction,
    bound: &VariationBound,
    metric: &Metric,
    norm: OutputNorm,
) -> Result<f64> {
    let gy = action.apply_output(pair.element, dataset.response(pair.i))?;
    let out_dist = norm.distance(&gy, dataset.response(pair.j));
    let v = if bound.has_custom_evaluator() {
        bound.evaluate(&pair.transformed_point, dataset.point(pair.j), metric)?
    } else {
        bound.evaluate_from_distance(pair.pair_distance)
    };
    Ok(out_dist - v)
}

/// A sampled pair together with its output distance `|g ⋆ Y_i − Y_j|`.
/// Splitting this off from the bound lets several bounds be evaluated over
/// one shared sample.
#[derive(Debug, Clone)]
pub struct AvtSample {
    pub pair: SampledPair,
    pub output_distance: f64,
}

/// Draws `m` nearest-neighbour pairs and their output distances.
pub fn collect_avt_samples(
    dataset: &Dataset,
    action: &GroupAction,
    dist: &GeneratorDistribution,
    m: usize,
    metric: &Metric,
    norm: OutputNorm,
    rng: &mut SeededRng,
) -> Result<Vec<AvtSample>> {
    let pairs = sample_pairs_nn(dataset, action, dist, m, metric, rng)?;
    pairs
        .into_iter()
        .map(|pair| {
            let gy = action.apply_output(pair.element, dataset.response(pair.i))?;
            let output_distance = norm.distance(&gy, dataset.response(pair.j));
            Ok(AvtSample { pair, output_distance })
        })
        .collect()
}

/// Evaluates `D` for every sample under one bound.
pub fn statistics_for_bound(
    samples: &[AvtSample],
    bound: &VariationBound,
    dataset: &Dataset,
    metric: &Metric,
) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let v = if bound.has_custom_evaluator() {
                bound.evaluate(&s.pair.transformed_point, dataset.point(s.pair.j), metric)?
            } else {
                bound.evaluate_from_distance(s.pair.pair_distance)
            };
            Ok(s.output_distance - v)
        })
        .collect()
}

/// Per-threshold diagnostics: the exceedance count and its binomial-tail
/// p-value at tail level `p_t`.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub t: f64,
    pub p_t: f64,
    pub n_exceed: usize,
    pub p_value: f64,
}

/// Counts exceedances and evaluates the tail p-value per threshold. With a
/// noiseless model the count is strict (`D > t`), matching the convention
/// that a bound met with equality is not a violation; under continuous noise
/// `D ≥ t` and `D > t` coincide almost surely and `≥` is used.
pub fn threshold_table(
    stats: &[f64],
    thresholds: &[f64],
    noise: &NoiseModel,
    union_dims: Option<usize>,
) -> Result<Vec<ThresholdRow>> {
    let m = stats.len() as u64;
    let strict = noise.is_noiseless();
    thresholds
        .iter()
        .map(|&t| {
            let n_exceed = stats
                .iter()
                .filter(|&&d| if strict { d > t } else { d >= t })
                .count();
            let base = if noise.is_noiseless() { 0.0 } else { noise.tail(t)? };
            let p_t = match union_dims {
                Some(d) => (d as f64 * base).min(1.0),
                None => base,
            };
            let p_value = binomial_tail(m, n_exceed as u64, p_t)?;
            Ok(ThresholdRow { t, p_t, n_exceed, p_value })
        })
        .collect()
}

/// One retained sample row for reports and scatter plots (output distance
/// against pair distance).
#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub element: String,
    pub i: usize,
    pub j: usize,
    pub pair_distance: f64,
    pub output_distance: f64,
    pub statistic: f64,
}

#[derive(Debug, Clone)]
pub struct AvtConfig {
    pub m: usize,
    pub thresholds: ThresholdSpec,
    pub noise: NoiseModel,
    pub bound: VariationBound,
    /// `None` selects the uniform distribution over non-identity generator
    /// powers.
    pub generator_dist: Option<GeneratorDistribution>,
    pub metric: Metric,
    /// `None` selects absolute value for scalar outputs, max-norm otherwise.
    pub norm: Option<OutputNorm>,
    pub seed: u64,
    pub stream: u64,
    /// Retain the raw statistic sample in the report.
    pub keep_samples: bool,
}

impl AvtConfig {
    pub fn new(
        m: usize,
        thresholds: ThresholdSpec,
        noise: NoiseModel,
        bound: VariationBound,
        seed: u64,
    ) -> Self {
        Self {
            m,
            thresholds,
            noise,
            bound,
            generator_dist: None,
            metric: Metric::Euclidean,
            norm: None,
            seed,
            stream: 0,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AvtReport {
    /// Minimum tail p-value over the threshold grid.
    pub p_value: f64,
    pub per_threshold: Vec<ThresholdRow>,
    pub m: usize,
    pub seed: u64,
    pub stream: u64,
    /// Whether exceedances were counted strictly (`D > t`, noiseless mode).
    pub strict_exceedance: bool,
    /// `Some(d)` when the per-dimension noise tail was union-bounded over
    /// `d` output dimensions.
    pub noise_union_bound_dims: Option<usize>,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<SampleRecord>>,
}

impl AvtReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs the asymmetric variation test.
///
/// Requires a known-scale bound; with an order-only bound the test statistic
/// has no absolute reference and the permutation variant ([`crate::pvt`])
/// must be used instead.
pub fn run_avt(dataset: &Dataset, action: &GroupAction, config: &AvtConfig) -> Result<AvtReport> {
    if config.m == 0 {
        return Err(Error::InvalidConfig("need at least one sampled pair (m ≥ 1)".into()));
    }
    if !config.bound.is_known_scale() {
        return Err(Error::InvalidConfig(
            "the variation bound is order-only; this test needs the known scale L. \
             Use the permutation variant for order-only bounds"
                .into(),
        ));
    }
    let d_out = dataset.output_dim();
    let norm = config.norm.unwrap_or_else(|| OutputNorm::default_for_dim(d_out));
    if d_out > 1 && norm == OutputNorm::Euclidean && !config.noise.is_noiseless() {
        return Err(Error::InvalidConfig(
            "no sound noise tail is available for the euclidean norm on multi-dimensional \
             outputs; use the max norm (per-dimension tail with a union bound)"
                .into(),
        ));
    }
    let union_dims = if d_out > 1 && !config.noise.is_noiseless() { Some(d_out) } else { None };

    let default_dist;
    let dist = match &config.generator_dist {
        Some(d) => d,
        None => {
            default_dist = GeneratorDistribution::uniform_non_identity(action)?;
            &default_dist
        }
    };

    let mut rng = SeededRng::with_stream(config.seed, config.stream);
    let samples =
        collect_avt_samples(dataset, action, dist, config.m, &config.metric, norm, &mut rng)?;
    let stats = statistics_for_bound(&samples, &config.bound, dataset, &config.metric)?;

    let thresholds = config.thresholds.resolve(&config.noise)?;
    let per_threshold = threshold_table(&stats, &thresholds, &config.noise, union_dims)?;
    let p_value = per_threshold.iter().map(|r| r.p_value).fold(f64::INFINITY, f64::min);

    let sample_records = config.keep_samples.then(|| {
        samples
            .iter()
            .zip(&stats)
            .map(|(s, &d)| SampleRecord {
                element: action.element_name(s.pair.element).to_string(),
                i: s.pair.i,
                j: s.pair.j,
                pair_distance: s.pair.pair_distance,
                output_distance: s.output_distance,
                statistic: d,
            })
            .collect()
    });

    let config_echo = serde_json::json!({
        "test": "avt",
        "m": config.m,
        "thresholds": config.thresholds,
        "resolved_thresholds": thresholds,
        "noise": config.noise.echo(),
        "bound": config.bound.echo(),
        "action": action.echo(),
        "generator_dist": dist.echo(action),
        "metric": config.metric.describe(),
        "norm": norm.describe(),
        "pair_sampling": "nearest-neighbour",
        "index_sampling": "uniform-with-replacement",
        "self_match_exclusion": "exact-zero-distance",
        "seed": config.seed,
        "stream": config.stream,
    });

    Ok(AvtReport {
        p_value,
        per_threshold,
        m: config.m,
        seed: config.seed,
        stream: config.stream,
        strict_exceedance: config.noise.is_noiseless(),
        noise_union_bound_dims: union_dims,
        config: config_echo,
        samples: sample_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::GroupAction;

    #[test]
    fn tail_boundaries() {
        assert_eq!(binomial_tail(10, 0, 0.3).unwrap(), 1.0);
        assert_eq!(binomial_tail(10, 0, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_tail(10, 1, 0.0).unwrap(), 0.0);
        assert_eq!(binomial_tail(10, 10, 1.0).unwrap(), 1.0);
        assert!(binomial_tail(3, 4, 0.5).is_err());
        assert!(binomial_tail(3, 1, 1.5).is_err());
    }

    #[test]
    fn tail_small_exact_cases() {
        // P(Binom(3, 1/2) ≥ 3) = 1/8.
        assert!((binomial_tail(3, 3, 0.5).unwrap() - 0.125).abs() < 1e-15);
        // P(Binom(2, 1/2) ≥ 1) = 3/4.
        assert!((binomial_tail(2, 1, 0.5).unwrap() - 0.75).abs() < 1e-15);
        // P(Binom(4, 0.1) ≥ 1) = 1 − 0.9⁴.
        let expect = 1.0 - 0.9f64.powi(4);
        assert!((binomial_tail(4, 1, 0.1).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn tail_monotone_in_count_and_probability() {
        let mut last = 1.0;
        for n in 0..=50u64 {
            let p = binomial_tail(50, n, 0.3).unwrap();
            assert!(p <= last + 1e-15);
            last = p;
        }
        let mut last = 0.0;
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let v = binomial_tail(40, 10, p).unwrap();
            assert!(v >= last - 1e-12, "tail must grow with p");
            last = v;
        }
    }

    #[test]
    fn cdf_complements_tail() {
        let cdf = binomial_cdf(30, 12, 0.4).unwrap();
        let tail = binomial_tail(30, 13, 0.4).unwrap();
        assert!((cdf + tail - 1.0).abs() < 1e-12);
        assert_eq!(binomial_cdf(5, 5, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn auto_grid_levels_are_evenly_spread() {
        let noise = NoiseModel::gaussian(1.0).unwrap();
        let ts = auto_threshold_grid(&noise, 9).unwrap();
        assert_eq!(ts.len(), 9);
        for (i, &t) in ts.iter().enumerate() {
            // Ascending t ↔ descending tail level.
            let target = (9 - i) as f64 / 10.0;
            let p = noise.tail(t).unwrap();
            assert!((p - target).abs() < 1e-6, "level {p} vs target {target}");
        }
        let single = auto_threshold_grid(&noise, 1).unwrap();
        assert!((noise.tail(single[0]).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn auto_grid_rejects_noiseless() {
        assert!(auto_threshold_grid(&NoiseModel::Noiseless, 3).is_err());
    }

    fn f2_dataset(points: Vec<Vec<f64>>) -> Dataset {
        let responses = points.iter().map(|x| (-x[0].abs()).exp()).collect();
        Dataset::with_scalar_responses(points, responses).unwrap()
    }

    #[test]
    fn statistic_hand_case() {
        // x_i = (2, 0), x_j = (0, 2): the quarter turn maps x_i onto x_j, so
        // the bound vanishes and D is the raw output distance 1 − e⁻².
        let ds = f2_dataset(vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let action = GroupAction::axis_rotation(2).unwrap();
        let r = action.element_id("R").unwrap();
        let gx = action.apply_input(r, ds.point(0)).unwrap();
        let metric = Metric::Euclidean;
        let d = metric.distance(&gx, ds.point(1));
        assert_eq!(d, 0.0);
        let pair = SampledPair { element: r, i: 0, j: 1, transformed_point: gx, pair_distance: d };
        let bound = VariationBound::holder(1.0, 1.0).unwrap();
        let stat =
            asym_statistic(&pair, &ds, &action, &bound, &metric, OutputNorm::Abs).unwrap();
        let expect = 1.0 - (-2.0f64).exp();
        assert!((stat - expect).abs() < 1e-12, "{stat} vs {expect}");
        assert!((stat - 0.8647).abs() < 1e-4);
    }

    #[test]
    fn invariant_noiseless_statistics_stay_nonpositive() {
        // f_2 is invariant under the sign-flip action and 1-Lipschitz, so
        // with no noise every D is ≤ 0.
        let mut rng = SeededRng::new(7);
        use rand::Rng;
        let points: Vec<Vec<f64>> =
            (0..120).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let ds = f2_dataset(points);
        let action = GroupAction::axis_rotation_sign_flip(2).unwrap();
        let config = AvtConfig::new(
            200,
            ThresholdSpec::single(0.1),
            NoiseModel::Noiseless,
            VariationBound::holder(1.0, 1.0).unwrap(),
            13,
        );
        let dist = GeneratorDistribution::uniform_non_identity(&action).unwrap();
        let mut rng = SeededRng::with_stream(13, 0);
        let samples =
            collect_avt_samples(&ds, &action, &dist, 200, &Metric::Euclidean, OutputNorm::Abs, &mut rng)
                .unwrap();
        let stats = statistics_for_bound(&samples, &config.bound, &ds, &Metric::Euclidean).unwrap();
        assert!(stats.iter().all(|&d| d <= 1e-12));
        let report = run_avt(&ds, &action, &config).unwrap();
        assert_eq!(report.p_value, 1.0);
    }

    #[test]
    fn order_only_bound_is_a_config_error() {
        let ds = f2_dataset(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 1.0]]);
        let action = GroupAction::axis_rotation(2).unwrap();
        let config = AvtConfig::new(
            10,
            ThresholdSpec::single(0.1),
            NoiseModel::gaussian(0.05).unwrap(),
            VariationBound::order_only(1.0).unwrap(),
            1,
        );
        let err = run_avt(&ds, &action, &config).unwrap_err();
        assert!(err.to_string().contains("permutation variant"));
    }

    #[test]
    fn zero_m_is_a_usage_error() {
        let ds = f2_dataset(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let action = GroupAction::axis_rotation(2).unwrap();
        let config = AvtConfig::new(
            0,
            ThresholdSpec::single(0.1),
            NoiseModel::Noiseless,
            VariationBound::holder(1.0, 1.0).unwrap(),
            1,
        );
        assert!(run_avt(&ds, &action, &config).is_err());
    }

    #[test]
    fn reports_are_deterministic_and_seed_sensitive() {
        use rand::Rng;
        let mut rng = SeededRng::new(3);
        let points: Vec<Vec<f64>> =
            (0..60).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let ds = f2_dataset(points);
        let action = GroupAction::axis_rotation(2).unwrap();
        let mut config = AvtConfig::new(
            100,
            ThresholdSpec::single(0.1),
            NoiseModel::gaussian(0.05).unwrap(),
            VariationBound::holder(1.0, 1.0).unwrap(),
            42,
        );
        config.keep_samples = true;
        let a = run_avt(&ds, &action, &config).unwrap().to_json();
        let b = run_avt(&ds, &action, &config).unwrap().to_json();
        assert_eq!(a, b);
        config.seed = 43;
        let c = run_avt(&ds, &action, &config).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn loosening_the_bound_never_decreases_the_p_value() {
        use rand::Rng;
        let mut rng = SeededRng::new(19);
        let points: Vec<Vec<f64>> =
            (0..80).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let ds = f2_dataset(points);
        let action = GroupAction::axis_rotation(2).unwrap();
        let mut p_last = 0.0;
        for l in [0.25, 0.5, 1.0, 2.0] {
            let config = AvtConfig::new(
                150,
                ThresholdSpec::single(0.1),
                NoiseModel::gaussian(0.05).unwrap(),
                VariationBound::holder(l, 1.0).unwrap(),
                77,
            );
            let p = run_avt(&ds, &action, &config).unwrap().p_value;
            assert!(p >= p_last - 1e-15, "p-value decreased when L grew");
            p_last = p;
        }
    }

    #[test]
    fn per_threshold_counts_are_nonincreasing() {
        use rand::Rng;
        let mut rng = SeededRng::new(29);
        let points: Vec<Vec<f64>> =
            (0..80).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let ds = f2_dataset(points);
        let action = GroupAction::axis_rotation(2).unwrap();
        let config = AvtConfig {
            thresholds: ThresholdSpec::AutoGrid { k: 7 },
            ..AvtConfig::new(
                200,
                ThresholdSpec::single(0.1),
                NoiseModel::gaussian(0.5).unwrap(),
                VariationBound::holder(1.0, 1.0).unwrap(),
                5,
            )
        };
        let report = run_avt(&ds, &action, &config).unwrap();
        assert_eq!(report.per_threshold.len(), 7);
        for w in report.per_threshold.windows(2) {
            assert!(w[1].n_exceed <= w[0].n_exceed);
            assert!((0.0..=1.0).contains(&w[0].p_value));
        }
        let min = report.per_threshold.iter().map(|r| r.p_value).fold(f64::INFINITY, f64::min);
        assert_eq!(report.p_value, min);
    }
}
