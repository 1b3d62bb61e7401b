//! Synthetic regression targets, sampling laws, and a local-constant
//! (Nadaraya–Watson) demo contrasting a plain estimator with its
//! kernel-symmetrised counterpart on invariant and non-invariant targets.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action::GroupAction;
use crate::dataset::Dataset;
use crate::metric::Metric;
use crate::sampling::{mix_seed, SeededRng};
use crate::{Error, Result};

/// Closed-form scalar targets used throughout the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTarget {
    /// `x ↦ exp(−|x₁|)`: invariant under the sign-flip action, not under the
    /// plain quarter turn.
    ExpNegAbsX1,
    /// `x ↦ exp(−‖x‖₂)`: invariant under every rotation.
    ExpNegNorm,
    /// `x ↦ ‖x‖₂`: invariant under every rotation.
    Norm,
    /// `x ↦ |x₁|`: invariant under the sign flip only.
    AbsX1,
}

impl SyntheticTarget {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticTarget::ExpNegAbsX1 => (-x[0].abs()).exp(),
            SyntheticTarget::ExpNegNorm => (-norm2(x)).exp(),
            SyntheticTarget::Norm => norm2(x),
            SyntheticTarget::AbsX1 => x[0].abs(),
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            SyntheticTarget::ExpNegAbsX1 => "exp-neg-abs-x1",
            SyntheticTarget::ExpNegNorm => "exp-neg-norm",
            SyntheticTarget::Norm => "norm",
            SyntheticTarget::AbsX1 => "abs-x1",
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Input sampling law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputLaw {
    /// Isotropic Gaussian `N(0, sd² I)`.
    Gaussian { sd: f64 },
    /// Uniform on the centred ball of the given radius.
    UniformBall { radius: f64 },
}

impl InputLaw {
    /// The law used by the low-dimensional sweeps: `N(0, 4 I)`.
    pub fn standard_gaussian() -> Self {
        InputLaw::Gaussian { sd: 2.0 }
    }

    /// The law used by the rejection-table sweeps and the estimator demo:
    /// `U(B(0, 4))`.
    pub fn standard_ball() -> Self {
        InputLaw::UniformBall { radius: 4.0 }
    }

    pub fn sample(&self, dim: usize, rng: &mut SeededRng) -> Vec<f64> {
        match self {
            InputLaw::Gaussian { sd } => (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                })
                .collect(),
            InputLaw::UniformBall { radius } => {
                // Direction from a spherical Gaussian, radius via U^{1/d}.
                let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let mut len = norm2(&dir);
                while len == 0.0 {
                    dir = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                    len = norm2(&dir);
                }
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / dim as f64);
                dir.iter().map(|v| v * r / len).collect()
            }
        }
    }
}

/// Mean-zero additive response noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
    None,
}

impl NoiseSpec {
    pub fn draw(&self, rng: &mut SeededRng) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSpec::Uniform { half_width } => rng.random_range(-half_width..*half_width),
            NoiseSpec::None => 0.0,
        }
    }
}

/// Draws `n` points from `law` and responses `Y_i = f(X_i) + ε_i`.
pub fn generate_dataset(
    target: SyntheticTarget,
    dim: usize,
    law: InputLaw,
    noise: NoiseSpec,
    n: usize,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n ≥ 2, got {n}")));
    }
    if dim == 0 {
        return Err(Error::InvalidInput("need dim ≥ 1".into()));
    }
    let mut points = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let x = law.sample(dim, rng);
        let y = target.eval(&x) + noise.draw(rng);
        points.push(x);
        responses.push(y);
    }
    Dataset::with_scalar_responses(points, responses)
}

/// Local constant estimator with a rectangular kernel
/// `K_h(x, X_i) = 1{d(x, X_i) < h}`. When an action is attached the kernel
/// is group-averaged, `K_G(x, X_i) = (1/|G|) Σ_g K_h(g·x, X_i)`, which makes
/// the fitted function exactly invariant under the action.
#[derive(Debug, Clone)]
pub struct KernelEstimator {
    pub bandwidth: f64,
    /// `Some(action)` averages the kernel over every element of the action
    /// (identity included).
    pub symmetrised: Option<GroupAction>,
}

impl KernelEstimator {
    pub fn plain(bandwidth: f64) -> Self {
        Self { bandwidth, symmetrised: None }
    }

    pub fn symmetrised(bandwidth: f64, action: GroupAction) -> Self {
        Self { bandwidth, symmetrised: Some(action) }
    }

    /// Weighted mean of the in-window responses; `None` when no training
    /// point falls inside any window (the prediction is undefined there).
    pub fn predict(&self, dataset: &Dataset, x: &[f64]) -> Result<Option<f64>> {
        let metric = Metric::Euclidean;
        // Integer window counts keep the group-averaged weights exact, so a
        // symmetrised fit returns bit-identical values on g·x and x.
        let mut weights: Vec<u32> = vec![0; dataset.n()];
        match &self.symmetrised {
            None => {
                for (w, point) in weights.iter_mut().zip(dataset.points()) {
                    if metric.distance(x, point) < self.bandwidth {
                        *w = 1;
                    }
                }
            }
            Some(action) => {
                for g in 0..action.len() {
                    let gx = action.apply_input(g, x)?;
                    for (w, point) in weights.iter_mut().zip(dataset.points()) {
                        if metric.distance(&gx, point) < self.bandwidth {
                            *w += 1;
                        }
                    }
                }
            }
        }
        let total: u32 = weights.iter().sum();
        if total == 0 {
            return Ok(None);
        }
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0 {
                acc += w as f64 * dataset.scalar_response(i);
            }
        }
        Ok(Some(acc / total as f64))
    }
}

/// Configuration of the estimator-comparison experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig2Config {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Bandwidth constant `c` in `h = c · n^{−1/(d+4)}`.
    pub bandwidth_constant: f64,
    pub dim: usize,
    pub noise_half_width: f64,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            n_grid: vec![50, 100, 200, 400],
            replicates: 500,
            bandwidth_constant: DEFAULT_BANDWIDTH_CONSTANT,
            dim: 2,
            noise_half_width: 0.1,
            seed: 1,
        }
    }
}

/// Calibrated once via [`calibrate_bandwidth_constant`] over
/// `{1.0, 1.5, 2.0, 2.5, 3.0}` on a held-out replicate (seed 20, n = 200)
/// and fixed thereafter.
pub const DEFAULT_BANDWIDTH_CONSTANT: f64 = 2.5;

/// One replicate's test error for one (target, estimator) pair.
#[derive(Debug, Clone, Serialize)]
pub struct Fig2Row {
    pub target: &'static str,
    pub estimator: &'static str,
    pub n: usize,
    pub replicate: usize,
    pub mse: f64,
    /// Test points skipped because every kernel window was empty.
    pub empty_windows: usize,
}

/// Grid-searches the bandwidth constant by plain-estimator test MSE on a
/// single held-out replicate.
pub fn calibrate_bandwidth_constant(candidates: &[f64], n: usize, seed: u64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no bandwidth candidates".into()));
    }
    let mut best = (f64::INFINITY, candidates[0]);
    for &c in candidates {
        let mut rng = SeededRng::with_stream(seed, 0);
        let train = generate_dataset(
            SyntheticTarget::ExpNegNorm,
            2,
            InputLaw::standard_ball(),
            NoiseSpec::Uniform { half_width: 0.1 },
            n,
            &mut rng,
        )?;
        let test = generate_dataset(
            SyntheticTarget::ExpNegNorm,
            2,
            InputLaw::standard_ball(),
            NoiseSpec::Uniform { half_width: 0.1 },
            n,
            &mut rng,
        )?;
        let h = c * (n as f64).powf(-1.0 / 6.0);
        let est = KernelEstimator::plain(h);
        let (mse, _) = test_mse(&est, &train, &test)?;
        if mse < best.0 {
            best = (mse, c);
        }
    }
    Ok(best.1)
}

fn test_mse(est: &KernelEstimator, train: &Dataset, test: &Dataset) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for i in 0..test.n() {
        match est.predict(train, test.point(i))? {
            Some(pred) => {
                let err = pred - test.scalar_response(i);
                sum += err * err;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::DegenerateData("every kernel window was empty".into()));
    }
    Ok((sum / used as f64, skipped))
}

/// Runs the plain-vs-symmetrised comparison over the `n` grid, for an
/// invariant target (`exp(−‖x‖)`) and a non-invariant one (`exp(−|x₁|)`),
/// with the quarter-turn rotation group on the kernel. Returns tidy rows
/// `(target, estimator, n, replicate, mse)`.
pub fn run_fig2_experiment(config: &Fig2Config) -> Result<Vec<Fig2Row>> {
    use rayon::prelude::*;

    if config.replicates == 0 || config.n_grid.is_empty() {
        return Err(Error::InvalidConfig("need a nonempty n grid and ≥ 1 replicate".into()));
    }
    let action = GroupAction::axis_rotation(config.dim)?;
    let targets = [
        (SyntheticTarget::ExpNegNorm, "invariant"),
        (SyntheticTarget::ExpNegAbsX1, "non-invariant"),
    ];

    let mut jobs = Vec::new();
    for (ti, &(target, label)) in targets.iter().enumerate() {
        for &n in &config.n_grid {
            for rep in 0..config.replicates {
                jobs.push((ti, target, label, n, rep));
            }
        }
    }

    let rows: Result<Vec<Vec<Fig2Row>>> = jobs
        .par_iter()
        .map(|&(ti, target, label, n, rep)| {
            let seed = mix_seed(config.seed, &[ti as u64, n as u64, rep as u64]);
            let mut rng = SeededRng::with_stream(seed, 0);
            let noise = NoiseSpec::Uniform { half_width: config.noise_half_width };
            let train =
                generate_dataset(target, config.dim, InputLaw::standard_ball(), noise, n, &mut rng)?;
            let test =
                generate_dataset(target, config.dim, InputLaw::standard_ball(), noise, n, &mut rng)?;
            let h =
                config.bandwidth_constant * (n as f64).powf(-1.0 / (config.dim as f64 + 4.0));
            let plain = KernelEstimator::plain(h);
            let symm = KernelEstimator::symmetrised(h, action.clone());
            let (mse_plain, skip_plain) = test_mse(&plain, &train, &test)?;
            let (mse_symm, skip_symm) = test_mse(&symm, &train, &test)?;
            Ok(vec![
                Fig2Row {
                    target: label,
                    estimator: "plain",
                    n,
                    replicate: rep,
                    mse: mse_plain,
                    empty_windows: skip_plain,
                },
                Fig2Row {
                    target: label,
                    estimator: "symmetrised",
                    n,
                    replicate: rep,
                    mse: mse_symm,
                    empty_windows: skip_symm,
                },
            ])
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Mean and standard error of the MSE per (target, estimator, n) cell.
#[derive(Debug, Clone, Serialize)]
pub struct Fig2Summary {
    pub target: String,
    pub estimator: String,
    pub n: usize,
    pub mean_mse: f64,
    pub se: f64,
    pub replicates: usize,
}

pub fn summarise_fig2(rows: &[Fig2Row]) -> Vec<Fig2Summary> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.target.to_string(), r.estimator.to_string(), r.n))
            .or_default()
            .push(r.mse);
    }
    cells
        .into_iter()
        .map(|((target, estimator, n), mses)| {
            let k = mses.len() as f64;
            let mean = mses.iter().sum::<f64>() / k;
            let var =
                mses.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (k - 1.0).max(1.0);
            Fig2Summary {
                target,
                estimator,
                n,
                mean_mse: mean,
                se: (var / k).sqrt(),
                replicates: mses.len(),
            }
        })
        .collect()
}

/// Writes the tidy rows as CSV: `target,estimator,n,replicate,mse,empty_windows`.
pub fn write_fig2_csv<W: std::io::Write>(rows: &[Fig2Row], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["target", "estimator", "n", "replicate", "mse", "empty_windows"])
        .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
    for r in rows {
        wtr.write_record([
            r.target.to_string(),
            r.estimator.to_string(),
            r.n.to_string(),
            r.replicate.to_string(),
            format!("{}", r.mse),
            r.empty_windows.to_string(),
        ])
        .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_values() {
        assert_eq!(SyntheticTarget::ExpNegAbsX1.eval(&[0.0, 7.0]), 1.0);
        assert_eq!(SyntheticTarget::Norm.eval(&[3.0, 4.0]), 5.0);
        assert_eq!(SyntheticTarget::AbsX1.eval(&[-2.5, 1.0]), 2.5);
        assert!((SyntheticTarget::ExpNegNorm.eval(&[3.0, 4.0]) - (-5.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn invariance_pattern_of_targets() {
        let rot = GroupAction::axis_rotation(2).unwrap();
        let flip = GroupAction::axis_rotation_sign_flip(2).unwrap();
        let r_rot = rot.element_id("R").unwrap();
        let r_flip = flip.element_id("R").unwrap();
        let x = vec![2.0, 0.0];

        // exp(−|x₁|) is sign-flip invariant but not quarter-turn invariant.
        let f = SyntheticTarget::ExpNegAbsX1;
        assert_eq!(f.eval(&flip.apply_input(r_flip, &x).unwrap()), f.eval(&x));
        assert_ne!(f.eval(&rot.apply_input(r_rot, &x).unwrap()), f.eval(&x));

        // ‖x‖ is invariant under both; |x₁| only under the sign flip.
        let g = SyntheticTarget::Norm;
        assert_eq!(g.eval(&rot.apply_input(r_rot, &x).unwrap()), g.eval(&x));
        assert_eq!(g.eval(&flip.apply_input(r_flip, &x).unwrap()), g.eval(&x));
        let h = SyntheticTarget::AbsX1;
        assert_eq!(h.eval(&flip.apply_input(r_flip, &x).unwrap()), h.eval(&x));
        assert_ne!(h.eval(&rot.apply_input(r_rot, &x).unwrap()), h.eval(&x));
    }

    #[test]
    fn generated_data_is_reproducible_and_noiseless_values_exact() {
        let mut rng = SeededRng::with_stream(5, 0);
        let a = generate_dataset(
            SyntheticTarget::ExpNegAbsX1,
            2,
            InputLaw::standard_gaussian(),
            NoiseSpec::None,
            50,
            &mut rng,
        )
        .unwrap();
        let mut rng = SeededRng::with_stream(5, 0);
        let b = generate_dataset(
            SyntheticTarget::ExpNegAbsX1,
            2,
            InputLaw::standard_gaussian(),
            NoiseSpec::None,
            50,
            &mut rng,
        )
        .unwrap();
        assert_eq!(a, b);
        for i in 0..a.n() {
            assert_eq!(a.scalar_response(i), (-a.point(i)[0].abs()).exp());
        }
    }

    #[test]
    fn noise_is_centred() {
        // CLT check: the empirical mean of ε over 10⁵ draws stays within
        // 4σ/√n of zero.
        let mut rng = SeededRng::new(31);
        let sigma = 0.5;
        let n = 100_000;
        let noise = NoiseSpec::Gaussian { sigma };
        let mean: f64 = (0..n).map(|_| noise.draw(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn ball_samples_stay_inside_radius() {
        let mut rng = SeededRng::new(3);
        let law = InputLaw::standard_ball();
        for _ in 0..500 {
            let x = law.sample(2, &mut rng);
            assert!(norm2(&x) <= 4.0);
        }
    }

    #[test]
    fn single_in_window_point_predicts_its_response() {
        let ds = Dataset::with_scalar_responses(
            vec![vec![0.0, 0.0], vec![10.0, 10.0]],
            vec![0.7, -3.0],
        )
        .unwrap();
        let est = KernelEstimator::plain(1.0);
        assert_eq!(est.predict(&ds, &[0.2, 0.0]).unwrap(), Some(0.7));
        assert_eq!(est.predict(&ds, &[5.0, 5.0]).unwrap(), None);
    }

    #[test]
    fn prediction_matches_weighted_mean_oracle() {
        let mut rng = SeededRng::new(44);
        let ds = generate_dataset(
            SyntheticTarget::ExpNegNorm,
            2,
            InputLaw::standard_ball(),
            NoiseSpec::Uniform { half_width: 0.1 },
            200,
            &mut rng,
        )
        .unwrap();
        let est = KernelEstimator::plain(0.8);
        for _ in 0..100 {
            let x = InputLaw::standard_ball().sample(2, &mut rng);
            // Direct recomputation.
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..ds.n() {
                let d: f64 = ds
                    .point(i)
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d < 0.8 {
                    num += ds.scalar_response(i);
                    den += 1.0;
                }
            }
            let expect = if den == 0.0 { None } else { Some(num / den) };
            assert_eq!(est.predict(&ds, &x).unwrap(), expect);
        }
    }

    #[test]
    fn symmetrised_fit_is_exactly_rotation_invariant() {
        let mut rng = SeededRng::new(9);
        let ds = generate_dataset(
            SyntheticTarget::ExpNegAbsX1,
            2,
            InputLaw::standard_ball(),
            NoiseSpec::Uniform { half_width: 0.1 },
            150,
            &mut rng,
        )
        .unwrap();
        let action = GroupAction::axis_rotation(2).unwrap();
        let r = action.element_id("R").unwrap();
        let est = KernelEstimator::symmetrised(1.0, action.clone());
        for _ in 0..50 {
            let x = InputLaw::standard_ball().sample(2, &mut rng);
            let rx = action.apply_input(r, &x).unwrap();
            assert_eq!(est.predict(&ds, &x).unwrap(), est.predict(&ds, &rx).unwrap());
        }
    }

    #[test]
    fn group_averaged_weights_match_augmented_queries() {
        // The symmetrised prediction equals the plain weighted mean over the
        // augmented query set {g·x}.
        let mut rng = SeededRng::new(71);
        let ds = generate_dataset(
            SyntheticTarget::ExpNegNorm,
            2,
            InputLaw::standard_ball(),
            NoiseSpec::None,
            100,
            &mut rng,
        )
        .unwrap();
        let action = GroupAction::axis_rotation(2).unwrap();
        let est = KernelEstimator::symmetrised(0.9, action.clone());
        let metric = Metric::Euclidean;
        for _ in 0..30 {
            let x = InputLaw::standard_ball().sample(2, &mut rng);
            let mut num = 0.0;
            let mut den = 0.0;
            for g in 0..action.len() {
                let gx = action.apply_input(g, &x).unwrap();
                for i in 0..ds.n() {
                    if metric.distance(&gx, ds.point(i)) < 0.9 {
                        num += ds.scalar_response(i);
                        den += 1.0;
                    }
                }
            }
            let got = est.predict(&ds, &x).unwrap();
            match (got, if den == 0.0 { None } else { Some(num / den) }) {
                (None, None) => {}
                // Same weights, different summation order: equal up to
                // rounding.
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0)),
                (a, b) => panic!("window mismatch: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn small_fig2_run_has_expected_shape() {
        let config = Fig2Config {
            n_grid: vec![40, 80],
            replicates: 5,
            bandwidth_constant: 2.0,
            dim: 2,
            noise_half_width: 0.1,
            seed: 7,
        };
        let rows = run_fig2_experiment(&config).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 5 * 2);
        let summary = summarise_fig2(&rows);
        assert_eq!(summary.len(), 2 * 2 * 2);
        let mut buf = Vec::new();
        write_fig2_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("target,estimator,n,replicate,mse,empty_windows"));
    }
}
