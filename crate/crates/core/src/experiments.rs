//! Monte Carlo harness: rejection proportions of either test over grids of
//! sample sizes, bound constants and quantile levels.
//!
//! Every cell × replicate owns a seed derived from the base seed and its
//! coordinates, so cells are independent, individually re-runnable, and the
//! whole table is reproducible regardless of the parallel schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::ActionSpec;
use crate::avt::{
    collect_avt_samples, run_avt, statistics_for_bound, threshold_table, AvtConfig, ThresholdSpec,
};
use crate::bound::VariationBound;
use crate::metric::{Metric, OutputNorm};
use crate::noise::NoiseModel;
use crate::pvt::{collect_ratio_batches, pvalue_for_quantile, Pairing, PvtConfig};
use crate::sampling::{mix_seed, SeededRng};
use crate::synth::{generate_dataset, InputLaw, NoiseSpec, SyntheticTarget};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Avt,
    Pvt,
}

/// One hypothesis arm: a target function and the action tested against it.
/// An arm where the target really is equivariant measures size; one where it
/// is not measures power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub target: SyntheticTarget,
    pub action: ActionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub test: TestKind,
    pub dim: usize,
    pub arms: Vec<Arm>,
    pub input_law: InputLaw,
    pub n_grid: Vec<usize>,
    /// `None` pairs `m = n` along the grid; `Some` takes the cross product.
    #[serde(default)]
    pub m_grid: Option<Vec<usize>>,
    /// Response noise level; 0 means noiseless (then `threshold` is needed).
    pub sigma: f64,
    /// Hölder constant for the asymmetric variation test.
    pub l: f64,
    pub alpha_holder: f64,
    /// Exceedance threshold; `None` uses `t = 2σ`.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Quantile level for the permutation variant.
    pub q: f64,
    /// Batch count for the permutation variant.
    pub batches: usize,
    /// Pairing scheme for the batches of the permutation variant.
    #[serde(default = "default_batch_pairing")]
    pub batch_pairing: Pairing,
    #[serde(default = "default_baseline")]
    pub baseline: Pairing,
    pub replicates: usize,
    /// Significance level applied to each replicate's p-value.
    pub alpha: f64,
    pub base_seed: u64,
}

fn default_batch_pairing() -> Pairing {
    Pairing::Uniform
}

fn default_baseline() -> Pairing {
    Pairing::NearestNeighbour
}

impl SweepSpec {
    /// The two standard arms for a target pair under one action family:
    /// an equivariant arm (size) and a broken one (power).
    pub fn standard_arms(
        h0_target: SyntheticTarget,
        h0_action: ActionSpec,
        h1_target: SyntheticTarget,
        h1_action: ActionSpec,
    ) -> Vec<Arm> {
        vec![
            Arm { label: "h0".into(), target: h0_target, action: h0_action },
            Arm { label: "h1".into(), target: h1_target, action: h1_action },
        ]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("sweep spec: {e}")))
    }

    pub fn from_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("sweep spec serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.arms.is_empty() || self.n_grid.is_empty() {
            return Err(Error::InvalidConfig("need at least one arm and one n".into()));
        }
        if matches!(&self.m_grid, Some(g) if g.is_empty()) {
            return Err(Error::InvalidConfig("explicit m grid must be nonempty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("need at least one replicate".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidConfig("sigma must be ≥ 0".into()));
        }
        if self.sigma == 0.0 && self.threshold.is_none() && self.test == TestKind::Avt {
            return Err(Error::InvalidConfig(
                "noiseless sweeps need an explicit threshold".into(),
            ));
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        match &self.m_grid {
            None => self.n_grid.iter().map(|&n| (n, n)).collect(),
            Some(ms) => self
                .n_grid
                .iter()
                .flat_map(|&n| ms.iter().map(move |&m| (n, m)))
                .collect(),
        }
    }

    fn noise_model(&self) -> Result<NoiseModel> {
        if self.sigma == 0.0 {
            Ok(NoiseModel::Noiseless)
        } else {
            NoiseModel::gaussian(self.sigma)
        }
    }

    fn noise_spec(&self) -> NoiseSpec {
        if self.sigma == 0.0 {
            NoiseSpec::None
        } else {
            NoiseSpec::Gaussian { sigma: self.sigma }
        }
    }

    fn resolved_threshold(&self) -> f64 {
        self.threshold.unwrap_or(2.0 * self.sigma)
    }
}

/// One cell of a rejection table.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub arm: String,
    pub n: usize,
    pub m: usize,
    /// Extra sweep axis, e.g. `("L", 0.5)` or `("q", 0.95)`.
    pub axis: Option<(String, f64)>,
    pub rejections: usize,
    pub replicates: usize,
    pub proportion: f64,
    /// Binomial standard error `√(p̂(1−p̂)/R)`.
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectionTable {
    pub cells: Vec<Cell>,
    pub spec: serde_json::Value,
}

impl RejectionTable {
    pub fn cell(&self, arm: &str, n: usize, m: usize, axis: Option<(&str, f64)>) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.arm == arm
                && c.n == n
                && c.m == m
                && match (&c.axis, axis) {
                    (None, None) => true,
                    (Some((name, v)), Some((qname, qv))) => name == qname && *v == qv,
                    _ => false,
                }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Tidy CSV: `arm,n,m,axis,axis_value,rejections,replicates,proportion,se`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "arm",
            "n",
            "m",
            "axis",
            "axis_value",
            "rejections",
            "replicates",
            "proportion",
            "se",
        ])
        .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
        for c in &self.cells {
            let (axis, axis_value) = match &c.axis {
                Some((name, v)) => (name.clone(), format!("{v}")),
                None => (String::new(), String::new()),
            };
            wtr.write_record([
                c.arm.clone(),
                c.n.to_string(),
                c.m.to_string(),
                axis,
                axis_value,
                c.rejections.to_string(),
                c.replicates.to_string(),
                format!("{}", c.proportion),
                format!("{}", c.se),
            ])
            .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Plot-ready rows `n,proportion,se,series` (one series per arm, m and
    /// axis value).
    pub fn write_plot_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["n", "proportion", "se", "series"])
            .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
        for c in &self.cells {
            let mut series = c.arm.clone();
            if c.m != c.n {
                series.push_str(&format!("/m={}", c.m));
            }
            if let Some((name, v)) = &c.axis {
                series.push_str(&format!("/{name}={v}"));
            }
            wtr.write_record([
                c.n.to_string(),
                format!("{}", c.proportion),
                format!("{}", c.se),
                series,
            ])
            .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn make_cell(
    arm: &str,
    n: usize,
    m: usize,
    axis: Option<(String, f64)>,
    rejections: usize,
    replicates: usize,
) -> Cell {
    let p = rejections as f64 / replicates as f64;
    let se = (p * (1.0 - p) / replicates as f64).sqrt();
    Cell { arm: arm.to_string(), n, m, axis, rejections, replicates, proportion: p, se }
}

/// Rejection proportions of the configured test over the (n, m) grid for
/// every arm.
pub fn run_sweep(spec: &SweepSpec) -> Result<RejectionTable> {
    spec.validate()?;
    let mut cells = Vec::new();
    for (arm_idx, arm) in spec.arms.iter().enumerate() {
        let action = arm.action.build()?;
        for (cell_idx, &(n, m)) in spec.cells().iter().enumerate() {
            let flags: Vec<bool> = (0..spec.replicates)
                .into_par_iter()
                .map(|rep| -> Result<bool> {
                    let seed = mix_seed(
                        spec.base_seed,
                        &[arm_idx as u64, cell_idx as u64, rep as u64],
                    );
                    let mut data_rng = SeededRng::with_stream(seed, 0);
                    let ds = generate_dataset(
                        arm.target,
                        spec.dim,
                        spec.input_law,
                        spec.noise_spec(),
                        n,
                        &mut data_rng,
                    )?;
                    let p_value = match spec.test {
                        TestKind::Avt => {
                            let config = AvtConfig {
                                m,
                                thresholds: ThresholdSpec::single(spec.resolved_threshold()),
                                noise: spec.noise_model()?,
                                bound: VariationBound::holder(spec.l, spec.alpha_holder)?,
                                generator_dist: None,
                                metric: Metric::Euclidean,
                                norm: Some(OutputNorm::Abs),
                                seed,
                                stream: 1,
                                keep_samples: false,
                            };
                            run_avt(&ds, &action, &config)?.p_value
                        }
                        TestKind::Pvt => {
                            let config = PvtConfig {
                                m,
                                batches: spec.batches,
                                q: spec.q,
                                bound: VariationBound::order_only(spec.alpha_holder)?,
                                generator_dist: None,
                                batch_pairing: spec.batch_pairing,
                                baseline_pairing: spec.baseline,
                                metric: Metric::Euclidean,
                                norm: Some(OutputNorm::Abs),
                                seed,
                                stream: 1,
                                keep_samples: false,
                            };
                            crate::pvt::run_pvt(&ds, &action, &config)?.p_value
                        }
                    };
                    Ok(p_value <= spec.alpha)
                })
                .collect::<Result<Vec<bool>>>()?;
            let rejections = flags.iter().filter(|&&f| f).count();
            cells.push(make_cell(&arm.label, n, m, None, rejections, spec.replicates));
        }
    }
    Ok(RejectionTable { cells, spec: spec.to_value() })
}

/// Rejection proportions over a grid of bound constants `L`, with the data
/// and the sampled pairs shared across the whole grid per replicate. Shrinking
/// `L` grows every statistic pointwise, so on shared draws the rejection
/// proportion is monotone in `L` by construction.
pub fn run_v_sensitivity(spec: &SweepSpec, l_grid: &[f64]) -> Result<RejectionTable> {
    spec.validate()?;
    if spec.test != TestKind::Avt {
        return Err(Error::InvalidConfig("the L sweep applies to the avt test".into()));
    }
    if l_grid.is_empty() {
        return Err(Error::InvalidConfig("empty L grid".into()));
    }
    let noise = spec.noise_model()?;
    let threshold = spec.resolved_threshold();

    let mut cells = Vec::new();
    for (arm_idx, arm) in spec.arms.iter().enumerate() {
        let action = arm.action.build()?;
        for (cell_idx, &(n, m)) in spec.cells().iter().enumerate() {
            let all_flags: Vec<Vec<bool>> = (0..spec.replicates)
                .into_par_iter()
                .map(|rep| -> Result<Vec<bool>> {
                    let seed = mix_seed(
                        spec.base_seed,
                        &[arm_idx as u64, cell_idx as u64, rep as u64],
                    );
                    let mut data_rng = SeededRng::with_stream(seed, 0);
                    let ds = generate_dataset(
                        arm.target,
                        spec.dim,
                        spec.input_law,
                        spec.noise_spec(),
                        n,
                        &mut data_rng,
                    )?;
                    let dist =
                        crate::action::GeneratorDistribution::uniform_non_identity(&action)?;
                    let mut test_rng = SeededRng::with_stream(seed, 1);
                    let samples = collect_avt_samples(
                        &ds,
                        &action,
                        &dist,
                        m,
                        &Metric::Euclidean,
                        OutputNorm::Abs,
                        &mut test_rng,
                    )?;
                    l_grid
                        .iter()
                        .map(|&l| {
                            let bound = VariationBound::holder(l, spec.alpha_holder)?;
                            let stats =
                                statistics_for_bound(&samples, &bound, &ds, &Metric::Euclidean)?;
                            let rows = threshold_table(&stats, &[threshold], &noise, None)?;
                            Ok(rows[0].p_value <= spec.alpha)
                        })
                        .collect()
                })
                .collect::<Result<Vec<Vec<bool>>>>()?;
            let mut per_l = vec![0usize; l_grid.len()];
            for flags in &all_flags {
                for (k, &f) in flags.iter().enumerate() {
                    per_l[k] += f as usize;
                }
            }
            for (k, &l) in l_grid.iter().enumerate() {
                cells.push(make_cell(
                    &arm.label,
                    n,
                    m,
                    Some(("L".into(), l)),
                    per_l[k],
                    spec.replicates,
                ));
            }
        }
    }
    Ok(RejectionTable { cells, spec: spec.to_value() })
}

/// Rejection proportions over a grid of quantile levels, with the drawn
/// batches shared across the levels per replicate.
pub fn run_q_sensitivity(spec: &SweepSpec, q_grid: &[f64]) -> Result<RejectionTable> {
    spec.validate()?;
    if spec.test != TestKind::Pvt {
        return Err(Error::InvalidConfig("the q sweep applies to the pvt test".into()));
    }
    if q_grid.is_empty() {
        return Err(Error::InvalidConfig("empty q grid".into()));
    }

    let mut cells = Vec::new();
    for (arm_idx, arm) in spec.arms.iter().enumerate() {
        let action = arm.action.build()?;
        for (cell_idx, &(n, m)) in spec.cells().iter().enumerate() {
            let all_flags: Vec<Vec<bool>> = (0..spec.replicates)
                .into_par_iter()
                .map(|rep| -> Result<Vec<bool>> {
                    let seed = mix_seed(
                        spec.base_seed,
                        &[arm_idx as u64, cell_idx as u64, rep as u64],
                    );
                    let mut data_rng = SeededRng::with_stream(seed, 0);
                    let ds = generate_dataset(
                        arm.target,
                        spec.dim,
                        spec.input_law,
                        spec.noise_spec(),
                        n,
                        &mut data_rng,
                    )?;
                    let config = PvtConfig {
                        m,
                        batches: spec.batches,
                        q: spec.q,
                        bound: VariationBound::order_only(spec.alpha_holder)?,
                        generator_dist: None,
                        batch_pairing: spec.batch_pairing,
                        baseline_pairing: spec.baseline,
                        metric: Metric::Euclidean,
                        norm: Some(OutputNorm::Abs),
                        seed,
                        stream: 1,
                        keep_samples: false,
                    };
                    let drawn = collect_ratio_batches(&ds, &action, &config)?;
                    q_grid
                        .iter()
                        .map(|&q| {
                            let (p, _, _) = pvalue_for_quantile(&drawn, q)?;
                            Ok(p <= spec.alpha)
                        })
                        .collect()
                })
                .collect::<Result<Vec<Vec<bool>>>>()?;
            let mut per_q = vec![0usize; q_grid.len()];
            for flags in &all_flags {
                for (k, &f) in flags.iter().enumerate() {
                    per_q[k] += f as usize;
                }
            }
            for (k, &q) in q_grid.iter().enumerate() {
                cells.push(make_cell(
                    &arm.label,
                    n,
                    m,
                    Some(("q".into(), q)),
                    per_q[k],
                    spec.replicates,
                ));
            }
        }
    }
    Ok(RejectionTable { cells, spec: spec.to_value() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            test: TestKind::Avt,
            dim: 2,
            arms: SweepSpec::standard_arms(
                SyntheticTarget::ExpNegAbsX1,
                ActionSpec::AxisRotationSignFlip { dimension: 2 },
                SyntheticTarget::ExpNegAbsX1,
                ActionSpec::AxisRotation { dimension: 2 },
            ),
            input_law: InputLaw::standard_ball(),
            n_grid: vec![40, 80],
            m_grid: None,
            sigma: 0.05,
            l: 1.0,
            alpha_holder: 1.0,
            threshold: None,
            q: 0.95,
            batches: 30,
            batch_pairing: Pairing::Uniform,
            baseline: Pairing::NearestNeighbour,
            replicates: 8,
            alpha: 0.05,
            base_seed: 7,
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = tiny_spec();
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.cells.len(), 4);
        for c in &a.cells {
            assert!(c.proportion >= 0.0 && c.proportion <= 1.0);
            assert!(c.se >= 0.0);
        }
        let mut spec2 = spec;
        spec2.base_seed = 8;
        let c = run_sweep(&spec2).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn explicit_m_grid_crosses() {
        let mut spec = tiny_spec();
        spec.n_grid = vec![30, 50];
        spec.m_grid = Some(vec![20, 40, 60]);
        spec.replicates = 2;
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.cells.len(), 2 * 2 * 3);
        assert!(table.cell("h1", 50, 60, None).is_some());
    }

    #[test]
    fn v_sensitivity_is_monotone_on_shared_draws() {
        let mut spec = tiny_spec();
        spec.replicates = 12;
        spec.n_grid = vec![60];
        let grid = [(-1.0f64).exp(), 0.5, 1.0, 2.0];
        let table = run_v_sensitivity(&spec, &grid).unwrap();
        for arm in ["h0", "h1"] {
            let mut last = usize::MAX;
            for &l in &grid {
                let c = table.cell(arm, 60, 60, Some(("L", l))).unwrap();
                assert!(c.rejections <= last, "rejections grew with L on shared draws");
                last = c.rejections;
            }
        }
    }

    #[test]
    fn q_sensitivity_reports_all_levels() {
        let mut spec = tiny_spec();
        spec.test = TestKind::Pvt;
        spec.replicates = 4;
        spec.n_grid = vec![40];
        spec.batches = 20;
        let grid = [0.5, 0.95, 1.0];
        let table = run_q_sensitivity(&spec, &grid).unwrap();
        assert_eq!(table.cells.len(), 2 * 3);
        for c in &table.cells {
            assert!(c.proportion >= 0.0 && c.proportion <= 1.0);
        }
    }

    #[test]
    fn csv_emitters_have_headers() {
        let mut spec = tiny_spec();
        spec.replicates = 2;
        spec.n_grid = vec![30];
        let table = run_sweep(&spec).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("arm,n,m,axis,axis_value"));
        let mut buf = Vec::new();
        table.write_plot_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,proportion,se,series"));
    }

    #[test]
    fn sweep_spec_json_round_trip() {
        let spec = tiny_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let back = SweepSpec::from_json(&text).unwrap();
        assert_eq!(back.n_grid, spec.n_grid);
        assert_eq!(back.arms.len(), 2);
        assert!(SweepSpec::from_json("{}").is_err());
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut spec = tiny_spec();
        spec.replicates = 0;
        assert!(run_sweep(&spec).is_err());
        let mut spec = tiny_spec();
        spec.alpha = 1.5;
        assert!(run_sweep(&spec).is_err());
        let mut spec = tiny_spec();
        spec.sigma = 0.0;
        spec.threshold = None;
        assert!(run_sweep(&spec).is_err());
        let spec = tiny_spec();
        assert!(run_q_sensitivity(&spec, &[0.5]).is_err(), "q sweep needs pvt");
    }
}
