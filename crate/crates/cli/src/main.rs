//! Command-line front end: run either equivariance test on a dataset file,
//! reproduce the simulation sweeps, or run the digit-orientation experiment
//! on IDX image files. Every run writes a JSON report plus a manifest with
//! the resolved configuration, seed and input digests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use equitest::action::{ActionSpec, GeneratorDistribution};
use equitest::avt::{run_avt, AvtConfig, ThresholdSpec};
use equitest::bound::VariationBound;
use equitest::dataset::Dataset;
use equitest::experiments::{run_q_sensitivity, run_sweep, run_v_sensitivity, SweepSpec};
use equitest::metric::Metric;
use equitest::mnist::{load_image_dataset, run_mnist_experiment, GroupChoice};
use equitest::noise::NoiseModel;
use equitest::pvt::{run_pvt, Pairing, PvtConfig};
use equitest::synth::{
    run_fig2_experiment, summarise_fig2, write_fig2_csv, Fig2Config, DEFAULT_BANDWIDTH_CONSTANT,
};

#[derive(Parser)]
#[command(
    name = "equitest",
    version,
    about = "Tests whether a regression function is equivariant under a finite group action, \
             directly from data and before any model is trained"
)]
struct Cli {
    /// RNG seed; echoed into every report.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// RNG stream id (parallel replicate lanes reuse the seed).
    #[arg(long, global = true, default_value_t = 0)]
    stream: u64,
    /// Cap on worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Directory for reports and manifests.
    #[arg(long, global = true, default_value = "equitest-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// CSV dataset with header columns x0..x{d-1}, y0..y{d'-1}.
    #[arg(long, conflicts_with_all = ["images", "labels"])]
    data: Option<PathBuf>,
    /// IDX image file (used together with --labels).
    #[arg(long, requires = "labels")]
    images: Option<PathBuf>,
    /// IDX label file; labels become scalar responses.
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<(Dataset, Vec<PathBuf>)> {
        if let Some(csv) = &self.data {
            let ds = Dataset::read_csv_path(csv)
                .with_context(|| format!("reading {}", csv.display()))?;
            return Ok((ds, vec![csv.clone()]));
        }
        match (&self.images, &self.labels) {
            (Some(images), Some(labels)) => {
                let img = load_image_dataset(images, labels)
                    .with_context(|| format!("reading {}", images.display()))?;
                let points: Vec<Vec<f64>> = (0..img.n()).map(|i| img.image(i).to_vec()).collect();
                let responses: Vec<f64> = (0..img.n()).map(|i| img.label(i) as f64).collect();
                let ds = Dataset::with_scalar_responses(points, responses)?;
                Ok((ds, vec![images.clone(), labels.clone()]))
            }
            _ => bail!("supply --data FILE.csv or an IDX pair via --images/--labels"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Asymmetric variation test (needs a known variation bound and a noise
    /// tail).
    Avt {
        #[command(flatten)]
        data: DataArgs,
        /// JSON group-action spec (kind tag plus parameters).
        #[arg(long)]
        action_spec: PathBuf,
        /// Number of sampled pairs.
        #[arg(long)]
        m: usize,
        /// Comma-separated explicit thresholds, strictly increasing.
        #[arg(long, conflicts_with = "grid_k", allow_hyphen_values = true)]
        thresholds: Option<String>,
        /// Auto-place this many thresholds with tail levels spread over (0,1).
        #[arg(long)]
        grid_k: Option<usize>,
        /// Gaussian noise level sigma.
        #[arg(long, conflicts_with = "noiseless")]
        sigma: Option<f64>,
        /// Assume exact (noise-free) responses.
        #[arg(long)]
        noiseless: bool,
        /// Hölder constant of the variation bound.
        #[arg(long = "L")]
        l: f64,
        /// Hölder exponent of the variation bound.
        #[arg(long, default_value_t = 1.0)]
        alpha_holder: f64,
        /// Sample generators uniformly from these element names instead of
        /// the default non-identity powers.
        #[arg(long)]
        generators: Option<String>,
        /// Drop the raw statistic sample from the report.
        #[arg(long)]
        no_samples: bool,
    },
    /// Permutation variant (needs only the order of the bound).
    Pvt {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        action_spec: PathBuf,
        /// Pairs per batch.
        #[arg(long)]
        m: usize,
        /// Number of batches.
        #[arg(long = "B")]
        batches: usize,
        /// Quantile level in (0, 1].
        #[arg(long, default_value_t = 0.95)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_holder: f64,
        /// Baseline pairing: nn or uniform.
        #[arg(long, default_value = "nn")]
        baseline: String,
        /// Batch pairing: uniform or nn.
        #[arg(long, default_value = "uniform")]
        batch_pairing: String,
        #[arg(long)]
        generators: Option<String>,
        /// Also dump the batch quantiles as CSV for histogramming.
        #[arg(long)]
        quantiles_csv: bool,
    },
    /// Monte Carlo rejection-proportion sweeps from a JSON spec file.
    Simulate {
        /// Sweep spec (see `equitest::experiments::SweepSpec`).
        #[arg(long)]
        spec: PathBuf,
        /// Sweep the bound constant over these values (shared draws).
        #[arg(long, allow_hyphen_values = true)]
        l_grid: Option<String>,
        /// Sweep the quantile level over these values (shared draws).
        #[arg(long)]
        q_grid: Option<String>,
    },
    /// Digit-orientation test on an IDX image/label pair.
    Mnist {
        /// Directory holding train-images-idx3-ubyte / train-labels-idx1-ubyte.
        #[arg(long, conflicts_with_all = ["images", "labels"])]
        dir: Option<PathBuf>,
        #[arg(long, requires = "labels")]
        images: Option<PathBuf>,
        #[arg(long, requires = "images")]
        labels: Option<PathBuf>,
        /// Digit class to test.
        #[arg(long)]
        digit: u8,
        /// Symmetries to sample: d4, a (rotations) or b (reflection).
        #[arg(long, default_value = "d4")]
        group: String,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Cap the per-class points used for the bound estimate.
        #[arg(long)]
        subsample: Option<usize>,
    },
    /// Plain vs kernel-symmetrised estimator error comparison.
    DemoFig2 {
        /// Comma-separated training sizes.
        #[arg(long, default_value = "50,100,200,400")]
        n_grid: String,
        #[arg(long, default_value_t = 500)]
        replicates: usize,
        /// Bandwidth constant c in h = c·n^{-1/(d+4)}.
        #[arg(long, default_value_t = DEFAULT_BANDWIDTH_CONSTANT)]
        bandwidth_c: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("digesting {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("parsing {what} value {s:?}")))
        .collect()
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("parsing {what} value {s:?}")))
        .collect()
}

fn parse_pairing(text: &str, what: &str) -> Result<Pairing> {
    match text {
        "nn" | "nearest-neighbour" | "nearest_neighbour" => Ok(Pairing::NearestNeighbour),
        "uniform" => Ok(Pairing::Uniform),
        other => bail!("unknown {what} {other:?} (expected nn or uniform)"),
    }
}

struct Manifest {
    subcommand: &'static str,
    config: serde_json::Value,
    seed: u64,
    stream: u64,
    started_ms: u128,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Manifest {
    fn write(self, out_dir: &Path) -> Result<()> {
        let inputs: Vec<serde_json::Value> = self
            .inputs
            .iter()
            .map(|p| {
                Ok(serde_json::json!({
                    "path": p.display().to_string(),
                    "sha256": sha256_file(p)?,
                }))
            })
            .collect::<Result<_>>()?;
        let manifest = serde_json::json!({
            "tool": "equitest",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "stream": self.stream,
            "started_unix_ms": self.started_ms,
            "finished_unix_ms": now_ms(),
            "inputs": inputs,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global().ok();
    }
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let started_ms = now_ms();
    let (seed, stream, out_dir) = (cli.seed, cli.stream, cli.out_dir.clone());

    match cli.command {
        Command::Avt {
            data,
            action_spec,
            m,
            thresholds,
            grid_k,
            sigma,
            noiseless,
            l,
            alpha_holder,
            generators,
            no_samples,
        } => {
            let (dataset, inputs) = data.load()?;
            let spec = ActionSpec::from_path(&action_spec)?;
            let action = spec.build()?;

            let noise = if noiseless {
                NoiseModel::Noiseless
            } else if let Some(s) = sigma {
                NoiseModel::gaussian(s)?
            } else {
                bail!("specify the noise: --sigma SIGMA or --noiseless");
            };
            let thresholds = match (thresholds, grid_k) {
                (Some(list), None) => ThresholdSpec::Explicit(parse_f64_list(&list, "threshold")?),
                (None, Some(k)) => ThresholdSpec::AutoGrid { k },
                (None, None) if noiseless => ThresholdSpec::single(0.0),
                (None, None) => bail!("specify --thresholds or --grid-k"),
                _ => unreachable!("clap enforces the conflict"),
            };
            let generator_dist = match generators {
                Some(names) => {
                    let names: Vec<&str> = names.split(',').map(|s| s.trim()).collect();
                    Some(GeneratorDistribution::uniform_over(&action, &names)?)
                }
                None => None,
            };

            let config = AvtConfig {
                m,
                thresholds,
                noise,
                bound: VariationBound::holder(l, alpha_holder)?,
                generator_dist,
                metric: Metric::Euclidean,
                norm: None,
                seed,
                stream,
                keep_samples: !no_samples,
            };
            let report = run_avt(&dataset, &action, &config)?;

            let report_path = out_dir.join("avt_report.json");
            std::fs::write(&report_path, report.to_json())?;
            println!("config: {}", report.config);
            for row in &report.per_threshold {
                println!(
                    "t = {:<10} p_t = {:<10.6} N_t = {:<6} tail p = {:.6}",
                    row.t, row.p_t, row.n_exceed, row.p_value
                );
            }
            println!("p_value = {}", report.p_value);
            println!("report: {}", report_path.display());
            Manifest {
                subcommand: "avt",
                config: report.config.clone(),
                seed,
                stream,
                started_ms,
                inputs: [inputs, vec![action_spec]].concat(),
                outputs: vec![report_path],
            }
            .write(&out_dir)?;
        }

        Command::Pvt {
            data,
            action_spec,
            m,
            batches,
            q,
            alpha_holder,
            baseline,
            batch_pairing,
            generators,
            quantiles_csv,
        } => {
            let (dataset, inputs) = data.load()?;
            let spec = ActionSpec::from_path(&action_spec)?;
            let action = spec.build()?;
            let generator_dist = match generators {
                Some(names) => {
                    let names: Vec<&str> = names.split(',').map(|s| s.trim()).collect();
                    Some(GeneratorDistribution::uniform_over(&action, &names)?)
                }
                None => None,
            };
            let config = PvtConfig {
                m,
                batches,
                q,
                bound: VariationBound::order_only(alpha_holder)?,
                generator_dist,
                batch_pairing: parse_pairing(&batch_pairing, "batch pairing")?,
                baseline_pairing: parse_pairing(&baseline, "baseline pairing")?,
                metric: Metric::Euclidean,
                norm: None,
                seed,
                stream,
                keep_samples: false,
            };
            let report = run_pvt(&dataset, &action, &config)?;

            let report_path = out_dir.join("pvt_report.json");
            std::fs::write(&report_path, report.to_json())?;
            let mut outputs = vec![report_path.clone()];
            if quantiles_csv {
                let csv_path = out_dir.join("pvt_quantiles.csv");
                let mut text = String::from("batch,quantile\n");
                text.push_str(&format!("0,{}\n", report.baseline_quantile));
                for (k, a) in report.batch_quantiles.iter().enumerate() {
                    text.push_str(&format!("{},{a}\n", k + 1));
                }
                std::fs::write(&csv_path, text)?;
                outputs.push(csv_path);
            }
            println!("config: {}", report.config);
            println!(
                "baseline A_0 = {:.6}; batches above it: {}",
                report.baseline_quantile,
                report.batch_quantiles.iter().filter(|&&a| a > report.baseline_quantile).count()
            );
            println!("p_value = {} (smoothed {:.4})", report.p_value, report.p_value_smoothed);
            println!("report: {}", report_path.display());
            Manifest {
                subcommand: "pvt",
                config: report.config.clone(),
                seed,
                stream,
                started_ms,
                inputs: [inputs, vec![action_spec]].concat(),
                outputs,
            }
            .write(&out_dir)?;
        }

        Command::Simulate { spec, l_grid, q_grid } => {
            let sweep = SweepSpec::from_path(&spec)?;
            let table = match (&l_grid, &q_grid) {
                (Some(ls), None) => {
                    run_v_sensitivity(&sweep, &parse_f64_list(ls, "L grid")?)?
                }
                (None, Some(qs)) => {
                    run_q_sensitivity(&sweep, &parse_f64_list(qs, "q grid")?)?
                }
                (None, None) => run_sweep(&sweep)?,
                (Some(_), Some(_)) => bail!("choose one of --l-grid or --q-grid"),
            };
            let json_path = out_dir.join("table.json");
            let csv_path = out_dir.join("table.csv");
            let plot_path = out_dir.join("plot.csv");
            std::fs::write(&json_path, table.to_json())?;
            table.write_csv(std::fs::File::create(&csv_path)?)?;
            table.write_plot_csv(std::fs::File::create(&plot_path)?)?;
            println!("config: {}", table.spec);
            for cell in &table.cells {
                let axis = cell
                    .axis
                    .as_ref()
                    .map(|(name, v)| format!(" {name}={v}"))
                    .unwrap_or_default();
                println!(
                    "arm={} n={} m={}{axis}: rejection proportion {:.3} (se {:.3})",
                    cell.arm, cell.n, cell.m, cell.proportion, cell.se
                );
            }
            println!("results: {}", out_dir.display());
            Manifest {
                subcommand: "simulate",
                config: sweep.to_value(),
                seed: sweep.base_seed,
                stream,
                started_ms,
                inputs: vec![spec],
                outputs: vec![json_path, csv_path, plot_path],
            }
            .write(&out_dir)?;
        }

        Command::Mnist { dir, images, labels, digit, group, m, subsample } => {
            let (images, labels) = match (dir, images, labels) {
                (Some(dir), _, _) => (
                    dir.join("train-images-idx3-ubyte"),
                    dir.join("train-labels-idx1-ubyte"),
                ),
                (None, Some(i), Some(l)) => (i, l),
                _ => bail!("supply --dir DIR or both --images and --labels"),
            };
            let group = GroupChoice::parse(&group)?;
            let data = load_image_dataset(&images, &labels)?;
            let report = run_mnist_experiment(&data, digit, group, m, seed, subsample)?;
            let report_path = out_dir.join(format!("orientation_digit{digit}_{}.json", report.group));
            std::fs::write(&report_path, report.to_json())?;
            println!("config: {}", report.config);
            println!(
                "digit {digit} under {}: N_0 = {} of m = {}, p_value = {}",
                report.group, report.n_exceed, report.m, report.p_value
            );
            println!("report: {}", report_path.display());
            Manifest {
                subcommand: "mnist",
                config: report.config.clone(),
                seed,
                stream,
                started_ms,
                inputs: vec![images, labels],
                outputs: vec![report_path],
            }
            .write(&out_dir)?;
        }

        Command::DemoFig2 { n_grid, replicates, bandwidth_c } => {
            let config = Fig2Config {
                n_grid: parse_usize_list(&n_grid, "n grid")?,
                replicates,
                bandwidth_constant: bandwidth_c,
                dim: 2,
                noise_half_width: 0.1,
                seed,
            };
            let rows = run_fig2_experiment(&config)?;
            let csv_path = out_dir.join("fig2.csv");
            write_fig2_csv(&rows, std::fs::File::create(&csv_path)?)?;
            let summary = summarise_fig2(&rows);
            let summary_path = out_dir.join("fig2_summary.json");
            std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
            let config_echo = serde_json::to_value(&config)?;
            println!("config: {config_echo}");
            for s in &summary {
                println!(
                    "{:<14} {:<12} n={:<5} mean MSE {:.5} (se {:.5})",
                    s.target, s.estimator, s.n, s.mean_mse, s.se
                );
            }
            println!("results: {}", out_dir.display());
            Manifest {
                subcommand: "demo-fig2",
                config: config_echo,
                seed,
                stream,
                started_ms,
                inputs: vec![],
                outputs: vec![csv_path, summary_path],
            }
            .write(&out_dir)?;
        }
    }
    Ok(())
}
