//! Image ingestion (IDX container), square-image symmetries, the
//! digit-orientation dataset construction, a data-driven Lipschitz bound and
//! the orientation experiment.
//!
//! The orientation test asks whether the probabilistic label function of a
//! digit class is invariant under image symmetries. Half of a class is kept
//! as-is with label 1; the other half is reflected horizontally and labelled
//! 0 when the digit is *oriented* (its mirror image is not the same symbol).
//! Rotations never map an upright digit onto its mirror form, so a
//! rotation-only test must accept while any test containing the reflection
//! must reject.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::action::GroupAction;
use crate::avt::{run_avt, AvtConfig, ThresholdSpec};
use crate::bound::VariationBound;
use crate::dataset::Dataset;
use crate::metric::{Metric, OutputNorm};
use crate::noise::NoiseModel;
use crate::sampling::SeededRng;
use crate::{Error, Result};

const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

/// Digits whose horizontal reflection is a different symbol.
pub const ORIENTED_DIGITS: [u8; 7] = [2, 3, 4, 5, 6, 7, 9];

/// A labelled image collection with intensities scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ImageDataset {
    images: Vec<Vec<f64>>,
    side: usize,
    labels: Vec<u8>,
}

impl ImageDataset {
    /// Scales raw bytes by 1/255 and checks shape consistency. Images must
    /// be square for the dihedral actions to apply.
    pub fn from_raw(raw: Vec<Vec<u8>>, rows: usize, cols: usize, labels: Vec<u8>) -> Result<Self> {
        if rows != cols {
            return Err(Error::InvalidInput(format!("images must be square, got {rows}×{cols}")));
        }
        if raw.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} images but {} labels",
                raw.len(),
                labels.len()
            )));
        }
        let side = rows;
        let images = raw
            .into_iter()
            .enumerate()
            .map(|(i, img)| {
                if img.len() != side * side {
                    return Err(Error::DimensionMismatch(format!(
                        "image {i} has {} pixels, expected {}",
                        img.len(),
                        side * side
                    )));
                }
                Ok(img.into_iter().map(|b| b as f64 / 255.0).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self { images, side, labels })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn indices_of_digit(&self, digit: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == digit).collect()
    }
}

fn read_u32_be<R: Read>(reader: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader
        .read_exact(&mut buf)
        .map_err(|e| Error::Parse(format!("truncated IDX file while reading {what}: {e}")))?;
    Ok(u32::from_be_bytes(buf))
}

/// Reads an IDX image file (magic `0x00000803`): raw pixel bytes plus the
/// row/column counts.
pub fn read_idx_images<P: AsRef<Path>>(path: P) -> Result<(Vec<Vec<u8>>, usize, usize)> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = std::io::BufReader::new(file);
    let magic = read_u32_be(&mut reader, "magic")?;
    if magic != IDX_MAGIC_IMAGES {
        return Err(Error::Parse(format!(
            "bad magic {magic:#010x}, expected {IDX_MAGIC_IMAGES:#010x} (3-dimensional u8 tensor)"
        )));
    }
    let count = read_u32_be(&mut reader, "image count")? as usize;
    let rows = read_u32_be(&mut reader, "row count")? as usize;
    let cols = read_u32_be(&mut reader, "column count")? as usize;
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let mut img = vec![0u8; rows * cols];
        reader
            .read_exact(&mut img)
            .map_err(|e| Error::Parse(format!("truncated IDX file at image {i}: {e}")))?;
        images.push(img);
    }
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::Parse("trailing bytes after the declared image count".into()));
    }
    Ok((images, rows, cols))
}

/// Reads an IDX label file (magic `0x00000801`).
pub fn read_idx_labels<P: AsRef<Path>>(path: P) -> Result<Vec<u8>> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = std::io::BufReader::new(file);
    let magic = read_u32_be(&mut reader, "magic")?;
    if magic != IDX_MAGIC_LABELS {
        return Err(Error::Parse(format!(
            "bad magic {magic:#010x}, expected {IDX_MAGIC_LABELS:#010x} (1-dimensional u8 vector)"
        )));
    }
    let count = read_u32_be(&mut reader, "label count")? as usize;
    let mut labels = vec![0u8; count];
    reader
        .read_exact(&mut labels)
        .map_err(|e| Error::Parse(format!("truncated IDX label file: {e}")))?;
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::Parse("trailing bytes after the declared label count".into()));
    }
    Ok(labels)
}

pub fn write_idx_images<P: AsRef<Path>>(
    path: P,
    images: &[Vec<u8>],
    rows: usize,
    cols: usize,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(&IDX_MAGIC_IMAGES.to_be_bytes())?;
    w.write_all(&(images.len() as u32).to_be_bytes())?;
    w.write_all(&(rows as u32).to_be_bytes())?;
    w.write_all(&(cols as u32).to_be_bytes())?;
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "image has {} pixels, expected {}",
                img.len(),
                rows * cols
            )));
        }
        w.write_all(img)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_idx_labels<P: AsRef<Path>>(path: P, labels: &[u8]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(&IDX_MAGIC_LABELS.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    w.flush()?;
    Ok(())
}

/// Loads an image/label IDX pair into a scaled [`ImageDataset`].
pub fn load_image_dataset<P: AsRef<Path>, Q: AsRef<Path>>(
    images_path: P,
    labels_path: Q,
) -> Result<ImageDataset> {
    let (raw, rows, cols) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    ImageDataset::from_raw(raw, rows, cols, labels)
}

/// Applies a dihedral element (`e, a, a2, a3, b, ba, ba2, ba3`) to one
/// flattened square image.
pub fn apply_d4(element: &str, image: &[f64], side: usize) -> Result<Vec<f64>> {
    let action = GroupAction::image_d4(side, false)?;
    let g = action.element_id(element)?;
    action.apply_input(g, image)
}

/// The orientation dataset of one digit class: an unreflected half labelled
/// 1 and a reflected half labelled 0 for oriented digits (1 otherwise).
#[derive(Debug, Clone)]
pub struct OrientationDataset {
    pub dataset: Dataset,
    pub side: usize,
    pub digit: u8,
    pub n_unreflected: usize,
    pub n_reflected: usize,
    /// Whether the digit was in the oriented set (reflected half labelled 0).
    pub oriented: bool,
}

/// Splits the class uniformly at random into halves (sizes differ by at most
/// one), reflects the second half once, and assigns labels.
pub fn build_orientation_dataset(
    images: &ImageDataset,
    digit: u8,
    oriented_set: &[u8],
    rng: &mut SeededRng,
) -> Result<OrientationDataset> {
    let mut idx = images.indices_of_digit(digit);
    if idx.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 images of digit {digit}, found {}",
            idx.len()
        )));
    }
    // Fisher–Yates with the caller's stream.
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let n_unreflected = idx.len().div_ceil(2);
    let oriented = oriented_set.contains(&digit);
    let reflected_label = if oriented { 0.0 } else { 1.0 };

    let action = GroupAction::image_d4(images.side(), false)?;
    let b = action.element_id("b")?;

    let mut points = Vec::with_capacity(idx.len());
    let mut responses = Vec::with_capacity(idx.len());
    for (k, &i) in idx.iter().enumerate() {
        if k < n_unreflected {
            points.push(images.image(i).to_vec());
            responses.push(1.0);
        } else {
            points.push(action.apply_input(b, images.image(i))?);
            responses.push(reflected_label);
        }
    }
    let n_reflected = idx.len() - n_unreflected;
    Ok(OrientationDataset {
        dataset: Dataset::with_scalar_responses(points, responses)?,
        side: images.side(),
        digit,
        n_unreflected,
        n_reflected,
        oriented,
    })
}

/// A Lipschitz constant estimated from the data as the reciprocal of the
/// minimal distance between the two label classes.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatedLipschitz {
    pub l_hat: f64,
    pub min_cross_distance: f64,
    pub class1_used: usize,
    pub class0_used: usize,
    pub pairs_scanned: u64,
    /// Per-class cap actually applied, if any.
    pub subsample: Option<usize>,
}

/// Scans all cross-class pairs (or a seeded per-class subsample) for the
/// minimum Euclidean distance. Errors when only one class is present: the
/// bound — and any test built on it — is then vacuous.
pub fn estimate_lipschitz(
    data: &OrientationDataset,
    subsample: Option<usize>,
    rng: &mut SeededRng,
) -> Result<EstimatedLipschitz> {
    use rayon::prelude::*;

    let ds = &data.dataset;
    let mut ones: Vec<usize> = Vec::new();
    let mut zeros: Vec<usize> = Vec::new();
    for i in 0..ds.n() {
        if ds.scalar_response(i) == 1.0 {
            ones.push(i);
        } else {
            zeros.push(i);
        }
    }
    if ones.is_empty() || zeros.is_empty() {
        return Err(Error::DegenerateData(format!(
            "digit {} produced a single-class dataset; the variation bound is unavailable and \
             the orientation test is vacuous",
            data.digit
        )));
    }

    if let Some(cap) = subsample {
        if cap == 0 {
            return Err(Error::InvalidConfig("subsample cap must be ≥ 1".into()));
        }
        for class in [&mut ones, &mut zeros] {
            if class.len() > cap {
                for i in (1..class.len()).rev() {
                    let j = rng.random_range(0..=i);
                    class.swap(i, j);
                }
                class.truncate(cap);
            }
        }
    }

    let min_sq = ones
        .par_iter()
        .map(|&i| {
            let a = ds.point(i);
            let mut best = f64::INFINITY;
            for &j in &zeros {
                let b = ds.point(j);
                let mut acc = 0.0;
                for (u, v) in a.iter().zip(b) {
                    let d = u - v;
                    acc += d * d;
                }
                if acc < best {
                    best = acc;
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min);

    let min_cross_distance = min_sq.sqrt();
    if min_cross_distance <= 0.0 || min_cross_distance.is_nan() {
        return Err(Error::DegenerateData(
            "identical images across the two classes; the estimated bound is unbounded".into(),
        ));
    }
    Ok(EstimatedLipschitz {
        l_hat: 1.0 / min_cross_distance,
        min_cross_distance,
        class1_used: ones.len(),
        class0_used: zeros.len(),
        pairs_scanned: ones.len() as u64 * zeros.len() as u64,
        subsample,
    })
}

/// Which symmetries the orientation experiment samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupChoice {
    /// Full dihedral group, sampled through `g ~ U({a, b})`.
    D4,
    /// Rotations only: `g = a` always.
    RotationsOnly,
    /// The reflection only: `g = b` always.
    ReflectionOnly,
}

impl GroupChoice {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "d4" | "D4" => Ok(GroupChoice::D4),
            "a" | "rotations" => Ok(GroupChoice::RotationsOnly),
            "b" | "reflection" => Ok(GroupChoice::ReflectionOnly),
            other => Err(Error::InvalidInput(format!(
                "unknown group choice {other:?} (expected d4, a or b)"
            ))),
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            GroupChoice::D4 => "d4",
            GroupChoice::RotationsOnly => "a",
            GroupChoice::ReflectionOnly => "b",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MnistReport {
    pub digit: u8,
    pub group: &'static str,
    pub n: usize,
    pub m: usize,
    /// Number of samples with a strictly positive statistic (`N₀`).
    pub n_exceed: usize,
    /// 0 exactly when `n_exceed > 0`, else 1 (noiseless tail).
    pub p_value: f64,
    pub l_hat: f64,
    pub min_cross_distance: f64,
    pub n_unreflected: usize,
    pub n_reflected: usize,
    pub subsample: Option<usize>,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl MnistReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Builds the orientation dataset for one digit, estimates the Lipschitz
/// bound from the data, and runs the noiseless asymmetric variation test
/// with the chosen symmetry sampler.
pub fn run_mnist_experiment(
    images: &ImageDataset,
    digit: u8,
    group: GroupChoice,
    m: usize,
    seed: u64,
    subsample: Option<usize>,
) -> Result<MnistReport> {
    let mut split_rng = SeededRng::with_stream(seed, 0);
    let data = build_orientation_dataset(images, digit, &ORIENTED_DIGITS, &mut split_rng)?;

    let mut sub_rng = SeededRng::with_stream(seed, 1);
    let lip = estimate_lipschitz(&data, subsample, &mut sub_rng)?;

    let action = GroupAction::image_d4(data.side, false)?;
    let dist = match group {
        GroupChoice::D4 => {
            crate::action::GeneratorDistribution::uniform_over(&action, &["a", "b"])?
        }
        GroupChoice::RotationsOnly => {
            crate::action::GeneratorDistribution::point_mass(&action, "a")?
        }
        GroupChoice::ReflectionOnly => {
            crate::action::GeneratorDistribution::point_mass(&action, "b")?
        }
    };

    let config = AvtConfig {
        m,
        thresholds: ThresholdSpec::single(0.0),
        noise: NoiseModel::Noiseless,
        bound: VariationBound::holder(lip.l_hat, 1.0)?,
        generator_dist: Some(dist),
        metric: Metric::Euclidean,
        norm: Some(OutputNorm::Abs),
        seed,
        stream: 2,
        keep_samples: false,
    };
    let report = run_avt(&data.dataset, &action, &config)?;
    let n_exceed = report.per_threshold[0].n_exceed;

    let config_echo = serde_json::json!({
        "experiment": "digit-orientation",
        "digit": digit,
        "group": group.describe(),
        "oriented_set": ORIENTED_DIGITS,
        "l_hat": lip.l_hat,
        "min_cross_distance": lip.min_cross_distance,
        "subsample": subsample,
        "avt": report.config,
    });

    Ok(MnistReport {
        digit,
        group: group.describe(),
        n: data.dataset.n(),
        m,
        n_exceed,
        p_value: report.p_value,
        l_hat: lip.l_hat,
        min_cross_distance: lip.min_cross_distance,
        n_unreflected: data.n_unreflected,
        n_reflected: data.n_reflected,
        subsample,
        seed,
        config: config_echo,
    })
}

// ---------------------------------------------------------------------------
// Synthetic glyph corpus
// ---------------------------------------------------------------------------

const GLYPH_SIDE: usize = 28;

// Seven-segment layout on a 12×20 box: A top, B top-right, C bottom-right,
// D bottom, E bottom-left, F top-left, G middle.
const SEGMENTS: [&[u8]; 10] = [
    b"ABCDEF",  // 0
    b"BC",      // 1
    b"ABGED",   // 2
    b"ABGCD",   // 3
    b"FGBC",    // 4
    b"AFGCD",   // 5
    b"AFGEDC",  // 6
    b"",        // 7: drawn as a top bar with a diagonal stem (see below)
    b"ABCDEFG", // 8
    b"ABCDFG",  // 9
];

/// Renders a jittered seven-segment digit into a 28×28 byte image. The
/// oriented digits are genuinely asymmetric under horizontal reflection,
/// making the corpus a stand-in for handwritten digits in the orientation
/// experiment and in tests that need IDX fixtures.
fn render_glyph(digit: u8, rng: &mut SeededRng) -> Vec<u8> {
    let (w, h, th) = (12usize, 20usize, 2usize);
    let row0 = (4 + rng.random_range(-2i32..=2)) as usize;
    let col0 = (8 + rng.random_range(-2i32..=2)) as usize;
    let stroke: u8 = rng.random_range(180..=255);

    let mut img = vec![0u8; GLYPH_SIDE * GLYPH_SIDE];
    let mut fill = |r_lo: usize, r_hi: usize, c_lo: usize, c_hi: usize| {
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                img[(row0 + r) * GLYPH_SIDE + col0 + c] = stroke;
            }
        }
    };
    for &seg in SEGMENTS[digit as usize] {
        match seg {
            b'A' => fill(0, th, 0, w),
            b'B' => fill(0, h / 2, w - th, w),
            b'C' => fill(h / 2, h, w - th, w),
            b'D' => fill(h - th, h, 0, w),
            b'E' => fill(h / 2, h, 0, th),
            b'F' => fill(0, h / 2, 0, th),
            b'G' => fill(h / 2 - th / 2, h / 2 - th / 2 + th, 0, w),
            _ => unreachable!(),
        }
    }
    // A bar-plus-vertical 7 rotates into roughly its own mirror image; a
    // diagonal stem (as handwritten) keeps the four orientations distinct.
    if digit == 7 {
        fill(0, th, 0, w);
        for r in th..h {
            let c0 = ((w - th) as f64 * (1.0 - r as f64 / (h - 1) as f64)).round() as usize;
            fill(r, r + 1, c0, c0 + th);
        }
    }
    // Mild background/intensity noise keeps images distinct.
    for px in img.iter_mut() {
        let noise: u8 = rng.random_range(0..20);
        *px = px.saturating_add(noise);
    }
    img
}

/// Raw byte images and labels for a balanced ten-digit glyph corpus.
pub fn glyph_corpus_raw(per_digit: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = SeededRng::with_stream(seed, 0);
    let mut images = Vec::with_capacity(per_digit * 10);
    let mut labels = Vec::with_capacity(per_digit * 10);
    for digit in 0u8..10 {
        for _ in 0..per_digit {
            images.push(render_glyph(digit, &mut rng));
            labels.push(digit);
        }
    }
    (images, labels)
}

/// The glyph corpus as a scaled [`ImageDataset`].
pub fn glyph_corpus(per_digit: usize, seed: u64) -> Result<ImageDataset> {
    let (raw, labels) = glyph_corpus_raw(per_digit, seed);
    ImageDataset::from_raw(raw, GLYPH_SIDE, GLYPH_SIDE, labels)
}
