//! Seeded randomness and the pair-sampling schemes shared by both tests.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::action::{GeneratorDistribution, GroupAction};
use crate::dataset::Dataset;
use crate::metric::Metric;
use crate::{Error, Result};

/// A reproducible random stream: identical `(seed, stream)` pairs yield
/// identical draw sequences, and distinct streams from one seed are
/// independent, which is how parallel replicates stay deterministic.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream derived from the same seed.
    pub fn substream(&self, stream: u64) -> Self {
        Self::with_stream(self.seed, stream)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Derives one seed from a base seed and a coordinate vector (splitmix64
/// chain). Used to give every sweep cell and replicate its own independent,
/// individually re-runnable seed.
pub fn mix_seed(base: u64, words: &[u64]) -> u64 {
    let mut state = base ^ 0x9E37_79B9_7F4A_7C15;
    let mut mix = |w: u64| {
        state = state.wrapping_add(w).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    };
    for &w in words {
        mix(w);
    }
    mix(0);
    state
}

/// One sampled comparison: a group element `g`, indices `i = I(j)` and
/// `j = J(j)`, the transformed point `g·X_i` and its distance to `X_j`.
#[derive(Debug, Clone, Serialize)]
pub struct SampledPair {
    pub element: usize,
    pub i: usize,
    pub j: usize,
    #[serde(skip)]
    pub transformed_point: Vec<f64>,
    pub pair_distance: f64,
}

/// Draws one element from a generator distribution.
pub fn sample_generator<R: Rng + ?Sized>(dist: &GeneratorDistribution, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Index and distance of the point closest to `query`, optionally excluding
/// one index. Exhaustive scan; ties break to the lowest index.
pub fn nearest_neighbour(
    query: &[f64],
    dataset: &Dataset,
    metric: &Metric,
    exclude: Option<usize>,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..dataset.n() {
        if exclude == Some(i) {
            continue;
        }
        let d = metric.distance(query, dataset.point(i));
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.ok_or_else(|| Error::InvalidInput("nearest neighbour of an empty candidate set".into()))
}

/// Draws `m` pairs for the nearest-neighbour scheme: `I(j)` uniform with
/// replacement, `g_j` from `dist`, and `J(j)` the nearest neighbour of
/// `g_j·X_{I(j)}`. The index `I(j)` itself is excluded from the candidates
/// exactly when `g_j·X_{I(j)}` coincides with `X_{I(j)}` (certain for
/// identity-acting elements); a zero-distance self-pair carries no
/// information.
pub fn sample_pairs_nn(
    dataset: &Dataset,
    action: &GroupAction,
    dist: &GeneratorDistribution,
    m: usize,
    metric: &Metric,
    rng: &mut SeededRng,
) -> Result<Vec<SampledPair>> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one sampled pair".into()));
    }
    let n = dataset.n();
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let g = dist.sample(rng);
        let i = rng.random_range(0..n);
        let gx = action.apply_input(g, dataset.point(i))?;
        let exclude = if metric.distance(&gx, dataset.point(i)) == 0.0 { Some(i) } else { None };
        let (j, d) = nearest_neighbour(&gx, dataset, metric, exclude)?;
        pairs.push(SampledPair { element: g, i, j, transformed_point: gx, pair_distance: d });
    }
    Ok(pairs)
}

const MAX_RESAMPLE_ATTEMPTS: usize = 10_000;

/// Draws `m` pairs with both indices uniform with replacement. Pairs at
/// exactly zero transformed distance are resampled so that downstream ratio
/// statistics never divide by zero.
pub fn sample_pairs_uniform(
    dataset: &Dataset,
    action: &GroupAction,
    dist: &GeneratorDistribution,
    m: usize,
    metric: &Metric,
    rng: &mut SeededRng,
) -> Result<Vec<SampledPair>> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one sampled pair".into()));
    }
    let n = dataset.n();
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let mut attempts = 0;
        let pair = loop {
            let g = dist.sample(rng);
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let gx = action.apply_input(g, dataset.point(i))?;
            let d = metric.distance(&gx, dataset.point(j));
            if d > 0.0 {
                break SampledPair { element: g, i, j, transformed_point: gx, pair_distance: d };
            }
            attempts += 1;
            if attempts >= MAX_RESAMPLE_ATTEMPTS {
                return Err(Error::DegenerateData(
                    "could not sample a pair at positive distance; \
                     the dataset may be a single repeated point"
                        .into(),
                ));
            }
        };
        pairs.push(pair);
    }
    Ok(pairs)
}
