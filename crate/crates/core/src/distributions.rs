//! Finitely supported laws on the spider: exact folded moments, the population
//! Fréchet mean, and reproducible sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spider::{mean_from_folded, Spider, SpiderError, SpiderPoint, SpiderSample};
use crate::sum::{compensated_sum, CompensatedSum};

/// Tolerance on the total probability of a constructed distribution.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Looser tolerance accepted when reading a distribution file.
pub const FILE_PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error(transparent)]
    Spider(#[from] SpiderError),
    #[error("distribution has no atoms")]
    NoAtoms,
    #[error("atom probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("the X_t family needs t > 0, got {0}")]
    InvalidParameter(f64),
    #[error("malformed distribution file: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: SpiderPoint,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpiderDistribution {
    spider: Spider,
    atoms: Vec<Atom>,
    nondegenerate: bool,
}

impl DiscreteSpiderDistribution {
    /// Validates and normalizes the atom list. Repeated points are merged.
    pub fn new(
        spider: Spider,
        atoms: impl IntoIterator<Item = (SpiderPoint, f64)>,
    ) -> Result<Self, DistributionError> {
        let mut merged: Vec<Atom> = Vec::new();
        for (point, prob) in atoms {
            spider.check_point(&point)?;
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(DistributionError::InvalidProbability(prob));
            }
            match merged.iter_mut().find(|a| a.point == point) {
                Some(a) => a.prob += prob,
                None => merged.push(Atom { point, prob }),
            }
        }
        if merged.is_empty() {
            return Err(DistributionError::NoAtoms);
        }
        let total = compensated_sum(merged.iter().map(|a| a.prob));
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(DistributionError::NotNormalized(total));
        }
        let mut charged = vec![false; spider.legs()];
        for a in &merged {
            if let Some(leg) = a.point.leg() {
                charged[leg - 1] = true;
            }
        }
        let nondegenerate = charged.iter().filter(|&&c| c).count() >= 3;
        Ok(DiscreteSpiderDistribution {
            spider,
            atoms: merged,
            nondegenerate,
        })
    }

    /// The example family `X_t`: mass `1/K` at distance `K - 1 + K t` on leg
    /// `K` and mass `1/K` at distance 1 on each of the other legs. Its mean
    /// sits at distance `t` on leg `K`.
    pub fn example_xt(legs: usize, t: f64) -> Result<Self, DistributionError> {
        let spider = Spider::new(legs)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(DistributionError::InvalidParameter(t));
        }
        let k = legs as f64;
        let p = 1.0 / k;
        let long = SpiderPoint::on_leg(legs, k - 1.0 + k * t)?;
        let mut atoms = vec![(long, p)];
        for leg in 1..legs {
            atoms.push((SpiderPoint::on_leg(leg, 1.0)?, p));
        }
        Self::new(spider, atoms)
    }

    pub fn from_json(text: &str) -> Result<Self, DistributionError> {
        let file: DistributionFile = serde_json::from_str(text)?;
        file.into_distribution()
    }

    pub fn to_file(&self) -> DistributionFile {
        DistributionFile {
            legs: self.spider.legs(),
            atoms: self
                .atoms
                .iter()
                .map(|a| FileAtom {
                    leg: a.point.leg().unwrap_or(0),
                    x: a.point.radius(),
                    p: a.prob,
                })
                .collect(),
        }
    }

    pub fn spider(&self) -> Spider {
        self.spider
    }

    pub fn legs(&self) -> usize {
        self.spider.legs()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Positive mass on at least three distinct legs.
    pub fn is_nondegenerate(&self) -> bool {
        self.nondegenerate
    }

    /// Exact folded moments, one entry per leg.
    pub fn folded_summary(&self) -> PopulationFoldedSummary {
        let legs = self.legs();
        let mut m = Vec::with_capacity(legs);
        let mut sigma2 = Vec::with_capacity(legs);
        let mut abs_central_third = Vec::with_capacity(legs);
        for k in 1..=legs {
            let mk = compensated_sum(self.atoms.iter().map(|a| a.prob * a.point.fold(k)));
            let mut s2 = CompensatedSum::new();
            let mut s3 = CompensatedSum::new();
            for a in &self.atoms {
                let dev = (a.point.fold(k) - mk).abs();
                s2.add(a.prob * dev * dev);
                s3.add(a.prob * dev * dev * dev);
            }
            m.push(mk);
            sigma2.push(s2.value());
            abs_central_third.push(s3.value());
        }
        let mut leg_mass = vec![0.0; legs];
        for a in &self.atoms {
            if let Some(leg) = a.point.leg() {
                leg_mass[leg - 1] += a.prob;
            }
        }
        let third_at_origin =
            compensated_sum(self.atoms.iter().map(|a| a.prob * a.point.radius().powi(3)));
        PopulationFoldedSummary {
            m,
            sigma2,
            abs_central_third,
            third_at_origin,
            leg_mass,
        }
    }

    /// `(m_k, leg k)` for the positive folded mean if there is one, else the origin.
    pub fn frechet_mean(&self) -> SpiderPoint {
        mean_from_folded(&self.folded_summary().m)
    }

    /// `E[d(X, mu)^2]` about the population mean.
    pub fn variance_about_mean(&self) -> f64 {
        let mu = self.frechet_mean();
        compensated_sum(self.atoms.iter().map(|a| {
            let d = a.point.distance(&mu);
            a.prob * d * d
        }))
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }
}

/// Population folded moments for every leg (index `k - 1` holds leg `k`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationFoldedSummary {
    pub m: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `E|F_k(X) - m_k|^3`
    pub abs_central_third: Vec<f64>,
    /// `E[d(X, 0)^3]`
    pub third_at_origin: f64,
    pub leg_mass: Vec<f64>,
}

impl PopulationFoldedSummary {
    pub fn legs(&self) -> usize {
        self.m.len()
    }

    /// Leg carrying the positive folded mean, if any.
    pub fn mean_leg(&self) -> Option<usize> {
        self.m.iter().position(|&v| v > 0.0).map(|i| i + 1)
    }
}

/// On-disk distribution format.
///
/// ```json
/// {"K": 3, "atoms": [{"leg": 1, "x": 1.0, "p": 0.5}, {"leg": 2, "x": 0, "p": 0.5}]}
/// ```
///
/// An atom with `x = 0` is the origin and its `leg` is ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFile {
    #[serde(rename = "K")]
    pub legs: usize,
    pub atoms: Vec<FileAtom>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileAtom {
    #[serde(default)]
    pub leg: usize,
    pub x: f64,
    pub p: f64,
}

impl DistributionFile {
    pub fn into_distribution(self) -> Result<DiscreteSpiderDistribution, DistributionError> {
        let spider = Spider::new(self.legs)?;
        if self.atoms.is_empty() {
            return Err(DistributionError::NoAtoms);
        }
        for a in &self.atoms {
            if !(a.p > 0.0 && a.p <= 1.0) {
                return Err(DistributionError::InvalidProbability(a.p));
            }
        }
        let total = compensated_sum(self.atoms.iter().map(|a| a.p));
        if (total - 1.0).abs() > FILE_PROB_SUM_TOL {
            return Err(DistributionError::NotNormalized(total));
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let point = if a.x == 0.0 {
                SpiderPoint::ORIGIN
            } else {
                SpiderPoint::on_leg(a.leg, a.x)?
            };
            atoms.push((point, a.p / total));
        }
        DiscreteSpiderDistribution::new(spider, atoms)
    }
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replication: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        StreamKey {
            master_seed,
            replication,
        }
    }

    /// ChaCha8 keyed by the avalanche-mixed master seed, using the
    /// replication index as the stream id. Distinct replications therefore
    /// never overlap.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master_seed;
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.replication);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Alias-table sampler (Vose's construction). Immutable once built; every
/// draw takes its generator state from a [`StreamKey`].
#[derive(Debug, Clone)]
pub struct Sampler {
    spider: Spider,
    points: Vec<SpiderPoint>,
    threshold: Vec<f64>,
    alias: Vec<usize>,
}

impl Sampler {
    pub fn new(dist: &DiscreteSpiderDistribution) -> Self {
        let probs: Vec<f64> = dist.atoms().iter().map(|a| a.prob).collect();
        let (threshold, alias) = vose_table(&probs);
        Sampler {
            spider: dist.spider(),
            points: dist.atoms().iter().map(|a| a.point).collect(),
            threshold,
            alias,
        }
    }

    pub fn atoms(&self) -> &[SpiderPoint] {
        &self.points
    }

    #[inline]
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.threshold.len());
        if rng.random::<f64>() < self.threshold[i] {
            i
        } else {
            self.alias[i]
        }
    }

    /// `n` i.i.d. draws, fully determined by `(key, n)`.
    pub fn draw_sample(&self, n: usize, key: StreamKey) -> Result<SpiderSample, SpiderError> {
        let mut rng = key.rng();
        let points = (0..n)
            .map(|_| self.points[self.draw_index(&mut rng)])
            .collect();
        SpiderSample::new(self.spider, points)
    }

    /// Same draws as [`Sampler::draw_sample`], reduced to per-atom counts.
    pub fn draw_counts(&self, n: usize, key: StreamKey, counts: &mut [u64]) {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut rng = key.rng();
        for _ in 0..n {
            counts[self.draw_index(&mut rng)] += 1;
        }
    }
}

fn vose_table(probs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = probs.len();
    let total: f64 = compensated_sum(probs.iter().copied());
    let mut scaled: Vec<f64> = probs.iter().map(|p| p * n as f64 / total).collect();
    let mut threshold = vec![1.0; n];
    let mut alias: Vec<usize> = (0..n).collect();
    let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
    while let (Some(&l), Some(&g)) = (small.last(), large.last()) {
        small.pop();
        large.pop();
        threshold[l] = scaled[l];
        alias[l] = g;
        scaled[g] = (scaled[g] + scaled[l]) - 1.0;
        if scaled[g] < 1.0 {
            small.push(g);
        } else {
            large.push(g);
        }
    }
    // leftovers on either list are 1 up to rounding
    for i in small.into_iter().chain(large) {
        threshold[i] = 1.0;
    }
    (threshold, alias)
}
