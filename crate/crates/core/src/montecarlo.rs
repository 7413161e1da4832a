//! Monte Carlo estimates of the variance modulation
//! `m_n = n E[d(mu_n, mu)^2] / E[d(X, mu)^2]`.
//!
//! Replication `r` at grid position `j` draws from stream
//! `(master_seed, j * B + r)`. Replications are grouped into fixed-size
//! chunks and the chunk tallies are merged in replication order, so the
//! output does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DiscreteSpiderDistribution, Sampler, StreamKey};
use crate::spider::{SampleFoldedSummary, SpiderPoint};
use crate::sum::CompensatedSum;

const CHUNK: u64 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("need at least 2 replications, got {0}")]
    TooFewReplications(u64),
    #[error("sample size grid must be nonempty")]
    EmptyGrid,
    #[error("sample size grid must be strictly ascending")]
    UnsortedGrid,
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("distribution has zero variance about its mean")]
    ZeroVariance,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub dist: DiscreteSpiderDistribution,
    pub n_grid: Vec<u64>,
    pub replications: u64,
    pub master_seed: u64,
}

impl SimulationConfig {
    pub fn new(
        dist: DiscreteSpiderDistribution,
        n_grid: Vec<u64>,
        replications: u64,
        master_seed: u64,
    ) -> Result<Self, SimulationError> {
        if replications < 2 {
            return Err(SimulationError::TooFewReplications(replications));
        }
        if n_grid.is_empty() {
            return Err(SimulationError::EmptyGrid);
        }
        if n_grid[0] == 0 {
            return Err(SimulationError::ZeroSampleSize);
        }
        if n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimulationError::UnsortedGrid);
        }
        Ok(SimulationConfig {
            dist,
            n_grid,
            replications,
            master_seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulationEstimate {
    pub n: u64,
    pub replications: u64,
    pub m_hat: f64,
    pub std_err: f64,
    /// Average of `d(mu_n, mu)^2` over replications.
    pub mean_sq_dist: f64,
    /// Standard error of `n * mean_sq_dist`.
    pub scaled_sq_dist_se: f64,
    /// Frequencies of `mu_n` on legs `1..=K`, then at the origin. Sums to 1.
    pub event_freq: Vec<f64>,
    /// Per leg, frequency of `eta_{n,i} >= 0`, i.e. of `eta_{n,i} = F_i(mu_n)`.
    pub a_freq: Vec<f64>,
    /// Frequency of at least one `eta_{n,i} >= 0`.
    pub any_a_freq: f64,
    /// Frequency of some `eta_{n,i}` being exactly zero. These replications
    /// are in the origin class.
    pub tie_freq: f64,
    /// Replications violating `|F_k(mu_n) - m_k| <= |eta_{n,k} - m_k|` for
    /// the mean leg `k`; `None` when the population mean is the origin.
    pub dominance_violations: Option<u64>,
}

impl ModulationEstimate {
    pub fn origin_freq(&self) -> f64 {
        *self.event_freq.last().expect("origin class")
    }

    /// `n * mean_sq_dist`
    pub fn scaled_mean_sq_dist(&self) -> f64 {
        self.n as f64 * self.mean_sq_dist
    }
}

#[derive(Debug, Clone)]
struct Tally {
    sq_dist: Vec<f64>,
    classes: Vec<u64>,
    nonneg: Vec<u64>,
    any_nonneg: u64,
    ties: u64,
    violations: u64,
}

impl Tally {
    fn new(legs: usize, capacity: usize) -> Self {
        Tally {
            sq_dist: Vec::with_capacity(capacity),
            classes: vec![0; legs + 1],
            nonneg: vec![0; legs],
            any_nonneg: 0,
            ties: 0,
            violations: 0,
        }
    }

    fn append(&mut self, other: Tally) {
        self.sq_dist.extend(other.sq_dist);
        for (a, b) in self.classes.iter_mut().zip(other.classes) {
            *a += b;
        }
        for (a, b) in self.nonneg.iter_mut().zip(other.nonneg) {
            *a += b;
        }
        self.any_nonneg += other.any_nonneg;
        self.ties += other.ties;
        self.violations += other.violations;
    }
}

struct Replicator {
    sampler: Sampler,
    // (leg index, radius) per atom, None for the origin
    atom_legs: Vec<Option<(usize, f64)>>,
    legs: usize,
    mu: SpiderPoint,
    mean_leg: Option<(usize, f64)>,
    seed: u64,
}

impl Replicator {
    fn new(dist: &DiscreteSpiderDistribution, seed: u64) -> Self {
        let summary = dist.folded_summary();
        let sampler = dist.sampler();
        let atom_legs = sampler
            .atoms()
            .iter()
            .map(|p| p.leg().map(|l| (l - 1, p.radius())))
            .collect();
        Replicator {
            sampler,
            atom_legs,
            legs: dist.legs(),
            mu: dist.frechet_mean(),
            mean_leg: summary.mean_leg().map(|k| (k, summary.m[k - 1])),
            seed,
        }
    }

    fn run_chunk(&self, n: u64, first: u64, last: u64) -> Tally {
        let mut tally = Tally::new(self.legs, (last - first) as usize);
        let mut counts = vec![0u64; self.atom_legs.len()];
        let mut leg_sums = vec![CompensatedSum::new(); self.legs];
        let mut sums = vec![0.0; self.legs];
        for r in first..last {
            self.sampler
                .draw_counts(n as usize, StreamKey::new(self.seed, r), &mut counts);
            leg_sums.iter_mut().for_each(|s| *s = CompensatedSum::new());
            for (c, atom) in counts.iter().zip(&self.atom_legs) {
                if let (&c, Some((leg, x))) = (c, atom) {
                    if c > 0 {
                        leg_sums[*leg].add(c as f64 * x);
                    }
                }
            }
            for (s, acc) in sums.iter_mut().zip(&leg_sums) {
                *s = acc.value();
            }
            let summary = SampleFoldedSummary::from_leg_sums(&sums, n as usize);
            let mean = summary.mean();
            let d = mean.distance(&self.mu);
            tally.sq_dist.push(d * d);
            match mean.leg() {
                Some(leg) => tally.classes[leg - 1] += 1,
                None => tally.classes[self.legs] += 1,
            }
            let mut any = false;
            for (i, &e) in summary.eta.iter().enumerate() {
                if e >= 0.0 {
                    tally.nonneg[i] += 1;
                    any = true;
                }
            }
            if any {
                tally.any_nonneg += 1;
            }
            if summary.eta.contains(&0.0) {
                tally.ties += 1;
            }
            if let Some((k, mk)) = self.mean_leg {
                let eta = summary.eta[k - 1];
                if (mean.fold(k) - mk).abs() > (eta - mk).abs() {
                    tally.violations += 1;
                }
            }
        }
        tally
    }

    fn run(&self, n: u64, first: u64, count: u64) -> Tally {
        let chunks = count.div_ceil(CHUNK);
        let parts: Vec<Tally> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = first + c * CHUNK;
                let hi = (lo + CHUNK).min(first + count);
                self.run_chunk(n, lo, hi)
            })
            .collect();
        let mut total = Tally::new(self.legs, count as usize);
        for p in parts {
            total.append(p);
        }
        total
    }
}

/// Estimate at a single sample size, using replication streams `0..B`.
pub fn estimate_modulation(
    cfg: &SimulationConfig,
    n: u64,
) -> Result<ModulationEstimate, SimulationError> {
    let variance = checked_variance(cfg)?;
    if n == 0 {
        return Err(SimulationError::ZeroSampleSize);
    }
    let rep = Replicator::new(&cfg.dist, cfg.master_seed);
    Ok(summarize(&rep, n, 0, cfg.replications, variance))
}

/// One estimate per grid entry; grid position `j` uses replication streams
/// `j*B..(j+1)*B`.
pub fn modulation_curve(
    cfg: &SimulationConfig,
) -> Result<Vec<ModulationEstimate>, SimulationError> {
    let variance = checked_variance(cfg)?;
    let rep = Replicator::new(&cfg.dist, cfg.master_seed);
    Ok(cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            summarize(
                &rep,
                n,
                j as u64 * cfg.replications,
                cfg.replications,
                variance,
            )
        })
        .collect())
}

fn checked_variance(cfg: &SimulationConfig) -> Result<f64, SimulationError> {
    if cfg.replications < 2 {
        return Err(SimulationError::TooFewReplications(cfg.replications));
    }
    let v = cfg.dist.variance_about_mean();
    if v.is_nan() || v <= 0.0 {
        return Err(SimulationError::ZeroVariance);
    }
    Ok(v)
}

fn summarize(
    rep: &Replicator,
    n: u64,
    first: u64,
    count: u64,
    variance: f64,
) -> ModulationEstimate {
    let tally = rep.run(n, first, count);
    let b = count as f64;
    let mean: f64 = tally
        .sq_dist
        .iter()
        .copied()
        .collect::<CompensatedSum>()
        .value()
        / b;
    let ss: CompensatedSum = tally
        .sq_dist
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .collect();
    let sd = (ss.value() / (b - 1.0)).sqrt();
    let nf = n as f64;
    let freq = |c: u64| c as f64 / b;
    ModulationEstimate {
        n,
        replications: count,
        m_hat: nf * mean / variance,
        std_err: nf / variance * sd / b.sqrt(),
        mean_sq_dist: mean,
        scaled_sq_dist_se: nf * sd / b.sqrt(),
        event_freq: tally.classes.iter().map(|&c| freq(c)).collect(),
        a_freq: tally.nonneg.iter().map(|&c| freq(c)).collect(),
        any_a_freq: freq(tally.any_nonneg),
        tie_freq: freq(tally.ties),
        dominance_violations: rep.mean_leg.map(|_| tally.violations),
    }
}
