//! Berry-Esseen bounds on the variance modulation and finite sample
//! stickiness certificates.
//!
//! For a nondegenerate law whose mean lies on leg `k`:
//!
//! ```text
//! p_n      = sum_i Phi(sqrt(n) m_i / s_i) + sum_i C_S E|F_i - m_i|^3 / (sqrt(n) s_i^3)
//! p_{n,k}  = Phi(sqrt(n) m_k / s_k) - C_S E|F_k - m_k|^3 / (sqrt(n) s_k^3)
//! bound(n) = p_n + n m_k^2 / s_k^2 * (1 - p_{n,k})
//! ```
//!
//! A certificate of level `rho` with scale `l` and base `N` holds when
//! `p_n < 1`, `p_{n,k} >= 0` and `bound(n) < 1` for every integer
//! `n` in `N..=N^l`; then `rho = 1 - max bound(n)` over that range.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DiscreteSpiderDistribution, PopulationFoldedSummary};

/// Berry-Esseen constant for i.i.d. summands.
pub const BERRY_ESSEEN_CONSTANT: f64 = 0.4748;

/// Largest `N^l` a certificate scan accepts unless told otherwise.
pub const DEFAULT_SCAN_CAP: u64 = 1 << 32;

const CHUNK: u64 = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("distribution is degenerate (mass on fewer than 3 legs)")]
    Degenerate,
    #[error("population mean is at the origin; no leg has a positive folded mean")]
    StickyMean,
    #[error("folded variance on leg {0} is zero")]
    SingularLeg(usize),
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("base must be at least 2, got {0}")]
    BaseTooSmall(u64),
    #[error("scale must be at least 2, got {0}")]
    ScaleTooSmall(u32),
    #[error("{base}^{scale} exceeds the scan cap {cap}")]
    Overflow { base: u64, scale: u32, cap: u64 },
    #[error("sample size grid must be nonempty")]
    EmptyGrid,
    #[error("sample size grid must be strictly ascending (at position {0})")]
    UnsortedGrid(usize),
    #[error("stride must be at least 1")]
    ZeroStride,
}

/// Standard normal distribution function.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Precomputed per-leg quantities for bound evaluation.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    summary: PopulationFoldedSummary,
    mean_leg: usize,
    // m_i / s_i
    standardized_mean: Vec<f64>,
    // C_S E|F_i - m_i|^3 / s_i^3
    berry_esseen: Vec<f64>,
    // m_k^2 / s_k^2
    signal_to_noise: f64,
}

impl BoundInputs {
    pub fn new(dist: &DiscreteSpiderDistribution) -> Result<Self, BoundError> {
        if !dist.is_nondegenerate() {
            return Err(BoundError::Degenerate);
        }
        Self::from_summary(dist.folded_summary())
    }

    /// Skips the nondegeneracy check, which needs the atoms. Callers are
    /// responsible for it.
    pub fn from_summary(summary: PopulationFoldedSummary) -> Result<Self, BoundError> {
        let mean_leg = summary.mean_leg().ok_or(BoundError::StickyMean)?;
        let mut standardized_mean = Vec::with_capacity(summary.legs());
        let mut berry_esseen = Vec::with_capacity(summary.legs());
        for i in 0..summary.legs() {
            let s2 = summary.sigma2[i];
            if s2.is_nan() || s2 <= 0.0 {
                return Err(BoundError::SingularLeg(i + 1));
            }
            let s = s2.sqrt();
            standardized_mean.push(summary.m[i] / s);
            berry_esseen.push(BERRY_ESSEEN_CONSTANT * summary.abs_central_third[i] / (s2 * s));
        }
        let k = mean_leg - 1;
        let signal_to_noise = summary.m[k] * summary.m[k] / summary.sigma2[k];
        Ok(BoundInputs {
            summary,
            mean_leg,
            standardized_mean,
            berry_esseen,
            signal_to_noise,
        })
    }

    pub fn summary(&self) -> &PopulationFoldedSummary {
        &self.summary
    }

    pub fn legs(&self) -> usize {
        self.summary.legs()
    }

    /// Leg `k` holding the population mean.
    pub fn mean_leg(&self) -> usize {
        self.mean_leg
    }

    pub fn p_upper(&self, n: u64) -> Result<f64, BoundError> {
        check_n(n)?;
        Ok(self.row(n).p_upper)
    }

    pub fn p_lower(&self, n: u64) -> Result<f64, BoundError> {
        check_n(n)?;
        Ok(self.row(n).p_lower)
    }

    /// Upper bound on the variance modulation at sample size `n`. Not clamped.
    pub fn modulation_bound(&self, n: u64) -> Result<f64, BoundError> {
        check_n(n)?;
        Ok(self.row(n).bound)
    }

    /// All three quantities at `n >= 1`. Pure in `n`, which is what makes the
    /// parallel scan bit-identical to the sequential one.
    #[inline]
    pub fn row(&self, n: u64) -> BoundRow {
        let nf = n as f64;
        let root = nf.sqrt();
        let mut phi_sum = 0.0;
        let mut be_sum = 0.0;
        for (z, be) in self.standardized_mean.iter().zip(&self.berry_esseen) {
            phi_sum += std_normal_cdf(root * z);
            be_sum += be;
        }
        let k = self.mean_leg - 1;
        let p_upper = phi_sum + be_sum / root;
        let p_lower =
            std_normal_cdf(root * self.standardized_mean[k]) - self.berry_esseen[k] / root;
        let bound = p_upper + nf * self.signal_to_noise * (1.0 - p_lower);
        BoundRow {
            n,
            p_upper,
            p_lower,
            bound,
        }
    }
}

fn check_n(n: u64) -> Result<(), BoundError> {
    if n == 0 {
        Err(BoundError::ZeroSampleSize)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: u64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub bound: f64,
}

/// Evaluates the bound on an ascending grid of sample sizes.
pub fn bound_curve(grid: &[u64], inputs: &BoundInputs) -> Result<Vec<BoundRow>, BoundError> {
    if grid.is_empty() {
        return Err(BoundError::EmptyGrid);
    }
    check_n(grid[0])?;
    if let Some(i) = grid.windows(2).position(|w| w[0] >= w[1]) {
        return Err(BoundError::UnsortedGrid(i + 1));
    }
    Ok(grid.par_iter().map(|&n| inputs.row(n)).collect())
}

/// Diagnostic curve over `N..=N^l` with the given stride, always including
/// the right end. Never produces a certificate.
pub fn preview(
    base: u64,
    scale: u32,
    stride: u64,
    inputs: &BoundInputs,
    cap: u64,
) -> Result<Vec<BoundRow>, BoundError> {
    if stride == 0 {
        return Err(BoundError::ZeroStride);
    }
    let end = scan_end(base, scale, cap)?;
    let mut grid: Vec<u64> = (base..=end).step_by(stride as usize).collect();
    if grid.last() != Some(&end) {
        grid.push(end);
    }
    bound_curve(&grid, inputs)
}

fn scan_end(base: u64, scale: u32, cap: u64) -> Result<u64, BoundError> {
    if base < 2 {
        return Err(BoundError::BaseTooSmall(base));
    }
    if scale < 2 {
        return Err(BoundError::ScaleTooSmall(scale));
    }
    let overflow = BoundError::Overflow { base, scale, cap };
    let end = (base as u128)
        .checked_pow(scale)
        .ok_or_else(|| overflow.clone())?;
    if end > cap as u128 {
        return Err(overflow);
    }
    Ok(end as u64)
}

/// Which condition broke a certificate scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FailedCondition {
    /// `p_n >= 1`
    UpperNotBelowOne,
    /// `p_{n,k} < 0`
    LowerNegative,
    /// `bound(n) >= 1`
    BoundNotBelowOne,
}

impl fmt::Display for FailedCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailedCondition::UpperNotBelowOne => "p_n >= 1",
            FailedCondition::LowerNegative => "p_nk < 0",
            FailedCondition::BoundNotBelowOne => "bound >= 1",
        })
    }
}

/// Smallest sample size at which a certificate scan failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyFailure {
    pub n: u64,
    pub condition: FailedCondition,
    pub row: BoundRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StickinessCertificate {
    /// `rho = 1 - max_bound`
    pub level: f64,
    pub scale: u32,
    pub base: u64,
    /// `base^scale`
    pub end: u64,
    /// Smallest `n` at which the bound attains its maximum, i.e. where
    /// `1 - bound(n)` is minimal.
    pub argmin_n: u64,
    pub max_bound: f64,
    pub min_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Certification {
    Certified(StickinessCertificate),
    Refused(CertifyFailure),
}

impl Certification {
    pub fn certificate(&self) -> Option<&StickinessCertificate> {
        match self {
            Certification::Certified(c) => Some(c),
            Certification::Refused(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&CertifyFailure> {
        match self {
            Certification::Certified(_) => None,
            Certification::Refused(f) => Some(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy)]
struct ScanState {
    failure: Option<CertifyFailure>,
    max: f64,
    argmax: u64,
    min: f64,
}

impl ScanState {
    fn empty() -> Self {
        ScanState {
            failure: None,
            max: f64::NEG_INFINITY,
            argmax: 0,
            min: f64::INFINITY,
        }
    }

    #[inline]
    fn visit(&mut self, row: BoundRow) {
        if self.failure.is_none() {
            let condition = if row.p_upper.is_nan() || row.p_upper >= 1.0 {
                Some(FailedCondition::UpperNotBelowOne)
            } else if row.p_lower.is_nan() || row.p_lower < 0.0 {
                Some(FailedCondition::LowerNegative)
            } else if row.bound.is_nan() || row.bound >= 1.0 {
                Some(FailedCondition::BoundNotBelowOne)
            } else {
                None
            };
            if let Some(condition) = condition {
                self.failure = Some(CertifyFailure {
                    n: row.n,
                    condition,
                    row,
                });
            }
        }
        if row.bound > self.max {
            self.max = row.bound;
            self.argmax = row.n;
        }
        if row.bound < self.min {
            self.min = row.bound;
        }
    }

    // `later` covers strictly larger n than `self`
    fn merge(mut self, later: ScanState) -> ScanState {
        if self.failure.is_none() {
            self.failure = later.failure;
        }
        if later.max > self.max {
            self.max = later.max;
            self.argmax = later.argmax;
        }
        self.min = self.min.min(later.min);
        self
    }
}

/// Exhaustive check over every integer `n` in `base..=base^scale`.
pub fn certify(base: u64, scale: u32, inputs: &BoundInputs) -> Result<Certification, BoundError> {
    certify_with(base, scale, inputs, DEFAULT_SCAN_CAP, Execution::Parallel)
}

pub fn certify_with(
    base: u64,
    scale: u32,
    inputs: &BoundInputs,
    cap: u64,
    execution: Execution,
) -> Result<Certification, BoundError> {
    let end = scan_end(base, scale, cap)?;
    let state = match execution {
        Execution::Sequential => {
            let mut st = ScanState::empty();
            for n in base..=end {
                st.visit(inputs.row(n));
            }
            st
        }
        Execution::Parallel => {
            let chunks = (end - base) / CHUNK + 1;
            let partial: Vec<ScanState> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let lo = base + c * CHUNK;
                    let hi = (lo + CHUNK - 1).min(end);
                    let mut st = ScanState::empty();
                    for n in lo..=hi {
                        st.visit(inputs.row(n));
                    }
                    st
                })
                .collect();
            partial
                .into_iter()
                .fold(ScanState::empty(), ScanState::merge)
        }
    };
    Ok(match state.failure {
        Some(f) => Certification::Refused(f),
        None => Certification::Certified(StickinessCertificate {
            level: 1.0 - state.max,
            scale,
            base,
            end,
            argmin_n: state.argmax,
            max_bound: state.max,
            min_bound: state.min,
        }),
    })
}
