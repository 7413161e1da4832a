//! Geometry of the K-spider and closed-form sample Fréchet means.
//!
//! The K-spider is K copies of the half-line `[0, inf)` glued at zero. Legs
//! are numbered `1..=K`; the origin belongs to no leg. Two points on the same
//! leg are at Euclidean distance, points on different legs are joined through
//! the origin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sum::CompensatedSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpiderError {
    #[error("a spider needs at least 3 legs, got {0}")]
    TooFewLegs(usize),
    #[error("leg {leg} is outside 1..={legs}")]
    InvalidLeg { leg: usize, legs: usize },
    #[error("distance along a leg must be finite and nonnegative, got {0}")]
    InvalidDistance(f64),
    #[error("sample is empty")]
    EmptySample,
}

/// The ambient space `S_K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spider {
    legs: usize,
}

impl Spider {
    pub fn new(legs: usize) -> Result<Self, SpiderError> {
        if legs < 3 {
            return Err(SpiderError::TooFewLegs(legs));
        }
        Ok(Spider { legs })
    }

    pub fn legs(&self) -> usize {
        self.legs
    }

    pub fn check_leg(&self, leg: usize) -> Result<(), SpiderError> {
        if leg == 0 || leg > self.legs {
            return Err(SpiderError::InvalidLeg {
                leg,
                legs: self.legs,
            });
        }
        Ok(())
    }

    pub fn check_point(&self, p: &SpiderPoint) -> Result<(), SpiderError> {
        match p.leg() {
            Some(leg) => self.check_leg(leg),
            None => Ok(()),
        }
    }

    /// Path-length metric: `|x - y|` on a common leg, `x + y` across legs.
    pub fn distance(&self, p: &SpiderPoint, q: &SpiderPoint) -> Result<f64, SpiderError> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(p.distance(q))
    }

    /// The k-th folding map: leg `k` goes to the positive reals, every other
    /// leg to the negative reals.
    pub fn fold(&self, k: usize, p: &SpiderPoint) -> Result<f64, SpiderError> {
        self.check_leg(k)?;
        self.check_point(p)?;
        Ok(p.fold(k))
    }
}

/// A point of the spider. Either the origin or a strictly positive distance
/// along one leg. Constructing a point at distance zero yields the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct SpiderPoint {
    // 0 encodes the origin
    leg: usize,
    x: f64,
}

impl SpiderPoint {
    pub const ORIGIN: SpiderPoint = SpiderPoint { leg: 0, x: 0.0 };

    pub fn origin() -> Self {
        Self::ORIGIN
    }

    pub fn on_leg(leg: usize, x: f64) -> Result<Self, SpiderError> {
        if !x.is_finite() || x < 0.0 {
            return Err(SpiderError::InvalidDistance(x));
        }
        if x == 0.0 {
            return Ok(Self::ORIGIN);
        }
        if leg == 0 {
            return Err(SpiderError::InvalidLeg { leg, legs: 0 });
        }
        Ok(SpiderPoint { leg, x })
    }

    pub fn is_origin(&self) -> bool {
        self.leg == 0
    }

    /// Leg index in `1..=K`, `None` for the origin.
    pub fn leg(&self) -> Option<usize> {
        (self.leg != 0).then_some(self.leg)
    }

    /// Distance to the origin.
    pub fn radius(&self) -> f64 {
        self.x
    }

    /// Unchecked metric; see [`Spider::distance`].
    pub fn distance(&self, other: &SpiderPoint) -> f64 {
        if self.leg == other.leg || self.is_origin() || other.is_origin() {
            (self.x - other.x).abs()
        } else {
            self.x + other.x
        }
    }

    /// Unchecked folding map; see [`Spider::fold`].
    #[inline]
    pub fn fold(&self, k: usize) -> f64 {
        if self.leg == k {
            self.x
        } else {
            -self.x
        }
    }
}

impl std::fmt::Display for SpiderPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.leg() {
            None => write!(f, "origin"),
            Some(leg) => write!(f, "({}, leg {})", self.x, leg),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Origin { origin: bool },
    Leg { leg: usize, x: f64 },
}

impl TryFrom<PointRepr> for SpiderPoint {
    type Error = SpiderError;

    fn try_from(r: PointRepr) -> Result<Self, Self::Error> {
        match r {
            PointRepr::Origin { .. } => Ok(SpiderPoint::ORIGIN),
            PointRepr::Leg { leg, x } => SpiderPoint::on_leg(leg, x),
        }
    }
}

impl From<SpiderPoint> for PointRepr {
    fn from(p: SpiderPoint) -> Self {
        match p.leg() {
            None => PointRepr::Origin { origin: true },
            Some(leg) => PointRepr::Leg { leg, x: p.x },
        }
    }
}

/// Observations `X_1, ..., X_n` on a fixed spider.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiderSample {
    spider: Spider,
    points: Vec<SpiderPoint>,
}

impl SpiderSample {
    pub fn new(spider: Spider, points: Vec<SpiderPoint>) -> Result<Self, SpiderError> {
        if points.is_empty() {
            return Err(SpiderError::EmptySample);
        }
        for p in &points {
            spider.check_point(p)?;
        }
        Ok(SpiderSample { spider, points })
    }

    pub fn spider(&self) -> Spider {
        self.spider
    }

    pub fn points(&self) -> &[SpiderPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn folded_summary(&self) -> SampleFoldedSummary {
        let mut leg_sums = vec![CompensatedSum::new(); self.spider.legs()];
        for p in &self.points {
            if let Some(leg) = p.leg() {
                leg_sums[leg - 1].add(p.radius());
            }
        }
        let sums: Vec<f64> = leg_sums.iter().map(CompensatedSum::value).collect();
        SampleFoldedSummary::from_leg_sums(&sums, self.points.len())
    }

    /// Closed-form minimizer of the Fréchet sum of squared distances.
    pub fn frechet_mean(&self) -> SpiderPoint {
        self.folded_summary().mean()
    }

    /// `(1/n) * sum_j d(X_j, p)^2`.
    pub fn frechet_function(&self, p: &SpiderPoint) -> Result<f64, SpiderError> {
        self.spider.check_point(p)?;
        let total: CompensatedSum = self
            .points
            .iter()
            .map(|q| {
                let d = q.distance(p);
                d * d
            })
            .collect();
        Ok(total.value() / self.points.len() as f64)
    }
}

/// Sample folded moments.
///
/// `h[i]` is `(1/n)` times the summed radii of observations on leg `i + 1`,
/// and `eta[k] = h[k] - sum_{i != k} h[i]` is the sample mean of the k-th
/// folding map.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFoldedSummary {
    pub eta: Vec<f64>,
    pub h: Vec<f64>,
    pub n: usize,
}

impl SampleFoldedSummary {
    /// Builds the summary from unnormalized per-leg radius sums. The signs of
    /// `eta` are decided before dividing by `n`, which cannot flip them.
    pub fn from_leg_sums(leg_sums: &[f64], n: usize) -> Self {
        let scale = n as f64;
        let eta = folded_means(leg_sums)
            .into_iter()
            .map(|e| e / scale)
            .collect();
        let h = leg_sums.iter().map(|s| s / scale).collect();
        SampleFoldedSummary { eta, h, n }
    }

    /// The sample Fréchet mean: `(eta_k, leg k)` for the unique positive
    /// `eta_k`, otherwise the origin.
    pub fn mean(&self) -> SpiderPoint {
        mean_from_folded(&self.eta)
    }
}

/// `s_k - sum_{i != k} s_i` for every k, compensated.
pub fn folded_means(leg_sums: &[f64]) -> Vec<f64> {
    (0..leg_sums.len())
        .map(|k| {
            let mut acc = CompensatedSum::new();
            for (i, &s) in leg_sums.iter().enumerate() {
                acc.add(if i == k { s } else { -s });
            }
            acc.value()
        })
        .collect()
}

/// Mean location from a vector of folded first moments. Works for both the
/// sample (`eta`) and population (`m`) versions.
pub fn mean_from_folded(folded: &[f64]) -> SpiderPoint {
    folded
        .iter()
        .position(|&v| v > 0.0)
        .map(|k| SpiderPoint {
            leg: k + 1,
            x: folded[k],
        })
        .unwrap_or(SpiderPoint::ORIGIN)
}
