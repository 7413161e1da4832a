//! Fréchet means on K-spiders, Berry-Esseen bounds on the variance
//! modulation of sample means, finite sample stickiness certificates, and a
//! seeded Monte Carlo engine to check them.

pub mod bounds;
pub mod distributions;
pub mod montecarlo;
pub mod spider;
pub mod sum;

pub use bounds::{
    bound_curve, certify, certify_with, std_normal_cdf, BoundError, BoundInputs, BoundRow,
    Certification, CertifyFailure, Execution, FailedCondition, StickinessCertificate,
    BERRY_ESSEEN_CONSTANT, DEFAULT_SCAN_CAP,
};
pub use distributions::{
    DiscreteSpiderDistribution, DistributionError, PopulationFoldedSummary, Sampler, StreamKey,
};
pub use montecarlo::{
    estimate_modulation, modulation_curve, ModulationEstimate, SimulationConfig, SimulationError,
};
pub use spider::{SampleFoldedSummary, Spider, SpiderError, SpiderPoint, SpiderSample};
