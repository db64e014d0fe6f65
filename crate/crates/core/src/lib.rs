//! Post-hoc correction of weekly yield forecasts.
//!
//! A base forecaster's prediction is handed to an agent loop that detects
//! the seasonal phase, learns systematic bias, checks the predicted change
//! against historical ranges, and emits a corrected value together with a
//! full trace. The numeric kernels are generic over [`Scalar`]; the
//! week-by-week pipeline runs on [`Real`].

pub mod agent;
pub mod baseline;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod memory;
pub mod runner;
pub mod scalar;
pub mod selection;
pub mod toolkit;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the week-by-week pipeline.
pub type Real = f64;

pub type Shape = toolkit::ShapeVector<Real>;
pub type PhaseReading = toolkit::PhaseEstimate<Real>;
pub type Bias = toolkit::BiasEstimate<Real>;
pub type RangeCheck = toolkit::RangeVerdict<Real>;
pub type Safety = toolkit::SafetyVerdict<Real>;
pub type Trajectory = toolkit::TrajectoryVerdict<Real>;
pub type Features = features::CurveShapeFeatures<Real>;
pub type Jumps = memory::JumpDistribution<Real>;
pub type Metrics = evaluation::MetricTriple<Real>;
