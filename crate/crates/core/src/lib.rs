//! Evaluation toolkit for infrared people counting.
//!
//! The crate covers the full evaluation path for counters trained with
//! bounding boxes, center points or image-level counts: annotation data and
//! manifests ([`corpus`]), frame normalization ([`preprocess`]), optimal point
//! matching ([`assignment`]), counting and localization metrics ([`metrics`]),
//! detector post-processing and threshold tuning ([`postprocess`]), person
//! localization from class activation maps ([`camloc`]), experiment drivers
//! ([`harness`]) and report/plot rendering ([`report`], [`plot`]).
//!
//! Model outputs are consumed as files; nothing here runs a network.

pub mod assignment;
pub mod camloc;
pub mod corpus;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod plot;
pub mod postprocess;
pub mod preprocess;
pub mod report;

pub use assignment::{brute_force_match, hungarian, match_points, CostMatrix, MatchResult};
pub use camloc::{locate_people, ActivationMap, Component, Localization, Mask};
pub use corpus::{BoundingBox, CountLabel, Dataset, ImageRecord, PointAnnotation};
pub use harness::{BenchStats, FractionCurve, Prediction, Predictor};
pub use metrics::{CountPair, MaedConfig, MetricsReport};
pub use postprocess::ThresholdCurve;
pub use preprocess::Frame;
