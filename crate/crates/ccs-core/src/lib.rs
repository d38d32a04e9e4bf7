//! Label-free evaluation of object detectors via test-time augmentation
//! consensus.
//!
//! The central quantity is the per-image consensus score: a detector is run
//! on several photometric variations of the same image, predicted boxes are
//! cross-matched by IoU, and the normalized agreement is averaged over all
//! ordered augmentation pairs. When ground truth is available the crate also
//! computes the usual supervised comparators (F1, OC-cost, pPDQ) and a
//! two-detector congruence analysis between consensus deltas and metric
//! deltas.

pub mod ccs;
pub mod congruence;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod synthetic;
pub mod ttda;

pub use ccs::{AugmentedDetections, CcsResult, ConsensusConfig, IoUMatrix, KappaMode};
pub use congruence::{classify_dot, spearman_rho, CongruenceReport, DeltaRecord, Dot, MetricKind};
pub use error::CcsError;
pub use geometry::{iou, BBox, Detection};
pub use metrics::{GroundTruthSet, MatchResult, MetricConfig};
