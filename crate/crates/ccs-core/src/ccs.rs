//! Per-image consensus scoring across test-time augmentations.
//!
//! For each ordered pair of augmentations `(i, j)` the detections are
//! cross-matched by IoU, the matrix is thresholded at `beta`, each row keeps
//! its maximum, and the row maxima are summed and normalized by `kappa_i`.
//! The per-image score is the mean of the pairwise scores over all ordered
//! pairs.

use serde::{Deserialize, Serialize};

use crate::error::{CcsError, Result};
use crate::geometry::{iou, Detection};

/// How the pairwise score is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    /// No normalization (divisor 1). Pairwise scores may exceed 1.
    ConstantOne,
    /// Divisor is the number of baseline-image detections counted at a
    /// lowered confidence threshold, the same for every augmentation.
    /// Pairwise scores may still exceed 1 when the baseline detects fewer
    /// objects than the augmentations.
    ConstantN0,
    /// Divisor is the detection count of augmentation `i`; pairwise scores
    /// and the aggregate are guaranteed to lie in `[0, 1]`, but symmetry
    /// between `(i, j)` and `(j, i)` is lost.
    PerAugmentationNi,
}

impl std::str::FromStr for KappaMode {
    type Err = CcsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant_one" | "one" => Ok(Self::ConstantOne),
            "constant_n0" | "n0" => Ok(Self::ConstantN0),
            "per_augmentation_ni" | "ni" => Ok(Self::PerAugmentationNi),
            other => Err(CcsError::InvalidConfig(format!(
                "unknown kappa mode '{other}' (expected constant_one, constant_n0 or per_augmentation_ni)"
            ))),
        }
    }
}

/// Configuration of the consensus computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    /// IoU threshold: matrix entries below it are suppressed to 0. Entries
    /// exactly equal to `beta` are kept.
    pub beta: f64,
    pub kappa_mode: KappaMode,
    /// Confidence cutoff applied to every detection set before any
    /// consensus math.
    pub detection_score_threshold: f64,
    /// Lower cutoff used only to count baseline detections in
    /// [`KappaMode::ConstantN0`].
    pub n0_score_threshold: f64,
    /// Expected number of augmentations.
    pub m: usize,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            kappa_mode: KappaMode::PerAugmentationNi,
            detection_score_threshold: 0.5,
            n0_score_threshold: 0.25,
            m: 9,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(CcsError::InvalidConfig(format!(
                "beta {} outside [0, 1]",
                self.beta
            )));
        }
        if self.n0_score_threshold > self.detection_score_threshold {
            return Err(CcsError::InvalidConfig(format!(
                "n0_score_threshold {} exceeds detection_score_threshold {}",
                self.n0_score_threshold, self.detection_score_threshold
            )));
        }
        if self.m < 2 {
            return Err(CcsError::InvalidConfig(format!(
                "need at least 2 augmentations, got {}",
                self.m
            )));
        }
        Ok(())
    }
}

/// Detections for one image across all augmentations.
#[derive(Debug, Clone)]
pub struct AugmentedDetections {
    pub image_id: String,
    /// One detection set per augmentation, index 0..M-1.
    pub per_augmentation: Vec<Vec<Detection>>,
    /// Detections on the un-augmented image; required only for
    /// [`KappaMode::ConstantN0`].
    pub baseline: Option<Vec<Detection>>,
}

/// Rectangular matrix of pairwise IoU values; rows follow augmentation `i`,
/// columns augmentation `j`. Not necessarily square.
#[derive(Debug, Clone, PartialEq)]
pub struct IoUMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl IoUMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }
    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

/// Result of the consensus computation for one image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcsResult {
    pub image_id: String,
    pub ccs: f64,
    /// M x M matrix of pairwise scores; the diagonal is unused and left 0.
    pub gamma: Vec<Vec<f64>>,
}

/// Pairwise IoU of every box of `di` against every box of `dj`. Either set
/// may be empty, yielding a 0xN or Nx0 matrix.
pub fn build_iou_matrix(di: &[Detection], dj: &[Detection]) -> IoUMatrix {
    let rows = di.len();
    let cols = dj.len();
    let mut entries = Vec::with_capacity(rows * cols);
    for a in di {
        for b in dj {
            entries.push(iou(&a.bbox, &b.bbox));
        }
    }
    IoUMatrix { rows, cols, entries }
}

/// Suppress entries below `beta` to 0; entries equal to `beta` are kept.
pub fn threshold_matrix(m: &IoUMatrix, beta: f64) -> IoUMatrix {
    IoUMatrix {
        rows: m.rows,
        cols: m.cols,
        entries: m
            .entries
            .iter()
            .map(|&v| if v >= beta { v } else { 0.0 })
            .collect(),
    }
}

/// Row-wise maxima of the (filtered) matrix; an all-zero row yields 0.
pub fn row_max(m: &IoUMatrix) -> Vec<f64> {
    (0..m.rows)
        .map(|r| (0..m.cols).map(|c| m.get(r, c)).fold(0.0f64, f64::max))
        .collect()
}

/// Normalized pairwise consensus: sum of row maxima of the thresholded IoU
/// matrix divided by `kappa_i`. Zero whenever either set is empty.
pub fn pairwise_consensus(
    di: &[Detection],
    dj: &[Detection],
    cfg: &ConsensusConfig,
    kappa_i: usize,
) -> f64 {
    if di.is_empty() || dj.is_empty() {
        return 0.0;
    }
    debug_assert!(kappa_i >= 1);
    let filtered = threshold_matrix(&build_iou_matrix(di, dj), cfg.beta);
    let sum: f64 = row_max(&filtered).iter().sum();
    sum / kappa_i as f64
}

/// Resolve the normalization divisor for augmentation `i`.
///
/// In [`KappaMode::ConstantN0`] the baseline count is clamped to at least 1
/// so an empty baseline cannot divide by zero. In
/// [`KappaMode::PerAugmentationNi`] the caller short-circuits `N_i = 0`
/// before any division.
pub fn resolve_kappa(ad: &AugmentedDetections, i: usize, cfg: &ConsensusConfig) -> Result<usize> {
    match cfg.kappa_mode {
        KappaMode::ConstantOne => Ok(1),
        KappaMode::ConstantN0 => {
            let baseline = ad.baseline.as_ref().ok_or_else(|| {
                CcsError::InvalidConfig(format!(
                    "kappa mode constant_n0 requires baseline detections (image {})",
                    ad.image_id
                ))
            })?;
            let n0 = baseline
                .iter()
                .filter(|d| d.score >= cfg.n0_score_threshold)
                .count();
            Ok(n0.max(1))
        }
        KappaMode::PerAugmentationNi => Ok(ad.per_augmentation[i].len().max(1)),
    }
}

/// Compute the per-image consensus score over all ordered augmentation
/// pairs, denominator `M(M-1)`.
///
/// Detections below `detection_score_threshold` are dropped first. The
/// summation order is fixed (ascending `(i, j)`) so parallel callers can
/// reproduce results bit-exactly.
pub fn compute_ccs(ad: &AugmentedDetections, cfg: &ConsensusConfig) -> Result<CcsResult> {
    cfg.validate()?;
    let m = ad.per_augmentation.len();
    if m < 2 {
        return Err(CcsError::InvalidInput(format!(
            "image {}: need at least 2 augmentations, got {m}",
            ad.image_id
        )));
    }

    let filtered: Vec<Vec<Detection>> = ad
        .per_augmentation
        .iter()
        .map(|set| {
            set.iter()
                .filter(|d| d.score >= cfg.detection_score_threshold)
                .cloned()
                .collect()
        })
        .collect();
    let filtered_ad = AugmentedDetections {
        image_id: ad.image_id.clone(),
        per_augmentation: filtered,
        baseline: ad.baseline.clone(),
    };

    let mut gamma = vec![vec![0.0; m]; m];
    let mut sum = 0.0;
    for i in 0..m {
        let kappa_i = resolve_kappa(&filtered_ad, i, cfg)?;
        for j in 0..m {
            if i == j {
                continue;
            }
            let g = pairwise_consensus(
                &filtered_ad.per_augmentation[i],
                &filtered_ad.per_augmentation[j],
                cfg,
                kappa_i,
            );
            gamma[i][j] = g;
            sum += g;
        }
    }
    let ccs = sum / (m * (m - 1)) as f64;
    Ok(CcsResult {
        image_id: ad.image_id.clone(),
        ccs,
        gamma,
    })
}
