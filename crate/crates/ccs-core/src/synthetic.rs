//! Desk-scale validation harness: synthetic scenes and simulated detectors
//! of controllable quality, so the whole consensus-vs-supervised-metric
//! pipeline can be exercised without trained models or datasets.
//!
//! Augmentation effects are modeled as independent per-augmentation
//! detection noise rather than pixel transforms; the consensus computation
//! consumes boxes only, so this isolates the metric pipeline from image
//! content.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::ccs::{compute_ccs, AugmentedDetections, ConsensusConfig};
use crate::congruence::{
    classify_pair, congruence_report, CongruenceReport, DeltaRecord, ImageEvaluation, MetricKind,
    YellowRule,
};
use crate::error::{CcsError, Result};
use crate::geometry::{BBox, Detection};
use crate::metrics::{f1_score, oc_cost, ppdq_image, GroundTruthSet, MetricConfig};

/// Parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: f64,
    pub height: f64,
    /// Object count drawn uniformly from `min_objects..=max_objects`.
    pub min_objects: usize,
    pub max_objects: usize,
    /// Box side lengths drawn uniformly from `min_size..=max_size`.
    pub min_size: f64,
    pub max_size: f64,
    pub class_count: u32,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 480.0,
            min_objects: 6,
            max_objects: 16,
            min_size: 8.0,
            max_size: 128.0,
            class_count: 2,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(CcsError::InvalidConfig("non-positive scene extent".into()));
        }
        if self.min_objects > self.max_objects {
            return Err(CcsError::InvalidConfig("min_objects > max_objects".into()));
        }
        if !(0.0 < self.min_size && self.min_size <= self.max_size) {
            return Err(CcsError::InvalidConfig("invalid box size range".into()));
        }
        if self.max_size > self.width.min(self.height) {
            return Err(CcsError::InvalidConfig(
                "max_size exceeds the scene extent".into(),
            ));
        }
        if self.class_count == 0 {
            return Err(CcsError::InvalidConfig("class_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Error model of a simulated detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorProfile {
    /// Gaussian corner noise in pixels, drawn independently per
    /// augmentation.
    pub loc_jitter_sigma: f64,
    /// Per-object drop probability.
    pub miss_prob: f64,
    /// Expected spurious boxes per image (Poisson).
    pub fp_rate: f64,
    pub true_score_mean: f64,
    pub true_score_spread: f64,
    pub fp_score_mean: f64,
    pub fp_score_spread: f64,
    pub class_error_prob: f64,
}

impl DetectorProfile {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.miss_prob, self.class_error_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CcsError::InvalidConfig("probabilities outside [0, 1]".into()));
        }
        if self.loc_jitter_sigma < 0.0 || self.fp_rate < 0.0 {
            return Err(CcsError::InvalidConfig("negative sigma or fp rate".into()));
        }
        Ok(())
    }

    /// A low-error detector, like a well-trained model.
    pub fn strong() -> Self {
        Self {
            loc_jitter_sigma: 1.0,
            miss_prob: 0.05,
            fp_rate: 0.1,
            true_score_mean: 0.88,
            true_score_spread: 0.06,
            fp_score_mean: 0.6,
            fp_score_spread: 0.08,
            class_error_prob: 0.02,
        }
    }

    /// A clearly worse detector.
    pub fn weak() -> Self {
        Self {
            loc_jitter_sigma: 8.0,
            miss_prob: 0.2,
            fp_rate: 1.0,
            true_score_mean: 0.75,
            true_score_spread: 0.1,
            fp_score_mean: 0.6,
            fp_score_spread: 0.1,
            class_error_prob: 0.02,
        }
    }
}

// Seed stream layout: image i uses streams 8*i + role, role 0 = scene,
// role 1 = detector 1, role 2 = detector 2. Deterministic and independent
// per image, so scenes can be simulated in parallel.
fn stream_rng(seed: u64, image: u64, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(image * 8 + role);
    rng
}

/// Sample ground-truth boxes inside the scene extent; deterministic under
/// the spec seed.
pub fn generate_scene(spec: &SceneSpec, image_id: &str) -> Result<GroundTruthSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = rng.gen_range(spec.min_objects..=spec.max_objects);
    // Object scale is correlated within a scene: one base size per image,
    // individual sides drawn in a narrow band around it. Scenes therefore
    // span a range of localization difficulty instead of averaging it out.
    let base = rng.gen_range(spec.min_size..=spec.max_size);
    let side = |rng: &mut ChaCha8Rng, base: f64| {
        rng.gen_range(0.85 * base..=1.15 * base)
            .clamp(spec.min_size, spec.max_size)
    };
    let mut objects = Vec::with_capacity(count);
    for _ in 0..count {
        let w = side(&mut rng, base);
        let h = side(&mut rng, base);
        let x = rng.gen_range(0.0..=(spec.width - w));
        let y = rng.gen_range(0.0..=(spec.height - h));
        let class = rng.gen_range(0..spec.class_count);
        objects.push((BBox::new(x, y, x + w, y + h).unwrap(), class));
    }
    Ok(GroundTruthSet {
        image_id: image_id.to_string(),
        objects,
    })
}

fn clamp_box(x1: f64, y1: f64, x2: f64, y2: f64, w: f64, h: f64) -> Option<BBox> {
    let x1 = x1.clamp(0.0, w);
    let x2 = x2.clamp(0.0, w);
    let y1 = y1.clamp(0.0, h);
    let y2 = y2.clamp(0.0, h);
    // discard boxes whose area collapses below 1 px^2
    if x2 - x1 <= 0.0 || y2 - y1 <= 0.0 || (x2 - x1) * (y2 - y1) < 1.0 {
        None
    } else {
        BBox::new(x1, y1, x2, y2).ok()
    }
}

fn detect_once(
    gt: &GroundTruthSet,
    profile: &DetectorProfile,
    spec: &SceneSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let jitter = Normal::new(0.0, profile.loc_jitter_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut out = Vec::new();
    for (gbox, gclass) in &gt.objects {
        if rng.gen_bool(profile.miss_prob) {
            continue;
        }
        let j = |rng: &mut ChaCha8Rng| {
            if profile.loc_jitter_sigma > 0.0 {
                jitter.sample(rng)
            } else {
                0.0
            }
        };
        let candidate = clamp_box(
            gbox.x1() + j(rng),
            gbox.y1() + j(rng),
            gbox.x2() + j(rng),
            gbox.y2() + j(rng),
            spec.width,
            spec.height,
        );
        let Some(bbox) = candidate else { continue };
        let class = if spec.class_count > 1 && rng.gen_bool(profile.class_error_prob) {
            (gclass + rng.gen_range(1..spec.class_count)) % spec.class_count
        } else {
            *gclass
        };
        let score = (profile.true_score_mean + profile.true_score_spread * sample_std(rng))
            .clamp(0.01, 1.0);
        out.push(Detection::new(bbox, class, score).unwrap());
    }
    // spurious boxes: uniform position, size from the scene's range
    let n_fp = if profile.fp_rate > 0.0 {
        Poisson::new(profile.fp_rate).unwrap().sample(rng) as usize
    } else {
        0
    };
    for _ in 0..n_fp {
        let w = rng.gen_range(spec.min_size..=spec.max_size);
        let h = rng.gen_range(spec.min_size..=spec.max_size);
        let x = rng.gen_range(0.0..=(spec.width - w));
        let y = rng.gen_range(0.0..=(spec.height - h));
        let class = rng.gen_range(0..spec.class_count);
        let score =
            (profile.fp_score_mean + profile.fp_score_spread * sample_std(rng)).clamp(0.01, 1.0);
        out.push(Detection::new(BBox::new(x, y, x + w, y + h).unwrap(), class, score).unwrap());
    }
    out
}

fn sample_std(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

/// Simulate one detector on a scene: a baseline detection set plus `m`
/// independent per-augmentation sets.
pub fn simulate_detector(
    gt: &GroundTruthSet,
    profile: &DetectorProfile,
    spec: &SceneSpec,
    m: usize,
    seed: u64,
) -> Result<AugmentedDetections> {
    profile.validate()?;
    if m < 2 {
        return Err(CcsError::InvalidInput(format!(
            "need at least 2 augmentations, got {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline = detect_once(gt, profile, spec, &mut rng);
    let per_augmentation = (0..m)
        .map(|_| detect_once(gt, profile, spec, &mut rng))
        .collect();
    Ok(AugmentedDetections {
        image_id: gt.image_id.clone(),
        per_augmentation,
        baseline: Some(baseline),
    })
}

/// Everything produced by one synthetic congruence run.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub evals_a: Vec<ImageEvaluation>,
    pub evals_b: Vec<ImageEvaluation>,
    pub ground_truth: Vec<GroundTruthSet>,
    pub detections_a: Vec<AugmentedDetections>,
    pub detections_b: Vec<AugmentedDetections>,
    pub records: BTreeMap<MetricKind, Vec<DeltaRecord>>,
    pub reports: BTreeMap<MetricKind, CongruenceReport>,
}

fn evaluate_image(
    ad: &AugmentedDetections,
    gt: &GroundTruthSet,
    class_count: u32,
    ccs_cfg: &ConsensusConfig,
    metric_cfg: &MetricConfig,
) -> Result<ImageEvaluation> {
    let ccs = compute_ccs(ad, ccs_cfg)?.ccs;
    let baseline: Vec<Detection> = ad
        .baseline
        .as_ref()
        .map(|b| {
            b.iter()
                .filter(|d| d.score >= ccs_cfg.detection_score_threshold)
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    let (_, _, f1) = f1_score(&baseline, gt, metric_cfg);
    let ppdq = ppdq_image(&baseline, gt, class_count as usize, metric_cfg)?;
    let oc = oc_cost(&baseline, gt, metric_cfg);
    let mut metrics = BTreeMap::new();
    metrics.insert(MetricKind::F1, f1);
    metrics.insert(MetricKind::Ppdq, ppdq);
    metrics.insert(MetricKind::OcCost, oc);
    Ok(ImageEvaluation {
        image_id: ad.image_id.clone(),
        ccs,
        metrics,
    })
}

/// Run the full synthetic pipeline: scenes, two simulated detectors,
/// per-image consensus and supervised metrics, deltas and per-metric
/// congruence reports. Deterministic in `(inputs, seed)`.
#[allow(clippy::too_many_arguments)]
pub fn run_congruence_experiment(
    n_images: usize,
    scene: &SceneSpec,
    profile_a: &DetectorProfile,
    profile_b: &DetectorProfile,
    ccs_cfg: &ConsensusConfig,
    metric_cfg: &MetricConfig,
    tau: f64,
    yellow_rule: YellowRule,
    seed: u64,
) -> Result<ExperimentResult> {
    ccs_cfg.validate()?;
    metric_cfg.validate()?;

    let mut evals_a = Vec::with_capacity(n_images);
    let mut evals_b = Vec::with_capacity(n_images);
    let mut ground_truth = Vec::with_capacity(n_images);
    let mut detections_a = Vec::with_capacity(n_images);
    let mut detections_b = Vec::with_capacity(n_images);

    for i in 0..n_images {
        let image_id = format!("synthetic_{i:05}");
        let scene_i = SceneSpec {
            seed: stream_rng(seed, i as u64, 0).gen(),
            ..scene.clone()
        };
        let gt = generate_scene(&scene_i, &image_id)?;
        let ad_a = simulate_detector(
            &gt,
            profile_a,
            &scene_i,
            ccs_cfg.m,
            stream_rng(seed, i as u64, 1).gen(),
        )?;
        let ad_b = simulate_detector(
            &gt,
            profile_b,
            &scene_i,
            ccs_cfg.m,
            stream_rng(seed, i as u64, 2).gen(),
        )?;
        evals_a.push(evaluate_image(&ad_a, &gt, scene.class_count, ccs_cfg, metric_cfg)?);
        evals_b.push(evaluate_image(&ad_b, &gt, scene.class_count, ccs_cfg, metric_cfg)?);
        ground_truth.push(gt);
        detections_a.push(ad_a);
        detections_b.push(ad_b);
    }

    let mut records = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for metric in MetricKind::ALL {
        let recs = classify_pair(&evals_a, &evals_b, metric, tau, yellow_rule)?;
        reports.insert(metric, congruence_report(metric, &recs));
        records.insert(metric, recs);
    }

    Ok(ExperimentResult {
        evals_a,
        evals_b,
        ground_truth,
        detections_a,
        detections_b,
        records,
        reports,
    })
}
