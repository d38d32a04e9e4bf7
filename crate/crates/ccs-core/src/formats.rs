//! Newline-delimited JSON file formats for detections and ground truth,
//! plus the flat dotted-key run configuration.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ccs::{AugmentedDetections, ConsensusConfig};
use crate::congruence::YellowRule;
use crate::error::{CcsError, Result};
use crate::geometry::{BBox, Detection};
use crate::metrics::{GroundTruthSet, MetricConfig};

/// One ND-JSON line of a detection file: the detections of one image under
/// one augmentation. Index -1 denotes the un-augmented baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub augmentation_index: i32,
    pub detections: Vec<WireDetection>,
}

/// Wire form of a detection; the box is `[x1, y1, x2, y2]` in pixels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDetection {
    pub bbox: [f64; 4],
    pub class_id: u32,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_distribution: Option<Vec<f64>>,
}

impl WireDetection {
    pub fn from_detection(d: &Detection) -> Self {
        Self {
            bbox: d.bbox.corners(),
            class_id: d.class_id,
            score: d.score,
            class_distribution: d.class_distribution.clone(),
        }
    }

    pub fn to_detection(&self, line: usize) -> Result<Detection> {
        let [x1, y1, x2, y2] = self.bbox;
        let bbox = BBox::new(x1, y1, x2, y2).map_err(|e| CcsError::Schema {
            line,
            message: e.to_string(),
        })?;
        let mut det = Detection::new(bbox, self.class_id, self.score).map_err(|e| {
            CcsError::Schema {
                line,
                message: e.to_string(),
            }
        })?;
        if let Some(dist) = &self.class_distribution {
            let sum: f64 = dist.iter().sum();
            if dist.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(CcsError::Schema {
                    line,
                    message: format!("class_distribution must be non-negative and sum to 1 (sum {sum})"),
                });
            }
            det.class_distribution = Some(dist.clone());
        }
        Ok(det)
    }
}

/// One ND-JSON line of a ground-truth file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub objects: Vec<WireObject>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireObject {
    pub bbox: [f64; 4],
    pub class_id: u32,
}

/// Parsed detection file: records in input order, validated for unique
/// `(image_id, augmentation_index)` pairs.
#[derive(Debug, Clone)]
pub struct DetectionFile {
    pub records: Vec<DetectionRecord>,
}

impl DetectionFile {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut records = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DetectionRecord =
                serde_json::from_str(&line).map_err(|e| CcsError::Schema {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if record.augmentation_index < -1 {
                return Err(CcsError::Schema {
                    line: line_no,
                    message: format!(
                        "augmentation_index {} below -1",
                        record.augmentation_index
                    ),
                });
            }
            if !seen.insert((record.image_id.clone(), record.augmentation_index)) {
                return Err(CcsError::Schema {
                    line: line_no,
                    message: format!(
                        "duplicate (image_id, augmentation_index) = ({}, {})",
                        record.image_id, record.augmentation_index
                    ),
                });
            }
            // validate detections eagerly so diagnostics carry the line
            for w in &record.detections {
                w.to_detection(line_no)?;
            }
            records.push(record);
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for record in &self.records {
            serde_json::to_writer(&mut file, record)?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Image ids in first-appearance order.
    pub fn image_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.image_id.clone()))
            .map(|r| r.image_id.clone())
            .collect()
    }

    /// Group records into per-image augmented detection sets. Every image
    /// must cover augmentation indices `0..m` exactly; the baseline (-1) is
    /// optional.
    pub fn group(&self, m: usize) -> Result<Vec<AugmentedDetections>> {
        let mut per_image: BTreeMap<&str, BTreeMap<i32, Vec<Detection>>> = BTreeMap::new();
        for record in &self.records {
            let sets = per_image.entry(&record.image_id).or_default();
            let dets: Vec<Detection> = record
                .detections
                .iter()
                .map(|w| w.to_detection(0))
                .collect::<Result<_>>()?;
            sets.insert(record.augmentation_index, dets);
        }
        self.image_ids()
            .into_iter()
            .map(|id| {
                let sets = per_image.remove(id.as_str()).unwrap();
                let baseline = sets.get(&-1).cloned();
                let mut per_augmentation = Vec::with_capacity(m);
                for k in 0..m {
                    match sets.get(&(k as i32)) {
                        Some(d) => per_augmentation.push(d.clone()),
                        None => {
                            return Err(CcsError::InvalidInput(format!(
                                "image {id}: missing augmentation index {k} of declared {m}"
                            )))
                        }
                    }
                }
                Ok(AugmentedDetections {
                    image_id: id,
                    per_augmentation,
                    baseline,
                })
            })
            .collect()
    }

    /// Infer the augmentation count: one past the highest non-baseline
    /// index.
    pub fn inferred_m(&self) -> Option<usize> {
        self.records
            .iter()
            .map(|r| r.augmentation_index)
            .filter(|&i| i >= 0)
            .max()
            .map(|i| i as usize + 1)
    }

    /// Baseline (index -1) detections per image, in first-appearance order.
    pub fn baselines(&self) -> Result<Vec<(String, Vec<Detection>)>> {
        self.image_ids()
            .into_iter()
            .map(|id| {
                let record = self
                    .records
                    .iter()
                    .find(|r| r.image_id == id && r.augmentation_index == -1)
                    .ok_or_else(|| {
                        CcsError::InvalidInput(format!(
                            "image {id}: no baseline record (augmentation_index -1)"
                        ))
                    })?;
                let dets = record
                    .detections
                    .iter()
                    .map(|w| w.to_detection(0))
                    .collect::<Result<_>>()?;
                Ok((id, dets))
            })
            .collect()
    }
}

/// Parsed ground-truth file with unique image ids.
#[derive(Debug, Clone)]
pub struct GroundTruthFile {
    pub records: Vec<GroundTruthRecord>,
}

impl GroundTruthFile {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut records = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: GroundTruthRecord =
                serde_json::from_str(&line).map_err(|e| CcsError::Schema {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if !seen.insert(record.image_id.clone()) {
                return Err(CcsError::Schema {
                    line: line_no,
                    message: format!("duplicate image_id {}", record.image_id),
                });
            }
            for o in &record.objects {
                let [x1, y1, x2, y2] = o.bbox;
                BBox::new(x1, y1, x2, y2).map_err(|e| CcsError::Schema {
                    line: line_no,
                    message: e.to_string(),
                })?;
            }
            records.push(record);
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for record in &self.records {
            serde_json::to_writer(&mut file, record)?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn get(&self, image_id: &str) -> Option<GroundTruthSet> {
        self.records.iter().find(|r| r.image_id == image_id).map(|r| {
            GroundTruthSet {
                image_id: r.image_id.clone(),
                objects: r
                    .objects
                    .iter()
                    .map(|o| {
                        let [x1, y1, x2, y2] = o.bbox;
                        (BBox::new(x1, y1, x2, y2).unwrap(), o.class_id)
                    })
                    .collect(),
            }
        })
    }

    /// One past the highest class id appearing anywhere in the file.
    pub fn num_classes(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| r.objects.iter().map(|o| o.class_id))
            .max()
            .map_or(1, |c| c as usize + 1)
    }
}

/// Complete run configuration: consensus and metric parameters plus the
/// congruence margin and seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ccs: ConsensusConfig,
    pub metrics: MetricConfig,
    pub tau: f64,
    pub yellow_rule: YellowRule,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ccs: ConsensusConfig::default(),
            metrics: MetricConfig::default(),
            tau: 0.15,
            yellow_rule: YellowRule::Or,
            seeds: vec![15, 33, 55, 101, 150],
        }
    }
}

impl RunConfig {
    /// Apply one dotted-key override, the same path used for config files
    /// and command-line flags.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| CcsError::InvalidConfig(format!("{key}: invalid {what} '{value}'"));
        let parse_f64 = || value.parse::<f64>().map_err(|_| bad("number"));
        let parse_usize = || value.parse::<usize>().map_err(|_| bad("integer"));
        match key {
            "ccs.beta" => self.ccs.beta = parse_f64()?,
            "ccs.kappa_mode" => self.ccs.kappa_mode = value.parse()?,
            "ccs.detection_score_threshold" => self.ccs.detection_score_threshold = parse_f64()?,
            "ccs.n0_score_threshold" => self.ccs.n0_score_threshold = parse_f64()?,
            "ccs.m" => self.ccs.m = parse_usize()?,
            "metrics.alpha_iou" => self.metrics.alpha_iou = parse_f64()?,
            "metrics.lambda" => self.metrics.lambda = parse_f64()?,
            "metrics.beta_dummy" => self.metrics.beta_dummy = parse_f64()?,
            "metrics.epsilon" => self.metrics.epsilon = parse_f64()?,
            "congruence.tau" => self.tau = parse_f64()?,
            "congruence.yellow_rule" => self.yellow_rule = value.parse()?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| s.trim().parse::<u64>().map_err(|_| bad("seed list")))
                    .collect::<Result<_>>()?;
            }
            other => {
                return Err(CcsError::InvalidConfig(format!(
                    "unknown configuration key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Parse a flat `key=value` config file; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let text = std::fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CcsError::InvalidConfig(format!("line {}: expected key=value, got '{raw}'", i + 1))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ccs.validate()?;
        self.metrics.validate()?;
        if self.tau < 0.0 {
            return Err(CcsError::InvalidConfig(format!("tau {} negative", self.tau)));
        }
        Ok(())
    }
}
