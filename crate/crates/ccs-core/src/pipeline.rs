//! End-to-end command implementations behind the CLI: augmentation of image
//! directories, per-image consensus tables, supervised metric tables, the
//! two-detector comparison and the synthetic experiment runner.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::ccs::{compute_ccs, AugmentedDetections};
use crate::congruence::{
    classify_pair, congruence_report, CongruenceReport, DeltaRecord, ImageEvaluation, MetricKind,
};
use crate::error::{CcsError, Result};
use crate::formats::{
    DetectionFile, DetectionRecord, GroundTruthFile, GroundTruthRecord, RunConfig, WireDetection,
    WireObject,
};
use crate::geometry::Detection;
use crate::metrics::{f1_score, oc_cost, ppdq_image, GroundTruthSet};
use crate::plot::{scatter_svg, sorted_trend_svg};
use crate::synthetic::{run_congruence_experiment, DetectorProfile, SceneSpec};
use crate::ttda::{augment_all, ManifestEntry};

/// Outcome of augmenting one directory of images.
#[derive(Debug, Default)]
pub struct AugmentSummary {
    pub images: usize,
    pub outputs: usize,
    pub failures: Vec<(PathBuf, String)>,
}

/// Augment every decodable image in `input_dir`: nine outputs named
/// `<stem>__aug<k>_<kind>.png` plus a `<stem>__manifest.json` per image.
/// Unreadable files are reported, not fatal.
pub fn run_augment(input_dir: &Path, out_dir: &Path, seed: u64) -> Result<AugmentSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(input_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    entries.sort();

    let mut summary = AugmentSummary::default();
    for path in entries {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let img = match image::open(&path) {
            Ok(i) => i.to_rgb8(),
            Err(e) => {
                summary.failures.push((path.clone(), e.to_string()));
                continue;
            }
        };
        let mut manifest = Vec::new();
        for (k, (spec, out)) in augment_all(&img, seed).into_iter().enumerate() {
            let file = format!("{stem}__aug{k}_{}.png", spec.kind.name());
            out.save(out_dir.join(&file))?;
            manifest.push(ManifestEntry {
                kind: spec.kind.name().to_string(),
                file,
                spec,
            });
            summary.outputs += 1;
        }
        let manifest_path = out_dir.join(format!("{stem}__manifest.json"));
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        summary.images += 1;
    }
    Ok(summary)
}

/// One row of the per-image consensus table.
#[derive(Debug, Clone, Serialize)]
pub struct CcsRow {
    pub image_id: String,
    pub ccs: Option<f64>,
    pub error: Option<String>,
}

/// Compute the consensus score per image, rows in input order. Images with
/// incomplete augmentation coverage produce an error row rather than
/// aborting the table.
pub fn run_ccs(detections: &DetectionFile, cfg: &RunConfig) -> Result<Vec<CcsRow>> {
    cfg.validate()?;
    let m = detections.inferred_m().ok_or_else(|| {
        CcsError::InvalidInput("detection file contains no augmentation records".into())
    })?;
    let grouped: Vec<(String, Result<AugmentedDetections>)> = detections
        .image_ids()
        .into_iter()
        .map(|id| {
            let single = DetectionFile {
                records: detections
                    .records
                    .iter()
                    .filter(|r| r.image_id == id)
                    .cloned()
                    .collect(),
            };
            let ad = single.group(m).map(|mut v| v.remove(0));
            (id, ad)
        })
        .collect();
    let rows = grouped
        .into_par_iter()
        .map(|(image_id, ad)| match ad.and_then(|ad| compute_ccs(&ad, &cfg.ccs)) {
            Ok(r) => CcsRow {
                image_id,
                ccs: Some(r.ccs),
                error: None,
            },
            Err(e) => CcsRow {
                image_id,
                ccs: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(rows)
}

pub fn ccs_table_csv(rows: &[CcsRow]) -> String {
    let mut out = String::from("image_id,ccs,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.image_id,
            r.ccs.map(|v| v.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default()
        ));
    }
    out
}

/// One row of the supervised metrics table.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub image_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ppdq: f64,
    pub oc_cost: f64,
}

/// Evaluate baseline (augmentation -1) detections against ground truth:
/// F1, pPDQ and OC-cost per image. Every detection image id must exist in
/// the ground truth.
pub fn run_metrics(
    detections: &DetectionFile,
    gt: &GroundTruthFile,
    cfg: &RunConfig,
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let unknown: Vec<String> = detections
        .image_ids()
        .into_iter()
        .filter(|id| gt.get(id).is_none())
        .collect();
    if !unknown.is_empty() {
        return Err(CcsError::InvalidInput(format!(
            "image ids missing from ground truth: {}",
            unknown.join(", ")
        )));
    }
    let num_classes = gt.num_classes();
    let baselines = detections.baselines()?;
    baselines
        .into_par_iter()
        .map(|(image_id, dets)| {
            let dets: Vec<Detection> = dets
                .into_iter()
                .filter(|d| d.score >= cfg.ccs.detection_score_threshold)
                .collect();
            let g = gt.get(&image_id).unwrap();
            let (precision, recall, f1) = f1_score(&dets, &g, &cfg.metrics);
            let ppdq = ppdq_image(&dets, &g, num_classes, &cfg.metrics)?;
            let oc = oc_cost(&dets, &g, &cfg.metrics);
            Ok(MetricsRow {
                image_id,
                precision,
                recall,
                f1,
                ppdq,
                oc_cost: oc,
            })
        })
        .collect()
}

pub fn metrics_table_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("image_id,precision,recall,f1,ppdq,oc_cost\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.image_id, r.precision, r.recall, r.f1, r.ppdq, r.oc_cost
        ));
    }
    out
}

/// Full per-image evaluation of one detector file: consensus from the
/// augmentation records, supervised metrics from the baseline records.
pub fn evaluate_detector(
    detections: &DetectionFile,
    gt: &GroundTruthFile,
    cfg: &RunConfig,
) -> Result<Vec<ImageEvaluation>> {
    let m = detections.inferred_m().ok_or_else(|| {
        CcsError::InvalidInput("detection file contains no augmentation records".into())
    })?;
    let grouped = detections.group(m)?;
    let num_classes = gt.num_classes();
    grouped
        .into_par_iter()
        .map(|ad| {
            let g = gt.get(&ad.image_id).ok_or_else(|| {
                CcsError::InvalidInput(format!("image {} missing from ground truth", ad.image_id))
            })?;
            let ccs = compute_ccs(&ad, &cfg.ccs)?.ccs;
            let baseline: Vec<Detection> = ad
                .baseline
                .as_ref()
                .ok_or_else(|| {
                    CcsError::InvalidInput(format!(
                        "image {}: no baseline record (augmentation_index -1)",
                        ad.image_id
                    ))
                })?
                .iter()
                .filter(|d| d.score >= cfg.ccs.detection_score_threshold)
                .cloned()
                .collect();
            let (_, _, f1) = f1_score(&baseline, &g, &cfg.metrics);
            let ppdq = ppdq_image(&baseline, &g, num_classes, &cfg.metrics)?;
            let oc = oc_cost(&baseline, &g, &cfg.metrics);
            let mut metrics = BTreeMap::new();
            metrics.insert(MetricKind::F1, f1);
            metrics.insert(MetricKind::Ppdq, ppdq);
            metrics.insert(MetricKind::OcCost, oc);
            Ok(ImageEvaluation {
                image_id: ad.image_id,
                ccs,
                metrics,
            })
        })
        .collect()
}

/// Results of a two-detector comparison.
#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub records: BTreeMap<MetricKind, Vec<DeltaRecord>>,
    pub reports: BTreeMap<MetricKind, CongruenceReport>,
}

pub fn deltas_csv(records: &[DeltaRecord]) -> String {
    let mut out = String::from("image_id,delta_metric,delta_ccs,dot\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.image_id,
            r.delta_metric,
            r.delta_ccs,
            r.dot.name()
        ));
    }
    out
}

pub fn report_csv(reports: &BTreeMap<MetricKind, CongruenceReport>) -> String {
    let mut out = String::from(
        "metric,total_images,yellow,considered,green,blue,red,congruence_pct,spearman_rho\n",
    );
    for (metric, r) in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            metric.name(),
            r.total_images,
            r.yellow,
            r.considered,
            r.green,
            r.blue,
            r.red,
            r.congruence_pct.map(|v| v.to_string()).unwrap_or_default(),
            r.spearman_rho.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    out
}

fn write_compare_artifacts(
    out_dir: &Path,
    prefix: &str,
    tau: f64,
    output: &CompareOutput,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join(format!("{prefix}report.csv")),
        report_csv(&output.reports),
    )?;
    std::fs::write(
        out_dir.join(format!("{prefix}summary.json")),
        serde_json::to_string_pretty(&output.reports)?,
    )?;
    for (metric, records) in &output.records {
        let name = metric.name();
        std::fs::write(
            out_dir.join(format!("{prefix}deltas_{name}.csv")),
            deltas_csv(records),
        )?;
        std::fs::write(
            out_dir.join(format!("{prefix}scatter_{name}.svg")),
            scatter_svg(records, tau, &format!("{name} delta vs consensus delta")),
        )?;
        std::fs::write(
            out_dir.join(format!("{prefix}trend_{name}.svg")),
            sorted_trend_svg(&output.reports[metric], &format!("{name} sorted trend")),
        )?;
    }
    Ok(())
}

/// Compare two detectors over a shared image set: per-metric congruence
/// reports, delta tables and scatter/trend artifacts under `out_dir`.
pub fn run_compare(
    det1: &DetectionFile,
    det2: &DetectionFile,
    gt: &GroundTruthFile,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<CompareOutput> {
    cfg.validate()?;
    let ids1: BTreeSet<String> = det1.image_ids().into_iter().collect();
    let ids2: BTreeSet<String> = det2.image_ids().into_iter().collect();
    if ids1 != ids2 {
        let diff: Vec<String> = ids1.symmetric_difference(&ids2).cloned().collect();
        return Err(CcsError::InvalidInput(format!(
            "detector files cover different image sets; symmetric difference: {}",
            diff.join(", ")
        )));
    }
    let evals1 = evaluate_detector(det1, gt, cfg)?;
    let evals2 = evaluate_detector(det2, gt, cfg)?;

    let mut records = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for metric in MetricKind::ALL {
        let recs = classify_pair(&evals1, &evals2, metric, cfg.tau, cfg.yellow_rule)?;
        reports.insert(metric, congruence_report(metric, &recs));
        records.insert(metric, recs);
    }
    let output = CompareOutput { records, reports };
    write_compare_artifacts(out_dir, "", cfg.tau, &output)?;
    Ok(output)
}

/// Synthetic experiment parameters.
#[derive(Debug, Clone)]
pub struct SimulateParams {
    pub n_images: usize,
    pub scene: SceneSpec,
    pub profile_a: DetectorProfile,
    pub profile_b: DetectorProfile,
    pub dump_fixtures: bool,
}

/// Per-seed rank correlations plus their mean and standard deviation.
#[derive(Debug, Clone, Serialize)]
pub struct SeedSweepSummary {
    pub seeds: Vec<u64>,
    pub rho: BTreeMap<MetricKind, Vec<Option<f64>>>,
    pub rho_mean: BTreeMap<MetricKind, f64>,
    pub rho_std: BTreeMap<MetricKind, f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn detection_records(ad: &AugmentedDetections) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    if let Some(baseline) = &ad.baseline {
        out.push(DetectionRecord {
            image_id: ad.image_id.clone(),
            augmentation_index: -1,
            detections: baseline.iter().map(WireDetection::from_detection).collect(),
        });
    }
    for (k, set) in ad.per_augmentation.iter().enumerate() {
        out.push(DetectionRecord {
            image_id: ad.image_id.clone(),
            augmentation_index: k as i32,
            detections: set.iter().map(WireDetection::from_detection).collect(),
        });
    }
    out
}

fn ground_truth_record(gt: &GroundTruthSet) -> GroundTruthRecord {
    GroundTruthRecord {
        image_id: gt.image_id.clone(),
        objects: gt
            .objects
            .iter()
            .map(|(b, c)| WireObject {
                bbox: b.corners(),
                class_id: *c,
            })
            .collect(),
    }
}

/// Run the synthetic pipeline for every configured seed, writing the same
/// artifacts as the comparison command per seed plus a sweep summary.
/// With `dump_fixtures`, the first seed's detections and ground truth are
/// written in the standard file formats.
pub fn run_simulate(
    params: &SimulateParams,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<SeedSweepSummary> {
    cfg.validate()?;
    params.profile_a.validate()?;
    params.profile_b.validate()?;
    params.scene.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let mut rho: BTreeMap<MetricKind, Vec<Option<f64>>> = BTreeMap::new();
    for (idx, &seed) in cfg.seeds.iter().enumerate() {
        let result = run_congruence_experiment(
            params.n_images,
            &params.scene,
            &params.profile_a,
            &params.profile_b,
            &cfg.ccs,
            &cfg.metrics,
            cfg.tau,
            cfg.yellow_rule,
            seed,
        )?;
        let output = CompareOutput {
            records: result.records.clone(),
            reports: result.reports.clone(),
        };
        write_compare_artifacts(out_dir, &format!("seed{seed}_"), cfg.tau, &output)?;
        for metric in MetricKind::ALL {
            rho.entry(metric)
                .or_default()
                .push(result.reports[&metric].spearman_rho);
        }
        if params.dump_fixtures && idx == 0 {
            let det_a = DetectionFile {
                records: result.detections_a.iter().flat_map(detection_records).collect(),
            };
            let det_b = DetectionFile {
                records: result.detections_b.iter().flat_map(detection_records).collect(),
            };
            let gt = GroundTruthFile {
                records: result.ground_truth.iter().map(ground_truth_record).collect(),
            };
            det_a.write(&out_dir.join("fixture_detections_a.ndjson"))?;
            det_b.write(&out_dir.join("fixture_detections_b.ndjson"))?;
            gt.write(&out_dir.join("fixture_ground_truth.ndjson"))?;
        }
    }

    let mut rho_mean = BTreeMap::new();
    let mut rho_std = BTreeMap::new();
    for metric in MetricKind::ALL {
        let values: Vec<f64> = rho[&metric].iter().flatten().copied().collect();
        if !values.is_empty() {
            let (m, s) = mean_std(&values);
            rho_mean.insert(metric, m);
            rho_std.insert(metric, s);
        }
    }
    let summary = SeedSweepSummary {
        seeds: cfg.seeds.clone(),
        rho,
        rho_mean,
        rho_std,
    };
    let mut csv = String::from("seed,rho_f1,rho_ppdq,rho_oc_cost\n");
    for (i, seed) in summary.seeds.iter().enumerate() {
        let cell = |m: MetricKind| {
            summary.rho[&m][i]
                .map(|v| v.to_string())
                .unwrap_or_default()
        };
        csv.push_str(&format!(
            "{seed},{},{},{}\n",
            cell(MetricKind::F1),
            cell(MetricKind::Ppdq),
            cell(MetricKind::OcCost)
        ));
    }
    std::fs::write(out_dir.join("seed_sweep.csv"), csv)?;
    std::fs::write(
        out_dir.join("seed_sweep.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
