//! Two-detector comparison: per-image deltas, margin-based dot
//! classification, congruence percentage, sorted-trend extraction and
//! Spearman rank correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CcsError, Result};

/// Supervised metrics the consensus score is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    F1,
    Ppdq,
    OcCost,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::F1, MetricKind::Ppdq, MetricKind::OcCost];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::F1 => "f1",
            MetricKind::Ppdq => "ppdq",
            MetricKind::OcCost => "oc_cost",
        }
    }

    /// Whether a lower raw value means a better detector. Deltas of such
    /// metrics are sign-flipped before classification so that positive
    /// always reads "detector 1 better".
    pub fn lower_is_better(&self) -> bool {
        matches!(self, MetricKind::OcCost)
    }
}

impl std::str::FromStr for MetricKind {
    type Err = CcsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(MetricKind::F1),
            "ppdq" => Ok(MetricKind::Ppdq),
            "oc_cost" | "oc-cost" | "oc" => Ok(MetricKind::OcCost),
            other => Err(CcsError::InvalidInput(format!("unknown metric '{other}'"))),
        }
    }
}

/// Per-image record of consensus score and supervised metric values for one
/// detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageEvaluation {
    pub image_id: String,
    pub ccs: f64,
    pub metrics: BTreeMap<MetricKind, f64>,
}

/// Scatter-dot classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dot {
    /// Detector 1 better under both signals.
    Blue,
    /// Detector 2 better under both signals.
    Green,
    /// Sign disagreement outside both margins.
    Red,
    /// Near-tie inside the indifference margin.
    Yellow,
}

impl Dot {
    pub fn name(&self) -> &'static str {
        match self {
            Dot::Blue => "blue",
            Dot::Green => "green",
            Dot::Red => "red",
            Dot::Yellow => "yellow",
        }
    }
}

/// How the indifference margin combines the two axes: `Or` excludes an image
/// when either delta falls inside the margin, `And` only when both do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YellowRule {
    Or,
    And,
}

impl std::str::FromStr for YellowRule {
    type Err = CcsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(YellowRule::Or),
            "and" => Ok(YellowRule::And),
            other => Err(CcsError::InvalidConfig(format!(
                "unknown yellow rule '{other}' (expected or/and)"
            ))),
        }
    }
}

/// Per-image deltas and their classification for one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub image_id: String,
    /// Oriented metric delta: positive means detector 1 better.
    pub delta_metric: f64,
    pub delta_ccs: f64,
    pub dot: Dot,
}

/// Aggregate congruence statistics for one metric over a detector pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CongruenceReport {
    pub metric: MetricKind,
    pub total_images: usize,
    pub yellow: usize,
    pub considered: usize,
    pub green: usize,
    pub blue: usize,
    pub red: usize,
    /// Absent when no image is decisive.
    pub congruence_pct: Option<f64>,
    /// Spearman rho over green + blue records; absent below two points or
    /// under zero rank variance.
    pub spearman_rho: Option<f64>,
    /// Decisive (green + blue) deltas sorted by the metric delta.
    pub sorted_trend: Vec<(f64, f64)>,
}

/// Per-image deltas for one metric: detector 1 minus detector 2, with
/// lower-is-better metrics sign-flipped so positive always means detector 1
/// better.
pub fn deltas(
    eval1: &ImageEvaluation,
    eval2: &ImageEvaluation,
    metric: MetricKind,
) -> Result<(f64, f64)> {
    let m1 = eval1.metrics.get(&metric).ok_or_else(|| {
        CcsError::InvalidInput(format!(
            "image {}: metric {} missing for detector 1",
            eval1.image_id,
            metric.name()
        ))
    })?;
    let m2 = eval2.metrics.get(&metric).ok_or_else(|| {
        CcsError::InvalidInput(format!(
            "image {}: metric {} missing for detector 2",
            eval2.image_id,
            metric.name()
        ))
    })?;
    let mut d_metric = m1 - m2;
    if metric.lower_is_better() {
        d_metric = -d_metric;
    }
    Ok((d_metric, eval1.ccs - eval2.ccs))
}

/// Classify one image by its two deltas against the indifference margin
/// `tau`. Values with magnitude exactly `tau` are still near-ties.
pub fn classify_dot(d_metric: f64, d_ccs: f64, tau: f64, rule: YellowRule) -> Dot {
    let metric_small = d_metric.abs() <= tau;
    let ccs_small = d_ccs.abs() <= tau;
    let near_tie = match rule {
        YellowRule::Or => metric_small || ccs_small,
        YellowRule::And => metric_small && ccs_small,
    };
    if near_tie {
        Dot::Yellow
    } else if d_metric > 0.0 && d_ccs > 0.0 {
        Dot::Blue
    } else if d_metric < 0.0 && d_ccs < 0.0 {
        Dot::Green
    } else {
        Dot::Red
    }
}

/// Spearman rank correlation with average ranks for ties. Returns `None`
/// below two points or when either rank vector has zero variance. On
/// tie-free inputs this equals `1 - 6 * sum(d^2) / (n (n^2 - 1))` exactly.
pub fn spearman_rho(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    pearson(&rx, &ry)
}

/// Average (fractional) ranks, 1-based; tied values share the mean of the
/// ranks they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Aggregate classified records into counts, congruence percentage and the
/// sorted-trend rank correlation over decisive (green + blue) records.
pub fn congruence_report(metric: MetricKind, records: &[DeltaRecord]) -> CongruenceReport {
    let total = records.len();
    let count = |d: Dot| records.iter().filter(|r| r.dot == d).count();
    let yellow = count(Dot::Yellow);
    let green = count(Dot::Green);
    let blue = count(Dot::Blue);
    let red = count(Dot::Red);
    let considered = total - yellow;

    let congruence_pct = if considered > 0 {
        Some(100.0 * (green + blue) as f64 / considered as f64)
    } else {
        None
    };

    let mut sorted_trend: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| matches!(r.dot, Dot::Green | Dot::Blue))
        .map(|r| (r.delta_metric, r.delta_ccs))
        .collect();
    sorted_trend.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let spearman = spearman_rho(&sorted_trend);

    CongruenceReport {
        metric,
        total_images: total,
        yellow,
        considered,
        green,
        blue,
        red,
        congruence_pct,
        spearman_rho: spearman,
        sorted_trend,
    }
}

/// Classify the deltas of a detector pair over a whole image set.
pub fn classify_pair(
    evals1: &[ImageEvaluation],
    evals2: &[ImageEvaluation],
    metric: MetricKind,
    tau: f64,
    rule: YellowRule,
) -> Result<Vec<DeltaRecord>> {
    if evals1.len() != evals2.len() {
        return Err(CcsError::InvalidInput(format!(
            "detector evaluations cover {} vs {} images",
            evals1.len(),
            evals2.len()
        )));
    }
    evals1
        .iter()
        .zip(evals2)
        .map(|(e1, e2)| {
            if e1.image_id != e2.image_id {
                return Err(CcsError::InvalidInput(format!(
                    "image id mismatch: {} vs {}",
                    e1.image_id, e2.image_id
                )));
            }
            let (dm, dc) = deltas(e1, e2, metric)?;
            Ok(DeltaRecord {
                image_id: e1.image_id.clone(),
                delta_metric: dm,
                delta_ccs: dc,
                dot: classify_dot(dm, dc, tau, rule),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn eval(id: &str, ccs: f64, f1: f64, ppdq: f64, oc: f64) -> ImageEvaluation {
        let mut metrics = BTreeMap::new();
        metrics.insert(MetricKind::F1, f1);
        metrics.insert(MetricKind::Ppdq, ppdq);
        metrics.insert(MetricKind::OcCost, oc);
        ImageEvaluation {
            image_id: id.into(),
            ccs,
            metrics,
        }
    }

    #[test]
    fn deltas_simple_subtraction() {
        let e1 = eval("a", 0.7, 0.8, 0.5, 0.3);
        let e2 = eval("a", 0.4, 0.6, 0.5, 0.3);
        let (dm, dc) = deltas(&e1, &e2, MetricKind::F1).unwrap();
        assert_abs_diff_eq!(dm, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(dc, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn deltas_identical_evaluations() {
        let e = eval("a", 0.7, 0.8, 0.5, 0.3);
        assert_eq!(deltas(&e, &e, MetricKind::Ppdq).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn deltas_oc_cost_orientation() {
        // lower cost is better: 0.2 vs 0.5 means detector 1 better, +0.3
        let e1 = eval("a", 0.7, 0.8, 0.5, 0.2);
        let e2 = eval("a", 0.4, 0.6, 0.5, 0.5);
        let (dm, _) = deltas(&e1, &e2, MetricKind::OcCost).unwrap();
        assert_abs_diff_eq!(dm, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn deltas_missing_metric() {
        let mut e1 = eval("a", 0.7, 0.8, 0.5, 0.3);
        e1.metrics.remove(&MetricKind::F1);
        let e2 = eval("a", 0.4, 0.6, 0.5, 0.3);
        assert!(deltas(&e1, &e2, MetricKind::F1).is_err());
    }

    #[test]
    fn classify_dot_cases() {
        let tau = 0.15;
        assert_eq!(classify_dot(0.2, 0.3, tau, YellowRule::Or), Dot::Blue);
        assert_eq!(classify_dot(0.1, 0.4, tau, YellowRule::Or), Dot::Yellow);
        assert_eq!(classify_dot(-0.13, 0.14, tau, YellowRule::Or), Dot::Yellow);
        assert_eq!(classify_dot(0.3, -0.3, tau, YellowRule::Or), Dot::Red);
        assert_eq!(classify_dot(-0.2, -0.2, tau, YellowRule::Or), Dot::Green);
        // boundary is still a near-tie
        assert_eq!(classify_dot(0.15, 0.5, tau, YellowRule::Or), Dot::Yellow);
    }

    #[test]
    fn classify_dot_and_rule() {
        let tau = 0.15;
        // only one axis inside the margin: And keeps the sign reading
        assert_eq!(classify_dot(0.1, 0.4, tau, YellowRule::And), Dot::Blue);
        assert_eq!(classify_dot(0.1, 0.1, tau, YellowRule::And), Dot::Yellow);
    }

    #[test]
    fn spearman_monotone() {
        let inc: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, (i * i) as f64)).collect();
        assert_abs_diff_eq!(spearman_rho(&inc).unwrap(), 1.0, epsilon = 1e-12);
        let dec: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, -(i as f64))).collect();
        assert_abs_diff_eq!(spearman_rho(&dec).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn spearman_hand_example() {
        let pairs = vec![(1.0, 2.0), (2.0, 1.0), (3.0, 3.0)];
        assert_abs_diff_eq!(spearman_rho(&pairs).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn spearman_degenerate() {
        assert!(spearman_rho(&[(1.0, 1.0)]).is_none());
        assert!(spearman_rho(&[(1.0, 1.0), (1.0, 2.0)]).is_none()); // zero x variance
    }

    #[test]
    fn report_table_counts() {
        // counts 86 green, 80 blue, 12 red, 822 yellow of 1000
        let mut records = Vec::new();
        let mk = |dot: Dot, dm: f64, dc: f64, i: usize| DeltaRecord {
            image_id: format!("img{i}"),
            delta_metric: dm,
            delta_ccs: dc,
            dot,
        };
        for i in 0..86 {
            records.push(mk(Dot::Green, -0.3 - i as f64 * 1e-3, -0.2, i));
        }
        for i in 0..80 {
            records.push(mk(Dot::Blue, 0.3 + i as f64 * 1e-3, 0.2, 1000 + i));
        }
        for i in 0..12 {
            records.push(mk(Dot::Red, 0.3, -0.2, 2000 + i));
        }
        for i in 0..822 {
            records.push(mk(Dot::Yellow, 0.01, 0.01, 3000 + i));
        }
        let r = congruence_report(MetricKind::F1, &records);
        assert_eq!(r.total_images, 1000);
        assert_eq!(r.considered, 178);
        assert_eq!((r.green, r.blue, r.red, r.yellow), (86, 80, 12, 822));
        assert_abs_diff_eq!(r.congruence_pct.unwrap(), 93.2584269662921, epsilon = 1e-9);
        assert_eq!(r.sorted_trend.len(), 166);
    }

    #[test]
    fn report_all_yellow() {
        let records: Vec<DeltaRecord> = (0..5)
            .map(|i| DeltaRecord {
                image_id: format!("i{i}"),
                delta_metric: 0.0,
                delta_ccs: 0.0,
                dot: Dot::Yellow,
            })
            .collect();
        let r = congruence_report(MetricKind::F1, &records);
        assert_eq!(r.considered, 0);
        assert!(r.congruence_pct.is_none());
        assert!(r.spearman_rho.is_none());
    }

    proptest! {
        #[test]
        fn classify_scale_invariant(dm in -1.0f64..1.0, dc in -1.0f64..1.0,
                                    tau in 0.01f64..0.5, scale in 0.1f64..10.0) {
            let a = classify_dot(dm, dc, tau, YellowRule::Or);
            let b = classify_dot(dm * scale, dc * scale, tau * scale, YellowRule::Or);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn swap_detectors_symmetry(
            values in proptest::collection::vec(
                ((-1.0f64..1.0), (-1.0f64..1.0)), 1..50),
            tau in 0.05f64..0.3,
        ) {
            let classify_all = |sign: f64| -> Vec<DeltaRecord> {
                values.iter().enumerate().map(|(i, &(dm, dc))| DeltaRecord {
                    image_id: format!("i{i}"),
                    delta_metric: sign * dm,
                    delta_ccs: sign * dc,
                    dot: classify_dot(sign * dm, sign * dc, tau, YellowRule::Or),
                }).collect()
            };
            let fwd = congruence_report(MetricKind::F1, &classify_all(1.0));
            let rev = congruence_report(MetricKind::F1, &classify_all(-1.0));
            prop_assert_eq!(fwd.blue, rev.green);
            prop_assert_eq!(fwd.green, rev.blue);
            prop_assert_eq!(fwd.yellow, rev.yellow);
            prop_assert_eq!(fwd.red, rev.red);
            match (fwd.congruence_pct, rev.congruence_pct) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "congruence presence differs"),
            }
        }

        #[test]
        fn spearman_monotone_transform_invariant(
            pairs in proptest::collection::vec(((-10.0f64..10.0), (-10.0f64..10.0)), 3..40),
        ) {
            let base = spearman_rho(&pairs);
            // strictly monotone transforms of each axis
            let transformed: Vec<(f64, f64)> = pairs.iter()
                .map(|&(x, y)| (x.exp(), y.powi(3)))
                .collect();
            let after = spearman_rho(&transformed);
            match (base, after) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
                (None, None) => {}
                _ => prop_assert!(false, "definedness differs"),
            }
        }

        #[test]
        fn spearman_matches_closed_formula_without_ties(
            seed in 0u64..10_000,
            n in 3usize..50,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut ys = xs.clone();
            ys.shuffle(&mut rng);
            let pairs: Vec<(f64, f64)> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
            let rho = spearman_rho(&pairs).unwrap();
            let rx = average_ranks(&xs);
            let ry = average_ranks(&ys);
            let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
            let nf = n as f64;
            let closed = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
            prop_assert!((rho - closed).abs() < 1e-12);
        }
    }
}
