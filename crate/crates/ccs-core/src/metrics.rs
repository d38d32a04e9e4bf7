//! Ground-truth comparator metrics: per-image F1, OC-cost via minimum-cost
//! rectangular assignment, and pPDQ with the box-mask approximation.

use serde::{Deserialize, Serialize};

use crate::error::{CcsError, Result};
use crate::geometry::{iou, BBox, Detection};

/// Ground-truth objects for one image.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    pub image_id: String,
    pub objects: Vec<(BBox, u32)>,
}

/// One-to-one matching outcome between predictions and ground truths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// (prediction index, ground-truth index) pairs; each side appears at
    /// most once.
    pub pairs: Vec<(usize, usize)>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Configuration of the supervised metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// IoU threshold for the F1 matching.
    pub alpha_iou: f64,
    /// OC-cost mixing weight between localization and classification cost.
    pub lambda: f64,
    /// OC-cost penalty for an unmatched prediction or ground truth.
    pub beta_dummy: f64,
    /// pPDQ foreground probability softening, in (0, 0.5).
    pub epsilon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            alpha_iou: 0.5,
            lambda: 1.0,
            beta_dummy: 0.6,
            epsilon: 0.1,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_iou) {
            return Err(CcsError::InvalidConfig(format!(
                "alpha_iou {} outside [0, 1]",
                self.alpha_iou
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(CcsError::InvalidConfig(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.beta_dummy < 0.0 {
            return Err(CcsError::InvalidConfig(format!(
                "beta_dummy {} negative",
                self.beta_dummy
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(CcsError::InvalidConfig(format!(
                "epsilon {} outside (0, 0.5)",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Greedy one-to-one matching: predictions in descending score order (ties
/// by ascending index), each taking the unmatched same-class ground truth of
/// highest IoU, provided IoU >= alpha_iou (IoU ties by ascending ground-truth
/// index).
pub fn match_greedy(preds: &[Detection], gt: &GroundTruthSet, alpha_iou: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut gt_taken = vec![false; gt.objects.len()];
    let mut pairs = Vec::new();
    for &pi in &order {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, (gbox, gclass)) in gt.objects.iter().enumerate() {
            if gt_taken[gi] || *gclass != p.class_id {
                continue;
            }
            let v = iou(&p.bbox, gbox);
            if v < alpha_iou {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, bv)) => v > bv,
            };
            if better {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            gt_taken[gi] = true;
            pairs.push((pi, gi));
        }
    }
    pairs.sort();
    let tp = pairs.len();
    MatchResult {
        tp,
        fp: preds.len() - tp,
        fn_: gt.objects.len() - tp,
        pairs,
    }
}

/// Per-image precision, recall and F1 under greedy one-to-one matching.
/// Empty predictions against empty ground truth scores 1 by convention.
pub fn f1_score(preds: &[Detection], gt: &GroundTruthSet, cfg: &MetricConfig) -> (f64, f64, f64) {
    if preds.is_empty() && gt.objects.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    let m = match_greedy(preds, gt, cfg.alpha_iou);
    let precision = if m.tp + m.fp == 0 {
        0.0
    } else {
        m.tp as f64 / (m.tp + m.fp) as f64
    };
    let recall = if m.tp + m.fn_ == 0 {
        0.0
    } else {
        m.tp as f64 / (m.tp + m.fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Minimum-cost one-to-one assignment of rows to columns of a rectangular
/// cost matrix (shortest augmenting path with potentials). Returns the
/// optimal (row, col) pairs sorted by row; min(rows, cols) pairs total.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    if m == 0 {
        return Vec::new();
    }
    if n > m {
        let transposed: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..n).map(|i| cost[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = min_cost_assignment(&transposed)
            .into_iter()
            .map(|(r, c)| (c, r))
            .collect();
        pairs.sort();
        return pairs;
    }

    // 1-indexed potentials; p[j] = row assigned to column j, 0 = free
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    pairs.sort();
    pairs
}

/// Per-image OC-cost: minimum-cost bipartite matching between predictions
/// and ground truths where the per-pair cost mixes localization (1 - IoU)
/// and classification, and every unmatched entity pays `beta_dummy` to a
/// dummy partner. The optimal total cost is divided by the number of real
/// entities involved (matches + unmatched predictions + unmatched ground
/// truths).
pub fn oc_cost(preds: &[Detection], gt: &GroundTruthSet, cfg: &MetricConfig) -> f64 {
    let n = preds.len();
    let m = gt.objects.len();
    if n == 0 && m == 0 {
        return 0.0;
    }
    // (n + m) x (m + n): real rows/cols first, then dummies. A dummy row
    // matched to a dummy column costs nothing.
    let size = n + m;
    let mut cost = vec![vec![0.0f64; size]; size];
    for (i, p) in preds.iter().enumerate() {
        for (j, (gbox, gclass)) in gt.objects.iter().enumerate() {
            let c_loc = 1.0 - iou(&p.bbox, gbox);
            let c_cls = if p.class_id == *gclass { 0.0 } else { 1.0 };
            cost[i][j] = cfg.lambda * c_loc + (1.0 - cfg.lambda) * c_cls;
        }
        for c in cost[i].iter_mut().skip(m) {
            *c = cfg.beta_dummy;
        }
    }
    for row in cost.iter_mut().skip(n) {
        for c in row.iter_mut().take(m) {
            *c = cfg.beta_dummy;
        }
    }

    let pairs = min_cost_assignment(&cost);
    let mut total = 0.0;
    let mut real_matches = 0usize;
    for (r, c) in pairs {
        if r < n || c < m {
            total += cost[r][c];
        }
        if r < n && c < m {
            real_matches += 1;
        }
    }
    // matches + unmatched predictions + unmatched ground truths
    let entities = n + m - real_matches;
    total / entities as f64
}

/// Inclusive integer pixel range covered by a box along one axis: pixels
/// whose center `p + 0.5` falls inside `[lo, hi)`. Empty when the box spans
/// no pixel center.
fn pixel_range(lo: f64, hi: f64) -> Option<(i64, i64)> {
    let first = (lo - 0.5).ceil() as i64;
    let last = ((hi - 0.5).ceil() as i64) - 1;
    if last < first {
        None
    } else {
        Some((first, last))
    }
}

fn pixel_counts(a: &BBox, b: &BBox) -> (u64, u64, u64) {
    let count = |r: Option<(i64, i64)>| r.map_or(0i64, |(f, l)| l - f + 1).max(0) as u64;
    let overlap = |ra: Option<(i64, i64)>, rb: Option<(i64, i64)>| match (ra, rb) {
        (Some((f1, l1)), Some((f2, l2))) => (l1.min(l2) - f1.max(f2) + 1).max(0) as u64,
        _ => 0,
    };
    let ax = pixel_range(a.x1(), a.x2());
    let ay = pixel_range(a.y1(), a.y2());
    let bx = pixel_range(b.x1(), b.x2());
    let by = pixel_range(b.y1(), b.y2());
    let n_a = count(ax) * count(ay);
    let n_b = count(bx) * count(by);
    let n_ab = overlap(ax, bx) * overlap(ay, by);
    (n_a, n_b, n_ab)
}

/// Probability the detector assigns to `gt_class`, derived from the full
/// class distribution when present, otherwise from `(class_id, score)` with
/// the residual mass spread uniformly over the remaining classes.
pub fn label_probability(det: &Detection, gt_class: u32, num_classes: usize) -> f64 {
    if let Some(dist) = &det.class_distribution {
        return dist.get(gt_class as usize).copied().unwrap_or(0.0);
    }
    if det.class_id == gt_class {
        det.score
    } else if num_classes > 1 {
        (1.0 - det.score) / (num_classes - 1) as f64
    } else {
        0.0
    }
}

/// Pairwise pPDQ between one ground-truth object and one detection: the
/// geometric mean of spatial quality `Q_S = exp(-(L_FG + L_BG))` and label
/// quality `Q_L`.
///
/// Both boxes are rasterized onto the integer pixel grid (a pixel belongs
/// to a box iff its center lies inside the continuous rectangle). The
/// foreground probability is `1 - epsilon` inside the predicted box and
/// `epsilon` outside; `L_FG` averages `-ln p` over ground-truth pixels and
/// `L_BG` charges `-ln(1 - p)` for every predicted pixel outside the ground
/// truth, normalized by the ground-truth pixel count.
pub fn ppdq_pair(
    gt_box: &BBox,
    gt_class: u32,
    det: &Detection,
    num_classes: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    let (n_g, n_d, n_overlap) = pixel_counts(gt_box, &det.bbox);
    if n_g == 0 {
        return Err(CcsError::InvalidInput(format!(
            "ground-truth box {:?} rasterizes to zero pixels",
            gt_box.corners()
        )));
    }
    let eps = cfg.epsilon;
    let inside = -(1.0 - eps).ln();
    let outside = -eps.ln();
    let l_fg = (n_overlap as f64 * inside + (n_g - n_overlap) as f64 * outside) / n_g as f64;
    // predicted pixels outside the ground truth carry foreground mass 1-eps,
    // each penalized by -ln(1 - (1 - eps)) = -ln eps
    let l_bg = (n_d - n_overlap) as f64 * outside / n_g as f64;
    let q_s = (-(l_fg + l_bg)).exp();
    let q_l = label_probability(det, gt_class, num_classes);
    Ok((q_s * q_l).sqrt())
}

/// Image-level pPDQ: the assignment maximizing total pairwise pPDQ is found
/// (via minimum cost on `1 - pPDQ`), matched scores are summed, and the sum
/// is divided by TP + FP + FN. Assigned pairs with zero quality do not count
/// as true positives. Empty against empty scores 1.
pub fn ppdq_image(
    preds: &[Detection],
    gt: &GroundTruthSet,
    num_classes: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    let n = preds.len();
    let m = gt.objects.len();
    if n == 0 && m == 0 {
        return Ok(1.0);
    }
    if n == 0 || m == 0 {
        return Ok(0.0);
    }
    let mut quality = vec![vec![0.0f64; m]; n];
    for (i, p) in preds.iter().enumerate() {
        for (j, (gbox, gclass)) in gt.objects.iter().enumerate() {
            quality[i][j] = ppdq_pair(gbox, *gclass, p, num_classes, cfg)?;
        }
    }
    let cost: Vec<Vec<f64>> = quality
        .iter()
        .map(|row| row.iter().map(|q| 1.0 - q).collect())
        .collect();
    let pairs = min_cost_assignment(&cost);
    let mut sum = 0.0;
    let mut tp = 0usize;
    for &(i, j) in &pairs {
        if quality[i][j] > 0.0 {
            sum += quality[i][j];
            tp += 1;
        }
    }
    let denom = tp + (n - tp) + (m - tp);
    Ok(sum / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn det(x1: f64, y1: f64, x2: f64, y2: f64, class: u32, score: f64) -> Detection {
        Detection::new(BBox::new(x1, y1, x2, y2).unwrap(), class, score).unwrap()
    }

    fn gts(objects: Vec<(BBox, u32)>) -> GroundTruthSet {
        GroundTruthSet {
            image_id: "t".into(),
            objects,
        }
    }

    #[test]
    fn f1_perfect_detection() {
        let g = gts(vec![(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1)]);
        let p = vec![det(0.0, 0.0, 4.0, 4.0, 1, 0.9)];
        assert_eq!(f1_score(&p, &g, &MetricConfig::default()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f1_all_false_negatives() {
        let g = gts(vec![(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1)]);
        let (_, _, f1) = f1_score(&[], &g, &MetricConfig::default());
        assert_eq!(f1, 0.0);
    }

    #[test]
    fn f1_empty_vs_empty() {
        let g = gts(vec![]);
        assert_eq!(f1_score(&[], &g, &MetricConfig::default()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f1_half() {
        // one pred overlaps a gt at IoU 0.8, one is disjoint; two gts
        let g = gts(vec![
            (BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0),
            (BBox::new(50.0, 50.0, 60.0, 60.0).unwrap(), 0),
        ]);
        let p = vec![
            det(0.0, 0.0, 10.0, 8.0, 0, 0.9), // IoU 0.8
            det(100.0, 100.0, 110.0, 110.0, 0, 0.8),
        ];
        let (precision, recall, f1) = f1_score(&p, &g, &MetricConfig::default());
        assert_eq!((precision, recall, f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn f1_class_mismatch_not_matched() {
        let g = gts(vec![(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1)]);
        let p = vec![det(0.0, 0.0, 4.0, 4.0, 2, 0.9)];
        let (_, _, f1) = f1_score(&p, &g, &MetricConfig::default());
        assert_eq!(f1, 0.0);
    }

    #[test]
    fn matching_is_one_to_one() {
        let g = gts(vec![(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 0)]);
        let p = vec![
            det(0.0, 0.0, 4.0, 4.0, 0, 0.9),
            det(0.0, 0.0, 4.0, 4.0, 0, 0.8),
        ];
        let m = match_greedy(&p, &g, 0.5);
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));
    }

    #[test]
    fn assignment_identity_and_antidiagonal() {
        assert_eq!(
            min_cost_assignment(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            vec![(0, 0), (1, 1)]
        );
        assert_eq!(
            min_cost_assignment(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            vec![(0, 1), (1, 0)]
        );
    }

    #[test]
    fn assignment_empty() {
        assert!(min_cost_assignment(&[]).is_empty());
    }

    #[test]
    fn assignment_rectangular() {
        // 3 rows, 2 cols: only 2 pairs, rows pick cheapest disjoint cols
        let pairs = min_cost_assignment(&[
            vec![10.0, 10.0],
            vec![0.0, 10.0],
            vec![10.0, 0.0],
        ]);
        assert_eq!(pairs, vec![(1, 0), (2, 1)]);
    }

    /// Exhaustive oracle: minimum total cost over every injective
    /// rows-to-columns map (rows <= cols assumed after transposition).
    pub(crate) fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        if n == 0 || cost[0].is_empty() {
            return 0.0;
        }
        let m = cost[0].len();
        if n > m {
            let t: Vec<Vec<f64>> = (0..m)
                .map(|j| (0..n).map(|i| cost[i][j]).collect())
                .collect();
            return brute_force_min_cost(&t);
        }
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
            if row == cost.len() {
                *best = best.min(acc);
                return;
            }
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost[row][c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        let mut used = vec![false; m];
        rec(cost, 0, &mut used, 0.0, &mut best);
        best
    }

    #[test]
    fn assignment_matches_brute_force_5x5() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let cost: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..5).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let pairs = min_cost_assignment(&cost);
            let total: f64 = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
            let best = brute_force_min_cost(&cost);
            assert!((total - best).abs() < 1e-9, "{total} vs {best}");
        }
    }

    #[test]
    fn oc_cost_perfect_match_is_zero() {
        let g = gts(vec![(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1)]);
        let p = vec![det(0.0, 0.0, 4.0, 4.0, 1, 0.9)];
        assert_eq!(oc_cost(&p, &g, &MetricConfig::default()), 0.0);
    }

    #[test]
    fn oc_cost_lone_prediction_pays_dummy() {
        let g = gts(vec![]);
        let p = vec![det(0.0, 0.0, 4.0, 4.0, 1, 0.9)];
        assert_abs_diff_eq!(
            oc_cost(&p, &g, &MetricConfig::default()),
            0.6,
            epsilon = 1e-12
        );
    }

    #[test]
    fn oc_cost_prefers_half_iou_match_over_dummies() {
        let g = gts(vec![(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1)]);
        let p = vec![det(0.0, 0.0, 4.0, 2.0, 1, 0.9)]; // IoU 0.5
        assert_abs_diff_eq!(
            oc_cost(&p, &g, &MetricConfig::default()),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn oc_cost_empty_vs_empty() {
        assert_eq!(oc_cost(&[], &gts(vec![]), &MetricConfig::default()), 0.0);
    }

    #[test]
    fn ppdq_exact_match_closed_form() {
        let cfg = MetricConfig::default();
        let gbox = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let d = det(0.0, 0.0, 10.0, 10.0, 3, 1.0);
        let v = ppdq_pair(&gbox, 3, &d, 4, &cfg).unwrap();
        // L_FG = -ln 0.9, L_BG = 0, Q_S = 0.9, Q_L = 1
        assert_abs_diff_eq!(v, 0.9f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.9487, epsilon = 1e-4);
    }

    #[test]
    fn ppdq_disjoint_equal_area() {
        let cfg = MetricConfig::default();
        let gbox = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let d = det(50.0, 50.0, 60.0, 60.0, 0, 1.0);
        let v = ppdq_pair(&gbox, 0, &d, 2, &cfg).unwrap();
        // every gt pixel sees probability eps, and every predicted pixel
        // (all outside gt) carries mass 1 - eps: L_FG = -ln 0.1,
        // L_BG = -ln 0.1, Q_S = 0.01, pPDQ = 0.1
        assert_abs_diff_eq!(v, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn ppdq_wrong_class_is_zero() {
        let cfg = MetricConfig::default();
        let gbox = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let d = det(0.0, 0.0, 10.0, 10.0, 1, 1.0); // prob 1 on class 1, 0 on class 0
        let v = ppdq_pair(&gbox, 0, &d, 2, &cfg).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ppdq_zero_pixel_gt_rejected() {
        let cfg = MetricConfig::default();
        let gbox = BBox::new(0.0, 0.0, 0.2, 0.2).unwrap();
        let d = det(0.0, 0.0, 10.0, 10.0, 0, 1.0);
        assert!(ppdq_pair(&gbox, 0, &d, 2, &cfg).is_err());
    }

    #[test]
    fn ppdq_epsilon_limit() {
        let cfg = MetricConfig {
            epsilon: 1e-6,
            ..Default::default()
        };
        let gbox = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let d = det(0.0, 0.0, 10.0, 10.0, 0, 1.0);
        let v = ppdq_pair(&gbox, 0, &d, 1, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn ppdq_image_single_pair() {
        let cfg = MetricConfig::default();
        let g = gts(vec![(BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0)]);
        let p = vec![det(0.0, 0.0, 10.0, 10.0, 0, 1.0)];
        let v = ppdq_image(&p, &g, 1, &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.9f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ppdq_image_no_preds() {
        let cfg = MetricConfig::default();
        let g = gts(vec![(BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0)]);
        assert_eq!(ppdq_image(&[], &g, 1, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn ppdq_image_duplicated_perfect_pairs() {
        let cfg = MetricConfig::default();
        let g = gts(vec![
            (BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0),
            (BBox::new(50.0, 0.0, 60.0, 10.0).unwrap(), 0),
        ]);
        let p = vec![
            det(0.0, 0.0, 10.0, 10.0, 0, 1.0),
            det(50.0, 0.0, 60.0, 10.0, 0, 1.0),
        ];
        let two = ppdq_image(&p, &g, 1, &cfg).unwrap();
        let one = ppdq_image(
            &p[..1],
            &gts(vec![(BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0)]),
            1,
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(two, one, epsilon = 1e-12);
    }

    #[test]
    fn ppdq_qs_monotone_in_overlap() {
        // nested shrinking predicted boxes: Q_S never increases as IoU drops
        let cfg = MetricConfig::default();
        let gbox = BBox::new(0.0, 0.0, 20.0, 20.0).unwrap();
        let mut last = f64::INFINITY;
        for shrink in 0..8 {
            let s = shrink as f64;
            let d = det(0.0, 0.0, 20.0 - 2.0 * s, 20.0, 0, 1.0);
            let v = ppdq_pair(&gbox, 0, &d, 1, &cfg).unwrap();
            assert!(v <= last + 1e-12);
            last = v;
        }
    }

    proptest! {
        #[test]
        fn f1_components_in_range(
            boxes in proptest::collection::vec(
                (0.0f64..50.0, 0.0f64..50.0, 1.0f64..10.0, 1.0f64..10.0, 0u32..3, 0.0f64..1.0), 0..6),
            gt_boxes in proptest::collection::vec(
                (0.0f64..50.0, 0.0f64..50.0, 1.0f64..10.0, 1.0f64..10.0, 0u32..3), 0..6),
        ) {
            let preds: Vec<Detection> = boxes.into_iter()
                .map(|(x, y, w, h, c, s)| det(x, y, x + w, y + h, c, s))
                .collect();
            let g = gts(gt_boxes.into_iter()
                .map(|(x, y, w, h, c)| (BBox::new(x, y, x + w, y + h).unwrap(), c))
                .collect());
            let (p, r, f1) = f1_score(&preds, &g, &MetricConfig::default());
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((0.0..=1.0).contains(&f1));
            let m = match_greedy(&preds, &g, 0.5);
            // one-to-one
            let mut seen = std::collections::HashSet::new();
            for &(_, gi) in &m.pairs {
                prop_assert!(seen.insert(gi));
            }
            if !preds.is_empty() || !g.objects.is_empty() {
                prop_assert_eq!(f1 == 0.0, m.tp == 0);
            }
        }

        #[test]
        fn oc_cost_symmetric_under_swap(
            boxes in proptest::collection::vec(
                (0.0f64..50.0, 0.0f64..50.0, 1.0f64..10.0, 1.0f64..10.0, 0u32..3), 0..5),
            gt_boxes in proptest::collection::vec(
                (0.0f64..50.0, 0.0f64..50.0, 1.0f64..10.0, 1.0f64..10.0, 0u32..3), 0..5),
        ) {
            let cfg = MetricConfig::default(); // lambda = 1
            let preds: Vec<Detection> = boxes.iter()
                .map(|&(x, y, w, h, c)| det(x, y, x + w, y + h, c, 0.9))
                .collect();
            let g = gts(gt_boxes.iter()
                .map(|&(x, y, w, h, c)| (BBox::new(x, y, x + w, y + h).unwrap(), c))
                .collect());
            // swap roles
            let preds_swapped: Vec<Detection> = gt_boxes.iter()
                .map(|&(x, y, w, h, c)| det(x, y, x + w, y + h, c, 0.9))
                .collect();
            let g_swapped = gts(boxes.iter()
                .map(|&(x, y, w, h, c)| (BBox::new(x, y, x + w, y + h).unwrap(), c))
                .collect());
            let a = oc_cost(&preds, &g, &cfg);
            let b = oc_cost(&preds_swapped, &g_swapped, &cfg);
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn ppdq_pair_in_range(
            (gx, gy, gw, gh) in (0.0f64..30.0, 0.0f64..30.0, 2.0f64..15.0, 2.0f64..15.0),
            (dx, dy, dw, dh) in (0.0f64..30.0, 0.0f64..30.0, 2.0f64..15.0, 2.0f64..15.0),
            score in 0.0f64..1.0,
        ) {
            let cfg = MetricConfig::default();
            let gbox = BBox::new(gx, gy, gx + gw, gy + gh).unwrap();
            let d = det(dx, dy, dx + dw, dy + dh, 0, score);
            let v = ppdq_pair(&gbox, 0, &d, 2, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
