//! Axis-aligned boxes and pairwise IoU, the primitive under every metric.

use serde::{Deserialize, Serialize};

use crate::error::{CcsError, Result};

/// Axis-aligned rectangle in pixel coordinates, corner convention
/// `(x1, y1, x2, y2)` with `x1 < x2` and `y1 < y2`.
///
/// Coordinates are continuous; detector outputs are sub-pixel and IoU is
/// computed on exact rectangle areas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    /// Construct a box, rejecting degenerate (zero or negative area) or
    /// non-finite coordinates.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite();
        if !finite || x1 >= x2 || y1 >= y2 {
            return Err(CcsError::DegenerateBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Intersection area with another box; 0 when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let ix = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let iy = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        ix * iy
    }
}

/// A scored, class-labeled box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: u32,
    pub score: f64,
    /// Optional full class distribution; when absent, downstream consumers
    /// derive one from `(class_id, score)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_distribution: Option<Vec<f64>>,
}

impl Detection {
    pub fn new(bbox: BBox, class_id: u32, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(CcsError::InvalidScore(score));
        }
        Ok(Self {
            bbox,
            class_id,
            score,
            class_distribution: None,
        })
    }
}

/// Intersection over Union of two boxes. Symmetric, in `[0, 1]`, zero for
/// disjoint boxes and one exactly for identical boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}
