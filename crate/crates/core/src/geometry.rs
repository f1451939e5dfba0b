//! Pixel-space primitives: points, axis-aligned boxes, detections, IoU and
//! greedy non-maximum suppression.
//!
//! Coordinates are continuous `f64` pixels with the origin at the top-left
//! corner of the frame, x to the right and y down.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn offset(&self, v: PixelVector) -> PixelPoint {
        PixelPoint::new(self.x + v.dx, self.y + v.dy)
    }

    pub fn scaled(&self, k: f64) -> PixelPoint {
        PixelPoint::new(self.x * k, self.y * k)
    }

    /// Displacement from `self` to `to`.
    pub fn to(&self, to: &PixelPoint) -> PixelVector {
        PixelVector::new(to.x - self.x, to.y - self.y)
    }
}

/// A displacement in pixels (or a velocity in pixels/frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelVector {
    pub dx: f64,
    pub dy: f64,
}

impl PixelVector {
    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn scaled(&self, k: f64) -> PixelVector {
        PixelVector::new(self.dx * k, self.dy * k)
    }

    /// Unit vector in the same direction, or `None` when shorter than `eps`.
    pub fn unit(&self, eps: f64) -> Option<PixelVector> {
        let n = self.norm();
        (n.is_finite() && n >= eps).then(|| PixelVector::new(self.dx / n, self.dy / n))
    }
}

/// Axis-aligned box given by its corners. Always has strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x1 >= x2 || y1 >= y2 {
            return Err(Error::contract(format!(
                "box ({x1}, {y1}, {x2}, {y2}) must be finite with x1 < x2 and y1 < y2"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Box of the given size centered on `center`.
    pub fn centered(center: PixelPoint, width: f64, height: f64) -> Result<Self> {
        Self::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
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

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn translated(&self, v: PixelVector) -> BoundingBox {
        BoundingBox {
            x1: self.x1 + v.dx,
            y1: self.y1 + v.dy,
            x2: self.x2 + v.dx,
            y2: self.y2 + v.dy,
        }
    }

    pub fn scaled(&self, k: f64) -> BoundingBox {
        BoundingBox {
            x1: self.x1 * k,
            y1: self.y1 * k,
            x2: self.x2 * k,
            y2: self.y2 * k,
        }
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= width && self.y2 <= height
    }

    fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }
}

/// One detector output on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Stream-unique identifier, used to join truth labels.
    pub id: u64,
    pub frame_index: u64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(id: u64, frame_index: u64, bbox: BoundingBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::contract(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            id,
            frame_index,
            bbox,
            confidence,
        })
    }

    pub fn center(&self) -> PixelPoint {
        self.bbox.center()
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Descending confidence, ties broken by smaller `x1`, then smaller `y1`.
pub(crate) fn by_confidence_desc(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.bbox.x1.total_cmp(&b.bbox.x1))
        .then(a.bbox.y1.total_cmp(&b.bbox.y1))
}

/// Greedy non-maximum suppression over the detections of a single frame.
///
/// A detection is kept iff its IoU with every already-kept, higher-ranked
/// detection is at most `iou_threshold`. The output is in ranking order.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::contract(format!("iou threshold {iou_threshold} outside (0, 1]")));
    }
    if let Some(first) = detections.first() {
        if let Some(other) = detections.iter().find(|d| d.frame_index != first.frame_index) {
            return Err(Error::contract(format!(
                "nms input mixes frames {} and {}",
                first.frame_index, other.frame_index
            )));
        }
    }

    let mut ranked = detections.to_vec();
    ranked.sort_by(by_confidence_desc);

    let mut kept: Vec<Detection> = Vec::with_capacity(ranked.len());
    for d in ranked {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    Ok(kept)
}
