//! Spatiotemporal scaling: video timing plus the meters-per-pixel factor
//! derived from two reference points a known distance apart.
//!
//! The reference line must lie in the plane of the shuttlecock's flight (same
//! depth as the point of impact). That is an operator requirement; nothing
//! here corrects for perspective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PixelPoint;

/// Meters/second to kilometers/hour.
pub const MPS_TO_KMH: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub frame_width: f64,
    pub frame_height: f64,
    pub fps: f64,
}

impl VideoMeta {
    pub fn new(frame_width: f64, frame_height: f64, fps: f64) -> Result<Self> {
        let meta = Self {
            frame_width,
            frame_height,
            fps,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.frame_width) && ok(self.frame_height) && ok(self.fps)) {
            return Err(Error::contract(format!(
                "video meta requires positive width, height and fps, got {}x{} @ {}",
                self.frame_width, self.frame_height, self.fps
            )));
        }
        Ok(())
    }

    /// Seconds per frame.
    pub fn frame_time(&self) -> f64 {
        1.0 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    pub point_a: PixelPoint,
    pub point_b: PixelPoint,
    /// Real-world length of the reference segment, meters.
    pub real_distance: f64,
    /// Pixel length of the reference segment.
    pub pixel_distance: f64,
    /// Meters per pixel.
    pub scale_factor: f64,
}

impl ScaleCalibration {
    /// Scale factor `real_distance / pixel_distance` from two reference points.
    pub fn compute(point_a: PixelPoint, point_b: PixelPoint, real_distance: f64) -> Result<Self> {
        if !(real_distance.is_finite() && real_distance > 0.0) {
            return Err(Error::contract(format!(
                "real distance must be positive, got {real_distance}"
            )));
        }
        if !(point_a.is_finite() && point_b.is_finite()) {
            return Err(Error::contract("reference points must be finite"));
        }
        let pixel_distance = point_a.distance(&point_b);
        if pixel_distance <= 0.0 {
            return Err(Error::DegenerateCalibration);
        }
        Ok(Self {
            point_a,
            point_b,
            real_distance,
            pixel_distance,
            scale_factor: real_distance / pixel_distance,
        })
    }

    /// km/h implied by a displacement of one pixel per frame.
    pub fn kmh_per_pixel_step(&self, meta: &VideoMeta) -> f64 {
        kmh_per_pixel_step(self, meta)
    }
}

/// Implied speed in km/h of one pixel of displacement per frame:
/// `S_f * fps * 3.6`.
pub fn kmh_per_pixel_step(cal: &ScaleCalibration, meta: &VideoMeta) -> f64 {
    cal.scale_factor * meta.fps * MPS_TO_KMH
}

/// Horizontal direction of travel of the smash in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelSide {
    LeftToRight,
    RightToLeft,
}

/// Vertical line at the net's horizontal position, where a radar reading
/// would be taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetMarker {
    pub marker_x: f64,
    pub side: TravelSide,
}

impl NetMarker {
    pub fn new(marker_x: f64, side: TravelSide, meta: &VideoMeta) -> Result<Self> {
        let marker = Self { marker_x, side };
        marker.validate(meta)?;
        Ok(marker)
    }

    pub fn validate(&self, meta: &VideoMeta) -> Result<()> {
        if !(0.0..=meta.frame_width).contains(&self.marker_x) {
            return Err(Error::contract(format!(
                "net marker x {} outside [0, {}]",
                self.marker_x, meta.frame_width
            )));
        }
        Ok(())
    }

    /// Whether the segment `from_x -> to_x` crosses the marker in the travel
    /// direction (endpoints inclusive).
    pub fn crossed_by(&self, from_x: f64, to_x: f64) -> bool {
        match self.side {
            TravelSide::LeftToRight => from_x <= self.marker_x && self.marker_x <= to_x,
            TravelSide::RightToLeft => to_x <= self.marker_x && self.marker_x <= from_x,
        }
    }
}
