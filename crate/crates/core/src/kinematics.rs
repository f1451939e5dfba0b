//! Per-segment speeds, peak speed and at-marker speed from a trajectory.
//!
//! Speeds are measured either between box centers or between leading-edge
//! points: the point where the ray from the box center along the direction of
//! travel leaves the box. A motion-blurred detection is stretched backwards
//! along its path, so the leading edge tracks the object more faithfully than
//! the center does.

use serde::{Deserialize, Serialize};

use crate::calibration::{NetMarker, ScaleCalibration, VideoMeta, MPS_TO_KMH};
use crate::error::{Error, Result};
use crate::geometry::{PixelPoint, PixelVector};
use crate::tracker::{PointSource, TrackPoint, Trajectory};

/// Velocities shorter than this (px/frame) carry no usable direction.
pub const MIN_DIRECTION_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementPointMode {
    Center,
    #[default]
    LeadingEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub from_frame: u64,
    pub to_frame: u64,
    pub speed_kmh: f64,
    pub from_point: PixelPoint,
    pub to_point: PixelPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub samples: Vec<SpeedSample>,
    pub peak: SpeedSample,
    pub at_marker: Option<SpeedSample>,
    pub measurement_point_mode: MeasurementPointMode,
}

/// Foremost point of the point's box along `direction`.
///
/// Falls back to the box center for a (near) zero direction, and to the
/// point's position when it has no box.
pub fn leading_edge_point(point: &TrackPoint, direction: PixelVector) -> PixelPoint {
    let Some(bbox) = point.bbox else {
        return point.position;
    };
    let center = bbox.center();
    let Some(u) = direction.unit(MIN_DIRECTION_NORM) else {
        return center;
    };
    let half_w = bbox.width() / 2.0;
    let half_h = bbox.height() / 2.0;
    let tx = if u.dx != 0.0 {
        half_w / u.dx.abs()
    } else {
        f64::INFINITY
    };
    let ty = if u.dy != 0.0 {
        half_h / u.dy.abs()
    } else {
        f64::INFINITY
    };
    center.offset(u.scaled(tx.min(ty)))
}

/// `|p_j - p_i| * S_f / (frames_elapsed * t_frame) * 3.6`.
pub fn segment_speed(
    p_i: PixelPoint,
    p_j: PixelPoint,
    frames_elapsed: u64,
    cal: &ScaleCalibration,
    meta: &VideoMeta,
) -> f64 {
    debug_assert!(frames_elapsed >= 1);
    let seconds = frames_elapsed as f64 * meta.frame_time();
    p_i.distance(&p_j) * cal.scale_factor / seconds * MPS_TO_KMH
}

fn usable(p: &TrackPoint, include_coasted: bool) -> bool {
    include_coasted || p.source != PointSource::Coasted
}

/// Direction of travel at `points[i]`: the Kalman velocity when available,
/// otherwise the chord through the neighbouring positions.
fn travel_direction(points: &[&TrackPoint], i: usize) -> Option<PixelVector> {
    if let Some(v) = points[i].velocity.and_then(|v| v.unit(MIN_DIRECTION_NORM)) {
        return Some(v);
    }
    let before = i.checked_sub(1).map(|j| points[j].position);
    let after = points.get(i + 1).map(|p| p.position);
    let here = points[i].position;
    let chord = match (before, after) {
        (Some(b), Some(a)) => b.to(&a),
        (Some(b), None) => b.to(&here),
        (None, Some(a)) => here.to(&a),
        (None, None) => return None,
    };
    chord.unit(MIN_DIRECTION_NORM)
}

/// The point speeds are measured from, per `mode`.
pub fn measurement_points(points: &[&TrackPoint], mode: MeasurementPointMode) -> Vec<PixelPoint> {
    (0..points.len())
        .map(|i| {
            let p = points[i];
            match (mode, p.bbox) {
                (MeasurementPointMode::Center, _) | (_, None) => p.position,
                (MeasurementPointMode::LeadingEdge, Some(b)) => match travel_direction(points, i) {
                    Some(dir) => leading_edge_point(p, dir),
                    None => b.center(),
                },
            }
        })
        .collect()
}

pub fn speed_report(
    traj: &Trajectory,
    marker: Option<&NetMarker>,
    mode: MeasurementPointMode,
    include_coasted: bool,
) -> Result<SpeedReport> {
    traj.validate()?;
    let points: Vec<&TrackPoint> = traj.points.iter().filter(|p| usable(p, include_coasted)).collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }

    let measured = measurement_points(&points, mode);
    let samples: Vec<SpeedSample> = points
        .windows(2)
        .zip(measured.windows(2))
        .map(|(p, m)| {
            let elapsed = p[1].frame_index - p[0].frame_index;
            SpeedSample {
                from_frame: p[0].frame_index,
                to_frame: p[1].frame_index,
                speed_kmh: segment_speed(m[0], m[1], elapsed, &traj.calibration, &traj.meta),
                from_point: m[0],
                to_point: m[1],
            }
        })
        .collect();

    let peak = samples
        .iter()
        .copied()
        .reduce(|best, s| if s.speed_kmh > best.speed_kmh { s } else { best })
        .expect("at least one sample");
    let at_marker = marker.and_then(|mk| {
        samples
            .iter()
            .copied()
            .find(|s| mk.crossed_by(s.from_point.x, s.to_point.x))
    });

    Ok(SpeedReport {
        samples,
        peak,
        at_marker,
        measurement_point_mode: mode,
    })
}
