//! The shared path from a detection stream to a speed report. The CLI, the
//! session service and the evaluation harness all go through these calls.

use crate::calibration::VideoMeta;
use crate::config::{IngestConfig, PipelineConfig};
use crate::error::Result;
use crate::formats::DetectionStream;
use crate::geometry::{nms, Detection};
use crate::kinematics::{speed_report, SpeedReport};
use crate::tracker::{track_with_context, TrackOutput, Trajectory};

/// Per-frame detection lists ready for the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub meta: VideoMeta,
    /// `frames[i]` holds the surviving detections of frame `i`, in
    /// descending confidence order.
    pub frames: Vec<Vec<Detection>>,
}

/// Drops detections below `min_confidence` (inclusive bound), then applies
/// NMS per frame.
pub fn ingest(stream: &DetectionStream, cfg: &IngestConfig) -> Result<Ingested> {
    cfg.validate()?;
    let meta = stream.header.meta()?;
    let last = stream.detections.last().map_or(0, |d| d.frame_index + 1);
    let frame_count = stream.header.frame_count.max(last) as usize;

    let mut grouped: Vec<Vec<Detection>> = vec![Vec::new(); frame_count];
    for d in &stream.detections {
        if d.confidence >= cfg.min_confidence {
            grouped[d.frame_index as usize].push(*d);
        }
    }
    let frames = grouped
        .iter()
        .map(|f| nms(f, cfg.nms_iou))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ingested { meta, frames })
}

pub fn track_stream(ingested: &Ingested, cfg: &PipelineConfig) -> Result<TrackOutput> {
    let cal = cfg.scale_calibration()?;
    track_with_context(&ingested.frames, &cal, &ingested.meta, &cfg.kalman, &cfg.tracker)
}

/// Speeds use the config's calibration, which replaces the one stored with
/// the trajectory.
pub fn report(trajectory: &Trajectory, cfg: &PipelineConfig) -> Result<SpeedReport> {
    let calibration = cfg.scale_calibration()?;
    let marker = cfg.net_marker_for(&trajectory.meta)?;
    let recalibrated;
    let trajectory = if trajectory.calibration == calibration {
        trajectory
    } else {
        recalibrated = Trajectory {
            calibration,
            ..trajectory.clone()
        };
        &recalibrated
    };
    speed_report(
        trajectory,
        marker.as_ref(),
        cfg.measurement_point_mode,
        cfg.include_coasted,
    )
}

/// Full run: ingest, track, report.
pub fn run(stream: &DetectionStream, cfg: &PipelineConfig) -> Result<(TrackOutput, SpeedReport)> {
    cfg.validate()?;
    cfg.scale_calibration()?;
    let ingested = ingest(stream, &cfg.ingest)?;
    let output = track_stream(&ingested, cfg)?;
    let report = report(&output.trajectory, cfg)?;
    Ok((output, report))
}
