//! Review session: upload, calibrate, track, correct, verify, report.
//!
//! Status only moves forward, except that a correction on a reported session
//! drops it back to verified, and recalibration or a tracking-relevant config
//! change drops it back to calibrated (or created) and discards the
//! trajectory. Pure state; persistence and concurrency live in the service.

use serde::{Deserialize, Serialize};

use crate::calibration::ScaleCalibration;
use crate::config::{CalibrationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::formats::DetectionStream;
use crate::geometry::PixelPoint;
use crate::kinematics::SpeedReport;
use crate::pipeline;
use crate::tracker::{FrameContext, PointSource, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Created,
    Calibrated,
    Tracked,
    Verified,
    Reported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionAction {
    Move,
    Delete,
}

/// One user edit of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub seq: u64,
    pub frame_index: u64,
    pub action: CorrectionAction,
    pub old_position: PixelPoint,
    /// Set for moves.
    pub new_position: Option<PixelPoint>,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

/// Applies one correction in place.
pub fn apply_correction(traj: &mut Trajectory, c: &Correction) -> Result<()> {
    let idx = traj
        .points
        .iter()
        .position(|p| p.frame_index == c.frame_index)
        .ok_or_else(|| Error::NotFound(format!("no trajectory point at frame {}", c.frame_index)))?;
    match c.action {
        CorrectionAction::Delete => {
            traj.points.remove(idx);
        }
        CorrectionAction::Move => {
            let to = c
                .new_position
                .ok_or_else(|| Error::contract("move correction without a new position"))?;
            let p = &mut traj.points[idx];
            let delta = p.position.to(&to);
            p.bbox = p.bbox.map(|b| b.translated(delta));
            p.position = to;
            p.source = PointSource::UserCorrected;
        }
    }
    Ok(())
}

/// Rebuilds the corrected trajectory from the raw tracker output.
pub fn replay_corrections(raw: &Trajectory, log: &[Correction]) -> Result<Trajectory> {
    let mut t = raw.clone();
    for c in log {
        apply_correction(&mut t, c)?;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub status: SessionStatus,
    pub stream: DetectionStream,
    pub config: PipelineConfig,
    pub scale: Option<ScaleCalibration>,
    /// Tracker output before any correction.
    pub raw_trajectory: Option<Trajectory>,
    pub trajectory: Option<Trajectory>,
    pub frames: Vec<FrameContext>,
    pub corrections: Vec<Correction>,
    pub report: Option<SpeedReport>,
}

impl Session {
    pub fn new(id: String, stream: DetectionStream, config: PipelineConfig) -> Result<Self> {
        stream.header.meta()?;
        config.validate()?;
        let scale = config.calibration.map(|c| c.compute()).transpose()?;
        let status = if scale.is_some() {
            SessionStatus::Calibrated
        } else {
            SessionStatus::Created
        };
        Ok(Self {
            id,
            status,
            stream,
            config,
            scale,
            raw_trajectory: None,
            trajectory: None,
            frames: Vec::new(),
            corrections: Vec::new(),
            report: None,
        })
    }

    fn discard_tracking(&mut self) {
        self.raw_trajectory = None;
        self.trajectory = None;
        self.frames.clear();
        self.corrections.clear();
        self.report = None;
        self.status = if self.scale.is_some() {
            SessionStatus::Calibrated
        } else {
            SessionStatus::Created
        };
    }

    fn discard_report(&mut self) {
        self.report = None;
        if self.status == SessionStatus::Reported {
            self.status = SessionStatus::Verified;
        }
    }

    fn require_tracked(&self) -> Result<()> {
        if self.status < SessionStatus::Tracked {
            return Err(Error::Conflict(
                format!("session is {:?}, not yet tracked", self.status).to_lowercase(),
            ));
        }
        Ok(())
    }

    /// Overwrites the calibration and invalidates any trajectory.
    pub fn set_calibration(&mut self, cal: CalibrationConfig) -> Result<ScaleCalibration> {
        let scale = cal.compute()?;
        self.config.calibration = Some(cal);
        self.scale = Some(scale);
        self.discard_tracking();
        Ok(scale)
    }

    /// Replaces the config. Changes that affect tracking discard the
    /// trajectory; changes that only affect reporting discard the report.
    pub fn set_config(&mut self, config: PipelineConfig) -> Result<()> {
        config.validate()?;
        let old = self.config;
        self.config = config;
        let tracking_changed = old.calibration != config.calibration
            || old.ingest != config.ingest
            || old.tracker != config.tracker
            || old.kalman != config.kalman;
        if tracking_changed {
            self.scale = config.calibration.map(|c| c.compute()).transpose()?;
            self.discard_tracking();
        } else if old != config {
            self.discard_report();
        }
        Ok(())
    }

    /// Runs ingest and the tracker; discards earlier corrections.
    pub fn track(&mut self) -> Result<&Trajectory> {
        if self.scale.is_none() {
            return Err(Error::CalibrationMissing);
        }
        let ingested = pipeline::ingest(&self.stream, &self.config.ingest)?;
        let out = pipeline::track_stream(&ingested, &self.config)?;
        self.discard_tracking();
        self.raw_trajectory = Some(out.trajectory.clone());
        self.trajectory = Some(out.trajectory);
        self.frames = out.frames;
        self.status = SessionStatus::Tracked;
        Ok(self.trajectory.as_ref().expect("just set"))
    }

    pub fn trajectory(&self) -> Result<&Trajectory> {
        self.require_tracked()?;
        Ok(self.trajectory.as_ref().expect("tracked sessions hold a trajectory"))
    }

    fn correct(
        &mut self,
        frame_index: u64,
        new_position: Option<PixelPoint>,
        timestamp_ms: u64,
    ) -> Result<&Correction> {
        self.require_tracked()?;
        let traj = self.trajectory.as_mut().expect("tracked sessions hold a trajectory");
        let old = traj
            .point_at(frame_index)
            .ok_or_else(|| Error::NotFound(format!("no trajectory point at frame {frame_index}")))?
            .position;
        let c = Correction {
            seq: self.corrections.len() as u64,
            frame_index,
            action: if new_position.is_some() {
                CorrectionAction::Move
            } else {
                CorrectionAction::Delete
            },
            old_position: old,
            new_position,
            timestamp_ms,
        };
        apply_correction(traj, &c)?;
        self.corrections.push(c);
        self.discard_report();
        Ok(self.corrections.last().expect("just pushed"))
    }

    /// Moves the point at `frame_index` to `to`; its box moves with it.
    pub fn move_point(&mut self, frame_index: u64, to: PixelPoint, timestamp_ms: u64) -> Result<&Correction> {
        let meta = self.stream.header.meta()?;
        if !(to.is_finite() && (0.0..=meta.frame_width).contains(&to.x) && (0.0..=meta.frame_height).contains(&to.y)) {
            return Err(Error::Validation {
                line: 0,
                message: format!("point ({}, {}) outside the frame", to.x, to.y),
            });
        }
        self.correct(frame_index, Some(to), timestamp_ms)
    }

    /// Removes the point at `frame_index` from the trajectory.
    pub fn delete_point(&mut self, frame_index: u64, timestamp_ms: u64) -> Result<&Correction> {
        self.correct(frame_index, None, timestamp_ms)
    }

    pub fn verify(&mut self) -> Result<SessionStatus> {
        self.require_tracked()?;
        if self.status == SessionStatus::Tracked {
            self.status = SessionStatus::Verified;
        }
        Ok(self.status)
    }

    /// Computes (or returns the cached) report for the current trajectory.
    pub fn report(&mut self) -> Result<&SpeedReport> {
        self.require_tracked()?;
        if self.status == SessionStatus::Tracked {
            return Err(Error::Conflict("trajectory must be verified before reporting".into()));
        }
        if self.report.is_none() {
            let traj = self.trajectory.as_ref().expect("tracked sessions hold a trajectory");
            self.report = Some(pipeline::report(traj, &self.config)?);
        }
        self.status = SessionStatus::Reported;
        Ok(self.report.as_ref().expect("just set"))
    }

    pub fn frame_context(&self, frame_index: u64) -> Result<&FrameContext> {
        self.require_tracked()?;
        self.frames
            .get(frame_index as usize)
            .ok_or_else(|| Error::NotFound(format!("no frame {frame_index}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::StreamHeader;
    use crate::geometry::{BoundingBox, Detection};

    /// Straight constant-velocity track, 20 px/frame, on a 640x480 frame.
    fn stream() -> DetectionStream {
        let detections = (0..10u64)
            .map(|f| {
                let x = 50.0 + 20.0 * f as f64;
                Detection::new(f, f, BoundingBox::new(x, 100.0, x + 8.0, 108.0).unwrap(), 0.8).unwrap()
            })
            .collect();
        DetectionStream {
            header: StreamHeader {
                width: 640.0,
                height: 480.0,
                fps: 30.0,
                frame_count: 10,
                source: "unit".into(),
            },
            detections,
        }
    }

    fn cal() -> CalibrationConfig {
        CalibrationConfig {
            point_a: PixelPoint::new(0.0, 0.0),
            point_b: PixelPoint::new(600.0, 0.0),
            real_distance: 3.0,
        }
    }

    fn tracked() -> Session {
        let mut s = Session::new("s".into(), stream(), PipelineConfig::default()).unwrap();
        s.set_calibration(cal()).unwrap();
        s.track().unwrap();
        s
    }

    #[test]
    fn happy_path_walks_statuses() {
        let mut s = Session::new("s".into(), stream(), PipelineConfig::default()).unwrap();
        assert_eq!(s.status, SessionStatus::Created);
        assert!(matches!(s.track(), Err(Error::CalibrationMissing)));
        assert_eq!(s.set_calibration(cal()).unwrap().scale_factor, 0.005);
        assert_eq!(s.status, SessionStatus::Calibrated);
        assert_eq!(s.track().unwrap().points.len(), 10);
        assert_eq!(s.status, SessionStatus::Tracked);
        assert!(matches!(s.report(), Err(Error::Conflict(_))));
        s.verify().unwrap();
        let peak = s.report().unwrap().peak.speed_kmh;
        assert!((peak - 20.0 * 0.005 * 30.0 * 3.6).abs() < 1e-6, "{peak}");
        assert_eq!(s.status, SessionStatus::Reported);
    }

    #[test]
    fn edits_need_a_trajectory() {
        let mut s = Session::new("s".into(), stream(), PipelineConfig::default()).unwrap();
        s.set_calibration(cal()).unwrap();
        assert!(matches!(s.delete_point(3, 0), Err(Error::Conflict(_))));
        assert!(matches!(
            s.move_point(3, PixelPoint::new(1.0, 1.0), 0),
            Err(Error::Conflict(_))
        ));
        assert!(matches!(s.frame_context(0), Err(Error::Conflict(_))));
        assert!(matches!(s.verify(), Err(Error::Conflict(_))));
    }

    #[test]
    fn recalibration_discards_trajectory() {
        let mut s = tracked();
        s.delete_point(4, 1).unwrap();
        let second = CalibrationConfig {
            real_distance: 6.0,
            ..cal()
        };
        assert_eq!(s.set_calibration(second).unwrap().scale_factor, 0.01);
        assert_eq!(s.status, SessionStatus::Calibrated);
        assert!(s.trajectory.is_none() && s.corrections.is_empty());
        assert!(matches!(s.trajectory(), Err(Error::Conflict(_))));
    }

    #[test]
    fn correction_returns_reported_to_verified() {
        let mut s = tracked();
        s.verify().unwrap();
        let before = s.report().unwrap().clone();
        let mid = s.trajectory().unwrap().point_at(5).unwrap().position;
        s.move_point(5, PixelPoint::new(mid.x + 10.0, mid.y), 42).unwrap();
        assert_eq!(s.status, SessionStatus::Verified);
        assert!(s.report.is_none());
        let after = s.report().unwrap().clone();
        assert!(after.peak.speed_kmh > before.peak.speed_kmh);
        let p = s.trajectory().unwrap().point_at(5).unwrap();
        assert_eq!(p.source, PointSource::UserCorrected);
        assert_eq!(p.bbox.unwrap().center(), p.position);
    }

    #[test]
    fn moving_an_interior_point_changes_only_its_segments() {
        let mut s = tracked();
        s.verify().unwrap();
        let before = s.report().unwrap().clone();
        let p = s.trajectory().unwrap().point_at(5).unwrap().position;
        s.move_point(5, PixelPoint::new(p.x, p.y + 3.0), 0).unwrap();
        let after = s.report().unwrap().clone();
        for (a, b) in before.samples.iter().zip(&after.samples) {
            let touches = a.from_frame == 5 || a.to_frame == 5;
            assert_eq!(
                a.speed_kmh != b.speed_kmh,
                touches,
                "segment {}-{}",
                a.from_frame,
                a.to_frame
            );
        }
    }

    #[test]
    fn replaying_the_log_reproduces_the_trajectory() {
        let mut s = tracked();
        s.move_point(2, PixelPoint::new(95.0, 110.0), 1).unwrap();
        s.delete_point(7, 2).unwrap();
        s.move_point(2, PixelPoint::new(96.0, 104.0), 3).unwrap();
        s.move_point(8, PixelPoint::new(214.0, 99.0), 4).unwrap();
        let replayed = replay_corrections(s.raw_trajectory.as_ref().unwrap(), &s.corrections).unwrap();
        assert_eq!(&replayed, s.trajectory().unwrap());
        assert_eq!(s.corrections[2].old_position, PixelPoint::new(95.0, 110.0));
    }

    #[test]
    fn invalid_edits() {
        let mut s = tracked();
        assert!(matches!(s.delete_point(99, 0), Err(Error::NotFound(_))));
        assert!(matches!(
            s.move_point(1, PixelPoint::new(-1.0, 10.0), 0),
            Err(Error::Validation { .. })
        ));
        assert!(matches!(
            s.move_point(1, PixelPoint::new(f64::NAN, 10.0), 0),
            Err(Error::Validation { .. })
        ));
        s.delete_point(1, 0).unwrap();
        assert!(matches!(s.delete_point(1, 0), Err(Error::NotFound(_))));
        assert_eq!(s.corrections.len(), 1);
    }

    #[test]
    fn report_only_config_change_keeps_trajectory() {
        let mut s = tracked();
        s.verify().unwrap();
        s.report().unwrap();
        let mut cfg = s.config;
        cfg.measurement_point_mode = crate::kinematics::MeasurementPointMode::Center;
        s.set_config(cfg).unwrap();
        assert_eq!(s.status, SessionStatus::Verified);
        assert!(s.trajectory.is_some());
        cfg.tracker.max_coast_frames = 2;
        s.set_config(cfg).unwrap();
        assert_eq!(s.status, SessionStatus::Calibrated);
        assert!(s.trajectory.is_none());
    }

    #[test]
    fn serde_round_trip() {
        let mut s = tracked();
        s.delete_point(3, 9).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Session = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
