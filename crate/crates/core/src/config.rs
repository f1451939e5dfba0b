//! Pipeline configuration, loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{NetMarker, ScaleCalibration, VideoMeta};
use crate::error::{Error, Result};
use crate::geometry::PixelPoint;
use crate::kalman::KalmanConfig;
use crate::kinematics::MeasurementPointMode;
use crate::tracker::TrackerConfig;

/// Two image points a known distance apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub point_a: PixelPoint,
    pub point_b: PixelPoint,
    /// Meters.
    pub real_distance: f64,
}

impl CalibrationConfig {
    pub fn compute(&self) -> Result<ScaleCalibration> {
        ScaleCalibration::compute(self.point_a, self.point_b, self.real_distance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Inclusive lower bound on detector confidence.
    pub min_confidence: f64,
    pub nms_iou: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.1,
            nms_iou: 0.45,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Config(format!(
                "ingest.min_confidence must lie in [0, 1], got {}",
                self.min_confidence
            )));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config(format!(
                "ingest.nms_iou must lie in [0, 1], got {}",
                self.nms_iou
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net_marker: Option<NetMarker>,
    pub measurement_point_mode: MeasurementPointMode,
    /// Whether coasted points contribute speed samples.
    pub include_coasted: bool,
    pub ingest: IngestConfig,
    pub tracker: TrackerConfig,
    pub kalman: KalmanConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every sub-config. Calibration may be absent here; stages that
    /// need it call [`PipelineConfig::scale_calibration`].
    pub fn validate(&self) -> Result<()> {
        self.ingest.validate()?;
        self.tracker.validate()?;
        self.kalman.validate()?;
        if let Some(c) = &self.calibration {
            c.compute()?;
        }
        Ok(())
    }

    /// The config for the same scene at a resolution scaled by `k`: pixel
    /// positions scale by `k` and the Kalman variances by `k²`.
    pub fn rescaled(&self, k: f64) -> Self {
        let mut out = *self;
        if let Some(c) = &mut out.calibration {
            c.point_a = c.point_a.scaled(k);
            c.point_b = c.point_b.scaled(k);
        }
        if let Some(m) = &mut out.net_marker {
            m.marker_x *= k;
        }
        out.kalman = self.kalman.rescaled(k);
        out
    }

    pub fn scale_calibration(&self) -> Result<ScaleCalibration> {
        self.calibration.ok_or(Error::CalibrationMissing)?.compute()
    }

    /// The net marker, checked against the frame size.
    pub fn net_marker_for(&self, meta: &VideoMeta) -> Result<Option<NetMarker>> {
        self.net_marker.map(|m| m.validate(meta).map(|_| m)).transpose()
    }
}
