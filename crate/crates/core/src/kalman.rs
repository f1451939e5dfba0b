//! Linear Kalman filter with a constant-velocity motion model in pixel space.
//!
//! State is `[x, y, vx, vy]`, velocities in pixels/frame, with a fixed step of
//! one frame. Physical time only enters in the kinematics module.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PixelPoint, PixelVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// Scale of the discrete white-noise-acceleration process noise, px²/frame⁴.
    pub process_noise_scale: f64,
    /// Measurement noise variance, px².
    pub measurement_noise: f64,
    /// Initial position variance, px².
    pub initial_position_variance: f64,
    /// Initial velocity variance, (px/frame)².
    pub initial_velocity_variance: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_noise_scale: 10.0,
            measurement_noise: 25.0,
            initial_position_variance: 25.0,
            initial_velocity_variance: 1e4,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("process_noise_scale", self.process_noise_scale),
            ("measurement_noise", self.measurement_noise),
            ("initial_position_variance", self.initial_position_variance),
            ("initial_velocity_variance", self.initial_velocity_variance),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("kalman.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Config expressed for coordinates scaled by `k` (all terms are px²).
    pub fn rescaled(&self, k: f64) -> KalmanConfig {
        let k2 = k * k;
        KalmanConfig {
            process_noise_scale: self.process_noise_scale * k2,
            measurement_noise: self.measurement_noise * k2,
            initial_position_variance: self.initial_position_variance * k2,
            initial_velocity_variance: self.initial_velocity_variance * k2,
        }
    }

    fn process_noise(&self) -> Matrix4<f64> {
        let q = self.process_noise_scale;
        #[rustfmt::skip]
        let m = Matrix4::new(
            0.25, 0.0,  0.5, 0.0,
            0.0,  0.25, 0.0, 0.5,
            0.5,  0.0,  1.0, 0.0,
            0.0,  0.5,  0.0, 1.0,
        );
        m * q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

#[rustfmt::skip]
fn transition() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )
}

#[rustfmt::skip]
fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    )
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

impl KalmanState {
    /// Starts a track at `measurement` with zero velocity.
    pub fn init(measurement: PixelPoint, config: &KalmanConfig) -> KalmanState {
        let pv = config.initial_position_variance;
        let vv = config.initial_velocity_variance;
        KalmanState {
            mean: Vector4::new(measurement.x, measurement.y, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(pv, pv, vv, vv)),
        }
    }

    pub fn position(&self) -> PixelPoint {
        PixelPoint::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> PixelVector {
        PixelVector::new(self.mean[2], self.mean[3])
    }

    /// Advances one frame: `x' = F x`, `P' = F P Fᵀ + Q`.
    pub fn predict(&self, config: &KalmanConfig) -> KalmanState {
        let f = transition();
        KalmanState {
            mean: f * self.mean,
            covariance: symmetrize(f * self.covariance * f.transpose() + config.process_noise()),
        }
    }

    /// Covariance of the position innovation, `H P Hᵀ + R`.
    pub fn innovation_covariance(&self, config: &KalmanConfig) -> Matrix2<f64> {
        let h = observation();
        h * self.covariance * h.transpose() + Matrix2::identity() * config.measurement_noise
    }

    /// Corrects the (already predicted) state with a position measurement.
    ///
    /// Uses the Joseph form so the covariance stays symmetric PSD.
    pub fn update(&self, measurement: PixelPoint, config: &KalmanConfig) -> Result<KalmanState> {
        if !measurement.is_finite() {
            return Err(Error::contract(format!(
                "non-finite measurement ({}, {})",
                measurement.x, measurement.y
            )));
        }
        let h = observation();
        let r = Matrix2::identity() * config.measurement_noise;
        let z = Vector2::new(measurement.x, measurement.y);

        let innovation = z - h * self.mean;
        let s = self.innovation_covariance(config);
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::contract("singular innovation covariance"))?;
        let gain = self.covariance * h.transpose() * s_inv;

        let i_kh = Matrix4::identity() - gain * h;
        let covariance = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        Ok(KalmanState {
            mean: self.mean + gain * innovation,
            covariance: symmetrize(covariance),
        })
    }
}

/// Free-function form of [`KalmanState::init`].
pub fn kalman_init(first_measurement: PixelPoint, config: &KalmanConfig) -> KalmanState {
    KalmanState::init(first_measurement, config)
}

pub fn kalman_predict(state: &KalmanState, config: &KalmanConfig) -> KalmanState {
    state.predict(config)
}

pub fn kalman_update(state: &KalmanState, measurement: PixelPoint, config: &KalmanConfig) -> Result<KalmanState> {
    state.update(measurement, config)
}
