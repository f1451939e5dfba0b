//! Shuttlecock smash-speed estimation from per-frame object detections.
//!
//! The pipeline runs ingest (confidence floor and NMS), a single-object
//! tracker that gates candidates by implied speed and scores them against a
//! constant-velocity Kalman prediction, then converts the trajectory into
//! per-segment speeds using a two-point scale calibration and the frame rate.
//! A drag-aware flight simulator and an evaluation kit provide ground truth.

pub mod calibration;
pub mod config;
pub mod error;
pub mod evalkit;
pub mod formats;
pub mod geometry;
pub mod kalman;
pub mod kinematics;
pub mod pipeline;
pub mod session;
pub mod simulator;
pub mod tracker;

pub use error::{Error, Result};
