//! Command-line surface. Config flags mirror the TOML field paths, with the
//! section name as prefix (`tracker.max_coast_frames` is
//! `--tracker-max-coast-frames`); flags override the file given by `--config`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use smashspeed_core::calibration::TravelSide;
use smashspeed_core::config::{CalibrationConfig, PipelineConfig};
use smashspeed_core::geometry::PixelPoint;
use smashspeed_core::kinematics::MeasurementPointMode;
use smashspeed_core::simulator::Scenario;
use smashspeed_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "smashspeed", version, about = "Smash-speed analysis from detection streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a smash and write a detection stream, truth labels and the ground-truth flight.
    Simulate(SimulateArgs),
    /// Track the shuttlecock through a detection stream.
    Track(TrackArgs),
    /// Compute segment, peak and at-marker speeds from a trajectory.
    Speed(SpeedArgs),
    /// Summarize errors between reference and candidate speeds.
    Eval(EvalArgs),
    /// Recompute the error summaries of the bundled radar comparison table.
    ReportTable1(ReportTable1Args),
    /// Serve the /v1 session API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Side {
    LeftToRight,
    RightToLeft,
}

impl From<Side> for TravelSide {
    fn from(s: Side) -> Self {
        match s {
            Side::LeftToRight => TravelSide::LeftToRight,
            Side::RightToLeft => TravelSide::RightToLeft,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PointMode {
    Center,
    LeadingEdge,
}

impl From<PointMode> for MeasurementPointMode {
    fn from(m: PointMode) -> Self {
        match m {
            PointMode::Center => MeasurementPointMode::Center,
            PointMode::LeadingEdge => MeasurementPointMode::LeadingEdge,
        }
    }
}

fn parse_point(s: &str) -> std::result::Result<PixelPoint, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(PixelPoint::new(num(x)?, num(y)?))
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

/// Pipeline config file plus per-field overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Pipeline config file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// First calibration point, as X,Y pixels.
    #[arg(long, value_parser = parse_point)]
    pub calibration_point_a: Option<PixelPoint>,
    /// Second calibration point, as X,Y pixels.
    #[arg(long, value_parser = parse_point)]
    pub calibration_point_b: Option<PixelPoint>,
    /// Real distance between the calibration points, meters.
    #[arg(long)]
    pub calibration_real_distance: Option<f64>,

    /// Net marker x position, pixels.
    #[arg(long)]
    pub net_marker_marker_x: Option<f64>,
    #[arg(long, value_enum)]
    pub net_marker_side: Option<Side>,

    #[arg(long, value_enum)]
    pub measurement_point_mode: Option<PointMode>,
    #[arg(long)]
    pub include_coasted: Option<bool>,

    #[arg(long)]
    pub ingest_min_confidence: Option<f64>,
    #[arg(long)]
    pub ingest_nms_iou: Option<f64>,

    #[arg(long)]
    pub tracker_min_speed_kmh: Option<f64>,
    #[arg(long)]
    pub tracker_max_speed_kmh: Option<f64>,
    #[arg(long)]
    pub tracker_confidence_weight: Option<f64>,
    #[arg(long)]
    pub tracker_proximity_weight: Option<f64>,
    #[arg(long)]
    pub tracker_proximity_norm_divisor: Option<f64>,
    #[arg(long)]
    pub tracker_max_coast_frames: Option<u32>,
    #[arg(long)]
    pub tracker_min_confidence: Option<f64>,
    #[arg(long)]
    pub tracker_static_suppression: Option<bool>,
    #[arg(long)]
    pub tracker_association_width_fraction: Option<f64>,
    #[arg(long)]
    pub tracker_association_sigmas: Option<f64>,
    #[arg(long)]
    pub tracker_seed_search_frames: Option<u32>,

    #[arg(long)]
    pub kalman_process_noise_scale: Option<f64>,
    #[arg(long)]
    pub kalman_measurement_noise: Option<f64>,
    #[arg(long)]
    pub kalman_initial_position_variance: Option<f64>,
    #[arg(long)]
    pub kalman_initial_velocity_variance: Option<f64>,
}

impl PipelineArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };

        let cal_flags = (
            self.calibration_point_a,
            self.calibration_point_b,
            self.calibration_real_distance,
        );
        if cal_flags != (None, None, None) {
            let base = cfg.calibration;
            let pick =
                |flag: Option<PixelPoint>, from: fn(&CalibrationConfig) -> PixelPoint| flag.or(base.as_ref().map(from));
            match (
                pick(cal_flags.0, |c| c.point_a),
                pick(cal_flags.1, |c| c.point_b),
                cal_flags.2.or(base.map(|c| c.real_distance)),
            ) {
                (Some(point_a), Some(point_b), Some(real_distance)) => {
                    cfg.calibration = Some(CalibrationConfig {
                        point_a,
                        point_b,
                        real_distance,
                    })
                }
                _ => {
                    return Err(Error::Config(
                        "calibration needs point_a, point_b and real_distance".into(),
                    ))
                }
            }
        }

        if self.net_marker_marker_x.is_some() || self.net_marker_side.is_some() {
            let mut marker = cfg.net_marker.unwrap_or(smashspeed_core::calibration::NetMarker {
                marker_x: f64::NAN,
                side: TravelSide::LeftToRight,
            });
            set(&mut marker.marker_x, self.net_marker_marker_x);
            set(&mut marker.side, self.net_marker_side.map(Into::into));
            if marker.marker_x.is_nan() {
                return Err(Error::Config("net_marker needs marker_x".into()));
            }
            cfg.net_marker = Some(marker);
        }

        set(
            &mut cfg.measurement_point_mode,
            self.measurement_point_mode.map(Into::into),
        );
        set(&mut cfg.include_coasted, self.include_coasted);

        set(&mut cfg.ingest.min_confidence, self.ingest_min_confidence);
        set(&mut cfg.ingest.nms_iou, self.ingest_nms_iou);

        let t = &mut cfg.tracker;
        set(&mut t.min_speed_kmh, self.tracker_min_speed_kmh);
        set(&mut t.max_speed_kmh, self.tracker_max_speed_kmh);
        set(&mut t.confidence_weight, self.tracker_confidence_weight);
        set(&mut t.proximity_weight, self.tracker_proximity_weight);
        set(&mut t.proximity_norm_divisor, self.tracker_proximity_norm_divisor);
        set(&mut t.max_coast_frames, self.tracker_max_coast_frames);
        set(&mut t.min_confidence, self.tracker_min_confidence);
        set(&mut t.static_suppression, self.tracker_static_suppression);
        set(
            &mut t.association_width_fraction,
            self.tracker_association_width_fraction,
        );
        set(&mut t.association_sigmas, self.tracker_association_sigmas);
        set(&mut t.seed_search_frames, self.tracker_seed_search_frames);

        let k = &mut cfg.kalman;
        set(&mut k.process_noise_scale, self.kalman_process_noise_scale);
        set(&mut k.measurement_noise, self.kalman_measurement_noise);
        set(&mut k.initial_position_variance, self.kalman_initial_position_variance);
        set(&mut k.initial_velocity_variance, self.kalman_initial_velocity_variance);

        cfg.validate()?;
        Ok(cfg)
    }
}

/// Scenario file plus per-field overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML with `flight`, `camera`, `corruption` sections).
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub flight_launch_speed: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub flight_launch_angle_deg: Option<f64>,
    #[arg(long)]
    pub flight_launch_height: Option<f64>,
    /// `inf` disables drag.
    #[arg(long)]
    pub flight_terminal_speed: Option<f64>,
    #[arg(long)]
    pub flight_gravity: Option<f64>,
    #[arg(long)]
    pub flight_duration: Option<f64>,
    #[arg(long)]
    pub flight_integration_step: Option<f64>,

    #[arg(long)]
    pub camera_meta_frame_width: Option<f64>,
    #[arg(long)]
    pub camera_meta_frame_height: Option<f64>,
    #[arg(long)]
    pub camera_meta_fps: Option<f64>,
    #[arg(long)]
    pub camera_meters_per_pixel: Option<f64>,
    #[arg(long, value_parser = parse_point)]
    pub camera_origin: Option<PixelPoint>,
    #[arg(long, value_enum)]
    pub camera_travel: Option<Side>,

    #[arg(long)]
    pub corruption_pixel_noise_sigma: Option<f64>,
    #[arg(long)]
    pub corruption_dropout_probability: Option<f64>,
    #[arg(long)]
    pub corruption_clutter_rate: Option<f64>,
    #[arg(long)]
    pub corruption_clutter_static_fraction: Option<f64>,
    #[arg(long)]
    pub corruption_blur_elongation_gain: Option<f64>,
    #[arg(long)]
    pub corruption_base_box_size: Option<f64>,
    #[arg(long)]
    pub corruption_rng_seed: Option<u64>,

    /// Net distance from impact, meters.
    #[arg(long)]
    pub net_distance: Option<f64>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<Scenario> {
        let mut sc = match &self.config {
            Some(path) => load_scenario(path)?,
            None => Scenario::default(),
        };
        let f = &mut sc.flight;
        set(&mut f.launch_speed, self.flight_launch_speed);
        set(&mut f.launch_angle_deg, self.flight_launch_angle_deg);
        set(&mut f.launch_height, self.flight_launch_height);
        set(&mut f.terminal_speed, self.flight_terminal_speed);
        set(&mut f.gravity, self.flight_gravity);
        set(&mut f.duration, self.flight_duration);
        set(&mut f.integration_step, self.flight_integration_step);

        let c = &mut sc.camera;
        set(&mut c.meta.frame_width, self.camera_meta_frame_width);
        set(&mut c.meta.frame_height, self.camera_meta_frame_height);
        set(&mut c.meta.fps, self.camera_meta_fps);
        set(&mut c.meters_per_pixel, self.camera_meters_per_pixel);
        set(&mut c.origin, self.camera_origin);
        set(&mut c.travel, self.camera_travel.map(Into::into));

        let k = &mut sc.corruption;
        set(&mut k.pixel_noise_sigma, self.corruption_pixel_noise_sigma);
        set(&mut k.dropout_probability, self.corruption_dropout_probability);
        set(&mut k.clutter_rate, self.corruption_clutter_rate);
        set(&mut k.clutter_static_fraction, self.corruption_clutter_static_fraction);
        set(&mut k.blur_elongation_gain, self.corruption_blur_elongation_gain);
        set(&mut k.base_box_size, self.corruption_base_box_size);
        set(&mut k.rng_seed, self.corruption_rng_seed);

        set(&mut sc.net_distance, self.net_distance);
        Ok(sc)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Directory for stream.jsonl, truth.jsonl, flight.jsonl and config.toml.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Detection stream file.
    #[arg(long)]
    pub stream: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Trajectory file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpeedArgs {
    /// Trajectory file.
    #[arg(long)]
    pub trajectory: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Speed report file to write; the table goes to stdout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Paired-speeds file.
    #[arg(long, conflicts_with_all = ["report", "flight"])]
    pub pairs: Option<PathBuf>,
    /// Speed report file; pair each with a `--flight`, in order.
    #[arg(long)]
    pub report: Vec<PathBuf>,
    /// Ground-truth flight file.
    #[arg(long)]
    pub flight: Vec<PathBuf>,
    /// Eval config file (TOML); accepted for uniformity, currently has no fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Error summary file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportTable1Args {
    /// Accepted for uniformity, currently has no fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the summaries as an error summary file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Defaults for new sessions.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where sessions are stored.
    #[arg(long, default_value = "smashspeed-data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "SMASHSPEED_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}
