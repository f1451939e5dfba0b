//! Error metrics between paired speed series, the bundled field-trial table,
//! and simulator-driven end-to-end accuracy runs.

use serde::{Deserialize, Serialize};

use crate::calibration::NetMarker;
use crate::calibration::MPS_TO_KMH;
use crate::config::{CalibrationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::formats::DetectionStream;
use crate::geometry::PixelPoint;
use crate::kinematics::SpeedReport;
use crate::pipeline::{ingest, report, track_stream};
use crate::simulator::{Scenario, SyntheticStream, TruthClass};
use crate::tracker::FrameContext;

/// One reference/candidate pair, km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub label: String,
    pub reference_kmh: f64,
    pub candidate_kmh: f64,
}

/// Non-empty list of trials with finite, non-negative speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSpeeds {
    trials: Vec<Trial>,
}

impl PairedSpeeds {
    pub fn new(trials: Vec<Trial>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::contract("paired speeds need at least one trial"));
        }
        for t in &trials {
            for v in [t.reference_kmh, t.candidate_kmh] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::contract(format!("trial {:?} has invalid speed {v}", t.label)));
                }
            }
        }
        Ok(Self { trials })
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mae_kmh: f64,
    pub rmse_kmh: f64,
    /// Mean of `candidate - reference`.
    pub mean_signed_error_kmh: f64,
    pub n: usize,
}

/// An [`ErrorSummary`] tagged with the comparison it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSummary {
    pub name: String,
    #[serde(flatten)]
    pub summary: ErrorSummary,
}

pub fn error_summary(pairs: &PairedSpeeds) -> ErrorSummary {
    let n = pairs.trials.len();
    let (mut abs, mut sq, mut signed) = (0.0, 0.0, 0.0);
    for t in &pairs.trials {
        let e = t.candidate_kmh - t.reference_kmh;
        abs += e.abs();
        sq += e * e;
        signed += e;
    }
    let nf = n as f64;
    ErrorSummary {
        mae_kmh: abs / nf,
        rmse_kmh: (sq / nf).sqrt(),
        mean_signed_error_kmh: signed / nf,
        n,
    }
}

// ---------------------------------------------------------------------------
// Field-trial table

const TABLE1_CSV: &str = include_str!("../fixtures/table1.csv");

/// One row of the published field trial: radar gun reading and the two
/// video-based readings for the same smash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub trial: u32,
    pub radar_kmh: f64,
    pub peak_kmh: f64,
    pub at_net_kmh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table1Column {
    Peak,
    AtNet,
}

impl Table1Column {
    pub fn name(&self) -> &'static str {
        match self {
            Table1Column::Peak => "peak_vs_radar",
            Table1Column::AtNet => "at_net_vs_radar",
        }
    }
}

/// The bundled rows, in trial order.
pub fn table1() -> Vec<Table1Row> {
    csv::Reader::from_reader(TABLE1_CSV.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .expect("bundled table parses")
}

/// Radar as reference, the chosen column as candidate.
pub fn table1_pairs(column: Table1Column) -> PairedSpeeds {
    let trials = table1()
        .into_iter()
        .map(|r| Trial {
            label: format!("trial-{}", r.trial),
            reference_kmh: r.radar_kmh,
            candidate_kmh: match column {
                Table1Column::Peak => r.peak_kmh,
                Table1Column::AtNet => r.at_net_kmh,
            },
        })
        .collect();
    PairedSpeeds::new(trials).expect("bundled table is valid")
}

pub fn table1_summaries() -> Vec<NamedSummary> {
    [Table1Column::Peak, Table1Column::AtNet]
        .into_iter()
        .map(|c| NamedSummary {
            name: c.name().to_string(),
            summary: error_summary(&table1_pairs(c)),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Simulator runs

/// Fills in what the scenario knows and `base` leaves open: a calibration
/// derived from the camera scale and a net marker at `net_distance`.
pub fn scenario_pipeline_config(scenario: &Scenario, base: &PipelineConfig) -> PipelineConfig {
    let cam = &scenario.camera;
    let mut cfg = *base;
    if cfg.calibration.is_none() {
        let span = 500.0;
        cfg.calibration = Some(CalibrationConfig {
            point_a: cam.origin,
            point_b: PixelPoint::new(cam.origin.x + span, cam.origin.y),
            real_distance: span * cam.meters_per_pixel,
        });
    }
    if cfg.net_marker.is_none() && scenario.net_distance > 0.0 {
        cfg.net_marker = Some(NetMarker {
            marker_x: cam.pixel_x(scenario.net_distance),
            side: cam.travel,
        });
    }
    cfg
}

/// How often the tracker picked the true detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelectionStats {
    /// Frames where a true detection survived ingest.
    pub truth_frames: usize,
    /// Of those, frames where the tracker selected it.
    pub truth_selected: usize,
    pub seed_frame: Option<u64>,
    /// Frames after the seed on which a persistent clutter box was selected.
    pub static_selected_after_seed: usize,
    /// Frames, seed included, on which any non-true detection was selected.
    pub false_selected: usize,
}

impl SelectionStats {
    pub fn truth_rate(&self) -> f64 {
        if self.truth_frames == 0 {
            return 0.0;
        }
        self.truth_selected as f64 / self.truth_frames as f64
    }
}

pub fn selection_stats(
    stream: &SyntheticStream,
    ingested_frames: &[Vec<crate::geometry::Detection>],
    contexts: &[FrameContext],
) -> SelectionStats {
    let mut stats = SelectionStats::default();
    let label = |id: u64| stream.label_of(id);
    for (frame, ctx) in ingested_frames.iter().zip(contexts) {
        let truth = frame
            .iter()
            .find(|d| label(d.id).is_some_and(|l| l.label == TruthClass::True));
        let selected = ctx.selected_detection;
        if selected.is_some_and(|id| label(id).is_none_or(|l| l.label != TruthClass::True)) {
            stats.false_selected += 1;
        }
        if let Some(t) = truth {
            stats.truth_frames += 1;
            if selected == Some(t.id) {
                stats.truth_selected += 1;
            }
        }
        match (stats.seed_frame, selected) {
            (None, Some(_)) => stats.seed_frame = Some(ctx.frame_index),
            (Some(_), Some(id)) if label(id).is_some_and(|l| l.persistent) => {
                stats.static_selected_after_seed += 1;
            }
            _ => {}
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEnd {
    pub reported_peak_kmh: f64,
    /// Largest instantaneous speed of the simulated flight.
    pub ground_truth_peak_kmh: f64,
    /// Largest chord speed between consecutive true frame positions.
    pub frame_sampled_peak_kmh: f64,
    /// `|reported - ground_truth| / ground_truth`.
    pub relative_error: f64,
    /// `|reported - frame_sampled| / frame_sampled`.
    pub frame_sampled_relative_error: f64,
    pub report: SpeedReport,
    pub selection: SelectionStats,
}

/// Simulates the scenario, corrupts it, runs the full pipeline on the
/// resulting stream and compares the reported peak with ground truth.
pub fn end_to_end_accuracy(scenario: &Scenario, base: &PipelineConfig) -> Result<EndToEnd> {
    let cfg = scenario_pipeline_config(scenario, base);
    cfg.validate()?;
    let (flight, synthetic) = scenario.run()?;
    let stream = DetectionStream::from_synthetic(&synthetic, "simulator");
    let ingested = ingest(&stream, &cfg.ingest)?;
    let output = track_stream(&ingested, &cfg)?;
    let report = report(&output.trajectory, &cfg)?;

    let reported = report.peak.speed_kmh;
    let gt = flight.peak_speed() * MPS_TO_KMH;
    let sampled = flight.frame_sampled_peak_speed() * MPS_TO_KMH;
    Ok(EndToEnd {
        reported_peak_kmh: reported,
        ground_truth_peak_kmh: gt,
        frame_sampled_peak_kmh: sampled,
        relative_error: (reported - gt).abs() / gt,
        frame_sampled_relative_error: (reported - sampled).abs() / sampled,
        selection: selection_stats(&synthetic, &ingested.frames, &output.frames),
        report,
    })
}
