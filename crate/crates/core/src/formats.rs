//! Line-delimited JSON file formats.
//!
//! Every file starts with a header object carrying `format` and `version`,
//! followed by one record object per line. Field order is fixed by the
//! struct definitions below and documented in `docs/formats.md`. Floats are
//! written in shortest round-trip form, so read -> write is byte-stable.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{ScaleCalibration, VideoMeta};
use crate::error::{Error, Result};
use crate::evalkit::{NamedSummary, Trial};
use crate::geometry::{BoundingBox, Detection};
use crate::kinematics::{MeasurementPointMode, SpeedReport, SpeedSample};
use crate::simulator::{Camera, FlightParams, FrameSample, GroundTruthFlight, SyntheticStream, TruthLabel};
use crate::tracker::{TrackPoint, Trajectory};

pub const FORMAT_VERSION: u32 = 1;

pub const DETECTIONS_FORMAT: &str = "smashspeed.detections";
pub const TRUTH_FORMAT: &str = "smashspeed.truth";
pub const FLIGHT_FORMAT: &str = "smashspeed.flight";
pub const TRAJECTORY_FORMAT: &str = "smashspeed.trajectory";
pub const SPEED_REPORT_FORMAT: &str = "smashspeed.speed_report";
pub const PAIRED_SPEEDS_FORMAT: &str = "smashspeed.paired_speeds";
pub const ERROR_SUMMARY_FORMAT: &str = "smashspeed.error_summary";

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: T,
}

fn write_jsonl<H: Serialize, R: Serialize>(format: &str, header: H, records: impl IntoIterator<Item = R>) -> String {
    let mut out = serde_json::to_string(&Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        body: header,
    })
    .expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Splits into `(line_number, line)` pairs, rejecting blank lines other than
/// a single trailing newline.
fn numbered_lines(text: &str) -> Result<Vec<(usize, &str)>> {
    let mut lines: Vec<(usize, &str)> = text.split('\n').enumerate().map(|(i, l)| (i + 1, l)).collect();
    if lines.last().is_some_and(|(_, l)| l.is_empty()) {
        lines.pop();
    }
    for (n, l) in &lines {
        if l.trim().is_empty() {
            return Err(Error::Parse {
                line: *n,
                message: "blank line".into(),
            });
        }
    }
    Ok(lines)
}

fn parse_line<T: DeserializeOwned>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text.trim_end_matches('\r')).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

fn read_jsonl<H: DeserializeOwned, R: DeserializeOwned>(format: &str, text: &str) -> Result<(H, Vec<(usize, R)>)> {
    let lines = numbered_lines(text)?;
    let Some(((_, head), rest)) = lines.split_first() else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    };
    let env: Envelope<H> = parse_line(1, head)?;
    if env.format != format {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected format {format:?}, found {:?}", env.format),
        });
    }
    if env.version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported version {}", env.version),
        });
    }
    let records = rest
        .iter()
        .map(|(n, l)| parse_line(*n, l).map(|r| (*n, r)))
        .collect::<Result<_>>()?;
    Ok((env.body, records))
}

// ---------------------------------------------------------------------------
// Detection stream

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub width: f64,
    pub height: f64,
    pub fps: f64,
    pub frame_count: u64,
    pub source: String,
}

impl StreamHeader {
    pub fn meta(&self) -> Result<VideoMeta> {
        VideoMeta::new(self.width, self.height, self.fps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DetectionRecord {
    id: u64,
    frame: u64,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    confidence: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            id: d.id,
            frame: d.frame_index,
            x1: d.bbox.x1,
            y1: d.bbox.y1,
            x2: d.bbox.x2,
            y2: d.bbox.y2,
            confidence: d.confidence,
        }
    }
}

/// A detector's output for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStream {
    pub header: StreamHeader,
    pub detections: Vec<Detection>,
}

impl DetectionStream {
    pub fn from_synthetic(stream: &SyntheticStream, source: &str) -> Self {
        DetectionStream {
            header: StreamHeader {
                width: stream.meta.frame_width,
                height: stream.meta.frame_height,
                fps: stream.meta.fps,
                frame_count: stream.frames.len() as u64,
                source: source.to_string(),
            },
            detections: stream.frames.iter().flatten().copied().collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, records): (StreamHeader, Vec<(usize, DetectionRecord)>) = read_jsonl(DETECTIONS_FORMAT, text)?;
        header.meta().map_err(|e| Error::Validation {
            line: 1,
            message: e.to_string(),
        })?;
        let mut detections = Vec::with_capacity(records.len());
        let mut ids = std::collections::HashSet::with_capacity(records.len());
        let mut last_frame = 0u64;
        for (line, r) in records {
            let invalid = |message: String| Error::Validation { line, message };
            if r.frame < last_frame {
                return Err(invalid(format!("frame {} after frame {last_frame}", r.frame)));
            }
            if r.frame >= header.frame_count {
                return Err(invalid(format!(
                    "frame {} beyond frame_count {}",
                    r.frame, header.frame_count
                )));
            }
            last_frame = r.frame;
            if !ids.insert(r.id) {
                return Err(invalid(format!("duplicate detection id {}", r.id)));
            }
            let bbox = BoundingBox::new(r.x1, r.y1, r.x2, r.y2).map_err(|e| invalid(e.to_string()))?;
            if !bbox.within(header.width, header.height) {
                return Err(invalid(format!(
                    "box ({}, {}, {}, {}) outside the {}x{} frame",
                    r.x1, r.y1, r.x2, r.y2, header.width, header.height
                )));
            }
            let det = Detection::new(r.id, r.frame, bbox, r.confidence).map_err(|e| invalid(e.to_string()))?;
            detections.push(det);
        }
        Ok(Self { header, detections })
    }

    /// The same stream at a resolution scaled by `k`.
    pub fn rescaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.header.width *= k;
        out.header.height *= k;
        for d in &mut out.detections {
            d.bbox = d.bbox.scaled(k);
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        write_jsonl(
            DETECTIONS_FORMAT,
            &self.header,
            self.detections.iter().map(DetectionRecord::from),
        )
    }
}

// ---------------------------------------------------------------------------
// Truth sidecar

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthHeader {
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthFile {
    pub header: TruthHeader,
    pub labels: Vec<TruthLabel>,
}

impl TruthFile {
    pub fn parse(text: &str) -> Result<Self> {
        let (header, records) = read_jsonl::<TruthHeader, TruthLabel>(TRUTH_FORMAT, text)?;
        Ok(Self {
            header,
            labels: records.into_iter().map(|(_, r)| r).collect(),
        })
    }

    pub fn to_jsonl(&self) -> String {
        write_jsonl(TRUTH_FORMAT, &self.header, &self.labels)
    }
}

// ---------------------------------------------------------------------------
// Ground-truth flight

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightHeader {
    pub params: FlightParams,
    pub camera: Camera,
    pub peak_speed_mps: f64,
    pub frame_sampled_peak_speed_mps: f64,
}

/// Frame-rate view of a ground-truth flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightFile {
    pub header: FlightHeader,
    pub frames: Vec<FrameSample>,
}

impl FlightFile {
    pub fn from_flight(flight: &GroundTruthFlight) -> Self {
        Self {
            header: FlightHeader {
                params: flight.params,
                camera: flight.camera,
                peak_speed_mps: flight.peak_speed(),
                frame_sampled_peak_speed_mps: flight.frame_sampled_peak_speed(),
            },
            frames: flight.frame_samples.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, records) = read_jsonl::<FlightHeader, FrameSample>(FLIGHT_FORMAT, text)?;
        Ok(Self {
            header,
            frames: records.into_iter().map(|(_, r)| r).collect(),
        })
    }

    pub fn to_jsonl(&self) -> String {
        write_jsonl(FLIGHT_FORMAT, &self.header, &self.frames)
    }
}

// ---------------------------------------------------------------------------
// Trajectory

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryHeader {
    meta: VideoMeta,
    calibration: ScaleCalibration,
}

pub fn trajectory_to_jsonl(traj: &Trajectory) -> String {
    write_jsonl(
        TRAJECTORY_FORMAT,
        TrajectoryHeader {
            meta: traj.meta,
            calibration: traj.calibration,
        },
        &traj.points,
    )
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let (header, records) = read_jsonl::<TrajectoryHeader, TrackPoint>(TRAJECTORY_FORMAT, text)?;
    let traj = Trajectory {
        points: records.into_iter().map(|(_, r)| r).collect(),
        meta: header.meta,
        calibration: header.calibration,
    };
    traj.validate()?;
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Speed report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpeedReportHeader {
    measurement_point_mode: MeasurementPointMode,
    sample_count: usize,
    peak: SpeedSample,
    at_marker: Option<SpeedSample>,
}

pub fn speed_report_to_jsonl(report: &SpeedReport) -> String {
    write_jsonl(
        SPEED_REPORT_FORMAT,
        SpeedReportHeader {
            measurement_point_mode: report.measurement_point_mode,
            sample_count: report.samples.len(),
            peak: report.peak,
            at_marker: report.at_marker,
        },
        &report.samples,
    )
}

pub fn parse_speed_report(text: &str) -> Result<SpeedReport> {
    let (header, records) = read_jsonl::<SpeedReportHeader, SpeedSample>(SPEED_REPORT_FORMAT, text)?;
    if header.sample_count != records.len() {
        return Err(Error::Validation {
            line: 1,
            message: format!(
                "header announces {} samples, found {}",
                header.sample_count,
                records.len()
            ),
        });
    }
    Ok(SpeedReport {
        samples: records.into_iter().map(|(_, r)| r).collect(),
        peak: header.peak,
        at_marker: header.at_marker,
        measurement_point_mode: header.measurement_point_mode,
    })
}

/// Human-readable table of a report.
pub fn speed_report_table(report: &SpeedReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "{:>6} {:>6} {:>10}", "from", "to", "km/h");
    for s in &report.samples {
        let mut tag = String::new();
        if s == &report.peak {
            tag.push_str("  peak");
        }
        if Some(s) == report.at_marker.as_ref() {
            tag.push_str("  at-marker");
        }
        let _ = writeln!(out, "{:>6} {:>6} {:>10.2}{tag}", s.from_frame, s.to_frame, s.speed_kmh);
    }
    let _ = writeln!(out, "peak speed: {:.2} km/h", report.peak.speed_kmh);
    match report.at_marker {
        Some(s) => {
            let _ = writeln!(out, "at-marker speed: {:.2} km/h", s.speed_kmh);
        }
        None => {
            let _ = writeln!(out, "at-marker speed: n/a");
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Paired speeds and error summaries

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedSpeedsHeader {
    pub reference: String,
    pub candidate: String,
}

pub fn paired_speeds_to_jsonl(header: &PairedSpeedsHeader, trials: &[Trial]) -> String {
    write_jsonl(PAIRED_SPEEDS_FORMAT, header, trials)
}

pub fn parse_paired_speeds(text: &str) -> Result<(PairedSpeedsHeader, Vec<Trial>)> {
    let (header, records) = read_jsonl::<PairedSpeedsHeader, Trial>(PAIRED_SPEEDS_FORMAT, text)?;
    Ok((header, records.into_iter().map(|(_, r)| r).collect()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummaryHeader {
    pub source: String,
}

pub fn error_summaries_to_jsonl(header: &ErrorSummaryHeader, summaries: &[NamedSummary]) -> String {
    write_jsonl(ERROR_SUMMARY_FORMAT, header, summaries)
}

pub fn parse_error_summaries(text: &str) -> Result<(ErrorSummaryHeader, Vec<NamedSummary>)> {
    let (header, records) = read_jsonl::<ErrorSummaryHeader, NamedSummary>(ERROR_SUMMARY_FORMAT, text)?;
    Ok((header, records.into_iter().map(|(_, r)| r).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const STREAM: &str = concat!(
        r#"{"format":"smashspeed.detections","version":1,"width":640.0,"height":480.0,"fps":30.0,"frame_count":3,"source":"unit"}"#,
        "\n",
        r#"{"id":0,"frame":0,"x1":10.0,"y1":10.0,"x2":20.0,"y2":20.0,"confidence":0.5}"#,
        "\n",
        r#"{"id":1,"frame":2,"x1":30.5,"y1":10.0,"x2":40.25,"y2":20.0,"confidence":0.05}"#,
        "\n",
    );

    #[test]
    fn stream_parses_and_is_byte_stable() {
        let s = DetectionStream::parse(STREAM).unwrap();
        assert_eq!(s.detections.len(), 2);
        assert_eq!(s.header.frame_count, 3);
        assert_eq!(s.to_jsonl(), STREAM);
    }

    #[test]
    fn header_only_stream_is_empty() {
        let head = STREAM.lines().next().unwrap();
        let s = DetectionStream::parse(head).unwrap();
        assert!(s.detections.is_empty());
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = STREAM.replace(r#""x2":20.0"#, r#""x2":"wide""#);
        match DetectionStream::parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header_reports_line_one() {
        let text = STREAM.replacen(r#""fps":30.0,"#, "", 1);
        assert!(matches!(
            DetectionStream::parse(&text),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = STREAM.replacen("smashspeed.detections", "smashspeed.truth", 1);
        assert!(matches!(
            DetectionStream::parse(&text),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_bounds_box_is_validation_error() {
        let text = STREAM.replace(r#""x2":40.25"#, r#""x2":640.5"#);
        match DetectionStream::parse(&text) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decreasing_frames_rejected() {
        let text = STREAM
            .replace(r#""frame":2"#, r#""frame":0"#)
            .replace(r#""id":0,"frame":0"#, r#""id":0,"frame":1"#);
        assert!(matches!(
            DetectionStream::parse(&text),
            Err(Error::Validation { line: 3, .. })
        ));
    }

    #[test]
    fn blank_lines_rejected() {
        let text = STREAM.replacen('\n', "\n\n", 1);
        assert!(matches!(
            DetectionStream::parse(&text),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_header() {
        assert!(matches!(DetectionStream::parse(""), Err(Error::Parse { line: 1, .. })));
    }
}
