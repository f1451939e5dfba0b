//! Subcommand bodies. Each returns the text for stdout; artifacts are
//! written to the paths named by the arguments.

use std::fmt::Write as _;
use std::path::Path;

use smashspeed_core::calibration::MPS_TO_KMH;
use smashspeed_core::evalkit::{
    error_summary, scenario_pipeline_config, table1_summaries, NamedSummary, PairedSpeeds, Trial,
};
use smashspeed_core::formats::{
    error_summaries_to_jsonl, parse_paired_speeds, parse_speed_report, parse_trajectory, speed_report_table,
    speed_report_to_jsonl, trajectory_to_jsonl, DetectionStream, ErrorSummaryHeader, FlightFile, TruthFile,
    TruthHeader,
};
use smashspeed_core::pipeline;
use smashspeed_core::{Error, Result};

use crate::args::{EvalArgs, ReportTable1Args, SimulateArgs, SpeedArgs, TrackArgs};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let scenario = args.scenario.resolve()?;
    let (flight, synthetic) = scenario.run()?;
    std::fs::create_dir_all(&args.out_dir)?;
    let stream = DetectionStream::from_synthetic(&synthetic, "simulator");
    let truth = TruthFile {
        header: TruthHeader {
            source: "simulator".into(),
        },
        labels: synthetic.labels.clone(),
    };
    let config = scenario_pipeline_config(&scenario, &Default::default());
    write(&args.out_dir.join("stream.jsonl"), &stream.to_jsonl())?;
    write(&args.out_dir.join("truth.jsonl"), &truth.to_jsonl())?;
    write(
        &args.out_dir.join("flight.jsonl"),
        &FlightFile::from_flight(&flight).to_jsonl(),
    )?;
    write(&args.out_dir.join("config.toml"), &config.to_toml_string())?;
    Ok(format!(
        "frames: {}\ndetections: {}\npeak speed: {:.2} km/h\nframe-sampled peak speed: {:.2} km/h\n",
        flight.frame_samples.len(),
        stream.detections.len(),
        flight.peak_speed() * MPS_TO_KMH,
        flight.frame_sampled_peak_speed() * MPS_TO_KMH,
    ))
}

pub fn track(args: &TrackArgs) -> Result<String> {
    let cfg = args.pipeline.resolve()?;
    cfg.scale_calibration()?;
    let stream = DetectionStream::parse(&read(&args.stream)?)?;
    let ingested = pipeline::ingest(&stream, &cfg.ingest)?;
    let out = pipeline::track_stream(&ingested, &cfg)?;
    write(&args.out, &trajectory_to_jsonl(&out.trajectory))?;
    let detected = out.trajectory.points.iter().filter(|p| p.is_measured()).count();
    Ok(format!(
        "points: {} ({} detected, {} coasted)\n",
        out.trajectory.points.len(),
        detected,
        out.trajectory.points.len() - detected
    ))
}

pub fn speed(args: &SpeedArgs) -> Result<String> {
    let cfg = args.pipeline.resolve()?;
    let trajectory = parse_trajectory(&read(&args.trajectory)?)?;
    let report = pipeline::report(&trajectory, &cfg)?;
    write(&args.out, &speed_report_to_jsonl(&report))?;
    Ok(speed_report_table(&report))
}

fn summaries_text(summaries: &[NamedSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        let _ = writeln!(
            out,
            "{}: MAE {:.2} km/h, RMSE {:.2} km/h, mean signed error {:.2} km/h, n = {}",
            s.name, s.summary.mae_kmh, s.summary.rmse_kmh, s.summary.mean_signed_error_kmh, s.summary.n
        );
    }
    out
}

pub fn eval(args: &EvalArgs) -> Result<String> {
    if let Some(path) = &args.config {
        read(path)?;
    }
    let (source, summaries) = match &args.pairs {
        Some(path) => {
            let (header, trials) = parse_paired_speeds(&read(path)?)?;
            let name = format!("{}_vs_{}", header.candidate, header.reference);
            let summary = error_summary(&PairedSpeeds::new(trials)?);
            (path.display().to_string(), vec![NamedSummary { name, summary }])
        }
        None => {
            if args.report.is_empty() || args.report.len() != args.flight.len() {
                return Err(Error::InputContract(format!(
                    "eval needs --pairs, or matching --report/--flight lists (got {} and {})",
                    args.report.len(),
                    args.flight.len()
                )));
            }
            let mut instantaneous = Vec::new();
            let mut sampled = Vec::new();
            for (r, f) in args.report.iter().zip(&args.flight) {
                let report = parse_speed_report(&read(r)?)?;
                let flight = FlightFile::parse(&read(f)?)?;
                let label = r.display().to_string();
                let trial = |reference: f64| Trial {
                    label: label.clone(),
                    reference_kmh: reference * MPS_TO_KMH,
                    candidate_kmh: report.peak.speed_kmh,
                };
                instantaneous.push(trial(flight.header.peak_speed_mps));
                sampled.push(trial(flight.header.frame_sampled_peak_speed_mps));
            }
            let summaries = vec![
                NamedSummary {
                    name: "peak_vs_ground_truth".into(),
                    summary: error_summary(&PairedSpeeds::new(instantaneous)?),
                },
                NamedSummary {
                    name: "peak_vs_frame_sampled".into(),
                    summary: error_summary(&PairedSpeeds::new(sampled)?),
                },
            ];
            ("reports".to_string(), summaries)
        }
    };
    write(
        &args.out,
        &error_summaries_to_jsonl(&ErrorSummaryHeader { source }, &summaries),
    )?;
    Ok(summaries_text(&summaries))
}

pub fn report_table1(args: &ReportTable1Args) -> Result<String> {
    if let Some(path) = &args.config {
        read(path)?;
    }
    let summaries = table1_summaries();
    if let Some(out) = &args.out {
        let header = ErrorSummaryHeader {
            source: "table1".into(),
        };
        write(out, &error_summaries_to_jsonl(&header, &summaries))?;
    }
    Ok(summaries_text(&summaries))
}
