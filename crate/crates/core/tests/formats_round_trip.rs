use proptest::prelude::*;
use smashspeed_core::calibration::{NetMarker, TravelSide};
use smashspeed_core::config::{CalibrationConfig, IngestConfig, PipelineConfig};
use smashspeed_core::evalkit::{error_summary, scenario_pipeline_config, NamedSummary, PairedSpeeds, Trial};
use smashspeed_core::formats::{
    error_summaries_to_jsonl, paired_speeds_to_jsonl, parse_error_summaries, parse_paired_speeds, parse_speed_report,
    parse_trajectory, speed_report_to_jsonl, trajectory_to_jsonl, DetectionStream, ErrorSummaryHeader, FlightFile,
    PairedSpeedsHeader, StreamHeader, TruthFile, TruthHeader,
};
use smashspeed_core::geometry::{BoundingBox, Detection, PixelPoint};
use smashspeed_core::kalman::KalmanConfig;
use smashspeed_core::kinematics::MeasurementPointMode;
use smashspeed_core::pipeline;
use smashspeed_core::simulator::{CorruptionParams, Scenario};
use smashspeed_core::tracker::TrackerConfig;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn arb_stream() -> impl Strategy<Value = DetectionStream> {
    let det = (
        0u64..50,
        0.0..1900.0f64,
        0.0..1060.0f64,
        1e-3..20.0f64,
        1e-3..20.0f64,
        0.0..=1.0f64,
    );
    (prop::collection::vec(det, 0..60), 1.0..240.0f64, "[a-z0-9 ._-]{0,12}").prop_map(|(raw, fps, source)| {
        let mut raw = raw;
        raw.sort_by_key(|r| r.0);
        let detections = raw
            .iter()
            .enumerate()
            .map(|(i, &(f, x, y, w, h, c))| {
                Detection::new(i as u64 * 3 + 1, f, BoundingBox::new(x, y, x + w, y + h).unwrap(), c).unwrap()
            })
            .collect();
        DetectionStream {
            header: StreamHeader {
                width: 1920.0,
                height: 1080.0,
                fps,
                frame_count: 50,
                source,
            },
            detections,
        }
    })
}

fn arb_config() -> impl Strategy<Value = PipelineConfig> {
    (
        (0.0..1000.0f64, 0.0..1000.0f64, 1.0..900.0f64, 0.1..30.0f64),
        prop::option::of((0.0..1920.0f64, any::<bool>())),
        (any::<bool>(), any::<bool>(), 0.0..=1.0f64, 0.0..=1.0f64),
        (
            1.0..10.0f64,
            200.0..1000.0f64,
            0.0..=1.0f64,
            0u32..20,
            any::<bool>(),
            0u32..10,
        ),
        (1e-3..100.0f64, 1e-3..100.0f64, 1e-3..100.0f64, 1.0..1e5f64),
    )
        .prop_map(|(cal, marker, flags, tr, kf)| {
            let (ax, ay, span, real) = cal;
            let (leading, include_coasted, min_conf, iou) = flags;
            let (min_speed, max_speed, weight, coast, suppress, search) = tr;
            PipelineConfig {
                calibration: Some(CalibrationConfig {
                    point_a: PixelPoint::new(ax, ay),
                    point_b: PixelPoint::new(ax + span, ay + span / 3.0),
                    real_distance: real,
                }),
                net_marker: marker.map(|(x, left)| NetMarker {
                    marker_x: x,
                    side: if left {
                        TravelSide::LeftToRight
                    } else {
                        TravelSide::RightToLeft
                    },
                }),
                measurement_point_mode: if leading {
                    MeasurementPointMode::LeadingEdge
                } else {
                    MeasurementPointMode::Center
                },
                include_coasted,
                ingest: IngestConfig {
                    min_confidence: min_conf,
                    nms_iou: iou,
                },
                tracker: TrackerConfig {
                    min_speed_kmh: min_speed,
                    max_speed_kmh: max_speed,
                    confidence_weight: weight,
                    proximity_weight: 1.0 - weight,
                    max_coast_frames: coast,
                    static_suppression: suppress,
                    seed_search_frames: search,
                    ..TrackerConfig::default()
                },
                kalman: KalmanConfig {
                    process_noise_scale: kf.0,
                    measurement_noise: kf.1,
                    initial_position_variance: kf.2,
                    initial_velocity_variance: kf.3,
                },
            }
        })
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn detection_streams_round_trip(stream in arb_stream()) {
        let text = stream.to_jsonl();
        let back = DetectionStream::parse(&text).unwrap();
        prop_assert_eq!(&back, &stream);
        prop_assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn configs_round_trip_through_toml(cfg in arb_config()) {
        let text = cfg.to_toml_string();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
        prop_assert_eq!(back.to_toml_string(), text);
    }

    #[test]
    fn paired_speeds_and_summaries_round_trip(
        rows in prop::collection::vec(("[A-Za-z0-9 ]{0,8}", 0.0..500.0f64, 0.0..500.0f64), 1..30),
    ) {
        let trials: Vec<Trial> = rows
            .into_iter()
            .map(|(label, r, c)| Trial { label, reference_kmh: r, candidate_kmh: c })
            .collect();
        let header = PairedSpeedsHeader { reference: "radar".into(), candidate: "peak".into() };
        let text = paired_speeds_to_jsonl(&header, &trials);
        let (h, back) = parse_paired_speeds(&text).unwrap();
        prop_assert_eq!(&h, &header);
        prop_assert_eq!(&back, &trials);

        let summaries = vec![NamedSummary {
            name: "peak_vs_radar".into(),
            summary: error_summary(&PairedSpeeds::new(trials).unwrap()),
        }];
        let sh = ErrorSummaryHeader { source: "test".into() };
        let text = error_summaries_to_jsonl(&sh, &summaries);
        let (h, back) = parse_error_summaries(&text).unwrap();
        prop_assert_eq!(h, sh);
        prop_assert_eq!(back, summaries);
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn simulator_artifacts_round_trip(seed in any::<u64>(), dropout in 0.0..0.3f64, statics in 0.0..=1.0f64) {
        let sc = Scenario {
            net_distance: 4.0,
            corruption: CorruptionParams {
            rng_seed: seed,
            dropout_probability: dropout,
            clutter_static_fraction: statics,
                ..CorruptionParams::default()
            },
            ..Scenario::default()
        };
        let (flight, synthetic) = sc.run().unwrap();

        let stream = DetectionStream::from_synthetic(&synthetic, "simulator");
        let text = stream.to_jsonl();
        prop_assert_eq!(&DetectionStream::parse(&text).unwrap(), &stream);

        let truth = TruthFile { header: TruthHeader { source: "simulator".into() }, labels: synthetic.labels.clone() };
        let text = truth.to_jsonl();
        prop_assert_eq!(&TruthFile::parse(&text).unwrap(), &truth);

        let ff = FlightFile::from_flight(&flight);
        let text = ff.to_jsonl();
        let back = FlightFile::parse(&text).unwrap();
        prop_assert_eq!(&back, &ff);
        prop_assert_eq!(back.to_jsonl(), text);

        let cfg = scenario_pipeline_config(&sc, &PipelineConfig::default());
        let Ok((out, report)) = pipeline::run(&stream, &cfg) else {
            return Ok(());
        };
        let text = trajectory_to_jsonl(&out.trajectory);
        let back = parse_trajectory(&text).unwrap();
        prop_assert_eq!(&back, &out.trajectory);
        prop_assert_eq!(trajectory_to_jsonl(&back), text);

        let text = speed_report_to_jsonl(&report);
        let back = parse_speed_report(&text).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(speed_report_to_jsonl(&back), text);
    }
}
