//! Single-object tracking-by-detection.
//!
//! Each frame the Kalman filter predicts the shuttlecock position, candidates
//! are gated by the speed they imply relative to the last accepted point, and
//! the survivors are ranked by a composite of detector confidence and
//! proximity to the prediction. Frames without a survivor are coasted on the
//! prediction for a bounded number of frames.
//!
//! Detections that sit still relative to an adjacent frame never seed or
//! join a track. Candidates outside a radius around the prediction are
//! rejected. Track birth compares alternative seeds and first associations
//! and keeps the highest-scoring track.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::calibration::{ScaleCalibration, VideoMeta, MPS_TO_KMH};
use crate::error::{Error, Result};
use crate::geometry::{by_confidence_desc, BoundingBox, Detection, PixelPoint, PixelVector};
use crate::kalman::{KalmanConfig, KalmanState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub min_speed_kmh: f64,
    pub max_speed_kmh: f64,
    pub confidence_weight: f64,
    pub proximity_weight: f64,
    /// Proximity is normalized by `frame_width / proximity_norm_divisor`.
    pub proximity_norm_divisor: f64,
    pub max_coast_frames: u32,
    pub min_confidence: f64,
    /// Reject detections that imply less than `min_speed_kmh` relative to a
    /// detection in an adjacent frame, i.e. boxes that do not move.
    pub static_suppression: bool,
    /// Reject candidates farther from the prediction than
    /// `max(association_width_fraction * W * n, association_sigmas * sigma)`,
    /// where `n` counts frames since the last accepted point and `sigma²` is
    /// the largest eigenvalue of the innovation covariance.
    /// A fraction of 0 disables the gate.
    pub association_width_fraction: f64,
    pub association_sigmas: f64,
    /// Seeds on the first `seed_search_frames` frames that hold a seedable
    /// detection are each tracked, with every resolution of the frame after
    /// the seed, and the track with the highest summed composite score is
    /// kept. 0 keeps only the most confident seed of the first such frame.
    pub seed_search_frames: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            min_speed_kmh: 5.0,
            max_speed_kmh: 375.0,
            confidence_weight: 0.3,
            proximity_weight: 0.7,
            proximity_norm_divisor: 4.0,
            max_coast_frames: 8,
            min_confidence: 0.1,
            static_suppression: true,
            association_width_fraction: 0.0625,
            association_sigmas: 3.0,
            seed_search_frames: 4,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.confidence_weight >= 0.0 && self.proximity_weight >= 0.0) {
            return err("tracker weights must be non-negative".into());
        }
        if ((self.confidence_weight + self.proximity_weight) - 1.0).abs() > 1e-9 {
            return err(format!(
                "tracker weights must sum to 1, got {} + {}",
                self.confidence_weight, self.proximity_weight
            ));
        }
        if !(self.min_speed_kmh > 0.0 && self.min_speed_kmh < self.max_speed_kmh) {
            return err(format!(
                "speed band must satisfy 0 < min < max, got [{}, {}]",
                self.min_speed_kmh, self.max_speed_kmh
            ));
        }
        if !(self.proximity_norm_divisor.is_finite() && self.proximity_norm_divisor > 0.0) {
            return err("proximity_norm_divisor must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return err("min_confidence must lie in [0, 1]".into());
        }
        if !(self.association_width_fraction.is_finite() && self.association_width_fraction >= 0.0) {
            return err("association_width_fraction must be non-negative".into());
        }
        if !(self.association_sigmas.is_finite() && self.association_sigmas >= 0.0) {
            return err("association_sigmas must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Detected,
    Coasted,
    UserCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame_index: u64,
    pub position: PixelPoint,
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBox>,
    pub source: PointSource,
    pub composite_score: Option<f64>,
    pub confidence: Option<f64>,
    pub detection_id: Option<u64>,
    /// Kalman velocity at this frame (posterior when detected), px/frame.
    pub velocity: Option<PixelVector>,
}

impl TrackPoint {
    pub fn is_measured(&self) -> bool {
        self.source != PointSource::Coasted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrackPoint>,
    pub meta: VideoMeta,
    pub calibration: ScaleCalibration,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(Error::contract(format!(
                    "trajectory frame indices must strictly increase ({} then {})",
                    w[0].frame_index, w[1].frame_index
                )));
            }
        }
        for p in &self.points {
            let ok = match p.source {
                PointSource::Detected => p.bbox.is_some() && p.confidence.is_some() && p.composite_score.is_some(),
                PointSource::Coasted => p.bbox.is_none(),
                PointSource::UserCorrected => true,
            };
            if !ok {
                return Err(Error::contract(format!(
                    "track point at frame {} has fields inconsistent with source {:?}",
                    p.frame_index, p.source
                )));
            }
        }
        Ok(())
    }

    pub fn point_at(&self, frame_index: u64) -> Option<&TrackPoint> {
        self.points
            .binary_search_by_key(&frame_index, |p| p.frame_index)
            .ok()
            .map(|i| &self.points[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooSlow,
    TooFast,
    /// Outside the association gate around the prediction.
    TooFar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "reason")]
pub enum GateOutcome {
    Accept,
    Reject(RejectReason),
}

impl GateOutcome {
    /// Closed band: speeds equal to either bound are accepted.
    pub fn classify(speed_kmh: f64, cfg: &TrackerConfig) -> GateOutcome {
        if speed_kmh < cfg.min_speed_kmh {
            GateOutcome::Reject(RejectReason::TooSlow)
        } else if speed_kmh > cfg.max_speed_kmh {
            GateOutcome::Reject(RejectReason::TooFast)
        } else {
            GateOutcome::Accept
        }
    }

    pub fn accepted(&self) -> bool {
        matches!(self, GateOutcome::Accept)
    }
}

/// Speed in km/h implied by moving from `prev` to `cur` over `frames_elapsed`
/// frames.
pub fn implied_speed_kmh(
    prev: PixelPoint,
    cur: PixelPoint,
    frames_elapsed: u64,
    cal: &ScaleCalibration,
    meta: &VideoMeta,
) -> f64 {
    debug_assert!(frames_elapsed >= 1);
    let seconds = frames_elapsed as f64 * meta.frame_time();
    prev.distance(&cur) / seconds * cal.scale_factor * MPS_TO_KMH
}

pub fn heuristic_gate(
    candidate: &Detection,
    last_accepted: &TrackPoint,
    frames_elapsed: u64,
    cal: &ScaleCalibration,
    meta: &VideoMeta,
    cfg: &TrackerConfig,
) -> GateOutcome {
    let speed = implied_speed_kmh(last_accepted.position, candidate.center(), frames_elapsed, cal, meta);
    GateOutcome::classify(speed, cfg)
}

/// `max(0, 1 - d / (W / divisor))` with `d` the distance to the prediction.
pub fn proximity_score(
    detection_center: PixelPoint,
    predicted: PixelPoint,
    meta: &VideoMeta,
    cfg: &TrackerConfig,
) -> f64 {
    let norm = meta.frame_width / cfg.proximity_norm_divisor;
    let d = detection_center.distance(&predicted);
    (1.0 - d / norm).max(0.0)
}

pub fn composite_score(confidence: f64, proximity: f64, cfg: &TrackerConfig) -> Result<f64> {
    for (name, v) in [("confidence", confidence), ("proximity", proximity)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::contract(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(cfg.confidence_weight * confidence + cfg.proximity_weight * proximity)
}

/// How one candidate fared on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateAssessment {
    pub detection: Detection,
    /// Absent on the seeding frame, where no reference point exists yet.
    pub implied_speed_kmh: Option<f64>,
    /// Lowest speed implied relative to any detection in an adjacent frame.
    pub own_speed_kmh: Option<f64>,
    pub gate: Option<GateOutcome>,
    pub proximity: Option<f64>,
    pub composite_score: Option<f64>,
}

/// Per-frame tracker diagnostics, used for overlays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameContext {
    pub frame_index: u64,
    pub prediction: Option<PixelPoint>,
    /// Radius of the association gate around the prediction, px.
    pub association_radius: Option<f64>,
    pub reference_frame: Option<u64>,
    pub candidates: Vec<CandidateAssessment>,
    pub selected_detection: Option<u64>,
    pub emitted: Option<PointSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub trajectory: Trajectory,
    pub frames: Vec<FrameContext>,
}

fn check_frames(frames: &[Vec<Detection>]) -> Result<()> {
    for (i, frame) in frames.iter().enumerate() {
        if let Some(d) = frame.iter().find(|d| d.frame_index != i as u64) {
            return Err(Error::contract(format!(
                "detection {} carries frame {} but was listed under frame {i}",
                d.id, d.frame_index
            )));
        }
    }
    Ok(())
}

/// Lowest speed each detection of frame `i` implies relative to the
/// detections of frames `i - 1` and `i + 1`.
fn own_speeds(frames: &[Vec<Detection>], i: usize, cal: &ScaleCalibration, meta: &VideoMeta) -> Vec<Option<f64>> {
    let prev = i.checked_sub(1).map(|j| &frames[j]);
    let next = frames.get(i + 1);
    frames[i]
        .iter()
        .map(|d| {
            prev.into_iter()
                .chain(next)
                .flatten()
                .map(|e| implied_speed_kmh(e.center(), d.center(), 1, cal, meta))
                .min_by(f64::total_cmp)
        })
        .collect()
}

fn association_radius(
    predicted: &KalmanState,
    elapsed: u64,
    meta: &VideoMeta,
    kcfg: &KalmanConfig,
    tcfg: &TrackerConfig,
) -> Option<f64> {
    if tcfg.association_width_fraction <= 0.0 {
        return None;
    }
    let s = predicted.innovation_covariance(kcfg);
    let (a, b, c) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let largest = (a + c) / 2.0 + (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let floor = tcfg.association_width_fraction * meta.frame_width * elapsed as f64;
    Some(floor.max(tcfg.association_sigmas * largest.sqrt()))
}

/// Runs the tracker over `frames`, where `frames[i]` holds the detections of
/// frame `i`.
pub fn track(
    frames: &[Vec<Detection>],
    cal: &ScaleCalibration,
    meta: &VideoMeta,
    kcfg: &KalmanConfig,
    tcfg: &TrackerConfig,
) -> Result<Trajectory> {
    Ok(track_with_context(frames, cal, meta, kcfg, tcfg)?.trajectory)
}

/// How the first frame after the seed is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
enum FirstStep {
    Ranked,
    Take(u64),
    Coast,
}

struct Run<'a> {
    filtered: Vec<Vec<Detection>>,
    own: Vec<Vec<Option<f64>>>,
    cal: &'a ScaleCalibration,
    meta: &'a VideoMeta,
    kcfg: &'a KalmanConfig,
    tcfg: &'a TrackerConfig,
}

struct Hypothesis {
    points: Vec<TrackPoint>,
    contexts: Vec<FrameContext>,
    /// Sum of composite scores over detected points.
    score: f64,
}

impl Run<'_> {
    fn stationary(&self, i: usize, k: usize) -> bool {
        self.tcfg.static_suppression && self.own[i][k].is_some_and(|v| v < self.tcfg.min_speed_kmh)
    }

    fn seedable(&self, i: usize) -> impl Iterator<Item = Detection> + '_ {
        self.filtered[i]
            .iter()
            .enumerate()
            .filter(move |&(k, _)| !self.stationary(i, k))
            .map(|(_, d)| *d)
    }

    fn idle_context(&self, i: usize) -> FrameContext {
        FrameContext {
            frame_index: i as u64,
            prediction: None,
            association_radius: None,
            reference_frame: None,
            candidates: self.filtered[i]
                .iter()
                .enumerate()
                .map(|(k, d)| CandidateAssessment {
                    detection: *d,
                    implied_speed_kmh: None,
                    own_speed_kmh: self.own[i][k],
                    gate: self
                        .stationary(i, k)
                        .then_some(GateOutcome::Reject(RejectReason::TooSlow)),
                    proximity: None,
                    composite_score: None,
                })
                .collect(),
            selected_detection: None,
            emitted: None,
        }
    }

    /// Tracks from `seed` on frame `start`; frames before it stay empty.
    fn follow(&self, start: usize, seed: Detection, first: FirstStep) -> Result<Hypothesis> {
        let (kcfg, tcfg) = (self.kcfg, self.tcfg);
        let mut contexts: Vec<FrameContext> = (0..start).map(|i| self.idle_context(i)).collect();

        let init = KalmanState::init(seed.center(), kcfg);
        let seed_score = composite_score(seed.confidence, 1.0, tcfg)?;
        let seed_point = TrackPoint {
            frame_index: start as u64,
            position: seed.center(),
            bbox: Some(seed.bbox),
            source: PointSource::Detected,
            composite_score: Some(seed_score),
            confidence: Some(seed.confidence),
            detection_id: Some(seed.id),
            velocity: Some(init.velocity()),
        };
        let mut ctx = self.idle_context(start);
        ctx.selected_detection = Some(seed.id);
        ctx.emitted = Some(PointSource::Detected);
        contexts.push(ctx);

        let mut points = vec![seed_point];
        let mut score = seed_score;
        let mut state = init;
        let mut anchor = seed_point;
        let mut coasting = 0u32;
        let mut terminated = false;

        for i in start + 1..self.filtered.len() {
            if terminated {
                contexts.push(self.idle_context(i));
                continue;
            }
            let frame_index = i as u64;
            let predicted = state.predict(kcfg);
            let prediction = predicted.position();
            let elapsed = frame_index - anchor.frame_index;
            let radius = association_radius(&predicted, elapsed, self.meta, kcfg, tcfg);

            let mut assessments = Vec::with_capacity(self.filtered[i].len());
            let mut best: Option<(f64, f64, f64, Detection)> = None;
            for (k, d) in self.filtered[i].iter().enumerate() {
                let speed = implied_speed_kmh(anchor.position, d.center(), elapsed, self.cal, self.meta);
                let gate = if self.stationary(i, k) {
                    GateOutcome::Reject(RejectReason::TooSlow)
                } else {
                    match GateOutcome::classify(speed, tcfg) {
                        GateOutcome::Accept if radius.is_some_and(|r| d.center().distance(&prediction) > r) => {
                            GateOutcome::Reject(RejectReason::TooFar)
                        }
                        g => g,
                    }
                };
                let (proximity, candidate_score) = if gate.accepted() {
                    let p = proximity_score(d.center(), prediction, self.meta, tcfg);
                    (Some(p), Some(composite_score(d.confidence, p, tcfg)?))
                } else {
                    (None, None)
                };
                if let Some(s) = candidate_score {
                    let candidate = (s, d.confidence, d.center().distance(&prediction), *d);
                    let forced = match (i == start + 1, first) {
                        (true, FirstStep::Take(id)) => Some(d.id == id),
                        (true, FirstStep::Coast) => Some(false),
                        _ => None,
                    };
                    let better = best.is_none_or(|b| rank(&candidate, &b) == Ordering::Less);
                    if forced.unwrap_or(better) {
                        best = Some(candidate);
                    }
                }
                assessments.push(CandidateAssessment {
                    detection: *d,
                    implied_speed_kmh: Some(speed),
                    own_speed_kmh: self.own[i][k],
                    gate: Some(gate),
                    proximity,
                    composite_score: candidate_score,
                });
            }

            let mut ctx = FrameContext {
                frame_index,
                prediction: Some(prediction),
                association_radius: radius,
                reference_frame: Some(anchor.frame_index),
                candidates: assessments,
                selected_detection: None,
                emitted: None,
            };

            match best {
                Some((s, _, _, chosen)) => {
                    let posterior = predicted.update(chosen.center(), kcfg)?;
                    let point = TrackPoint {
                        frame_index,
                        position: chosen.center(),
                        bbox: Some(chosen.bbox),
                        source: PointSource::Detected,
                        composite_score: Some(s),
                        confidence: Some(chosen.confidence),
                        detection_id: Some(chosen.id),
                        velocity: Some(posterior.velocity()),
                    };
                    points.push(point);
                    score += s;
                    state = posterior;
                    anchor = point;
                    coasting = 0;
                    ctx.selected_detection = Some(chosen.id);
                    ctx.emitted = Some(PointSource::Detected);
                }
                None if coasting < tcfg.max_coast_frames => {
                    coasting += 1;
                    points.push(TrackPoint {
                        frame_index,
                        position: prediction,
                        bbox: None,
                        source: PointSource::Coasted,
                        composite_score: None,
                        confidence: None,
                        detection_id: None,
                        velocity: Some(predicted.velocity()),
                    });
                    state = predicted;
                    ctx.emitted = Some(PointSource::Coasted);
                }
                None => terminated = true,
            }
            contexts.push(ctx);
        }
        Ok(Hypothesis {
            points,
            contexts,
            score,
        })
    }

    /// Gate-passing detections of the frame after `start` for a track seeded
    /// with `seed`, found by a ranked run.
    fn first_step_options(&self, start: usize, seed: Detection) -> Result<Vec<FirstStep>> {
        let mut options = vec![FirstStep::Ranked];
        if start + 1 >= self.filtered.len() {
            return Ok(options);
        }
        let probe = self.follow_prefix(start, seed)?;
        options.extend(
            probe
                .candidates
                .iter()
                .filter(|c| c.gate.is_some_and(|g| g.accepted()))
                .map(|c| FirstStep::Take(c.detection.id)),
        );
        if self.tcfg.max_coast_frames > 0 {
            options.push(FirstStep::Coast);
        }
        Ok(options)
    }

    fn follow_prefix(&self, start: usize, seed: Detection) -> Result<FrameContext> {
        let short = Run {
            filtered: self.filtered[..start + 2].to_vec(),
            own: self.own[..start + 2].to_vec(),
            ..*self
        };
        Ok(short
            .follow(start, seed, FirstStep::Ranked)?
            .contexts
            .pop()
            .expect("frame after seed"))
    }
}

pub fn track_with_context(
    frames: &[Vec<Detection>],
    cal: &ScaleCalibration,
    meta: &VideoMeta,
    kcfg: &KalmanConfig,
    tcfg: &TrackerConfig,
) -> Result<TrackOutput> {
    meta.validate()?;
    kcfg.validate()?;
    tcfg.validate()?;
    check_frames(frames)?;

    let filtered: Vec<Vec<Detection>> = frames
        .iter()
        .map(|f| {
            f.iter()
                .filter(|d| d.confidence >= tcfg.min_confidence)
                .copied()
                .collect()
        })
        .collect();
    let own = (0..filtered.len())
        .map(|i| own_speeds(&filtered, i, cal, meta))
        .collect();
    let run = Run {
        filtered,
        own,
        cal,
        meta,
        kcfg,
        tcfg,
    };

    let first = (0..run.filtered.len()).find(|&i| run.seedable(i).next().is_some());
    let Some(first) = first else {
        return Ok(TrackOutput {
            trajectory: Trajectory {
                points: Vec::new(),
                meta: *meta,
                calibration: *cal,
            },
            frames: (0..run.filtered.len()).map(|i| run.idle_context(i)).collect(),
        });
    };

    // The ranked run from the most confident seed comes first, so it wins
    // ties against every alternative.
    let literal_seed = run.seedable(first).min_by(by_confidence_desc).expect("seedable frame");
    let mut best = run.follow(first, literal_seed, FirstStep::Ranked)?;
    let window_end = (first + tcfg.seed_search_frames as usize).min(run.filtered.len());
    for start in first..window_end {
        let mut seeds: Vec<Detection> = run.seedable(start).collect();
        seeds.sort_by(by_confidence_desc);
        for seed in seeds {
            for step in run.first_step_options(start, seed)? {
                let h = run.follow(start, seed, step)?;
                if h.score > best.score {
                    best = h;
                }
            }
        }
    }

    Ok(TrackOutput {
        trajectory: Trajectory {
            points: best.points,
            meta: *meta,
            calibration: *cal,
        },
        frames: best.contexts,
    })
}

/// Higher score, then higher confidence, then closer to the prediction, then
/// stream order.
fn rank(a: &(f64, f64, f64, Detection), b: &(f64, f64, f64, Detection)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(b.1.total_cmp(&a.1))
        .then(a.2.total_cmp(&b.2))
        .then(by_confidence_desc(&a.3, &b.3))
        .then(a.3.id.cmp(&b.3.id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(width: f64, fps: f64) -> VideoMeta {
        VideoMeta::new(width, width * 9.0 / 16.0, fps).unwrap()
    }

    /// Calibration with an exact scale factor (pixel distance of 1).
    fn cal(scale_factor: f64) -> ScaleCalibration {
        ScaleCalibration::compute(PixelPoint::new(0.0, 0.0), PixelPoint::new(1.0, 0.0), scale_factor).unwrap()
    }

    fn det_at(id: u64, frame: u64, c: PixelPoint, conf: f64) -> Detection {
        Detection::new(id, frame, BoundingBox::centered(c, 10.0, 10.0).unwrap(), conf).unwrap()
    }

    fn anchor(p: PixelPoint) -> TrackPoint {
        TrackPoint {
            frame_index: 0,
            position: p,
            bbox: None,
            source: PointSource::Detected,
            composite_score: Some(1.0),
            confidence: Some(1.0),
            detection_id: None,
            velocity: None,
        }
    }

    #[test]
    fn implied_speed_examples() {
        let c = cal(0.01);
        let m = meta(1920.0, 30.0);
        let o = PixelPoint::new(0.0, 0.0);
        let p = PixelPoint::new(30.0, 40.0);
        assert!((implied_speed_kmh(o, p, 1, &c, &m) - 54.0).abs() < 1e-9);
        assert_eq!(implied_speed_kmh(p, p, 1, &c, &m), 0.0);
        assert!((implied_speed_kmh(o, p, 2, &c, &m) - 27.0).abs() < 1e-9);
    }

    #[test]
    fn gate_examples() {
        let cfg = TrackerConfig::default();
        assert_eq!(
            GateOutcome::classify(4.0, &cfg),
            GateOutcome::Reject(RejectReason::TooSlow)
        );
        assert_eq!(GateOutcome::classify(100.0, &cfg), GateOutcome::Accept);
        assert_eq!(
            GateOutcome::classify(400.0, &cfg),
            GateOutcome::Reject(RejectReason::TooFast)
        );
        assert_eq!(GateOutcome::classify(5.0, &cfg), GateOutcome::Accept);
        assert_eq!(GateOutcome::classify(375.0, &cfg), GateOutcome::Accept);
    }

    #[test]
    fn heuristic_gate_uses_elapsed_frames() {
        let cfg = TrackerConfig::default();
        // 1 px/frame at S_f = 1 m/px, 30 fps is 108 km/h
        let c = cal(1.0);
        let m = meta(1920.0, 30.0);
        let cand = det_at(0, 4, PixelPoint::new(104.0, 50.0), 0.5);
        let prev = anchor(PixelPoint::new(100.0, 50.0));
        assert_eq!(
            heuristic_gate(&cand, &prev, 1, &c, &m, &cfg),
            GateOutcome::Reject(RejectReason::TooFast)
        );
        assert_eq!(heuristic_gate(&cand, &prev, 4, &c, &m, &cfg), GateOutcome::Accept);
    }

    #[test]
    fn proximity_examples() {
        let cfg = TrackerConfig::default();
        let m = meta(1920.0, 30.0);
        let pred = PixelPoint::new(500.0, 500.0);
        assert_eq!(proximity_score(pred, pred, &m, &cfg), 1.0);
        assert_eq!(proximity_score(PixelPoint::new(980.0, 500.0), pred, &m, &cfg), 0.0);
        assert_eq!(proximity_score(PixelPoint::new(740.0, 500.0), pred, &m, &cfg), 0.5);
        assert_eq!(proximity_score(PixelPoint::new(1500.0, 500.0), pred, &m, &cfg), 0.0);
    }

    #[test]
    fn composite_examples() {
        let cfg = TrackerConfig::default();
        assert!((composite_score(1.0, 1.0, &cfg).unwrap() - 1.0).abs() < 1e-15);
        assert!((composite_score(0.1, 0.9, &cfg).unwrap() - 0.66).abs() < 1e-12);
        assert!((composite_score(0.5, 0.5, &cfg).unwrap() - 0.5).abs() < 1e-15);
        assert!(composite_score(1.1, 0.5, &cfg).is_err());
        assert!(composite_score(0.5, -0.1, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = TrackerConfig {
            confidence_weight: 0.5,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrackerConfig {
            min_speed_kmh: 400.0,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrackerConfig {
            association_width_fraction: -0.1,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrackerConfig {
            association_sigmas: f64::NAN,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    /// S_f = 0.005 m/px at 30 fps: 150 km/h is 277.78 px/frame.
    fn line_frames(n: usize) -> (Vec<Vec<Detection>>, Vec<PixelPoint>) {
        let step = 150.0 / 3.6 / 30.0 / 0.005;
        let centers: Vec<PixelPoint> = (0..n)
            .map(|k| PixelPoint::new(100.0 + step * k as f64 * 0.6, 200.0 + step * k as f64 * 0.8))
            .collect();
        let frames = centers
            .iter()
            .enumerate()
            .map(|(k, c)| vec![det_at(k as u64, k as u64, *c, 0.6)])
            .collect();
        (frames, centers)
    }

    #[test]
    fn single_detection_line_is_followed_exactly() {
        let (frames, centers) = line_frames(5);
        let m = VideoMeta::new(3840.0, 2160.0, 30.0).unwrap();
        let traj = track(
            &frames,
            &cal(0.005),
            &m,
            &KalmanConfig::default(),
            &TrackerConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.points.len(), 5);
        for (p, c) in traj.points.iter().zip(&centers) {
            assert_eq!(p.source, PointSource::Detected);
            assert!(p.position.distance(c) < 1e-9);
        }
    }

    /// A box parked at (500, 500) with high confidence next to a shuttle
    /// moving 100 px/frame (54 km/h at S_f = 0.005, 30 fps).
    fn static_scene() -> Vec<Vec<Detection>> {
        (0..3u64)
            .map(|f| {
                vec![
                    det_at(2 * f, f, PixelPoint::new(500.0, 500.0), 0.95),
                    det_at(2 * f + 1, f, PixelPoint::new(300.0 + 100.0 * f as f64, 700.0), 0.5),
                ]
            })
            .collect()
    }

    #[test]
    fn static_false_positive_is_gated_out() {
        let out = track_with_context(
            &static_scene(),
            &cal(0.005),
            &meta(1920.0, 30.0),
            &KalmanConfig::default(),
            &TrackerConfig::default(),
        )
        .unwrap();
        let ids: Vec<_> = out.trajectory.points.iter().map(|p| p.detection_id).collect();
        assert_eq!(ids, vec![Some(1), Some(3), Some(5)]);
        for ctx in &out.frames {
            let parked = &ctx.candidates[0];
            assert_eq!(parked.own_speed_kmh, Some(0.0));
            assert_eq!(parked.gate, Some(GateOutcome::Reject(RejectReason::TooSlow)));
        }
    }

    #[test]
    fn without_suppression_the_static_box_seeds() {
        let tcfg = TrackerConfig {
            static_suppression: false,
            seed_search_frames: 0,
            ..TrackerConfig::default()
        };
        let out = track_with_context(
            &static_scene(),
            &cal(0.005),
            &meta(1920.0, 30.0),
            &KalmanConfig::default(),
            &tcfg,
        )
        .unwrap();
        assert_eq!(out.trajectory.points[0].detection_id, Some(0));
        // relative to the parked seed, the parked box is below the band
        assert_eq!(
            out.frames[1].candidates[0].gate,
            Some(GateOutcome::Reject(RejectReason::TooSlow))
        );
    }

    /// Shuttle moving 100 px/frame along y = 700 from x = 300, missing on
    /// frame 1, with a decoy near the seed on frame 1.
    fn decoy_scene() -> Vec<Vec<Detection>> {
        let shuttle = |id, f: u64| det_at(id, f, PixelPoint::new(300.0 + 100.0 * f as f64, 700.0), 0.7);
        let mut frames = vec![
            vec![shuttle(0, 0)],
            vec![det_at(1, 1, PixelPoint::new(320.0, 640.0), 0.2)],
        ];
        frames.extend((2..6u64).map(|f| vec![shuttle(f, f)]));
        frames
    }

    #[test]
    fn seed_search_recovers_from_a_decoy_after_the_seed() {
        let (c, m, k) = (cal(0.005), meta(1920.0, 30.0), KalmanConfig::default());
        let literal = TrackerConfig {
            seed_search_frames: 0,
            ..TrackerConfig::default()
        };
        let lit = track(&decoy_scene(), &c, &m, &k, &literal).unwrap();
        assert_eq!(lit.points[1].detection_id, Some(1));

        let searched = track(&decoy_scene(), &c, &m, &k, &TrackerConfig::default()).unwrap();
        let ids: Vec<_> = searched.points.iter().map(|p| p.detection_id).collect();
        assert_eq!(ids, vec![Some(0), None, Some(2), Some(3), Some(4), Some(5)]);
        assert_eq!(searched.points[1].source, PointSource::Coasted);
    }

    #[test]
    fn association_gate_widens_while_coasting() {
        let (m, k, t) = (meta(1920.0, 30.0), KalmanConfig::default(), TrackerConfig::default());
        let mut state = KalmanState::init(PixelPoint::new(100.0, 100.0), &k);
        for step in 1..=6 {
            state = state
                .predict(&k)
                .update(PixelPoint::new(100.0 + 50.0 * step as f64, 100.0), &k)
                .unwrap();
        }
        let predicted = state.predict(&k);
        let one = association_radius(&predicted, 1, &m, &k, &t).unwrap();
        let three = association_radius(&predicted, 3, &m, &k, &t).unwrap();
        assert_eq!(one, 120.0);
        assert_eq!(three, 360.0);
        let off = TrackerConfig {
            association_width_fraction: 0.0,
            ..t
        };
        assert_eq!(association_radius(&predicted, 1, &m, &k, &off), None);
    }

    #[test]
    fn far_candidate_is_rejected_inside_the_speed_band() {
        // 200 px/frame line; frame 3 offers the continuation and a point
        // within the speed band but 300 px off the prediction.
        let (c, m, k, t) = (
            cal(0.005),
            meta(1920.0, 30.0),
            KalmanConfig::default(),
            TrackerConfig::default(),
        );
        let mut frames: Vec<Vec<Detection>> = (0..3u64)
            .map(|f| vec![det_at(f, f, PixelPoint::new(200.0 * f as f64 + 100.0, 500.0), 0.6)])
            .collect();
        frames.push(vec![
            det_at(3, 3, PixelPoint::new(700.0, 500.0), 0.3),
            det_at(4, 3, PixelPoint::new(500.0, 800.0), 0.9),
        ]);
        let out = track_with_context(&frames, &c, &m, &k, &t).unwrap();
        let far = out.frames[3].candidates.iter().find(|a| a.detection.id == 4).unwrap();
        assert_eq!(far.gate, Some(GateOutcome::Reject(RejectReason::TooFar)));
        assert_eq!(out.frames[3].selected_detection, Some(3));
    }

    #[test]
    fn coasting_is_capped_then_track_terminates() {
        let (mut frames, _) = line_frames(3);
        frames.extend((3..20).map(|_| Vec::new()));
        let tcfg = TrackerConfig {
            max_coast_frames: 4,
            ..TrackerConfig::default()
        };
        let m = VideoMeta::new(3840.0, 2160.0, 30.0).unwrap();
        let traj = track(&frames, &cal(0.005), &m, &KalmanConfig::default(), &tcfg).unwrap();
        let coasted: Vec<_> = traj
            .points
            .iter()
            .filter(|p| p.source == PointSource::Coasted)
            .collect();
        assert_eq!(coasted.len(), 4);
        assert!(coasted.iter().all(|p| p.bbox.is_none()));
        assert_eq!(traj.points.last().unwrap().frame_index, 6);
        traj.validate().unwrap();
    }

    #[test]
    fn track_ignores_frames_after_termination() {
        let (mut frames, centers) = line_frames(2);
        frames.extend((2..6).map(|_| Vec::new()));
        frames.push(vec![det_at(99, 6, centers[0], 0.9)]);
        let tcfg = TrackerConfig {
            max_coast_frames: 1,
            ..TrackerConfig::default()
        };
        let m = VideoMeta::new(3840.0, 2160.0, 30.0).unwrap();
        let traj = track(&frames, &cal(0.005), &m, &KalmanConfig::default(), &tcfg).unwrap();
        assert!(traj.points.iter().all(|p| p.detection_id != Some(99)));
    }

    #[test]
    fn empty_input_gives_empty_trajectory() {
        let m = meta(1920.0, 30.0);
        let traj = track(&[], &cal(0.01), &m, &KalmanConfig::default(), &TrackerConfig::default()).unwrap();
        assert!(traj.points.is_empty());
    }

    #[test]
    fn misfiled_detection_rejected() {
        let m = meta(1920.0, 30.0);
        let frames = vec![vec![det_at(0, 3, PixelPoint::new(1.0, 1.0), 0.5)]];
        assert!(track(
            &frames,
            &cal(0.01),
            &m,
            &KalmanConfig::default(),
            &TrackerConfig::default()
        )
        .is_err());
    }

    #[test]
    fn ties_prefer_higher_confidence_then_proximity() {
        let d1 = det_at(1, 0, PixelPoint::new(0.0, 0.0), 0.4);
        let d2 = det_at(2, 0, PixelPoint::new(0.0, 0.0), 0.6);
        assert_eq!(rank(&(0.5, 0.6, 3.0, d2), &(0.5, 0.4, 1.0, d1)), Ordering::Less);
        assert_eq!(rank(&(0.5, 0.4, 1.0, d1), &(0.5, 0.4, 3.0, d2)), Ordering::Less);
    }
}
