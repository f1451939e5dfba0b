//! Synthetic shuttlecock flights and detector-like streams with truth labels.
//!
//! The flight is a point mass under gravity and quadratic drag,
//! `a = g - k |v| v` with `k = g_ref / v_t²`, integrated with fixed-step RK4.
//! The world plane (x along the smash, y up, meters) maps to pixels through a
//! single scale and offset, i.e. a camera perpendicular to the flight plane.
//!
//! Corruption draws from a ChaCha8 generator seeded with `rng_seed` through
//! `SeedableRng::seed_from_u64`. Per frame the draw order is fixed: dropout
//! uniform, then (if kept) x noise, y noise, confidence; then one confidence
//! per static site; then the Poisson count of moving clutter and, per box,
//! center x, center y, size factor, confidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::calibration::{TravelSide, VideoMeta};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection, PixelPoint, PixelVector};

/// Gravity used to convert a terminal speed into a drag coefficient, so that
/// the drag law is independent of the `gravity` parameter.
pub const DRAG_REFERENCE_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightParams {
    /// m/s
    pub launch_speed: f64,
    /// Degrees below horizontal; positive is a downward smash.
    pub launch_angle_deg: f64,
    /// m
    pub launch_height: f64,
    /// m/s; `inf` disables drag. Serialized as the string `"inf"` in that
    /// case, since JSON has no infinity.
    #[serde(with = "unbounded")]
    pub terminal_speed: f64,
    /// m/s²
    pub gravity: f64,
    /// s
    pub duration: f64,
    /// s
    pub integration_step: f64,
}

impl Default for FlightParams {
    fn default() -> Self {
        Self {
            launch_speed: 60.0,
            launch_angle_deg: 10.0,
            launch_height: 3.0,
            terminal_speed: 6.8,
            gravity: 9.81,
            duration: 0.5,
            integration_step: 1e-4,
        }
    }
}

impl FlightParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::Config(format!("flight.{name} must be positive, got {v}")))
            }
        };
        pos("launch_speed", self.launch_speed)?;
        pos("terminal_speed", self.terminal_speed)?;
        pos("duration", self.duration)?;
        pos("integration_step", self.integration_step)?;
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return Err(Error::Config("flight.gravity must be non-negative".into()));
        }
        if !(self.launch_angle_deg.is_finite() && self.launch_height.is_finite()) {
            return Err(Error::Config("flight angle and height must be finite".into()));
        }
        Ok(())
    }

    /// `k` in `a_drag = -k |v| v`, 1/m.
    pub fn drag_coefficient(&self) -> f64 {
        DRAG_REFERENCE_GRAVITY / (self.terminal_speed * self.terminal_speed)
    }
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

/// Maps the world plane to pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub meta: VideoMeta,
    pub meters_per_pixel: f64,
    /// Pixel position of the world origin (launch point at ground level).
    pub origin: PixelPoint,
    pub travel: TravelSide,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            meta: VideoMeta {
                frame_width: 1920.0,
                frame_height: 1080.0,
                fps: 30.0,
            },
            meters_per_pixel: 0.008,
            origin: PixelPoint::new(160.0, 1000.0),
            travel: TravelSide::LeftToRight,
        }
    }
}

impl Camera {
    fn sign(&self) -> f64 {
        match self.travel {
            TravelSide::LeftToRight => 1.0,
            TravelSide::RightToLeft => -1.0,
        }
    }

    pub fn to_pixel(&self, world: [f64; 2]) -> PixelPoint {
        PixelPoint::new(
            self.origin.x + self.sign() * world[0] / self.meters_per_pixel,
            self.origin.y - world[1] / self.meters_per_pixel,
        )
    }

    /// World x coordinate (meters) to pixel x.
    pub fn pixel_x(&self, world_x: f64) -> f64 {
        self.origin.x + self.sign() * world_x / self.meters_per_pixel
    }

    /// World velocity (m/s) to pixels/frame.
    pub fn to_pixel_velocity(&self, v: [f64; 2]) -> PixelVector {
        let k = 1.0 / (self.meters_per_pixel * self.meta.fps);
        PixelVector::new(self.sign() * v[0] * k, -v[1] * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSample {
    pub t: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub frame_index: u64,
    pub t: f64,
    pub position: [f64; 2],
    pub speed: f64,
    pub pixel: PixelPoint,
    /// px/frame
    pub pixel_velocity: PixelVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFlight {
    pub params: FlightParams,
    pub camera: Camera,
    pub samples: Vec<FlightSample>,
    pub frame_samples: Vec<FrameSample>,
}

impl GroundTruthFlight {
    /// Largest instantaneous speed on the integration grid, m/s.
    pub fn peak_speed(&self) -> f64 {
        self.samples.iter().map(|s| s.speed).fold(0.0, f64::max)
    }

    /// Largest chord speed between consecutive frame samples, m/s. This is
    /// the best a perfect frame-rate-limited measurement can report.
    pub fn frame_sampled_peak_speed(&self) -> f64 {
        let fps = self.camera.meta.fps;
        self.frame_samples
            .windows(2)
            .map(|w| {
                let dx = w[1].position[0] - w[0].position[0];
                let dy = w[1].position[1] - w[0].position[1];
                dx.hypot(dy) * fps / (w[1].frame_index - w[0].frame_index) as f64
            })
            .fold(0.0, f64::max)
    }

    /// Pixel x of the point where the flight reaches `world_x` meters.
    pub fn marker_pixel_x(&self, world_x: f64) -> f64 {
        self.camera.pixel_x(world_x)
    }
}

type State = [f64; 4];

fn derivative(s: &State, gravity: f64, k: f64) -> State {
    let speed = s[2].hypot(s[3]);
    [s[2], s[3], -k * speed * s[2], -gravity - k * speed * s[3]]
}

fn rk4_step(s: &State, h: f64, gravity: f64, k: f64) -> State {
    let add = |a: &State, b: &State, f: f64| [a[0] + f * b[0], a[1] + f * b[1], a[2] + f * b[2], a[3] + f * b[3]];
    let k1 = derivative(s, gravity, k);
    let k2 = derivative(&add(s, &k1, h / 2.0), gravity, k);
    let k3 = derivative(&add(s, &k2, h / 2.0), gravity, k);
    let k4 = derivative(&add(s, &k3, h), gravity, k);
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn sample(t: f64, s: &State) -> FlightSample {
    FlightSample {
        t,
        position: [s[0], s[1]],
        velocity: [s[2], s[3]],
        speed: s[2].hypot(s[3]),
    }
}

/// Integrates the flight with fixed-step RK4, recording every step. Frame
/// samples are taken at `k / fps` with a partial RK4 step from the preceding
/// grid state.
pub fn simulate_flight(params: &FlightParams, camera: &Camera) -> Result<GroundTruthFlight> {
    params.validate()?;
    camera.meta.validate()?;
    let k = params.drag_coefficient();
    let g = params.gravity;
    let h = params.integration_step;
    let angle = params.launch_angle_deg.to_radians();
    let mut state: State = [
        0.0,
        params.launch_height,
        params.launch_speed * angle.cos(),
        -params.launch_speed * angle.sin(),
    ];

    let steps = (params.duration / h).round() as u64;
    let frame_time = camera.meta.frame_time();
    let mut samples = Vec::with_capacity(steps as usize + 1);
    let mut frame_samples = Vec::new();
    let mut next_frame = 0u64;

    let mut push_frame = |frame_index: u64, t: f64, s: &State| {
        let fs = sample(t, s);
        frame_samples.push(FrameSample {
            frame_index,
            t,
            position: fs.position,
            speed: fs.speed,
            pixel: camera.to_pixel(fs.position),
            pixel_velocity: camera.to_pixel_velocity(fs.velocity),
        });
    };

    for step in 0..=steps {
        let t = step as f64 * h;
        samples.push(sample(t, &state));
        if step == steps {
            break;
        }
        let t_next = (step + 1) as f64 * h;
        // frames falling in [t, t_next)
        loop {
            let tf = next_frame as f64 * frame_time;
            if tf >= t_next - 1e-12 || tf > params.duration {
                break;
            }
            let dt = tf - t;
            let s = if dt.abs() < 1e-15 {
                state
            } else {
                rk4_step(&state, dt, g, k)
            };
            push_frame(next_frame, tf, &s);
            next_frame += 1;
        }
        state = rk4_step(&state, h, g, k);
    }
    let t_end = steps as f64 * h;
    let tf = next_frame as f64 * frame_time;
    if (tf - t_end).abs() < 1e-12 {
        push_frame(next_frame, tf, &state);
    }

    Ok(GroundTruthFlight {
        params: *params,
        camera: *camera,
        samples,
        frame_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceModel {
    pub true_mean: f64,
    pub true_sigma: f64,
    pub clutter_mean: f64,
    pub clutter_sigma: f64,
    /// Persistent static false positives.
    pub static_mean: f64,
    pub static_sigma: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        Self {
            true_mean: 0.7,
            true_sigma: 0.1,
            clutter_mean: 0.25,
            clutter_sigma: 0.1,
            static_mean: 0.85,
            static_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionParams {
    pub pixel_noise_sigma: f64,
    pub dropout_probability: f64,
    /// Expected clutter boxes per frame, static sites included.
    pub clutter_rate: f64,
    /// Share of `clutter_rate` made of persistent static sites.
    pub clutter_static_fraction: f64,
    /// Blur streak length per unit of pixel speed (px per px/frame).
    pub blur_elongation_gain: f64,
    pub base_box_size: f64,
    pub confidence: ConfidenceModel,
    pub rng_seed: u64,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        Self {
            pixel_noise_sigma: 2.0,
            dropout_probability: 0.1,
            clutter_rate: 3.0,
            clutter_static_fraction: 0.0,
            blur_elongation_gain: 0.25,
            base_box_size: 10.0,
            confidence: ConfidenceModel::default(),
            rng_seed: 7,
        }
    }
}

impl CorruptionParams {
    /// No noise, no dropouts, no clutter.
    pub fn clean() -> Self {
        Self {
            pixel_noise_sigma: 0.0,
            dropout_probability: 0.0,
            clutter_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("corruption.{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("dropout_probability", self.dropout_probability)?;
        unit("clutter_static_fraction", self.clutter_static_fraction)?;
        let c = &self.confidence;
        let non_neg = [
            ("pixel_noise_sigma", self.pixel_noise_sigma),
            ("clutter_rate", self.clutter_rate),
            ("blur_elongation_gain", self.blur_elongation_gain),
            ("confidence.true_sigma", c.true_sigma),
            ("confidence.clutter_sigma", c.clutter_sigma),
            ("confidence.static_sigma", c.static_sigma),
        ];
        for (name, v) in non_neg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "corruption.{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.base_box_size.is_finite() && self.base_box_size > 0.0) {
            return Err(Error::Config("corruption.base_box_size must be positive".into()));
        }
        Ok(())
    }

    /// Number of persistent static sites.
    pub fn static_sites(&self) -> usize {
        (self.clutter_rate * self.clutter_static_fraction).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthClass {
    True,
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub id: u64,
    pub label: TruthClass,
    /// Set for clutter pinned at a fixed position across frames.
    pub persistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStream {
    pub meta: VideoMeta,
    /// `frames[i]` holds the detections of frame `i`.
    pub frames: Vec<Vec<Detection>>,
    pub labels: Vec<TruthLabel>,
}

impl SyntheticStream {
    pub fn label_of(&self, id: u64) -> Option<&TruthLabel> {
        self.labels
            .binary_search_by_key(&id, |l| l.id)
            .ok()
            .map(|i| &self.labels[i])
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn normal(mean: f64, sigma: f64) -> Normal<f64> {
    Normal::new(mean, sigma).expect("sigma validated non-negative")
}

/// Blur streak trailing the shuttlecock: the exposure ends at the frame time,
/// so the box spans from the current position back along the path.
fn streak_box(front: PixelPoint, velocity: PixelVector, gain: f64, size: f64) -> Result<BoundingBox> {
    let tail = front.offset(velocity.scaled(-gain));
    let half = size / 2.0;
    BoundingBox::new(
        front.x.min(tail.x) - half,
        front.y.min(tail.y) - half,
        front.x.max(tail.x) + half,
        front.y.max(tail.y) + half,
    )
}

/// Turns a ground-truth flight into a labelled detection stream.
pub fn corrupt(flight: &GroundTruthFlight, meta: &VideoMeta, cp: &CorruptionParams) -> Result<SyntheticStream> {
    cp.validate()?;
    meta.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cp.rng_seed);
    let conf = &cp.confidence;
    let noise = normal(0.0, cp.pixel_noise_sigma);
    let true_conf = normal(conf.true_mean, conf.true_sigma);
    let clutter_conf = normal(conf.clutter_mean, conf.clutter_sigma);
    let static_conf = normal(conf.static_mean, conf.static_sigma);
    let moving_rate = cp.clutter_rate * (1.0 - cp.clutter_static_fraction);
    let moving = (moving_rate > 0.0).then(|| Poisson::new(moving_rate).expect("positive rate"));

    let size = cp.base_box_size;
    let uniform_box = |rng: &mut ChaCha8Rng, scale: f64| -> Result<BoundingBox> {
        let s = size * scale;
        let cx = rng.random_range(s / 2.0..meta.frame_width - s / 2.0);
        let cy = rng.random_range(s / 2.0..meta.frame_height - s / 2.0);
        BoundingBox::centered(PixelPoint::new(cx, cy), s, s)
    };
    let sites: Vec<BoundingBox> = (0..cp.static_sites())
        .map(|_| uniform_box(&mut rng, 1.2))
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(flight.frame_samples.len());
    let mut labels = Vec::new();
    let mut next_id = 0u64;
    let mut emit = |frame: &mut Vec<Detection>,
                    frame_index: u64,
                    bbox: BoundingBox,
                    c: f64,
                    label: TruthClass,
                    persistent: bool|
     -> Result<()> {
        frame.push(Detection::new(next_id, frame_index, bbox, clamp_unit(c))?);
        labels.push(TruthLabel {
            id: next_id,
            label,
            persistent,
        });
        next_id += 1;
        Ok(())
    };

    for fs in &flight.frame_samples {
        let frame_index = fs.frame_index;
        let mut frame = Vec::new();

        let dropped = rng.random::<f64>() < cp.dropout_probability;
        if !dropped {
            let front = PixelPoint::new(fs.pixel.x + noise.sample(&mut rng), fs.pixel.y + noise.sample(&mut rng));
            let c = true_conf.sample(&mut rng);
            let bbox = streak_box(front, fs.pixel_velocity, cp.blur_elongation_gain, size)?;
            if bbox.within(meta.frame_width, meta.frame_height) {
                emit(&mut frame, frame_index, bbox, c, TruthClass::True, false)?;
            }
        }

        for site in &sites {
            let c = static_conf.sample(&mut rng);
            emit(&mut frame, frame_index, *site, c, TruthClass::Clutter, true)?;
        }

        if let Some(poisson) = &moving {
            let n = poisson.sample(&mut rng) as usize;
            for _ in 0..n {
                let scale = rng.random_range(0.8..1.5);
                let bbox = uniform_box(&mut rng, scale)?;
                let c = clutter_conf.sample(&mut rng);
                emit(&mut frame, frame_index, bbox, c, TruthClass::Clutter, false)?;
            }
        }
        frames.push(frame);
    }

    Ok(SyntheticStream {
        meta: *meta,
        frames,
        labels,
    })
}

/// A complete synthetic experiment: flight, camera and corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Scenario {
    pub flight: FlightParams,
    pub camera: Camera,
    pub corruption: CorruptionParams,
    /// World x (meters from impact) of the net, for at-marker readings.
    pub net_distance: f64,
}

impl Scenario {
    pub fn run(&self) -> Result<(GroundTruthFlight, SyntheticStream)> {
        let flight = simulate_flight(&self.flight, &self.camera)?;
        let stream = corrupt(&flight, &self.camera.meta, &self.corruption)?;
        Ok((flight, stream))
    }
}
