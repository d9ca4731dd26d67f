//! Seeded synthetic worlds.
//!
//! Targets arrive in a rectangular arena as a Poisson process, stay for a
//! log-normal dwell time (an M/G/∞ queue, so the stationary concurrent
//! count is Poisson with mean `ρ = λ·exp(μ_S + σ_S²/2)` and the system is
//! empty a fraction `e^{−ρ}` of the time) and wander as a bounded random
//! walk. Each identity carries a fixed appearance descriptor; cameras
//! observe noisy, optionally quantized copies of it plus a pixel position.
//!
//! The same arrival model drives the three-phase system process: a slot
//! is a calibration slot with probability `p_1`, otherwise it is idle or
//! streaming according to whether any target is present:
//!
//! ```text
//! π_1 = p_1,   π_2 = (1 − p_1)(1 − e^{−ρ}),   π_0 = (1 − p_1)·e^{−ρ}
//! ```
//!
//! [`simulate_phase_fractions`] measures those fractions empirically from
//! an event-driven run and is the oracle the closed forms are tested
//! against.

use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use thiserror::Error;

use crate::calib::pipeline::{FrameObservations, KeypointObservation};
use crate::calib::quant::quantize_descriptor;
use crate::calib::CameraModel;
use crate::seeding::{self, tags};

/// Errors from world generation and trace parsing.
#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    /// A model parameter left its documented range.
    #[error("{name} = {value} is outside its valid range")]
    InvalidParameter { name: &'static str, value: f64 },
    /// Arena grid dimensions must tile the physical dimensions exactly.
    #[error("arena of {width_m}×{length_m} m is not an exact multiple of {cell_m} m cells")]
    ArenaGrid {
        width_m: f64,
        length_m: f64,
        cell_m: f64,
    },
    /// A trace file failed to parse.
    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: usize, message: String },
    /// A trace file with an unsupported version marker.
    #[error("unsupported trace version line: {found:?}")]
    TraceVersion { found: String },
}

/// Poisson arrivals with log-normal dwell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalModel {
    /// Arrival rate λ, targets per second.
    pub arrival_rate_per_s: f64,
    /// Log-mean μ_S of the dwell distribution.
    pub dwell_log_mean: f64,
    /// Log-standard-deviation σ_S of the dwell distribution.
    pub dwell_log_sigma: f64,
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.arrival_rate_per_s >= 0.0) {
            return Err(ScenarioError::InvalidParameter {
                name: "arrival_rate_per_s",
                value: self.arrival_rate_per_s,
            });
        }
        if !(self.dwell_log_sigma >= 0.0) {
            return Err(ScenarioError::InvalidParameter {
                name: "dwell_log_sigma",
                value: self.dwell_log_sigma,
            });
        }
        if !self.offered_load().is_finite() {
            return Err(ScenarioError::InvalidParameter {
                name: "offered_load",
                value: self.offered_load(),
            });
        }
        Ok(())
    }

    /// Offered load `ρ = λ·E[S] = λ·exp(μ_S + σ_S²/2)`: the mean number
    /// of concurrently-present targets in steady state.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate_per_s
            * (self.dwell_log_mean + self.dwell_log_sigma * self.dwell_log_sigma / 2.0).exp()
    }

    /// Mean dwell time `E[S]` in seconds.
    pub fn mean_dwell_s(&self) -> f64 {
        (self.dwell_log_mean + self.dwell_log_sigma * self.dwell_log_sigma / 2.0).exp()
    }
}

/// Rectangular arena centered on the world origin with a uniform
/// analysis grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    pub width_m: f64,
    pub length_m: f64,
    pub grid_w: usize,
    pub grid_h: usize,
}

impl Arena {
    /// Builds an arena whose grid cells are exactly `cell_m` on a side.
    pub fn new(width_m: f64, length_m: f64, cell_m: f64) -> Result<Self, ScenarioError> {
        if !(width_m > 0.0 && length_m > 0.0 && cell_m > 0.0) {
            return Err(ScenarioError::InvalidParameter {
                name: "arena dimensions",
                value: cell_m,
            });
        }
        let grid_w = width_m / cell_m;
        let grid_h = length_m / cell_m;
        let exact = |v: f64| (v - v.round()).abs() < 1e-9 && v.round() >= 1.0;
        if !exact(grid_w) || !exact(grid_h) {
            return Err(ScenarioError::ArenaGrid {
                width_m,
                length_m,
                cell_m,
            });
        }
        Ok(Self {
            width_m,
            length_m,
            grid_w: grid_w.round() as usize,
            grid_h: grid_h.round() as usize,
        })
    }

    /// Grid cell edge length in meters.
    pub fn cell_m(&self) -> f64 {
        self.width_m / self.grid_w as f64
    }

    /// World coordinates of the center of cell `(ix, iy)`; `ix` runs
    /// across the width, `iy` along the length.
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2<f64> {
        let c = self.cell_m();
        Point2::new(
            -self.width_m / 2.0 + (ix as f64 + 0.5) * c,
            -self.length_m / 2.0 + (iy as f64 + 0.5) * c,
        )
    }

    /// True when a ground point lies inside the arena.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x.abs() <= self.width_m / 2.0 && p.y.abs() <= self.length_m / 2.0
    }
}

impl Default for Arena {
    /// The bundled 12 m × 36 m arena on a 480×1440 grid (2.5 cm cells).
    fn default() -> Self {
        Arena::new(12.0, 36.0, 0.025).expect("default arena tiles exactly")
    }
}

/// Everything needed to synthesize a world: arrivals, motion and
/// appearance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldModel {
    pub arrival: ArrivalModel,
    /// Random-walk speed scale, m/s (per-step displacement σ is
    /// `walk_speed·Δt` per axis).
    pub walk_speed_m_s: f64,
    /// Appearance descriptor dimension.
    pub descriptor_dim: usize,
    /// Per-component spread of the identity-specific part of a
    /// descriptor. Every identity in a scene shares one base appearance
    /// pattern (spread [`SHARED_APPEARANCE_SIGMA`]) and differs from the
    /// others only by an offset of this magnitude, so a quantizer must
    /// resolve steps of roughly `identity_sigma` before codes carry any
    /// identity information. The default is tuned so unquantized top-5
    /// matching is near-perfect while 1-bit codes match near chance.
    pub identity_sigma: f64,
}

/// Per-component spread of the scene-wide appearance pattern shared by
/// every identity. It dominates [`WorldModel::identity_sigma`] by an
/// order of magnitude, which is what makes coarse descriptor codes
/// uninformative: they capture the shared pattern and little else.
pub const SHARED_APPEARANCE_SIGMA: f64 = 1.0;

impl Default for WorldModel {
    fn default() -> Self {
        Self {
            arrival: ArrivalModel {
                arrival_rate_per_s: 0.5,
                dwell_log_mean: 3.0,
                dwell_log_sigma: 0.5,
            },
            walk_speed_m_s: 1.4,
            descriptor_dim: 128,
            identity_sigma: 0.1,
        }
    }
}

/// One target's life: arrival, dwell, sampled path and appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrack {
    pub identity: u64,
    pub arrival_time_s: f64,
    pub dwell_s: f64,
    /// Index of the first time-grid step at which the target is present.
    pub first_step: usize,
    /// Ground positions at consecutive grid steps starting at `first_step`.
    pub positions: Vec<Point2<f64>>,
    /// The identity's true appearance descriptor.
    pub true_descriptor: Vec<f64>,
}

impl TargetTrack {
    /// Position at a global grid step, if the target is present then.
    pub fn position_at(&self, step: usize) -> Option<Point2<f64>> {
        step.checked_sub(self.first_step)
            .and_then(|i| self.positions.get(i))
            .copied()
    }
}

/// A complete generated world.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub arena: Arena,
    pub tracks: Vec<TargetTrack>,
    pub duration_s: f64,
    pub time_step_s: f64,
    pub rng_seed: u64,
    pub descriptor_dim: usize,
}

impl ScenarioTrace {
    /// Number of time-grid steps (`t = i·Δt` for `i < n_steps`).
    pub fn n_steps(&self) -> usize {
        (self.duration_s / self.time_step_s).ceil() as usize
    }

    /// Indices and positions of all targets present at a grid step.
    pub fn active_at(&self, step: usize) -> Vec<(usize, Point2<f64>)> {
        self.tracks
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.position_at(step).map(|p| (i, p)))
            .collect()
    }

    /// Ground-truth positions only (convenience for detection scoring).
    pub fn positions_at(&self, step: usize) -> Vec<Point2<f64>> {
        self.active_at(step).into_iter().map(|(_, p)| p).collect()
    }

    /// Mean concurrent target count over the whole trace.
    pub fn mean_active_count(&self) -> f64 {
        let n = self.n_steps();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|s| self.active_at(s).len()).sum::<usize>() as f64 / n as f64
    }
}

/// Deterministic per-identity descriptor: a scene-wide base pattern
/// (one draw per scene, spread [`SHARED_APPEARANCE_SIGMA`]) plus a small
/// per-identity offset (spread `sigma`). Both streams derive from the
/// trace seed alone, so serialized traces can rebuild appearance.
///
/// The base cancels whenever two descriptors from the same scene are
/// compared, so unquantized matching sees only the offsets. Quantized
/// codes, by contrast, are dominated by the base until the step size
/// shrinks below the offset scale — coarse codes are near-useless for
/// telling identities apart, fine codes approach the unquantized
/// optimum.
fn identity_descriptor(seed: u64, identity: u64, dim: usize, sigma: f64) -> Vec<f64> {
    let mut base_rng =
        ChaCha8Rng::seed_from_u64(seeding::derive_seed(seed, &[tags::DESCRIPTOR]));
    let base = Normal::new(0.0, SHARED_APPEARANCE_SIGMA).expect("constant sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(
        seed,
        &[tags::DESCRIPTOR, identity],
    ));
    let offset = Normal::new(0.0, sigma).expect("sigma validated");
    (0..dim)
        .map(|_| base.sample(&mut base_rng) + offset.sample(&mut rng))
        .collect()
}

/// Generates a world: Poisson arrivals, log-normal dwells, uniform entry
/// points and a reflected Gaussian random walk, all from `seed`.
pub fn generate(
    world: &WorldModel,
    arena: &Arena,
    duration_s: f64,
    time_step_s: f64,
    seed: u64,
) -> Result<ScenarioTrace, ScenarioError> {
    world.arrival.validate()?;
    if !(duration_s > 0.0) {
        return Err(ScenarioError::InvalidParameter {
            name: "duration_s",
            value: duration_s,
        });
    }
    if !(time_step_s > 0.0) {
        return Err(ScenarioError::InvalidParameter {
            name: "time_step_s",
            value: time_step_s,
        });
    }
    if !(world.walk_speed_m_s >= 0.0) {
        return Err(ScenarioError::InvalidParameter {
            name: "walk_speed_m_s",
            value: world.walk_speed_m_s,
        });
    }
    if !(world.identity_sigma > 0.0) {
        return Err(ScenarioError::InvalidParameter {
            name: "identity_sigma",
            value: world.identity_sigma,
        });
    }

    let n_steps = (duration_s / time_step_s).ceil() as usize;
    let mut arrivals_rng =
        ChaCha8Rng::seed_from_u64(seeding::derive_seed(seed, &[tags::SCENARIO]));
    let dwell_dist = LogNormal::new(
        world.arrival.dwell_log_mean,
        world.arrival.dwell_log_sigma,
    )
    .expect("dwell parameters validated");

    // Arrival instants over [0, duration).
    let mut arrival_times = Vec::new();
    if world.arrival.arrival_rate_per_s > 0.0 {
        let exp = Exp::new(world.arrival.arrival_rate_per_s).expect("rate > 0");
        let mut t = exp.sample(&mut arrivals_rng);
        while t < duration_s {
            arrival_times.push(t);
            t += exp.sample(&mut arrivals_rng);
        }
    }

    let half_w = arena.width_m / 2.0;
    let half_l = arena.length_m / 2.0;
    let step_sigma = world.walk_speed_m_s * time_step_s;
    let mut tracks = Vec::new();
    for (identity, &arrival) in arrival_times.iter().enumerate() {
        let identity = identity as u64;
        let dwell = dwell_dist.sample(&mut arrivals_rng);
        let first_step = (arrival / time_step_s).ceil() as usize;
        let depart = arrival + dwell;
        let mut motion_rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(
            seed,
            &[tags::SCENARIO, identity, 1],
        ));
        let mut pos = Point2::new(
            motion_rng.gen_range(-half_w..half_w),
            motion_rng.gen_range(-half_l..half_l),
        );
        let walk = Normal::new(0.0, step_sigma.max(f64::MIN_POSITIVE)).expect("sigma ≥ 0");
        let mut positions = Vec::new();
        let mut s = first_step;
        while (s as f64) * time_step_s < depart && s < n_steps {
            positions.push(pos);
            let mut nx = pos.x + walk.sample(&mut motion_rng);
            let mut ny = pos.y + walk.sample(&mut motion_rng);
            // Reflect at the arena walls.
            while nx.abs() > half_w {
                nx = if nx > half_w {
                    2.0 * half_w - nx
                } else {
                    -2.0 * half_w - nx
                };
            }
            while ny.abs() > half_l {
                ny = if ny > half_l {
                    2.0 * half_l - ny
                } else {
                    -2.0 * half_l - ny
                };
            }
            pos = Point2::new(nx, ny);
            s += 1;
        }
        if positions.is_empty() {
            continue; // dwell ended before the first grid step
        }
        tracks.push(TargetTrack {
            identity,
            arrival_time_s: arrival,
            dwell_s: dwell,
            first_step,
            positions,
            true_descriptor: identity_descriptor(
                seed,
                identity,
                world.descriptor_dim,
                world.identity_sigma,
            ),
        });
    }

    Ok(ScenarioTrace {
        arena: *arena,
        tracks,
        duration_s,
        time_step_s,
        rng_seed: seed,
        descriptor_dim: world.descriptor_dim,
    })
}

/// Number of active targets whose ground position projects inside the
/// camera's image at time `t_s` (nearest grid step).
pub fn visible_count(trace: &ScenarioTrace, camera: &CameraModel, t_s: f64) -> usize {
    let step = ((t_s / trace.time_step_s).round() as usize).min(trace.n_steps().saturating_sub(1));
    trace
        .active_at(step)
        .iter()
        .filter(|(_, p)| camera.sees_ground_point(p))
        .count()
}

/// Observation noise and quantizer settings shared by all cameras.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel {
    /// Per-component Gaussian descriptor noise added by each view. The
    /// default matches [`WorldModel::identity_sigma`]: per component the
    /// noise drowns the identity offsets, but summed over the full
    /// descriptor the offsets still separate identities cleanly, so
    /// unquantized top-5 matching is near-perfect while 1-bit codes
    /// (whose informative components are exactly the noise-scale ones)
    /// match near chance.
    pub view_noise_sigma: f64,
    /// Gaussian pixel noise on observed image points.
    pub pixel_noise_px: f64,
    /// Quantizer clipping range (descriptor units). The default covers
    /// ±2.5σ of the shared appearance pattern, so clipping is rare while
    /// the step size at b bits is `5/2^b` — coarse codes cannot resolve
    /// the ~0.1-unit identity offsets.
    pub quant_range: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            view_noise_sigma: 0.1,
            pixel_noise_px: 0.4,
            quant_range: 2.5,
        }
    }
}

/// One camera's view of one target at one step: noisy descriptor,
/// optionally quantized to `bits` per component. `None` when the target
/// is not visible from the camera.
pub fn observe_descriptor<R: Rng + ?Sized>(
    track: &TargetTrack,
    step: usize,
    camera: &CameraModel,
    model: &ObservationModel,
    bits: Option<u32>,
    rng: &mut R,
) -> Option<Vec<f64>> {
    let pos = track.position_at(step)?;
    if !camera.sees_ground_point(&pos) {
        return None;
    }
    let noise = Normal::new(0.0, model.view_noise_sigma.max(f64::MIN_POSITIVE))
        .expect("sigma ≥ 0");
    let noisy: Vec<f64> = track
        .true_descriptor
        .iter()
        .map(|&x| x + noise.sample(rng))
        .collect();
    Some(match bits {
        Some(b) => quantize_descriptor(&noisy, b, model.quant_range),
        None => noisy,
    })
}

/// Collects per-frame keypoint observations (noisy pixel + raw noisy
/// descriptor) for a camera over the given steps. Descriptors are left
/// unquantized here; the calibration pipeline quantizes the reference
/// side according to its bit plan.
pub fn observe_frames<R: Rng + ?Sized>(
    trace: &ScenarioTrace,
    camera: &CameraModel,
    steps: &[usize],
    model: &ObservationModel,
    rng: &mut R,
) -> Vec<FrameObservations> {
    let desc_noise = Normal::new(0.0, model.view_noise_sigma.max(f64::MIN_POSITIVE))
        .expect("sigma ≥ 0");
    let px_noise =
        Normal::new(0.0, model.pixel_noise_px.max(f64::MIN_POSITIVE)).expect("sigma ≥ 0");
    steps
        .iter()
        .map(|&step| {
            let keypoints = trace
                .active_at(step)
                .into_iter()
                .filter_map(|(idx, pos)| {
                    if !camera.sees_ground_point(&pos) {
                        return None;
                    }
                    let track = &trace.tracks[idx];
                    let pixel = camera.project_ground(&pos).ok()?;
                    let descriptor = track
                        .true_descriptor
                        .iter()
                        .map(|&x| x + desc_noise.sample(rng))
                        .collect();
                    Some(KeypointObservation {
                        identity: track.identity,
                        image_point: nalgebra::Point2::new(
                            pixel.x + px_noise.sample(rng),
                            pixel.y + px_noise.sample(rng),
                        ),
                        descriptor,
                    })
                })
                .collect();
            FrameObservations { step, keypoints }
        })
        .collect()
}

/// Empirically measures the long-run idle/calibrating/streaming time
/// fractions `[π_0, π_1, π_2]` of the three-phase process.
///
/// The target process is event-driven (exact interval arithmetic, no
/// discretization of arrivals/departures); calibration opportunities are
/// one-second slots taken with probability `p_1`. Arrivals start a
/// 10·E[S] warm-up before the measured window so the window is
/// effectively stationary.
pub fn simulate_phase_fractions(
    model: &ArrivalModel,
    p_1: f64,
    horizon_s: f64,
    seed: u64,
) -> Result<[f64; 3], ScenarioError> {
    model.validate()?;
    if !(0.0..=1.0).contains(&p_1) {
        return Err(ScenarioError::InvalidParameter {
            name: "p_1",
            value: p_1,
        });
    }
    if !(horizon_s >= 1.0) {
        return Err(ScenarioError::InvalidParameter {
            name: "horizon_s",
            value: horizon_s,
        });
    }

    let warmup = 10.0 * model.mean_dwell_s();
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(seed, &[tags::SCENARIO, 2]));

    // Build ±1 events for the occupancy process L(t).
    let mut events: Vec<(f64, i32)> = Vec::new();
    if model.arrival_rate_per_s > 0.0 {
        let exp = Exp::new(model.arrival_rate_per_s).expect("rate > 0");
        let dwell = LogNormal::new(model.dwell_log_mean, model.dwell_log_sigma)
            .expect("validated");
        let mut t = -warmup + exp.sample(&mut rng);
        while t < horizon_s {
            let d: f64 = dwell.sample(&mut rng);
            events.push((t, 1));
            events.push((t + d, -1));
            t += exp.sample(&mut rng);
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sweep to collect the intervals with L(t) = 0 inside [0, horizon].
    let mut idle_intervals: Vec<(f64, f64)> = Vec::new();
    let mut count = 0i64;
    let mut idle_since = Some(-warmup);
    for (t, delta) in events {
        if t >= horizon_s {
            break;
        }
        let was_zero = count == 0;
        count += delta as i64;
        if was_zero && count > 0 {
            if let Some(s) = idle_since.take() {
                let (a, b) = (s.max(0.0), t.min(horizon_s));
                if b > a {
                    idle_intervals.push((a, b));
                }
            }
        } else if !was_zero && count == 0 {
            idle_since = Some(t);
        }
    }
    if let Some(s) = idle_since {
        let (a, b) = (s.max(0.0), horizon_s);
        if b > a {
            idle_intervals.push((a, b));
        }
    }

    // Overlay per-second calibration slots and integrate exactly.
    let mut slot_rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(seed, &[tags::SCENARIO, 3]));
    let n_slots = horizon_s.floor() as usize;
    let total = n_slots as f64;
    let mut time_cal = 0.0;
    let mut time_idle = 0.0;
    let mut cursor = 0usize; // index into idle_intervals
    for s in 0..n_slots {
        let (a, b) = (s as f64, s as f64 + 1.0);
        let calibrating = slot_rng.gen::<f64>() < p_1;
        if calibrating {
            time_cal += 1.0;
            continue;
        }
        while cursor < idle_intervals.len() && idle_intervals[cursor].1 <= a {
            cursor += 1;
        }
        let mut k = cursor;
        while k < idle_intervals.len() && idle_intervals[k].0 < b {
            let (ia, ib) = idle_intervals[k];
            time_idle += (ib.min(b) - ia.max(a)).max(0.0);
            k += 1;
        }
    }
    let pi_1 = time_cal / total;
    let pi_0 = time_idle / total;
    let pi_2 = 1.0 - pi_0 - pi_1;
    Ok([pi_0, pi_1, pi_2])
}

// ---------------------------------------------------------------------
// Trace serialization: versioned columnar text, one row per target per
// step. Floats print in Rust's shortest round-trip form, so rereading is
// bit-identical.
// ---------------------------------------------------------------------

/// Trace format version written by [`write_trace`].
pub const TRACE_VERSION: u32 = 1;

/// One serialized trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    pub identity: u64,
    pub x_m: f64,
    pub y_m: f64,
}

/// A parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub version: u32,
    pub rng_seed: u64,
    pub duration_s: f64,
    pub time_step_s: f64,
    pub arena: Arena,
    pub descriptor_dim: usize,
    pub rows: Vec<TraceRow>,
}

impl ScenarioTrace {
    /// Rows in (step, identity) order, as serialized.
    pub fn rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::new();
        for step in 0..self.n_steps() {
            let t = step as f64 * self.time_step_s;
            for (idx, pos) in self.active_at(step) {
                rows.push(TraceRow {
                    time_s: t,
                    identity: self.tracks[idx].identity,
                    x_m: pos.x,
                    y_m: pos.y,
                });
            }
        }
        rows
    }
}

/// Serializes a trace to the columnar text format (version 1):
///
/// ```text
/// # camsim-trace v1
/// # seed=<u64> duration_s=<f64> time_step_s=<f64> arena=<w>x<l> cell_m=<f64> descriptor_dim=<usize>
/// time_s,identity,x_m,y_m
/// <row per target per step>
/// ```
pub fn write_trace(trace: &ScenarioTrace) -> String {
    let mut out = String::new();
    out.push_str(&format!("# camsim-trace v{TRACE_VERSION}\n"));
    out.push_str(&format!(
        "# seed={} duration_s={} time_step_s={} arena={}x{} cell_m={} descriptor_dim={}\n",
        trace.rng_seed,
        trace.duration_s,
        trace.time_step_s,
        trace.arena.width_m,
        trace.arena.length_m,
        trace.arena.cell_m(),
        trace.descriptor_dim
    ));
    out.push_str("time_s,identity,x_m,y_m\n");
    for r in trace.rows() {
        out.push_str(&format!("{},{},{},{}\n", r.time_s, r.identity, r.x_m, r.y_m));
    }
    out
}

/// Parses a trace file produced by [`write_trace`].
pub fn read_trace(text: &str) -> Result<TraceFile, ScenarioError> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: &str| ScenarioError::TraceParse {
        line: line + 1,
        message: message.to_string(),
    };

    let (n0, version_line) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty trace file"))?;
    let version = version_line
        .strip_prefix("# camsim-trace v")
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| ScenarioError::TraceVersion {
            found: version_line.to_string(),
        })?;
    if version != TRACE_VERSION {
        return Err(ScenarioError::TraceVersion {
            found: version_line.to_string(),
        });
    }
    let _ = n0;

    let (n1, meta_line) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing metadata line"))?;
    let mut seed = None;
    let mut duration = None;
    let mut step = None;
    let mut arena_dims = None;
    let mut cell = None;
    let mut dim = None;
    for field in meta_line.trim_start_matches('#').split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(n1, "malformed metadata field"))?;
        match key {
            "seed" => seed = value.parse::<u64>().ok(),
            "duration_s" => duration = value.parse::<f64>().ok(),
            "time_step_s" => step = value.parse::<f64>().ok(),
            "arena" => {
                arena_dims = value
                    .split_once('x')
                    .and_then(|(w, l)| Some((w.parse::<f64>().ok()?, l.parse::<f64>().ok()?)));
            }
            "cell_m" => cell = value.parse::<f64>().ok(),
            "descriptor_dim" => dim = value.parse::<usize>().ok(),
            _ => return Err(parse_err(n1, "unknown metadata key")),
        }
    }
    let (aw, al) = arena_dims.ok_or_else(|| parse_err(n1, "missing arena dims"))?;
    let arena = Arena::new(aw, al, cell.ok_or_else(|| parse_err(n1, "missing cell_m"))?)?;

    let (n2, header) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing column header"))?;
    if header != "time_s,identity,x_m,y_m" {
        return Err(parse_err(n2, "unexpected column header"));
    }

    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| parse_err(n, &format!("missing column {what}")))
        };
        let time_s = next("time_s")?
            .parse::<f64>()
            .map_err(|e| parse_err(n, &e.to_string()))?;
        let identity = next("identity")?
            .parse::<u64>()
            .map_err(|e| parse_err(n, &e.to_string()))?;
        let x_m = next("x_m")?
            .parse::<f64>()
            .map_err(|e| parse_err(n, &e.to_string()))?;
        let y_m = next("y_m")?
            .parse::<f64>()
            .map_err(|e| parse_err(n, &e.to_string()))?;
        rows.push(TraceRow {
            time_s,
            identity,
            x_m,
            y_m,
        });
    }

    Ok(TraceFile {
        version,
        rng_seed: seed.ok_or_else(|| parse_err(n1, "missing seed"))?,
        duration_s: duration.ok_or_else(|| parse_err(n1, "missing duration_s"))?,
        time_step_s: step.ok_or_else(|| parse_err(n1, "missing time_step_s"))?,
        arena,
        descriptor_dim: dim.ok_or_else(|| parse_err(n1, "missing descriptor_dim"))?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::camera::{Extrinsics, Intrinsics};
    use nalgebra::Point3;

    fn small_world(rate: f64) -> WorldModel {
        WorldModel {
            arrival: ArrivalModel {
                arrival_rate_per_s: rate,
                dwell_log_mean: 0.0,
                dwell_log_sigma: 0.0,
            },
            descriptor_dim: 8,
            ..WorldModel::default()
        }
    }

    #[test]
    fn zero_rate_gives_zero_tracks() {
        let trace = generate(&small_world(0.0), &Arena::default(), 10.0, 0.5, 1).unwrap();
        assert!(trace.tracks.is_empty());
    }

    /// λ=1, μ_S=0, σ_S=0 → ρ = 1: the long-run mean concurrent count must
    /// sit within ±0.05 of 1.
    #[test]
    fn mean_concurrent_count_matches_offered_load() {
        let world = small_world(1.0);
        let trace = generate(&world, &Arena::default(), 20_000.0, 1.0, 99).unwrap();
        let mean = trace.mean_active_count();
        assert!(
            (mean - 1.0).abs() < 0.05,
            "mean concurrent count {mean}, want ≈ 1"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let world = WorldModel::default();
        let a = generate(&world, &Arena::default(), 60.0, 0.5, 7).unwrap();
        let b = generate(&world, &Arena::default(), 60.0, 0.5, 7).unwrap();
        assert_eq!(a, b);
        let c = generate(&world, &Arena::default(), 60.0, 0.5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn all_positions_stay_inside_arena() {
        let arena = Arena::default();
        let trace = generate(&WorldModel::default(), &arena, 300.0, 0.5, 3).unwrap();
        assert!(!trace.tracks.is_empty());
        for track in &trace.tracks {
            for p in &track.positions {
                assert!(arena.contains(p), "position {p:?} escaped the arena");
            }
        }
    }

    #[test]
    fn offered_load_closed_forms() {
        let m = ArrivalModel {
            arrival_rate_per_s: 2.0,
            dwell_log_mean: 0.0,
            dwell_log_sigma: 0.0,
        };
        assert!((m.offered_load() - 2.0).abs() < 1e-12);
        let m = ArrivalModel {
            arrival_rate_per_s: 1.0,
            dwell_log_mean: 1.0,
            dwell_log_sigma: 0.0,
        };
        assert!((m.offered_load() - std::f64::consts::E).abs() < 1e-12);
    }

    /// ρ from the closed form vs λ × sample-mean dwell.
    #[test]
    fn offered_load_matches_sampled_dwell_mean() {
        let m = ArrivalModel {
            arrival_rate_per_s: 0.5,
            dwell_log_mean: 0.3,
            dwell_log_sigma: 0.8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dist = LogNormal::new(0.3, 0.8).unwrap();
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum::<f64>() / n as f64;
        let mc = 0.5 * mean;
        assert!(
            ((m.offered_load() - mc) / mc).abs() < 0.02,
            "closed form {} vs Monte Carlo {mc}",
            m.offered_load()
        );
    }

    fn overhead_camera() -> CameraModel {
        CameraModel {
            intrinsics: Intrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
            },
            extrinsics: Extrinsics::look_at(Point3::new(-8.0, -14.0, 2.8), Point3::origin())
                .unwrap(),
            image_width_px: 640,
            image_height_px: 480,
        }
    }

    #[test]
    fn visible_count_zero_without_targets() {
        let trace = generate(&small_world(0.0), &Arena::default(), 10.0, 0.5, 1).unwrap();
        assert_eq!(visible_count(&trace, &overhead_camera(), 5.0), 0);
    }

    /// A target parked exactly where the camera's principal axis meets
    /// the ground must be counted.
    #[test]
    fn visible_count_sees_target_on_principal_axis() {
        let cam = overhead_camera();
        // The look_at target (the origin) lies on the principal axis.
        let track = TargetTrack {
            identity: 0,
            arrival_time_s: 0.0,
            dwell_s: 10.0,
            first_step: 0,
            positions: vec![Point2::new(0.0, 0.0); 20],
            true_descriptor: vec![0.0; 8],
        };
        let trace = ScenarioTrace {
            arena: Arena::default(),
            tracks: vec![track],
            duration_s: 10.0,
            time_step_s: 0.5,
            rng_seed: 0,
            descriptor_dim: 8,
        };
        assert_eq!(visible_count(&trace, &cam, 0.0), 1);
    }

    #[test]
    fn visible_count_invariant_under_relabeling() {
        let mut trace = generate(&WorldModel::default(), &Arena::default(), 60.0, 0.5, 5).unwrap();
        let cam = overhead_camera();
        let before: Vec<usize> = (0..10)
            .map(|i| visible_count(&trace, &cam, i as f64))
            .collect();
        let n = trace.tracks.len() as u64;
        for t in &mut trace.tracks {
            t.identity = n - 1 - t.identity; // reverse labels
        }
        trace.tracks.reverse();
        let after: Vec<usize> = (0..10)
            .map(|i| visible_count(&trace, &cam, i as f64))
            .collect();
        assert_eq!(before, after);
    }

    /// Different poses must see systematically different counts.
    #[test]
    fn counts_differ_across_poses() {
        let trace = generate(&WorldModel::default(), &Arena::default(), 200.0, 0.5, 21).unwrap();
        let near = overhead_camera();
        let far = CameraModel {
            extrinsics: Extrinsics::look_at(
                Point3::new(0.0, 19.5, 2.8),
                Point3::new(0.0, 10.0, 0.0),
            )
            .unwrap(),
            ..near.clone()
        };
        let mean = |cam: &CameraModel| -> f64 {
            let n = trace.n_steps();
            (0..n)
                .map(|s| visible_count(&trace, cam, s as f64 * 0.5))
                .sum::<usize>() as f64
                / n as f64
        };
        let (m1, m2) = (mean(&near), mean(&far));
        assert!(
            (m1 - m2).abs() > 0.2,
            "poses should differ systematically: {m1} vs {m2}"
        );
    }

    #[test]
    fn observe_descriptor_exact_when_clean() {
        let cam = overhead_camera();
        let track = TargetTrack {
            identity: 0,
            arrival_time_s: 0.0,
            dwell_s: 10.0,
            first_step: 0,
            positions: vec![Point2::new(0.0, 0.0); 4],
            true_descriptor: vec![0.11, -0.2, 0.05, 0.3],
        };
        let model = ObservationModel {
            view_noise_sigma: 0.0,
            ..ObservationModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = observe_descriptor(&track, 0, &cam, &model, None, &mut rng).unwrap();
        for (a, b) in d.iter().zip(&track.true_descriptor) {
            assert!((a - b).abs() < 1e-9);
        }

        // 1-bit quantization: two-level codebook at ±range/2.
        let d1 = observe_descriptor(&track, 0, &cam, &model, Some(1), &mut rng).unwrap();
        let half = ObservationModel::default().quant_range / 2.0;
        for v in &d1 {
            assert!(*v == half || *v == -half, "level {v}");
        }
    }

    #[test]
    fn observe_descriptor_absent_when_invisible() {
        let cam = overhead_camera();
        let track = TargetTrack {
            identity: 0,
            arrival_time_s: 0.0,
            dwell_s: 10.0,
            first_step: 0,
            // Far corner behind the camera.
            positions: vec![Point2::new(-5.9, -17.9); 4],
            true_descriptor: vec![0.0; 4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = observe_descriptor(
            &track,
            0,
            &cam,
            &ObservationModel::default(),
            None,
            &mut rng,
        );
        // Visibility depends on the pose; the contract is only that
        // invisibility maps to None rather than junk.
        if !cam.sees_ground_point(&Point2::new(-5.9, -17.9)) {
            assert!(got.is_none());
        }
        // Absent steps are always None.
        assert!(
            observe_descriptor(&track, 99, &cam, &ObservationModel::default(), None, &mut rng)
                .is_none()
        );
    }

    /// Phase fractions against the closed forms
    /// (π_0, π_1, π_2) = ((1−p_1)e^{−ρ}, p_1, (1−p_1)(1−e^{−ρ})).
    #[test]
    fn phase_fractions_match_closed_forms() {
        for (rho, p1) in [(0.5, 0.0), (1.0, 0.1), (2.0, 0.1)] {
            // Short dwells decorrelate the process quickly: E[S] = 0.25.
            let sigma: f64 = 0.5;
            let mu = 0.25f64.ln() - sigma * sigma / 2.0;
            let model = ArrivalModel {
                arrival_rate_per_s: rho / 0.25,
                dwell_log_mean: mu,
                dwell_log_sigma: sigma,
            };
            assert!((model.offered_load() - rho).abs() < 1e-12);
            let [pi0, pi1, pi2] =
                simulate_phase_fractions(&model, p1, 100_000.0, 77).unwrap();
            let e0 = (1.0 - p1) * (-rho).exp();
            let e1 = p1;
            let e2 = (1.0 - p1) * (1.0 - (-rho).exp());
            assert!((pi0 - e0).abs() < 0.01, "π0 {pi0} vs {e0} (ρ={rho})");
            assert!((pi1 - e1).abs() < 0.01, "π1 {pi1} vs {e1}");
            assert!((pi2 - e2).abs() < 0.01, "π2 {pi2} vs {e2}");
            assert!((pi0 + pi1 + pi2 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_round_trip_is_bit_identical() {
        let trace = generate(&WorldModel::default(), &Arena::default(), 30.0, 0.5, 13).unwrap();
        let text = write_trace(&trace);
        let parsed = read_trace(&text).unwrap();
        assert_eq!(parsed.version, TRACE_VERSION);
        assert_eq!(parsed.rng_seed, trace.rng_seed);
        assert_eq!(parsed.arena, trace.arena);
        let rows = trace.rows();
        assert_eq!(parsed.rows.len(), rows.len());
        for (a, b) in parsed.rows.iter().zip(&rows) {
            // Bit-identical floats, not just approximately equal.
            assert_eq!(a.time_s.to_bits(), b.time_s.to_bits());
            assert_eq!(a.identity, b.identity);
            assert_eq!(a.x_m.to_bits(), b.x_m.to_bits());
            assert_eq!(a.y_m.to_bits(), b.y_m.to_bits());
        }
        // Re-serializing the parse reproduces the bytes exactly.
        let trace_like = ScenarioTrace {
            arena: parsed.arena,
            tracks: trace.tracks.clone(),
            duration_s: parsed.duration_s,
            time_step_s: parsed.time_step_s,
            rng_seed: parsed.rng_seed,
            descriptor_dim: parsed.descriptor_dim,
        };
        assert_eq!(write_trace(&trace_like), text);
    }

    #[test]
    fn trace_rejects_bad_version_and_garbage() {
        assert!(matches!(
            read_trace("# other-format v9\n"),
            Err(ScenarioError::TraceVersion { .. })
        ));
        let trace = generate(&small_world(0.5), &Arena::default(), 5.0, 0.5, 2).unwrap();
        let mut text = write_trace(&trace);
        text.push_str("not,a,valid,row\n");
        assert!(matches!(
            read_trace(&text),
            Err(ScenarioError::TraceParse { .. })
        ));
    }

    #[test]
    fn arena_grid_must_tile_exactly() {
        assert!(Arena::new(12.0, 36.0, 0.025).is_ok());
        assert!(matches!(
            Arena::new(12.0, 36.0, 0.07),
            Err(ScenarioError::ArenaGrid { .. })
        ));
        let a = Arena::default();
        assert_eq!((a.grid_w, a.grid_h), (480, 1440));
        assert!((a.cell_m() - 0.025).abs() < 1e-12);
    }

    #[test]
    fn cell_centers_span_the_arena() {
        let a = Arena::default();
        let first = a.cell_center(0, 0);
        let last = a.cell_center(479, 1439);
        assert!((first.x - (-6.0 + 0.0125)).abs() < 1e-9);
        assert!((first.y - (-18.0 + 0.0125)).abs() < 1e-9);
        assert!((last.x - (6.0 - 0.0125)).abs() < 1e-9);
        assert!((last.y - (18.0 - 0.0125)).abs() < 1e-9);
    }
}
