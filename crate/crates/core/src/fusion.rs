//! Priority-aware multi-view fusion.
//!
//! Each camera produces a synthetic detection heat-map: a Gaussian bump
//! centered on the projected image position of every visible target,
//! plus white noise whose level falls as the streaming rate rises (via
//! the rate–accuracy proxy). The bump is perspective-corrected — each
//! image pixel's intensity decays with the *ground-plane* distance
//! between the pixel's back-projection and the target — mimicking a
//! foot-point detector, so a map's back-projection is an isotropic
//! ground blob rather than a smeared ray. Views are ranked by
//! average-pooled priority; an anticipated packet-loss budget of
//! `floor(r·K + 0.5)` views is masked starting from the lowest priority.
//! Unmasked maps are warped onto the arena's ground grid through each
//! camera's inverse ground-plane projection (bilinear sampling) and
//! combined by mask-normalized averaging:
//!
//! ```text
//! fused(cell) = Σ_{k unmasked, k sees cell} warp_k(cell) / #contributors
//! ```
//!
//! Peaks of the fused occupancy map are detections, scored against
//! ground truth by MODA = `(1 − (misses + false positives)/max(1, GT))·100`
//! with greedy nearest matching inside a 0.5 m radius by default.
//!
//! Ground-grid warps are precomputed once per (fleet, arena, feature
//! dims) in a [`WarpTable`], so repeated fusions are pure gather-adds.

use nalgebra::{Point2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::calib::CameraModel;
use crate::scenario::{Arena, ScenarioTrace};
use crate::sched::AccuracyProxy;
use crate::seeding::{self, tags};

/// Errors from feature synthesis and fusion.
#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    /// Feature maps must share identical dimensions.
    #[error("feature map dims mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Empty tensors have no priority.
    #[error("feature map is empty")]
    EmptyFeatureMap,
    /// Loss rates live in [0, 1].
    #[error("loss rate {value} must lie in [0, 1]")]
    InvalidLossRate { value: f64 },
    /// Detection thresholds live in (0, 1).
    #[error("threshold {value} must lie in (0, 1)")]
    InvalidThreshold { value: f64 },
    /// Per-argument lengths disagree (features vs masks vs warp table).
    #[error("expected {expected} views, got {got}")]
    ViewCountMismatch { expected: usize, got: usize },
}

/// One camera's feature tensor (C×H×W, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub agent_id: usize,
    pub time_index: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    /// Zero-filled map.
    pub fn zeros(agent_id: usize, time_index: usize, height: usize, width: usize) -> Self {
        Self {
            agent_id,
            time_index,
            channels: 1,
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }
}

/// Feature-synthesis settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Feature grid height (default ¼ of the 480-px image).
    pub height: usize,
    /// Feature grid width (default ¼ of the 640-px image).
    pub width: usize,
    /// Gaussian bump radius in *ground-plane* meters (the detector's
    /// localization uncertainty).
    pub bump_sigma_m: f64,
    /// Resolution limit: a camera resolves a ground patch only while one
    /// feature cell spans at most this many meters of ground there.
    /// Beyond that the view neither paints nor contributes to fusion.
    pub max_cell_span_m: f64,
    /// Bump peak value.
    pub amplitude: f64,
    /// Noise level at zero rate; scaled by `1 − quality(rate)`.
    pub noise_base: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            height: 120,
            width: 160,
            bump_sigma_m: 0.3,
            max_cell_span_m: 0.5,
            amplitude: 1.0,
            noise_base: 0.6,
        }
    }
}

/// Synthesizes one camera's feature map at a trace step.
///
/// Bumps peak at the projected positions of visible targets and decay
/// with the ground-plane distance of each pixel's back-projection
/// (perspective-corrected foot-point response). Noise has standard
/// deviation `noise_base·(1 − q)` where `q = 1 − e^{−rate/rate_scale}`
/// is the proxy's normalized quality (`rate_bits = None` means
/// unconstrained rate: `q = 1`, zero noise). Deterministic given
/// `(seed, agent_id, step)`.
pub fn extract_features(
    camera: &CameraModel,
    agent_id: usize,
    trace: &ScenarioTrace,
    step: usize,
    rate_bits: Option<f64>,
    proxy: &AccuracyProxy,
    cfg: &FeatureConfig,
    seed: u64,
) -> FeatureMap {
    let mut map = FeatureMap::zeros(agent_id, step, cfg.height, cfg.width);
    let visible: Vec<Point2<f64>> = trace
        .active_at(step)
        .into_iter()
        .map(|(_, pos)| pos)
        .filter(|p| camera.sees_ground_point(p))
        .collect();

    if let (false, Some(hinv)) = (
        visible.is_empty(),
        camera.ground_matrix().try_inverse(),
    ) {
        let sx = camera.image_width_px as f64 / cfg.width as f64;
        let sy = camera.image_height_px as f64 / cfg.height as f64;
        // Back-project every feature-cell center once. A positive
        // homogeneous weight means the pixel ray meets the ground in
        // front of the camera; the rest (horizon, sky) stay at the
        // noise floor.
        let ground: Vec<Option<Point2<f64>>> = (0..cfg.height * cfg.width)
            .map(|cell| {
                let u = ((cell % cfg.width) as f64 + 0.5) * sx;
                let v = ((cell / cfg.width) as f64 + 0.5) * sy;
                let h = hinv * Vector3::new(u, v, 1.0);
                if h.z <= 1e-12 * h.norm() {
                    None
                } else {
                    Some(Point2::new(h.x / h.z, h.y / h.z))
                }
            })
            .collect();
        for j in 0..cfg.height {
            for i in 0..cfg.width {
                let cell = j * cfg.width + i;
                let Some(g) = ground[cell] else { continue };
                // A detector cannot localize below its bin resolution:
                // widen the bump to the local ground span of one feature
                // cell, and blank cells past the resolution limit.
                let step_x = (i + 1 < cfg.width)
                    .then(|| ground[cell + 1])
                    .flatten()
                    .map_or(0.0, |n| (n - g).norm());
                let step_y = (j + 1 < cfg.height)
                    .then(|| ground[cell + cfg.width])
                    .flatten()
                    .map_or(0.0, |n| (n - g).norm());
                let step = step_x.max(step_y);
                if step > cfg.max_cell_span_m {
                    continue;
                }
                let sigma = cfg.bump_sigma_m.max(0.9 * step);
                let two_sig2 = 2.0 * sigma * sigma;
                let mut response = 0.0f64;
                for t in &visible {
                    let d2 = (g - t).norm_squared();
                    response = response.max(cfg.amplitude * (-d2 / two_sig2).exp());
                }
                map.values[cell] = response;
            }
        }
    }

    let quality = match rate_bits {
        None => 1.0,
        Some(r) => 1.0 - (-r / proxy.rate_scale_bits).exp(),
    };
    let sigma = cfg.noise_base * (1.0 - quality);
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(
            seed,
            &[tags::FEATURE, agent_id as u64, step as u64],
        ));
        let noise = Normal::new(0.0, sigma).expect("sigma > 0");
        for v in &mut map.values {
            *v += noise.sample(&mut rng);
        }
    }
    map
}

/// Average-pooled priority: the mean over all C·H·W elements.
pub fn priority(feature: &FeatureMap) -> Result<f64, FusionError> {
    if feature.values.is_empty() {
        return Err(FusionError::EmptyFeatureMap);
    }
    Ok(feature.values.iter().sum::<f64>() / feature.values.len() as f64)
}

/// One view's mask decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityMask {
    pub agent_index: usize,
    pub priority: f64,
    /// True when the view contributes to fusion (m = 1); masked views
    /// absorb the anticipated packet losses.
    pub mask: bool,
}

/// Masks exactly `floor(r·K + 0.5)` views — the lowest priorities, ties
/// broken by agent index. Returned in agent order.
pub fn assign_masks(priorities: &[f64], loss_rate: f64) -> Result<Vec<PriorityMask>, FusionError> {
    if !(0.0..=1.0).contains(&loss_rate) {
        return Err(FusionError::InvalidLossRate { value: loss_rate });
    }
    let k = priorities.len();
    let n_masked = ((loss_rate * k as f64 + 0.5).floor() as usize).min(k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        priorities[a]
            .total_cmp(&priorities[b])
            .then(a.cmp(&b))
    });
    let mut out: Vec<PriorityMask> = priorities
        .iter()
        .enumerate()
        .map(|(i, &p)| PriorityMask {
            agent_index: i,
            priority: p,
            mask: true,
        })
        .collect();
    for &i in order.iter().take(n_masked) {
        out[i].mask = false;
    }
    Ok(out)
}

/// Ground-occupancy scores on the arena grid, in [0, 1], indexed
/// `iy·grid_w + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    pub arena: Arena,
    pub values: Vec<f64>,
}

impl OccupancyMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.arena.grid_w + ix]
    }
}

/// Result of a fusion call.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub map: OccupancyMap,
    /// True when every view was masked: the map is empty by definition.
    pub all_masked: bool,
}

/// One ground cell's bilinear sampling footprint in a feature map:
/// top-left tap index plus fractional weights. `base == u32::MAX`
/// marks a cell the camera does not see.
#[derive(Debug, Clone, Copy)]
struct WarpTap {
    base: u32,
    wx: f32,
    wy: f32,
}

const NO_TAP: WarpTap = WarpTap {
    base: u32::MAX,
    wx: 0.0,
    wy: 0.0,
};

/// Precomputed ground-cell → feature-map sampling for one fleet, arena
/// and feature-grid size. `table[camera][cell]` holds the bilinear taps
/// of that cell's projection, or a sentinel when the camera does not
/// see (or cannot resolve) the cell.
#[derive(Debug, Clone)]
pub struct WarpTable {
    pub feature_height: usize,
    pub feature_width: usize,
    arena: Arena,
    table: Vec<Vec<WarpTap>>,
}

impl WarpTable {
    /// Projects every arena cell center through every camera once.
    /// Cells where one feature cell spans more than `max_cell_span_m`
    /// meters of ground get no tap — the camera cannot resolve them
    /// (mirrors the painting gate in [`extract_features`]).
    pub fn build(
        cameras: &[CameraModel],
        arena: &Arena,
        feature_height: usize,
        feature_width: usize,
        max_cell_span_m: f64,
    ) -> Self {
        let table = cameras
            .iter()
            .map(|cam| {
                let sx = feature_width as f64 / cam.image_width_px as f64;
                let sy = feature_height as f64 / cam.image_height_px as f64;
                let px_per_cell_x = cam.image_width_px as f64 / feature_width as f64;
                let px_per_cell_y = cam.image_height_px as f64 / feature_height as f64;
                let hinv = cam.ground_matrix().try_inverse();
                let mut per_cam = vec![NO_TAP; arena.grid_w * arena.grid_h];
                let Some(hinv) = hinv else { return per_cam };
                for iy in 0..arena.grid_h {
                    for ix in 0..arena.grid_w {
                        let p = arena.cell_center(ix, iy);
                        if !cam.sees_ground_point(&p) {
                            continue;
                        }
                        let Ok(px) = cam.project_ground(&p) else {
                            continue;
                        };
                        let back = |u: f64, v: f64| -> Option<Point2<f64>> {
                            let h = hinv * Vector3::new(u, v, 1.0);
                            (h.z > 1e-12 * h.norm())
                                .then(|| Point2::new(h.x / h.z, h.y / h.z))
                        };
                        let step_x = back(px.x + px_per_cell_x, px.y)
                            .map_or(f64::INFINITY, |n| (n - p).norm());
                        let step_y = back(px.x, px.y + px_per_cell_y)
                            .map_or(f64::INFINITY, |n| (n - p).norm());
                        if step_x.max(step_y) > max_cell_span_m {
                            continue;
                        }
                        // Continuous feature coords with cell centers at
                        // (k + 0.5); clamp taps to the map interior.
                        let x = px.x * sx - 0.5;
                        let y = px.y * sy - 0.5;
                        let i0 = (x.floor() as i64).clamp(0, feature_width as i64 - 2);
                        let j0 = (y.floor() as i64).clamp(0, feature_height as i64 - 2);
                        per_cam[iy * arena.grid_w + ix] = WarpTap {
                            base: j0 as u32 * feature_width as u32 + i0 as u32,
                            wx: (x - i0 as f64).clamp(0.0, 1.0) as f32,
                            wy: (y - j0 as f64).clamp(0.0, 1.0) as f32,
                        };
                    }
                }
                per_cam
            })
            .collect();
        Self {
            feature_height,
            feature_width,
            arena: *arena,
            table,
        }
    }

    pub fn n_cameras(&self) -> usize {
        self.table.len()
    }

    /// Number of cameras that resolve a given arena cell.
    pub fn contributor_count(&self, cell: usize) -> usize {
        self.table.iter().filter(|t| t[cell].base != u32::MAX).count()
    }

    /// Bilinear sample of `feature` at this table's tap for `cell`, or
    /// `None` when the camera does not cover the cell.
    fn sample(&self, camera: usize, cell: usize, feature: &FeatureMap) -> Option<f64> {
        let tap = self.table[camera][cell];
        if tap.base == u32::MAX {
            return None;
        }
        let i = tap.base as usize;
        let w = self.feature_width;
        let (wx, wy) = (tap.wx as f64, tap.wy as f64);
        let top = (1.0 - wx) * feature.values[i] + wx * feature.values[i + 1];
        let bot = (1.0 - wx) * feature.values[i + w] + wx * feature.values[i + w + 1];
        Some((1.0 - wy) * top + wy * bot)
    }
}

/// Mask-normalized fusion onto the ground grid. `masks[i]` gates
/// `features[i]` (true = contribute). Contributions are accumulated in
/// ascending `agent_id` order, so the result is bit-identical under any
/// permutation of the input slice. Scores are clamped to [0, 1].
pub fn fuse(
    features: &[FeatureMap],
    masks: &[bool],
    warp: &WarpTable,
) -> Result<FusionOutput, FusionError> {
    if features.len() != warp.n_cameras() {
        return Err(FusionError::ViewCountMismatch {
            expected: warp.n_cameras(),
            got: features.len(),
        });
    }
    if masks.len() != features.len() {
        return Err(FusionError::ViewCountMismatch {
            expected: features.len(),
            got: masks.len(),
        });
    }
    let expected = warp.feature_height * warp.feature_width;
    for f in features {
        if f.channels != 1 || f.values.len() != expected {
            return Err(FusionError::DimensionMismatch {
                expected,
                got: f.values.len(),
            });
        }
    }
    let arena = warp.arena;
    let n_cells = arena.grid_w * arena.grid_h;
    let mut sums = vec![0.0f64; n_cells];
    let mut counts = vec![0u32; n_cells];

    let mut order: Vec<usize> = (0..features.len()).filter(|&i| masks[i]).collect();
    if order.is_empty() {
        return Ok(FusionOutput {
            map: OccupancyMap {
                arena,
                values: vec![0.0; n_cells],
            },
            all_masked: true,
        });
    }
    order.sort_by_key(|&i| (features[i].agent_id, i));

    for &i in &order {
        let f = &features[i];
        // The warp table is indexed by fleet position = agent_id.
        let cam = f.agent_id.min(warp.n_cameras() - 1);
        for cell in 0..n_cells {
            if let Some(v) = warp.sample(cam, cell, f) {
                sums[cell] += v;
                counts[cell] += 1;
            }
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| {
            if c == 0 {
                0.0
            } else {
                (s / c as f64).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(FusionOutput {
        map: OccupancyMap { arena, values },
        all_masked: false,
    })
}

/// One detected target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub ix: usize,
    pub iy: usize,
    pub position: Point2<f64>,
    pub score: f64,
}

/// Local maxima above `threshold` with non-maximum suppression at
/// `min_separation_cells` (Euclidean, in cells). Output sorted by
/// descending score.
pub fn detect_peaks(
    map: &OccupancyMap,
    threshold: f64,
    min_separation_cells: f64,
) -> Result<Vec<Detection>, FusionError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FusionError::InvalidThreshold { value: threshold });
    }
    let (w, h) = (map.arena.grid_w, map.arena.grid_h);
    let mut peaks = Vec::new();
    for iy in 0..h {
        for ix in 0..w {
            let v = map.at(ix, iy);
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if map.at(nx as usize, ny as usize) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push(Detection {
                    ix,
                    iy,
                    position: map.arena.cell_center(ix, iy),
                    score: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.iy.cmp(&b.iy))
            .then(a.ix.cmp(&b.ix))
    });
    let mut kept: Vec<Detection> = Vec::new();
    'outer: for p in peaks {
        for q in &kept {
            let dx = p.ix as f64 - q.ix as f64;
            let dy = p.iy as f64 - q.iy as f64;
            if (dx * dx + dy * dy).sqrt() < min_separation_cells {
                continue 'outer;
            }
        }
        kept.push(p);
    }
    Ok(kept)
}

/// MODA scoring report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModaReport {
    pub true_positives: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub ground_truth_count: usize,
    /// `(1 − (misses + false positives)/max(1, GT))·100`; can go negative
    /// when false positives outnumber the ground truth.
    pub moda_percent: f64,
}

/// Greedy nearest matching of detections to ground truth within
/// `match_radius_m`; each side matches at most once.
pub fn moda(
    detections: &[Point2<f64>],
    ground_truth: &[Point2<f64>],
    match_radius_m: f64,
) -> Result<ModaReport, FusionError> {
    if !(match_radius_m > 0.0) {
        return Err(FusionError::InvalidLossRate {
            value: match_radius_m,
        });
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        for (j, g) in ground_truth.iter().enumerate() {
            let dist = (d - g).norm();
            if dist <= match_radius_m {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detections.len()];
    let mut gt_used = vec![false; ground_truth.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !det_used[i] && !gt_used[j] {
            det_used[i] = true;
            gt_used[j] = true;
            tp += 1;
        }
    }
    let misses = ground_truth.len() - tp;
    let false_positives = detections.len() - tp;
    let gt = ground_truth.len();
    let moda_percent = (1.0 - (misses + false_positives) as f64 / gt.max(1) as f64) * 100.0;
    Ok(ModaReport {
        true_positives: tp,
        misses,
        false_positives,
        ground_truth_count: gt,
        moda_percent,
    })
}

/// Default MODA match radius in meters.
pub const DEFAULT_MATCH_RADIUS_M: f64 = 0.5;
