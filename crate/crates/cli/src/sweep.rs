//! Seeded experiment sweeps.
//!
//! A sweep walks one named axis over a value grid, runs every
//! `(value, repetition)` point through the corresponding end-to-end
//! pipeline, and renders one CSV (UTF-8, LF, header row). Everything is
//! deterministic: the per-repetition seed is derived from the master seed
//! and the repetition index only — never from the axis value — so the
//! points of one repetition form a common-random-numbers path along the
//! axis, and two runs with the same config produce byte-identical CSVs
//! regardless of worker count or completion order.
//!
//! Failures are isolated per point: a point that errors becomes a row
//! with `status = failed` and the message in the `error` column instead
//! of aborting the sweep.
//!
//! Five metric families cover the studied effects:
//!
//! * **calibration** — scene → observations → matching → homography →
//!   pose error; axes: `budget`, `top_n`, `calibration_interval` (the
//!   interval axis scores the recovered pose against a truth that has
//!   drifted for the full interval, i.e. the staleness error right
//!   before the next calibration).
//! * **age** — closed-form freshness metrics on a generated scene and a
//!   distance-dependent link; axes: `capacity`, `sampling_interval`.
//! * **masking** — priority-ordered vs uniform-random view masking under
//!   anticipated losses; axis: `loss_rate`.
//! * **fusion** — multi-view occupancy fusion and detection accuracy per
//!   view subset and streaming rate; axes: `fov_subset`, `budget`.
//! * **latency** — modeled per-stage pipeline latency plus transmission
//!   time at link capacity; axis: `budget`.
//!
//! Each named preset reproduces one studied effect with pinned grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use camsim_core::age::{aopt_cycle, average_comm_cost, phase_occupancies, AgentAgeInputs};
use camsim_core::calib::{
    calibrate, pose_errors, select_reference, CameraModel, Extrinsics, FrameObservations,
};
use camsim_core::channel::{capacity, link_at_distance, total_delay, transmission_delay, BITS_PER_KB};
use camsim_core::fusion::{
    assign_masks, detect_peaks, extract_features, fuse, moda, priority, FeatureMap, WarpTable,
};
use camsim_core::scenario::{generate, observe_frames, visible_count, Arena, ScenarioTrace};
use camsim_core::seeding::{derive_seed, tags};
use camsim_core::sched::ProxyKind;

use crate::config::RunConfig;
use crate::error::{arg_error, CliError};

/// Seed-derivation tags local to the sweep driver.
mod local_tags {
    /// Pose-drift direction draws.
    pub const DRIFT: u64 = 0x4452_4654;
    /// Random-masking draws.
    pub const MASK: u64 = 0x4d41_534b;
}

/// The sweepable independent variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Link bandwidth (Hz); the age family reports the resulting capacity.
    Capacity,
    /// Streaming sampling interval Δ (s).
    SamplingInterval,
    /// Calibration interval Δ_T (s).
    CalibrationInterval,
    /// Feature payload budget (KB).
    Budget,
    /// Anticipated packet-loss rate.
    LossRate,
    /// Matches kept per frame.
    TopN,
    /// Index into `fusion.fov_subsets`.
    FovSubset,
}

impl Axis {
    /// Parses the schema axis name.
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "capacity" => Ok(Axis::Capacity),
            "sampling_interval" => Ok(Axis::SamplingInterval),
            "calibration_interval" => Ok(Axis::CalibrationInterval),
            "budget" => Ok(Axis::Budget),
            "loss_rate" => Ok(Axis::LossRate),
            "top_n" => Ok(Axis::TopN),
            "fov_subset" => Ok(Axis::FovSubset),
            other => Err(arg_error(format!(
                "unknown axis `{other}`; expected one of capacity, sampling_interval, \
                 calibration_interval, budget, loss_rate, top_n, fov_subset"
            ))),
        }
    }

    /// The schema name of the axis.
    pub fn name(self) -> &'static str {
        match self {
            Axis::Capacity => "capacity",
            Axis::SamplingInterval => "sampling_interval",
            Axis::CalibrationInterval => "calibration_interval",
            Axis::Budget => "budget",
            Axis::LossRate => "loss_rate",
            Axis::TopN => "top_n",
            Axis::FovSubset => "fov_subset",
        }
    }

    /// The CSV column name of the axis value.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Capacity => "bandwidth_hz",
            Axis::SamplingInterval => "sampling_interval_s",
            Axis::CalibrationInterval => "calibration_interval_s",
            Axis::Budget => "budget_kb",
            Axis::LossRate => "loss_rate",
            Axis::TopN => "top_n",
            Axis::FovSubset => "fov_subset",
        }
    }

    /// True when the axis takes integer values.
    fn is_integer(self) -> bool {
        matches!(self, Axis::TopN | Axis::FovSubset)
    }

    /// The family a bare `sweep --axis …` invocation runs.
    pub fn default_family(self) -> Family {
        match self {
            Axis::Capacity | Axis::SamplingInterval => Family::Age,
            Axis::CalibrationInterval | Axis::Budget | Axis::TopN => Family::Calibration,
            Axis::LossRate => Family::Masking,
            Axis::FovSubset => Family::Fusion,
        }
    }

    /// The default value grid (the matching preset's grid).
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::Capacity => vec![1e5, 2e5, 4e5, 8e5, 1.6e6],
            Axis::SamplingInterval => vec![0.1, 0.2, 0.5, 1.0, 2.0],
            Axis::CalibrationInterval => vec![5.0, 10.0, 20.0, 40.0, 60.0],
            Axis::Budget => vec![10.0, 14.0, 18.0, 22.0, 26.0, 30.0],
            Axis::LossRate => vec![0.1, 0.2, 0.3, 0.4],
            Axis::TopN => vec![1.0, 3.0, 5.0, 7.0, 10.0],
            Axis::FovSubset => vec![0.0, 1.0, 2.0, 7.0, 8.0],
        }
    }
}

/// The metric pipeline a sweep point runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Calibration,
    Age,
    Masking,
    Fusion,
    Latency,
}

impl Family {
    /// Stable id mixed into per-repetition seeds.
    fn id(self) -> u64 {
        match self {
            Family::Calibration => 1,
            Family::Age => 2,
            Family::Masking => 3,
            Family::Fusion => 4,
            Family::Latency => 5,
        }
    }

    /// Axes this family accepts.
    fn supports(self, axis: Axis) -> bool {
        match self {
            Family::Calibration => matches!(
                axis,
                Axis::Budget | Axis::TopN | Axis::CalibrationInterval
            ),
            Family::Age => matches!(axis, Axis::Capacity | Axis::SamplingInterval),
            Family::Masking => matches!(axis, Axis::LossRate),
            Family::Fusion => matches!(axis, Axis::FovSubset | Axis::Budget),
            Family::Latency => matches!(axis, Axis::Budget),
        }
    }

    /// Metric columns between `status` and `error`.
    fn metric_columns(self) -> &'static [&'static str] {
        match self {
            Family::Calibration => &[
                "rotation_error_deg",
                "translation_error_m",
                "extrinsic_error_pct",
                "n_correspondences",
                "frames_with_shortfall",
                "mean_match_distance",
            ],
            Family::Age => &[
                "t",
                "capacity_bps",
                "delay_s",
                "aopt_st",
                "aopt_ca",
                "aopt_cy",
                "k_hat",
                "g_khat",
                "avg_cost_kb",
            ],
            Family::Masking => &[
                "step",
                "moda_priority",
                "moda_random",
                "masked_views",
            ],
            Family::Fusion => &[
                "subset",
                "rate_kb",
                "step",
                "detected",
                "ground_truth",
                "moda_percent",
                "aopt",
            ],
            Family::Latency => &[
                "detection_ms",
                "extraction_ms",
                "matching_ms",
                "transmission_ms",
                "total_ms",
            ],
        }
    }
}

/// One sweep: an axis, its value grid and the repetition count.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub repetitions: usize,
}

impl SweepSpec {
    /// Validates the grid against the configuration.
    pub fn validate(&self, cfg: &RunConfig) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(arg_error("sweep grid must not be empty"));
        }
        if self.repetitions == 0 {
            return Err(arg_error("sweep repetitions must be ≥ 1"));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(arg_error("sweep values must be finite"));
            }
            if self.axis.is_integer() && (v.fract() != 0.0 || v < 0.0) {
                return Err(arg_error(format!(
                    "axis {} takes non-negative integer values, got {v}",
                    self.axis.name()
                )));
            }
            match self.axis {
                Axis::LossRate if !(0.0..=1.0).contains(&v) => {
                    return Err(arg_error("loss_rate values must lie in [0, 1]"));
                }
                Axis::TopN if v < 1.0 => {
                    return Err(arg_error("top_n values must be ≥ 1"));
                }
                Axis::FovSubset if v as usize >= cfg.fusion.fov_subsets.len() => {
                    return Err(arg_error(format!(
                        "fov_subset index {v} out of range: config lists {} subsets",
                        cfg.fusion.fov_subsets.len()
                    )));
                }
                Axis::Capacity | Axis::SamplingInterval | Axis::CalibrationInterval
                | Axis::Budget
                    if !(v > 0.0) =>
                {
                    return Err(arg_error(format!(
                        "axis {} takes positive values, got {v}",
                        self.axis.name()
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A named, pinned experiment: one or more sweeps writing one CSV each.
#[derive(Debug, Clone)]
pub struct Preset {
    /// File-name stem and `--preset` argument.
    pub name: &'static str,
    /// One-line description.
    pub title: &'static str,
    /// `(file suffix, family, spec)` per CSV; the suffix is empty when
    /// the preset produces a single file.
    pub specs: Vec<(&'static str, Family, SweepSpec)>,
    /// Calibration budget forced for this preset's sweeps, if any. The
    /// interval study pins the budget high so pose drift, not payload
    /// quantization, dominates the measured error.
    pub budget_kb: Option<f64>,
}

/// Every named preset, one per studied effect.
pub fn presets() -> Vec<Preset> {
    let spec = |axis: Axis, values: Vec<f64>, repetitions: usize| SweepSpec {
        axis,
        values,
        repetitions,
    };
    vec![
        Preset {
            name: "calibration_budget",
            title: "re-calibration pose error vs feature payload budget",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Calibration,
                spec(Axis::Budget, vec![10.0, 14.0, 18.0, 22.0, 26.0, 30.0], 5),
            )],
        },
        Preset {
            name: "matching_topn",
            title: "re-calibration pose error vs matches kept per frame",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Calibration,
                spec(Axis::TopN, vec![1.0, 3.0, 5.0, 7.0, 10.0], 5),
            )],
        },
        Preset {
            name: "calibration_interval",
            title: "stale-pose error vs calibration interval under drift",
            budget_kb: Some(30.0),
            specs: vec![(
                "",
                Family::Calibration,
                spec(Axis::CalibrationInterval, vec![5.0, 10.0, 20.0, 40.0, 60.0], 5),
            )],
        },
        Preset {
            name: "target_counts",
            title: "per-camera detected targets over time",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Fusion,
                spec(
                    Axis::FovSubset,
                    vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                    1,
                ),
            )],
        },
        Preset {
            name: "compression_counts",
            title: "detected targets per view subset vs streaming rate",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Fusion,
                spec(Axis::Budget, vec![2.0, 5.0, 10.0, 20.0, 30.0], 1),
            )],
        },
        Preset {
            name: "aopt_tradeoffs",
            title: "perceived-target freshness vs link capacity and sampling interval",
            budget_kb: None,
            specs: vec![
                (
                    "capacity",
                    Family::Age,
                    spec(Axis::Capacity, vec![1e5, 2e5, 4e5, 8e5, 1.6e6], 10),
                ),
                (
                    "sampling",
                    Family::Age,
                    spec(Axis::SamplingInterval, vec![0.1, 0.2, 0.5, 1.0, 2.0], 10),
                ),
            ],
        },
        Preset {
            name: "robust_masking",
            title: "priority vs random view masking under packet loss",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Masking,
                spec(Axis::LossRate, vec![0.1, 0.2, 0.3, 0.4], 100),
            )],
        },
        Preset {
            name: "fov_fusion",
            title: "detection accuracy and freshness per view subset and rate",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Fusion,
                spec(Axis::FovSubset, vec![0.0, 1.0, 2.0, 7.0, 8.0], 3),
            )],
        },
        Preset {
            name: "pipeline_latency",
            title: "modeled calibration-pipeline latency vs payload size",
            budget_kb: None,
            specs: vec![(
                "",
                Family::Latency,
                spec(Axis::Budget, vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0], 1),
            )],
        },
    ]
}

/// Looks a preset up by name.
pub fn preset(name: &str) -> Result<Preset, CliError> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = presets().iter().map(|p| p.name).collect();
            arg_error(format!(
                "unknown preset `{name}`; available: {}",
                names.join(", ")
            ))
        })
}

/// Immutable per-sweep context shared by all points.
struct SweepContext {
    fleet: Vec<CameraModel>,
    arena: Arena,
    /// Ground-to-feature warp table; built once, only for families that
    /// fuse views.
    warp: Option<WarpTable>,
    /// Camera distances to the edge receiver at the world origin.
    distances: Vec<f64>,
}

impl SweepContext {
    fn build(cfg: &RunConfig, family: Family) -> Result<Self, CliError> {
        let fleet = cfg.fleet_model()?;
        let arena = cfg.arena_model()?;
        let feature = cfg.feature_model();
        let warp = matches!(family, Family::Masking | Family::Fusion).then(|| {
            WarpTable::build(
                &fleet,
                &arena,
                feature.height,
                feature.width,
                feature.max_cell_span_m,
            )
        });
        let distances = fleet
            .iter()
            .map(|c| c.extrinsics.camera_center().coords.norm())
            .collect();
        Ok(Self {
            fleet,
            arena,
            warp,
            distances,
        })
    }
}

/// One CSV cell row: every metric cell pre-rendered to text.
type Row = Vec<String>;

fn fmt_axis(axis: Axis, v: f64) -> String {
    if axis.is_integer() {
        format!("{}", v as u64)
    } else {
        format!("{v}")
    }
}

fn sanitize(message: &str) -> String {
    message.replace(['\n', '\r', ','], ";")
}

/// Runs one sweep and renders its CSV (header + rows, LF endings).
pub fn run_sweep(cfg: &RunConfig, family: Family, spec: &SweepSpec) -> Result<String, CliError> {
    cfg.validate()?;
    spec.validate(cfg)?;
    if !family.supports(spec.axis) {
        return Err(arg_error(format!(
            "the {:?} family does not sweep axis {}",
            family,
            spec.axis.name()
        )));
    }
    let ctx = SweepContext::build(cfg, family)?;

    let points: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|vi| (0..spec.repetitions).map(move |rep| (vi, rep)))
        .collect();

    let run_points = || -> Vec<Vec<Row>> {
        points
            .par_iter()
            .map(|&(vi, rep)| {
                let value = spec.values[vi];
                let seed = derive_seed(cfg.master_seed, &[tags::SWEEP, family.id(), rep as u64]);
                match run_point(cfg, &ctx, family, spec.axis, value, seed) {
                    Ok(rows) => rows
                        .into_iter()
                        .map(|metrics| assemble(spec.axis, value, rep, "ok", metrics, ""))
                        .collect(),
                    Err(e) => vec![assemble(
                        spec.axis,
                        value,
                        rep,
                        "failed",
                        vec![String::new(); family.metric_columns().len()],
                        &sanitize(&e.to_string()),
                    )],
                }
            })
            .collect()
    };
    let results = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| arg_error(format!("cannot build worker pool: {e}")))?
            .install(run_points)
    } else {
        run_points()
    };

    let mut csv = String::new();
    csv.push_str(spec.axis.column());
    csv.push_str(",repetition,status,");
    csv.push_str(&family.metric_columns().join(","));
    csv.push_str(",error\n");
    for rows in results {
        for row in rows {
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
    }
    Ok(csv)
}

fn assemble(
    axis: Axis,
    value: f64,
    rep: usize,
    status: &str,
    metrics: Vec<String>,
    error: &str,
) -> Row {
    let mut row = Vec::with_capacity(metrics.len() + 4);
    row.push(fmt_axis(axis, value));
    row.push(rep.to_string());
    row.push(status.to_string());
    row.extend(metrics);
    row.push(error.to_string());
    row
}

fn run_point(
    cfg: &RunConfig,
    ctx: &SweepContext,
    family: Family,
    axis: Axis,
    value: f64,
    seed: u64,
) -> Result<Vec<Vec<String>>, CliError> {
    match family {
        Family::Calibration => calibration_point(cfg, ctx, axis, value, seed).map(|m| vec![m]),
        Family::Age => age_point(cfg, ctx, axis, value, seed).map(|m| vec![m]),
        Family::Masking => masking_point(cfg, ctx, value, seed).map(|m| vec![m]),
        Family::Fusion => fusion_point(cfg, ctx, axis, value, seed),
        Family::Latency => latency_point(cfg, ctx, value).map(|m| vec![m]),
    }
}

fn generate_trace(cfg: &RunConfig, ctx: &SweepContext, seed: u64) -> Result<ScenarioTrace, CliError> {
    Ok(generate(
        &cfg.world_model(),
        &ctx.arena,
        cfg.scenario.duration_s,
        cfg.scenario.time_step_s,
        derive_seed(seed, &[tags::SCENARIO]),
    )?)
}

/// A random unit vector (uniform on the sphere).
fn random_direction(rng: &mut ChaCha8Rng) -> nalgebra::Vector3<f64> {
    loop {
        let v = nalgebra::Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if let Some(u) = v.try_normalize(1e-9) {
            return u;
        }
    }
}

/// The true pose after `dt_s` of drift: a rotation at the configured
/// rate about a seeded fixed axis composed onto the pose, plus a
/// translation at the configured rate along a seeded fixed direction.
fn drifted_pose(
    truth: &Extrinsics,
    dt_s: f64,
    rot_rate_deg_per_s: f64,
    trans_rate_m_per_s: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Extrinsics, CliError> {
    let axis = nalgebra::Unit::new_normalize(random_direction(rng));
    let direction = random_direction(rng);
    let angle = (rot_rate_deg_per_s * dt_s).to_radians();
    let r = nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
    Ok(Extrinsics::new(
        r * truth.rotation,
        truth.translation + direction * trans_rate_m_per_s * dt_s,
    )?)
}

fn calibration_point(
    cfg: &RunConfig,
    ctx: &SweepContext,
    axis: Axis,
    value: f64,
    seed: u64,
) -> Result<Vec<String>, CliError> {
    let trace = generate_trace(cfg, ctx, seed)?;
    let steps = cfg.calibration_steps();
    let model = cfg.observation_model();
    let frames: Vec<Vec<FrameObservations>> = ctx
        .fleet
        .iter()
        .enumerate()
        .map(|(k, cam)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tags::OBSERVATION, k as u64]));
            observe_frames(&trace, cam, &steps, &model, &mut rng)
        })
        .collect();

    let recal = cfg.calibration.recal_camera;
    let reference = match cfg.calibration.reference_camera {
        Some(r) => r,
        None => {
            let others: Vec<usize> = (0..ctx.fleet.len()).filter(|&k| k != recal).collect();
            let candidates: Vec<&[FrameObservations]> =
                others.iter().map(|&k| frames[k].as_slice()).collect();
            let local = select_reference(
                &frames[recal],
                &candidates,
                cfg.calibration.select_distance_threshold,
            )
            .ok_or(CliError::NoReference {
                recal_camera: recal,
            })?;
            others[local]
        }
    };

    let mut settings = cfg.calibration_settings();
    match axis {
        Axis::Budget => settings.budget_bits = Some((value * BITS_PER_KB) as u64),
        Axis::TopN => settings.top_n = value as usize,
        _ => {}
    }

    let outcome = calibrate(
        &ctx.fleet[recal].intrinsics,
        &ctx.fleet[reference],
        &frames[reference],
        &frames[recal],
        &settings,
    )?;

    let mut truth = ctx.fleet[recal].extrinsics.clone();
    if axis == Axis::CalibrationInterval {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[local_tags::DRIFT]));
        truth = drifted_pose(
            &truth,
            value,
            cfg.calibration.rotation_drift_deg_per_s,
            cfg.calibration.translation_drift_m_per_s,
            &mut rng,
        )?;
    }
    let e = pose_errors(&outcome.extrinsics, &truth);
    Ok(vec![
        format!("{}", e.rotation_deg),
        format!("{}", e.translation_m),
        format!("{}", e.extrinsic_percent),
        outcome.n_correspondences.to_string(),
        outcome.frames_with_shortfall.to_string(),
        format!("{}", outcome.mean_match_distance),
    ])
}

fn age_point(
    cfg: &RunConfig,
    ctx: &SweepContext,
    axis: Axis,
    value: f64,
    seed: u64,
) -> Result<Vec<String>, CliError> {
    let trace = generate_trace(cfg, ctx, seed)?;
    let dt = cfg.scenario.time_step_s;
    let step = ((0.5 * cfg.scenario.duration_s) / dt) as usize;
    let t = step as f64 * dt;

    let bandwidth = match axis {
        Axis::Capacity => value,
        _ => cfg.channel.bandwidth_hz,
    };
    let delta = match axis {
        Axis::SamplingInterval => value,
        _ => cfg.cycle.sampling_interval_s,
    };

    let path = cfg.path_loss_model();
    let cycle = cfg.cycle_model();
    let payload_bits = cycle.phase_costs.streaming_bits;
    let mut agents = Vec::with_capacity(ctx.fleet.len());
    let mut min_capacity = f64::INFINITY;
    for (k, cam) in ctx.fleet.iter().enumerate() {
        // The shadowing draw depends on the repetition seed only, so the
        // same radio environment is replayed at every axis value.
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tags::SHADOWING, k as u64]));
        let link = link_at_distance(
            ctx.distances[k],
            bandwidth,
            cfg.channel.tx_power_w,
            cfg.channel.noise_psd_w_per_hz,
            cfg.channel.inference_delay_s,
            &path,
            &mut rng,
        );
        min_capacity = min_capacity.min(capacity(&link)?);
        agents.push(AgentAgeInputs {
            sampling_interval_s: delta,
            total_delay_s: total_delay(payload_bits, &link)?,
            target_count: visible_count(&trace, cam, t) as u64,
        });
    }
    let report = aopt_cycle(&agents, &cycle)?;
    let delay = report
        .bottleneck_agent
        .map_or(0.0, |k| agents[k].total_delay_s);
    let occupancies = phase_occupancies(&cfg.world_model().arrival, cycle.calibration_prob)?;
    let avg_cost_kb = average_comm_cost(&occupancies, &cycle.phase_costs) / BITS_PER_KB;
    Ok(vec![
        format!("{t}"),
        format!("{min_capacity}"),
        format!("{delay}"),
        format!("{}", report.aopt_streaming),
        format!("{}", report.aopt_calibration),
        format!("{}", report.aopt_cycle),
        report
            .bottleneck_agent
            .map_or_else(|| "-1".to_string(), |k| k.to_string()),
        report.bottleneck_count.to_string(),
        format!("{avg_cost_kb}"),
    ])
}

fn masking_point(
    cfg: &RunConfig,
    ctx: &SweepContext,
    loss_rate: f64,
    seed: u64,
) -> Result<Vec<String>, CliError> {
    let trace = generate_trace(cfg, ctx, seed)?;
    let steps = cfg.eval_steps();
    // Rotate the evaluated step across repetitions so trials cover the
    // whole window; the repetition index is already folded into `seed`.
    let step = steps[(seed as usize) % steps.len()];
    let warp = ctx.warp.as_ref().expect("masking context builds the warp");
    let rate_kb = cfg
        .fusion
        .rates_kb
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let proxy = cfg.proxy_model(ProxyKind::Streaming);
    let feature_cfg = cfg.feature_model();
    let feature_seed = derive_seed(seed, &[tags::FEATURE]);
    let features: Vec<FeatureMap> = ctx
        .fleet
        .iter()
        .enumerate()
        .map(|(k, cam)| {
            extract_features(
                cam,
                k,
                &trace,
                step,
                Some(rate_kb * BITS_PER_KB),
                &proxy,
                &feature_cfg,
                feature_seed,
            )
        })
        .collect();

    let priorities: Vec<f64> = features
        .iter()
        .map(priority)
        .collect::<Result<_, _>>()?;
    let priority_masks: Vec<bool> = assign_masks(&priorities, loss_rate)?
        .iter()
        .map(|m| m.mask)
        .collect();
    let n_masked = priority_masks.iter().filter(|&&m| !m).count();

    // Uniform-random masking drops the same number of views.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        &[local_tags::MASK, (loss_rate * 1000.0).round() as u64],
    ));
    let k = ctx.fleet.len();
    let mut order: Vec<usize> = (0..k).collect();
    for i in 0..n_masked.min(k) {
        let j = rng.gen_range(i..k);
        order.swap(i, j);
    }
    let mut random_masks = vec![true; k];
    for &i in order.iter().take(n_masked) {
        random_masks[i] = false;
    }

    let gt = trace.positions_at(step);
    let score = |masks: &[bool]| -> Result<f64, CliError> {
        let out = fuse(&features, masks, warp)?;
        let dets = detect_peaks(
            &out.map,
            cfg.fusion.threshold,
            cfg.fusion.min_separation_m / ctx.arena.cell_m(),
        )?;
        let points: Vec<nalgebra::Point2<f64>> = dets.iter().map(|d| d.position).collect();
        Ok(moda(&points, &gt, cfg.fusion.match_radius_m)?.moda_percent)
    };
    let moda_priority = score(&priority_masks)?;
    let moda_random = score(&random_masks)?;
    Ok(vec![
        step.to_string(),
        format!("{moda_priority}"),
        format!("{moda_random}"),
        n_masked.to_string(),
    ])
}

fn fusion_point(
    cfg: &RunConfig,
    ctx: &SweepContext,
    axis: Axis,
    value: f64,
    seed: u64,
) -> Result<Vec<Vec<String>>, CliError> {
    let trace = generate_trace(cfg, ctx, seed)?;
    let warp = ctx.warp.as_ref().expect("fusion context builds the warp");
    let proxy = cfg.proxy_model(ProxyKind::Streaming);
    let feature_cfg = cfg.feature_model();
    let feature_seed = derive_seed(seed, &[tags::FEATURE]);
    let cycle = cfg.cycle_model();
    let dt = cfg.scenario.time_step_s;

    let (subsets, rates): (Vec<(usize, &[usize])>, Vec<f64>) = match axis {
        Axis::FovSubset => {
            let i = value as usize;
            (
                vec![(i, cfg.fusion.fov_subsets[i].as_slice())],
                cfg.fusion.rates_kb.clone(),
            )
        }
        _ => (
            cfg.fusion
                .fov_subsets
                .iter()
                .enumerate()
                .map(|(i, s)| (i, s.as_slice()))
                .collect(),
            vec![value],
        ),
    };

    let mut rows = Vec::new();
    for &rate_kb in &rates {
        for &step in &cfg.eval_steps() {
            let features: Vec<FeatureMap> = ctx
                .fleet
                .iter()
                .enumerate()
                .map(|(k, cam)| {
                    extract_features(
                        cam,
                        k,
                        &trace,
                        step,
                        Some(rate_kb * BITS_PER_KB),
                        &proxy,
                        &feature_cfg,
                        feature_seed,
                    )
                })
                .collect();
            let gt = trace.positions_at(step);
            let t = step as f64 * dt;
            for &(subset_id, subset) in &subsets {
                let mut masks = vec![false; ctx.fleet.len()];
                for &cam in subset {
                    masks[cam] = true;
                }
                let out = fuse(&features, &masks, warp)?;
                let dets = detect_peaks(
                    &out.map,
                    cfg.fusion.threshold,
                    cfg.fusion.min_separation_m / ctx.arena.cell_m(),
                )?;
                let points: Vec<nalgebra::Point2<f64>> =
                    dets.iter().map(|d| d.position).collect();
                let m = moda(&points, &gt, cfg.fusion.match_radius_m)?;

                // Freshness of this subset streaming at this rate over
                // the deterministic (mean-gain) links.
                let agents: Vec<AgentAgeInputs> = subset
                    .iter()
                    .map(|&k| {
                        let link = cfg.mean_link_at(ctx.distances[k]);
                        Ok(AgentAgeInputs {
                            sampling_interval_s: cfg.cycle.sampling_interval_s,
                            total_delay_s: total_delay(rate_kb * BITS_PER_KB, &link)?,
                            target_count: visible_count(&trace, &ctx.fleet[k], t) as u64,
                        })
                    })
                    .collect::<Result<_, CliError>>()?;
                let aopt = aopt_cycle(&agents, &cycle)?.aopt_cycle;

                let label = subset
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("+");
                rows.push(vec![
                    format!("{subset_id}:{label}"),
                    format!("{rate_kb}"),
                    step.to_string(),
                    dets.len().to_string(),
                    gt.len().to_string(),
                    format!("{}", m.moda_percent),
                    format!("{aopt}"),
                ]);
            }
        }
    }
    Ok(rows)
}

fn latency_point(
    cfg: &RunConfig,
    ctx: &SweepContext,
    budget_kb: f64,
) -> Result<Vec<String>, CliError> {
    let d_mean = ctx.distances.iter().sum::<f64>() / ctx.distances.len().max(1) as f64;
    let link = cfg.mean_link_at(d_mean);
    let transmission_ms = transmission_delay(budget_kb * BITS_PER_KB, &link)? * 1000.0;
    let l = &cfg.latency;
    let total = l.detection_ms + l.extraction_ms + l.matching_ms + transmission_ms;
    Ok(vec![
        format!("{}", l.detection_ms),
        format!("{}", l.extraction_ms),
        format!("{}", l.matching_ms),
        format!("{transmission_ms}"),
        format!("{total}"),
    ])
}

/// Runs every sweep of a preset, writing `sweep_<name>[_suffix].csv`
/// files into `dir`. Returns the written paths in deterministic order.
pub fn run_preset(
    cfg: &RunConfig,
    preset: &Preset,
    dir: &std::path::Path,
) -> Result<Vec<std::path::PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let mut cfg = cfg.clone();
    if let Some(kb) = preset.budget_kb {
        cfg.calibration.budget_kb = Some(kb);
    }
    for (suffix, family, spec) in &preset.specs {
        let csv = run_sweep(&cfg, *family, spec)?;
        let file = if suffix.is_empty() {
            format!("sweep_{}.csv", preset.name)
        } else {
            format!("sweep_{}_{}.csv", preset.name, suffix)
        };
        let path = dir.join(file);
        std::fs::write(&path, csv).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
