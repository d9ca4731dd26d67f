//! Run configuration: a single TOML file that pins every knob of the
//! simulator.
//!
//! The file is versioned (`schema_version`), every field has a documented
//! default (an empty file is a valid configuration), unknown keys are
//! rejected, and `save(load(x)) == x` round-trips exactly. Validation
//! happens at load time and reports the offending field by its TOML path
//! (`channel.bandwidth_hz`, `fleet.ring.count`, …), delegating to the
//! core validators where they exist so the CLI can never accept a
//! configuration the library would reject later.
//!
//! Units follow the conventions of the core crate: Hz, watts, seconds,
//! meters — except payload and budget sizes, which are given in KB
//! (1 KB = 8192 bits) because that is the natural magnitude for feature
//! payloads.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use camsim_core::calib::{ring_fleet, CameraModel, Extrinsics, Intrinsics};
use camsim_core::channel::{LinkParams, PathLossConfig, BITS_PER_KB};
use camsim_core::fusion::FeatureConfig;
use camsim_core::scenario::{Arena, ArrivalModel, ObservationModel, WorldModel};
use camsim_core::sched::{AccuracyProxy, Bounds, GridSpec, LagrangeWeights, ProxyKind};
use camsim_core::{age::CycleConfig, age::PhaseCosts, calib::CalibrationSettings};

/// The schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Errors from loading or validating a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The file could not be read.
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// The file is not valid TOML or contains unknown keys.
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    /// A field failed validation; `path` is its TOML path.
    #[error("invalid config field `{path}`: {message}")]
    Invalid { path: String, message: String },
    /// The file was written by an incompatible schema.
    #[error("unsupported schema_version {found} (this build reads version {SCHEMA_VERSION})")]
    Version { found: u32 },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// World/target process parameters (see the scenario module).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Simulated duration in seconds.
    pub duration_s: f64,
    /// Time-grid step in seconds.
    pub time_step_s: f64,
    /// Target arrival rate λ (targets/s).
    pub arrival_rate_per_s: f64,
    /// Log-mean of the log-normal dwell time.
    pub dwell_log_mean: f64,
    /// Log-standard-deviation of the dwell time.
    pub dwell_log_sigma: f64,
    /// Random-walk speed scale (m/s).
    pub walk_speed_m_s: f64,
    /// Appearance descriptor dimension.
    pub descriptor_dim: usize,
    /// Per-component spread of identity descriptors.
    pub identity_sigma: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let w = WorldModel::default();
        Self {
            duration_s: 40.0,
            time_step_s: 0.5,
            arrival_rate_per_s: w.arrival.arrival_rate_per_s,
            dwell_log_mean: w.arrival.dwell_log_mean,
            dwell_log_sigma: w.arrival.dwell_log_sigma,
            walk_speed_m_s: w.walk_speed_m_s,
            descriptor_dim: w.descriptor_dim,
            identity_sigma: w.identity_sigma,
        }
    }
}

/// Analysis arena: a rectangle centered on the world origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaConfig {
    pub width_m: f64,
    pub length_m: f64,
    /// Side length of one analysis grid cell (m).
    pub cell_m: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            width_m: 12.0,
            length_m: 36.0,
            cell_m: 0.1,
        }
    }
}

/// Pinhole intrinsics shared by every camera in the fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntrinsicsConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for IntrinsicsConfig {
    fn default() -> Self {
        Self {
            fx: 550.0,
            fy: 550.0,
            cx: 320.0,
            cy: 240.0,
        }
    }
}

/// Generator for a perimeter surveillance rig: cameras on an ellipse
/// around the arena, on masts, all aimed at a point on the ray from the
/// arena center to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    /// Number of cameras.
    pub count: usize,
    /// Distance from the arena edge to the camera masts (m).
    pub setback_m: f64,
    /// Mast height (m).
    pub height_m: f64,
    /// Aim point as a fraction of the camera's own ground position:
    /// 0 aims every camera at the arena center.
    pub look_at_fraction: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            count: 7,
            setback_m: 12.0,
            height_m: 8.0,
            look_at_fraction: 0.0,
        }
    }
}

/// One explicitly-posed camera: a mast position and a ground aim point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPoseConfig {
    /// Camera center in world coordinates `[x, y, z]` (m).
    pub position: [f64; 3],
    /// Point the optical axis passes through `[x, y, z]` (m).
    pub look_at: [f64; 3],
}

/// Camera fleet: a [`RingConfig`] generator or an explicit pose list —
/// at most one of the two; omitting both selects the standard ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    /// Perimeter-ring generator. Mutually exclusive with `cameras`;
    /// omitting both is the standard ring.
    pub ring: Option<RingConfig>,
    /// Explicit camera poses. Mutually exclusive with `ring`.
    pub cameras: Option<Vec<CameraPoseConfig>>,
    pub intrinsics: IntrinsicsConfig,
    pub image_width_px: u32,
    pub image_height_px: u32,
}

impl FleetConfig {
    /// The ring in effect: the configured one, or the standard ring
    /// when neither source is given.
    fn effective_ring(&self) -> Option<RingConfig> {
        match (&self.ring, &self.cameras) {
            (Some(r), _) => Some(*r),
            (None, None) => Some(RingConfig::default()),
            (None, Some(_)) => None,
        }
    }
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            ring: None,
            cameras: None,
            intrinsics: IntrinsicsConfig::default(),
            image_width_px: 640,
            image_height_px: 480,
        }
    }
}

/// Radio link and path-loss parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Default link bandwidth B (Hz).
    pub bandwidth_hz: f64,
    /// Transmit power (W).
    pub tx_power_w: f64,
    /// Effective noise floor density at the receiver (W/Hz), ambient
    /// interference folded in.
    pub noise_psd_w_per_hz: f64,
    /// Per-update inference delay added to every transmission (s).
    pub inference_delay_s: f64,
    /// i.i.d. per-packet loss probability.
    pub packet_loss_rate: f64,
    /// Carrier frequency (Hz).
    pub carrier_freq_hz: f64,
    /// Log-distance path-loss exponent.
    pub path_loss_exponent: f64,
    /// Log-normal shadowing spread (dB); 0 disables shadowing.
    pub shadowing_sigma_db: f64,
    /// Path-loss reference distance (m).
    pub reference_distance_m: f64,
    /// Interferer density per 100 m²; 0 disables interference.
    pub interferer_density_per_100m2: f64,
    /// Per-interferer transmit power (W).
    pub interferer_power_w: f64,
    /// Mean interferer distance (m).
    pub mean_interferer_distance_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let p = PathLossConfig::default();
        Self {
            bandwidth_hz: 1e6,
            tx_power_w: 0.1,
            noise_psd_w_per_hz: 4e-17,
            inference_delay_s: 0.073,
            packet_loss_rate: 0.0,
            carrier_freq_hz: p.carrier_freq_hz,
            path_loss_exponent: p.path_loss_exponent,
            shadowing_sigma_db: p.shadowing_sigma_db,
            reference_distance_m: p.reference_distance_m,
            interferer_density_per_100m2: p.interferer_density_per_100m2,
            interferer_power_w: p.interferer_power_w,
            mean_interferer_distance_m: p.mean_interferer_distance_m,
        }
    }
}

/// Per-view observation noise (see the scenario module).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    pub view_noise_sigma: f64,
    pub pixel_noise_px: f64,
    /// Descriptor quantizer clipping range.
    pub quant_range: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        let m = ObservationModel::default();
        Self {
            view_noise_sigma: m.view_noise_sigma,
            pixel_noise_px: m.pixel_noise_px,
            quant_range: m.quant_range,
        }
    }
}

/// Re-calibration pipeline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Matches kept per frame.
    pub top_n: usize,
    /// Feature payload budget in KB; omit for unquantized descriptors.
    pub budget_kb: Option<f64>,
    /// Number of synchronized frames in the calibration window.
    pub n_frames: usize,
    /// First trace step of the window.
    pub start_step: usize,
    /// Stride between window steps.
    pub frame_stride: usize,
    /// Index of the camera being re-calibrated.
    pub recal_camera: usize,
    /// Reference camera index; omit to auto-select the view sharing the
    /// most scene content.
    pub reference_camera: Option<usize>,
    /// Descriptor-distance cutoff for reference auto-selection. The
    /// default sits between the typical same-identity distance under
    /// per-view noise (≈1.6 at the default noise and dimension) and the
    /// typical cross-identity distance (≈2.3), so only true co-visible
    /// targets count as shared content.
    pub select_distance_threshold: f64,
    /// Pose drift of an uncalibrated camera: rotation rate about a
    /// seeded fixed axis (deg/s). Models the error growth between
    /// calibration events.
    pub rotation_drift_deg_per_s: f64,
    /// Translation drift rate along a seeded fixed direction (m/s).
    pub translation_drift_m_per_s: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            top_n: 5,
            budget_kb: Some(18.0),
            n_frames: 50,
            start_step: 10,
            frame_stride: 1,
            recal_camera: 1,
            reference_camera: None,
            select_distance_threshold: 1.9,
            rotation_drift_deg_per_s: 0.5,
            translation_drift_m_per_s: 0.1,
        }
    }
}

/// Per-phase payload sizes in KB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseCostConfig {
    pub idle_kb: f64,
    pub calibration_kb: f64,
    pub streaming_kb: f64,
}

impl Default for PhaseCostConfig {
    fn default() -> Self {
        Self {
            idle_kb: 0.0,
            calibration_kb: 30.0,
            streaming_kb: 17.07,
        }
    }
}

/// Idle/calibrate/stream cycle parameters for the age metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSectionConfig {
    /// Probability p₁ that a cycle runs a calibration phase.
    pub calibration_prob: f64,
    /// Calibration interval Δ_T (s).
    pub calibration_interval_s: f64,
    /// Streaming sampling interval Δ (s).
    pub sampling_interval_s: f64,
    /// Minimum perceived-target count ε_g for an agent to enter the
    /// freshness supremum.
    pub count_threshold: u64,
    pub costs: PhaseCostConfig,
}

impl Default for CycleSectionConfig {
    fn default() -> Self {
        Self {
            calibration_prob: 0.1,
            calibration_interval_s: 10.0,
            sampling_interval_s: 0.5,
            count_threshold: 1,
            costs: PhaseCostConfig::default(),
        }
    }
}

/// Scheduler search ranges. Payload bounds are given in KB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub bandwidth_hz: [f64; 2],
    pub payload_kb: [f64; 2],
    pub sampling_interval_s: [f64; 2],
    pub calibration_interval_s: [f64; 2],
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: [1e5, 2e6],
            payload_kb: [8.0, 64.0],
            sampling_interval_s: [0.05, 4.0],
            calibration_interval_s: [0.1, 8.0],
        }
    }
}

/// Scheduler grid resolution per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub bandwidth_points: usize,
    pub payload_points: usize,
    pub interval_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            bandwidth_points: g.bandwidth_points,
            payload_points: g.payload_points,
            interval_points: g.interval_points,
        }
    }
}

/// One saturating rate–accuracy proxy; rate scale in KB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxyConfig {
    pub gamma_max: f64,
    pub rate_scale_kb: f64,
    pub floor: f64,
}

/// Both task proxies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxySectionConfig {
    pub calibration: ProxyConfig,
    pub streaming: ProxyConfig,
}

impl Default for ProxySectionConfig {
    fn default() -> Self {
        Self {
            calibration: ProxyConfig {
                gamma_max: 90.0,
                rate_scale_kb: 12.0,
                floor: 20.0,
            },
            streaming: ProxyConfig {
                gamma_max: 85.0,
                rate_scale_kb: 7.0,
                floor: 10.0,
            },
        }
    }
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxySectionConfig::default().streaming
    }
}

/// Lagrange weights on the accuracy terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub lambda_ca: f64,
    pub lambda_k: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            lambda_ca: 0.1,
            lambda_k: 0.1,
        }
    }
}

/// Feature synthesis knobs (see the fusion module).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSectionConfig {
    pub height: usize,
    pub width: usize,
    pub bump_sigma_m: f64,
    pub max_cell_span_m: f64,
    pub amplitude: f64,
    pub noise_base: f64,
}

impl Default for FeatureSectionConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            height: f.height,
            width: f.width,
            bump_sigma_m: f.bump_sigma_m,
            max_cell_span_m: f.max_cell_span_m,
            amplitude: f.amplitude,
            noise_base: f.noise_base,
        }
    }
}

/// Fusion evaluation settings: detector, rates, evaluation window and
/// view subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSectionConfig {
    pub feature: FeatureSectionConfig,
    /// Peak-detection threshold in (0, 1).
    pub threshold: f64,
    /// Non-maximum-suppression radius (m).
    pub min_separation_m: f64,
    /// Detection-to-truth match radius for the accuracy score (m).
    pub match_radius_m: f64,
    /// Streaming rates evaluated by the view-subset studies (KB).
    pub rates_kb: Vec<f64>,
    /// Evaluation window: trace steps `start..end` by `stride`.
    pub eval_start_step: usize,
    pub eval_end_step: usize,
    pub eval_step_stride: usize,
    /// Named view subsets; indices into the fleet. Subset studies sweep
    /// over indices into this list.
    pub fov_subsets: Vec<Vec<usize>>,
}

impl Default for FusionSectionConfig {
    fn default() -> Self {
        Self {
            feature: FeatureSectionConfig::default(),
            threshold: 0.35,
            min_separation_m: 0.3,
            match_radius_m: 0.5,
            rates_kb: vec![10.0, 30.0],
            eval_start_step: 16,
            eval_end_step: 76,
            eval_step_stride: 6,
            fov_subsets: vec![
                vec![0],
                vec![1],
                vec![2],
                vec![3],
                vec![4],
                vec![5],
                vec![6],
                vec![0, 1, 2],
                vec![0, 1, 2, 3, 4, 5, 6],
            ],
        }
    }
}

/// Modeled on-device latency of the perception pipeline stages (ms).
/// Deterministic constants standing in for a measured device profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyConfig {
    pub detection_ms: f64,
    pub extraction_ms: f64,
    pub matching_ms: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            detection_ms: 10.0,
            extraction_ms: 60.0,
            matching_ms: 3.0,
        }
    }
}

/// The complete, versioned run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Config schema version; this build reads [`SCHEMA_VERSION`].
    pub schema_version: u32,
    /// Master seed; every random stream in a run derives from it.
    pub master_seed: u64,
    /// Directory run artifacts are written into.
    pub output_dir: String,
    /// Sweep worker threads; 0 uses all available cores. Outputs do not
    /// depend on this value.
    pub workers: usize,
    pub scenario: ScenarioConfig,
    pub arena: ArenaConfig,
    pub fleet: FleetConfig,
    pub channel: ChannelConfig,
    pub observation: ObservationConfig,
    pub calibration: CalibrationConfig,
    pub cycle: CycleSectionConfig,
    pub bounds: BoundsConfig,
    pub grid: GridConfig,
    pub proxy: ProxySectionConfig,
    pub weights: WeightsConfig,
    pub fusion: FusionSectionConfig,
    pub latency: LatencyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: 42,
            output_dir: "out".into(),
            workers: 0,
            scenario: ScenarioConfig::default(),
            arena: ArenaConfig::default(),
            fleet: FleetConfig::default(),
            channel: ChannelConfig::default(),
            observation: ObservationConfig::default(),
            calibration: CalibrationConfig::default(),
            cycle: CycleSectionConfig::default(),
            bounds: BoundsConfig::default(),
            grid: GridConfig::default(),
            proxy: ProxySectionConfig::default(),
            weights: WeightsConfig::default(),
            fusion: FusionSectionConfig::default(),
            latency: LatencyConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration from TOML text.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the configuration to TOML. `from_toml ∘ to_toml` is the
    /// identity.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig is always serializable")
    }

    /// Checks every field, reporting the first violation by TOML path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version {
                found: self.schema_version,
            });
        }
        self.validate_scenario()?;
        self.arena_model()
            .map_err(|e| invalid("arena", e.to_string()))?;
        self.validate_fleet()?;
        self.validate_channel()?;
        self.validate_observation()?;
        self.validate_calibration()?;
        self.validate_cycle()?;
        self.bounds_model()
            .and_then(|b| {
                b.validate()
                    .map_err(|e| invalid("bounds", e.to_string()))
            })?;
        self.grid_model()
            .validate()
            .map_err(|e| invalid("grid", e.to_string()))?;
        self.proxy_model(ProxyKind::Calibration)
            .validate()
            .map_err(|e| invalid("proxy.calibration", e.to_string()))?;
        self.proxy_model(ProxyKind::Streaming)
            .validate()
            .map_err(|e| invalid("proxy.streaming", e.to_string()))?;
        self.weights_model()
            .validate()
            .map_err(|e| invalid("weights", e.to_string()))?;
        self.validate_fusion()?;
        self.validate_latency()?;
        Ok(())
    }

    fn validate_scenario(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        self.world_model()
            .arrival
            .validate()
            .map_err(|e| invalid("scenario", e.to_string()))?;
        if !(s.duration_s > 0.0) {
            return Err(invalid("scenario.duration_s", "must be > 0"));
        }
        if !(s.time_step_s > 0.0) {
            return Err(invalid("scenario.time_step_s", "must be > 0"));
        }
        if !(s.walk_speed_m_s >= 0.0) {
            return Err(invalid("scenario.walk_speed_m_s", "must be ≥ 0"));
        }
        if s.descriptor_dim == 0 {
            return Err(invalid("scenario.descriptor_dim", "must be ≥ 1"));
        }
        if !(s.identity_sigma > 0.0) {
            return Err(invalid("scenario.identity_sigma", "must be > 0"));
        }
        Ok(())
    }

    fn validate_fleet(&self) -> Result<(), ConfigError> {
        if self.fleet.ring.is_some() && self.fleet.cameras.is_some() {
            return Err(invalid(
                "fleet",
                "set at most one of `ring` and `cameras`; omitting both \
                 selects the standard ring",
            ));
        }
        if matches!(&self.fleet.ring, Some(r) if r.count == 0) {
            return Err(invalid("fleet.ring.count", "must be ≥ 1"));
        }
        if matches!(&self.fleet.cameras, Some(c) if c.is_empty()) {
            return Err(invalid("fleet.cameras", "must list at least one camera"));
        }
        self.fleet_model()
            .map_err(|e| invalid("fleet", e.to_string()))?;
        Ok(())
    }

    fn validate_channel(&self) -> Result<(), ConfigError> {
        let c = &self.channel;
        for (path, v) in [
            ("channel.bandwidth_hz", c.bandwidth_hz),
            ("channel.tx_power_w", c.tx_power_w),
            ("channel.noise_psd_w_per_hz", c.noise_psd_w_per_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(path, "must be finite and > 0"));
            }
        }
        if !(c.inference_delay_s >= 0.0) {
            return Err(invalid("channel.inference_delay_s", "must be ≥ 0"));
        }
        if !(0.0..=1.0).contains(&c.packet_loss_rate) {
            return Err(invalid("channel.packet_loss_rate", "must lie in [0, 1]"));
        }
        self.path_loss_model()
            .validate()
            .map_err(|e| invalid("channel", e.to_string()))
    }

    fn validate_observation(&self) -> Result<(), ConfigError> {
        let o = &self.observation;
        if !(o.view_noise_sigma >= 0.0) {
            return Err(invalid("observation.view_noise_sigma", "must be ≥ 0"));
        }
        if !(o.pixel_noise_px >= 0.0) {
            return Err(invalid("observation.pixel_noise_px", "must be ≥ 0"));
        }
        if !(o.quant_range > 0.0) {
            return Err(invalid("observation.quant_range", "must be > 0"));
        }
        Ok(())
    }

    fn validate_calibration(&self) -> Result<(), ConfigError> {
        let c = &self.calibration;
        let n_cams = self.n_cameras();
        if c.top_n == 0 {
            return Err(invalid("calibration.top_n", "must be ≥ 1"));
        }
        if let Some(kb) = c.budget_kb {
            if !(kb > 0.0) || !kb.is_finite() {
                return Err(invalid("calibration.budget_kb", "must be finite and > 0"));
            }
        }
        if c.n_frames == 0 {
            return Err(invalid("calibration.n_frames", "must be ≥ 1"));
        }
        if c.frame_stride == 0 {
            return Err(invalid("calibration.frame_stride", "must be ≥ 1"));
        }
        let last = c.start_step + (c.n_frames - 1) * c.frame_stride;
        if (last as f64) * self.scenario.time_step_s > self.scenario.duration_s {
            return Err(invalid(
                "calibration.n_frames",
                "calibration window extends past scenario.duration_s",
            ));
        }
        if c.recal_camera >= n_cams {
            return Err(invalid(
                "calibration.recal_camera",
                format!("index out of range for a {n_cams}-camera fleet"),
            ));
        }
        if let Some(r) = c.reference_camera {
            if r >= n_cams {
                return Err(invalid(
                    "calibration.reference_camera",
                    format!("index out of range for a {n_cams}-camera fleet"),
                ));
            }
            if r == c.recal_camera {
                return Err(invalid(
                    "calibration.reference_camera",
                    "must differ from recal_camera",
                ));
            }
        }
        if !(c.select_distance_threshold > 0.0) {
            return Err(invalid(
                "calibration.select_distance_threshold",
                "must be > 0",
            ));
        }
        if !(c.rotation_drift_deg_per_s >= 0.0) {
            return Err(invalid("calibration.rotation_drift_deg_per_s", "must be ≥ 0"));
        }
        if !(c.translation_drift_m_per_s >= 0.0) {
            return Err(invalid(
                "calibration.translation_drift_m_per_s",
                "must be ≥ 0",
            ));
        }
        Ok(())
    }

    fn validate_cycle(&self) -> Result<(), ConfigError> {
        let c = &self.cycle;
        if !(0.0..=1.0).contains(&c.calibration_prob) {
            return Err(invalid("cycle.calibration_prob", "must lie in [0, 1]"));
        }
        if !(c.calibration_interval_s > 0.0) {
            return Err(invalid("cycle.calibration_interval_s", "must be > 0"));
        }
        if !(c.sampling_interval_s > 0.0) {
            return Err(invalid("cycle.sampling_interval_s", "must be > 0"));
        }
        for (path, v) in [
            ("cycle.costs.idle_kb", c.costs.idle_kb),
            ("cycle.costs.calibration_kb", c.costs.calibration_kb),
            ("cycle.costs.streaming_kb", c.costs.streaming_kb),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(path, "must be finite and ≥ 0"));
            }
        }
        Ok(())
    }

    fn validate_fusion(&self) -> Result<(), ConfigError> {
        let f = &self.fusion;
        if f.feature.height < 2 || f.feature.width < 2 {
            return Err(invalid("fusion.feature", "grid must be at least 2×2"));
        }
        for (path, v) in [
            ("fusion.feature.bump_sigma_m", f.feature.bump_sigma_m),
            ("fusion.feature.max_cell_span_m", f.feature.max_cell_span_m),
            ("fusion.feature.amplitude", f.feature.amplitude),
            ("fusion.min_separation_m", f.min_separation_m),
            ("fusion.match_radius_m", f.match_radius_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(path, "must be finite and > 0"));
            }
        }
        if !(f.feature.noise_base >= 0.0) {
            return Err(invalid("fusion.feature.noise_base", "must be ≥ 0"));
        }
        if !(f.threshold > 0.0 && f.threshold < 1.0) {
            return Err(invalid("fusion.threshold", "must lie in (0, 1)"));
        }
        if f.rates_kb.is_empty() {
            return Err(invalid("fusion.rates_kb", "must list at least one rate"));
        }
        for &r in &f.rates_kb {
            if !(r > 0.0) || !r.is_finite() {
                return Err(invalid("fusion.rates_kb", "rates must be finite and > 0"));
            }
        }
        if f.eval_step_stride == 0 {
            return Err(invalid("fusion.eval_step_stride", "must be ≥ 1"));
        }
        if f.eval_start_step >= f.eval_end_step {
            return Err(invalid(
                "fusion.eval_end_step",
                "must be greater than eval_start_step",
            ));
        }
        let n_steps = (self.scenario.duration_s / self.scenario.time_step_s) as usize;
        if f.eval_end_step > n_steps + 1 {
            return Err(invalid(
                "fusion.eval_end_step",
                "evaluation window extends past scenario.duration_s",
            ));
        }
        if f.fov_subsets.is_empty() {
            return Err(invalid("fusion.fov_subsets", "must list at least one subset"));
        }
        let n_cams = self.n_cameras();
        for (i, subset) in f.fov_subsets.iter().enumerate() {
            if subset.is_empty() {
                return Err(invalid(
                    &format!("fusion.fov_subsets[{i}]"),
                    "subset must not be empty",
                ));
            }
            for &cam in subset {
                if cam >= n_cams {
                    return Err(invalid(
                        &format!("fusion.fov_subsets[{i}]"),
                        format!("camera index {cam} out of range for a {n_cams}-camera fleet"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_latency(&self) -> Result<(), ConfigError> {
        for (path, v) in [
            ("latency.detection_ms", self.latency.detection_ms),
            ("latency.extraction_ms", self.latency.extraction_ms),
            ("latency.matching_ms", self.latency.matching_ms),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(path, "must be finite and ≥ 0"));
            }
        }
        Ok(())
    }

    /// Number of cameras the fleet section describes.
    pub fn n_cameras(&self) -> usize {
        match (self.fleet.effective_ring(), &self.fleet.cameras) {
            (Some(r), _) => r.count,
            (None, Some(c)) => c.len(),
            (None, None) => unreachable!("effective_ring covers this"),
        }
    }

    /// Builds the world model for scenario generation.
    pub fn world_model(&self) -> WorldModel {
        let s = &self.scenario;
        WorldModel {
            arrival: ArrivalModel {
                arrival_rate_per_s: s.arrival_rate_per_s,
                dwell_log_mean: s.dwell_log_mean,
                dwell_log_sigma: s.dwell_log_sigma,
            },
            walk_speed_m_s: s.walk_speed_m_s,
            descriptor_dim: s.descriptor_dim,
            identity_sigma: s.identity_sigma,
        }
    }

    /// Builds the analysis arena.
    pub fn arena_model(&self) -> Result<Arena, camsim_core::scenario::ScenarioError> {
        Arena::new(self.arena.width_m, self.arena.length_m, self.arena.cell_m)
    }

    /// Builds the camera fleet.
    pub fn fleet_model(&self) -> Result<Vec<CameraModel>, camsim_core::calib::CalibError> {
        let k = Intrinsics {
            fx: self.fleet.intrinsics.fx,
            fy: self.fleet.intrinsics.fy,
            cx: self.fleet.intrinsics.cx,
            cy: self.fleet.intrinsics.cy,
        };
        match (self.fleet.effective_ring(), &self.fleet.cameras) {
            (Some(r), _) => ring_fleet(
                r.count,
                self.arena.width_m,
                self.arena.length_m,
                r.setback_m,
                r.height_m,
                r.look_at_fraction,
                k,
                self.fleet.image_width_px,
                self.fleet.image_height_px,
            ),
            (None, Some(cams)) => cams
                .iter()
                .map(|c| {
                    k.validate()?;
                    Ok(CameraModel {
                        intrinsics: k,
                        extrinsics: Extrinsics::look_at(
                            nalgebra::Point3::new(c.position[0], c.position[1], c.position[2]),
                            nalgebra::Point3::new(c.look_at[0], c.look_at[1], c.look_at[2]),
                        )?,
                        image_width_px: self.fleet.image_width_px,
                        image_height_px: self.fleet.image_height_px,
                    })
                })
                .collect(),
            (None, None) => unreachable!("effective_ring covers this"),
        }
    }

    /// Builds the path-loss model.
    pub fn path_loss_model(&self) -> PathLossConfig {
        let c = &self.channel;
        PathLossConfig {
            carrier_freq_hz: c.carrier_freq_hz,
            path_loss_exponent: c.path_loss_exponent,
            shadowing_sigma_db: c.shadowing_sigma_db,
            reference_distance_m: c.reference_distance_m,
            interferer_density_per_100m2: c.interferer_density_per_100m2,
            interferer_power_w: c.interferer_power_w,
            mean_interferer_distance_m: c.mean_interferer_distance_m,
        }
    }

    /// A deterministic (shadowing-free) link for a transmitter at
    /// `distance_m`, at the configured default bandwidth.
    pub fn mean_link_at(&self, distance_m: f64) -> LinkParams {
        let path = self.path_loss_model();
        let c = &self.channel;
        LinkParams {
            bandwidth_hz: c.bandwidth_hz,
            tx_power_w: c.tx_power_w,
            noise_psd_w_per_hz: path
                .effective_noise_psd(c.noise_psd_w_per_hz, c.bandwidth_hz),
            channel_gain: path.mean_gain_at(distance_m.max(path.reference_distance_m)),
            inference_delay_s: c.inference_delay_s,
        }
    }

    /// Builds the observation-noise model.
    pub fn observation_model(&self) -> ObservationModel {
        ObservationModel {
            view_noise_sigma: self.observation.view_noise_sigma,
            pixel_noise_px: self.observation.pixel_noise_px,
            quant_range: self.observation.quant_range,
        }
    }

    /// Builds the calibration settings at the configured budget.
    pub fn calibration_settings(&self) -> CalibrationSettings {
        CalibrationSettings {
            top_n: self.calibration.top_n,
            budget_bits: self
                .calibration
                .budget_kb
                .map(|kb| (kb * BITS_PER_KB) as u64),
            quant_range: self.observation.quant_range,
        }
    }

    /// Builds the cycle configuration for the age metrics.
    pub fn cycle_model(&self) -> CycleConfig {
        let c = &self.cycle;
        CycleConfig {
            calibration_prob: c.calibration_prob,
            calibration_interval_s: c.calibration_interval_s,
            count_threshold: c.count_threshold,
            phase_costs: PhaseCosts {
                idle_bits: c.costs.idle_kb * BITS_PER_KB,
                calibration_bits: c.costs.calibration_kb * BITS_PER_KB,
                streaming_bits: c.costs.streaming_kb * BITS_PER_KB,
            },
        }
    }

    /// Builds the scheduler bounds (payload converted to bits).
    pub fn bounds_model(&self) -> Result<Bounds, ConfigError> {
        let b = &self.bounds;
        let pair = |name: &str, [lo, hi]: [f64; 2]| -> Result<(f64, f64), ConfigError> {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(invalid(
                    &format!("bounds.{name}"),
                    "must be a finite range [lo, hi] with 0 < lo ≤ hi",
                ));
            }
            Ok((lo, hi))
        };
        let (plo, phi) = pair("payload_kb", b.payload_kb)?;
        Ok(Bounds {
            bandwidth_hz: pair("bandwidth_hz", b.bandwidth_hz)?,
            payload_bits: (plo * BITS_PER_KB, phi * BITS_PER_KB),
            sampling_interval_s: pair("sampling_interval_s", b.sampling_interval_s)?,
            calibration_interval_s: pair("calibration_interval_s", b.calibration_interval_s)?,
        })
    }

    /// Builds the scheduler grid resolution.
    pub fn grid_model(&self) -> GridSpec {
        GridSpec {
            bandwidth_points: self.grid.bandwidth_points,
            payload_points: self.grid.payload_points,
            interval_points: self.grid.interval_points,
        }
    }

    /// Builds one of the two accuracy proxies.
    pub fn proxy_model(&self, kind: ProxyKind) -> AccuracyProxy {
        let p = match kind {
            ProxyKind::Calibration => &self.proxy.calibration,
            ProxyKind::Streaming => &self.proxy.streaming,
        };
        AccuracyProxy {
            kind,
            gamma_max: p.gamma_max,
            rate_scale_bits: p.rate_scale_kb * BITS_PER_KB,
            floor: p.floor,
        }
    }

    /// Builds the Lagrange weights.
    pub fn weights_model(&self) -> LagrangeWeights {
        LagrangeWeights {
            lambda_ca: self.weights.lambda_ca,
            lambda_k: self.weights.lambda_k,
        }
    }

    /// Builds the feature-synthesis configuration.
    pub fn feature_model(&self) -> FeatureConfig {
        let f = &self.fusion.feature;
        FeatureConfig {
            height: f.height,
            width: f.width,
            bump_sigma_m: f.bump_sigma_m,
            max_cell_span_m: f.max_cell_span_m,
            amplitude: f.amplitude,
            noise_base: f.noise_base,
        }
    }

    /// Trace steps of the fusion evaluation window.
    pub fn eval_steps(&self) -> Vec<usize> {
        (self.fusion.eval_start_step..self.fusion.eval_end_step)
            .step_by(self.fusion.eval_step_stride)
            .collect()
    }

    /// Trace steps of the calibration frame window.
    pub fn calibration_steps(&self) -> Vec<usize> {
        let c = &self.calibration;
        (0..c.n_frames)
            .map(|i| c.start_step + i * c.frame_stride)
            .collect()
    }
}

/// Loads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunConfig::from_toml(&text)
}

/// Writes a configuration as TOML.
pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<(), ConfigError> {
    std::fs::write(path, cfg.to_toml()).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}
