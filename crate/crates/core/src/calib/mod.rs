//! Ground-plane extrinsic self-calibration.
//!
//! Cameras observe the same ground-plane targets from different poses. A
//! camera whose pose estimate has gone stale matches its keypoint
//! descriptors against those transmitted by a correctly-calibrated
//! reference camera under a channel bit budget, turns the matches into
//! image↔world correspondences, estimates the ground homography and
//! recovers its extrinsics — then scores the recovery with rotation
//! (degrees), translation (meters) and combined Frobenius-percent errors.
//!
//! Submodules: [`camera`] (projection math), [`matching`] (budgeted
//! descriptor matching), [`quant`] (bit planning/quantization),
//! [`homography`] (DLT + pose recovery + error metrics) and [`pipeline`]
//! (the end-to-end calibration routine).

pub mod camera;
pub mod homography;
pub mod matching;
pub mod pipeline;
pub mod quant;

pub use camera::{ring_fleet, CameraModel, Extrinsics, Intrinsics};
pub use homography::{
    estimate_homography, extrinsic_error, pose_errors, recover_extrinsics, rotation_error_deg,
    translation_error_m, Correspondence, PoseErrors, MIN_CORRESPONDENCES,
};
pub use matching::{match_keypoints, MatchPair, Matches};
pub use pipeline::{
    calibrate, match_precision, select_reference, CalibrationOutcome, CalibrationSettings,
    FrameObservations, KeypointObservation,
};
pub use quant::{plan_quantization, quantize_descriptor, QuantizationPlan};

use thiserror::Error;

/// Errors from camera geometry, matching, quantization planning and the
/// calibration pipeline.
#[derive(Debug, Error, PartialEq)]
pub enum CalibError {
    /// Focal lengths must be strictly positive.
    #[error("invalid intrinsics: fx={fx}, fy={fy} (must be > 0)")]
    InvalidIntrinsics { fx: f64, fy: f64 },
    /// A matrix failed the rotation invariants.
    #[error("not a proper rotation: orthonormality error {ortho_err:.3e}, det error {det_err:.3e}")]
    InvalidRotation { ortho_err: f64, det_err: f64 },
    /// Viewing direction parallel to the up axis.
    #[error("look-at direction is degenerate (parallel to up, or zero)")]
    DegenerateLookAt,
    /// Projection of a point with non-positive depth.
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    /// The ground-plane matrix is not invertible (or the pixel lies on
    /// the horizon).
    #[error("camera ground-plane matrix is singular or the pixel has no ground intersection")]
    DegenerateCamera,
    /// Matching requires a positive pair budget.
    #[error("top_n must be at least 1")]
    InvalidTopN,
    /// Matching/precision over an empty descriptor set.
    #[error("descriptor set is empty")]
    EmptyDescriptorSet,
    /// Descriptors of different dimensions cannot be matched.
    #[error("descriptor dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    /// Feature budget cannot fund one bit per component.
    #[error("budget of {budget_bits} bits is below the {minimum_bits}-bit minimum (1 bit/component)")]
    BudgetTooSmall { budget_bits: u64, minimum_bits: u64 },
    /// Homography needs at least four correspondences.
    #[error("{got} correspondences, need at least {need}")]
    NotEnoughCorrespondences { got: usize, need: usize },
    /// A correspondence contained NaN/∞ coordinates.
    #[error("non-finite correspondence: image {image:?}, world {world:?}")]
    NonFiniteCorrespondence {
        image: (f64, f64),
        world: (f64, f64),
    },
    /// The DLT system has no unique solution (degenerate geometry).
    #[error("correspondence geometry is rank-deficient (e.g. collinear world points)")]
    RankDeficient,
    /// A homography whose columns cannot form a camera frame.
    #[error("homography is degenerate: near-zero column under K⁻¹")]
    DegenerateHomography,
    /// The two cameras supplied observation windows of different shapes.
    #[error("frame windows disagree: reference {reference}, recalibration {recalibration}")]
    FrameMismatch {
        reference: usize,
        recalibration: usize,
    },
    /// Not enough correspondences survived matching to calibrate.
    #[error("calibration infeasible: {got} correspondences, need {need}")]
    CalibrationInfeasible { got: usize, need: usize },
}
