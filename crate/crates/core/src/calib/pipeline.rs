//! End-to-end re-calibration pipeline.
//!
//! A camera with a stale pose estimate collects synchronized frames with a
//! correctly-calibrated reference camera. The reference transmits its
//! keypoint descriptors through the budgeted channel (quantized per the
//! plan), descriptors are matched frame by frame, each match becomes an
//! image↔world correspondence (the reference's known ground-plane inverse
//! supplies world coordinates), and the stacked correspondences feed the
//! homography estimator and pose recovery.

use nalgebra::Point2;

use super::camera::{CameraModel, Extrinsics, Intrinsics};
use super::homography::{estimate_homography, recover_extrinsics, Correspondence};
use super::matching::match_keypoints;
use super::quant::{plan_quantization, quantize_descriptor, QuantizationPlan};
use super::CalibError;

/// One observed keypoint: the pixel where a target was seen plus its
/// appearance descriptor. `identity` is ground-truth bookkeeping for
/// evaluation (match precision); the pipeline itself never reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointObservation {
    pub identity: u64,
    pub image_point: Point2<f64>,
    pub descriptor: Vec<f64>,
}

/// All keypoints one camera observed in one synchronized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservations {
    /// Index of the frame on the shared capture clock.
    pub step: usize,
    pub keypoints: Vec<KeypointObservation>,
}

/// Tuning knobs for one calibration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    /// Keep the `top_n` best matches per frame.
    pub top_n: usize,
    /// Feature bit budget for the reference→recalibration payload;
    /// `None` transmits descriptors unquantized.
    pub budget_bits: Option<u64>,
    /// Quantizer clipping range (descriptor units).
    pub quant_range: f64,
}

/// Result of a calibration run, before scoring against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    /// Recovered pose of the re-calibrated camera.
    pub extrinsics: Extrinsics,
    /// Quantization plan actually used (`None` when unquantized).
    pub plan: Option<QuantizationPlan>,
    /// Total correspondences fed to the homography estimator.
    pub n_correspondences: usize,
    /// Frames that could not supply `top_n` matches.
    pub frames_with_shortfall: usize,
    /// Mean descriptor distance over the used matches.
    pub mean_match_distance: f64,
    /// The pixel↔ground pairs actually fed to the homography estimator,
    /// in frame order; kept so callers can serialize or audit them.
    pub correspondences: Vec<Correspondence>,
}

/// Runs the full pipeline: plan → quantize → match → correspondences →
/// homography → pose.
///
/// `reference` must be the correctly-calibrated camera that produced
/// `reference_frames`; `recal_frames` are the same capture steps seen by
/// the camera being re-calibrated, whose `intrinsics` are known but whose
/// pose is not. Frames are paired by position and must line up.
pub fn calibrate(
    intrinsics: &Intrinsics,
    reference: &CameraModel,
    reference_frames: &[FrameObservations],
    recal_frames: &[FrameObservations],
    settings: &CalibrationSettings,
) -> Result<CalibrationOutcome, CalibError> {
    intrinsics.validate()?;
    if reference_frames.len() != recal_frames.len() {
        return Err(CalibError::FrameMismatch {
            reference: reference_frames.len(),
            recalibration: recal_frames.len(),
        });
    }

    // Plan the payload over every reference keypoint in the window.
    let dim = reference_frames
        .iter()
        .chain(recal_frames)
        .flat_map(|f| f.keypoints.first())
        .map(|k| k.descriptor.len())
        .next()
        .unwrap_or(0);
    let n_ref_keypoints: usize = reference_frames.iter().map(|f| f.keypoints.len()).sum();
    let plan = match settings.budget_bits {
        Some(budget) => Some(plan_quantization(dim, n_ref_keypoints, budget)?),
        None => None,
    };

    let mut correspondences: Vec<Correspondence> = Vec::new();
    let mut frames_with_shortfall = 0usize;
    for (ref_frame, recal_frame) in reference_frames.iter().zip(recal_frames) {
        if ref_frame.step != recal_frame.step {
            return Err(CalibError::FrameMismatch {
                reference: ref_frame.step,
                recalibration: recal_frame.step,
            });
        }
        if ref_frame.keypoints.is_empty() || recal_frame.keypoints.is_empty() {
            frames_with_shortfall += 1;
            continue;
        }
        let ref_descs: Vec<Vec<f64>> = ref_frame
            .keypoints
            .iter()
            .map(|k| match &plan {
                Some(p) => {
                    quantize_descriptor(&k.descriptor, p.bits_per_component, settings.quant_range)
                }
                None => k.descriptor.clone(),
            })
            .collect();
        let recal_descs: Vec<Vec<f64>> = recal_frame
            .keypoints
            .iter()
            .map(|k| k.descriptor.clone())
            .collect();

        let matches = match_keypoints(&recal_descs, &ref_descs, settings.top_n)?;
        if matches.shortfall {
            frames_with_shortfall += 1;
        }
        for pair in &matches.pairs {
            let ref_pixel = &ref_frame.keypoints[pair.index_b].image_point;
            let world = reference.ground_from_image(ref_pixel)?;
            correspondences.push(Correspondence {
                image_point: recal_frame.keypoints[pair.index_a].image_point,
                world_point: world,
                match_distance: pair.distance,
            });
        }
    }

    if correspondences.len() < super::homography::MIN_CORRESPONDENCES {
        return Err(CalibError::CalibrationInfeasible {
            got: correspondences.len(),
            need: super::homography::MIN_CORRESPONDENCES,
        });
    }

    let h = estimate_homography(&correspondences)?;
    let extrinsics = recover_extrinsics(&h, intrinsics)?;
    let mean_match_distance = correspondences
        .iter()
        .map(|c| c.match_distance)
        .sum::<f64>()
        / correspondences.len() as f64;
    Ok(CalibrationOutcome {
        extrinsics,
        plan,
        n_correspondences: correspondences.len(),
        frames_with_shortfall,
        mean_match_distance,
        correspondences,
    })
}

/// Fraction of matched pairs that join observations of the same identity.
///
/// Evaluation-only helper: it reads the ground-truth identity fields that
/// the pipeline itself ignores.
pub fn match_precision(
    frames_a: &[FrameObservations],
    frames_b: &[FrameObservations],
    top_n: usize,
) -> Result<f64, CalibError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (fa, fb) in frames_a.iter().zip(frames_b) {
        if fa.keypoints.is_empty() || fb.keypoints.is_empty() {
            continue;
        }
        let da: Vec<Vec<f64>> = fa.keypoints.iter().map(|k| k.descriptor.clone()).collect();
        let db: Vec<Vec<f64>> = fb.keypoints.iter().map(|k| k.descriptor.clone()).collect();
        let m = match_keypoints(&da, &db, top_n)?;
        for p in &m.pairs {
            total += 1;
            if fa.keypoints[p.index_a].identity == fb.keypoints[p.index_b].identity {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(CalibError::EmptyDescriptorSet);
    }
    Ok(correct as f64 / total as f64)
}

/// Picks the reference view sharing the most scene content with the
/// camera being re-calibrated: the candidate with the highest count of
/// matches whose descriptor distance clears `distance_threshold`.
///
/// Returns `None` when no candidate produces a single qualifying match.
pub fn select_reference(
    recal_frames: &[FrameObservations],
    candidates: &[&[FrameObservations]],
    distance_threshold: f64,
) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None; // (count, index)
    for (idx, cand) in candidates.iter().enumerate() {
        let mut count = 0usize;
        for (fr, fc) in recal_frames.iter().zip(*cand) {
            if fr.keypoints.is_empty() || fc.keypoints.is_empty() {
                continue;
            }
            let dr: Vec<Vec<f64>> = fr.keypoints.iter().map(|k| k.descriptor.clone()).collect();
            let dc: Vec<Vec<f64>> = fc.keypoints.iter().map(|k| k.descriptor.clone()).collect();
            let n = dr.len().min(dc.len());
            if let Ok(m) = match_keypoints(&dr, &dc, n) {
                count += m
                    .pairs
                    .iter()
                    .filter(|p| p.distance < distance_threshold)
                    .count();
            }
        }
        if count > 0 && best.map_or(true, |(c, _)| count > c) {
            best = Some((count, idx));
        }
    }
    best.map(|(_, idx)| idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn fleet_pair() -> (CameraModel, CameraModel) {
        let intr = Intrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
        };
        let reference = CameraModel {
            intrinsics: intr,
            extrinsics: Extrinsics::look_at(Point3::new(-7.0, -10.0, 2.8), Point3::origin())
                .unwrap(),
            image_width_px: 640,
            image_height_px: 480,
        };
        let recal = CameraModel {
            intrinsics: intr,
            extrinsics: Extrinsics::look_at(
                Point3::new(6.5, -11.0, 2.4),
                Point3::new(-1.0, 1.0, 0.0),
            )
            .unwrap(),
            image_width_px: 640,
            image_height_px: 480,
        };
        (reference, recal)
    }

    /// Builds exact, noiseless observations of shared ground targets.
    fn exact_frames(
        cam: &CameraModel,
        targets: &[(u64, f64, f64)],
        step: usize,
    ) -> FrameObservations {
        let keypoints = targets
            .iter()
            .filter_map(|&(id, x, y)| {
                let g = Point2::new(x, y);
                if !cam.sees_ground_point(&g) {
                    return None;
                }
                let mut descriptor = vec![0.0; 16];
                // Distinct, widely-separated synthetic descriptors.
                descriptor[(id as usize) % 16] = 1.0 + id as f64;
                Some(KeypointObservation {
                    identity: id,
                    image_point: cam.project_ground(&g).unwrap(),
                    descriptor,
                })
            })
            .collect();
        FrameObservations { step, keypoints }
    }

    fn shared_targets() -> Vec<(u64, f64, f64)> {
        vec![
            (0, 0.0, 0.0),
            (1, 2.0, -3.0),
            (2, -3.0, 2.0),
            (3, 1.5, 4.0),
            (4, -1.0, -5.0),
        ]
    }

    #[test]
    fn noiseless_unquantized_recovery_is_exact() {
        let (reference, recal) = fleet_pair();
        let targets = shared_targets();
        let ref_frames = vec![exact_frames(&reference, &targets, 0)];
        let recal_frames = vec![exact_frames(&recal, &targets, 0)];
        assert_eq!(ref_frames[0].keypoints.len(), 5, "fixture targets must be co-visible");
        assert_eq!(recal_frames[0].keypoints.len(), 5);

        let outcome = calibrate(
            &recal.intrinsics,
            &reference,
            &ref_frames,
            &recal_frames,
            &CalibrationSettings {
                top_n: 5,
                budget_bits: None,
                quant_range: 1.0,
            },
        )
        .unwrap();
        let err = super::super::homography::pose_errors(&outcome.extrinsics, &recal.extrinsics);
        assert!(err.rotation_deg < 1e-6, "rotation error {}", err.rotation_deg);
        assert!(err.translation_m < 1e-6, "translation error {}", err.translation_m);
        assert_eq!(outcome.n_correspondences, 5);
        assert!(outcome.plan.is_none());
    }

    #[test]
    fn budget_below_one_bit_per_component_errors() {
        let (reference, recal) = fleet_pair();
        let targets = shared_targets();
        let ref_frames = vec![exact_frames(&reference, &targets, 0)];
        let recal_frames = vec![exact_frames(&recal, &targets, 0)];
        let res = calibrate(
            &recal.intrinsics,
            &reference,
            &ref_frames,
            &recal_frames,
            &CalibrationSettings {
                top_n: 5,
                budget_bits: Some(5 * 16 - 1), // 5 keypoints × 16 dims − 1
                quant_range: 1.0,
            },
        );
        assert!(matches!(res, Err(CalibError::BudgetTooSmall { .. })));
    }

    #[test]
    fn too_few_correspondences_is_infeasible() {
        let (reference, recal) = fleet_pair();
        let targets = vec![(0u64, 0.0, 0.0), (1, 2.0, -3.0), (2, -3.0, 2.0)];
        let ref_frames = vec![exact_frames(&reference, &targets, 0)];
        let recal_frames = vec![exact_frames(&recal, &targets, 0)];
        let res = calibrate(
            &recal.intrinsics,
            &reference,
            &ref_frames,
            &recal_frames,
            &CalibrationSettings {
                top_n: 5,
                budget_bits: None,
                quant_range: 1.0,
            },
        );
        assert!(matches!(res, Err(CalibError::CalibrationInfeasible { .. })));
    }

    #[test]
    fn mismatched_frame_windows_error() {
        let (reference, recal) = fleet_pair();
        let targets = shared_targets();
        let ref_frames = vec![exact_frames(&reference, &targets, 0)];
        let recal_frames = vec![
            exact_frames(&recal, &targets, 0),
            exact_frames(&recal, &targets, 1),
        ];
        assert!(matches!(
            calibrate(
                &recal.intrinsics,
                &reference,
                &ref_frames,
                &recal_frames,
                &CalibrationSettings {
                    top_n: 5,
                    budget_bits: None,
                    quant_range: 1.0,
                },
            ),
            Err(CalibError::FrameMismatch { .. })
        ));
    }

    #[test]
    fn match_precision_is_perfect_on_clean_descriptors() {
        let (reference, recal) = fleet_pair();
        let targets = shared_targets();
        let a = vec![exact_frames(&reference, &targets, 0)];
        let b = vec![exact_frames(&recal, &targets, 0)];
        assert_eq!(match_precision(&a, &b, 5).unwrap(), 1.0);
    }

    #[test]
    fn select_reference_prefers_the_overlapping_view() {
        let (reference, recal) = fleet_pair();
        let targets = shared_targets();
        let recal_frames = vec![exact_frames(&recal, &targets, 0)];
        let overlapping = vec![exact_frames(&reference, &targets, 0)];
        // A camera facing away from the targets: they all sit behind it.
        let elsewhere_cam = CameraModel {
            extrinsics: Extrinsics::look_at(
                Point3::new(0.0, 10.0, 2.8),
                Point3::new(0.0, 19.0, 0.0),
            )
            .unwrap(),
            ..reference.clone()
        };
        let elsewhere = vec![exact_frames(&elsewhere_cam, &targets, 0)];
        let got = select_reference(
            &recal_frames,
            &[&elsewhere, &overlapping],
            0.5,
        );
        assert_eq!(got, Some(1));
    }
}
