//! Ground-plane homography estimation and pose recovery.
//!
//! Given pixel observations of ground-plane points with known world
//! coordinates, the direct linear transform (DLT) estimates the 3×3
//! matrix `H ∝ P_0 = K·[r1 r2 t]` minimizing algebraic error. Points are
//! Hartley-normalized first (centroid at the origin, mean distance √2)
//! so the linear system is well conditioned. The recovered `H` then
//! splits back into extrinsics: the columns of `K⁻¹H` are `r1`, `r2` and
//! `t` up to a common scale fixed by `‖r1‖ = 1`, `r3 = r1 × r2`, and the
//! resulting frame is snapped to the nearest proper rotation.

use nalgebra::{DMatrix, Matrix3, Point2, Vector3};

use super::camera::{Extrinsics, Intrinsics};
use super::CalibError;

/// One image↔world correspondence on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Observed pixel in the camera being calibrated.
    pub image_point: Point2<f64>,
    /// Ground-plane world coordinates supplied by the reference camera, m.
    pub world_point: Point2<f64>,
    /// Descriptor distance of the match that produced this pair.
    pub match_distance: f64,
}

impl Correspondence {
    fn is_finite(&self) -> bool {
        self.image_point.x.is_finite()
            && self.image_point.y.is_finite()
            && self.world_point.x.is_finite()
            && self.world_point.y.is_finite()
    }
}

/// Minimum number of correspondences for a homography.
pub const MIN_CORRESPONDENCES: usize = 4;

/// Hartley normalization: a similarity `T` moving the centroid to the
/// origin and the mean distance to √2.
fn hartley_transform(points: impl Iterator<Item = (f64, f64)> + Clone) -> Option<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points
        .clone()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .map(|(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist < 1e-12 {
        return None; // all points coincide
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(
        s, 0.0, -s * cx, //
        0.0, s, -s * cy, //
        0.0, 0.0, 1.0,
    ))
}

fn apply_h(t: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
    let v = t * Vector3::new(x, y, 1.0);
    (v.x / v.z, v.y / v.z)
}

/// Estimates the ground-to-image homography from ≥4 correspondences.
///
/// Returns `H` with `‖H‖_F = 1`, sign-normalized so `H[2][2] ≥ 0`.
/// Degenerate geometry (e.g. all world points collinear) is reported as
/// a rank-deficiency error.
pub fn estimate_homography(correspondences: &[Correspondence]) -> Result<Matrix3<f64>, CalibError> {
    let n = correspondences.len();
    if n < MIN_CORRESPONDENCES {
        return Err(CalibError::NotEnoughCorrespondences {
            got: n,
            need: MIN_CORRESPONDENCES,
        });
    }
    if let Some(bad) = correspondences.iter().find(|c| !c.is_finite()) {
        return Err(CalibError::NonFiniteCorrespondence {
            image: (bad.image_point.x, bad.image_point.y),
            world: (bad.world_point.x, bad.world_point.y),
        });
    }

    let t_world = hartley_transform(
        correspondences
            .iter()
            .map(|c| (c.world_point.x, c.world_point.y)),
    )
    .ok_or(CalibError::RankDeficient)?;
    let t_img = hartley_transform(
        correspondences
            .iter()
            .map(|c| (c.image_point.x, c.image_point.y)),
    )
    .ok_or(CalibError::RankDeficient)?;

    // Assemble the 2n×9 DLT system in normalized coordinates.
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for (i, c) in correspondences.iter().enumerate() {
        let (x, y) = apply_h(&t_world, c.world_point.x, c.world_point.y);
        let (u, v) = apply_h(&t_img, c.image_point.x, c.image_point.y);
        let r0 = 2 * i;
        // [0 0 0  −x −y −1  v·x v·y v]
        a[(r0, 3)] = -x;
        a[(r0, 4)] = -y;
        a[(r0, 5)] = -1.0;
        a[(r0, 6)] = v * x;
        a[(r0, 7)] = v * y;
        a[(r0, 8)] = v;
        // [x y 1  0 0 0  −u·x −u·y −u]
        let r1 = r0 + 1;
        a[(r1, 0)] = x;
        a[(r1, 1)] = y;
        a[(r1, 2)] = 1.0;
        a[(r1, 6)] = -u * x;
        a[(r1, 7)] = -u * y;
        a[(r1, 8)] = -u;
    }

    // Null vector of A via the eigendecomposition of the 9×9 Gram matrix
    // (always gives all nine directions, unlike a thin SVD of A).
    let gram = a.transpose() * &a;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (lam_min, lam_second, lam_max) = (
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[8]].max(0.0),
    );
    // The solution direction must be unique: the second-smallest
    // eigenvalue (squared singular value) has to clear the noise floor.
    if lam_second <= 1e-12 * lam_max.max(f64::MIN_POSITIVE) {
        return Err(CalibError::RankDeficient);
    }
    let _ = lam_min;
    let h_vec = eig.eigenvectors.column(order[0]);
    let h_norm = Matrix3::new(
        h_vec[0], h_vec[1], h_vec[2], //
        h_vec[3], h_vec[4], h_vec[5], //
        h_vec[6], h_vec[7], h_vec[8],
    );

    // Undo the normalization, then fix scale and sign.
    let t_img_inv = t_img.try_inverse().expect("similarity is invertible");
    let mut h = t_img_inv * h_norm * t_world;
    let norm = h.norm();
    if norm < 1e-300 {
        return Err(CalibError::RankDeficient);
    }
    h /= norm;
    if h[(2, 2)] < 0.0 {
        h = -h;
    }
    Ok(h)
}

/// Splits a ground-plane homography into camera extrinsics.
///
/// `M = K⁻¹H`; the scale is fixed by `‖r1‖ = 1`; `r3 = r1 × r2`; the
/// stacked frame is projected to the nearest rotation (polar projection
/// via SVD, with a determinant sign fix so no reflection escapes).
pub fn recover_extrinsics(h: &Matrix3<f64>, k: &Intrinsics) -> Result<Extrinsics, CalibError> {
    k.validate()?;
    let m = k
        .matrix()
        .try_inverse()
        .expect("validated intrinsics are invertible")
        * h;
    let m1 = m.column(0).into_owned();
    let m2 = m.column(1).into_owned();
    let m3 = m.column(2).into_owned();
    let scale_ref = m.norm();
    if m1.norm() < 1e-12 * scale_ref || m2.norm() < 1e-12 * scale_ref {
        return Err(CalibError::DegenerateHomography);
    }
    let lambda = 1.0 / m1.norm();
    let r1 = lambda * m1;
    let r2 = lambda * m2;
    let t = lambda * m3;
    let r3 = r1.cross(&r2);
    let approx = Matrix3::from_columns(&[r1, r2, r3]);

    // Nearest rotation: R = U·diag(1,1,det(UVᵀ))·Vᵀ.
    let svd = approx.svd(true, true);
    let u = svd.u.ok_or(CalibError::DegenerateHomography)?;
    let v_t = svd.v_t.ok_or(CalibError::DegenerateHomography)?;
    let det = (u * v_t).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let rotation = u * fix * v_t;
    Extrinsics::new(rotation, t)
}

/// Rotation part of the pose error: geodesic angle between the two
/// rotations, in degrees.
pub fn rotation_error_deg(recovered: &Extrinsics, ground_truth: &Extrinsics) -> f64 {
    let rel = recovered.rotation.transpose() * ground_truth.rotation;
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Translation part of the pose error: Euclidean distance between the
/// two translation vectors, in meters.
pub fn translation_error_m(recovered: &Extrinsics, ground_truth: &Extrinsics) -> f64 {
    (recovered.translation - ground_truth.translation).norm()
}

/// Combined extrinsic error:
/// `‖[R_rec|t_rec] − [R_gt|t_gt]‖_F / ‖[R_gt|t_gt]‖_F × 100` (percent).
pub fn extrinsic_error(recovered: &Extrinsics, ground_truth: &Extrinsics) -> f64 {
    let diff = recovered.matrix3x4() - ground_truth.matrix3x4();
    100.0 * diff.norm() / ground_truth.matrix3x4().norm()
}

/// All three pose-error metrics in one report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseErrors {
    pub rotation_deg: f64,
    pub translation_m: f64,
    pub extrinsic_percent: f64,
}

/// Scores a recovered pose against ground truth.
pub fn pose_errors(recovered: &Extrinsics, ground_truth: &Extrinsics) -> PoseErrors {
    PoseErrors {
        rotation_deg: rotation_error_deg(recovered, ground_truth),
        translation_m: translation_error_m(recovered, ground_truth),
        extrinsic_percent: extrinsic_error(recovered, ground_truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::camera::CameraModel;
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_camera() -> CameraModel {
        CameraModel {
            intrinsics: Intrinsics {
                fx: 500.0,
                fy: 480.0,
                cx: 320.0,
                cy: 240.0,
            },
            extrinsics: Extrinsics::look_at(Point3::new(-7.0, -12.0, 2.8), Point3::origin())
                .unwrap(),
            image_width_px: 640,
            image_height_px: 480,
        }
    }

    fn exact_correspondences(cam: &CameraModel, points: &[(f64, f64)]) -> Vec<Correspondence> {
        points
            .iter()
            .map(|&(x, y)| {
                let w = Point2::new(x, y);
                Correspondence {
                    image_point: cam.project_ground(&w).unwrap(),
                    world_point: w,
                    match_distance: 0.0,
                }
            })
            .collect()
    }

    fn assert_proportional(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) {
        let an = a / a.norm();
        let bn = b / b.norm();
        let d_plus = (an - bn).norm();
        let d_minus = (an + bn).norm();
        assert!(
            d_plus.min(d_minus) < tol,
            "matrices not proportional: Δ+ {d_plus}, Δ− {d_minus}"
        );
    }

    #[test]
    fn four_exact_points_recover_ground_matrix() {
        let cam = test_camera();
        let corr =
            exact_correspondences(&cam, &[(0.0, 0.0), (3.0, -2.0), (-4.0, 5.0), (2.0, 8.0)]);
        let h = estimate_homography(&corr).unwrap();
        assert_proportional(&h, &cam.ground_matrix(), 1e-9);
        assert!((h.norm() - 1.0).abs() < 1e-12);
        assert!(h[(2, 2)] >= 0.0);
    }

    /// Identity pose: the ground matrix is K (columns e1, e2, t=0 → wait,
    /// t = 0 makes P_0 singular, so use a unit offset along z instead).
    #[test]
    fn canonical_camera_unit_square_gives_k() {
        // Camera 1 m above the plane looking straight along +z? A ground
        // camera cannot look straight down (degenerate look-at), so build
        // the pose directly: R = [x→x, y→y, z→z] with the plane z=0 mapped
        // by columns (e1, e2, t) where t = (0,0,1): P_0 = K·[e1 e2 (0,0,1)].
        let k = Intrinsics {
            fx: 2.0,
            fy: 3.0,
            cx: 10.0,
            cy: 20.0,
        };
        let cam = CameraModel {
            intrinsics: k,
            extrinsics: Extrinsics::new(
                Matrix3::identity(),
                Vector3::new(0.0, 0.0, 1.0),
            )
            .unwrap(),
            image_width_px: 100,
            image_height_px: 100,
        };
        let corr = exact_correspondences(
            &cam,
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.3, 0.7)],
        );
        let h = estimate_homography(&corr).unwrap();
        // P_0 = K·[e1 e2 e3] = K exactly.
        assert_proportional(&h, &k.matrix(), 1e-9);
    }

    #[test]
    fn too_few_or_collinear_points_fail() {
        let cam = test_camera();
        let corr = exact_correspondences(&cam, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert!(matches!(
            estimate_homography(&corr),
            Err(CalibError::NotEnoughCorrespondences { got: 3, need: 4 })
        ));
        // Four points, but all on one world line: degenerate.
        let corr =
            exact_correspondences(&cam, &[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert!(matches!(
            estimate_homography(&corr),
            Err(CalibError::RankDeficient)
        ));
    }

    /// Zero-mean 1 px noise on 20 training points: reprojection RMS on
    /// held-out exact points must stay ≤ 2 px.
    #[test]
    fn pixel_noise_keeps_heldout_rms_bounded() {
        let cam = test_camera();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let train: Vec<(f64, f64)> = (0..20)
            .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-14.0..14.0)))
            .collect();
        let held: Vec<(f64, f64)> = (0..50)
            .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-14.0..14.0)))
            .collect();
        let noisy: Vec<Correspondence> = exact_correspondences(&cam, &train)
            .into_iter()
            .map(|mut c| {
                c.image_point.x += rng.gen_range(-1.0..1.0) * 1.732; // ±√3 → σ≈1
                c.image_point.y += rng.gen_range(-1.0..1.0) * 1.732;
                c
            })
            .collect();
        let h = estimate_homography(&noisy).unwrap();
        let mut sq = 0.0;
        for &(x, y) in &held {
            let v = h * Vector3::new(x, y, 1.0);
            let mapped = Point2::new(v.x / v.z, v.y / v.z);
            let truth = cam.project_ground(&Point2::new(x, y)).unwrap();
            sq += (mapped - truth).norm_squared();
        }
        let rms = (sq / held.len() as f64).sqrt();
        assert!(rms <= 2.0, "held-out reprojection RMS {rms} px");
    }

    /// Similarity equivariance: mapping all world points through a known
    /// similarity S must turn the estimate H into H·S⁻¹ (up to scale).
    #[test]
    fn world_similarity_equivariance() {
        let cam = test_camera();
        let pts = [(0.0, 0.0), (3.0, -2.0), (-4.0, 5.0), (2.0, 8.0), (-1.0, -6.0)];
        let corr = exact_correspondences(&cam, &pts);
        let h = estimate_homography(&corr).unwrap();

        // S: rotate by 30°, scale 1.7, translate (2, −3).
        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let sim = Matrix3::new(
            1.7 * c, -1.7 * s, 2.0, //
            1.7 * s, 1.7 * c, -3.0, //
            0.0, 0.0, 1.0,
        );
        let transformed: Vec<Correspondence> = corr
            .iter()
            .map(|cr| {
                let w = sim * Vector3::new(cr.world_point.x, cr.world_point.y, 1.0);
                Correspondence {
                    world_point: Point2::new(w.x / w.z, w.y / w.z),
                    ..*cr
                }
            })
            .collect();
        let h2 = estimate_homography(&transformed).unwrap();
        let expected = h * sim.try_inverse().unwrap();
        assert_proportional(&h2, &expected, 1e-8);
    }

    #[test]
    fn recover_from_exact_homography_matches_truth() {
        let cam = test_camera();
        let h = cam.ground_matrix();
        let h = h / h.norm() * h[(2, 2)].signum(); // mimic estimator output
        let rec = recover_extrinsics(&h, &cam.intrinsics).unwrap();
        assert!((rec.rotation - cam.extrinsics.rotation).norm() < 1e-8);
        assert!((rec.translation - cam.extrinsics.translation).norm() < 1e-8);
    }

    #[test]
    fn end_to_end_exact_recovery_under_1e8() {
        let cam = test_camera();
        let corr = exact_correspondences(
            &cam,
            &[(0.0, 0.0), (3.0, -2.0), (-4.0, 5.0), (2.0, 8.0), (1.0, -9.0)],
        );
        let h = estimate_homography(&corr).unwrap();
        let rec = recover_extrinsics(&h, &cam.intrinsics).unwrap();
        let err = pose_errors(&rec, &cam.extrinsics);
        assert!(err.rotation_deg < 1e-7, "rotation {}", err.rotation_deg);
        assert!(err.translation_m < 1e-7, "translation {}", err.translation_m);
        assert!(err.extrinsic_percent < 1e-6);
    }

    /// The recovered pose must satisfy the rotation invariants whatever
    /// noise went in (here: heavy jitter straight on H's entries).
    #[test]
    fn recovery_always_yields_proper_rotation() {
        let cam = test_camera();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut h = cam.ground_matrix();
            for r in 0..3 {
                for c in 0..3 {
                    h[(r, c)] *= 1.0 + rng.gen_range(-0.05..0.05);
                }
            }
            let rec = recover_extrinsics(&h, &cam.intrinsics).unwrap();
            let gram = rec.rotation.transpose() * rec.rotation;
            assert!((gram - Matrix3::identity()).norm() < 1e-9);
            assert!((rec.rotation.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn error_metrics_closed_forms() {
        let gt = Extrinsics::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(extrinsic_error(&gt, &gt), 0.0);
        assert_eq!(rotation_error_deg(&gt, &gt), 0.0);
        assert_eq!(translation_error_m(&gt, &gt), 0.0);

        // t_rec = 2·t_gt with R = I: ‖Δ‖_F = 1, ‖gt‖_F = ‖[I|t]‖_F = 2.
        let rec = Extrinsics::new(Matrix3::identity(), Vector3::new(2.0, 0.0, 0.0)).unwrap();
        assert!((extrinsic_error(&rec, &gt) - 50.0).abs() < 1e-12);
        assert!((translation_error_m(&rec, &gt) - 1.0).abs() < 1e-12);

        // 90° about z: geodesic angle is 90°.
        let r90 = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let rot = Extrinsics::new(r90, Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((rotation_error_deg(&rot, &gt) - 90.0).abs() < 1e-9);
    }

    /// Random pose pairs: extrinsic_error must equal an element-wise
    /// recomputation done inline.
    #[test]
    fn extrinsic_error_matches_elementwise_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng| {
                let pos = Point3::new(
                    rng.gen_range(-8.0..8.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(1.5..4.0),
                );
                let tgt = Point3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-6.0..6.0), 0.0);
                Extrinsics::look_at(pos, tgt).unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let got = extrinsic_error(&a, &b);

            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    num += (a.rotation[(r, c)] - b.rotation[(r, c)]).powi(2);
                    den += b.rotation[(r, c)].powi(2);
                }
                num += (a.translation[r] - b.translation[r]).powi(2);
                den += b.translation[r].powi(2);
            }
            let expected = 100.0 * (num / den).sqrt();
            assert!(((got - expected) / expected).abs() < 1e-12);
        }
    }
}
