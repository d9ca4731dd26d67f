//! Pinhole camera geometry over a ground plane.
//!
//! World coordinates are right-handed with `z` up and the ground at
//! `z = 0`. A camera maps a world point `X` to a pixel through
//!
//! ```text
//! K = [fx 0 cx; 0 fy cy; 0 0 1]       (intrinsics)
//! P = K · [R | t]                     (full projection, 3×4)
//! p_img ∝ P · [X; 1]                  (normalize by the third coordinate)
//! ```
//!
//! For points on the ground plane the third column of `P` multiplies
//! `z = 0` and drops out, leaving the invertible 3×3 ground matrix
//! `P_0 = K · [r1 r2 t]` with `p_img ∝ P_0 · [x, y, 1]ᵀ`. Inverting `P_0`
//! maps an observed pixel of a ground point back to world coordinates,
//! which is how a correctly-calibrated reference camera supplies world
//! anchors to a camera being re-calibrated.

use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, Vector3};

use super::CalibError;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Validates `fx, fy > 0`.
    pub fn validate(&self) -> Result<(), CalibError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CalibError::InvalidIntrinsics {
                fx: self.fx,
                fy: self.fy,
            });
        }
        Ok(())
    }

    /// The 3×3 matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }
}

/// Rigid camera pose: `X_cam = R · X_world + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Tolerance on `‖RᵀR − I‖` and `|det R − 1|` for a valid rotation.
const ROTATION_TOL: f64 = 1e-9;

impl Extrinsics {
    /// Builds a pose, enforcing that `rotation` is a proper rotation
    /// (orthonormal, determinant +1) within `1e-9`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CalibError> {
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).norm();
        let det_err = (rotation.determinant() - 1.0).abs();
        if ortho_err > ROTATION_TOL || det_err > ROTATION_TOL {
            return Err(CalibError::InvalidRotation { ortho_err, det_err });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Pose of a camera at `position` aimed at `target`, with the world
    /// `z` axis as "up" and image rows running away from the sky.
    ///
    /// Fails when the viewing direction is (anti)parallel to the up axis,
    /// where the image orientation is undefined.
    pub fn look_at(position: Point3<f64>, target: Point3<f64>) -> Result<Self, CalibError> {
        let up = Vector3::z();
        let z_c = (target - position)
            .try_normalize(1e-12)
            .ok_or(CalibError::DegenerateLookAt)?;
        let x_c = z_c
            .cross(&up)
            .try_normalize(1e-9)
            .ok_or(CalibError::DegenerateLookAt)?;
        let y_c = z_c.cross(&x_c);
        let rotation = Matrix3::from_rows(&[x_c.transpose(), y_c.transpose(), z_c.transpose()]);
        let translation = -rotation * position.coords;
        Self::new(rotation, translation)
    }

    /// The 3×4 matrix `[R | t]`.
    pub fn matrix3x4(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Camera center in world coordinates, `C = −Rᵀ t`.
    pub fn camera_center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }
}

/// A full camera: intrinsics, pose and sensor size.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
    pub image_width_px: u32,
    pub image_height_px: u32,
}

impl CameraModel {
    /// The full 3×4 projection `P = K · [R | t]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        self.intrinsics.matrix() * self.extrinsics.matrix3x4()
    }

    /// The 3×3 ground-plane matrix `P_0` (the full `P` with its third
    /// column removed).
    pub fn ground_matrix(&self) -> Matrix3<f64> {
        let p = self.projection_matrix();
        Matrix3::from_columns(&[
            p.column(0).into_owned(),
            p.column(1).into_owned(),
            p.column(3).into_owned(),
        ])
    }

    /// Depth (camera-frame `z`) of a world point.
    pub fn depth_of(&self, world: &Point3<f64>) -> f64 {
        (self.extrinsics.rotation * world.coords + self.extrinsics.translation).z
    }

    /// Projects a 3-D world point to pixel coordinates.
    pub fn project(&self, world: &Point3<f64>) -> Result<Point2<f64>, CalibError> {
        let cam = self.extrinsics.rotation * world.coords + self.extrinsics.translation;
        if !(cam.z > 0.0) {
            return Err(CalibError::BehindCamera { depth: cam.z });
        }
        let k = &self.intrinsics;
        Ok(Point2::new(
            k.fx * cam.x / cam.z + k.cx,
            k.fy * cam.y / cam.z + k.cy,
        ))
    }

    /// Projects a ground-plane point `(x, y, 0)` through `P_0`.
    pub fn project_ground(&self, ground: &Point2<f64>) -> Result<Point2<f64>, CalibError> {
        let h = self.ground_matrix() * Vector3::new(ground.x, ground.y, 1.0);
        if !(h.z > 0.0) {
            return Err(CalibError::BehindCamera { depth: h.z });
        }
        Ok(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// Maps an observed pixel of a ground-plane point back to world
    /// coordinates via `P_0⁻¹`.
    pub fn ground_from_image(&self, pixel: &Point2<f64>) -> Result<Point2<f64>, CalibError> {
        let p0 = self.ground_matrix();
        let inv = p0.try_inverse().ok_or(CalibError::DegenerateCamera)?;
        let h = inv * Vector3::new(pixel.x, pixel.y, 1.0);
        if h.z.abs() < 1e-12 * h.norm() {
            // Pixel on the horizon line: the back-projected ray never
            // meets the ground plane.
            return Err(CalibError::DegenerateCamera);
        }
        Ok(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// True when a ground point lies in front of the camera and inside
    /// the image bounds.
    pub fn sees_ground_point(&self, ground: &Point2<f64>) -> bool {
        match self.project_ground(ground) {
            Ok(p) => {
                p.x >= 0.0
                    && p.x < self.image_width_px as f64
                    && p.y >= 0.0
                    && p.y < self.image_height_px as f64
            }
            Err(_) => false,
        }
    }
}

/// Builds a perimeter fleet of `n` cameras around a `width_m × length_m`
/// arena centered on the world origin.
///
/// Cameras sit on an ellipse `setback_m` outside the arena bounds at
/// `height_m` above ground and aim at a point a fraction
/// `look_at_fraction` of the way from the arena center back toward the
/// camera, so larger fractions trade cross-arena coverage for near-field
/// detail. All cameras share the given intrinsics and sensor size.
#[allow(clippy::too_many_arguments)]
pub fn ring_fleet(
    n: usize,
    width_m: f64,
    length_m: f64,
    setback_m: f64,
    height_m: f64,
    look_at_fraction: f64,
    intrinsics: Intrinsics,
    image_width_px: u32,
    image_height_px: u32,
) -> Result<Vec<CameraModel>, CalibError> {
    intrinsics.validate()?;
    let a = width_m / 2.0 + setback_m;
    let b = length_m / 2.0 + setback_m;
    (0..n)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let position = Point3::new(a * theta.cos(), b * theta.sin(), height_m);
            let target = Point3::new(
                look_at_fraction * position.x,
                look_at_fraction * position.y,
                0.0,
            );
            Ok(CameraModel {
                intrinsics,
                extrinsics: Extrinsics::look_at(position, target)?,
                image_width_px,
                image_height_px,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_camera() -> CameraModel {
        CameraModel {
            intrinsics: Intrinsics {
                fx: 1.0,
                fy: 1.0,
                cx: 0.0,
                cy: 0.0,
            },
            extrinsics: Extrinsics::new(Matrix3::identity(), Vector3::zeros()).unwrap(),
            image_width_px: 640,
            image_height_px: 480,
        }
    }

    #[test]
    fn identity_camera_projects_optical_axis_to_origin() {
        let cam = canonical_camera();
        let p = cam.project(&Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(p.x.abs() < 1e-15 && p.y.abs() < 1e-15);
    }

    #[test]
    fn principal_point_offsets_linearly() {
        let mut cam = canonical_camera();
        cam.intrinsics.cx = 320.0;
        cam.intrinsics.cy = 240.0;
        let p = cam.project(&Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((p.x - 320.0).abs() < 1e-12);
        assert!((p.y - 240.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let cam = canonical_camera();
        assert!(matches!(
            cam.project(&Point3::new(0.0, 0.0, -1.0)),
            Err(CalibError::BehindCamera { .. })
        ));
    }

    fn tilted_camera() -> CameraModel {
        CameraModel {
            intrinsics: Intrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
            },
            extrinsics: Extrinsics::look_at(Point3::new(-7.0, -12.0, 2.8), Point3::origin())
                .unwrap(),
            image_width_px: 640,
            image_height_px: 480,
        }
    }

    #[test]
    fn look_at_produces_valid_rotation_with_positive_ground_depth() {
        let cam = tilted_camera();
        let e = &cam.extrinsics;
        assert!((e.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(((e.rotation.transpose() * e.rotation) - Matrix3::identity()).norm() < 1e-12);
        // The camera sits where we put it...
        assert!((e.camera_center() - Point3::new(-7.0, -12.0, 2.8).coords)
            .coords
            .norm()
            .abs()
            < 1e-9);
        // ...and the arena center has positive depth.
        assert!(cam.depth_of(&Point3::origin()) > 0.0);
    }

    #[test]
    fn straight_down_look_at_is_degenerate() {
        let r = Extrinsics::look_at(Point3::new(0.0, 0.0, 3.0), Point3::origin());
        assert!(matches!(r, Err(CalibError::DegenerateLookAt)));
    }

    #[test]
    fn ground_projection_matches_full_projection() {
        let cam = tilted_camera();
        for &(x, y) in &[(0.0, 0.0), (2.0, -5.0), (-4.5, 10.0)] {
            let full = cam.project(&Point3::new(x, y, 0.0)).unwrap();
            let ground = cam.project_ground(&Point2::new(x, y)).unwrap();
            assert!((full - ground).norm() < 1e-10);
        }
    }

    /// Project then invert through `P_0⁻¹`: must return the original
    /// ground point to 1e-9 m on a spread of poses and points.
    #[test]
    fn ground_round_trip_many_poses() {
        let positions = [
            Point3::new(-7.0, -12.0, 2.8),
            Point3::new(7.5, 0.0, 2.2),
            Point3::new(3.0, 19.0, 3.5),
            Point3::new(-6.0, 14.0, 2.5),
        ];
        let targets = [
            Point3::origin(),
            Point3::new(1.0, -3.0, 0.0),
            Point3::new(-2.0, 4.0, 0.0),
        ];
        for pos in positions {
            for tgt in targets {
                let cam = CameraModel {
                    extrinsics: Extrinsics::look_at(pos, tgt).unwrap(),
                    ..tilted_camera()
                };
                for &(x, y) in &[(0.0, 0.0), (1.5, 2.5), (-3.0, -8.0), (4.0, 9.0)] {
                    let ground = Point2::new(x, y);
                    if cam.depth_of(&Point3::new(x, y, 0.0)) <= 0.1 {
                        continue;
                    }
                    let pixel = cam.project_ground(&ground).unwrap();
                    let back = cam.ground_from_image(&pixel).unwrap();
                    assert!(
                        (back - ground).norm() < 1e-9,
                        "round trip failed for pose {pos:?} point ({x},{y})"
                    );
                }
            }
        }
    }

    #[test]
    fn ground_matrix_is_projection_without_third_column() {
        let cam = tilted_camera();
        let p = cam.projection_matrix();
        let p0 = cam.ground_matrix();
        for r in 0..3 {
            assert_eq!(p0[(r, 0)], p[(r, 0)]);
            assert_eq!(p0[(r, 1)], p[(r, 1)]);
            assert_eq!(p0[(r, 2)], p[(r, 3)]);
        }
    }

    #[test]
    fn ring_fleet_covers_arena_with_overlap() {
        let fleet = ring_fleet(
            7,
            12.0,
            36.0,
            1.5,
            2.8,
            0.25,
            Intrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
            },
            640,
            480,
        )
        .unwrap();
        assert_eq!(fleet.len(), 7);
        // Sample the arena on a coarse grid; every point must be seen by
        // at least one camera, and the per-camera coverage fractions must
        // differ (distinct fields of view).
        let mut covered = 0usize;
        let mut total = 0usize;
        let mut per_cam = vec![0usize; fleet.len()];
        let mut steps = 0usize;
        for i in 0..24 {
            for j in 0..72 {
                let x = -6.0 + 12.0 * (i as f64 + 0.5) / 24.0;
                let y = -18.0 + 36.0 * (j as f64 + 0.5) / 72.0;
                let g = Point2::new(x, y);
                total += 1;
                let seen = fleet.iter().filter(|c| c.sees_ground_point(&g)).count();
                if seen > 0 {
                    covered += 1;
                }
                for (k, c) in fleet.iter().enumerate() {
                    if c.sees_ground_point(&g) {
                        per_cam[k] += 1;
                    }
                }
                steps += seen;
            }
        }
        assert_eq!(covered, total, "union of views must cover the arena");
        let mean_overlap = steps as f64 / total as f64;
        assert!(mean_overlap >= 2.0, "want overlapping views, got {mean_overlap}");
        for (k, &c) in per_cam.iter().enumerate() {
            assert!(c > 0, "camera {k} sees nothing");
        }
    }

    #[test]
    fn invalid_rotation_is_rejected() {
        let not_rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            Extrinsics::new(not_rotation, Vector3::zeros()),
            Err(CalibError::InvalidRotation { .. })
        ));
        let reflection = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Extrinsics::new(reflection, Vector3::zeros()).is_err());
    }
}
