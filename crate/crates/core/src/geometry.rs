//! Rigid-body poses and the world → object frame change.
//!
//! Quaternions are stored scalar-last, `[x, y, z, w]`, everywhere in this
//! crate, including the JSON scene files.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accepted deviation of a quaternion norm from 1 before it is rejected.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Accepted deviation from orthonormality for a rotation matrix.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion norm {norm} is not within {UNIT_TOLERANCE} of 1")]
    NonUnitQuaternion { norm: f64 },
    #[error("matrix is not a proper rotation (orthonormality error {ortho_error}, det {det})")]
    NotARotation { ortho_error: f64, det: f64 },
}

/// Orientation quaternion, scalar-last: `[x, y, z, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quaternion(pub [f64; 4]);

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion([0.0, 0.0, 0.0, 1.0]);

    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Quaternion([x, y, z, w])
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        Quaternion([a.x * s, a.y * s, a.z * s, c])
    }

    /// Rotation about the world z axis.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), yaw)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm, rejecting anything that is not already close.
    pub fn normalize(&self) -> Result<Self, GeometryError> {
        let norm = self.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::NonUnitQuaternion { norm });
        }
        let q = self.0;
        Ok(Quaternion([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]))
    }

    pub fn negated(&self) -> Self {
        let q = self.0;
        Quaternion([-q[0], -q[1], -q[2], -q[3]])
    }

    /// Representative of the double cover with a non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.0[3] < 0.0 {
            self.negated()
        } else {
            *self
        }
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Quaternion {
        let [x1, y1, z1, w1] = self.0;
        let [x2, y2, z2, w2] = rhs.0;
        Quaternion([
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        ])
    }

    /// Largest componentwise difference, minimised over the sign of `other`.
    pub fn distance_up_to_sign(&self, other: &Quaternion) -> f64 {
        let direct = self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs());
        let flipped = self.0.iter().zip(other.0.iter()).map(|(a, b)| (a + b).abs());
        direct.fold(0.0, f64::max).min(flipped.fold(0.0, f64::max))
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Position and orientation of a body in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    #[serde(default)]
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(position: [f64; 3], orientation: Quaternion) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Pose::new([0.0; 3], Quaternion::IDENTITY)
    }

    /// Upright pose at `(x, y, z)`.
    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose::new([x, y, z], Quaternion::IDENTITY)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }

    /// The transform mapping body coordinates into world coordinates.
    pub fn to_transform(&self) -> Result<RigidTransform, GeometryError> {
        Ok(RigidTransform {
            rotation: quat_to_rotation(&self.orientation)?,
            translation: self.translation(),
        })
    }
}

/// `x ↦ rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// Closed-form inverse `(Rᵀ, −Rᵀt)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ rhs`: apply `rhs` first.
    pub fn compose(&self, rhs: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Moves a whole pose by this transform.
    pub fn apply_to_pose(&self, pose: &Pose) -> Result<Pose, GeometryError> {
        let moved = self.compose(&pose.to_transform()?);
        moved.to_pose()
    }

    pub fn to_pose(&self) -> Result<Pose, GeometryError> {
        let t = self.translation;
        Ok(Pose::new([t.x, t.y, t.z], rotation_to_quat(&self.rotation)?))
    }

    /// Homogeneous 4×4 form, row-major.
    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Rotation matrix of a (near) unit quaternion `[q0, q1, q2, q3]`, `q3` scalar.
pub fn quat_to_rotation(q: &Quaternion) -> Result<Matrix3<f64>, GeometryError> {
    let [q0, q1, q2, q3] = q.normalize()?.0;
    Ok(Matrix3::new(
        1.0 - 2.0 * q1 * q1 - 2.0 * q2 * q2,
        2.0 * q0 * q1 - 2.0 * q3 * q2,
        2.0 * q0 * q2 + 2.0 * q3 * q1,
        2.0 * q0 * q1 + 2.0 * q3 * q2,
        1.0 - 2.0 * q0 * q0 - 2.0 * q2 * q2,
        2.0 * q1 * q2 - 2.0 * q3 * q0,
        2.0 * q0 * q2 - 2.0 * q1 * q3,
        2.0 * q1 * q2 + 2.0 * q3 * q0,
        1.0 - 2.0 * q0 * q0 - 2.0 * q1 * q1,
    ))
}

/// Largest entry of `|RᵀR − I|`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// Inverse of [`quat_to_rotation`], choosing the representative with `q3 ≥ 0`.
///
/// Branches on the largest of the trace and the diagonal entries so the
/// square root is always taken of a quantity bounded away from zero.
pub fn rotation_to_quat(r: &Matrix3<f64>) -> Result<Quaternion, GeometryError> {
    let ortho_error = orthonormality_error(r);
    let det = r.determinant();
    if !(ortho_error <= ROTATION_TOLERANCE) || (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::NotARotation { ortho_error, det });
    }
    let m = |i: usize, j: usize| r[(i, j)];
    let trace = m(0, 0) + m(1, 1) + m(2, 2);
    let q = if trace >= m(0, 0) && trace >= m(1, 1) && trace >= m(2, 2) {
        let s = 2.0 * (1.0 + trace).sqrt();
        [
            (m(2, 1) - m(1, 2)) / s,
            (m(0, 2) - m(2, 0)) / s,
            (m(1, 0) - m(0, 1)) / s,
            0.25 * s,
        ]
    } else if m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2) {
        let s = 2.0 * (1.0 + m(0, 0) - m(1, 1) - m(2, 2)).sqrt();
        [
            0.25 * s,
            (m(0, 1) + m(1, 0)) / s,
            (m(0, 2) + m(2, 0)) / s,
            (m(2, 1) - m(1, 2)) / s,
        ]
    } else if m(1, 1) >= m(2, 2) {
        let s = 2.0 * (1.0 - m(0, 0) + m(1, 1) - m(2, 2)).sqrt();
        [
            (m(0, 1) + m(1, 0)) / s,
            0.25 * s,
            (m(1, 2) + m(2, 1)) / s,
            (m(0, 2) - m(2, 0)) / s,
        ]
    } else {
        let s = 2.0 * (1.0 - m(0, 0) - m(1, 1) + m(2, 2)).sqrt();
        [
            (m(0, 2) + m(2, 0)) / s,
            (m(1, 2) + m(2, 1)) / s,
            0.25 * s,
            (m(1, 0) - m(0, 1)) / s,
        ]
    };
    let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let q = Quaternion([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]);
    Ok(q.canonical())
}

/// World → object transform: the inverse of the object's body → world pose.
pub fn world_to_object_transform(object_pose: &Pose) -> Result<RigidTransform, GeometryError> {
    Ok(object_pose.to_transform()?.inverse())
}

/// Expresses `robot_pose` in the frame attached to `object_pose`.
pub fn express_in_object_frame(robot_pose: &Pose, object_pose: &Pose) -> Result<Pose, GeometryError> {
    let world_to_object = world_to_object_transform(object_pose)?;
    let relative = world_to_object.compose(&robot_pose.to_transform()?);
    relative.to_pose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn assert_mat_eq(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a[(i, j)], b[(i, j)], epsilon = tol);
            }
        }
    }

    #[test]
    fn identity_quaternion_gives_identity_matrix() {
        let r = quat_to_rotation(&Quaternion::IDENTITY).unwrap();
        assert_mat_eq(&r, &Matrix3::identity(), 0.0);
    }

    #[test]
    fn half_turn_about_x() {
        let r = quat_to_rotation(&Quaternion::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_mat_eq(&r, &Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), 0.0);
        let q = rotation_to_quat(&r).unwrap();
        assert!(q.distance_up_to_sign(&Quaternion::new(1.0, 0.0, 0.0, 0.0)) < 1e-15);
    }

    // Truncated on purpose: the input is only unit to ~1e-8.
    #[allow(clippy::approx_constant)]
    #[test]
    fn quarter_turn_about_z_matches_nalgebra() {
        let q = Quaternion::new(0.0, 0.0, 0.70710678, 0.70710678);
        let r = quat_to_rotation(&q).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_mat_eq(&r, &expected, 1e-8);
        // nalgebra stores (w, i, j, k) and is an independent implementation.
        let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            FRAC_1_SQRT_2,
            0.0,
            0.0,
            FRAC_1_SQRT_2,
        ));
        assert_mat_eq(&r, uq.to_rotation_matrix().matrix(), 1e-8);
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        let err = quat_to_rotation(&Quaternion::new(0.0, 0.0, 0.0, 1.1)).unwrap_err();
        assert!(matches!(err, GeometryError::NonUnitQuaternion { .. }));
        // Small drift is normalised away.
        assert!(quat_to_rotation(&Quaternion::new(0.0, 0.0, 0.0, 1.0 + 5e-7)).is_ok());
    }

    #[test]
    fn rejects_non_rotation() {
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            rotation_to_quat(&reflection),
            Err(GeometryError::NotARotation { .. })
        ));
        let skewed = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(rotation_to_quat(&skewed).is_err());
    }

    #[test]
    fn identity_rotation_to_quat() {
        let q = rotation_to_quat(&Matrix3::identity()).unwrap();
        assert_eq!(q, Quaternion::IDENTITY);
    }

    #[test]
    fn object_transform_examples() {
        let t = world_to_object_transform(&Pose::identity()).unwrap();
        assert_mat_eq(&t.rotation, &Matrix3::identity(), 0.0);
        assert_eq!(t.translation, Vector3::zeros());

        let t = world_to_object_transform(&Pose::from_translation(1.0, 2.0, 0.0)).unwrap();
        assert_mat_eq(&t.rotation, &Matrix3::identity(), 0.0);
        assert_eq!(t.translation, Vector3::new(-1.0, -2.0, 0.0));

        let pose = Pose::new(
            [0.3, -1.2, 0.5],
            Quaternion::from_axis_angle(Vector3::new(1.0, 2.0, -0.5), 0.8),
        );
        let fwd = pose.to_transform().unwrap();
        let id = world_to_object_transform(&pose).unwrap().compose(&fwd);
        assert_mat_eq(&id.rotation, &Matrix3::identity(), 1e-12);
        assert!(id.translation.norm() < 1e-12);
    }

    #[test]
    fn express_in_object_frame_examples() {
        let pose = Pose::new(
            [0.4, 0.1, 0.05],
            Quaternion::from_axis_angle(Vector3::new(0.2, -1.0, 0.3), 1.1),
        );
        let rel = express_in_object_frame(&pose, &pose).unwrap();
        assert!(rel.translation().norm() < 1e-12);
        assert!(rel.orientation.distance_up_to_sign(&Quaternion::IDENTITY) < 1e-12);

        let rel = express_in_object_frame(&pose, &Pose::identity()).unwrap();
        assert_eq!(rel.position, pose.position);
        assert!(rel.orientation.distance_up_to_sign(&pose.orientation) < 1e-12);
    }

    #[test]
    fn planar_relative_position() {
        // Object yawed by 90°: world +x is object −y.
        let object = Pose::new([1.0, 1.0, 0.0], Quaternion::from_yaw(std::f64::consts::FRAC_PI_2));
        let robot = Pose::from_translation(2.0, 1.0, 0.04);
        let rel = express_in_object_frame(&robot, &object).unwrap();
        assert_abs_diff_eq!(rel.position[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rel.position[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rel.position[2], 0.04, epsilon = 1e-12);
    }

    #[test]
    fn hamilton_product_matches_matrix_product() {
        let a = Quaternion::from_axis_angle(Vector3::new(1.0, 0.3, 0.0), 0.7);
        let b = Quaternion::from_axis_angle(Vector3::new(-0.2, 0.0, 1.0), 2.1);
        let lhs = quat_to_rotation(&a.mul(&b)).unwrap();
        let rhs = quat_to_rotation(&a).unwrap() * quat_to_rotation(&b).unwrap();
        assert_mat_eq(&lhs, &rhs, 1e-12);
    }
}
