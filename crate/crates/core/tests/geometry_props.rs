mod common;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use ocgp::geometry::{
    express_in_object_frame, orthonormality_error, quat_to_rotation, rotation_to_quat, Pose, Quaternion, RigidTransform,
};

fn unit_quaternion() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("not too short", |v| v.iter().map(|c| c * c).sum::<f64>() > 0.01)
        .prop_map(|v| {
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            Quaternion::new(v[0] / n, v[1] / n, v[2] / n, v[3] / n)
        })
}

fn pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-2.0f64..2.0), unit_quaternion()).prop_map(|(p, q)| Pose::new(p, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rotation_roundtrip_recovers_quaternion_up_to_sign(q in unit_quaternion()) {
        let r = quat_to_rotation(&q).unwrap();
        let back = rotation_to_quat(&r).unwrap();
        prop_assert!(back.distance_up_to_sign(&q) < 1e-9);
        prop_assert!(back.0[3] >= 0.0);
    }

    #[test]
    fn rotation_matrix_is_orthonormal(q in unit_quaternion()) {
        let r = quat_to_rotation(&q).unwrap();
        prop_assert!(orthonormality_error(&r) < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_agrees_with_nalgebra(q in unit_quaternion()) {
        let [x, y, z, w] = q.0;
        let reference = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        let r = quat_to_rotation(&q).unwrap();
        prop_assert!((r - reference.to_rotation_matrix().into_inner()).amax() < 1e-12);
    }

    #[test]
    fn relative_pose_ignores_common_rigid_motion(robot in pose(), object in pose(), motion in pose()) {
        let m = motion.to_transform().unwrap();
        let before = express_in_object_frame(&robot, &object).unwrap();
        let after = express_in_object_frame(&m.apply_to_pose(&robot).unwrap(), &m.apply_to_pose(&object).unwrap()).unwrap();
        prop_assert!(common::translation_error(&before, &after) < 1e-9);
        prop_assert!(before.orientation.distance_up_to_sign(&after.orientation) < 1e-9);
    }

    #[test]
    fn inverse_composes_to_identity(p in pose()) {
        let t = p.to_transform().unwrap();
        let id = t.compose(&t.inverse());
        prop_assert!((id.rotation - Matrix3::identity()).amax() < 1e-12);
        prop_assert!(id.translation.amax() < 1e-12);
    }

    #[test]
    fn object_frame_maps_object_to_origin(p in pose()) {
        let rel = express_in_object_frame(&p, &p).unwrap();
        prop_assert!(Vector3::from(rel.position).amax() < 1e-12);
        prop_assert!(rel.orientation.distance_up_to_sign(&Quaternion::IDENTITY) < 1e-9);
    }

    #[test]
    fn non_unit_quaternions_are_rejected(q in unit_quaternion(), scale in 1.01f64..3.0) {
        let [x, y, z, w] = q.0;
        prop_assert!(quat_to_rotation(&Quaternion::new(x * scale, y * scale, z * scale, w * scale)).is_err());
    }
}

#[test]
fn reflection_is_not_a_rotation() {
    let flip = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
    assert!(rotation_to_quat(&flip).is_err());
    assert!(RigidTransform::new(flip, Vector3::zeros()).to_pose().is_err());
}

#[test]
fn quarter_turn_about_z_rotates_x_into_y() {
    let q = Quaternion::from_yaw(std::f64::consts::FRAC_PI_2);
    let r = quat_to_rotation(&q).unwrap();
    assert!((r * Vector3::x() - Vector3::y()).amax() < 1e-15);
}
