//! Expressing the end effector in an object's frame.
//!
//! The same relative configuration is recovered no matter where the pair sits
//! in the world, which is what lets a learned interaction travel with the
//! object.
//!
//! ```bash
//! cargo run --example object_frame
//! ```

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use ocgp::geometry::{express_in_object_frame, quat_to_rotation, rotation_to_quat, Pose, Quaternion};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A bottle at (0.4, 0.2), turned a quarter turn; the gripper 5 cm to its +x.
    let bottle = Pose::new([0.4, 0.2, 0.0], Quaternion::from_yaw(FRAC_PI_2));
    let gripper = Pose::from_translation(0.45, 0.2, 0.04);
    let rel = express_in_object_frame(&gripper, &bottle)?;
    println!("gripper in bottle frame: {:.3?}", rel.position);
    println!("relative orientation:    {:.3?}", rel.orientation.0);

    // Slide and spin the whole scene; the relative pose does not change.
    let motion = Pose::new([-1.0, 2.5, 0.3], Quaternion::from_axis_angle(Vector3::new(0.2, -0.4, 1.0), 1.1)).to_transform()?;
    let moved = express_in_object_frame(&motion.apply_to_pose(&gripper)?, &motion.apply_to_pose(&bottle)?)?;
    println!("after a common motion:   {:.3?}", moved.position);
    println!(
        "position drift {:.1e}, rotation drift {:.1e}",
        (Vector3::from(rel.position) - Vector3::from(moved.position)).norm(),
        rel.orientation.distance_up_to_sign(&moved.orientation)
    );

    // Quaternion <-> matrix round trip.
    let q = Quaternion::from_axis_angle(Vector3::new(1.0, 1.0, 0.0), 2.0);
    let back = rotation_to_quat(&quat_to_rotation(&q)?)?;
    println!("round trip error {:.1e}", q.distance_up_to_sign(&back));
    Ok(())
}
