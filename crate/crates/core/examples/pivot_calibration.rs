//! Pivot calibration of a tracked pointer: rotate the tool about its tip and
//! recover the tip offset and the pivot point.

use bbcalib::estimators::pivot_calibration;
use bbcalib::geometry::{Point3, RigidTransform, UnitQuaternion};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bbcalib::Result<()> {
    let tip = Vector3::new(3.0, -2.0, 120.0);
    let pivot = Vector3::new(40.0, 15.0, 800.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let poses: Vec<RigidTransform> = (0..30)
        .map(|_| {
            let axis = Vector3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.2..0.2));
            let r = UnitQuaternion::from_scaled_axis(&axis);
            let jitter = Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2));
            RigidTransform::new(r, pivot - r.rotate(&tip) + jitter)
        })
        .collect();

    let fit = pivot_calibration(&poses)?;
    println!("tip    {:?}  (true {:?})", fit.tip_offset, Point3::from(tip));
    println!("pivot  {:?}  (true {:?})", fit.pivot_point, Point3::from(pivot));
    println!("rms    {:.3} mm", fit.rms_residual);
    Ok(())
}
