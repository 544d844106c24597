use bbcalib::geometry::UnitQuaternion;
use bbcalib::metrics::{average_quaternion, average_quaternion_vectors};
use nalgebra::Vector3;

fn main() -> bbcalib::Result<()> {
    let center = UnitQuaternion::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5).normalize(), 0.8);
    let qs: Vec<UnitQuaternion> = [0.05, -0.03, 0.02, -0.04, 0.01]
        .iter()
        .map(|&a| center * UnitQuaternion::from_scaled_axis(&Vector3::new(a, -a, 0.5 * a)))
        .collect();

    let avg = average_quaternion(&qs)?;
    println!("average      {avg}");
    println!("off center   {:.5} rad", (center.inverse() * avg).angle());

    // q and -q are the same rotation
    let mixed: Vec<_> = qs.iter().enumerate().map(|(i, q)| if i % 2 == 0 { -q.to_vector() } else { q.to_vector() }).collect();
    println!("sign-flipped {}", average_quaternion_vectors(&mixed)?);
    Ok(())
}
