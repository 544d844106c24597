use nalgebra::{DMatrix, Vector3};

use super::MAX_CONDITION;
use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotResult {
    /// Tip position in the marker frame.
    pub tip_offset: Point3,
    /// Stationary pivot in the tracker frame.
    pub pivot_point: Point3,
    /// RMS over poses of `‖R_i tip + t_i − pivot‖`, mm.
    pub rms_residual: f64,
}

/// Least-squares pivot calibration from marker poses `x ↦ R_i x + t_i`
/// recorded while the tool rotates about a fixed tip.
///
/// Solves the stacked system `[R_i | −I] [tip; pivot] = −t_i`.
pub fn pivot_calibration(poses: &[RigidTransform]) -> Result<PivotResult> {
    if poses.len() < 3 {
        return Err(Error::DegenerateMotion(format!("need at least 3 poses, got {}", poses.len())));
    }
    let rows = 3 * poses.len();
    let mut a = DMatrix::<f64>::zeros(rows, 6);
    let mut b = DMatrix::<f64>::zeros(rows, 1);
    for (i, pose) in poses.iter().enumerate() {
        let r = pose.rotation.to_rotation_matrix();
        a.view_mut((3 * i, 0), (3, 3)).copy_from(&r);
        for k in 0..3 {
            a[(3 * i + k, 3 + k)] = -1.0;
            b[(3 * i + k, 0)] = -pose.translation[k];
        }
    }
    let svd = linalg::svd(&a)?;
    let cond = svd.condition();
    if cond >= MAX_CONDITION {
        return Err(Error::DegenerateMotion(format!(
            "rotations do not span two axes (condition {cond:.3e})"
        )));
    }
    let x = svd.solve(&b);
    let tip = Vector3::new(x[0], x[1], x[2]);
    let pivot = Vector3::new(x[3], x[4], x[5]);
    let sq: f64 = poses
        .iter()
        .map(|p| (p.transform_vector(&tip) + p.translation - pivot).norm_squared())
        .sum();
    Ok(PivotResult {
        tip_offset: Point3::from(tip),
        pivot_point: Point3::from(pivot),
        rms_residual: (sq / poses.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::testdata::*;
    use crate::geometry::UnitQuaternion;

    /// Poses whose rotation carries `tip` onto `pivot`.
    fn pivoting(rotations: &[UnitQuaternion], tip: Vector3<f64>, pivot: Vector3<f64>) -> Vec<RigidTransform> {
        rotations
            .iter()
            .map(|r| RigidTransform::new(*r, pivot - r.rotate(&tip)))
            .collect()
    }

    #[test]
    fn fixed_tip_along_z() {
        let rots: Vec<_> = (0..12)
            .map(|i| {
                let a = i as f64 * 0.5;
                UnitQuaternion::from_axis_angle(&Vector3::new(a.cos(), a.sin(), 0.3), 0.4 + 0.03 * i as f64)
            })
            .collect();
        let tip = Vector3::new(0.0, 0.0, 100.0);
        let pivot = Vector3::new(-20.0, 40.0, 900.0);
        let res = pivot_calibration(&pivoting(&rots, tip, pivot)).unwrap();
        assert!((res.tip_offset.coords - tip).norm() <= 1e-9);
        assert!((res.pivot_point.coords - pivot).norm() <= 1e-9);
    }

    #[test]
    fn random_orientations() {
        let mut r = rng(21);
        let rots: Vec<_> = (0..20).map(|_| random_rigid(&mut r).rotation).collect();
        let tip = Vector3::new(1.0, 2.0, 3.0);
        let pivot = Vector3::new(10.0, 20.0, 30.0);
        let res = pivot_calibration(&pivoting(&rots, tip, pivot)).unwrap();
        assert!((res.tip_offset.coords - tip).norm() <= 1e-9);
        assert!((res.pivot_point.coords - pivot).norm() <= 1e-9);
        assert!(res.rms_residual <= 1e-9);
    }

    #[test]
    fn degenerate_motions() {
        let still: Vec<_> = (0..5)
            .map(|i| RigidTransform::from_translation(Vector3::new(i as f64, 0.0, 0.0)))
            .collect();
        assert!(matches!(pivot_calibration(&still), Err(Error::DegenerateMotion(_))));

        let single_axis: Vec<_> = (0..6)
            .map(|i| UnitQuaternion::from_axis_angle(&Vector3::z(), 0.2 * i as f64))
            .collect();
        let poses = pivoting(&single_axis, Vector3::new(5.0, 0.0, 80.0), Vector3::zeros());
        assert!(matches!(pivot_calibration(&poses), Err(Error::DegenerateMotion(_))));
        assert!(matches!(pivot_calibration(&poses[..2]), Err(Error::DegenerateMotion(_))));
    }
}
