//! Reprojection statistics, pose errors and quaternion averaging.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};

use crate::error::{Error, Result};
use crate::estimators::{PointCorrespondence, Transform};
use crate::geometry::{RigidTransform, UnitQuaternion};

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

/// Reprojection error summary in millimeters.
///
/// `mean`/`std` are over per-point Euclidean distances; `per_axis` holds the
/// statistics of absolute per-component residuals for x, y and z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub per_axis: [MeanStd; 3],
    pub n: usize,
}

impl ErrorStats {
    /// Root mean square of the per-point distances.
    pub fn rms(&self) -> f64 {
        (self.mean * self.mean + self.std * self.std).sqrt()
    }
}

/// `‖p_i − T(q_i)‖` for each correspondence.
pub fn residual_norms(t: &Transform, cs: &[PointCorrespondence]) -> Result<Vec<f64>> {
    cs.iter().map(|c| Ok((c.p - t.apply(&c.q)?).norm())).collect()
}

pub fn reprojection_error(t: &Transform, cs: &[PointCorrespondence]) -> Result<ErrorStats> {
    if cs.is_empty() {
        return Err(Error::InvalidConfig("reprojection error of an empty set".into()));
    }
    let mut norms = Vec::with_capacity(cs.len());
    let mut axes: [Vec<f64>; 3] = Default::default();
    for c in cs {
        let r = c.p - t.apply(&c.q)?;
        norms.push(r.norm());
        for (k, axis) in axes.iter_mut().enumerate() {
            axis.push(r[k].abs());
        }
    }
    let overall = MeanStd::of(&norms);
    Ok(ErrorStats {
        mean: overall.mean,
        std: overall.std,
        per_axis: [MeanStd::of(&axes[0]), MeanStd::of(&axes[1]), MeanStd::of(&axes[2])],
        n: cs.len(),
    })
}

/// Eigen-based quaternion mean: the dominant eigenvector of `Σ q qᵀ`.
///
/// The accumulated matrix is unchanged by the sign of any input, so the
/// result is invariant to independent sign flips.
pub fn average_quaternion(qs: &[UnitQuaternion]) -> Result<UnitQuaternion> {
    let vs: Vec<Vector4<f64>> = qs.iter().map(|q| q.to_vector()).collect();
    average_quaternion_vectors(&vs)
}

/// Same as [`average_quaternion`] on raw `(w, x, y, z)` vectors of either sign.
pub fn average_quaternion_vectors(vs: &[Vector4<f64>]) -> Result<UnitQuaternion> {
    if vs.is_empty() {
        return Err(Error::InvalidConfig("average of zero quaternions".into()));
    }
    let m = vs.iter().fold(Matrix4::zeros(), |acc, v| acc + v * v.transpose());
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if (l1 - l2).abs() <= 1e-12 * l1.abs().max(1.0) {
        return Err(Error::AmbiguousAverage(l1, l2));
    }
    let v = eig.eigenvectors.column(order[0]);
    UnitQuaternion::new(v[0], v[1], v[2], v[3]).ok_or(Error::AmbiguousAverage(l1, l2))
}

/// Translation and rotation discrepancy between an achieved and a target pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    /// `‖t_achieved − t_target‖` in mm.
    pub displacement: f64,
    /// `q_target⁻¹ · q_achieved`, canonical hemisphere.
    pub rotation: UnitQuaternion,
}

pub fn pose_error(achieved: &RigidTransform, target: &RigidTransform) -> PoseError {
    PoseError {
        displacement: (achieved.translation - target.translation).norm(),
        rotation: target.rotation.inverse() * achieved.rotation,
    }
}

/// Average rotation error; print it with `{}` for the `(w, x, y, z)` form.
pub fn summarize_rotation_errors(es: &[PoseError]) -> Result<UnitQuaternion> {
    let qs: Vec<_> = es.iter().map(|e| e.rotation).collect();
    average_quaternion(&qs)
}
