use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{check_count, degenerate, ModelClass, PointCorrespondence, Transform};
use crate::error::Result;
use crate::geometry::HomogeneousMatrix;
use crate::linalg;

/// Relative size the middle singular value of the centered `q` cloud must
/// exceed. The smallest may vanish: three points are always coplanar.
const COLLINEAR_TOL: f64 = 1e-8;

/// Least-squares rigid transform `p ≈ R q + t` (no scale).
///
/// Closed form via the SVD of the cross-covariance of the centered point
/// sets, with the reflection case corrected so that `det R = +1`.
pub fn estimate_isometric(cs: &[PointCorrespondence]) -> Result<Transform> {
    let model = ModelClass::Isometric;
    check_count(cs, model)?;
    let n = cs.len() as f64;
    let q_bar = cs.iter().fold(Vector3::zeros(), |a, c| a + c.q.coords) / n;
    let p_bar = cs.iter().fold(Vector3::zeros(), |a, c| a + c.p.coords) / n;

    let centered_q = DMatrix::from_fn(cs.len(), 3, |i, k| cs[i].q[k] - q_bar[k]);
    let spread = linalg::svd(&centered_q)?.singular_values;
    if !(spread[1] > COLLINEAR_TOL * spread[0]) {
        return Err(degenerate(model, "tracker points are collinear"));
    }

    let h: Matrix3<f64> = cs
        .iter()
        .fold(Matrix3::zeros(), |acc, c| acc + (c.q.coords - q_bar) * (c.p.coords - p_bar).transpose());
    let svd = linalg::svd(&DMatrix::from_column_slice(3, 3, h.as_slice()))?;
    let u = Matrix3::from_column_slice(svd.u.as_slice());
    let mut v = Matrix3::from_column_slice(svd.v.as_slice());
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // Singular values are sorted, so the last column is the weakest.
        v.column_mut(2).neg_mut();
        r = v * u.transpose();
    }
    let t = p_bar - r * q_bar;
    Transform::new(HomogeneousMatrix::from_linear_translation(&r, &t), model)
}
