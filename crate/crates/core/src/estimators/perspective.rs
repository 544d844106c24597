use nalgebra::{DMatrix, Matrix4};

use super::{check_count, degenerate, similarity_normalization, ModelClass, PointCorrespondence, Transform, MAX_CONDITION};
use crate::error::Result;
use crate::geometry::HomogeneousMatrix;
use crate::linalg;

/// 15-DoF projective transform by the normalized direct linear transform.
///
/// Each pair contributes three rows obtained by eliminating the homogeneous
/// scale: with `h = T q̂`, the rows encode `p_k h_4 - h_k = 0` for
/// `k = x, y, z`. Both point sets are similarity-normalized first; the
/// solution is the right singular vector of the smallest singular value,
/// denormalized and scaled to unit Frobenius norm. No geometric refinement.
pub fn estimate_perspective(cs: &[PointCorrespondence]) -> Result<Transform> {
    let model = ModelClass::Perspective;
    check_count(cs, model)?;
    let norm_q = similarity_normalization(cs.iter().map(|c| c.q))
        .ok_or_else(|| degenerate(model, "tracker points coincide"))?;
    let norm_p = similarity_normalization(cs.iter().map(|c| c.p))
        .ok_or_else(|| degenerate(model, "display points coincide"))?;

    let rows = 3 * cs.len();
    let mut a = DMatrix::<f64>::zeros(rows, 16);
    for (i, c) in cs.iter().enumerate() {
        let q = norm_q * c.q.to_homogeneous();
        let p = norm_p * c.p.to_homogeneous();
        for k in 0..3 {
            let r = 3 * i + k;
            for j in 0..4 {
                a[(r, 4 * k + j)] = -q[j];
                a[(r, 12 + j)] = p[k] * q[j];
            }
        }
    }

    let svd = linalg::svd(&a)?;
    let s = &svd.singular_values;
    let (largest, second_smallest) = (s[0], s[14]);
    if !(second_smallest > 0.0) || largest / second_smallest >= MAX_CONDITION {
        return Err(degenerate(
            model,
            format!("solution is not unique (condition {:.3e})", largest / second_smallest),
        ));
    }
    let h = svd.v.column(15);
    let normalized = Matrix4::from_row_iterator(h.iter().copied());

    let denorm_p = norm_p
        .try_inverse()
        .ok_or_else(|| degenerate(model, "display normalization is singular"))?;
    Transform::new(HomogeneousMatrix(denorm_p * normalized * norm_q), model)
}
