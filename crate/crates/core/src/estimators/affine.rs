use nalgebra::{DMatrix, Matrix3x4, Matrix4};

use super::{check_count, degenerate, similarity_normalization, ModelClass, PointCorrespondence, Transform, MAX_CONDITION};
use crate::error::Result;
use crate::geometry::HomogeneousMatrix;
use crate::linalg;

/// 12-parameter least-squares fit `p ≈ A q + t`.
///
/// Tracker points are similarity-normalized before building the `n × 4`
/// design matrix `[q' 1]`; its condition number doubles as the coplanarity
/// check. For this model the algebraic and geometric errors coincide.
pub fn estimate_affine(cs: &[PointCorrespondence]) -> Result<Transform> {
    let model = ModelClass::Affine;
    check_count(cs, model)?;
    let norm_q = similarity_normalization(cs.iter().map(|c| c.q))
        .ok_or_else(|| degenerate(model, "tracker points coincide"))?;

    let n = cs.len();
    let mut design = DMatrix::<f64>::zeros(n, 4);
    let mut rhs = DMatrix::<f64>::zeros(n, 3);
    for (i, c) in cs.iter().enumerate() {
        let qn = norm_q * c.q.to_homogeneous();
        design.row_mut(i).copy_from(&qn.transpose());
        for k in 0..3 {
            rhs[(i, k)] = c.p[k];
        }
    }

    let svd = linalg::svd(&design)?;
    let cond = svd.condition();
    if cond >= MAX_CONDITION {
        return Err(degenerate(model, format!("tracker points are coplanar (condition {cond:.3e})")));
    }
    let sol = svd.solve(&rhs);

    // sol is 4×3; rows of the affine block are its columns.
    let block = Matrix3x4::from_fn(|r, c| sol[(c, r)]);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 4>(0, 0).copy_from(&(block * norm_q));
    m[(3, 0)] = 0.0;
    m[(3, 1)] = 0.0;
    m[(3, 2)] = 0.0;
    m[(3, 3)] = 1.0;
    Transform::new(HomogeneousMatrix(m), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::estimators::estimate_isometric;
    use crate::estimators::testdata::*;
    use crate::geometry::Point3;
    use proptest::prelude::*;
    use rand::Rng;

    fn max_abs(m: &Matrix4<f64>) -> f64 {
        m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn sse(t: &Transform, cs: &[PointCorrespondence]) -> f64 {
        cs.iter().map(|c| (t.apply(&c.q).unwrap() - c.p).norm_squared()).sum()
    }

    #[test]
    fn identity_and_scale() {
        let mut r = rng(5);
        let qs = random_points(&mut r, 10);
        let t = estimate_affine(&correspondences(&HomogeneousMatrix::identity(), &qs)).unwrap();
        assert!(max_abs(&(t.matrix().0 - Matrix4::identity())) <= 1e-10);
        let s = HomogeneousMatrix::from_scale(2.0);
        let t = estimate_affine(&correspondences(&s, &qs)).unwrap();
        assert!(max_abs(&(t.matrix().0 - s.0)) <= 1e-10);
    }

    #[test]
    fn recovers_random_shear() {
        for seed in 0..20 {
            let mut r = rng(100 + seed);
            let a = random_affine(&mut r);
            let qs = random_points(&mut r, 12);
            let t = estimate_affine(&correspondences(&a, &qs)).unwrap();
            assert!(max_abs(&(t.matrix().0 - a.0)) <= 1e-9, "seed {seed}");
            assert!(t.matrix().has_affine_last_row());
        }
    }

    #[test]
    fn coplanar_is_degenerate() {
        let cs: Vec<_> = (0..6)
            .map(|i| {
                let q = Point3::new(i as f64 * 10.0, (i * i) as f64, 400.0);
                PointCorrespondence::new(q, q)
            })
            .collect();
        assert!(matches!(estimate_affine(&cs), Err(Error::DegenerateConfiguration { .. })));
        assert!(matches!(estimate_affine(&cs[..3]), Err(Error::TooFewPoints { .. })));
    }

    proptest! {
        #[test]
        fn least_squares_nests_isometric(seed in any::<u64>()) {
            let mut r = rng(seed);
            let t = random_rigid(&mut r).to_homogeneous();
            let qs = random_points(&mut r, 15);
            let mut cs = correspondences(&t, &qs);
            for c in cs.iter_mut() {
                c.p.y += r.random_range(-3.0..3.0);
                c.p.z += r.random_range(-6.0..6.0);
            }
            let aff = estimate_affine(&cs).unwrap();
            let iso = estimate_isometric(&cs).unwrap();
            prop_assert!(sse(&aff, &cs) <= sse(&iso, &cs) + 1e-9);
        }

        #[test]
        fn equivariant_under_rigid_pre_motion(seed in any::<u64>()) {
            let mut r = rng(seed);
            let a = random_affine(&mut r);
            let g = random_rigid(&mut r);
            let qs = random_points(&mut r, 12);
            let mut cs = correspondences(&a, &qs);
            for c in cs.iter_mut() {
                c.p.x += r.random_range(-2.0..2.0);
            }
            let base = estimate_affine(&cs).unwrap();
            let moved: Vec<_> = cs.iter().map(|c| PointCorrespondence::new(g.transform_point(&c.q), c.p)).collect();
            let est = estimate_affine(&moved).unwrap();
            let expected = base.matrix().compose(&g.inverse().to_homogeneous());
            let d = max_abs(&(est.matrix().0 - expected.0));
            prop_assert!(d <= 1e-8, "deviation {d:e}");
        }
    }
}
