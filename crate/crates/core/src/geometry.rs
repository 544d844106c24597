//! Homogeneous transforms, unit quaternions and rigid poses.
//!
//! All lengths are millimeters. Frames are right-handed. A
//! [`HomogeneousMatrix`] maps column vectors: `p̂ = M · q̂`.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Rotation3, Vector3, Vector4, SVD};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Relative guard on the homogeneous coordinate during dehomogenization.
pub const DEHOMOGENIZE_EPS: f64 = 1e-12;

/// 4×4 homogeneous matrix acting on column vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousMatrix(pub Matrix4<f64>);

impl HomogeneousMatrix {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self(Matrix4::new_translation(&Vector3::new(x, y, z)))
    }

    pub fn from_scale(s: f64) -> Self {
        let mut m = Matrix4::identity();
        m[(0, 0)] = s;
        m[(1, 1)] = s;
        m[(2, 2)] = s;
        Self(m)
    }

    /// Row-major construction.
    pub fn from_row_slice(entries: &[f64; 16]) -> Self {
        Self(Matrix4::from_row_slice(entries))
    }

    pub fn to_row_array(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = self.0[(r, c)];
            }
        }
        out
    }

    /// Builds `[linear | translation; 0 0 0 1]`.
    pub fn from_linear_translation(linear: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(linear);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
        Self(m)
    }

    pub fn linear(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// True when the last row is exactly `(0, 0, 0, 1)`.
    pub fn has_affine_last_row(&self) -> bool {
        let m = &self.0;
        m[(3, 0)] == 0.0 && m[(3, 1)] == 0.0 && m[(3, 2)] == 0.0 && m[(3, 3)] == 1.0
    }

    pub fn compose(&self, other: &HomogeneousMatrix) -> HomogeneousMatrix {
        HomogeneousMatrix(self.0 * other.0)
    }

    pub fn try_inverse(&self) -> Option<HomogeneousMatrix> {
        self.0.try_inverse().map(HomogeneousMatrix)
    }

    /// Maps a point and divides by the homogeneous coordinate.
    pub fn apply(&self, p: &Point3) -> Result<Point3> {
        let h = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        let w = h[3];
        if !(w.abs() > DEHOMOGENIZE_EPS * h.norm()) {
            return Err(Error::NearInfinityPoint { w });
        }
        if w == 1.0 {
            return Ok(Point3::new(h[0], h[1], h[2]));
        }
        Ok(Point3::new(h[0] / w, h[1] / w, h[2] / w))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Mul for HomogeneousMatrix {
    type Output = HomogeneousMatrix;
    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

/// Matrix product `a · b`.
pub fn compose(a: &HomogeneousMatrix, b: &HomogeneousMatrix) -> HomogeneousMatrix {
    a.compose(b)
}

pub fn apply(t: &HomogeneousMatrix, p: &Point3) -> Result<Point3> {
    t.apply(p)
}

/// Unit quaternion `(w, x, y, z)` kept in the canonical hemisphere.
///
/// `w > 0`, or `w == 0` and the first nonzero of `x, y, z` is positive.
/// A quaternion whose vector part is exactly zero is stored as `(1, 0, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Normalizes and canonicalizes. `None` for a zero or non-finite input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        if x == 0.0 && y == 0.0 && z == 0.0 {
            return Some(Self::IDENTITY);
        }
        let (mut w, mut x, mut y, mut z) = (w / n, x / n, y / n, z / n);
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            [x, y, z].into_iter().find(|v| *v != 0.0).is_some_and(|v| v < 0.0)
        };
        if flip {
            w = -w;
            x = -x;
            y = -y;
            z = -z;
        }
        Some(Self { w: w + 0.0, x: x + 0.0, y: y + 0.0, z: z + 0.0 })
    }

    pub fn from_array(q: [f64; 4]) -> Option<Self> {
        Self::new(q[0], q[1], q[2], q[3])
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let a = axis / n;
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s).unwrap_or(Self::IDENTITY)
    }

    /// Rotation vector (axis times angle in radians).
    pub fn from_scaled_axis(v: &Vector3<f64>) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn from_rotation_matrix(r: &Matrix3<f64>) -> Self {
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
        Self::new(q.w, q.i, q.j, q.k).unwrap_or(Self::IDENTITY)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z).unwrap_or(Self::IDENTITY)
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn multiply(&self, rhs: &UnitQuaternion) -> UnitQuaternion {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
        .unwrap_or(Self::IDENTITY)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        if *self == Self::IDENTITY {
            return *v;
        }
        self.to_rotation_matrix() * v
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.x.hypot(self.y).hypot(self.z).atan2(self.w.abs())
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: Self) -> Self {
        self.multiply(&rhs)
    }
}

/// Formats as `(w, x, y, z)` truncated to three decimals, so a
/// near-identity rotation reads `(0.999, ...)` rather than `(1.000, ...)`.
impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = |v: f64| {
            let m = ((v.abs() + 1e-9) * 1000.0).floor() / 1000.0;
            if m == 0.0 {
                0.0
            } else {
                m.copysign(v)
            }
        };
        write!(
            f,
            "({:.3}, {:.3}, {:.3}, {:.3})",
            t(self.w),
            t(self.x),
            t(self.y),
            t(self.z)
        )
    }
}

/// Proper rigid motion `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::IDENTITY, Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::IDENTITY, t)
    }

    pub fn from_rotation(r: UnitQuaternion) -> Self {
        Self::new(r, Vector3::zeros())
    }

    pub fn to_homogeneous(&self) -> HomogeneousMatrix {
        HomogeneousMatrix::from_linear_translation(&self.rotation.to_rotation_matrix(), &self.translation)
    }

    /// Reads the rotation block as a proper rotation. The caller is
    /// responsible for the block being orthonormal.
    pub fn from_homogeneous(m: &HomogeneousMatrix) -> Self {
        Self::new(UnitQuaternion::from_rotation_matrix(&m.linear()), m.translation())
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.rotate(&p.coords) + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(v)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation.rotate(&other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let r_inv = self.rotation.inverse();
        RigidTransform::new(r_inv, -r_inv.rotate(&self.translation))
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

pub fn invert_rigid(g: &RigidTransform) -> RigidTransform {
    g.inverse()
}

/// 3×4 projection matrix, defined up to scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix3x4(pub Matrix3x4<f64>);

impl ProjectionMatrix3x4 {
    /// `[I | 0]`.
    pub fn canonical() -> Self {
        Self(Matrix3x4::identity())
    }

    pub fn rank(&self) -> usize {
        let svd = SVD::new(self.0, false, false);
        let s = svd.singular_values;
        let max = s.max();
        if max == 0.0 {
            return 0;
        }
        s.iter().filter(|v| **v > 1e-12 * max).count()
    }
}

/// Corrected projection `P_default · T`.
pub fn apply_to_projection(
    p_default: &ProjectionMatrix3x4,
    t: &HomogeneousMatrix,
) -> Result<ProjectionMatrix3x4> {
    let out = ProjectionMatrix3x4(p_default.0 * t.0);
    match out.rank() {
        3 => Ok(out),
        rank => Err(Error::RankDeficient { rank }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs(m: &Matrix4<f64>) -> f64 {
        m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn rigid_strategy() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform4(-1.0..1.0f64),
            prop::array::uniform3(-500.0..500.0f64),
        )
            .prop_filter_map("nonzero quaternion", |(q, t)| {
                UnitQuaternion::from_array(q)
                    .filter(|_| q.iter().map(|v| v * v).sum::<f64>() > 1e-3)
                    .map(|r| RigidTransform::new(r, Vector3::new(t[0], t[1], t[2])))
            })
    }

    fn matrix_strategy() -> impl Strategy<Value = HomogeneousMatrix> {
        prop::array::uniform16(-2.0..2.0f64).prop_map(|e| HomogeneousMatrix::from_row_slice(&e))
    }

    #[test]
    fn compose_identity_and_translations() {
        let x = HomogeneousMatrix::from_row_slice(&[
            1.0, 2.0, 3.0, 4.0, 0.5, -1.0, 2.0, 0.0, 0.0, 3.0, 1.0, -2.0, 0.1, 0.0, 0.2, 1.0,
        ]);
        assert_eq!(compose(&HomogeneousMatrix::identity(), &x), x);
        let inv = x.try_inverse().unwrap();
        let prod = compose(&x, &inv);
        assert!(max_abs(&(prod.0 - Matrix4::identity())) <= 1e-12);

        // Hand-multiplied: translation blocks add.
        let ab = compose(
            &HomogeneousMatrix::from_translation(1.0, 0.0, 0.0),
            &HomogeneousMatrix::from_translation(0.0, 2.0, 0.0),
        );
        assert_eq!(ab, HomogeneousMatrix::from_translation(1.0, 2.0, 0.0));
    }

    #[test]
    fn apply_examples() {
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(HomogeneousMatrix::identity().apply(&p).unwrap(), p);
        let s = HomogeneousMatrix::from_scale(2.0);
        assert_eq!(s.apply(&Point3::new(1.0, 1.0, 1.0)).unwrap(), Point3::new(2.0, 2.0, 2.0));

        // w = 0.001 * 100 + 1 = 1.1
        let mut persp = HomogeneousMatrix::identity();
        persp.0[(3, 2)] = 0.001;
        let out = persp.apply(&Point3::new(0.0, 0.0, 100.0)).unwrap();
        assert!((out.z - 100.0 / 1.1).abs() < 1e-12);
        assert_eq!(out.x, 0.0);
    }

    #[test]
    fn apply_near_infinity() {
        let mut m = HomogeneousMatrix::identity();
        m.0[(3, 2)] = -0.01;
        let err = m.apply(&Point3::new(0.0, 0.0, 100.0)).unwrap_err();
        assert!(matches!(err, Error::NearInfinityPoint { .. }));
    }

    #[test]
    fn invert_rigid_examples() {
        assert_eq!(invert_rigid(&RigidTransform::identity()), RigidTransform::identity());
        let t = RigidTransform::from_translation(Vector3::new(3.0, -4.0, 5.0));
        assert_eq!(invert_rigid(&t).translation, Vector3::new(-3.0, 4.0, -5.0));
        assert_eq!(invert_rigid(&t).rotation, UnitQuaternion::IDENTITY);
    }

    #[test]
    fn quaternion_canonical_hemisphere() {
        let q = UnitQuaternion::new(-0.5, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(q.to_array(), [0.5, -0.5, -0.5, -0.5]);
        let q = UnitQuaternion::new(0.0, 0.0, -1.0, 0.0).unwrap();
        assert_eq!(q.to_array(), [0.0, 0.0, 1.0, 0.0]);
        let q = UnitQuaternion::new(-2.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, UnitQuaternion::IDENTITY);
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_none());
    }

    #[test]
    fn quaternion_display() {
        let q = UnitQuaternion::new(0.99996, 0.0051, 0.0023, 0.0072).unwrap();
        assert_eq!(q.to_string(), "(0.999, 0.005, 0.002, 0.007)");
        assert_eq!(UnitQuaternion::IDENTITY.to_string(), "(1.000, 0.000, 0.000, 0.000)");
        let q = UnitQuaternion::from_axis_angle(&Vector3::z(), -0.02);
        assert_eq!(q.to_string(), "(0.999, 0.000, 0.000, -0.009)");
    }

    #[test]
    fn projection_examples() {
        let p = ProjectionMatrix3x4(Matrix3x4::new(
            800.0, 0.0, 320.0, 10.0, 0.0, 800.0, 240.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        ));
        assert_eq!(apply_to_projection(&p, &HomogeneousMatrix::identity()).unwrap(), p);

        let out = apply_to_projection(
            &ProjectionMatrix3x4::canonical(),
            &HomogeneousMatrix::from_translation(1.0, 2.0, 3.0),
        )
        .unwrap();
        let expected = Matrix3x4::new(1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 3.0);
        assert_eq!(out.0, expected);

        let mut singular = HomogeneousMatrix::identity();
        singular.0[(0, 0)] = 0.0;
        singular.0[(1, 1)] = 0.0;
        assert!(matches!(
            apply_to_projection(&ProjectionMatrix3x4::canonical(), &singular),
            Err(Error::RankDeficient { rank: 1 })
        ));
    }

    #[test]
    fn projection_product_matches_loop_multiply() {
        let p = Matrix3x4::from_fn(|r, c| ((r * 7 + c * 3) % 5) as f64 - 1.5 + 0.1 * r as f64);
        let t = HomogeneousMatrix::from_row_slice(&[
            1.1, 0.2, -0.1, 5.0, 0.0, 0.9, 0.3, -2.0, 0.1, -0.2, 1.05, 7.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        let out = apply_to_projection(&ProjectionMatrix3x4(p), &t).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += p[(r, k)] * t.0[(k, c)];
                }
                assert!((out.0[(r, c)] - acc).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in matrix_strategy(), b in matrix_strategy(), c in matrix_strategy()) {
            let l = compose(&compose(&a, &b), &c).0;
            let r = compose(&a, &compose(&b, &c)).0;
            let scale = max_abs(&l).max(1.0);
            prop_assert!(max_abs(&(l - r)) <= 1e-10 * scale);
        }

        #[test]
        fn apply_respects_composition(g in rigid_strategy(), h in rigid_strategy(), p in prop::array::uniform3(-300.0..300.0f64)) {
            let (a, b) = (g.to_homogeneous(), h.to_homogeneous());
            let p = Point3::new(p[0], p[1], p[2]);
            let direct = compose(&a, &b).apply(&p).unwrap();
            let nested = a.apply(&b.apply(&p).unwrap()).unwrap();
            prop_assert!((direct - nested).norm() <= 1e-9);
        }

        #[test]
        fn rigid_matrix_is_proper_rotation(g in rigid_strategy()) {
            let r = g.to_homogeneous().linear();
            prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() <= 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
            prop_assert!((g.rotation.norm() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn quaternion_matrix_round_trip(g in rigid_strategy()) {
            let back = UnitQuaternion::from_rotation_matrix(&g.rotation.to_rotation_matrix());
            prop_assert!((back.to_vector() - g.rotation.to_vector()).norm() <= 1e-9);
        }

        #[test]
        fn invert_rigid_is_involution(g in rigid_strategy()) {
            let twice = invert_rigid(&invert_rigid(&g));
            prop_assert!((twice.rotation.to_vector() - g.rotation.to_vector()).norm() <= 1e-12);
            prop_assert!((twice.translation - g.translation).norm() <= 1e-12 * g.translation.norm().max(1.0));
            let id = g.to_homogeneous().compose(&invert_rigid(&g).to_homogeneous());
            let scale = g.translation.norm().max(1.0);
            prop_assert!(max_abs(&(id.0 - Matrix4::identity())) <= 1e-12 * scale);
        }

        #[test]
        fn rigid_inverse_matches_matrix_inverse(g in rigid_strategy()) {
            let oracle = g.to_homogeneous().0.try_inverse().unwrap();
            let inv = invert_rigid(&g).to_homogeneous().0;
            prop_assert!(max_abs(&(oracle - inv)) <= 1e-9);
        }
    }
}
