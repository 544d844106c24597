//! Transform estimators for 3D-3D point correspondences.
//!
//! Three model classes are supported, nested by degrees of freedom:
//!
//! | class         | unknowns | minimal sample | estimator                      |
//! |---------------|----------|----------------|--------------------------------|
//! | isometric     | 6        | 3              | SVD absolute orientation       |
//! | affine        | 12       | 4              | linear least squares           |
//! | perspective   | 15       | 5              | normalized DLT (algebraic)     |
//!
//! [`ransac_estimate`] wraps any of them with random sample consensus on the
//! per-point reprojection distance, and [`pivot_calibration`] recovers a tool
//! tip offset from pivoting motion.

mod affine;
mod isometric;
mod perspective;
mod pivot;
mod ransac;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{HomogeneousMatrix, Point3};

pub use affine::estimate_affine;
pub use isometric::estimate_isometric;
pub use perspective::estimate_perspective;
pub use pivot::{pivot_calibration, PivotResult};
pub use ransac::{ransac_estimate, EstimationResult, RansacConfig};

/// Upper bound on design-matrix condition numbers before a configuration
/// is reported as degenerate.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Train,
    Test,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Phase::Train),
            "test" => Ok(Phase::Test),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

/// One alignment: tracker-space point `q` seen at display-space point `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCorrespondence {
    pub q: Point3,
    pub p: Point3,
    pub phase: Phase,
    /// Which alignment placement produced the pair.
    pub pose_id: u32,
    /// Cube corner index for multipoint alignment, 0 for single-point.
    pub corner_id: u8,
}

impl PointCorrespondence {
    pub fn new(q: Point3, p: Point3) -> Self {
        Self {
            q,
            p,
            phase: Phase::Train,
            pose_id: 0,
            corner_id: 0,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_ids(mut self, pose_id: u32, corner_id: u8) -> Self {
        self.pose_id = pose_id;
        self.corner_id = corner_id;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite()) && self.corner_id <= 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelClass {
    Isometric,
    Affine,
    Perspective,
}

impl ModelClass {
    pub const ALL: [ModelClass; 3] = [ModelClass::Isometric, ModelClass::Affine, ModelClass::Perspective];

    /// Smallest number of correspondences that determines the model.
    pub fn min_samples(&self) -> usize {
        match self {
            ModelClass::Isometric => 3,
            ModelClass::Affine => 4,
            ModelClass::Perspective => 5,
        }
    }

    pub fn degrees_of_freedom(&self) -> usize {
        match self {
            ModelClass::Isometric => 6,
            ModelClass::Affine => 12,
            ModelClass::Perspective => 15,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelClass::Isometric => "isometric",
            ModelClass::Affine => "affine",
            ModelClass::Perspective => "perspective",
        }
    }

    pub fn estimate(&self, cs: &[PointCorrespondence]) -> Result<Transform> {
        match self {
            ModelClass::Isometric => estimate_isometric(cs),
            ModelClass::Affine => estimate_affine(cs),
            ModelClass::Perspective => estimate_perspective(cs),
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ModelClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "isometric" => Ok(ModelClass::Isometric),
            "affine" => Ok(ModelClass::Affine),
            "perspective" => Ok(ModelClass::Perspective),
            other => Err(format!("unknown model class {other:?}")),
        }
    }
}

/// A homogeneous matrix tagged with the model class that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    matrix: HomogeneousMatrix,
    model: ModelClass,
}

impl Transform {
    /// Checks the class invariants. Perspective matrices are rescaled to
    /// unit Frobenius norm with a canonical sign.
    pub fn new(matrix: HomogeneousMatrix, model: ModelClass) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidConfig("non-finite transform".into()));
        }
        match model {
            ModelClass::Isometric => {
                if !matrix.has_affine_last_row() {
                    return Err(Error::InvalidConfig("isometric transform needs last row (0,0,0,1)".into()));
                }
                let r = matrix.linear();
                let ortho = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max();
                if ortho > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig("isometric rotation block is not a proper rotation".into()));
                }
                Ok(Self { matrix, model })
            }
            ModelClass::Affine => {
                if !matrix.has_affine_last_row() {
                    return Err(Error::InvalidConfig("affine transform needs last row (0,0,0,1)".into()));
                }
                Ok(Self { matrix, model })
            }
            ModelClass::Perspective => canonical_scale(&matrix)
                .map(|matrix| Self { matrix, model })
                .ok_or_else(|| Error::InvalidConfig("zero perspective matrix".into())),
        }
    }

    /// Picks the tightest class whose invariants the matrix satisfies.
    pub fn infer(matrix: HomogeneousMatrix) -> Result<Self> {
        Self::new(matrix, ModelClass::Isometric)
            .or_else(|_| Self::new(matrix, ModelClass::Affine))
            .or_else(|_| Self::new(matrix, ModelClass::Perspective))
    }

    pub fn identity(model: ModelClass) -> Self {
        Self::new(HomogeneousMatrix::identity(), model).expect("identity satisfies every class")
    }

    pub fn matrix(&self) -> &HomogeneousMatrix {
        &self.matrix
    }

    pub fn model(&self) -> ModelClass {
        self.model
    }

    pub fn apply(&self, q: &Point3) -> Result<Point3> {
        self.matrix.apply(q)
    }
}

/// `m / ‖m‖_F` with the sign fixed so that entry (3,3) is positive, or the
/// largest-magnitude entry when (3,3) is negligible.
pub fn canonical_scale(m: &HomogeneousMatrix) -> Option<HomogeneousMatrix> {
    let norm = m.frobenius_norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    // Already normalized matrices are kept bit-identical.
    let mut out = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON { m.0 } else { m.0 / norm };
    let pivot = if out[(3, 3)].abs() > 1e-9 {
        out[(3, 3)]
    } else {
        out.iter().copied().fold(0.0, |a: f64, v| if v.abs() > a.abs() { v } else { a })
    };
    if pivot < 0.0 {
        out = -out;
    }
    Some(HomogeneousMatrix(out))
}

/// Frobenius distance between two matrices after canonical scaling.
pub fn projective_distance(a: &HomogeneousMatrix, b: &HomogeneousMatrix) -> f64 {
    match (canonical_scale(a), canonical_scale(b)) {
        (Some(a), Some(b)) => (a.0 - b.0).norm(),
        _ => f64::INFINITY,
    }
}

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to √3.
pub(crate) fn similarity_normalization(points: impl Iterator<Item = Point3> + Clone) -> Option<Matrix4<f64>> {
    let n = points.clone().count();
    if n == 0 {
        return None;
    }
    let centroid = points.clone().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let mean_dist = points.map(|p| (p.coords - centroid).norm()).sum::<f64>() / n as f64;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return None;
    }
    let s = 3f64.sqrt() / mean_dist;
    let mut m = Matrix4::identity() * s;
    m[(3, 3)] = 1.0;
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-s * centroid));
    Some(m)
}

pub(crate) fn check_count(cs: &[PointCorrespondence], model: ModelClass) -> Result<()> {
    if cs.len() < model.min_samples() {
        return Err(Error::TooFewPoints {
            model,
            needed: model.min_samples(),
            got: cs.len(),
        });
    }
    if let Some(bad) = cs.iter().position(|c| !c.is_valid()) {
        return Err(Error::InvalidConfig(format!("correspondence {bad} is not finite")));
    }
    Ok(())
}

pub(crate) fn degenerate(model: ModelClass, reason: impl Into<String>) -> Error {
    Error::DegenerateConfiguration {
        model,
        reason: reason.into(),
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use crate::geometry::{RigidTransform, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_rigid(rng: &mut impl Rng) -> RigidTransform {
        let q = UnitQuaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap();
        let t = Vector3::new(
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
        );
        RigidTransform::new(q, t)
    }

    pub fn random_affine(rng: &mut impl Rng) -> HomogeneousMatrix {
        let mut m = random_rigid(rng).to_homogeneous().0;
        for r in 0..3 {
            for c in 0..3 {
                m[(r, c)] += rng.random_range(-0.2..0.2);
            }
        }
        HomogeneousMatrix(m)
    }

    pub fn random_perspective(rng: &mut impl Rng) -> HomogeneousMatrix {
        let mut m = random_affine(rng).0;
        m[(3, 0)] = rng.random_range(-2e-4..2e-4);
        m[(3, 1)] = rng.random_range(-2e-4..2e-4);
        m[(3, 2)] = rng.random_range(-2e-4..2e-4);
        HomogeneousMatrix(m)
    }

    pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(300.0..500.0),
                )
            })
            .collect()
    }

    pub fn correspondences(m: &HomogeneousMatrix, qs: &[Point3]) -> Vec<PointCorrespondence> {
        qs.iter()
            .map(|q| PointCorrespondence::new(*q, m.apply(q).unwrap()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_class_sample_sizes() {
        assert_eq!(ModelClass::Isometric.min_samples(), 3);
        assert_eq!(ModelClass::Affine.min_samples(), 4);
        assert_eq!(ModelClass::Perspective.min_samples(), 5);
        for m in ModelClass::ALL {
            assert_eq!(m.as_str().parse::<ModelClass>().unwrap(), m);
        }
    }

    #[test]
    fn transform_invariants_are_checked() {
        let shear = HomogeneousMatrix::from_row_slice(&[
            1.0, 0.3, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        assert!(Transform::new(shear, ModelClass::Isometric).is_err());
        assert!(Transform::new(shear, ModelClass::Affine).is_ok());
        assert_eq!(Transform::infer(shear).unwrap().model(), ModelClass::Affine);

        let p = Transform::new(HomogeneousMatrix::from_scale(-3.0), ModelClass::Perspective).unwrap();
        assert!((p.matrix().frobenius_norm() - 1.0).abs() < 1e-15);
        assert!(p.matrix().0[(3, 3)] < 0.0 || p.matrix().0[(3, 3)] > 0.0);
    }

    #[test]
    fn normalization_hits_target_spread() {
        let pts = [
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(0.0, 10.0, 0.0),
            Point3::new(0.0, 0.0, 10.0),
            Point3::new(10.0, 10.0, 10.0),
        ];
        let n = similarity_normalization(pts.iter().copied()).unwrap();
        let h = HomogeneousMatrix(n);
        let mapped: Vec<_> = pts.iter().map(|p| h.apply(p).unwrap()).collect();
        let c = mapped.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / 4.0;
        assert!(c.norm() < 1e-12);
        let d = mapped.iter().map(|p| p.coords.norm()).sum::<f64>() / 4.0;
        assert!((d - 3f64.sqrt()).abs() < 1e-12);
        assert!(similarity_normalization([Point3::origin(); 3].into_iter()).is_none());
    }
}
