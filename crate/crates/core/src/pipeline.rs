//! End-to-end workflows: calibrate-and-test, multipoint calibration and the
//! double-cube match.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_isometric, ransac_estimate, ModelClass, Phase, PointCorrespondence, RansacConfig, Transform,
};
use crate::geometry::{Point3, RigidTransform, UnitQuaternion};
use crate::metrics::{average_quaternion, pose_error, reprojection_error, ErrorStats, PoseError};
use crate::simulator::{
    cube_corners, generate_multipoint_session, single_point_correspondences, CalibrationSession, GroundTruth,
    NoiseModel, WorkspaceFrustum, CUBE_EDGE_MM,
};

/// Fit and evaluation of one model class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub transform: Transform,
    /// Statistics over the training inliers.
    pub train: ErrorStats,
    /// Statistics over every test point.
    pub test: ErrorStats,
    pub inliers: usize,
    /// Indices into the training set rejected by RANSAC.
    pub outliers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    /// One entry per model class; a failed fit keeps its error.
    pub models: BTreeMap<ModelClass, std::result::Result<ModelReport, Error>>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl CalibrationReport {
    pub fn get(&self, model: ModelClass) -> Option<&ModelReport> {
        self.models.get(&model).and_then(|r| r.as_ref().ok())
    }

    /// First failed model, if any.
    pub fn first_failure(&self) -> Option<(ModelClass, &Error)> {
        self.models.iter().find_map(|(m, r)| r.as_ref().err().map(|e| (*m, e)))
    }
}

/// Fits every model class on the training points with RANSAC and
/// evaluates on the test points, which never enter the fit.
pub fn run_calibrate_and_test(session: &CalibrationSession, cfg: &RansacConfig) -> Result<CalibrationReport> {
    run_models(session, cfg, &ModelClass::ALL)
}

/// As [`run_calibrate_and_test`] for a chosen subset of model classes.
pub fn run_models(session: &CalibrationSession, cfg: &RansacConfig, models: &[ModelClass]) -> Result<CalibrationReport> {
    cfg.validate()?;
    let train = session.phase(Phase::Train);
    let test = session.phase(Phase::Test);
    if train.len() < 5 || test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "calibrate-and-test needs at least 5 train and 1 test points, got {} and {}",
            train.len(),
            test.len()
        )));
    }
    let models = models
        .iter()
        .map(|&model| (model, fit_and_test(&train, &test, model, cfg)))
        .collect();
    Ok(CalibrationReport {
        models,
        n_train: train.len(),
        n_test: test.len(),
        seed: cfg.seed,
    })
}

fn fit_and_test(
    train: &[PointCorrespondence],
    test: &[PointCorrespondence],
    model: ModelClass,
    cfg: &RansacConfig,
) -> Result<ModelReport> {
    let fit = ransac_estimate(train, model, cfg)?;
    let test_stats = reprojection_error(&fit.transform, test)?;
    Ok(ModelReport {
        transform: fit.transform,
        train: fit.train_residual,
        test: test_stats,
        inliers: fit.inlier_count(),
        outliers: fit.inlier_mask.iter().enumerate().filter(|(_, m)| !**m).map(|(i, _)| i).collect(),
    })
}

/// Multipoint calibration: four cube placements give the training set, and
/// a fresh 8-point single-point set from the same ground truth is the test.
pub fn run_multipoint_workflow(
    gt: &GroundTruth,
    ws: &WorkspaceFrustum,
    nm: &NoiseModel,
    cfg: &RansacConfig,
) -> Result<CalibrationReport> {
    let session = multipoint_session_with_test(gt, ws, nm, 8)?;
    run_calibrate_and_test(&session, cfg)
}

/// Four-placement multipoint session followed by `n_test` single-point
/// test alignments drawn with a seed derived from `nm.seed`. Test rows take
/// pose ids from 4 upward.
pub fn multipoint_session_with_test(
    gt: &GroundTruth,
    ws: &WorkspaceFrustum,
    nm: &NoiseModel,
    n_test: usize,
) -> Result<CalibrationSession> {
    let mut session = generate_multipoint_session(gt, ws, nm, 4)?;
    let test_noise = nm.with_seed(derived_seed(nm.seed));
    let test = single_point_correspondences(gt, ws, &test_noise, 0, n_test, 4)?;
    session.correspondences.extend(test);
    Ok(session)
}

/// SplitMix64 step; decorrelates the test-set seed from the session seed.
fn derived_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Geometry of the double-cube experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleCubeSetup {
    /// Offset of the virtual cube from the first cube, in its frame, mm.
    pub offset: Vector3<f64>,
    pub placements: usize,
    pub workspace: WorkspaceFrustum,
    pub cube_edge: f64,
}

impl Default for DoubleCubeSetup {
    fn default() -> Self {
        Self {
            offset: Vector3::new(150.0, 0.0, 0.0),
            placements: 4,
            workspace: WorkspaceFrustum::world_box(),
            cube_edge: CUBE_EDGE_MM,
        }
    }
}

impl DoubleCubeSetup {
    /// Centers of the first cube around the workspace center: the vertices
    /// of a regular tetrahedron for four placements, otherwise a regular
    /// polygon at mid depth.
    pub fn first_cube_centers(&self) -> Vec<Point3> {
        let ws = &self.workspace;
        let radius = 0.25 * (10.0 * ws.depth_range).min(ws.side_at(ws.center_distance));
        let c = ws.center().coords;
        let s = 1.0 / 3f64.sqrt();
        let tetra = [
            Vector3::new(s, s, s),
            Vector3::new(s, -s, -s),
            Vector3::new(-s, s, -s),
            Vector3::new(-s, -s, s),
        ];
        match self.placements {
            0 => Vec::new(),
            1 => vec![Point3::from(c)],
            4 => tetra.iter().map(|v| Point3::from(c + radius * v)).collect(),
            n => (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    Point3::from(c + radius * Vector3::new(a.cos(), a.sin(), 0.0))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleCubeReport {
    pub placements: Vec<PoseError>,
    pub mean_displacement: f64,
    pub average_rotation: UnitQuaternion,
    pub model: ModelClass,
}

/// Simulated double-cube match.
///
/// For each placement the virtual cube is drawn through `transform` at the
/// offset from the first cube. The user perceives every virtual point `x`
/// at `T_gt⁻¹(T(x))` and aligns the second, real cube to the perceived
/// corners (best rigid fit), with residual error from `alignment_noise`
/// (translation σ `(sigma_xy, sigma_xy, sigma_z)`, rotation σ
/// `sigma_xy / cube_edge` rad). The reported error is the achieved pose
/// against the intended virtual pose.
pub fn run_double_cube_match(
    transform: &Transform,
    gt: &GroundTruth,
    setup: &DoubleCubeSetup,
    alignment_noise: &NoiseModel,
) -> Result<DoubleCubeReport> {
    alignment_noise.validate()?;
    if setup.placements < 1 {
        return Err(Error::InvalidConfig("double-cube match needs at least one placement".into()));
    }
    let gt_inv = gt
        .transform
        .matrix()
        .try_inverse()
        .ok_or_else(|| Error::InvalidConfig("ground-truth transform is not invertible".into()))?;
    let exact = transform.matrix() == gt.transform.matrix();
    let perceived = gt_inv.compose(transform.matrix());

    let half = setup.cube_edge / 2.0;
    let model_corners: Vec<Point3> = cube_corners(setup.cube_edge)
        .iter()
        .map(|c| Point3::new(c.x - half, c.y - half, c.z - half))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(alignment_noise.seed);
    let sigma_t = Vector3::new(alignment_noise.sigma_xy, alignment_noise.sigma_xy, alignment_noise.sigma_z);
    let sigma_r = alignment_noise.sigma_xy / setup.cube_edge;

    let mut errors = Vec::with_capacity(setup.placements);
    for center in setup.first_cube_centers() {
        let first = RigidTransform::from_translation(center.coords);
        let target = first.compose(&RigidTransform::from_translation(setup.offset));
        let seen = if exact {
            target
        } else {
            let pairs = model_corners
                .iter()
                .map(|c| Ok(PointCorrespondence::new(*c, perceived.apply(&target.transform_point(c))?)))
                .collect::<Result<Vec<_>>>()?;
            RigidTransform::from_homogeneous(estimate_isometric(&pairs)?.matrix())
        };
        let noise = NoiseModel::rigid_perturbation(sigma_t, sigma_r, &mut rng);
        let achieved = if noise == RigidTransform::identity() {
            seen
        } else {
            RigidTransform::new(seen.rotation * noise.rotation, seen.translation + noise.translation)
        };
        errors.push(pose_error(&achieved, &target));
    }
    let mean_displacement = errors.iter().map(|e| e.displacement).sum::<f64>() / errors.len() as f64;
    let rotations: Vec<_> = errors.iter().map(|e| e.rotation).collect();
    Ok(DoubleCubeReport {
        average_rotation: average_quaternion(&rotations)?,
        mean_displacement,
        placements: errors,
        model: transform.model(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::projective_distance;
    use crate::geometry::HomogeneousMatrix;
    use crate::simulator::{generate_single_point_session, GroundTruthPreset};

    fn session(kind: GroundTruthPreset, nm: NoiseModel) -> CalibrationSession {
        generate_single_point_session(&GroundTruth::preset(kind), &WorkspaceFrustum::hololens(), &nm, 20, 8).unwrap()
    }

    #[test]
    fn noiseless_rigid_all_models_exact() {
        let r = run_calibrate_and_test(&session(GroundTruthPreset::Rigid, NoiseModel::none(1)), &RansacConfig::default()).unwrap();
        for m in ModelClass::ALL {
            let rep = r.get(m).unwrap();
            assert!(rep.test.mean <= 1e-9, "{m}: {}", rep.test.mean);
            assert_eq!(rep.inliers, 20);
        }
        assert_eq!((r.n_train, r.n_test), (20, 8));
    }

    #[test]
    fn scale_separates_isometric() {
        let r = run_calibrate_and_test(&session(GroundTruthPreset::Scaled, NoiseModel::none(2)), &RansacConfig::default()).unwrap();
        assert!(r.get(ModelClass::Affine).unwrap().test.mean <= 1e-9);
        assert!(r.get(ModelClass::Perspective).unwrap().test.mean <= 1e-9);
        assert!(r.get(ModelClass::Isometric).unwrap().test.mean > 0.0);
    }

    #[test]
    fn test_points_never_affect_the_fit() {
        let s = session(GroundTruthPreset::Sheared, NoiseModel::default().with_seed(3));
        let cfg = RansacConfig::default().with_seed(3);
        let full = run_calibrate_and_test(&s, &cfg).unwrap();
        let mut shuffled = s.clone();
        let test: Vec<_> = s.test().into_iter().rev().map(|mut c| {
            c.q.x += 100.0;
            c
        }).collect();
        shuffled.correspondences = s.train().into_iter().chain(test).collect();
        let other = run_calibrate_and_test(&shuffled, &cfg).unwrap();
        for m in ModelClass::ALL {
            assert_eq!(full.get(m).unwrap().transform, other.get(m).unwrap().transform);
        }
    }

    #[test]
    fn nested_train_residual_and_determinism() {
        let s = session(GroundTruthPreset::Rigid, NoiseModel::isotropic(2.0, 4));
        let cfg = RansacConfig {
            inlier_threshold: f64::INFINITY,
            ..RansacConfig::default()
        };
        let r = run_calibrate_and_test(&s, &cfg).unwrap();
        let rms = |m| r.get(m).unwrap().train.rms();
        assert!(rms(ModelClass::Affine) <= rms(ModelClass::Isometric) + 1e-9);
        assert_eq!(r, run_calibrate_and_test(&s, &cfg).unwrap());
    }

    #[test]
    fn failed_model_does_not_abort_others() {
        let mut s = session(GroundTruthPreset::Rigid, NoiseModel::none(5));
        // Coplanar training points: isometric still works, the others cannot.
        for c in s.correspondences.iter_mut().filter(|c| c.phase == Phase::Train) {
            c.q.z = 450.0;
            c.p = s.ground_truth.unwrap().transform.apply(&c.q).unwrap();
        }
        let r = run_calibrate_and_test(&s, &RansacConfig::default()).unwrap();
        assert!(r.get(ModelClass::Isometric).is_some());
        assert!(matches!(r.first_failure(), Some((ModelClass::Affine, _))));
    }

    #[test]
    fn rejects_sessions_without_test_points() {
        let mut s = session(GroundTruthPreset::Rigid, NoiseModel::none(6));
        s.correspondences.retain(|c| c.phase == Phase::Train);
        assert!(run_calibrate_and_test(&s, &RansacConfig::default()).is_err());
    }

    #[test]
    fn multipoint_noiseless() {
        let gt = GroundTruth::preset(GroundTruthPreset::Rigid);
        let r = run_multipoint_workflow(&gt, &WorkspaceFrustum::hololens(), &NoiseModel::none(7), &RansacConfig::default()).unwrap();
        assert_eq!((r.n_train, r.n_test), (20, 8));
        let iso = r.get(ModelClass::Isometric).unwrap();
        assert!(iso.test.mean <= 1e-9);
        assert!(projective_distance(iso.transform.matrix(), gt.transform.matrix()) <= 1e-9);
    }

    #[test]
    fn double_cube_exact_and_biased() {
        let gt = GroundTruth::preset(GroundTruthPreset::Sheared);
        let setup = DoubleCubeSetup::default();
        let r = run_double_cube_match(&gt.transform, &gt, &setup, &NoiseModel::none(0)).unwrap();
        assert_eq!(r.placements.len(), 4);
        for e in &r.placements {
            assert_eq!(e.displacement, 0.0);
            assert_eq!(e.rotation, UnitQuaternion::IDENTITY);
        }
        let bias = gt.transform.matrix().compose(&HomogeneousMatrix::from_translation(3.0, 0.0, 4.0));
        let biased = Transform::new(bias, ModelClass::Affine).unwrap();
        let r = run_double_cube_match(&biased, &gt, &setup, &NoiseModel::none(0)).unwrap();
        for e in &r.placements {
            assert!((e.displacement - 5.0).abs() <= 1e-9, "{}", e.displacement);
            assert!(e.rotation.angle() < 1e-9);
        }
    }

    #[test]
    fn double_cube_identity_on_identity() {
        let gt = GroundTruth::head_anchored(Transform::identity(ModelClass::Isometric)).unwrap();
        let r = run_double_cube_match(&gt.transform, &gt, &DoubleCubeSetup::default(), &NoiseModel::none(1)).unwrap();
        assert_eq!(r.mean_displacement, 0.0);
        assert_eq!(r.average_rotation, UnitQuaternion::IDENTITY);
    }

    #[test]
    fn double_cube_geometry() {
        let setup = DoubleCubeSetup::default();
        let centers = setup.first_cube_centers();
        assert_eq!(centers.len(), 4);
        let d01 = (centers[0] - centers[1]).norm();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(((centers[i] - centers[j]).norm() - d01).abs() < 1e-9);
            }
            let target = RigidTransform::from_translation(centers[i].coords).compose(&RigidTransform::from_translation(setup.offset));
            assert!(((target.translation - centers[i].coords).norm() - 150.0).abs() < 1e-12);
        }
    }

    #[test]
    fn double_cube_noise_is_seeded() {
        let gt = GroundTruth::preset(GroundTruthPreset::Rigid);
        let nm = NoiseModel::default().with_seed(11);
        let a = run_double_cube_match(&gt.transform, &gt, &DoubleCubeSetup::default(), &nm).unwrap();
        let b = run_double_cube_match(&gt.transform, &gt, &DoubleCubeSetup::default(), &nm).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_displacement > 0.0 && a.mean_displacement < 20.0);
    }
}
