//! Synthetic calibration sessions with known ground truth.
//!
//! The human alignment step is replaced by a noise model: every alignment
//! yields `p = T(q) + ε`, with anisotropic Gaussian `ε` in the viewing frame
//! (z is the viewing direction) and optional gross outliers.
//!
//! Random streams: every generator seeds ChaCha8 from `NoiseModel::seed` and
//! uses separate streams for placements, alignment noise and head drift, so
//! changing one noise parameter never reshuffles the placements.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::{ModelClass, Phase, PointCorrespondence, Transform};
use crate::geometry::{HomogeneousMatrix, Point3, RigidTransform, UnitQuaternion};

/// Edge of the 2-inch alignment cube, mm.
pub const CUBE_EDGE_MM: f64 = 50.8;

const PLACEMENT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const DRIFT_STREAM: u64 = 2;

/// Placement attempts per cube pose before giving up.
const MAX_PLACEMENT_TRIES: usize = 10_000;

/// Truncated square frustum along +z of the viewing frame.
///
/// Areas are in cm², depth in cm, the distance from the eye to the middle of
/// the depth range in mm. Sections are squares whose side varies linearly
/// between the near and far planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceFrustum {
    pub near_area: f64,
    pub far_area: f64,
    pub depth_range: f64,
    pub center_distance: f64,
}

impl WorkspaceFrustum {
    pub fn new(near_area: f64, far_area: f64, depth_range: f64, center_distance: f64) -> Result<Self> {
        let ws = Self {
            near_area,
            far_area,
            depth_range,
            center_distance,
        };
        ws.validate()?;
        Ok(ws)
    }

    /// Reachable volume of the head-anchored tracker on a HoloLens.
    pub fn hololens() -> Self {
        Self {
            near_area: 110.88,
            far_area: 38.88,
            depth_range: 12.0,
            center_distance: 450.0,
        }
    }

    pub fn moverio() -> Self {
        Self {
            near_area: 70.58,
            far_area: 26.55,
            depth_range: 12.0,
            center_distance: 450.0,
        }
    }

    /// 60 cm cube covered by an external tracker.
    pub fn world_box() -> Self {
        Self {
            near_area: 3600.0,
            far_area: 3600.0,
            depth_range: 60.0,
            center_distance: 600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.near_area, self.far_area, self.depth_range, self.center_distance];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) && self.near_z() > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid workspace {self:?}")))
        }
    }

    pub fn near_z(&self) -> f64 {
        self.center_distance - 5.0 * self.depth_range
    }

    pub fn far_z(&self) -> f64 {
        self.center_distance + 5.0 * self.depth_range
    }

    pub fn center(&self) -> Point3 {
        Point3::new(0.0, 0.0, self.center_distance)
    }

    /// Side of the square section at depth `z`, mm.
    pub fn side_at(&self, z: f64) -> f64 {
        let near = 10.0 * self.near_area.sqrt();
        let far = 10.0 * self.far_area.sqrt();
        let s = ((z - self.near_z()) / (10.0 * self.depth_range)).clamp(0.0, 1.0);
        near + s * (far - near)
    }

    /// Boundary inclusive, with a 1e-9 mm allowance for round-off.
    pub fn contains(&self, p: &Point3) -> bool {
        const EPS: f64 = 1e-9;
        if p.z < self.near_z() - EPS || p.z > self.far_z() + EPS {
            return false;
        }
        let half = 0.5 * self.side_at(p.z) + EPS;
        p.x.abs() <= half && p.y.abs() <= half
    }

    fn point_at(&self, u: f64, v: f64, w: f64) -> Point3 {
        let z = self.near_z() + w * 10.0 * self.depth_range;
        let half = 0.5 * self.side_at(z);
        Point3::new((2.0 * u - 1.0) * half, (2.0 * v - 1.0) * half, z)
    }

    /// `n` points from distinct cells of a `g × g × g` grid (`g³ ≥ n`) in
    /// normalized frustum coordinates, jittered uniformly within each cell.
    /// Returned in random order.
    pub fn sample_stratified(&self, n: usize, rng: &mut impl Rng) -> Vec<Point3> {
        if n == 0 {
            return Vec::new();
        }
        let mut g = 1;
        while g * g * g < n {
            g += 1;
        }
        let cell = 1.0 / g as f64;
        index::sample(rng, g * g * g, n)
            .into_iter()
            .map(|i| {
                let (a, b, c) = (i % g, (i / g) % g, i / (g * g));
                let u = (a as f64 + rng.random::<f64>()) * cell;
                let v = (b as f64 + rng.random::<f64>()) * cell;
                let w = (c as f64 + rng.random::<f64>()) * cell;
                self.point_at(u, v, w)
            })
            .collect()
    }
}

impl Default for WorkspaceFrustum {
    fn default() -> Self {
        Self::hololens()
    }
}

/// Alignment noise of the simulated user, mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub outlier_probability: f64,
    pub outlier_magnitude: f64,
    /// Translation σ of the rigid error shared by the corners of one
    /// multipoint alignment. Its rotation σ is this value divided by the
    /// cube edge, in radians per axis.
    pub multipoint_pose_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_xy: 1.0,
            sigma_z: 3.0,
            outlier_probability: 0.0,
            outlier_magnitude: 50.0,
            multipoint_pose_sigma: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// No noise of any kind.
    pub fn none(seed: u64) -> Self {
        Self {
            sigma_xy: 0.0,
            sigma_z: 0.0,
            seed,
            ..Self::default()
        }
    }

    /// Isotropic per-point noise; `sigma_z` follows `sigma_xy`.
    pub fn isotropic(sigma: f64, seed: u64) -> Self {
        Self {
            sigma_xy: sigma,
            sigma_z: sigma,
            seed,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_xy, self.sigma_z, self.multipoint_pose_sigma];
        if !sigmas.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::InvalidConfig("noise sigmas must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_probability) {
            return Err(Error::InvalidConfig("outlier probability must lie in [0, 1)".into()));
        }
        if self.outlier_probability > 0.0 && !(self.outlier_magnitude > 3.0 * self.sigma_xy.max(self.sigma_z)) {
            return Err(Error::InvalidConfig(
                "outlier magnitude must exceed the 3σ envelope of inlier noise".into(),
            ));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Displacement of one alignment. Always consumes seven draws so the
    /// stream stays aligned whatever the parameters.
    fn displacement(&self, rng: &mut impl Rng) -> Vector3<f64> {
        let n = normals(rng);
        let u: f64 = rng.random();
        let d = normals(rng);
        let mut e = Vector3::new(self.sigma_xy * n.x, self.sigma_xy * n.y, self.sigma_z * n.z);
        if u < self.outlier_probability {
            let dir = if d.norm() > 0.0 { d.normalize() } else { Vector3::x() };
            e += self.outlier_magnitude * dir;
        }
        e
    }

    /// Rigid perturbation with per-axis translation σ `sigma_t` (mm) and
    /// per-axis rotation σ `sigma_r` (rad).
    pub(crate) fn rigid_perturbation(sigma_t: Vector3<f64>, sigma_r: f64, rng: &mut impl Rng) -> RigidTransform {
        let t = normals(rng).component_mul(&sigma_t);
        let r = normals(rng) * sigma_r;
        RigidTransform::new(UnitQuaternion::from_scaled_axis(&r), t)
    }
}

fn normals(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Uniformly distributed rotation.
pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion {
    loop {
        let v = [0; 4].map(|_| rng.sample::<f64, _>(StandardNormal));
        if let Some(q) = UnitQuaternion::from_array(v) {
            return q;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    HeadAnchored,
    WorldAnchored,
}

/// Per-placement head-pose error of the world-anchored chain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Drift {
    /// Translation σ per axis, mm.
    pub translation_mm: f64,
    /// Rotation σ per axis, milliradians.
    pub rotation_mrad: f64,
}

impl Drift {
    pub fn is_zero(&self) -> bool {
        self.translation_mm == 0.0 && self.rotation_mrad == 0.0
    }
}

/// Regimes of the true display transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroundTruthPreset {
    Rigid,
    /// Rigid with uniform scale 1.05.
    Scaled,
    Sheared,
    /// Affine part rigid, last row slightly off `(0, 0, 0, 1)`.
    Perspective,
}

impl GroundTruthPreset {
    pub const ALL: [GroundTruthPreset; 4] = [
        GroundTruthPreset::Rigid,
        GroundTruthPreset::Scaled,
        GroundTruthPreset::Sheared,
        GroundTruthPreset::Perspective,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GroundTruthPreset::Rigid => "rigid",
            GroundTruthPreset::Scaled => "scale",
            GroundTruthPreset::Sheared => "shear",
            GroundTruthPreset::Perspective => "perspective",
        }
    }

    /// Smallest model class containing the preset.
    pub fn model(&self) -> ModelClass {
        match self {
            GroundTruthPreset::Rigid => ModelClass::Isometric,
            GroundTruthPreset::Scaled | GroundTruthPreset::Sheared => ModelClass::Affine,
            GroundTruthPreset::Perspective => ModelClass::Perspective,
        }
    }
}

impl fmt::Display for GroundTruthPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for GroundTruthPreset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        GroundTruthPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (rigid, scale, shear, perspective)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub transform: Transform,
    pub scenario: Scenario,
    pub drift: Drift,
}

impl GroundTruth {
    pub fn new(transform: Transform, scenario: Scenario) -> Result<Self> {
        if transform.matrix().try_inverse().is_none() {
            return Err(Error::InvalidConfig("ground-truth transform is not invertible".into()));
        }
        Ok(Self {
            transform,
            scenario,
            drift: Drift::default(),
        })
    }

    pub fn head_anchored(transform: Transform) -> Result<Self> {
        Self::new(transform, Scenario::HeadAnchored)
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    /// Fixed representative of each regime.
    pub fn preset(kind: GroundTruthPreset) -> Self {
        let base = RigidTransform::new(
            UnitQuaternion::from_scaled_axis(&Vector3::new(0.02, -0.035, 0.01)),
            Vector3::new(12.0, -25.0, 8.0),
        );
        let shear = Matrix3::new(0.0, 0.04, 0.02, 0.0, 0.0, 0.03, 0.0, 0.0, 0.0);
        Self::build(kind, &base, 1.05, &shear, [2e-5, -1e-5, 1e-4])
    }

    /// Random member of a regime: rotation up to 0.2 rad, translation within
    /// ±30 mm, scale in [1.02, 1.08], shear entries within ±0.05, last-row
    /// entries up to 2e-4 per mm.
    pub fn random(kind: GroundTruthPreset, rng: &mut impl Rng) -> Self {
        let axis = normals(rng);
        let angle = rng.random_range(0.0..0.2);
        let t = Vector3::from_fn(|_, _| rng.random_range(-30.0..30.0));
        let base = RigidTransform::new(UnitQuaternion::from_axis_angle(&axis, angle), t);
        let scale = rng.random_range(1.02..1.08);
        let shear = Matrix3::from_fn(|r, c| if c > r { rng.random_range(-0.05..0.05) } else { 0.0 });
        let last = [
            rng.random_range(-5e-5..5e-5),
            rng.random_range(-5e-5..5e-5),
            rng.random_range(5e-5..2e-4),
        ];
        Self::build(kind, &base, scale, &shear, last)
    }

    fn build(kind: GroundTruthPreset, base: &RigidTransform, scale: f64, shear: &Matrix3<f64>, last: [f64; 3]) -> Self {
        let r = base.rotation.to_rotation_matrix();
        let mut m = base.to_homogeneous();
        match kind {
            GroundTruthPreset::Rigid => {}
            GroundTruthPreset::Scaled => m = HomogeneousMatrix::from_linear_translation(&(r * scale), &base.translation),
            GroundTruthPreset::Sheared => {
                m = HomogeneousMatrix::from_linear_translation(&(r * (Matrix3::identity() + shear)), &base.translation)
            }
            GroundTruthPreset::Perspective => {
                for (k, v) in last.iter().enumerate() {
                    m.0[(3, k)] = *v;
                }
            }
        }
        let transform = Transform::new(m, kind.model()).expect("presets satisfy their class invariants");
        Self::head_anchored(transform).expect("presets are invertible")
    }
}

/// One simulated session of alignments.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSession {
    pub correspondences: Vec<PointCorrespondence>,
    pub cube_edge: f64,
    pub ground_truth: Option<GroundTruth>,
    pub workspace: WorkspaceFrustum,
    pub noise: NoiseModel,
}

impl CalibrationSession {
    pub fn phase(&self, phase: Phase) -> Vec<PointCorrespondence> {
        self.correspondences.iter().filter(|c| c.phase == phase).copied().collect()
    }

    pub fn train(&self) -> Vec<PointCorrespondence> {
        self.phase(Phase::Train)
    }

    pub fn test(&self) -> Vec<PointCorrespondence> {
        self.phase(Phase::Test)
    }
}

/// The 8 corners of an axis-aligned cube with corner 0 at the origin.
///
/// | index | corner      |
/// |-------|-------------|
/// | 0     | (0, 0, 0)   |
/// | 1     | (e, 0, 0)   |
/// | 2     | (0, e, 0)   |
/// | 3     | (0, 0, e)   |
/// | 4     | (e, e, 0)   |
/// | 5     | (e, 0, e)   |
/// | 6     | (0, e, e)   |
/// | 7     | (e, e, e)   |
///
/// Indices 0 to 4 are the multipoint subset: corner 0, its three edge
/// neighbors, and the diagonal corner of the bottom face.
pub fn cube_corners(edge: f64) -> [Point3; 8] {
    const UNIT: [[f64; 3]; 8] = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
    ];
    UNIT.map(|[x, y, z]| Point3::new(x * edge, y * edge, z * edge))
}

/// Number of corners aligned per multipoint placement.
pub const MULTIPOINT_CORNERS: usize = 5;

fn check_inputs(gt: &GroundTruth, ws: &WorkspaceFrustum, nm: &NoiseModel) -> Result<()> {
    ws.validate()?;
    nm.validate()?;
    if gt.transform.matrix().try_inverse().is_none() {
        return Err(Error::InvalidConfig("ground-truth transform is not invertible".into()));
    }
    Ok(())
}

/// `p_i = T(q_i) + ε_i`, drawing `ε_i` from `rng` in order.
fn align(t: &Transform, qs: &[Point3], nm: &NoiseModel, rng: &mut impl Rng) -> Result<Vec<Point3>> {
    qs.iter().map(|q| Ok(t.apply(q)? + nm.displacement(rng))).collect()
}

fn with_phases(qs: &[Point3], ps: &[Point3], n_train: usize, first_pose: u32) -> Vec<PointCorrespondence> {
    qs.iter()
        .zip(ps)
        .enumerate()
        .map(|(i, (q, p))| {
            let phase = if i < n_train { Phase::Train } else { Phase::Test };
            PointCorrespondence::new(*q, *p).with_phase(phase).with_ids(first_pose + i as u32, 0)
        })
        .collect()
}

/// Head-anchored single-point session: `n_train + n_test` placements
/// stratified over the workspace, the first `n_train` tagged train.
pub fn generate_single_point_session(
    gt: &GroundTruth,
    ws: &WorkspaceFrustum,
    nm: &NoiseModel,
    n_train: usize,
    n_test: usize,
) -> Result<CalibrationSession> {
    check_inputs(gt, ws, nm)?;
    if n_train < 5 {
        return Err(Error::InvalidConfig(format!("need at least 5 training points, got {n_train}")));
    }
    let correspondences = single_point_correspondences(gt, ws, nm, n_train, n_test, 0)?;
    Ok(CalibrationSession {
        correspondences,
        cube_edge: CUBE_EDGE_MM,
        ground_truth: Some(*gt),
        workspace: *ws,
        noise: *nm,
    })
}

pub(crate) fn single_point_correspondences(
    gt: &GroundTruth,
    ws: &WorkspaceFrustum,
    nm: &NoiseModel,
    n_train: usize,
    n_test: usize,
    first_pose: u32,
) -> Result<Vec<PointCorrespondence>> {
    let qs = ws.sample_stratified(n_train + n_test, &mut nm.rng(PLACEMENT_STREAM));
    let ps = align(&gt.transform, &qs, nm, &mut nm.rng(NOISE_STREAM))?;
    Ok(with_phases(&qs, &ps, n_train, first_pose))
}

/// Multipoint session: `n_poses` random cube placements inside the
/// workspace, five corners each, all tagged train.
///
/// Each placement gets one rigid error about the centroid of its mapped
/// corners (translation σ `multipoint_pose_sigma`, rotation σ
/// `multipoint_pose_sigma / cube_edge` rad), then independent per-corner noise.
pub fn generate_multipoint_session(
    gt: &GroundTruth,
    ws: &WorkspaceFrustum,
    nm: &NoiseModel,
    n_poses: usize,
) -> Result<CalibrationSession> {
    check_inputs(gt, ws, nm)?;
    if n_poses < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 cube placements, got {n_poses}")));
    }
    let edge = CUBE_EDGE_MM;
    let subset = &cube_corners(edge)[..MULTIPOINT_CORNERS];
    let centroid = subset.iter().fold(Vector3::zeros(), |a, c| a + c.coords) / MULTIPOINT_CORNERS as f64;
    let local: Vec<Point3> = subset.iter().map(|c| Point3::from(c.coords - centroid)).collect();

    let mut placement_rng = nm.rng(PLACEMENT_STREAM);
    let mut noise_rng = nm.rng(NOISE_STREAM);
    let centers = ws.sample_stratified(n_poses, &mut placement_rng);
    let mut correspondences = Vec::with_capacity(n_poses * MULTIPOINT_CORNERS);
    for (pose_id, center) in centers.iter().enumerate() {
        let qs = place_cube(ws, &local, center, &mut placement_rng)?;
        let mapped = qs.iter().map(|q| gt.transform.apply(q)).collect::<Result<Vec<_>>>()?;
        let mid = mapped.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / MULTIPOINT_CORNERS as f64;
        let s = nm.multipoint_pose_sigma;
        let shared = NoiseModel::rigid_perturbation(Vector3::repeat(s), s / edge, &mut noise_rng);
        for (corner_id, (q, p)) in qs.iter().zip(&mapped).enumerate() {
            let moved = if s == 0.0 {
                *p
            } else {
                Point3::from(shared.transform_vector(&(p.coords - mid)) + mid + shared.translation)
            };
            let p = moved + nm.displacement(&mut noise_rng);
            correspondences.push(PointCorrespondence::new(*q, p).with_ids(pose_id as u32, corner_id as u8));
        }
    }
    Ok(CalibrationSession {
        correspondences,
        cube_edge: edge,
        ground_truth: Some(*gt),
        workspace: *ws,
        noise: *nm,
    })
}

/// Rotates the corner set by up to 30° and moves it near `center`,
/// retrying until every corner lies in the workspace.
fn place_cube(ws: &WorkspaceFrustum, local: &[Point3], center: &Point3, rng: &mut impl Rng) -> Result<Vec<Point3>> {
    for attempt in 0..MAX_PLACEMENT_TRIES {
        let rot = UnitQuaternion::from_axis_angle(&normals(rng), rng.random_range(0.0..std::f64::consts::FRAC_PI_6));
        // Start at the stratified center, fall back to fresh uniform centers.
        let c = if attempt == 0 { *center } else { ws.sample_stratified(1, rng)[0] };
        let pose = RigidTransform::new(rot, c.coords);
        let qs: Vec<Point3> = local.iter().map(|p| pose.transform_point(p)).collect();
        if qs.iter().all(|q| ws.contains(q)) {
            return Ok(qs);
        }
    }
    Err(Error::WorkspaceTooSmall(format!(
        "no placement of a {CUBE_EDGE_MM} mm cube fits in {ws:?}"
    )))
}

/// Fixed poses of the world-anchored tracking chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldChain {
    /// `G_WE`: external tracker in the world.
    pub tracker_in_world: RigidTransform,
    /// Nominal `G_WH`: head in the world as reported without drift.
    pub head_in_world: RigidTransform,
}

impl WorldChain {
    pub fn identity() -> Self {
        Self {
            tracker_in_world: RigidTransform::identity(),
            head_in_world: RigidTransform::identity(),
        }
    }

    /// Head at the world origin, tracker 1.5 m ahead facing back at it.
    pub fn facing_rig() -> Self {
        Self {
            tracker_in_world: RigidTransform::new(
                UnitQuaternion::from_axis_angle(&Vector3::y(), std::f64::consts::PI),
                Vector3::new(0.0, 0.0, 1500.0),
            ),
            head_in_world: RigidTransform::identity(),
        }
    }

    /// `G_HE = G_WH⁻¹ · G_WE` at the nominal head pose.
    pub fn head_from_tracker(&self) -> RigidTransform {
        self.head_in_world.inverse().compose(&self.tracker_in_world)
    }
}

/// Alignments through the world-anchored chain.
///
/// Placement `i` puts the alignment point at the origin of the object pose
/// `G_EO,i` in the tracker frame. Its true display position is
/// `T(G_HE · x)` at the nominal head pose; the recorded `q_i` goes through
/// the drifted head pose `G_WH · D_i`, where `D_i` is resampled independently
/// for every placement from `gt.drift`. With zero drift this reproduces the
/// head-anchored generator for the same seed.
pub fn simulate_world_anchored_chain(
    gt: &GroundTruth,
    chain: &WorldChain,
    placements: &[RigidTransform],
    nm: &NoiseModel,
) -> Result<Vec<PointCorrespondence>> {
    nm.validate()?;
    let d = gt.drift;
    if !(d.translation_mm >= 0.0 && d.rotation_mrad >= 0.0) {
        return Err(Error::InvalidConfig("drift sigmas must be non-negative".into()));
    }
    let g_he = chain.head_from_tracker();
    let truth: Vec<Point3> = placements
        .iter()
        .map(|g_eo| g_he.transform_point(&Point3::from(g_eo.translation)))
        .collect();
    let recorded: Vec<Point3> = if d.is_zero() {
        truth.clone()
    } else {
        let mut drift_rng = nm.rng(DRIFT_STREAM);
        truth
            .iter()
            .map(|q| {
                let drift = NoiseModel::rigid_perturbation(
                    Vector3::repeat(d.translation_mm),
                    d.rotation_mrad * 1e-3,
                    &mut drift_rng,
                );
                drift.inverse().transform_point(q)
            })
            .collect()
    };
    let ps = align(&gt.transform, &truth, nm, &mut nm.rng(NOISE_STREAM))?;
    Ok(with_phases(&recorded, &ps, placements.len(), 0))
}

/// World-anchored single-point session. Placements are stratified in the
/// head frame at the nominal pose and expressed in the tracker frame.
pub fn generate_world_anchored_session(
    gt: &GroundTruth,
    chain: &WorldChain,
    ws: &WorkspaceFrustum,
    nm: &NoiseModel,
    n_train: usize,
    n_test: usize,
) -> Result<CalibrationSession> {
    check_inputs(gt, ws, nm)?;
    if n_train < 5 {
        return Err(Error::InvalidConfig(format!("need at least 5 training points, got {n_train}")));
    }
    let tracker_from_head = chain.head_from_tracker().inverse();
    let placements: Vec<RigidTransform> = ws
        .sample_stratified(n_train + n_test, &mut nm.rng(PLACEMENT_STREAM))
        .iter()
        .map(|q| RigidTransform::from_translation(tracker_from_head.transform_point(q).coords))
        .collect();
    let mut correspondences = simulate_world_anchored_chain(gt, chain, &placements, nm)?;
    for (i, c) in correspondences.iter_mut().enumerate() {
        c.phase = if i < n_train { Phase::Train } else { Phase::Test };
    }
    Ok(CalibrationSession {
        correspondences,
        cube_edge: CUBE_EDGE_MM,
        ground_truth: Some(gt.with_scenario(Scenario::WorldAnchored)),
        workspace: *ws,
        noise: *nm,
    })
}
