use bbcalib::estimators::{estimate_affine, estimate_isometric, ModelClass, RansacConfig};
use bbcalib::metrics::reprojection_error;
use bbcalib::pipeline::{run_calibrate_and_test, run_multipoint_workflow};
use bbcalib::simulator::{generate_single_point_session, GroundTruth, GroundTruthPreset, NoiseModel, WorkspaceFrustum};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn perspective_overfits_under_isotropic_noise() {
    let gt = GroundTruth::preset(GroundTruthPreset::Rigid);
    let ws = WorkspaceFrustum::hololens();
    let (mut train, mut test) = (0.0, 0.0);
    for seed in 0..100 {
        let s = generate_single_point_session(&gt, &ws, &NoiseModel::isotropic(2.0, seed), 20, 8).unwrap();
        let r = run_calibrate_and_test(&s, &RansacConfig::default().with_seed(seed)).unwrap();
        let p = r.get(ModelClass::Perspective).unwrap();
        train += p.train.mean;
        test += p.test.mean;
    }
    assert!(test > train, "test {test} train {train}");
}

#[test]
fn reports_are_deterministic() {
    let gt = GroundTruth::preset(GroundTruthPreset::Perspective);
    let ws = WorkspaceFrustum::moverio();
    let nm = NoiseModel {
        outlier_probability: 0.1,
        ..NoiseModel::default().with_seed(17)
    };
    let s = generate_single_point_session(&gt, &ws, &nm, 20, 8).unwrap();
    let cfg = RansacConfig::default().with_seed(17);
    assert_eq!(run_calibrate_and_test(&s, &cfg).unwrap(), run_calibrate_and_test(&s, &cfg).unwrap());
    let mp = NoiseModel {
        multipoint_pose_sigma: 2.0,
        ..nm
    };
    assert_eq!(
        run_multipoint_workflow(&gt, &ws, &mp, &cfg).unwrap(),
        run_multipoint_workflow(&gt, &ws, &mp, &cfg).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Least squares nests: the affine fit never has a larger RMS residual.
    #[test]
    fn affine_rms_never_exceeds_isometric(seed in any::<u64>(), sigma in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = GroundTruthPreset::ALL[(seed % 4) as usize];
        let gt = GroundTruth::random(kind, &mut rng);
        let s = generate_single_point_session(&gt, &WorkspaceFrustum::hololens(), &NoiseModel::isotropic(sigma, seed), 20, 8).unwrap();
        let train = s.train();
        let a = reprojection_error(&estimate_affine(&train).unwrap(), &train).unwrap();
        let i = reprojection_error(&estimate_isometric(&train).unwrap(), &train).unwrap();
        prop_assert!(a.rms() <= i.rms() + 1e-9);
    }
}
