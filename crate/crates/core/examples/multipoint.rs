//! Multipoint calibration: four cube placements, five corners each, with a
//! shared rigid placement error. Compares model classes over many seeds.
//!
//! ```bash
//! cargo run --example multipoint
//! ```

use bbcalib::estimators::{ModelClass, RansacConfig};
use bbcalib::pipeline::run_multipoint_workflow;
use bbcalib::simulator::{GroundTruth, GroundTruthPreset, NoiseModel, WorkspaceFrustum};

fn main() -> bbcalib::Result<()> {
    let gt = GroundTruth::preset(GroundTruthPreset::Rigid);
    let ws = WorkspaceFrustum::hololens();
    let seeds = 50;
    let mut sums = [0.0; 3];
    let mut fits = [0usize; 3];
    let mut iso_wins = 0;
    for seed in 0..seeds {
        let noise = NoiseModel { multipoint_pose_sigma: 2.0, seed, ..NoiseModel::default() };
        let report = run_multipoint_workflow(&gt, &ws, &noise, &RansacConfig::default().with_seed(seed))?;
        let test = |m| report.get(m).map(|r| r.test.mean);
        for (i, m) in ModelClass::ALL.into_iter().enumerate() {
            if let Some(e) = test(m) {
                sums[i] += e;
                fits[i] += 1;
            }
        }
        if let (Some(iso), Some(aff)) = (test(ModelClass::Isometric), test(ModelClass::Affine)) {
            iso_wins += usize::from(iso < aff);
        }
    }
    for (i, m) in ModelClass::ALL.into_iter().enumerate() {
        println!("{m:<12} mean test error {:.3} mm over {} fits", sums[i] / fits[i] as f64, fits[i]);
    }
    println!("isometric beats affine in {iso_wins}/{seeds} seeds");
    Ok(())
}
