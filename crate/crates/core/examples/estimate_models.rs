//! Fit all three model classes to noiseless data from each ground-truth preset.
//!
//! ```bash
//! cargo run --example estimate_models
//! ```

use bbcalib::estimators::{projective_distance, ModelClass};
use bbcalib::metrics::reprojection_error;
use bbcalib::simulator::{generate_single_point_session, GroundTruth, GroundTruthPreset, NoiseModel, WorkspaceFrustum};

fn main() -> bbcalib::Result<()> {
    let ws = WorkspaceFrustum::hololens();
    for kind in GroundTruthPreset::ALL {
        let gt = GroundTruth::preset(kind);
        let session = generate_single_point_session(&gt, &ws, &NoiseModel::none(7), 20, 8)?;
        println!("ground truth: {kind}");
        for model in ModelClass::ALL {
            let t = model.estimate(&session.train())?;
            let test = reprojection_error(&t, &session.test())?;
            let dist = projective_distance(t.matrix(), gt.transform.matrix());
            println!("  {model:<12} test {:8.4} mm   |T - T_gt| {dist:.2e}", test.mean);
        }
    }
    Ok(())
}
