//! World-anchored calibration through an external tracker, with and without
//! head-pose drift.
//!
//! ```bash
//! cargo run --example world_anchored_chain
//! ```

use bbcalib::estimators::RansacConfig;
use bbcalib::pipeline::run_calibrate_and_test;
use bbcalib::simulator::{
    generate_world_anchored_session, Drift, GroundTruth, GroundTruthPreset, NoiseModel, Scenario, WorkspaceFrustum,
    WorldChain,
};

fn main() -> bbcalib::Result<()> {
    let chain = WorldChain::facing_rig();
    let ws = WorkspaceFrustum::world_box();
    println!("tracker seen from the head: {:?}", chain.head_from_tracker().translation);

    for (mm, mrad) in [(0.0, 0.0), (1.0, 1.0), (3.0, 5.0)] {
        let gt = GroundTruth::preset(GroundTruthPreset::Rigid)
            .with_scenario(Scenario::WorldAnchored)
            .with_drift(Drift { translation_mm: mm, rotation_mrad: mrad });
        let session = generate_world_anchored_session(&gt, &chain, &ws, &NoiseModel::default().with_seed(5), 20, 8)?;
        let report = run_calibrate_and_test(&session, &RansacConfig::default())?;
        let line: Vec<String> = report
            .models
            .iter()
            .map(|(m, r)| match r {
                Ok(r) => format!("{m} {:.3}", r.test.mean),
                Err(_) => format!("{m} failed"),
            })
            .collect();
        println!("drift {mm} mm / {mrad} mrad: {}", line.join(", "));
    }
    Ok(())
}
