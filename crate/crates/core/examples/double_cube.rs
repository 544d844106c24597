//! Double-cube match: how far a user's second cube lands from where a
//! calibrated display meant to show it.
//!
//! ```bash
//! cargo run --example double_cube
//! ```

use bbcalib::estimators::{ModelClass, RansacConfig};
use bbcalib::io::format_double_cube;
use bbcalib::pipeline::{run_calibrate_and_test, run_double_cube_match, DoubleCubeSetup};
use bbcalib::simulator::{generate_single_point_session, GroundTruth, GroundTruthPreset, NoiseModel, WorkspaceFrustum};

fn main() -> bbcalib::Result<()> {
    let gt = GroundTruth::preset(GroundTruthPreset::Sheared);
    let ws = WorkspaceFrustum::hololens();
    let session = generate_single_point_session(&gt, &ws, &NoiseModel::default().with_seed(11), 20, 8)?;
    let report = run_calibrate_and_test(&session, &RansacConfig::default())?;
    let setup = DoubleCubeSetup { workspace: ws, ..DoubleCubeSetup::default() };
    let hand = NoiseModel::isotropic(0.5, 11);

    for model in ModelClass::ALL {
        let Some(fit) = report.get(model) else { continue };
        let dc = run_double_cube_match(&fit.transform, &gt, &setup, &hand)?;
        println!("== {model}: mean displacement {:.3} mm", dc.mean_displacement);
        print!("{}", format_double_cube(&dc));
    }

    let perfect = run_double_cube_match(&gt.transform, &gt, &setup, &NoiseModel::none(0))?;
    println!("== ground truth itself: {:.3} mm, {}", perfect.mean_displacement, perfect.average_rotation);
    Ok(())
}
