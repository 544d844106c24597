//! One bad alignment among twenty: RANSAC finds and drops it.
//!
//! ```bash
//! cargo run --example ransac_outliers
//! ```

use bbcalib::estimators::{estimate_affine, ransac_estimate, ModelClass, RansacConfig};
use bbcalib::metrics::reprojection_error;
use bbcalib::simulator::{generate_single_point_session, GroundTruth, GroundTruthPreset, NoiseModel, WorkspaceFrustum};

fn main() -> bbcalib::Result<()> {
    let gt = GroundTruth::preset(GroundTruthPreset::Sheared);
    let mut session =
        generate_single_point_session(&gt, &WorkspaceFrustum::hololens(), &NoiseModel::isotropic(1.0, 3), 20, 8)?;
    session.correspondences[4].p.x += 40.0;
    session.correspondences[4].p.z -= 30.0;
    let train = session.train();
    let test = session.test();

    let plain = estimate_affine(&train)?;
    println!("plain least squares: test mean {:.3} mm", reprojection_error(&plain, &test)?.mean);

    let fit = ransac_estimate(&train, ModelClass::Affine, &RansacConfig::default().with_seed(3))?;
    let rejected: Vec<usize> = (0..train.len()).filter(|&i| !fit.inlier_mask[i]).collect();
    println!(
        "ransac: {} inliers, rejected {rejected:?}, train rms {:.3} mm, test mean {:.3} mm",
        fit.inlier_count(),
        fit.train_residual.rms(),
        reprojection_error(&fit.transform, &test)?.mean
    );
    Ok(())
}
