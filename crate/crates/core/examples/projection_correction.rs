//! Fold a calibrated display transform into a rendering projection.

use bbcalib::estimators::ModelClass;
use bbcalib::geometry::{apply_to_projection, Point3, ProjectionMatrix3x4};
use bbcalib::io::{format_transform, parse_transform};
use bbcalib::simulator::{generate_single_point_session, GroundTruth, GroundTruthPreset, NoiseModel, WorkspaceFrustum};

fn main() -> bbcalib::Result<()> {
    let gt = GroundTruth::preset(GroundTruthPreset::Perspective);
    let session = generate_single_point_session(&gt, &WorkspaceFrustum::hololens(), &NoiseModel::none(2), 20, 0)?;
    let t = ModelClass::Perspective.estimate(&session.train())?;

    let text = format_transform(&t);
    print!("{text}");
    let t = parse_transform(&text)?;

    let p = apply_to_projection(&ProjectionMatrix3x4::canonical(), t.matrix())?;
    println!("corrected projection:\n{}", p.0);

    let x = Point3::new(10.0, -20.0, 450.0);
    let h = p.0 * x.to_homogeneous();
    let mapped = t.apply(&x)?;
    println!("image point {:.6} {:.6}", h.x / h.z, h.y / h.z);
    println!("via T       {:.6} {:.6}", mapped.x / mapped.z, mapped.y / mapped.z);
    Ok(())
}
