//! Blackbox 3D-3D calibration of optical see-through head-mounted displays.
//!
//! A user aligns tracked real points `q` with virtual points `p` shown by the
//! display, and a single 4×4 transform `p = T(q)` is estimated as an
//! isometric, affine, or perspective map. That transform is then composed
//! with the display's own projection matrices (see
//! [`geometry::apply_to_projection`]).
//!
//! Modules:
//! - [`geometry`]: homogeneous matrices, quaternions, rigid poses
//! - [`estimators`]: the three estimators, RANSAC, pivot calibration
//! - [`metrics`]: reprojection statistics and pose/rotation errors
//! - [`simulator`]: synthetic sessions with known ground truth
//! - [`pipeline`]: calibrate-and-test, multipoint and double-cube workflows
//! - [`stream`]: UDP pose packets and latest-value store
//! - [`io`]: session, report and transform files
//! - [`cli`]: command implementations behind the `bbcalib` binary

pub mod cli;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod io;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod simulator;
pub mod stream;

pub use error::{Error, Result};
