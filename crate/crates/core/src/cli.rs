//! Command implementations behind the `bbcalib` binary.
//!
//! Exit codes:
//!
//! | code | meaning                                       |
//! |------|-----------------------------------------------|
//! | 0    | success                                       |
//! | 1    | I/O failure or unreadable input file          |
//! | 2    | bad flags or configuration                    |
//! | 3    | degenerate data (the message names the model) |
//! | 4    | double-cube evaluation without ground truth   |
//! | 5    | UDP port could not be bound                   |

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::estimators::{ModelClass, Phase, RansacConfig};
use crate::geometry::Point3;
use crate::io;
use crate::metrics::reprojection_error;
use crate::pipeline::{multipoint_session_with_test, run_double_cube_match, run_models, DoubleCubeSetup};
use crate::simulator::{
    generate_single_point_session, generate_world_anchored_session, Drift, GroundTruth, GroundTruthPreset,
    NoiseModel, WorkspaceFrustum, WorldChain,
};
use crate::stream::{self, Listener, PoseStore, StreamStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NO_GROUND_TRUTH: i32 = 4;
pub const EXIT_BIND: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "bbcalib", version, about = "3D-3D display calibration: simulate, calibrate, evaluate, stream")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session file.
    Simulate(SimulateArgs),
    /// Fit transforms to a session and report reprojection errors.
    Calibrate(CalibrateArgs),
    /// Evaluate a transform file against a session.
    Evaluate(EvaluateArgs),
    /// Record tracker poses from UDP or a replay file.
    Stream(StreamArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Head,
    World,
    Multipoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Rigid,
    Scale,
    Shear,
    Perspective,
}

impl From<PresetArg> for GroundTruthPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Rigid => GroundTruthPreset::Rigid,
            PresetArg::Scale => GroundTruthPreset::Scaled,
            PresetArg::Shear => GroundTruthPreset::Sheared,
            PresetArg::Perspective => GroundTruthPreset::Perspective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WorkspaceArg {
    Hololens,
    Moverio,
    World,
}

impl From<WorkspaceArg> for WorkspaceFrustum {
    fn from(w: WorkspaceArg) -> Self {
        match w {
            WorkspaceArg::Hololens => WorkspaceFrustum::hololens(),
            WorkspaceArg::Moverio => WorkspaceFrustum::moverio(),
            WorkspaceArg::World => WorkspaceFrustum::world_box(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    All,
    Isometric,
    Affine,
    Perspective,
}

impl ModelArg {
    fn models(self) -> Vec<ModelClass> {
        match self {
            ModelArg::All => ModelClass::ALL.to_vec(),
            ModelArg::Isometric => vec![ModelClass::Isometric],
            ModelArg::Affine => vec![ModelClass::Affine],
            ModelArg::Perspective => vec![ModelClass::Perspective],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Test,
    Doublecube,
}

/// Alignment noise flags shared by `simulate` and `evaluate`.
#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Per-point σ in the viewing plane, mm.
    #[arg(long)]
    pub noise_sigma_xy: Option<f64>,
    /// Per-point σ along the viewing direction, mm [default: 3 × xy].
    #[arg(long)]
    pub noise_sigma_z: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_probability: f64,
    #[arg(long, default_value_t = 50.0)]
    pub outlier_magnitude: f64,
    /// Shared rigid error per multipoint placement, mm.
    #[arg(long, default_value_t = 0.0)]
    pub pose_sigma: f64,
}

impl NoiseArgs {
    fn model(&self, default_xy: f64, seed: u64) -> NoiseModel {
        let xy = self.noise_sigma_xy.unwrap_or(default_xy);
        NoiseModel {
            sigma_xy: xy,
            sigma_z: self.noise_sigma_z.unwrap_or(3.0 * xy),
            outlier_probability: self.outlier_probability,
            outlier_magnitude: self.outlier_magnitude,
            multipoint_pose_sigma: self.pose_sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RansacArgs {
    /// Inlier distance, mm.
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    /// Required inlier fraction.
    #[arg(long, default_value_t = 0.5)]
    pub min_inliers: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Head)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = PresetArg::Rigid)]
    pub preset: PresetArg,
    /// Defaults to the world box for the world scenario, HoloLens otherwise.
    #[arg(long, value_enum)]
    pub workspace: Option<WorkspaceArg>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Head-pose drift per placement (world scenario), mm.
    #[arg(long, default_value_t = 0.0)]
    pub drift_mm: f64,
    /// Head-pose drift per placement (world scenario), mrad.
    #[arg(long, default_value_t = 0.0)]
    pub drift_mrad: f64,
    #[arg(long, default_value_t = 20)]
    pub n_train: usize,
    #[arg(long, default_value_t = 8)]
    pub n_test: usize,
    #[arg(long, env = "BBCALIB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Session file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::All)]
    pub model: ModelArg,
    #[command(flatten)]
    pub ransac: RansacArgs,
    #[arg(long, env = "BBCALIB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Receives report.csv and transform_<model>.txt.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub transform: PathBuf,
    /// Session file; doublecube mode needs its ground truth.
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Test)]
    pub mode: EvalMode,
    /// Residual alignment noise of the simulated user (doublecube).
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, env = "BBCALIB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    #[arg(long, default_value_t = stream::DEFAULT_PORT)]
    pub port: u16,
    /// Listening time, seconds (ignored with --replay).
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// Read packets from a file of 48-byte records instead of the network.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub marker: u32,
    /// Snapshot cadence of the recorded fragment, Hz.
    #[arg(long, default_value_t = 10.0)]
    pub sample_hz: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a command with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Parse { .. } | Error::BadLength(_) => EXIT_IO,
            Error::InvalidConfig(_) | Error::WorkspaceTooSmall(_) => EXIT_USAGE,
            _ => EXIT_DEGENERATE,
        };
        CliError::new(code, e.to_string())
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| {
        let mut c = CliError::from(e);
        c.message = format!("{}: {}", path.display(), c.message);
        c
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Messages go to stdout and errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Runs a parsed command; returns the summary lines it would print.
pub fn execute(cmd: &Command) -> Result<Vec<String>, CliError> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Stream(a) => cmd_stream(a),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Vec<String>, CliError> {
    let gt = GroundTruth::preset(a.preset.into());
    let nm = a.noise.model(1.0, a.seed);
    let session = match a.scenario {
        ScenarioArg::Head => {
            let ws = a.workspace.unwrap_or(WorkspaceArg::Hololens).into();
            generate_single_point_session(&gt, &ws, &nm, a.n_train, a.n_test)?
        }
        ScenarioArg::World => {
            let ws = a.workspace.unwrap_or(WorkspaceArg::World).into();
            let gt = gt.with_drift(Drift {
                translation_mm: a.drift_mm,
                rotation_mrad: a.drift_mrad,
            });
            generate_world_anchored_session(&gt, &WorldChain::facing_rig(), &ws, &nm, a.n_train, a.n_test)?
        }
        ScenarioArg::Multipoint => {
            let ws = a.workspace.unwrap_or(WorkspaceArg::Hololens).into();
            multipoint_session_with_test(&gt, &ws, &nm, a.n_test)?
        }
    };
    io::write_session(&a.out, &io::SessionData::from_session(&session)).map_err(with_path(&a.out))?;
    Ok(vec![format!(
        "wrote {} train + {} test rows to {}",
        session.train().len(),
        session.test().len(),
        a.out.display()
    )])
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<Vec<String>, CliError> {
    let session = io::read_session(&a.input)
        .and_then(|d| d.into_session())
        .map_err(with_path(&a.input))?;
    let cfg = RansacConfig {
        inlier_threshold: a.ransac.threshold,
        max_iterations: a.ransac.iterations,
        min_inlier_fraction: a.ransac.min_inliers,
        seed: a.seed,
    };
    let report = run_models(&session, &cfg, &a.model.models())?;
    if let Some((model, e)) = report.first_failure() {
        let mut err = CliError::from(e.clone());
        err.message = format!("{model} calibration failed: {}", err.message);
        return Err(err);
    }
    let report_path = a.out_dir.join("report.csv");
    io::write_atomic(&report_path, io::format_report(&report).as_bytes()).map_err(with_path(&report_path))?;
    let mut lines = vec![format!("report: {}", report_path.display())];
    for (model, r) in &report.models {
        let r = r.as_ref().expect("failures returned above");
        let path = a.out_dir.join(format!("transform_{model}.txt"));
        io::write_atomic(&path, io::format_transform(&r.transform).as_bytes()).map_err(with_path(&path))?;
        lines.push(format!(
            "{model:<11} train {:.3} ± {:.3} mm  test {:.3} ± {:.3} mm  inliers {}/{}  -> {}",
            r.train.mean,
            r.train.std,
            r.test.mean,
            r.test.std,
            r.inliers,
            report.n_train,
            path.display()
        ));
    }
    Ok(lines)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<Vec<String>, CliError> {
    let transform = io::read_transform(&a.transform).map_err(with_path(&a.transform))?;
    let data = io::read_session(&a.session).map_err(with_path(&a.session))?;
    let (csv, summary) = match a.mode {
        EvalMode::Test => {
            let test: Vec<_> = data.correspondences.iter().filter(|c| c.phase == Phase::Test).copied().collect();
            if test.is_empty() {
                return Err(CliError::new(EXIT_USAGE, format!("{}: no test rows", a.session.display())));
            }
            let stats = reprojection_error(&transform, &test)?;
            let csv = format!("{}\n{}\n", io::REPORT_HEADER, io::report_row(transform.model(), Phase::Test, &stats, None));
            let summary = format!(
                "{} test error {:.3} ± {:.3} mm over {} points",
                transform.model(),
                stats.mean,
                stats.std,
                stats.n
            );
            (csv, summary)
        }
        EvalMode::Doublecube => {
            let gt = data.ground_truth().map_err(with_path(&a.session))?.ok_or_else(|| {
                CliError::new(
                    EXIT_NO_GROUND_TRUTH,
                    format!("{}: doublecube evaluation needs a ground-truth (gt,) line", a.session.display()),
                )
            })?;
            let nm = a.noise.model(0.0, a.seed);
            let report = run_double_cube_match(&transform, &gt, &DoubleCubeSetup::default(), &nm)?;
            let summary = format!(
                "mean displacement {:.3} mm, rotation {}",
                report.mean_displacement, report.average_rotation
            );
            (io::format_double_cube(&report), summary)
        }
    };
    match &a.out {
        Some(path) => {
            io::write_atomic(path, csv.as_bytes()).map_err(with_path(path))?;
            Ok(vec![summary])
        }
        None => Ok(vec![csv.trim_end().to_string(), summary]),
    }
}

fn stats_line(s: &StreamStats) -> String {
    format!(
        "packets {} accepted {} stale {} malformed {} dropped {} rate {:.1} Hz",
        s.received,
        s.accepted,
        s.stale,
        s.malformed,
        s.dropped(),
        s.rate_hz()
    )
}

pub fn cmd_stream(a: &StreamArgs) -> Result<Vec<String>, CliError> {
    if !(a.sample_hz > 0.0 && a.sample_hz.is_finite()) {
        return Err(CliError::new(EXIT_USAGE, "--sample-hz must be positive"));
    }
    let period_us = (1e6 / a.sample_hz).round().max(1.0) as u64;
    let (rows, stats) = match &a.replay {
        Some(path) => {
            let packets = stream::read_replay(path).map_err(with_path(path))?;
            replay_session(&packets, a.marker, period_us)
        }
        None => {
            if !(a.duration >= 0.0 && a.duration.is_finite()) {
                return Err(CliError::new(EXIT_USAGE, "--duration must be non-negative"));
            }
            let store = Arc::new(PoseStore::new());
            let listener = Listener::bind(("0.0.0.0", a.port), Arc::clone(&store))
                .map_err(|e| CliError::new(EXIT_BIND, format!("cannot bind UDP port {}: {e}", a.port)))?;
            let rows = sample_live(&store, a.marker, Duration::from_micros(period_us), Duration::from_secs_f64(a.duration));
            (rows, listener.shutdown())
        }
    };
    io::write_atomic(&a.out, io::format_fragment(&rows).as_bytes()).map_err(with_path(&a.out))?;
    Ok(vec![
        stats_line(&stats),
        format!("wrote {} samples of marker {} to {}", rows.len(), a.marker, a.out.display()),
    ])
}

/// Feeds recorded packets through a store on their own clock and samples
/// the marker every `period_us` of packet time.
pub fn replay_session(packets: &[[u8; stream::PACKET_LEN]], marker: u32, period_us: u64) -> (Vec<(u32, Point3)>, StreamStats) {
    let store = PoseStore::new();
    let mut rows = Vec::new();
    let mut next_sample: Option<u64> = None;
    let mut last_sampled = None;
    for pkt in packets {
        let now = stream::packet_timestamp(pkt);
        let _ = store.ingest(pkt, now);
        let Some((pose, _)) = store.latest(marker, now) else { continue };
        let due = *next_sample.get_or_insert(pose.timestamp_us);
        if now >= due && last_sampled != Some(pose.timestamp_us) {
            rows.push((rows.len() as u32, Point3::from(pose.pose.translation)));
            last_sampled = Some(pose.timestamp_us);
            next_sample = Some(due + period_us * ((now - due) / period_us + 1));
        }
    }
    (rows, store.stats())
}

fn sample_live(store: &PoseStore, marker: u32, period: Duration, duration: Duration) -> Vec<(u32, Point3)> {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut last = None;
    let mut tick = 0u32;
    while start.elapsed() < duration {
        if let Some((pose, _)) = store.latest(marker, store.now_us()) {
            if last != Some(pose.timestamp_us) {
                rows.push((rows.len() as u32, Point3::from(pose.pose.translation)));
                last = Some(pose.timestamp_us);
            }
        }
        tick += 1;
        let due = start + period * tick;
        let now = Instant::now();
        if due > now {
            thread::sleep((due - now).min(duration.saturating_sub(start.elapsed())));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsing() {
        let cli = Cli::try_parse_from(["bbcalib", "simulate", "--scenario", "multipoint", "--out", "x.csv"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.scenario, ScenarioArg::Multipoint);
        let nm = a.noise.model(1.0, 3);
        assert_eq!((nm.sigma_xy, nm.sigma_z, nm.seed), (1.0, 3.0, 3));
        assert!(Cli::try_parse_from(["bbcalib", "simulate", "--scenario", "moon", "--out", "x"]).is_err());
        assert_eq!(run(["bbcalib", "calibrate"]), EXIT_USAGE);
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Io("x".into())).code, EXIT_IO);
        assert_eq!(CliError::from(Error::InvalidConfig("x".into())).code, EXIT_USAGE);
        let degenerate = Error::DegenerateConfiguration {
            model: ModelClass::Affine,
            reason: "coplanar".into(),
        };
        assert_eq!(CliError::from(degenerate).code, EXIT_DEGENERATE);
    }

    #[test]
    fn replay_sampling_and_reordering() {
        let mut pkts = stream::synthetic_track(0, 300, 300.0);
        // 1 s at 300 Hz sampled at 10 Hz.
        let (rows, stats) = replay_session(&pkts, 0, 100_000);
        assert_eq!(rows.len(), 10);
        assert_eq!((stats.accepted, stats.dropped()), (300, 0));
        assert!(stats.rate_hz() >= 300.0);
        pkts.swap(10, 11);
        pkts.swap(50, 51);
        let (_, stats) = replay_session(&pkts, 0, 100_000);
        assert_eq!(stats.stale, 2);
        let (rows, stats) = replay_session(&[], 0, 100_000);
        assert!(rows.is_empty());
        assert_eq!(stats.rate_hz(), 0.0);
    }
}
