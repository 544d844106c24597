//! Text formats: session CSV, report CSV and transform files.
//!
//! Session file:
//!
//! ```text
//! version,1
//! index,phase,pose_id,corner_id,qx,qy,qz,px,py,pz
//! 0,train,0,0,12.5,-3.25,441.75,24.1,-28.5,450.125
//! ...
//! gt,<16 row-major entries>
//! ```
//!
//! Coordinates carry 9 significant digits; the optional `gt,` line carries
//! 17 so the ground truth round-trips exactly. A stream fragment leaves
//! `px,py,pz` empty.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::{ModelClass, Phase, PointCorrespondence, Transform};
use crate::geometry::{HomogeneousMatrix, Point3};
use crate::metrics::ErrorStats;
use crate::pipeline::{CalibrationReport, DoubleCubeReport};
use crate::simulator::{CalibrationSession, GroundTruth, NoiseModel, WorkspaceFrustum, CUBE_EDGE_MM};

pub const SESSION_VERSION: &str = "version,1";
pub const SESSION_HEADER: &str = "index,phase,pose_id,corner_id,qx,qy,qz,px,py,pz";
pub const REPORT_HEADER: &str = "model,phase,n,mean_mm,std_mm,x_mean,x_std,y_mean,y_std,z_mean,z_std,inliers";
pub const DOUBLECUBE_HEADER: &str = "placement,disp_mm,qw,qx,qy,qz";

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parsed session file.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub correspondences: Vec<PointCorrespondence>,
    pub ground_truth: Option<HomogeneousMatrix>,
}

impl SessionData {
    pub fn from_session(s: &CalibrationSession) -> Self {
        Self {
            correspondences: s.correspondences.clone(),
            ground_truth: s.ground_truth.map(|g| *g.transform.matrix()),
        }
    }

    /// Ground truth as the tightest model class that holds it.
    pub fn ground_truth(&self) -> Result<Option<GroundTruth>> {
        self.ground_truth
            .map(|m| GroundTruth::head_anchored(Transform::infer(m)?))
            .transpose()
    }

    /// A session with default workspace and noise metadata, which the
    /// file does not record.
    pub fn into_session(self) -> Result<CalibrationSession> {
        let ground_truth = self.ground_truth()?;
        Ok(CalibrationSession {
            correspondences: self.correspondences,
            cube_edge: CUBE_EDGE_MM,
            ground_truth,
            workspace: WorkspaceFrustum::default(),
            noise: NoiseModel::default(),
        })
    }
}

pub fn format_session(data: &SessionData) -> String {
    let mut out = String::new();
    writeln!(out, "{SESSION_VERSION}\n{SESSION_HEADER}").unwrap();
    for (i, c) in data.correspondences.iter().enumerate() {
        write!(out, "{i},{},{},{}", c.phase, c.pose_id, c.corner_id).unwrap();
        for v in c.q.iter().chain(c.p.iter()) {
            write!(out, ",{}", format_sig(*v, 9)).unwrap();
        }
        out.push('\n');
    }
    if let Some(gt) = &data.ground_truth {
        out.push_str("gt");
        for v in gt.to_row_array() {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Tracker-side rows with the display columns left empty.
pub fn format_fragment(rows: &[(u32, Point3)]) -> String {
    let mut out = format!("{SESSION_VERSION}\n{SESSION_HEADER}\n");
    for (i, (pose_id, q)) in rows.iter().enumerate() {
        write!(out, "{i},train,{pose_id},0").unwrap();
        for v in q.iter() {
            write!(out, ",{}", format_sig(*v, 9)).unwrap();
        }
        out.push_str(",,,\n");
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| parse_err(line, format!("bad {what} {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("non-finite {what}")))
    }
}

struct Row {
    phase: Phase,
    pose_id: u32,
    corner_id: u8,
    q: Point3,
    p: Option<Point3>,
}

fn parse_lines(text: &str) -> Result<(Vec<Row>, Option<HomogeneousMatrix>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, SESSION_VERSION)) => {}
        Some((n, other)) => return Err(parse_err(n, format!("expected {SESSION_VERSION:?}, found {other:?}"))),
        None => return Err(parse_err(1, "empty file")),
    }
    match lines.next() {
        Some((_, SESSION_HEADER)) => {}
        Some((n, other)) => return Err(parse_err(n, format!("unexpected header {other:?}"))),
        None => return Err(parse_err(2, "missing header")),
    }
    let mut rows = Vec::new();
    let mut gt = None;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "gt" {
            if gt.is_some() {
                return Err(parse_err(n, "duplicate gt line"));
            }
            if fields.len() != 17 {
                return Err(parse_err(n, format!("gt needs 16 entries, found {}", fields.len() - 1)));
            }
            let mut e = [0.0; 16];
            for (k, f) in fields[1..].iter().enumerate() {
                e[k] = parse_f64(f, n, "gt entry")?;
            }
            gt = Some(HomogeneousMatrix::from_row_slice(&e));
            continue;
        }
        if gt.is_some() {
            return Err(parse_err(n, "rows after the gt line"));
        }
        if fields.len() != 10 {
            return Err(parse_err(n, format!("expected 10 fields, found {}", fields.len())));
        }
        let index: usize = fields[0].parse().map_err(|_| parse_err(n, format!("bad index {:?}", fields[0])))?;
        if index != rows.len() {
            return Err(parse_err(n, format!("index {index} out of sequence")));
        }
        let phase: Phase = fields[1].parse().map_err(|e: String| parse_err(n, e))?;
        let pose_id = fields[2].parse().map_err(|_| parse_err(n, format!("bad pose_id {:?}", fields[2])))?;
        let corner_id: u8 = fields[3].parse().map_err(|_| parse_err(n, format!("bad corner_id {:?}", fields[3])))?;
        if corner_id > 4 {
            return Err(parse_err(n, format!("corner_id {corner_id} outside 0..=4")));
        }
        let coord = |k: usize, what: &str| parse_f64(fields[k], n, what);
        let q = Point3::new(coord(4, "qx")?, coord(5, "qy")?, coord(6, "qz")?);
        let p = if fields[7..].iter().all(|f| f.trim().is_empty()) {
            None
        } else {
            Some(Point3::new(coord(7, "px")?, coord(8, "py")?, coord(9, "pz")?))
        };
        rows.push(Row {
            phase,
            pose_id,
            corner_id,
            q,
            p,
        });
    }
    Ok((rows, gt))
}

pub fn parse_session(text: &str) -> Result<SessionData> {
    let (rows, ground_truth) = parse_lines(text)?;
    let correspondences = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let p = r.p.ok_or_else(|| parse_err(i + 3, "row has no display point (stream fragment?)"))?;
            Ok(PointCorrespondence::new(r.q, p)
                .with_phase(r.phase)
                .with_ids(r.pose_id, r.corner_id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SessionData {
        correspondences,
        ground_truth,
    })
}

/// Tracker-side points of a stream fragment, with their pose ids.
pub fn parse_fragment(text: &str) -> Result<Vec<(u32, Point3)>> {
    Ok(parse_lines(text)?.0.into_iter().map(|r| (r.pose_id, r.q)).collect())
}

pub fn read_session(path: &Path) -> Result<SessionData> {
    parse_session(&fs::read_to_string(path)?)
}

pub fn write_session(path: &Path, data: &SessionData) -> Result<()> {
    write_atomic(path, format_session(data).as_bytes())
}

/// Report row for one model and phase.
pub fn report_row(model: ModelClass, phase: Phase, s: &ErrorStats, inliers: Option<usize>) -> String {
    let mut row = format!("{model},{phase},{},{:.3},{:.3}", s.n, s.mean, s.std);
    for a in &s.per_axis {
        write!(row, ",{:.3},{:.3}", a.mean, a.std).unwrap();
    }
    match inliers {
        Some(k) => write!(row, ",{k}").unwrap(),
        None => row.push(','),
    }
    row
}

/// Report CSV with a train and a test row per fitted model.
pub fn format_report(report: &CalibrationReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for model in report.models.keys() {
        if let Some(m) = report.get(*model) {
            writeln!(out, "{}", report_row(*model, Phase::Train, &m.train, Some(m.inliers))).unwrap();
            writeln!(out, "{}", report_row(*model, Phase::Test, &m.test, Some(m.inliers))).unwrap();
        }
    }
    out
}

/// Per-placement rows and a final `mean` row; the quaternion columns use
/// the same three-decimal truncation as the `(w, x, y, z)` summary.
pub fn format_double_cube(report: &DoubleCubeReport) -> String {
    let mut out = format!("{DOUBLECUBE_HEADER}\n");
    let quat = |q: &crate::geometry::UnitQuaternion| {
        let s = q.to_string();
        s.trim_matches(|c| c == '(' || c == ')').replace(", ", ",")
    };
    for (i, e) in report.placements.iter().enumerate() {
        writeln!(out, "{i},{:.3},{}", e.displacement, quat(&e.rotation)).unwrap();
    }
    writeln!(out, "mean,{:.3},{}", report.mean_displacement, quat(&report.average_rotation)).unwrap();
    out
}

/// `model,<name>` then four rows of the matrix at 17 significant digits.
pub fn format_transform(t: &Transform) -> String {
    let mut out = format!("model,{}\n", t.model());
    let e = t.matrix().to_row_array();
    for r in 0..4 {
        let row: Vec<String> = e[4 * r..4 * r + 4].iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

pub fn parse_transform(text: &str) -> Result<Transform> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (n, first) = lines.next().ok_or_else(|| parse_err(1, "empty transform file"))?;
    let model: ModelClass = first
        .strip_prefix("model,")
        .ok_or_else(|| parse_err(n, "expected model,<name>"))?
        .parse()
        .map_err(|e: String| parse_err(n, e))?;
    let mut e = Vec::with_capacity(16);
    for (n, line) in lines {
        for f in line.split(',') {
            e.push(parse_f64(f, n, "matrix entry")?);
        }
    }
    let e: [f64; 16] = e
        .try_into()
        .map_err(|v: Vec<f64>| parse_err(0, format!("expected 16 matrix entries, found {}", v.len())))?;
    Transform::new(HomogeneousMatrix::from_row_slice(&e), model)
}

pub fn read_transform(path: &Path) -> Result<Transform> {
    parse_transform(&fs::read_to_string(path)?)
}
