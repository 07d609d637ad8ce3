//! HURDAT2 ingestion, lat/lon → S² conversion, uniform-arclength
//! resampling of track polygons, and curve/matrix file formats.
//!
//! All file formats are concrete f64: JSON and CSV carry double-precision
//! numbers, so genericity over the scalar stops at this boundary.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{Read as _, Write as _};
use std::path::Path;
use thiserror::Error;

use crate::homogeneous::SphereCurve;
use crate::lie_group::RotationMatrix;
use crate::srv_core::GroupCurve;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("line {line}: malformed header: {message}")]
    MalformedHeader { line: usize, message: String },
    #[error("line {line}: malformed fix: {message}")]
    MalformedFix { line: usize, message: String },
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside (-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("track {0} has fewer than 2 distinct fixes")]
    DegenerateTrack(String),
    #[error("adjacent antipodal points at index {0}")]
    AntipodalPoints(usize),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Homogeneous(#[from] crate::homogeneous::HomogeneousError),
}

pub type Result<V> = std::result::Result<V, DataIoError>;

/// One best-track fix: timestamp (YYYYMMDDHHMM as an integer), latitude
/// (degrees, north positive) and longitude (degrees, east positive).
#[derive(Debug, Clone, PartialEq)]
pub struct Fix {
    pub timestamp: u64,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone)]
pub struct HurricaneTrack {
    /// Basin + cyclone number + year, e.g. "AL092011".
    pub id: String,
    pub name: String,
    pub fixes: Vec<Fix>,
}

/// Parsed tracks plus non-fatal findings (count mismatches, skipped
/// out-of-order fixes, short tracks), each tagged with a line number.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub tracks: Vec<HurricaneTrack>,
    pub warnings: Vec<String>,
}

fn parse_signed_coordinate(
    field: &str,
    positive: char,
    negative: char,
    line: usize,
) -> Result<f64> {
    let field = field.trim();
    let (digits, sign) = match field.chars().last() {
        Some(c) if c == positive => (&field[..field.len() - 1], 1.0),
        Some(c) if c == negative => (&field[..field.len() - 1], -1.0),
        _ => {
            return Err(DataIoError::MalformedFix {
                line,
                message: format!("coordinate {field:?} lacks a {positive}/{negative} suffix"),
            })
        }
    };
    let value: f64 = digits.trim().parse().map_err(|_| DataIoError::MalformedFix {
        line,
        message: format!("unparseable coordinate {field:?}"),
    })?;
    Ok(sign * value)
}

/// Parses the HURDAT2 best-track format: a header line
/// `ID, NAME, COUNT,` followed by COUNT comma-separated fix lines with
/// date, time, record identifier, status, latitude (N/S suffix) and
/// longitude (E/W suffix). Fields are trimmed; intensity fields ignored.
/// Count mismatches and non-increasing timestamps are warnings, not
/// errors: what exists is parsed and the finding is reported.
pub fn parse_hurdat2(text: &str) -> Result<ParseOutcome> {
    let mut tracks = Vec::new();
    let mut warnings = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((idx, raw)) = lines.next() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(DataIoError::MalformedHeader {
                line: line_no,
                message: format!("expected `id, name, count,`, got {line:?}"),
            });
        }
        let id = fields[0].to_string();
        if id.len() < 4 || !id[..2].chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(DataIoError::MalformedHeader {
                line: line_no,
                message: format!("bad basin/cyclone identifier {id:?}"),
            });
        }
        let name = fields[1].to_string();
        let advertised: usize = fields[2].parse().map_err(|_| DataIoError::MalformedHeader {
            line: line_no,
            message: format!("bad row count {:?}", fields[2]),
        })?;
        let mut fixes: Vec<Fix> = Vec::with_capacity(advertised);
        let mut rows = 0usize;
        while rows < advertised {
            // a new header (alphabetic first field) ends this record early
            let Some(&(next_idx, next_raw)) = lines.peek() else { break };
            let next = next_raw.trim();
            if next.is_empty() {
                lines.next();
                continue;
            }
            if next.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                break;
            }
            lines.next();
            rows += 1;
            let fix_line = next_idx + 1;
            let f: Vec<&str> = next.split(',').map(str::trim).collect();
            if f.len() < 6 {
                return Err(DataIoError::MalformedFix {
                    line: fix_line,
                    message: format!("expected at least 6 fields, got {}", f.len()),
                });
            }
            let date: u64 = f[0].parse().map_err(|_| DataIoError::MalformedFix {
                line: fix_line,
                message: format!("bad date {:?}", f[0]),
            })?;
            let time: u64 = f[1].parse().map_err(|_| DataIoError::MalformedFix {
                line: fix_line,
                message: format!("bad time {:?}", f[1]),
            })?;
            let timestamp = date * 10_000 + time;
            let latitude = parse_signed_coordinate(f[4], 'N', 'S', fix_line)?;
            let longitude = parse_signed_coordinate(f[5], 'E', 'W', fix_line)?;
            if !(-90.0..=90.0).contains(&latitude) {
                return Err(DataIoError::MalformedFix {
                    line: fix_line,
                    message: format!("latitude {latitude} out of range"),
                });
            }
            if !(-180.0..=180.0).contains(&longitude) {
                return Err(DataIoError::MalformedFix {
                    line: fix_line,
                    message: format!("longitude {longitude} out of range"),
                });
            }
            if fixes.last().is_some_and(|prev: &Fix| prev.timestamp >= timestamp) {
                warnings.push(format!(
                    "line {fix_line}: track {id}: non-increasing timestamp {timestamp}, fix skipped"
                ));
                continue;
            }
            fixes.push(Fix { timestamp, latitude, longitude });
        }
        if rows != advertised {
            warnings.push(format!(
                "line {line_no}: track {id} advertised {advertised} rows, found {rows}"
            ));
        }
        if fixes.len() < 2 {
            warnings.push(format!("line {line_no}: track {id} has fewer than 2 usable fixes"));
        }
        tracks.push(HurricaneTrack { id, name, fixes });
    }
    Ok(ParseOutcome { tracks, warnings })
}

/// (cos φ cos λ, cos φ sin λ, sin φ) for latitude φ, longitude λ in
/// degrees.
pub fn latlon_to_s2(lat: f64, lon: f64) -> Result<DVector<f64>> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(DataIoError::LatitudeOutOfRange(lat));
    }
    if lon <= -180.0 || lon > 180.0 {
        return Err(DataIoError::LongitudeOutOfRange(lon));
    }
    let (phi, lam) = (lat.to_radians(), lon.to_radians());
    Ok(DVector::from_vec(vec![
        phi.cos() * lam.cos(),
        phi.cos() * lam.sin(),
        phi.sin(),
    ]))
}

/// A resampled track; `degenerate` is set when the polygon had zero total
/// length and a constant curve was returned.
#[derive(Debug, Clone)]
pub struct Resampled {
    pub curve: SphereCurve<f64>,
    pub degenerate: bool,
}

fn angle_between(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    p.dot(q).clamp(-1.0, 1.0).acos()
}

/// Total great-circle arclength of a polygon (summed segment angles).
pub fn polygon_arclength(points: &[DVector<f64>]) -> f64 {
    points.windows(2).map(|w| angle_between(&w[0], &w[1])).sum()
}

/// Resamples a piecewise-great-circle polygon to T+1 points uniform in
/// arclength measured along the polygon. Endpoints are preserved exactly
/// and interior samples lie on the original path, so the along-path span
/// is preserved exactly; the resampled polygon's own chordal length can
/// shrink at corners by O(L/T) per corner, which is a property of any
/// fixed-count corner-free resampling, not an implementation defect.
pub fn resample_geodesic(points: &[DVector<f64>], t: usize) -> Result<Resampled> {
    assert!(points.len() >= 2 && t >= 1, "need at least two points and one interval");
    let unit: Vec<DVector<f64>> = points.iter().map(|p| p / p.norm()).collect();
    let mut seg_len = Vec::with_capacity(unit.len() - 1);
    for (i, w) in unit.windows(2).enumerate() {
        if 1.0 + w[0].dot(&w[1]) <= 1e-12 {
            return Err(DataIoError::AntipodalPoints(i));
        }
        seg_len.push(angle_between(&w[0], &w[1]));
    }
    let total: f64 = seg_len.iter().sum();
    if total < 1e-14 {
        let curve = SphereCurve::new(vec![unit[0].clone(); t + 1])?;
        return Ok(Resampled { curve, degenerate: true });
    }
    let mut samples = Vec::with_capacity(t + 1);
    samples.push(unit[0].clone());
    let mut seg = 0usize;
    let mut consumed = 0.0; // arclength before the current segment
    for k in 1..t {
        let target = total * k as f64 / t as f64;
        while seg + 1 < seg_len.len() && consumed + seg_len[seg] <= target {
            consumed += seg_len[seg];
            seg += 1;
        }
        let local = if seg_len[seg] > 0.0 { (target - consumed) / seg_len[seg] } else { 0.0 };
        // snap to vertices so already-uniform inputs round-trip exactly
        if local.abs() < 1e-12 {
            samples.push(unit[seg].clone());
        } else if (1.0 - local).abs() < 1e-12 {
            samples.push(unit[seg + 1].clone());
        } else {
            samples.push(crate::homogeneous::slerp(&unit[seg], &unit[seg + 1], local));
        }
    }
    samples.push(unit.last().unwrap().clone());
    Ok(Resampled { curve: SphereCurve::new(samples)?, degenerate: false })
}

/// Converts a parsed track to a resampled S² curve. Consecutive repeated
/// positions are collapsed first; tracks without two distinct positions
/// are rejected by name.
pub fn track_to_curve(track: &HurricaneTrack, t: usize) -> Result<Resampled> {
    let mut points: Vec<DVector<f64>> = Vec::with_capacity(track.fixes.len());
    for fix in &track.fixes {
        let p = latlon_to_s2(fix.latitude, fix.longitude)?;
        if points.last().is_none_or(|prev| (prev - &p).norm() > 1e-14) {
            points.push(p);
        }
    }
    if points.len() < 2 {
        return Err(DataIoError::DegenerateTrack(track.id.clone()));
    }
    resample_geodesic(&points, t)
}

/// On-disk curve schema: {"manifold", "metadata", "samples"}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFile {
    pub manifold: String,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
    pub samples: Vec<Vec<f64>>,
}

/// A curve loaded from disk, dispatched on the manifold tag.
#[derive(Debug, Clone)]
pub enum LoadedCurve {
    Sphere(SphereCurve<f64>),
    Group(GroupCurve<f64>),
}

fn schema_violation(path: impl Into<String>, message: impl Into<String>) -> DataIoError {
    DataIoError::SchemaViolation { path: path.into(), message: message.into() }
}

impl CurveFile {
    pub fn from_sphere_curve(curve: &SphereCurve<f64>) -> Self {
        Self {
            manifold: "S2".to_string(),
            metadata: serde_json::Map::new(),
            samples: curve.samples().iter().map(|s| s.iter().copied().collect()).collect(),
        }
    }

    pub fn from_group_curve(curve: &GroupCurve<f64>) -> Self {
        Self {
            manifold: "SO3".to_string(),
            metadata: serde_json::Map::new(),
            samples: curve
                .samples()
                .iter()
                .map(|r| r.matrix().transpose().as_slice().to_vec()) // row-major
                .collect(),
        }
    }

    /// Validates the samples against the manifold tag's invariants.
    pub fn into_curve(self) -> Result<LoadedCurve> {
        if self.samples.len() < 2 {
            return Err(schema_violation("samples", "need at least two samples"));
        }
        match self.manifold.as_str() {
            "S2" => {
                let mut out = Vec::with_capacity(self.samples.len());
                for (i, s) in self.samples.iter().enumerate() {
                    if s.len() != 3 {
                        return Err(schema_violation(
                            format!("samples[{i}]"),
                            format!("expected 3 coordinates, got {}", s.len()),
                        ));
                    }
                    out.push(DVector::from_vec(s.clone()));
                }
                let curve = SphereCurve::new(out).map_err(|e| {
                    schema_violation("samples", format!("invalid sphere samples: {e}"))
                })?;
                Ok(LoadedCurve::Sphere(curve))
            }
            "SO3" => {
                let mut out = Vec::with_capacity(self.samples.len());
                for (i, s) in self.samples.iter().enumerate() {
                    if s.len() != 9 {
                        return Err(schema_violation(
                            format!("samples[{i}]"),
                            format!("expected 9 row-major entries, got {}", s.len()),
                        ));
                    }
                    let m = DMatrix::from_row_slice(3, 3, s);
                    let r = RotationMatrix::from_matrix(m).map_err(|e| {
                        schema_violation(format!("samples[{i}]"), format!("not a rotation: {e}"))
                    })?;
                    out.push(r);
                }
                Ok(LoadedCurve::Group(GroupCurve::new(out)))
            }
            other => Err(schema_violation("manifold", format!("unknown tag {other:?}"))),
        }
    }
}

pub fn read_curve(path: &Path) -> Result<LoadedCurve> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    let file: CurveFile = serde_json::from_str(&text)
        .map_err(|e| schema_violation(e.to_string(), "invalid curve JSON"))?;
    file.into_curve()
}

/// Reads a curve and requires the S² variant.
pub fn read_sphere_curve(path: &Path) -> Result<SphereCurve<f64>> {
    match read_curve(path)? {
        LoadedCurve::Sphere(c) => Ok(c),
        LoadedCurve::Group(_) => Err(schema_violation("manifold", "expected an S2 curve")),
    }
}

pub fn write_curve_file(file: &CurveFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(file).expect("curve files serialize");
    std::fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_sphere_curve(curve: &SphereCurve<f64>, path: &Path) -> Result<()> {
    write_curve_file(&CurveFile::from_sphere_curve(curve), path)
}

pub fn write_group_curve(curve: &GroupCurve<f64>, path: &Path) -> Result<()> {
    write_curve_file(&CurveFile::from_group_curve(curve), path)
}

/// Distance matrix CSV: header row of curve identifiers, then one
/// row-major line per curve, entries in full-precision scientific
/// notation.
pub fn write_distance_matrix_csv(
    ids: &[String],
    matrix: &DMatrix<f64>,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ids)?;
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols()).map(|j| format!("{:e}", matrix[(i, j)])).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_distance_matrix_csv`].
pub fn read_distance_matrix_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let ids: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = ids.len();
    let mut data = DMatrix::zeros(n, n);
    for (i, record) in r.records().enumerate() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            data[(i, j)] = field.parse().map_err(|_| {
                schema_violation(format!("row {i} col {j}"), format!("bad number {field:?}"))
            })?;
        }
    }
    Ok((ids, data))
}

/// MDS coordinates CSV: header `id,x1,..,xd`, one row per point.
pub fn write_mds_csv(ids: &[String], coords: &[DVector<f64>], path: &Path) -> Result<()> {
    let dims = coords.first().map_or(0, |c| c.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=dims).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (id, c) in ids.iter().zip(coords) {
        let mut row = vec![id.clone()];
        row.extend(c.iter().map(|x| format!("{x:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
