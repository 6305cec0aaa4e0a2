//! Point-cloud files.
//!
//! CSV: a first line `dim=<d>`, then one point per line as `d`
//! comma-separated decimal numbers. Blank lines and lines starting with `#`
//! are skipped. Numbers are written in the shortest form that parses back
//! to the same `f64`.
//!
//! JSON: `{"schema_version": 1, "dim": d, "points": [[...], ...]}`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FlatnessError, Result};
use crate::geometry::PointCloud;

pub const POINT_CLOUD_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Json,
}

impl CloudFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => CloudFormat::Json,
            _ => CloudFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudDocument {
    pub schema_version: u32,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
}

fn parse_error(line: usize, message: impl Into<String>) -> FlatnessError {
    FlatnessError::Parse {
        line,
        message: message.into(),
    }
}

pub fn to_csv(cloud: &PointCloud) -> String {
    let mut out = format!("dim={}\n", cloud.dim());
    for p in cloud.points() {
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a string cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    w.write_all(to_csv(cloud).as_bytes())?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<PointCloud> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (k, line) in BufReader::new(r).lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(d) = dim else {
            let value = line
                .strip_prefix("dim=")
                .ok_or_else(|| parse_error(lineno, "expected header `dim=<d>`"))?;
            let d: usize = value
                .trim()
                .parse()
                .map_err(|_| parse_error(lineno, format!("invalid dimension `{value}`")))?;
            if d == 0 {
                return Err(parse_error(lineno, "dimension must be at least 1"));
            }
            dim = Some(d);
            continue;
        };
        let before = coords.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(lineno, format!("invalid number `{}`", field.trim())))?;
            if !v.is_finite() {
                return Err(parse_error(lineno, "non-finite coordinate"));
            }
            coords.push(v);
        }
        if coords.len() - before != d {
            return Err(parse_error(lineno, format!("expected {d} coordinates, found {}", coords.len() - before)));
        }
    }
    let dim = dim.ok_or_else(|| parse_error(1, "missing header `dim=<d>`"))?;
    PointCloud::from_flat(coords, dim)
}

pub fn to_json(cloud: &PointCloud) -> Result<String> {
    let doc = CloudDocument {
        schema_version: POINT_CLOUD_SCHEMA,
        dim: cloud.dim(),
        points: cloud.points().map(<[f64]>::to_vec).collect(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| FlatnessError::Io(e.to_string()))
}

pub fn read_json<R: Read>(r: R) -> Result<PointCloud> {
    let doc: CloudDocument = serde_json::from_reader(r).map_err(|e| parse_error(e.line(), e.to_string()))?;
    if doc.schema_version != POINT_CLOUD_SCHEMA {
        return Err(parse_error(1, format!("unsupported schema version {}", doc.schema_version)));
    }
    if let Some(p) = doc.points.iter().find(|p| p.len() != doc.dim) {
        return Err(FlatnessError::DimensionMismatch {
            expected: doc.dim,
            found: p.len(),
        });
    }
    PointCloud::from_flat(doc.points.concat(), doc.dim)
}

/// Reads a cloud, choosing the format from the extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let file = fs::File::open(path)?;
    match CloudFormat::from_path(path) {
        CloudFormat::Csv => read_csv(file),
        CloudFormat::Json => read_json(file),
    }
}

/// Writes a cloud, choosing the format from the extension.
pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let text = match CloudFormat::from_path(path) {
        CloudFormat::Csv => to_csv(cloud),
        CloudFormat::Json => to_json(cloud)? + "\n",
    };
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud {
        PointCloud::new(vec![vec![0.1, -2.5e-17], vec![1.0 / 3.0, 7.0], vec![-0.0, 1e300]]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = sample();
        let text = to_csv(&c);
        assert!(text.starts_with("dim=2\n"));
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.coords(), c.coords());
        assert_eq!(back.spacing(), c.spacing());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = sample();
        let back = read_json(to_json(&c).unwrap().as_bytes()).unwrap();
        assert_eq!(back.coords(), c.coords());
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = read_csv("dim=2\n0,0\n\n1,x\n".as_bytes()).unwrap_err();
        assert_eq!(err, parse_error(4, "invalid number `x`"));
        let err = read_csv("dim=2\n0,0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FlatnessError::Parse { line: 2, .. }));
        let err = read_csv("0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FlatnessError::Parse { line: 1, .. }));
        let err = read_csv("# note\ndim=1\n1\nnan\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FlatnessError::Parse { line: 4, .. }));
    }

    #[test]
    fn json_schema_is_checked() {
        let bad = r#"{"schema_version": 2, "dim": 1, "points": [[0.0]]}"#;
        assert!(read_json(bad.as_bytes()).is_err());
        let ragged = r#"{"schema_version": 1, "dim": 2, "points": [[0.0, 1.0], [2.0]]}"#;
        assert!(matches!(read_json(ragged.as_bytes()), Err(FlatnessError::DimensionMismatch { .. })));
    }
}
