//! Delimited-text matrix and label files.
//!
//! A matrix file has a header `feature_id<TAB>sample_1<TAB>...` followed by one
//! line per feature. The delimiter (TAB or comma) is detected from the header.
//! Label and batch files hold two columns, `sample_id` and the label, and are
//! joined to matrices by sample id.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Detect from the header line: TAB if present, otherwise comma.
    #[default]
    Auto,
    Tab,
    Comma,
}

impl Delimiter {
    fn byte(self) -> Option<u8> {
        match self {
            Delimiter::Auto => None,
            Delimiter::Tab => Some(b'\t'),
            Delimiter::Comma => Some(b','),
        }
    }

    /// Concrete delimiter used when writing; `Auto` writes TAB.
    pub fn write_byte(self) -> u8 {
        self.byte().unwrap_or(b'\t')
    }

    fn detect(text: &str) -> u8 {
        let header = text.lines().next().unwrap_or("");
        if header.contains('\t') {
            b'\t'
        } else if header.contains(',') {
            b','
        } else {
            b'\t'
        }
    }
}

fn records(text: &str, delimiter: Delimiter) -> Result<Vec<(usize, csv::StringRecord)>> {
    let delim = delimiter.byte().unwrap_or_else(|| Delimiter::detect(text));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .delimiter(delim)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

/// Parses a matrix from text.
pub fn parse_matrix(text: &str, delimiter: Delimiter) -> Result<ExpressionMatrix> {
    let recs = records(text, delimiter)?;
    let mut iter = recs.into_iter();
    let (_, header) = iter.next().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let sample_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_owned()).collect();
    let n = sample_ids.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            column: 2,
            message: "header names no samples".into(),
        });
    }
    let mut feature_ids = Vec::new();
    let mut data = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, rec) in iter {
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                line,
                column: rec.len().min(n + 1),
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let id = rec[0].trim().to_owned();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("duplicate feature id {id:?} (first seen on line {first})"),
            });
        }
        for (col, cell) in rec.iter().enumerate().skip(1) {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: col + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(value);
        }
        feature_ids.push(id);
    }
    let m = feature_ids.len();
    if m == 0 {
        return Err(Error::Parse {
            line: 2,
            column: 1,
            message: "no feature rows".into(),
        });
    }
    ExpressionMatrix::new(DMatrix::from_row_slice(m, n, &data), feature_ids, sample_ids)
}

pub fn read_matrix(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_matrix(&text, delimiter).map_err(|e| e.in_file(path))
}

/// Writes a matrix in the same format `parse_matrix` reads. Values use the
/// shortest decimal form that parses back to the same `f64`.
pub fn write_matrix_to<W: Write>(
    out: W,
    matrix: &ExpressionMatrix,
    delimiter: Delimiter,
) -> Result<()> {
    let d = delimiter.write_byte() as char;
    let mut out = BufWriter::new(out);
    write!(out, "feature_id")?;
    for s in matrix.sample_ids() {
        write!(out, "{d}{s}")?;
    }
    writeln!(out)?;
    for (i, id) in matrix.feature_ids().iter().enumerate() {
        write!(out, "{id}")?;
        for v in matrix.values().row(i).iter() {
            write!(out, "{d}{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix(
    path: impl AsRef<Path>,
    matrix: &ExpressionMatrix,
    delimiter: Delimiter,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    write_matrix_to(file, matrix, delimiter)
}

/// `(sample_id, label)` pairs. A first line whose id is `sample_id` is
/// treated as a header.
pub fn parse_labels(text: &str, delimiter: Delimiter) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, (line, rec)) in records(text, delimiter)?.into_iter().enumerate() {
        if idx == 0 && rec.get(0).map(str::trim) == Some("sample_id") {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                column: rec.len().min(3),
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let id = rec[0].trim().to_owned();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("duplicate sample id {id:?} (first seen on line {first})"),
            });
        }
        out.push((id, rec[1].trim().to_owned()));
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_labels(&text, delimiter).map_err(|e| e.in_file(path))
}

/// Looks up the label of every sample id; all ids must be present.
pub fn join_labels(sample_ids: &[String], pairs: &[(String, String)]) -> Result<Vec<String>> {
    let map: HashMap<&str, &str> = pairs.iter().map(|(s, l)| (s.as_str(), l.as_str())).collect();
    let mut missing = Vec::new();
    let labels = sample_ids
        .iter()
        .map(|id| match map.get(id.as_str()) {
            Some(l) => (*l).to_owned(),
            None => {
                missing.push(id.clone());
                String::new()
            }
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidLabels(format!(
            "no label for sample(s): {}",
            missing.join(", ")
        )));
    }
    Ok(labels)
}

/// Writes `sample_id<d>column` followed by one line per sample.
pub fn write_labels(
    path: impl AsRef<Path>,
    column: &str,
    sample_ids: &[String],
    labels: &[String],
    delimiter: Delimiter,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut out = BufWriter::new(file);
    let d = delimiter.write_byte() as char;
    writeln!(out, "sample_id{d}{column}")?;
    for (s, l) in sample_ids.iter().zip(labels) {
        writeln!(out, "{s}{d}{l}")?;
    }
    out.flush()?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_string(&mut text))
        .map_err(|e| Error::from(e).in_file(path))?;
    Ok(text)
}
