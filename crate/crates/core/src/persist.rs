//! Versioned JSON container shared by every saved model.
//!
//! ```json
//! { "format": "fsva-model", "version": 1, "kind": "frozen-sva", "payload": { ... } }
//! ```
//!
//! Matrices are stored as `{ "rows", "cols", "data" }` with `data` in
//! row-major order. Floats are 64-bit and written in shortest round-trip form,
//! so loading a saved model gives back bit-identical values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "fsva-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMajor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for RowMajor {
    fn from(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(m.row(i).iter());
        }
        Self { rows, cols, data }
    }
}

impl RowMajor {
    pub fn into_matrix(self, name: &str) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ModelFormat(format!(
                "{name}: {} values for a {} x {} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn expect_shape(self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        if (self.rows, self.cols) != (rows, cols) {
            return Err(Error::ModelFormat(format!(
                "{name}: expected {rows} x {cols}, found {} x {}",
                self.rows, self.cols
            )));
        }
        self.into_matrix(name)
    }
}

pub fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn expect_len(name: &str, v: Vec<f64>, len: usize) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::ModelFormat(format!(
            "{name}: expected {len} values, found {}",
            v.len()
        )));
    }
    Ok(DVector::from_vec(v))
}

#[derive(Serialize, Deserialize)]
struct Container<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

/// Types stored in the container.
pub trait Persist: Sized {
    const KIND: &'static str;
    type Record: Serialize + DeserializeOwned;

    fn to_record(&self) -> Self::Record;
    fn from_record(record: Self::Record) -> Result<Self>;

    fn to_json(&self) -> Result<String> {
        let c = Container {
            format: FORMAT_TAG.to_owned(),
            version: FORMAT_VERSION,
            kind: Self::KIND.to_owned(),
            payload: self.to_record(),
        };
        Ok(serde_json::to_string(&c)?)
    }

    fn from_json(text: &str) -> Result<Self> {
        let c: Container<serde_json::Value> = serde_json::from_str(text)?;
        check_header(&c.format, c.version, &c.kind, Self::KIND)?;
        Self::from_record(serde_json::from_value(c.payload)?)
    }

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_json()?;
        let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut out = BufWriter::new(file);
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        let c: Container<serde_json::Value> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::from(e).in_file(path))?;
        check_header(&c.format, c.version, &c.kind, Self::KIND).map_err(|e| e.in_file(path))?;
        let record = serde_json::from_value(c.payload).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_record(record).map_err(|e| e.in_file(path))
    }
}

fn check_header(format: &str, version: u32, kind: &str, want: &str) -> Result<()> {
    if format != FORMAT_TAG {
        return Err(Error::ModelFormat(format!("unknown format tag {format:?}")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    if kind != want {
        return Err(Error::ModelFormat(format!("expected a {want:?} model, found {kind:?}")));
    }
    Ok(())
}
