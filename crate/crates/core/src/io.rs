//! Matrix persistence.
//!
//! A file starts with one text header line `rows cols dtype [encoding]` where
//! `dtype` is `real` or `complex` and `encoding` is `csv` (default) or `f64le`.
//! The payload is row-major. In CSV, each row is one line; complex entries
//! occupy two consecutive fields (real, imaginary). In `f64le`, entries are
//! raw little-endian 64-bit floats, complex entries interleaved as (re, im).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{PbdwError, Result};
use crate::scalar::Scalar;

/// Payload encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    F64Le,
}

impl Encoding {
    /// CSV below 10⁴ entries, binary above.
    pub fn auto(rows: usize, cols: usize) -> Self {
        if rows * cols <= 10_000 {
            Encoding::Csv
        } else {
            Encoding::F64Le
        }
    }
}

/// Writes a matrix in the header+payload format.
pub fn write_matrix<T: Scalar, W: Write>(mut out: W, m: &DMatrix<T>, encoding: Encoding) -> Result<()> {
    let dtype = if T::IS_COMPLEX { "complex" } else { "real" };
    let enc = match encoding {
        Encoding::Csv => "csv",
        Encoding::F64Le => "f64le",
    };
    writeln!(out, "{} {} {} {}", m.nrows(), m.ncols(), dtype, enc)?;
    match encoding {
        Encoding::Csv => {
            for i in 0..m.nrows() {
                let mut fields = Vec::with_capacity(m.ncols() * 2);
                for j in 0..m.ncols() {
                    let v = m[(i, j)];
                    fields.push(format!("{:e}", v.re()));
                    if T::IS_COMPLEX {
                        fields.push(format!("{:e}", v.im()));
                    }
                }
                writeln!(out, "{}", fields.join(","))?;
            }
        }
        Encoding::F64Le => {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let v = m[(i, j)];
                    out.write_all(&v.re().to_le_bytes())?;
                    if T::IS_COMPLEX {
                        out.write_all(&v.im().to_le_bytes())?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a matrix; real files may be read into a complex matrix, not vice versa.
pub fn read_matrix<T: Scalar, R: Read>(input: R) -> Result<DMatrix<T>> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 3 || tokens.len() > 4 {
        return Err(PbdwError::Parse(format!("bad matrix header '{}'", header.trim())));
    }
    let rows: usize = tokens[0]
        .parse()
        .map_err(|_| PbdwError::Parse(format!("bad row count '{}'", tokens[0])))?;
    let cols: usize = tokens[1]
        .parse()
        .map_err(|_| PbdwError::Parse(format!("bad column count '{}'", tokens[1])))?;
    let complex = match tokens[2] {
        "real" => false,
        "complex" => true,
        other => return Err(PbdwError::Parse(format!("unknown dtype '{other}'"))),
    };
    if complex && !T::IS_COMPLEX {
        return Err(PbdwError::Parse("cannot read complex data into a real matrix".into()));
    }
    let encoding = match tokens.get(3).copied().unwrap_or("csv") {
        "csv" => Encoding::Csv,
        "f64le" => Encoding::F64Le,
        other => return Err(PbdwError::Parse(format!("unknown encoding '{other}'"))),
    };
    let width = if complex { 2 } else { 1 };
    let mut values = Vec::with_capacity(rows * cols * width);
    match encoding {
        Encoding::Csv => {
            let mut line = String::new();
            for i in 0..rows {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(PbdwError::Parse(format!("missing row {i}")));
                }
                let before = values.len();
                for field in line.trim().split(',').filter(|f| !f.is_empty()) {
                    let v: f64 = field
                        .trim()
                        .parse()
                        .map_err(|_| PbdwError::Parse(format!("bad value '{field}' in row {i}")))?;
                    values.push(v);
                }
                if values.len() - before != cols * width {
                    return Err(PbdwError::Parse(format!(
                        "row {i} has {} fields, expected {}",
                        values.len() - before,
                        cols * width
                    )));
                }
            }
        }
        Encoding::F64Le => {
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols * width {
                reader.read_exact(&mut buf)?;
                values.push(f64::from_le_bytes(buf));
            }
        }
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let k = (i * cols + j) * width;
        if complex {
            T::from_parts(values[k], values[k + 1])
        } else {
            T::from_real(values[k])
        }
    }))
}

pub fn save_matrix<T: Scalar>(path: impl AsRef<Path>, m: &DMatrix<T>) -> Result<()> {
    let file = File::create(path)?;
    write_matrix(BufWriter::new(file), m, Encoding::auto(m.nrows(), m.ncols()))
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<DMatrix<T>> {
    read_matrix(File::open(path)?)
}

/// Loads a column vector stored as an `n × 1` (or `1 × n`) matrix.
pub fn load_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<DVector<T>> {
    let m: DMatrix<T> = load_matrix(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(PbdwError::Parse(format!(
            "expected a vector, found a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn save_vector<T: Scalar>(path: impl AsRef<Path>, v: &DVector<T>) -> Result<()> {
    save_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}
