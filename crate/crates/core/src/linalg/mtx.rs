//! MatrixMarket I/O for real symmetric matrices.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{DenseSym, SparseSym};
use crate::{Error, Result};

fn err(msg: impl Into<String>) -> Error {
    Error::MatrixMarket(msg.into())
}

/// Reads a `real symmetric` matrix in coordinate or array format.
/// A `general` matrix is accepted if it is exactly symmetric.
pub fn read_sparse(reader: impl Read) -> Result<SparseSym> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(err("empty file")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(format!("bad header: {header}")));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(err(format!("unsupported format {other}"))),
    };
    if tokens[3] != "real" && tokens[3] != "integer" && tokens[3] != "double" {
        return Err(err(format!("unsupported field {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(err(format!("unsupported symmetry {other}"))),
    };

    let mut data = lines.filter_map(|l| match l {
        Ok(s) => {
            let t = s.trim().to_string();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok(t))
            }
        }
        Err(e) => Some(Err(e)),
    });
    let size_line = data.next().ok_or_else(|| err("missing size line"))??;
    let size: Vec<usize> = size_line
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| err(format!("bad size line: {size_line}"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match size.as_slice() {
        [r, c, ..] => (*r, *c),
        _ => return Err(err("bad size line")),
    };
    if rows != cols || rows == 0 {
        return Err(err(format!("matrix must be square and nonempty, got {rows}x{cols}")));
    }
    let n = rows;
    let parse_f = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad value {s}")));

    let mut trip = Vec::new();
    if coordinate {
        let nnz = *size.get(2).ok_or_else(|| err("missing nnz"))?;
        for _ in 0..nnz {
            let line = data.next().ok_or_else(|| err("truncated entries"))??;
            let mut it = line.split_whitespace();
            let (Some(i), Some(j), Some(v)) = (it.next(), it.next(), it.next()) else {
                return Err(err(format!("bad entry: {line}")));
            };
            let i: usize = i.parse().map_err(|_| err(format!("bad index {i}")))?;
            let j: usize = j.parse().map_err(|_| err(format!("bad index {j}")))?;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(err(format!("index out of range: ({i}, {j})")));
            }
            trip.push((i - 1, j - 1, parse_f(v)?));
        }
    } else {
        // column-major; symmetric arrays list only the lower triangle
        for j in 0..n {
            let start = if symmetric { j } else { 0 };
            for i in start..n {
                let line = data.next().ok_or_else(|| err("truncated array"))??;
                trip.push((i, j, parse_f(&line)?));
            }
        }
    }

    if symmetric {
        let mut mirrored = Vec::with_capacity(trip.len() * 2);
        for (i, j, v) in trip {
            if i < j {
                return Err(err(format!("upper-triangle entry ({}, {}) in symmetric file", i + 1, j + 1)));
            }
            mirrored.push((i, j, v));
        }
        SparseSym::from_triangle(n, &mirrored)
    } else {
        SparseSym::from_triplets(n, &trip).map_err(|_| err("general matrix is not symmetric"))
    }
}

pub fn read_path(path: impl AsRef<Path>) -> Result<SparseSym> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    read_sparse(file)
}

/// Writes the lower triangle in coordinate format.
pub fn write_sparse(m: &SparseSym, mut w: impl Write) -> Result<()> {
    let n = m.n();
    let mut body = String::new();
    let mut count = 0usize;
    for i in 0..n {
        let (idx, vals) = m.row(i);
        for (&j, &v) in idx.iter().zip(vals) {
            if j <= i {
                writeln!(body, "{} {} {:e}", i + 1, j + 1, v).unwrap();
                count += 1;
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{n} {n} {count}")?;
    w.write_all(body.as_bytes())?;
    Ok(())
}

/// Writes the lower triangle in array format.
pub fn write_dense(m: &DenseSym, mut w: impl Write) -> Result<()> {
    let n = m.n();
    writeln!(w, "%%MatrixMarket matrix array real symmetric")?;
    writeln!(w, "{n} {n}")?;
    for j in 0..n {
        for i in j..n {
            writeln!(w, "{:e}", m.get(i, j))?;
        }
    }
    Ok(())
}
