//! Plain-text formats: CSV matrices, one-label-per-line files, `u v` edge lists.
//!
//! Floats are written in Rust's shortest round-trip form, so a write followed
//! by a read reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DfcnError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| DfcnError::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| DfcnError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> DfcnError {
    DfcnError::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_matrix_csv(path: &Path, text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(text) {
        let row = l
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("not a finite number: {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_vec(rows.len(), cols, rows.concat())
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(path, &read_text(path)?)
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_labels(path: &Path, text: &str) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(line, l)| {
            l.parse::<usize>()
                .map_err(|_| parse_err(path, line, format!("not a class id: {l:?}")))
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(path, &read_text(path)?)
}

pub fn labels_to_text(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        writeln!(out, "{l}").unwrap();
    }
    out
}

/// Whitespace-separated 0-based `u v` pairs. Node ids must be below `n`.
pub fn parse_edges(path: &Path, text: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(line, l)| {
            let ids: Vec<&str> = l.split_whitespace().collect();
            if ids.len() != 2 {
                return Err(parse_err(path, line, format!("expected two node ids, found {}", ids.len())));
            }
            let mut pair = [0usize; 2];
            for (slot, id) in pair.iter_mut().zip(&ids) {
                *slot = id
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("not a node id: {id:?}")))?;
                if *slot >= n {
                    return Err(parse_err(path, line, format!("node {slot} outside 0..{n}")));
                }
            }
            Ok((pair[0], pair[1]))
        })
        .collect()
}

pub fn edges_to_text(edges: &[(usize, usize)]) -> String {
    let mut out = String::new();
    for (u, v) in edges {
        writeln!(out, "{u} {v}").unwrap();
    }
    out
}
