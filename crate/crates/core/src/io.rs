// SPDX-License-Identifier: MIT OR Apache-2.0

//! Edge-list files and JSON change point files.
//!
//! An edge list holds one `t,layer,i,j` line per present edge (1-based
//! integers), optionally preceded by a header line. Blank lines and lines
//! starting with `#` are skipped. Dimensions come from a JSON descriptor
//! `{"n": .., "layers": .., "horizon": ..}` stored next to the file as
//! `<file>.meta.json`, or are inferred as the largest indices seen.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor3, TensorSeries};

pub const EDGE_LIST_HEADER: &str = "t,layer,i,j";

/// Declared dimensions of an edge-list file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub n: usize,
    pub layers: usize,
    pub horizon: usize,
}

impl Descriptor {
    pub fn of<S: Scalar>(series: &TensorSeries<S>) -> Self {
        let (n, _, layers) = series.shape();
        Self {
            n,
            layers,
            horizon: series.len(),
        }
    }
}

/// `<path>.meta.json`.
pub fn descriptor_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn read_descriptor(path: &Path) -> Result<Descriptor> {
    read_json(path)
}

type Edge = (usize, usize, usize, usize);

fn parse_line(line: &str, line_no: usize) -> Result<Edge> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 4 comma-separated fields, found {}", fields.len()),
        });
    }
    let mut v = [0usize; 4];
    for (slot, field) in v.iter_mut().zip(&fields) {
        *slot = field.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("`{field}` is not a nonnegative integer"),
        })?;
    }
    Ok((v[0], v[1], v[2], v[3]))
}

fn is_header(line: &str) -> bool {
    line.split(',').map(str::trim).collect::<Vec<_>>() == EDGE_LIST_HEADER.split(',').collect::<Vec<_>>()
}

/// Parses an edge list into a binary series. With `descriptor = None` the
/// dimensions are the largest indices seen.
pub fn parse_edge_list<S: Scalar, R: BufRead>(reader: R, descriptor: Option<Descriptor>) -> Result<TensorSeries<S>> {
    let mut edges: Vec<(usize, Edge)> = Vec::new();
    let mut seen_data = false;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        if !seen_data && is_header(body) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        edges.push((line_no, parse_line(body, line_no)?));
    }
    let dims = match descriptor {
        Some(d) => d,
        None => {
            let max = |f: fn(&Edge) -> usize| edges.iter().map(|(_, e)| f(e)).max().unwrap_or(0);
            Descriptor {
                n: max(|e| e.2).max(max(|e| e.3)),
                layers: max(|e| e.1),
                horizon: max(|e| e.0),
            }
        }
    };
    if dims.n == 0 || dims.layers == 0 {
        return Err(Error::Validation(format!("edge list needs n >= 1 and L >= 1, got {dims:?}")));
    }
    if dims.horizon < 2 {
        return Err(Error::Validation(format!("edge list needs T >= 2, got {}", dims.horizon)));
    }
    let shape = (dims.n, dims.n, dims.layers);
    let mut snaps = vec![Tensor3::<S>::zeros(shape); dims.horizon];
    for &(line_no, (t, l, i, j)) in &edges {
        let ok = (1..=dims.horizon).contains(&t)
            && (1..=dims.layers).contains(&l)
            && (1..=dims.n).contains(&i)
            && (1..=dims.n).contains(&j);
        if !ok {
            return Err(Error::Validation(format!(
                "line {line_no}: edge ({t}, {l}, {i}, {j}) outside T = {}, L = {}, n = {}",
                dims.horizon, dims.layers, dims.n
            )));
        }
        snaps[t - 1].set(i, j, l, S::one());
    }
    TensorSeries::new(snaps)
}

/// Reads an edge list, taking dimensions from `descriptor`, else from the
/// sidecar descriptor when present, else from the data.
pub fn read_edge_list<S: Scalar>(path: &Path, descriptor: Option<Descriptor>) -> Result<TensorSeries<S>> {
    let descriptor = match descriptor {
        Some(d) => Some(d),
        None => {
            let side = descriptor_path(path);
            if side.exists() {
                Some(read_descriptor(&side)?)
            } else {
                None
            }
        }
    };
    parse_edge_list(BufReader::new(File::open(path)?), descriptor)
}

/// Writes the nonzero entries of a binary series as an edge list.
pub fn format_edge_list<S: Scalar, W: Write>(series: &TensorSeries<S>, mut out: W) -> Result<()> {
    if !series.is_binary() {
        return Err(Error::Validation("only 0/1 series can be written as edge lists".into()));
    }
    let (n, _, layers) = series.shape();
    writeln!(out, "{EDGE_LIST_HEADER}")?;
    for (t, snap) in series.snapshots().iter().enumerate() {
        for l in 0..layers {
            for i in 0..n {
                for j in 0..n {
                    if snap.data()[(i * n + j) * layers + l] != S::zero() {
                        writeln!(out, "{},{},{},{}", t + 1, l + 1, i + 1, j + 1)?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes the edge list and its sidecar descriptor.
pub fn write_edge_list<S: Scalar>(path: &Path, series: &TensorSeries<S>) -> Result<()> {
    format_edge_list(series, BufWriter::new(File::create(path)?))?;
    write_json(&descriptor_path(path), &Descriptor::of(series))
}

/// Change points of one series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePointFile {
    pub horizon: usize,
    pub change_points: Vec<usize>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, d: Option<Descriptor>) -> Result<TensorSeries<f64>> {
        parse_edge_list(text.as_bytes(), d)
    }

    #[test]
    fn empty_body_with_descriptor() {
        let d = Descriptor {
            n: 3,
            layers: 2,
            horizon: 4,
        };
        let s = parse("t,layer,i,j\n", Some(d)).unwrap();
        assert_eq!(s.shape(), (3, 3, 2));
        assert_eq!(s.len(), 4);
        assert!(s.snapshots().iter().all(|x| x.frob_norm() == 0.0));
    }

    #[test]
    fn single_edge() {
        let d = Descriptor {
            n: 3,
            layers: 2,
            horizon: 4,
        };
        let s = parse("1,1,2,3\n1,1,2,3\n", Some(d)).unwrap();
        assert_eq!(s.get(1).get(2, 3, 1), 1.0);
        let total: f64 = s.snapshots().iter().map(|x| x.data().iter().sum::<f64>()).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("t,layer,i,j\n1,1,1,1\n\n1,x,1,1\n", None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        let d = Descriptor {
            n: 2,
            layers: 1,
            horizon: 2,
        };
        assert!(matches!(parse("1,1,3,1\n", Some(d)), Err(Error::Validation(_))));
        assert!(matches!(parse("1,1,1\n", Some(d)), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn inferred_dimensions() {
        let s = parse("2,3,1,4\n1,1,2,1\n", None).unwrap();
        assert_eq!(s.shape(), (4, 4, 3));
        assert_eq!(s.len(), 2);
    }
}
