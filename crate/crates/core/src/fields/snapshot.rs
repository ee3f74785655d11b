//! The VXS1 snapshot format.
//!
//! Layout: the 8 bytes `VXSNAP01`, a little-endian `u64` byte count, a JSON
//! header `{n1,n2,n3,L1,L2,L3,time,fields}`, then for every named field one
//! block of `n1*n2*n3` little-endian `f64` values, x1 fastest. Velocity is
//! stored as the three scalar fields `v1`, `v2`, `v3`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FieldError, GridSpec, ScalarField, SnapshotSeries, VectorField};

pub const MAGIC: &[u8; 8] = b"VXSNAP01";
pub const EXTENSION: &str = "vxs";
const VELOCITY: [&str; 3] = ["v1", "v2", "v3"];
const MAX_HEADER: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: not a VXS1 file (bad magic)")]
    BadMagic(PathBuf),
    #[error("{path}: malformed header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("{path}: field `{field}` has {found} bytes, expected {expected}")]
    Payload {
        path: PathBuf,
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {extra} trailing bytes after the last field")]
    Trailing { path: PathBuf, extra: usize },
    #[error("{path}: missing field `{field}`")]
    MissingField { path: PathBuf, field: String },
    #[error("{path}: {source}")]
    Field { path: PathBuf, source: FieldError },
    #[error("{0}: no snapshots found")]
    Empty(PathBuf),
    #[error("series: {0}")]
    Series(FieldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    pub time: f64,
    pub fields: Vec<String>,
}

impl Header {
    pub fn grid(&self) -> Result<GridSpec, FieldError> {
        GridSpec::new([self.n1, self.n2, self.n3], [self.l1, self.l2, self.l3])
    }
}

/// Decoded file contents: the header and one value block per field.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub header: Header,
    pub grid: GridSpec,
    pub blocks: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn scalar(&self, name: &str) -> Option<ScalarField> {
        let i = self.header.fields.iter().position(|f| f == name)?;
        Some(ScalarField {
            grid: self.grid,
            values: self.blocks[i].clone(),
            time: self.header.time,
        })
    }

    pub fn velocity(&self, path: &Path) -> Result<VectorField, SnapshotError> {
        let mut comps = Vec::with_capacity(3);
        for name in VELOCITY {
            let s = self.scalar(name).ok_or_else(|| SnapshotError::MissingField {
                path: path.to_path_buf(),
                field: name.to_string(),
            })?;
            comps.push(s.values);
        }
        let [a, b, c]: [Vec<f64>; 3] = comps.try_into().expect("three components");
        VectorField::new(self.grid, [a, b, c], self.header.time).map_err(|source| {
            SnapshotError::Field {
                path: path.to_path_buf(),
                source,
            }
        })
    }
}

pub fn encode(grid: GridSpec, time: f64, fields: &[(&str, &[f64])]) -> Vec<u8> {
    let header = Header {
        n1: grid.n[0],
        n2: grid.n[1],
        n3: grid.n[2],
        l1: grid.len[0],
        l2: grid.len[1],
        l3: grid.len[2],
        time,
        fields: fields.iter().map(|(n, _)| n.to_string()).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + fields.len() * grid.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, values) in fields {
        for v in values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Snapshot, SnapshotError> {
    let header_err = |reason: String| SnapshotError::Header {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(SnapshotError::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < 16 {
        return Err(header_err("truncated length prefix".into()));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if hlen > MAX_HEADER || 16 + hlen as usize > bytes.len() {
        return Err(header_err(format!("header length {hlen} out of range")));
    }
    let hend = 16 + hlen as usize;
    let header: Header =
        serde_json::from_slice(&bytes[16..hend]).map_err(|e| header_err(e.to_string()))?;
    let grid = header.grid().map_err(|source| SnapshotError::Field {
        path: path.to_path_buf(),
        source,
    })?;
    if !header.time.is_finite() {
        return Err(header_err(format!("time {}", header.time)));
    }
    let block = grid.len() * 8;
    let mut blocks = Vec::with_capacity(header.fields.len());
    let mut pos = hend;
    for name in &header.fields {
        let avail = bytes.len() - pos;
        if avail < block {
            return Err(SnapshotError::Payload {
                path: path.to_path_buf(),
                field: name.clone(),
                expected: block,
                found: avail,
            });
        }
        let values: Vec<f64> = bytes[pos..pos + block]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SnapshotError::Field {
                path: path.to_path_buf(),
                source: FieldError::NonFinite { index },
            });
        }
        blocks.push(values);
        pos += block;
    }
    if pos != bytes.len() {
        return Err(SnapshotError::Trailing {
            path: path.to_path_buf(),
            extra: bytes.len() - pos,
        });
    }
    Ok(Snapshot {
        header,
        grid,
        blocks,
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_velocity(path: &Path, v: &VectorField) -> Result<(), SnapshotError> {
    let fields: Vec<(&str, &[f64])> = VELOCITY
        .iter()
        .zip(v.components.iter())
        .map(|(n, c)| (*n, c.as_slice()))
        .collect();
    let bytes = encode(v.grid, v.time, &fields);
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<Snapshot, SnapshotError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    decode(&bytes, path)
}

pub fn read_velocity(path: &Path) -> Result<VectorField, SnapshotError> {
    read(path)?.velocity(path)
}

/// Snapshot files in a directory, or the single file itself.
pub fn list(path: &Path) -> Result<Vec<PathBuf>, SnapshotError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == EXTENSION))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(SnapshotError::Empty(path.to_path_buf()));
    }
    Ok(out)
}

/// Loads every snapshot under `path` into a time-ordered series.
pub fn load_series(path: &Path) -> Result<SnapshotSeries, SnapshotError> {
    let fields = list(path)?
        .iter()
        .map(|p| read_velocity(p))
        .collect::<Result<Vec<_>, _>>()?;
    SnapshotSeries::new(fields).map_err(SnapshotError::Series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VectorField {
        let g = GridSpec::new([4, 6, 8], [1.0, 2.0, 3.0]).unwrap();
        VectorField::from_fn(g, 0.25, |x| [x[0], x[1] * 2.0, -x[2]])
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let v = sample();
        let fields: Vec<(&str, &[f64])> =
            VELOCITY.iter().zip(v.components.iter()).map(|(n, c)| (*n, c.as_slice())).collect();
        let bytes = encode(v.grid, v.time, &fields);
        let snap = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(snap.velocity(Path::new("mem")).unwrap(), v);
        assert_eq!(snap.header.fields, vec!["v1", "v2", "v3"]);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let v = sample();
        let mut bytes = encode(v.grid, v.time, &[("v1", &v.components[0])]);
        bytes[3] = b'X';
        assert!(matches!(decode(&bytes, Path::new("m")), Err(SnapshotError::BadMagic(_))));
    }

    #[test]
    fn truncation_names_the_short_field() {
        let v = sample();
        let fields: Vec<(&str, &[f64])> =
            VELOCITY.iter().zip(v.components.iter()).map(|(n, c)| (*n, c.as_slice())).collect();
        let bytes = encode(v.grid, v.time, &fields);
        let cut = &bytes[..bytes.len() - 9];
        match decode(cut, Path::new("m")) {
            Err(SnapshotError::Payload { field, .. }) => assert_eq!(field, "v3"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
