//! Grid-state snapshots.
//!
//! Two encodings share one header `{dims, points_per_axis, half_width, offset, convention}`:
//!
//! * JSON: `{"format": "warpconv-snapshot", "version": 1, "header": {..}, "amplitudes": [[re, im], ..]}`
//! * binary: the 8-byte magic `WCSNAP01`, a little-endian `u32` header length, the header as
//!   UTF-8 JSON, then `re, im` pairs as little-endian `f64`.
//!
//! Amplitudes are row-major with the last axis fastest, matching [`GridSpace::unravel`].

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpace, GridState, C64, CONVENTION_TAG};

pub const FORMAT: &str = "warpconv-snapshot";
pub const VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"WCSNAP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub dims: usize,
    pub points_per_axis: usize,
    pub half_width: f64,
    pub offset: f64,
    pub convention: String,
}

impl SnapshotHeader {
    pub fn of(space: &GridSpace) -> Self {
        Self {
            dims: space.dims,
            points_per_axis: space.points_per_axis,
            half_width: space.half_width,
            offset: space.offset,
            convention: CONVENTION_TAG.to_string(),
        }
    }

    fn space(&self) -> Result<GridSpace> {
        if self.convention != CONVENTION_TAG {
            return Err(Error::InvalidArgument(format!("snapshot uses convention {:?}", self.convention)));
        }
        GridSpace::new(self.dims, self.points_per_axis, self.half_width, self.offset)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSnapshot {
    format: String,
    version: u32,
    header: SnapshotHeader,
    amplitudes: Vec<[f64; 2]>,
}

pub fn to_json(state: &GridState) -> Result<String> {
    let s = JsonSnapshot {
        format: FORMAT.to_string(),
        version: VERSION,
        header: SnapshotHeader::of(&state.space),
        amplitudes: state.amplitudes.iter().map(|c| [c.re, c.im]).collect(),
    };
    Ok(serde_json::to_string(&s)?)
}

pub fn from_json(text: &str) -> Result<GridState> {
    let s: JsonSnapshot = serde_json::from_str(text)?;
    if s.format != FORMAT || s.version != VERSION {
        return Err(Error::UnknownSchema(format!("{} v{}", s.format, s.version)));
    }
    let space = Arc::new(s.header.space()?);
    GridState::from_amplitudes(&space, s.amplitudes.iter().map(|p| C64::new(p[0], p[1])).collect())
}

pub fn to_bytes(state: &GridState) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&SnapshotHeader::of(&state.space))?;
    let mut out = Vec::with_capacity(12 + header.len() + 16 * state.amplitudes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for c in &state.amplitudes {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<GridState> {
    let bad = |m: &str| Error::UnknownSchema(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing snapshot magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes")) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: SnapshotHeader = serde_json::from_slice(body)?;
    let space = Arc::new(header.space()?);
    let data = &bytes[12 + hlen..];
    if data.len() != 16 * space.len() {
        return Err(Error::DimensionMismatch { expected: 16 * space.len(), found: data.len() });
    }
    let amplitudes = data
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("eight bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("eight bytes"));
            C64::new(re, im)
        })
        .collect();
    GridState::from_amplitudes(&space, amplitudes)
}

/// Writes JSON for a `.json` path and the binary form otherwise.
pub fn save(state: &GridState, path: &Path) -> Result<()> {
    let bytes = if is_json(path) { to_json(state)?.into_bytes() } else { to_bytes(state)? };
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GridState> {
    let bytes = std::fs::read(path)?;
    if is_json(path) {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        from_json(text)
    } else {
        from_bytes(&bytes)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::domain_vector;

    fn state() -> GridState {
        let g = Arc::new(GridSpace::centered(2, 8, 4.0).unwrap());
        let mut s = domain_vector(&g, &[1, 0]).unwrap();
        s.amplitudes[3] = C64::new(0.25, -1.5);
        s
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let s = state();
        let back = from_bytes(&to_bytes(&s).unwrap()).unwrap();
        assert_eq!(*back.space, *s.space);
        assert_eq!(back.amplitudes, s.amplitudes);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = state();
        let back = from_json(&to_json(&s).unwrap()).unwrap();
        assert_eq!(back.amplitudes, s.amplitudes);
    }

    #[test]
    fn rejects_foreign_data() {
        assert!(from_bytes(b"not a snapshot").is_err());
        let mut b = to_bytes(&state()).unwrap();
        b.pop();
        assert!(matches!(from_bytes(&b), Err(Error::DimensionMismatch { .. })));
        let text = to_json(&state()).unwrap().replace(CONVENTION_TAG, "P=-i*d/dx");
        assert!(from_json(&text).is_err());
    }
}
