//! CHSF binary field snapshots.
//!
//! Layout (little endian):
//!
//! | offset | size | content                    |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `CHSF`               |
//! | 4      | 4    | version, u32 = 1           |
//! | 8      | 4    | nx, u32                    |
//! | 12     | 4    | ny, u32                    |
//! | 16     | 8    | time, f64                  |
//! | 24     | 1    | field id (0 phi, 1 rho, 2 U, 3 V) |
//! | 25     | 8 nx ny | values, f64, row-major (x fastest) |

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"CHSF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldId {
    Phi = 0,
    Rho = 1,
    U = 2,
    V = 3,
}

impl FieldId {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FieldId::Phi),
            1 => Some(FieldId::Rho),
            2 => Some(FieldId::U),
            3 => Some(FieldId::V),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FieldId::Phi => "phi",
            FieldId::Rho => "rho",
            FieldId::U => "u",
            FieldId::V => "v",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: u32,
    pub ny: u32,
    pub time: f64,
    pub field_id: FieldId,
}

pub fn encode_snapshot(field: &Field, time: f64, field_id: FieldId) -> Vec<u8> {
    let grid = field.grid();
    let mut buf = vec![0u8; HEADER_LEN + 8 * grid.len()];
    buf[0..4].copy_from_slice(MAGIC);
    LittleEndian::write_u32(&mut buf[4..8], VERSION);
    LittleEndian::write_u32(&mut buf[8..12], grid.nx as u32);
    LittleEndian::write_u32(&mut buf[12..16], grid.ny as u32);
    LittleEndian::write_f64(&mut buf[16..24], time);
    buf[24] = field_id as u8;
    LittleEndian::write_f64_into(field.values(), &mut buf[HEADER_LEN..]);
    buf
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Decodes a snapshot onto a grid with the given domain lengths.
pub fn decode_snapshot(bytes: &[u8], lx: f64, ly: f64) -> Result<(Field, SnapshotHeader)> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            bytes.len(),
            format!("truncated header: expected {HEADER_LEN} bytes, got {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        let bad = (0..4).find(|&i| bytes[i] != MAGIC[i]).unwrap_or(0);
        return Err(format_err(bad, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = LittleEndian::read_u32(&bytes[4..8]);
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let nx = LittleEndian::read_u32(&bytes[8..12]);
    let ny = LittleEndian::read_u32(&bytes[12..16]);
    let time = LittleEndian::read_f64(&bytes[16..24]);
    let field_id = FieldId::from_u8(bytes[24]).ok_or_else(|| format_err(24, format!("unknown field id {}", bytes[24])))?;
    let expected = HEADER_LEN + 8 * nx as usize * ny as usize;
    if bytes.len() != expected {
        return Err(format_err(
            bytes.len().min(expected),
            format!("payload length mismatch: expected {expected} bytes in total, got {}", bytes.len()),
        ));
    }
    let grid = Grid::new(nx as usize, ny as usize, lx, ly).map_err(|e| format_err(8, e.to_string()))?;
    let mut values = vec![0.0; grid.len()];
    LittleEndian::read_f64_into(&bytes[HEADER_LEN..], &mut values);
    let field = Field::from_values(grid, values)?;
    Ok((field, SnapshotHeader { nx, ny, time, field_id }))
}

pub fn write_snapshot(path: &Path, field: &Field, time: f64, field_id: FieldId) -> Result<()> {
    fs::write(path, encode_snapshot(field, time, field_id)).map_err(|e| Error::io(path, e))
}

/// Reads a snapshot assuming the default `[0, 2pi]^2` domain.
pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotHeader)> {
    let tau = 2.0 * std::f64::consts::PI;
    read_snapshot_on(path, tau, tau)
}

pub fn read_snapshot_on(path: &Path, lx: f64, ly: f64) -> Result<(Field, SnapshotHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes, lx, ly)
}
