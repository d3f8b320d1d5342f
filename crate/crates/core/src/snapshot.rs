//! Binary snapshot format for physical vector fields.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                       |
//! |--------|------|-----------------------------|
//! | 0      | 4    | magic `b"SCSP"`             |
//! | 4      | 2    | version (`u16`, currently 1) |
//! | 6      | 2    | dim (`u16`)                 |
//! | 8      | 4    | n per axis (`u32`)          |
//! | 12     | 4    | reserved, zero              |
//! | 16     | 8    | period (`f64`)              |
//! | 24     | 8    | time (`f64`)                |
//!
//! followed by `dim` component arrays of `n^dim` `f64` samples in row-major
//! order (last axis fastest). Viscosity is not stored; readers supply it.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::PhysicalField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"SCSP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub version: u16,
    pub dim: u16,
    pub n: u32,
    pub period: f64,
    pub time: f64,
}

impl SnapshotHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&self.dim.to_le_bytes());
        b[8..12].copy_from_slice(&self.n.to_le_bytes());
        b[16..24].copy_from_slice(&self.period.to_le_bytes());
        b[24..32].copy_from_slice(&self.time.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if &b[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let f64_at = |o: usize| {
            let mut a = [0u8; 8];
            a.copy_from_slice(&b[o..o + 8]);
            f64::from_le_bytes(a)
        };
        Ok(Self {
            version,
            dim: u16::from_le_bytes([b[6], b[7]]),
            n: u32::from_le_bytes([b[8], b[9], b[10], b[11]]),
            period: f64_at(16),
            time: f64_at(24),
        })
    }
}

pub fn write_snapshot<W: Write>(w: &mut W, field: &PhysicalField, time: f64) -> Result<()> {
    let grid = field.grid();
    if field.ncomp() != grid.dim() {
        return Err(Error::ComponentMismatch {
            expected: grid.dim(),
            found: field.ncomp(),
        });
    }
    let header = SnapshotHeader {
        version: VERSION,
        dim: grid.dim() as u16,
        n: grid.n() as u32,
        period: grid.period(),
        time,
    };
    w.write_all(&header.to_bytes())?;
    let mut buf = Vec::with_capacity(grid.len() * 8);
    for comp in field.components() {
        buf.clear();
        for v in comp {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Reads a snapshot; `viscosity` completes the grid description.
pub fn read_snapshot<R: Read>(r: &mut R, viscosity: f64) -> Result<(PhysicalField, f64)> {
    let mut hb = [0u8; HEADER_LEN];
    r.read_exact(&mut hb)?;
    let h = SnapshotHeader::from_bytes(&hb)?;
    let grid = GridSpec::new(h.dim as usize, h.n as usize, h.period, viscosity)?;
    let mut comps = Vec::with_capacity(grid.dim());
    let mut raw = vec![0u8; grid.len() * 8];
    for _ in 0..grid.dim() {
        r.read_exact(&mut raw)?;
        comps.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        );
    }
    Ok((PhysicalField::new(grid, comps)?, h.time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let h = SnapshotHeader {
            version: 1,
            dim: 3,
            n: 64,
            period: 2.0,
            time: 0.5,
        };
        let b = h.to_bytes();
        assert_eq!(&b[0..4], b"SCSP");
        assert_eq!(b[4..6], [1, 0]);
        assert_eq!(b[6..8], [3, 0]);
        assert_eq!(b[8..12], [64, 0, 0, 0]);
        assert_eq!(b[12..16], [0, 0, 0, 0]);
        assert_eq!(b[16..24], 2.0f64.to_le_bytes());
        assert_eq!(b[24..32], 0.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic() {
        let mut b = SnapshotHeader {
            version: 1,
            dim: 2,
            n: 16,
            period: 1.0,
            time: 0.0,
        }
        .to_bytes();
        b[0] = b'X';
        assert!(SnapshotHeader::from_bytes(&b).is_err());
    }

    proptest! {
        #[test]
        fn snapshot_roundtrip(seed in 0u64..1000, time in -1e3f64..1e3) {
            let g = GridSpec::periodic(2, 16, 0.3).unwrap();
            let f = crate::random::band_limited(&g, 2, 1.0, 6.0, &mut crate::random::rng(seed))
                .unwrap()
                .to_physical();
            let mut buf = Vec::new();
            write_snapshot(&mut buf, &f, time).unwrap();
            prop_assert_eq!(buf.len(), HEADER_LEN + 2 * g.len() * 8);
            let (back, t) = read_snapshot(&mut buf.as_slice(), 0.3).unwrap();
            prop_assert_eq!(t, time);
            prop_assert_eq!(back, f);
        }
    }
}
