//! Flat binary grid layout: origin (3 x f64), resolution (f64), dims (3 x u64), all
//! little-endian, followed by one byte per cell (0 Unknown, 1 Free, 2 Occupied) in
//! linear-index order.

use std::io::{Read, Write};
use std::path::Path;

use crate::Vec3;

use super::{CellState, GridError, OccupancyGrid};

const HEADER_LEN: usize = 7 * 8;

impl OccupancyGrid {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        w.write_all(&self.header_bytes())?;
        let body: Vec<u8> = self.cells().iter().map(|&c| c as u8).collect();
        w.write_all(&body)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    fn header_bytes(&self) -> Vec<u8> {
        let mut h = Vec::with_capacity(HEADER_LEN);
        for v in self.origin().iter() {
            h.extend_from_slice(&v.to_le_bytes());
        }
        h.extend_from_slice(&self.resolution().to_le_bytes());
        for d in self.dims() {
            h.extend_from_slice(&(d as u64).to_le_bytes());
        }
        h
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|e| GridError::Format(format!("truncated header: {e}")))?;
        let word = |i: usize| -> [u8; 8] { header[i * 8..(i + 1) * 8].try_into().unwrap() };
        let origin = Vec3::new(
            f64::from_le_bytes(word(0)),
            f64::from_le_bytes(word(1)),
            f64::from_le_bytes(word(2)),
        );
        let resolution = f64::from_le_bytes(word(3));
        let mut dims = [0usize; 3];
        for (a, d) in dims.iter_mut().enumerate() {
            *d = usize::try_from(u64::from_le_bytes(word(4 + a)))
                .map_err(|_| GridError::Format("dimension overflows usize".into()))?;
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or(GridError::InvalidDims(dims))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != n {
            return Err(GridError::Format(format!(
                "expected {n} cell bytes, found {}",
                body.len()
            )));
        }
        let cells = body
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                CellState::from_byte(b)
                    .ok_or_else(|| GridError::Format(format!("invalid cell byte {b} at {i}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        OccupancyGrid::from_parts(origin, resolution, dims, cells)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GridError> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let mut g = OccupancyGrid::new(Vec3::new(1.0, -2.0, 0.5), 0.25, [2, 1, 2]).unwrap();
        g.set([1, 0, 0], CellState::Free);
        g.set([0, 0, 1], CellState::Occupied);
        let b = g.to_bytes();
        assert_eq!(b.len(), 56 + 4);
        assert_eq!(&b[0..8], &1.0f64.to_le_bytes());
        assert_eq!(&b[8..16], &(-2.0f64).to_le_bytes());
        assert_eq!(&b[24..32], &0.25f64.to_le_bytes());
        assert_eq!(&b[32..40], &2u64.to_le_bytes());
        assert_eq!(&b[40..48], &1u64.to_le_bytes());
        assert_eq!(&b[56..], &[0, 1, 2, 0]);
    }

    #[test]
    fn rejects_bad_bodies() {
        let g = OccupancyGrid::new(Vec3::zeros(), 1.0, [2, 2, 2]).unwrap();
        let mut b = g.to_bytes();
        b.pop();
        assert!(matches!(OccupancyGrid::from_bytes(&b), Err(GridError::Format(_))));
        let mut b = g.to_bytes();
        *b.last_mut().unwrap() = 7;
        assert!(matches!(OccupancyGrid::from_bytes(&b), Err(GridError::Format(_))));
        assert!(OccupancyGrid::from_bytes(&b[..10]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(cells in proptest::collection::vec(0u8..3, 24), res in 0.01..2.0f64, ox in -50.0..50.0f64) {
            let cells: Vec<CellState> = cells.into_iter().map(|b| CellState::from_byte(b).unwrap()).collect();
            let g = OccupancyGrid::from_parts(Vec3::new(ox, 0.0, -ox), res, [2, 3, 4], cells).unwrap();
            prop_assert_eq!(OccupancyGrid::from_bytes(&g.to_bytes()).unwrap(), g);
        }
    }
}
