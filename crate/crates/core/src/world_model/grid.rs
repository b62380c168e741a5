use crate::Vec3;

use super::GridError;

/// Belief state of a single voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum CellState {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl CellState {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(CellState::Unknown),
            1 => Some(CellState::Free),
            2 => Some(CellState::Occupied),
            _ => None,
        }
    }
}

/// Integer voxel coordinate. Signed so that neighbour arithmetic can step outside the grid.
pub type Voxel = [i64; 3];

/// The six face-neighbour offsets.
pub const FACE_NEIGHBORS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Dense tri-state voxel map over an axis-aligned box.
///
/// Cells are stored x-fastest; the linear index of `[x, y, z]` is
/// `x + nx * (y + ny * z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    /// Creates a grid with every cell `Unknown`.
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self, GridError> {
        Self::filled(origin, resolution, dims, CellState::Unknown)
    }

    pub fn filled(
        origin: Vec3,
        resolution: f64,
        dims: [usize; 3],
        state: CellState,
    ) -> Result<Self, GridError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(GridError::InvalidResolution(resolution));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GridError::InvalidDims(dims));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(GridError::InvalidOrigin);
        }
        let len = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or(GridError::InvalidDims(dims))?;
        Ok(Self {
            origin,
            resolution,
            dims,
            cells: vec![state; len],
        })
    }

    pub(crate) fn from_parts(
        origin: Vec3,
        resolution: f64,
        dims: [usize; 3],
        cells: Vec<CellState>,
    ) -> Result<Self, GridError> {
        let mut g = Self::new(origin, resolution, dims)?;
        if cells.len() != g.cells.len() {
            return Err(GridError::Format(format!(
                "expected {} cells, got {}",
                g.cells.len(),
                cells.len()
            )));
        }
        g.cells = cells;
        Ok(g)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Upper corner of the mapped box.
    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64,
                self.dims[1] as f64,
                self.dims[2] as f64,
            ) * self.resolution
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn in_bounds(&self, v: Voxel) -> bool {
        (0..3).all(|a| v[a] >= 0 && (v[a] as usize) < self.dims[a])
    }

    pub fn linear_index(&self, v: Voxel) -> Option<usize> {
        if !self.in_bounds(v) {
            return None;
        }
        Some(v[0] as usize + self.dims[0] * (v[1] as usize + self.dims[1] * v[2] as usize))
    }

    pub fn voxel_of_index(&self, idx: usize) -> Voxel {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        let y = rest % self.dims[1];
        let z = rest / self.dims[1];
        [x as i64, y as i64, z as i64]
    }

    /// Voxel containing `p`, which may lie outside the grid.
    pub fn voxel_of_point_unchecked(&self, p: &Vec3) -> Voxel {
        let r = (p - self.origin) / self.resolution;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    /// Voxel containing `p`, or `None` when `p` is outside the mapped box.
    pub fn voxel_of_point(&self, p: &Vec3) -> Option<Voxel> {
        if !p.iter().all(|v| v.is_finite()) {
            return None;
        }
        let v = self.voxel_of_point_unchecked(p);
        self.in_bounds(v).then_some(v)
    }

    pub fn index_of_point(&self, p: &Vec3) -> Option<usize> {
        self.voxel_of_point(p).and_then(|v| self.linear_index(v))
    }

    pub fn voxel_center(&self, v: Voxel) -> Vec3 {
        self.origin
            + Vec3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5) * self.resolution
    }

    pub fn index_center(&self, idx: usize) -> Vec3 {
        self.voxel_center(self.voxel_of_index(idx))
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        self.voxel_of_point(p).is_some()
    }

    /// State of a voxel; out-of-bounds voxels read as `None`.
    pub fn state(&self, v: Voxel) -> Option<CellState> {
        self.linear_index(v).map(|i| self.cells[i])
    }

    pub fn state_at(&self, idx: usize) -> CellState {
        self.cells[idx]
    }

    pub fn state_at_point(&self, p: &Vec3) -> Option<CellState> {
        self.index_of_point(p).map(|i| self.cells[i])
    }

    pub fn set(&mut self, v: Voxel, state: CellState) -> bool {
        match self.linear_index(v) {
            Some(i) => {
                self.cells[i] = state;
                true
            }
            None => false,
        }
    }

    pub fn set_at(&mut self, idx: usize, state: CellState) {
        self.cells[idx] = state;
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Iterates over `(linear index, voxel)` pairs of every cell in `state`, ascending.
    pub fn iter_state(&self, state: CellState) -> impl Iterator<Item = (usize, Voxel)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == state)
            .map(|(i, _)| (i, self.voxel_of_index(i)))
    }

    /// Sets every voxel whose center lies in the axis-aligned box `[lo, hi]`.
    pub fn fill_box(&mut self, lo: Vec3, hi: Vec3, state: CellState) {
        let a = self.voxel_of_point_unchecked(&lo);
        let b = self.voxel_of_point_unchecked(&hi);
        for z in a[2].max(0)..=b[2].min(self.dims[2] as i64 - 1) {
            for y in a[1].max(0)..=b[1].min(self.dims[1] as i64 - 1) {
                for x in a[0].max(0)..=b[0].min(self.dims[0] as i64 - 1) {
                    let c = self.voxel_center([x, y, z]);
                    if (0..3).all(|k| c[k] >= lo[k] && c[k] <= hi[k]) {
                        self.set([x, y, z], state);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(
            OccupancyGrid::new(Vec3::zeros(), 0.0, [1, 1, 1]),
            Err(GridError::InvalidResolution(_))
        ));
        assert!(matches!(
            OccupancyGrid::new(Vec3::zeros(), -0.2, [1, 1, 1]),
            Err(GridError::InvalidResolution(_))
        ));
        assert!(matches!(
            OccupancyGrid::new(Vec3::zeros(), 0.2, [4, 0, 1]),
            Err(GridError::InvalidDims(_))
        ));
    }

    #[test]
    fn linear_index_layout_is_x_fastest() {
        let g = OccupancyGrid::new(Vec3::zeros(), 1.0, [3, 4, 5]).unwrap();
        assert_eq!(g.linear_index([1, 0, 0]), Some(1));
        assert_eq!(g.linear_index([0, 1, 0]), Some(3));
        assert_eq!(g.linear_index([0, 0, 1]), Some(12));
        assert_eq!(g.linear_index([3, 0, 0]), None);
        assert_eq!(g.linear_index([-1, 0, 0]), None);
        for i in 0..g.len() {
            assert_eq!(g.linear_index(g.voxel_of_index(i)), Some(i));
        }
    }

    #[test]
    fn fill_box_uses_centers() {
        let mut g = OccupancyGrid::new(Vec3::zeros(), 0.5, [4, 4, 4]).unwrap();
        g.fill_box(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.9, 2.0, 2.0), CellState::Free);
        assert_eq!(g.count(CellState::Free), 2 * 4 * 4);
    }

    proptest! {
        #[test]
        fn point_voxel_round_trip(
            ox in -10.0..10.0f64, oy in -10.0..10.0f64, oz in -10.0..10.0f64,
            res in 0.05..1.0f64,
            fx in 0.0..1.0f64, fy in 0.0..1.0f64, fz in 0.0..1.0f64,
        ) {
            let g = OccupancyGrid::new(Vec3::new(ox, oy, oz), res, [17, 9, 5]).unwrap();
            let extent = g.max_corner() - g.origin();
            let p = g.origin() + Vec3::new(fx * extent.x, fy * extent.y, fz * extent.z) * 0.999_999;
            if let Some(v) = g.voxel_of_point(&p) {
                let c = g.voxel_center(v);
                prop_assert_eq!(g.voxel_of_point(&c), Some(v));
                prop_assert!((c - p).abs().max() <= 0.5 * res + 1e-9);
            }
        }
    }
}
