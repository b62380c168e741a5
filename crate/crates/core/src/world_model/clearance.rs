use crate::Vec3;

use super::{CellState, OccupancyGrid, Voxel};

/// Voxels whose center lies within `clearance` of some `Occupied` voxel center.
#[derive(Debug, Clone)]
pub struct ClearanceMap {
    blocked: Vec<bool>,
    clearance: f64,
}

impl ClearanceMap {
    pub fn build(grid: &OccupancyGrid, clearance: f64) -> Self {
        let mut blocked = vec![false; grid.len()];
        let res = grid.resolution();
        let r = (clearance / res).floor() as i64;
        let mut offsets = Vec::new();
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let d2 = ((dx * dx + dy * dy + dz * dz) as f64) * res * res;
                    if d2 < clearance * clearance - 1e-12 || (dx, dy, dz) == (0, 0, 0) {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
        for (_, v) in grid.iter_state(CellState::Occupied) {
            for o in &offsets {
                if let Some(i) = grid.linear_index([v[0] + o[0], v[1] + o[1], v[2] + o[2]]) {
                    blocked[i] = true;
                }
            }
        }
        Self { blocked, clearance }
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn is_blocked_index(&self, idx: usize) -> bool {
        self.blocked[idx]
    }

    pub fn is_blocked(&self, grid: &OccupancyGrid, v: Voxel) -> bool {
        grid.linear_index(v).map_or(true, |i| self.blocked[i])
    }

    /// True when `p` lies in a `Free` voxel that keeps the clearance.
    pub fn is_safe_point(&self, grid: &OccupancyGrid, p: &Vec3) -> bool {
        match grid.index_of_point(p) {
            Some(i) => grid.state_at(i) == CellState::Free && !self.blocked[i],
            None => false,
        }
    }

    /// Samples the segment at half-voxel spacing; every sample must be a safe point.
    pub fn is_safe_segment(&self, grid: &OccupancyGrid, a: &Vec3, b: &Vec3) -> bool {
        let len = (b - a).norm();
        let n = ((len / (0.5 * grid.resolution())).ceil() as usize).max(1);
        (0..=n).all(|k| {
            let p = a + (b - a) * (k as f64 / n as f64);
            self.is_safe_point(grid, &p)
        })
    }
}
