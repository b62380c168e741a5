//! Incrementally maintained surface normals of believed-occupied voxels.

use std::collections::{BTreeMap, BTreeSet};

use crate::scan_controller::plane_normal;
use crate::world_model::{CellState, OccupancyGrid};
use crate::Vec3;

/// Normal per occupied voxel from a plane fit to its `k` nearest occupied neighbours inside a
/// cube of `radius` voxels. Entries are recomputed lazily when their neighbourhood changes.
#[derive(Debug, Clone)]
pub struct SurfaceNormals {
    k: usize,
    radius: i64,
    normals: BTreeMap<usize, Option<Vec3>>,
    dirty: BTreeSet<usize>,
}

impl SurfaceNormals {
    pub fn new(k: usize, radius: i64) -> Self {
        Self {
            k: k.max(3),
            radius: radius.max(1),
            normals: BTreeMap::new(),
            dirty: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normal(&self, idx: usize) -> Option<Vec3> {
        self.normals.get(&idx).copied().flatten()
    }

    /// Registers a newly occupied voxel and marks its tracked neighbours for recomputation.
    pub fn note_occupied(&mut self, grid: &OccupancyGrid, idx: usize) {
        if self.normals.contains_key(&idx) || grid.state_at(idx) != CellState::Occupied {
            return;
        }
        self.normals.insert(idx, None);
        let v = grid.voxel_of_index(idx);
        let r = self.radius;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if let Some(j) = grid.linear_index([v[0] + dx, v[1] + dy, v[2] + dz]) {
                        if self.normals.contains_key(&j) {
                            self.dirty.insert(j);
                        }
                    }
                }
            }
        }
    }

    /// Recomputes every dirty normal.
    pub fn refresh(&mut self, grid: &OccupancyGrid) {
        let r = self.radius;
        let mut nbrs: Vec<(f64, usize)> = Vec::new();
        for idx in std::mem::take(&mut self.dirty) {
            let v = grid.voxel_of_index(idx);
            let c = grid.index_center(idx);
            nbrs.clear();
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if let Some(j) = grid.linear_index([v[0] + dx, v[1] + dy, v[2] + dz]) {
                            if grid.state_at(j) == CellState::Occupied {
                                nbrs.push(((grid.index_center(j) - c).norm_squared(), j));
                            }
                        }
                    }
                }
            }
            nbrs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let pts: Vec<Vec3> = nbrs.iter().take(self.k).map(|&(_, j)| grid.index_center(j)).collect();
            let n = if pts.len() >= self.k { plane_normal(&pts) } else { None };
            self.normals.insert(idx, n);
        }
    }

    /// `(point, normal)` pairs with a valid normal within `range` of `center`.
    pub fn points_within(&self, grid: &OccupancyGrid, center: &Vec3, range: f64) -> Vec<(Vec3, Vec3)> {
        let r2 = range * range;
        self.normals
            .iter()
            .filter_map(|(&i, n)| {
                let n = (*n)?;
                let p = grid.index_center(i);
                ((p - center).norm_squared() <= r2).then_some((p, n))
            })
            .collect()
    }
}
