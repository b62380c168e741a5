use std::ops::ControlFlow;

use crate::Vec3;

use super::{CellState, GridError, OccupancyGrid, Voxel};

/// One voxel visited by a ray, with the ray parameters where it enters and leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayStep {
    pub voxel: Voxel,
    pub index: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// First occupied voxel found by [`OccupancyGrid::cast_ray`].
#[derive(Debug, Clone, PartialEq)]
pub struct RayHit {
    /// Center of the hit voxel.
    pub point: Vec3,
    pub voxel: Voxel,
    /// Distance along the ray at which it enters the hit voxel.
    pub distance: f64,
    /// Every voxel visited from the origin voxel up to and including the hit voxel.
    pub traversed: Vec<Voxel>,
}

impl OccupancyGrid {
    /// Integer 3D-DDA walk from `origin` along `dir` (need not be unit; `t` is measured in
    /// multiples of `dir`). Visits every voxel whose entry parameter is `<= max_t`, stops at the
    /// grid boundary or when `visit` breaks. Returns the break value, if any.
    pub fn traverse<B>(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        max_t: f64,
        mut visit: impl FnMut(RayStep) -> ControlFlow<B>,
    ) -> Result<Option<B>, GridError> {
        let mut voxel = self
            .voxel_of_point(origin)
            .ok_or(GridError::OutOfBounds(*origin))?;
        let res = self.resolution();
        let rel = (origin - self.origin()) / res;

        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let d = dir[a];
            if d > 0.0 {
                step[a] = 1;
                t_max[a] = ((voxel[a] + 1) as f64 - rel[a]) * res / d;
                t_delta[a] = res / d;
            } else if d < 0.0 {
                step[a] = -1;
                t_max[a] = (voxel[a] as f64 - rel[a]) * res / d;
                t_delta[a] = -res / d;
            }
        }

        let mut t_enter = 0.0;
        loop {
            // axis with the nearest boundary; ties resolve to the lowest axis so every
            // step moves along exactly one axis (6-connected walk)
            let mut axis = 0;
            for a in 1..3 {
                if t_max[a] < t_max[axis] {
                    axis = a;
                }
            }
            let t_exit = t_max[axis];
            let index = self
                .linear_index(voxel)
                .expect("traversal stays inside the grid");
            if let ControlFlow::Break(b) = visit(RayStep {
                voxel,
                index,
                t_enter,
                t_exit,
            }) {
                return Ok(Some(b));
            }
            if !t_exit.is_finite() || t_exit > max_t {
                return Ok(None);
            }
            voxel[axis] += step[axis];
            if !self.in_bounds(voxel) {
                return Ok(None);
            }
            t_enter = t_exit;
            t_max[axis] += t_delta[axis];
        }
    }

    /// Casts a ray and returns the first `Occupied` voxel within `max_range`.
    ///
    /// `dir` must be unit length (±1e-9). Rays that leave the grid report no hit.
    pub fn cast_ray(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        max_range: f64,
    ) -> Result<Option<RayHit>, GridError> {
        if (dir.norm() - 1.0).abs() > 1e-9 {
            return Err(GridError::InvalidDirection(*dir));
        }
        if !(max_range > 0.0) {
            return Err(GridError::InvalidRange(max_range));
        }
        let mut traversed = Vec::new();
        let hit = self.traverse(origin, dir, max_range, |s| {
            traversed.push(s.voxel);
            if self.state_at(s.index) == CellState::Occupied {
                ControlFlow::Break((s.voxel, s.t_enter))
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(hit.map(|(voxel, distance)| RayHit {
            point: self.voxel_center(voxel),
            voxel,
            distance,
            traversed,
        }))
    }

    /// True when the straight segment `from -> to` reaches the voxel containing `to`
    /// without passing through an `Occupied` voxel, and `to` is within `max_range`.
    pub fn line_of_sight(&self, from: &Vec3, to: &Vec3, max_range: f64) -> bool {
        let d = to - from;
        let len = d.norm();
        if len > max_range {
            return false;
        }
        let Some(target) = self.voxel_of_point(to) else {
            return false;
        };
        if len == 0.0 {
            return self.voxel_of_point(from) == Some(target);
        }
        let dir = d / len;
        let r = self.traverse(from, &dir, len + self.resolution(), |s| {
            if s.voxel == target {
                ControlFlow::Break(true)
            } else if self.state_at(s.index) == CellState::Occupied {
                ControlFlow::Break(false)
            } else {
                ControlFlow::Continue(())
            }
        });
        matches!(r, Ok(Some(true)))
    }

    /// Integrates one scan taken from `sensor_origin`.
    ///
    /// For each beam every voxel visited strictly before the endpoint voxel becomes `Free`; the
    /// endpoint voxel of a hit becomes `Occupied`. `Occupied` voxels are never cleared. Beams
    /// whose endpoint leaves the map are truncated at the boundary. Returns the number of voxels
    /// that left the `Unknown` state.
    pub fn integrate_scan(
        &mut self,
        sensor_origin: &Vec3,
        hits: &[(Vec3, bool)],
    ) -> Result<usize, GridError> {
        self.integrate_scan_tracked(sensor_origin, hits, None)
    }

    /// [`integrate_scan`](Self::integrate_scan) that also records the indices of newly-known
    /// voxels.
    pub fn integrate_scan_tracked(
        &mut self,
        sensor_origin: &Vec3,
        hits: &[(Vec3, bool)],
        mut changed: Option<&mut Vec<usize>>,
    ) -> Result<usize, GridError> {
        if self.voxel_of_point(sensor_origin).is_none() {
            return Err(GridError::OutOfBounds(*sensor_origin));
        }
        let mut newly_known = 0;
        let mut mark = |grid: &mut OccupancyGrid, idx: usize, state: CellState| {
            let old = grid.cells()[idx];
            if old == CellState::Occupied || old == state {
                return;
            }
            if old == CellState::Unknown {
                newly_known += 1;
                if let Some(c) = changed.as_deref_mut() {
                    c.push(idx);
                }
            }
            grid.set_at(idx, state);
        };

        for (endpoint, hit) in hits {
            let delta = endpoint - sensor_origin;
            let len = delta.norm();
            let end_voxel = self.voxel_of_point(endpoint);
            if len == 0.0 || !len.is_finite() {
                if *hit {
                    if let Some(i) = end_voxel.and_then(|v| self.linear_index(v)) {
                        mark(self, i, CellState::Occupied);
                    }
                }
                continue;
            }
            let dir = delta / len;
            let mut path = Vec::new();
            let reached = self
                .traverse(sensor_origin, &dir, len, |s| {
                    if Some(s.voxel) == end_voxel {
                        return ControlFlow::Break(s.index);
                    }
                    path.push(s.index);
                    ControlFlow::Continue(())
                })
                .expect("origin checked above");
            for i in path {
                mark(self, i, CellState::Free);
            }
            if *hit {
                if let Some(i) = reached {
                    mark(self, i, CellState::Occupied);
                }
            }
        }
        Ok(newly_known)
    }
}
