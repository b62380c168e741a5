//! Procedural ground-truth scenes: a bent tunnel, a chain of rooms and an open cavern.

use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::world_model::{CellState, ClearanceMap, OccupancyGrid, FACE_NEIGHBORS};
use crate::Vec3;

use super::SimError;

/// Upper bound on scene voxels (one byte each).
pub const MAX_SCENE_VOXELS: usize = 64_000_000;

/// Thickness of the solid shell around every scene (m).
const SHELL: f64 = 0.4;
/// Clear radius required around the spawn point (m).
const SPAWN_CLEARANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Corridor,
    MultiRoom,
    Cavern,
}

impl SceneKind {
    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Corridor => "corridor",
            SceneKind::MultiRoom => "multi_room",
            SceneKind::Cavern => "cavern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Outer extent (m).
    pub size: [f64; 3],
    pub resolution: f64,
    /// Layout seed; the episode seed is used when absent.
    pub seed: Option<u64>,
    /// Builds the room chain without door openings (produces a disconnected scene).
    pub seal_doors: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            kind: SceneKind::Corridor,
            size: [40.0, 10.0, 5.0],
            resolution: 0.2,
            seed: None,
            seal_doors: false,
        }
    }
}

/// Ground truth: every voxel is `Free` or `Occupied`.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub grid: OccupancyGrid,
    pub spawn: Vec3,
    explorable: Vec<bool>,
    explorable_count: usize,
}

impl Scene {
    /// Whether voxel `idx` belongs to the free region connected to the spawn point.
    pub fn is_explorable(&self, idx: usize) -> bool {
        self.explorable[idx]
    }

    pub fn explorable_count(&self) -> usize {
        self.explorable_count
    }

    /// Stable hash of the grid bytes and spawn point.
    pub fn layout_hash(&self) -> u64 {
        let mut h = std::hash::DefaultHasher::new();
        self.grid.to_bytes().hash(&mut h);
        for k in 0..3 {
            self.spawn[k].to_bits().hash(&mut h);
        }
        h.finish()
    }
}

pub fn generate_scene(spec: &SceneSpec, episode_seed: u64) -> Result<Scene, SimError> {
    let seed = spec.seed.unwrap_or(episode_seed);
    let res = spec.resolution;
    if !(res > 0.0 && res.is_finite()) || spec.size.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(SimError::Config(format!(
            "scene size {:?} and resolution {res} must be positive",
            spec.size
        )));
    }
    let dims = spec.size.map(|s| (s / res).round().max(1.0) as usize);
    let voxels = dims.iter().product::<usize>();
    if voxels > MAX_SCENE_VOXELS {
        return Err(SimError::SceneTooLarge(voxels));
    }
    let mut grid = OccupancyGrid::filled(Vec3::zeros(), res, dims, CellState::Occupied)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = Vec3::from(spec.size);
    let spawn = match spec.kind {
        SceneKind::Corridor => corridor(&mut grid, &size, &mut rng)?,
        SceneKind::MultiRoom => multi_room(&mut grid, &size, spec.seal_doors, &mut rng)?,
        SceneKind::Cavern => cavern(&mut grid, &size, &mut rng)?,
    };

    if !ClearanceMap::build(&grid, SPAWN_CLEARANCE).is_safe_point(&grid, &spawn) {
        return Err(SimError::SpawnBlocked(spawn));
    }
    let explorable = flood_fill(&grid, &spawn);
    let explorable_count = explorable.iter().filter(|&&e| e).count();
    let total = grid.count(CellState::Free);
    if explorable_count != total {
        return Err(SimError::Disconnected {
            reachable: explorable_count,
            total,
        });
    }
    Ok(Scene {
        name: spec.kind.name().to_string(),
        grid,
        spawn,
        explorable,
        explorable_count,
    })
}

/// Free voxels 6-connected to the voxel containing `start`.
pub fn flood_fill(grid: &OccupancyGrid, start: &Vec3) -> Vec<bool> {
    let mut seen = vec![false; grid.len()];
    let Some(s) = grid.index_of_point(start) else {
        return seen;
    };
    if grid.state_at(s) != CellState::Free {
        return seen;
    }
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(i) = queue.pop_front() {
        let v = grid.voxel_of_index(i);
        for o in FACE_NEIGHBORS {
            if let Some(j) = grid.linear_index([v[0] + o[0], v[1] + o[1], v[2] + o[2]]) {
                if !seen[j] && grid.state_at(j) == CellState::Free {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    seen
}

fn too_small(size: &Vec3, min: [f64; 3], kind: SceneKind) -> Result<(), SimError> {
    if (0..3).any(|k| size[k] < min[k]) {
        return Err(SimError::SceneTooSmall([size.x, size.y, size.z], kind.name()));
    }
    Ok(())
}

fn carve(grid: &mut OccupancyGrid, lo: [f64; 3], hi: [f64; 3]) {
    grid.fill_box(Vec3::from(lo), Vec3::from(hi), CellState::Free);
}

fn solid(grid: &mut OccupancyGrid, lo: [f64; 3], hi: [f64; 3]) {
    grid.fill_box(Vec3::from(lo), Vec3::from(hi), CellState::Occupied);
}

/// Z-shaped tunnel: a leg along x, a crossing leg along y, and a second leg along x, with
/// jittered bend position, ceiling heights and a few floor boulders.
fn corridor(grid: &mut OccupancyGrid, size: &Vec3, rng: &mut ChaCha8Rng) -> Result<Vec3, SimError> {
    too_small(size, [16.0, 9.0, 3.0], SceneKind::Corridor)?;
    let (l, w, h) = (size.x, size.y, size.z);
    let tw = 4.0;
    let half = tw / 2.0;
    let ya = SHELL + half + rng.random_range(0.0..0.5);
    let yb = w - SHELL - half - rng.random_range(0.0..0.5);
    let x1 = l * rng.random_range(0.4..0.6);
    let ceil = |rng: &mut ChaCha8Rng| h - SHELL - rng.random_range(0.0..(0.6f64).min(h - 2.8));
    let (ha, hb, hc) = (ceil(rng), ceil(rng), ceil(rng));
    carve(grid, [SHELL, ya - half, SHELL], [x1 + half, ya + half, ha]);
    carve(grid, [x1 - half, ya - half, SHELL], [x1 + half, yb + half, hb]);
    carve(grid, [x1 - half, yb - half, SHELL], [l - SHELL, yb + half, hc]);

    let spawn = Vec3::new(SHELL + 2.0, ya, SHELL + 1.2);
    // boulders against the tunnel walls, away from the spawn point
    for leg in 0..3 {
        let s = rng.random_range(0.8..1.2);
        let (cx, cy) = match leg {
            0 => (rng.random_range(SHELL + 5.0..(x1 - half).max(SHELL + 5.5)), ya - half + s / 2.0),
            1 => (x1 + half - s / 2.0, (ya + yb) / 2.0),
            _ => (rng.random_range((x1 + half + 1.0)..(l - SHELL - 1.0).max(x1 + half + 1.5)), yb + half - s / 2.0),
        };
        solid(grid, [cx - s / 2.0, cy - s / 2.0, 0.0], [cx + s / 2.0, cy + s / 2.0, SHELL + s]);
    }
    Ok(spawn)
}

/// Three rooms in a row separated by walls with door openings; the middle room holds a barrier
/// whose height varies along its length.
fn multi_room(grid: &mut OccupancyGrid, size: &Vec3, seal_doors: bool, rng: &mut ChaCha8Rng) -> Result<Vec3, SimError> {
    too_small(size, [12.0, 6.0, 3.0], SceneKind::MultiRoom)?;
    let (l, w, h) = (size.x, size.y, size.z);
    carve(grid, [SHELL, SHELL, SHELL], [l - SHELL, w - SHELL, h - SHELL]);
    let door_w = 2.0;
    let door_h = (h - SHELL - 0.4).min(2.6);
    for k in 1..3 {
        let x = l * k as f64 / 3.0;
        solid(grid, [x - 0.2, 0.0, 0.0], [x + 0.2, w, h]);
        if !seal_doors {
            let yc = rng.random_range(SHELL + 0.5 + door_w / 2.0..w - SHELL - 0.5 - door_w / 2.0);
            carve(grid, [x - 0.3, yc - door_w / 2.0, SHELL], [x + 0.3, yc + door_w / 2.0, SHELL + door_h]);
        }
    }
    // height-varying barrier across part of the middle room
    let bx = l / 2.0;
    let span = w * 0.6;
    let mut y = SHELL;
    while y < SHELL + span {
        let bh = rng.random_range(0.8..(h - SHELL - 1.2).min(2.0));
        solid(grid, [bx - 0.2, y, 0.0], [bx + 0.2, y + 1.0, SHELL + bh]);
        y += 1.0;
    }
    Ok(Vec3::new(SHELL + 1.6, w / 2.0, SHELL + 1.2))
}

/// Ellipsoidal void with a bumpy wall, a flat floor, a cylindrical pit and two pillars.
fn cavern(grid: &mut OccupancyGrid, size: &Vec3, rng: &mut ChaCha8Rng) -> Result<Vec3, SimError> {
    too_small(size, [12.0, 12.0, 6.0], SceneKind::Cavern)?;
    let (l, w, h) = (size.x, size.y, size.z);
    let floor = SHELL + 1.6;
    let c = Vec3::new(l / 2.0, w / 2.0, floor);
    let axes = Vec3::new(l / 2.0 - SHELL - 0.4, w / 2.0 - SHELL - 0.4, h - floor - SHELL - 0.2);
    let phases: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let pit_r = rng.random_range(1.5..2.5);
    let pit = Vec3::new(
        c.x + rng.random_range(-0.3..0.3) * axes.x,
        c.y + rng.random_range(-0.3..0.3) * axes.y,
        0.0,
    );
    let dims = grid.dims();
    for z in 0..dims[2] as i64 {
        for y in 0..dims[1] as i64 {
            for x in 0..dims[0] as i64 {
                let p = grid.voxel_center([x, y, z]);
                let d = p - c;
                let az = d.y.atan2(d.x);
                let bump = 1.0 - 0.08 * (1.0 + (3.0 * az + phases[0]).sin() * (2.0 * az + phases[1]).cos());
                let e = (d.x / axes.x).powi(2) + (d.y / axes.y).powi(2) + (d.z.max(0.0) / axes.z).powi(2);
                let in_void = p.z >= floor && e <= bump * bump;
                let r_pit = ((p.x - pit.x).powi(2) + (p.y - pit.y).powi(2)).sqrt();
                let in_pit = p.z >= SHELL && p.z < floor && r_pit <= pit_r;
                if in_void || in_pit {
                    grid.set([x, y, z], CellState::Free);
                }
            }
        }
    }
    let spawn = Vec3::new(c.x - 0.5 * axes.x, c.y, floor + 1.2);
    for _ in 0..2 {
        // keep pillars clear of the spawn point and the pit rim
        for _attempt in 0..32 {
            let px = c.x + rng.random_range(-0.5..0.5) * axes.x;
            let py = c.y + rng.random_range(-0.5..0.5) * axes.y;
            let q = Vec3::new(px, py, spawn.z);
            let far_from_pit = ((px - pit.x).powi(2) + (py - pit.y).powi(2)).sqrt() > pit_r + 1.5;
            if (q - spawn).norm() > 3.0 && far_from_pit {
                solid(grid, [px - 0.5, py - 0.5, 0.0], [px + 0.5, py + 0.5, h]);
                break;
            }
        }
    }
    Ok(spawn)
}
