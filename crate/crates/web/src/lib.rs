//! Browser bindings over a small floor plan: the direction-dependent localization cost seen from
//! a sensor position, closed-loop scan-rate rollouts toward a frontier, and open tours.
//!
//! Everything is plain Rust; the `wasm_bindgen` attributes only add a JS-facing ABI, so the same
//! methods run (and are tested) natively.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use nalgebra::Matrix3;
use scanplan_core::global_planner::{solve_open_atsp, tour_cost, CostMatrix};
use scanplan_core::scan_controller::{
    solve_fu_mpc, ControlSequence, MpcConfig, MpcProblem, RewardTarget, ScanState, UncertaintyTable,
};
use scanplan_core::trajectory::ReferenceTrajectory;
use scanplan_core::world_model::{CellState, OccupancyGrid};
use scanplan_core::Vec3;
use wasm_bindgen::prelude::*;

const RES: f64 = 0.2;
const HEIGHT: f64 = 3.2;
const SENSOR_Z: f64 = 1.5;
const MAX_RANGE: f64 = 15.0;
const AZIMUTH_BEAMS: usize = 360;
const ELEVATIONS_DEG: [f64; 7] = [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0];
/// Cruise speed used to turn path lengths into travel times (m/s).
const V_MAX: f64 = 1.5;

/// A walled floor plan, extruded between a floor and a ceiling slab.
#[wasm_bindgen]
pub struct Room {
    grid: OccupancyGrid,
    cfg: MpcConfig,
}

/// One closed-loop rollout; series are sampled every controller period.
#[wasm_bindgen]
pub struct Rollout {
    theta: Vec<f64>,
    omega: Vec<f64>,
    objective: Vec<f64>,
    table: Vec<f64>,
    dt: f64,
}

#[wasm_bindgen]
impl Rollout {
    /// Motor angle wrapped to `[0, 2pi)`.
    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    pub fn omega(&self) -> Vec<f64> {
        self.omega.clone()
    }

    pub fn objective(&self) -> Vec<f64> {
        self.objective.clone()
    }

    /// The uncertainty table the rollout used, normalised by its empty-direction value.
    pub fn table(&self) -> Vec<f64> {
        self.table.clone()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Visiting order and the geodesic polyline through the stops.
#[wasm_bindgen]
pub struct Tour {
    order: Vec<u32>,
    path: Vec<f64>,
    cost: f64,
}

#[wasm_bindgen]
impl Tour {
    /// Stop indices in visiting order (input order, zero-based).
    pub fn order(&self) -> Vec<u32> {
        self.order.clone()
    }

    /// Flattened `x, y` pairs from the start through every stop.
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }

    /// Travel time at cruise speed (s); infinite when a stop cannot be reached.
    pub fn cost(&self) -> f64 {
        self.cost
    }
}

#[wasm_bindgen]
impl Room {
    /// `preset` 0: L-shaped corridor; 1: hall with pillars; 2: two rooms joined by a door.
    #[wasm_bindgen(constructor)]
    pub fn new(preset: u32) -> Room {
        let (w, h) = (20.0, 12.0);
        let dims = [(w / RES) as usize, (h / RES) as usize, (HEIGHT / RES) as usize];
        let mut g = OccupancyGrid::filled(Vec3::zeros(), RES, dims, CellState::Free).expect("valid dims");
        let mut wall = |x0: f64, y0: f64, x1: f64, y1: f64| {
            g.fill_box(Vec3::new(x0, y0, 0.0), Vec3::new(x1, y1, HEIGHT), CellState::Occupied);
        };
        wall(0.0, 0.0, w, 0.2);
        wall(0.0, h - 0.2, w, h);
        wall(0.0, 0.0, 0.2, h);
        wall(w - 0.2, 0.0, w, h);
        match preset {
            0 => {
                wall(0.0, 4.0, 14.0, 12.0);
                wall(14.0, 8.0, 16.0, 8.4);
            }
            1 => {
                for (x, y) in [(5.0, 4.0), (10.0, 4.0), (15.0, 4.0), (5.0, 8.0), (10.0, 8.0), (15.0, 8.0)] {
                    wall(x - 0.4, y - 0.4, x + 0.4, y + 0.4);
                }
            }
            _ => {
                wall(9.8, 0.0, 10.2, 5.0);
                wall(9.8, 6.6, 10.2, h);
                wall(2.0, 8.0, 6.0, 8.4);
            }
        }
        g.fill_box(Vec3::zeros(), Vec3::new(w, h, 0.2), CellState::Occupied);
        g.fill_box(Vec3::new(0.0, 0.0, HEIGHT - 0.2), Vec3::new(w, h, HEIGHT), CellState::Occupied);
        Room {
            grid: g,
            cfg: MpcConfig::default(),
        }
    }

    pub fn width(&self) -> f64 {
        self.grid.dims()[0] as f64 * RES
    }

    pub fn height(&self) -> f64 {
        self.grid.dims()[1] as f64 * RES
    }

    pub fn resolution(&self) -> f64 {
        RES
    }

    /// Occupancy of the sensor-height slice, row-major from `y = 0`; 1 for walls.
    pub fn walls(&self) -> Vec<u8> {
        let [nx, ny, _] = self.grid.dims();
        let z = (SENSOR_Z / RES) as i64;
        let mut out = Vec::with_capacity(nx * ny);
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                out.push(u8::from(self.grid.state([x, y, z]) == Some(CellState::Occupied)));
            }
        }
        out
    }

    pub fn is_free(&self, x: f64, y: f64) -> bool {
        self.grid.state_at_point(&Vec3::new(x, y, SENSOR_Z)) == Some(CellState::Free)
    }

    /// Localization cost at `n_c` motor angles for a sensor at `(x, y)`, divided by the
    /// empty-direction cost. Empty when the position is inside a wall.
    pub fn uncertainty(&self, x: f64, y: f64, n_c: usize) -> Vec<f64> {
        match self.table(x, y, n_c.max(2)) {
            Some(t) => normalised(&t),
            None => Vec::new(),
        }
    }

    /// Runs the receding-horizon scan controller for `seconds` with the sensor held at `(x, y)`
    /// and a single frontier of `intensity` cells at `(tx, ty)`.
    pub fn rollout(&self, x: f64, y: f64, tx: f64, ty: f64, intensity: f64, seconds: f64) -> Option<Rollout> {
        let table = self.table(x, y, self.cfg.n_c)?;
        let p = Vec3::new(x, y, SENSOR_Z);
        let traj = ReferenceTrajectory::hold(p, 0.0);
        let targets = [RewardTarget {
            center: Vec3::new(tx, ty, SENSOR_Z),
            intensity: intensity.max(0.0),
        }];
        let i = Matrix3::identity();
        let cfg = &self.cfg;
        let mut x_state = ScanState {
            theta: 0.0,
            omega: cfg.limits.omega_max,
        };
        let mut warm = ControlSequence::zeros(cfg.horizon, cfg.dt);
        let steps = (seconds.max(0.0) / cfg.dt).round() as usize;
        let mut out = Rollout {
            theta: Vec::with_capacity(steps),
            omega: Vec::with_capacity(steps),
            objective: Vec::with_capacity(steps),
            table: normalised(&table),
            dt: cfg.dt,
        };
        for k in 0..steps {
            let problem = MpcProblem::new(x_state, &traj, k as f64 * cfg.dt, &table, &targets, &i, &i, cfg);
            let sol = solve_fu_mpc(&problem, &warm, cfg.max_iters, cfg.rel_tol);
            x_state = sol.states[0];
            out.theta.push(x_state.theta.rem_euclid(TAU));
            out.omega.push(x_state.omega);
            out.objective.push(sol.objective);
            warm = sol.u;
        }
        Some(out)
    }

    /// Orders `stops` (flattened `x, y` pairs) into an open tour from `(sx, sy)` that minimises
    /// travel time along 8-connected free cells of the floor slice.
    pub fn tour(&self, sx: f64, sy: f64, stops: &[f64]) -> Tour {
        let mut pts = vec![(sx, sy)];
        pts.extend(stops.chunks_exact(2).map(|c| (c[0], c[1])));
        let cells: Vec<Option<usize>> = pts.iter().map(|&(x, y)| self.floor_cell(x, y)).collect();
        let n = pts.len();
        let mut costs = CostMatrix::zeros(n);
        let mut trees = Vec::with_capacity(n);
        for i in 0..n {
            let tree = cells[i].map(|c| self.dijkstra(c));
            for j in 1..n {
                if i != j {
                    let d = match (&tree, cells[j]) {
                        (Some((dist, _)), Some(c)) => dist[c],
                        _ => f64::INFINITY,
                    };
                    costs.set(i, j, d / V_MAX);
                }
            }
            trees.push(tree);
        }
        let order = solve_open_atsp(&costs);
        let mut path = vec![sx, sy];
        for w in order.windows(2) {
            if let (Some((_, prev)), Some(goal)) = (&trees[w[0]], cells[w[1]]) {
                for c in self.unwind(prev, goal).into_iter().skip(1) {
                    let (x, y) = self.cell_center(c);
                    path.extend([x, y]);
                }
            }
        }
        Tour {
            cost: tour_cost(&costs, &order),
            order: order[1..].iter().map(|&k| (k - 1) as u32).collect(),
            path,
        }
    }
}

fn normalised(t: &UncertaintyTable) -> Vec<f64> {
    let f0 = t.f_empty();
    t.values().iter().map(|v| v / f0).collect()
}

impl Room {
    /// Scans from `(x, y)` and builds the uncertainty table from the hit surfaces.
    fn table(&self, x: f64, y: f64, n_c: usize) -> Option<UncertaintyTable> {
        let sensor = Vec3::new(x, y, SENSOR_Z);
        if !self.is_free(x, y) {
            return None;
        }
        let points = self.scan(&sensor);
        Some(UncertaintyTable::build(
            &points,
            &sensor,
            &Matrix3::identity(),
            n_c,
            self.cfg.half_window,
            self.cfg.epsilon,
        ))
    }

    /// Hit points with the normal of the voxel face each beam entered through.
    fn scan(&self, sensor: &Vec3) -> Vec<(Vec3, Vec3)> {
        let mut out = Vec::new();
        for el in ELEVATIONS_DEG {
            let (se, ce) = el.to_radians().sin_cos();
            for a in 0..AZIMUTH_BEAMS {
                let (sa, ca) = (a as f64 * TAU / AZIMUTH_BEAMS as f64).sin_cos();
                let d = Vec3::new(ce * ca, ce * sa, se);
                let Ok(Some(hit)) = self.grid.cast_ray(sensor, &d, MAX_RANGE) else {
                    continue;
                };
                let n = match hit.traversed.len() {
                    0 | 1 => -d,
                    k => {
                        let (a, b) = (hit.traversed[k - 2], hit.traversed[k - 1]);
                        Vec3::new((a[0] - b[0]) as f64, (a[1] - b[1]) as f64, (a[2] - b[2]) as f64)
                    }
                };
                out.push((sensor + d * hit.distance, n.normalize()));
            }
        }
        out
    }

    fn floor_cell(&self, x: f64, y: f64) -> Option<usize> {
        let v = self.grid.voxel_of_point(&Vec3::new(x, y, SENSOR_Z))?;
        (self.grid.state(v) == Some(CellState::Free)).then(|| v[1] as usize * self.grid.dims()[0] + v[0] as usize)
    }

    fn cell_center(&self, c: usize) -> (f64, f64) {
        let nx = self.grid.dims()[0];
        ((c % nx) as f64 * RES + 0.5 * RES, (c / nx) as f64 * RES + 0.5 * RES)
    }

    /// Shortest 8-connected distances (m) over the free floor slice.
    fn dijkstra(&self, source: usize) -> (Vec<f64>, Vec<usize>) {
        let [nx, ny, _] = self.grid.dims();
        let z = (SENSOR_Z / RES) as i64;
        let free: Vec<bool> = (0..nx * ny)
            .map(|c| self.grid.state([(c % nx) as i64, (c / nx) as i64, z]) == Some(CellState::Free))
            .collect();
        let mut dist = vec![f64::INFINITY; nx * ny];
        let mut prev = vec![usize::MAX; nx * ny];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((0u64, source)));
        while let Some(Reverse((d, c))) = heap.pop() {
            if d != dist[c].to_bits() {
                continue;
            }
            let (cx, cy) = ((c % nx) as i64, (c / nx) as i64);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || y < 0 || x >= nx as i64 || y >= ny as i64 {
                    continue;
                }
                let m = y as usize * nx + x as usize;
                // no corner cutting
                if !free[m] || !free[cy as usize * nx + x as usize] || !free[y as usize * nx + cx as usize] {
                    continue;
                }
                let nd = dist[c] + RES * ((dx * dx + dy * dy) as f64).sqrt();
                if nd < dist[m] {
                    dist[m] = nd;
                    prev[m] = c;
                    // non-negative floats order like their bit patterns
                    heap.push(Reverse((nd.to_bits(), m)));
                }
            }
        }
        (dist, prev)
    }

    fn unwind(&self, prev: &[usize], goal: usize) -> Vec<usize> {
        let mut cells = vec![goal];
        let mut c = goal;
        while prev[c] != usize::MAX {
            c = prev[c];
            cells.push(c);
        }
        cells.reverse();
        cells
    }
}
