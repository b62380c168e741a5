//! Deterministic closed-loop episode: plan, follow, rotate, fire, integrate, score.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::frontier::{
    cluster_frontiers, sample_viewpoints, update_dynamic_clusters, visible_region, DynamicCluster,
    FrontierCluster, FrontierConfig,
};
use crate::global_planner::{plan_global_tour, GlobalPlannerConfig, PlanStatus, TopoGraph, TourPlan, VehicleState};
use crate::scan_controller::{
    interp_periodic, scan_direction, solve_fu_mpc, ControlSequence, MpcConfig, MpcProblem, RewardTarget, ScanState,
    UncertaintyTable,
};
use crate::trajectory::{plan_reference, ReferenceTrajectory};
use crate::world_model::{detect_frontiers, CellState, ClearanceMap, OccupancyGrid, SensorPoseChain};
use crate::{wrap_angle, Vec3};

use super::lidar::{simulate_lidar, SensorConfig};
use super::scene::{generate_scene, Scene, SceneSpec};
use super::surface::SurfaceNormals;
use super::SimError;

/// Tolerance on bound checks of returned MPC solutions.
const BOUND_TOL: f64 = 1e-9;

/// Motor command policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ControllerSpec {
    FuMpc,
    /// Constant rotation rate in degrees per second.
    Fixed { deg_per_s: f64 },
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerSpec::FuMpc => write!(f, "fu_mpc"),
            ControllerSpec::Fixed { deg_per_s } => write!(f, "fixed{deg_per_s}"),
        }
    }
}

impl FromStr for ControllerSpec {
    type Err = String;

    /// Accepts `fu_mpc`, `fixed30`, `fixed_30` and `fixed(30)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("fu_mpc") || s.eq_ignore_ascii_case("fu-mpc") {
            return Ok(ControllerSpec::FuMpc);
        }
        let rest = s
            .strip_prefix("fixed")
            .ok_or_else(|| format!("unknown controller `{s}` (expected fu_mpc or fixedN)"))?;
        let rest = rest.trim_start_matches('_').trim_start_matches('(').trim_end_matches(')');
        let deg_per_s: f64 = rest
            .parse()
            .map_err(|_| format!("bad fixed rate in `{s}`"))?;
        if !deg_per_s.is_finite() {
            return Err(format!("bad fixed rate in `{s}`"));
        }
        Ok(ControllerSpec::Fixed { deg_per_s })
    }
}

impl TryFrom<String> for ControllerSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ControllerSpec> for String {
    fn from(c: ControllerSpec) -> Self {
        c.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub scene: SceneSpec,
    pub controller: ControllerSpec,
    /// Simulation step (s).
    pub dt_sim: f64,
    pub time_limit: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Pose-noise scale of the localization proxy (m).
    pub kappa_loc: f64,
    /// Fraction of explorable free voxels that must be known to finish.
    pub completion_threshold: f64,
    pub table_rate_hz: f64,
    /// Hover time before the first global plan; pose-error statistics start after it (s).
    pub warmup: f64,
    /// Episode ends after this long without a reachable goal (s).
    pub stall_timeout: f64,
    /// Time spent at a reached viewpoint, after the sensor has faced its frontier, before the
    /// frontier is given up (s).
    pub dwell_timeout: f64,
    /// Upper bound on the wait at a reached viewpoint (s).
    pub max_dwell: f64,
    /// A goal is kept while at least this fraction of its frontier cells remain frontier.
    pub goal_retain_fraction: f64,
    pub normal_k: usize,
    /// Half width of the neighbourhood cube used for normals (voxels).
    pub normal_radius: i64,
    /// Frontier clusters with fewer cells are pursued only when no larger cluster remains.
    pub min_frontier_cells: usize,
    /// Cluster cells probed per candidate when scoring visibility.
    pub visibility_samples: usize,
    /// Motor rate at the start of an episode (rad/s).
    pub initial_omega: f64,
    /// Disables global planning; the vehicle holds its spawn pose.
    pub explore: bool,
    pub sensor: SensorConfig,
    pub mpc: MpcConfig,
    pub frontier: FrontierConfig,
    pub planner: GlobalPlannerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scene: SceneSpec::default(),
            controller: ControllerSpec::FuMpc,
            dt_sim: 0.01,
            time_limit: 300.0,
            v_max: 3.0,
            a_max: 2.0,
            kappa_loc: 0.02,
            completion_threshold: 0.95,
            table_rate_hz: 2.0,
            warmup: 1.0,
            stall_timeout: 10.0,
            dwell_timeout: 2.0,
            max_dwell: 15.0,
            goal_retain_fraction: 0.25,
            normal_k: 10,
            normal_radius: 2,
            min_frontier_cells: 8,
            visibility_samples: 24,
            initial_omega: std::f64::consts::TAU,
            explore: true,
            sensor: SensorConfig::default(),
            mpc: MpcConfig::default(),
            frontier: FrontierConfig::default(),
            planner: GlobalPlannerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Periods {
    fire: u64,
    cycle: u64,
    table: u64,
    replan: u64,
    limit: u64,
}

fn period_steps(name: &str, period: f64, dt: f64) -> Result<u64, SimError> {
    let r = period / dt;
    let n = r.round();
    if !r.is_finite() || n < 1.0 || (r - n).abs() > 1e-6 * n {
        return Err(SimError::Config(format!(
            "{name} period {period} s is not a positive multiple of dt_sim {dt} s"
        )));
    }
    Ok(n as u64)
}

impl SimConfig {
    fn periods(&self) -> Result<Periods, SimError> {
        let dt = self.dt_sim;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::Config(format!("dt_sim must be positive, got {dt}")));
        }
        if dt > self.mpc.dt {
            return Err(SimError::Config(format!(
                "dt_sim {dt} exceeds the control period {}",
                self.mpc.dt
            )));
        }
        Ok(Periods {
            fire: period_steps("sensor", 1.0 / self.sensor.rate_hz, dt)?,
            cycle: period_steps("control", self.mpc.dt, dt)?,
            table: period_steps("table", 1.0 / self.table_rate_hz, dt)?,
            replan: period_steps("replan", self.planner.replan_period, dt)?,
            limit: period_steps("time limit", self.time_limit, dt)?,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.periods()?;
        let positive = [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("sensor.max_range", self.sensor.max_range),
            ("frontier.safety_clearance", self.frontier.safety_clearance),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.kappa_loc >= 0.0 && self.kappa_loc.is_finite()) {
            return Err(SimError::Config(format!("kappa_loc must be >= 0, got {}", self.kappa_loc)));
        }
        if !(self.completion_threshold > 0.0 && self.completion_threshold <= 1.0) {
            return Err(SimError::Config(format!(
                "completion_threshold must lie in (0, 1], got {}",
                self.completion_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.goal_retain_fraction) {
            return Err(SimError::Config(format!(
                "goal_retain_fraction must lie in [0, 1], got {}",
                self.goal_retain_fraction
            )));
        }
        if !(self.sensor.sigma_r >= 0.0) || self.sensor.rows == 0 || self.sensor.cols == 0 {
            return Err(SimError::Config("sensor needs rows, cols >= 1 and sigma_r >= 0".into()));
        }
        if self.mpc.horizon == 0 || self.mpc.n_c < 2 {
            return Err(SimError::Config("mpc needs horizon >= 1 and n_c >= 2".into()));
        }
        let l = &self.mpc.limits;
        if !(l.omega_min <= l.omega_max && l.u_max >= 0.0) {
            return Err(SimError::Config("mpc limits need omega_min <= omega_max and u_max >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    TimeLimit,
    /// Frontiers remain but none could be reached for the stall timeout.
    Stalled,
    /// No frontier targets remain although coverage is below the threshold.
    Exhausted,
    Collision,
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EndReason::Completed => "completed",
            EndReason::TimeLimit => "time_limit",
            EndReason::Stalled => "stalled",
            EndReason::Exhausted => "exhausted",
            EndReason::Collision => "collision",
        };
        f.write_str(s)
    }
}

/// One row per control cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub t: f64,
    pub position: Vec3,
    /// Motor angle wrapped to `[0, 2π)`.
    pub theta: f64,
    /// Rate applied over the coming cycle.
    pub omega: f64,
    pub coverage: f64,
    pub trajectory_length: f64,
    pub pose_error: f64,
    pub sigma_pose: f64,
    /// MPC objective, summed normalized complexity and uncertainty costs (MPC cycles only).
    pub objective: Option<f64>,
    pub j_sum: Option<f64>,
    pub f_sum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scene: String,
    pub layout_hash: u64,
    pub controller: String,
    pub seed: u64,
    pub completion: bool,
    pub end_reason: EndReason,
    /// Completion time when completed, otherwise the time the episode stopped (s).
    pub time: f64,
    pub trajectory_m: f64,
    pub coverage_final: f64,
    pub ape_proxy_rmse: f64,
    pub ape_proxy_mean: f64,
    pub mpc_solves: usize,
    pub mpc_bound_violations: usize,
    pub mpc_ascents: usize,
    pub soundness_violations: usize,
    pub collision: bool,
    pub replans: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeMetrics {
    pub scene: String,
    pub layout_hash: u64,
    pub controller: ControllerSpec,
    pub seed: u64,
    pub cycles: Vec<CycleRecord>,
    /// Wall-clock time of every MPC solve (s); not part of the deterministic output.
    pub solve_times: Vec<f64>,
    pub end_reason: Option<EndReason>,
    pub end_time: f64,
    pub completion_time: Option<f64>,
    pub trajectory_length: f64,
    pub coverage_final: f64,
    pub pose_samples: u64,
    pub pose_error_sum: f64,
    pub pose_error_sq_sum: f64,
    pub mpc_solves: usize,
    pub mpc_bound_violations: usize,
    pub mpc_ascents: usize,
    /// Largest count of believed-free voxels that are occupied in the scene.
    pub soundness_violations: usize,
    pub collision: bool,
    pub replans: usize,
}

impl EpisodeMetrics {
    fn new(scene: &Scene, cfg: &SimConfig) -> Self {
        Self {
            scene: scene.name.clone(),
            layout_hash: scene.layout_hash(),
            controller: cfg.controller,
            seed: cfg.seed,
            cycles: Vec::new(),
            solve_times: Vec::new(),
            end_reason: None,
            end_time: 0.0,
            completion_time: None,
            trajectory_length: 0.0,
            coverage_final: 0.0,
            pose_samples: 0,
            pose_error_sum: 0.0,
            pose_error_sq_sum: 0.0,
            mpc_solves: 0,
            mpc_bound_violations: 0,
            mpc_ascents: 0,
            soundness_violations: 0,
            collision: false,
            replans: 0,
        }
    }

    pub fn completed(&self) -> bool {
        self.end_reason == Some(EndReason::Completed)
    }

    /// Root mean square of the pose-error proxy norm.
    pub fn ape_proxy_rmse(&self) -> f64 {
        if self.pose_samples == 0 {
            0.0
        } else {
            (self.pose_error_sq_sum / self.pose_samples as f64).sqrt()
        }
    }

    /// Mean of the pose-error proxy norm.
    pub fn ape_proxy_mean(&self) -> f64 {
        if self.pose_samples == 0 {
            0.0
        } else {
            self.pose_error_sum / self.pose_samples as f64
        }
    }

    pub fn coverage_monotone(&self) -> bool {
        self.cycles.windows(2).all(|w| w[1].coverage >= w[0].coverage)
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            scene: self.scene.clone(),
            layout_hash: self.layout_hash,
            controller: self.controller.to_string(),
            seed: self.seed,
            completion: self.completed(),
            end_reason: self.end_reason.unwrap_or(EndReason::TimeLimit),
            time: self.completion_time.unwrap_or(self.end_time),
            trajectory_m: self.trajectory_length,
            coverage_final: self.coverage_final,
            ape_proxy_rmse: self.ape_proxy_rmse(),
            ape_proxy_mean: self.ape_proxy_mean(),
            mpc_solves: self.mpc_solves,
            mpc_bound_violations: self.mpc_bound_violations,
            mpc_ascents: self.mpc_ascents,
            soundness_violations: self.soundness_violations,
            collision: self.collision,
            replans: self.replans,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// Per-cycle series; byte-identical for identical configurations.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from(
            "t,x,y,z,theta,omega_cmd,coverage,trajectory_m,pose_error,sigma_pose,objective,j_sum,f_sum\n",
        );
        for r in &self.cycles {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.position.x,
                r.position.y,
                r.position.z,
                r.theta,
                r.omega,
                r.coverage,
                r.trajectory_length,
                r.pose_error,
                r.sigma_pose,
                opt(r.objective),
                opt(r.j_sum),
                opt(r.f_sum)
            );
        }
        s
    }

    /// MPC solve times in milliseconds, one per line.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("solve,ms\n");
        for (i, t) in self.solve_times.iter().enumerate() {
            let _ = writeln!(s, "{i},{:.4}", t * 1e3);
        }
        s
    }
}

#[derive(Debug, Clone)]
struct Goal {
    centers: Vec<Vec3>,
    /// Frontier cells of the goal's clusters when it was adopted.
    cells: Vec<usize>,
    arrived_at: Option<f64>,
    /// The sensor has pointed at one of `centers` since arrival.
    faced: bool,
}

/// Closed-loop episode state. Drive it with [`Episode::step`] or [`Episode::run`].
#[derive(Debug)]
pub struct Episode {
    cfg: SimConfig,
    periods: Periods,
    scene: Scene,
    belief: OccupancyGrid,
    normals: SurfaceNormals,
    table: UncertaintyTable,
    topo: TopoGraph,
    traj: ReferenceTrajectory,
    lidar_rng: ChaCha8Rng,
    pose_rng: ChaCha8Rng,
    n: u64,
    position: Vec3,
    velocity: Vec3,
    theta_anchor: f64,
    anchor_step: u64,
    omega: f64,
    warm: ControlSequence,
    targets: Vec<RewardTarget>,
    known_explorable: usize,
    goal: Option<Goal>,
    abandoned: Vec<bool>,
    last_plan_step: Option<u64>,
    last_goal_time: f64,
    pose_error: f64,
    sigma_pose: f64,
    metrics: EpisodeMetrics,
}

impl Episode {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let periods = cfg.periods()?;
        let scene = generate_scene(&cfg.scene, cfg.seed)?;
        let belief = OccupancyGrid::new(scene.grid.origin(), scene.grid.resolution(), scene.grid.dims())?;
        let mut lidar_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        lidar_rng.set_stream(1);
        let mut pose_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        pose_rng.set_stream(2);
        let omega = match cfg.controller {
            ControllerSpec::FuMpc => cfg.mpc.limits.saturate(cfg.initial_omega),
            ControllerSpec::Fixed { deg_per_s } => deg_per_s.to_radians(),
        };
        let metrics = EpisodeMetrics::new(&scene, &cfg);
        Ok(Self {
            periods,
            normals: SurfaceNormals::new(cfg.normal_k, cfg.normal_radius),
            table: UncertaintyTable::empty(cfg.mpc.n_c, cfg.mpc.epsilon),
            topo: TopoGraph::new(cfg.planner.topo.clone()),
            traj: ReferenceTrajectory::hold(scene.spawn, 0.0),
            lidar_rng,
            pose_rng,
            n: 0,
            position: scene.spawn,
            velocity: Vec3::zeros(),
            theta_anchor: 0.0,
            anchor_step: 0,
            omega,
            warm: ControlSequence::zeros(cfg.mpc.horizon, cfg.mpc.dt),
            targets: Vec::new(),
            known_explorable: 0,
            goal: None,
            abandoned: vec![false; belief.len()],
            last_plan_step: None,
            last_goal_time: 0.0,
            pose_error: 0.0,
            sigma_pose: 0.0,
            metrics,
            belief,
            scene,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn belief(&self) -> &OccupancyGrid {
        &self.belief
    }

    pub fn table(&self) -> &UncertaintyTable {
        &self.table
    }

    pub fn metrics(&self) -> &EpisodeMetrics {
        &self.metrics
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.cfg.dt_sim
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    /// Unwrapped motor angle at the current step.
    pub fn theta(&self) -> f64 {
        self.theta_at(self.n)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn coverage(&self) -> f64 {
        self.known_explorable as f64 / self.scene.explorable_count() as f64
    }

    pub fn is_finished(&self) -> bool {
        self.metrics.end_reason.is_some()
    }

    fn theta_at(&self, n: u64) -> f64 {
        self.theta_anchor + self.omega * (n - self.anchor_step) as f64 * self.cfg.dt_sim
    }

    fn finish(&mut self, reason: EndReason) {
        let t = self.time();
        self.metrics.end_reason = Some(reason);
        self.metrics.end_time = t;
        if reason == EndReason::Completed {
            self.metrics.completion_time = Some(t);
        }
        self.metrics.coverage_final = self.coverage();
        self.check_soundness();
    }

    /// Runs to the end and returns the metrics.
    pub fn run(mut self) -> Result<EpisodeMetrics, SimError> {
        while self.step()? {}
        Ok(self.metrics)
    }

    /// Advances one simulation step. Returns `false` once the episode has ended.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.is_finished() {
            return Ok(false);
        }
        let n = self.n;
        let theta = self.theta_at(n);
        if n % self.periods.fire == 0 {
            self.fire(theta)?;
            if self.coverage() >= self.cfg.completion_threshold {
                self.finish(EndReason::Completed);
                return Ok(false);
            }
        }
        if n % self.periods.table == 0 {
            self.rebuild_table();
        }
        self.sample_pose_noise(theta);
        if n % self.periods.cycle == 0 {
            self.control_cycle(theta)?;
            if self.is_finished() {
                return Ok(false);
            }
        }
        self.advance();
        Ok(!self.is_finished())
    }

    fn fire(&mut self, theta: f64) -> Result<(), SimError> {
        let pose = SensorPoseChain::level(self.position, theta);
        let hits = simulate_lidar(&self.scene.grid, &pose, &self.cfg.sensor, &mut self.lidar_rng)?;
        if let Some(goal) = &mut self.goal {
            if goal.arrived_at.is_some() && !goal.faced {
                let dir = scan_direction(&Matrix3::identity(), &Matrix3::identity(), theta);
                let gates = &self.cfg.mpc.gates;
                goal.faced = goal.centers.iter().any(|c| gates.visible(&self.position, &dir, c));
            }
        }
        let mut changed = Vec::new();
        self.belief
            .integrate_scan_tracked(&pose.sensor_origin(), &hits, Some(&mut changed))?;
        self.known_explorable += changed.iter().filter(|&&i| self.scene.is_explorable(i)).count();
        for (e, hit) in &hits {
            if *hit {
                if let Some(i) = self.belief.index_of_point(e) {
                    self.normals.note_occupied(&self.belief, i);
                }
            }
        }
        Ok(())
    }

    fn rebuild_table(&mut self) {
        self.normals.refresh(&self.belief);
        let pts = self
            .normals
            .points_within(&self.belief, &self.position, self.cfg.sensor.max_range);
        let m = &self.cfg.mpc;
        let mut table = UncertaintyTable::build(&pts, &self.position, &Matrix3::identity(), m.n_c, m.half_window, m.epsilon);
        table.built_at = self.time();
        self.table = table;
    }

    fn sample_pose_noise(&mut self, theta: f64) {
        let sigma = self.cfg.kappa_loc * self.table.lookup(theta) / self.table.f_empty();
        let z = Vec3::from_fn(|_, _| StandardNormal.sample(&mut self.pose_rng));
        let e = (z * sigma).norm();
        self.pose_error = e;
        self.sigma_pose = sigma;
        // the map is still initializing during the warmup hover
        if self.time() < self.cfg.warmup - 1e-9 {
            return;
        }
        self.metrics.pose_samples += 1;
        self.metrics.pose_error_sum += e;
        self.metrics.pose_error_sq_sum += e * e;
    }

    fn advance(&mut self) {
        self.n += 1;
        let t = self.time();
        let (p, v) = self.traj.sample(t);
        self.metrics.trajectory_length += (p - self.position).norm();
        self.position = p;
        self.velocity = v;
        if self.scene.grid.state_at_point(&p) != Some(CellState::Free) {
            self.metrics.collision = true;
            self.finish(EndReason::Collision);
        } else if self.n >= self.periods.limit {
            self.finish(EndReason::TimeLimit);
        }
    }

    fn control_cycle(&mut self, theta: f64) -> Result<(), SimError> {
        let t = self.time();
        if self.cfg.explore && t >= self.cfg.warmup - 1e-9 {
            let traj_done = t >= self.traj.end_time();
            let settle = (self.periods.replan / 4).max(self.periods.cycle);
            let due = self.last_plan_step.is_none_or(|s| {
                let since = self.n - s;
                since >= self.periods.replan || (traj_done && since >= settle)
            });
            if due {
                self.replan(t);
                if self.is_finished() {
                    return Ok(());
                }
            }
        }

        let mut objective = None;
        let mut j_sum = None;
        let mut f_sum = None;
        let omega_cmd = match self.cfg.controller {
            ControllerSpec::Fixed { deg_per_s } => deg_per_s.to_radians(),
            ControllerSpec::FuMpc => {
                let m = &self.cfg.mpc;
                let x0 = ScanState {
                    theta,
                    omega: self.omega,
                };
                let id = Matrix3::identity();
                let problem = MpcProblem::new(x0, &self.traj, t, &self.table, &self.targets, &id, &id, m);
                let start = Instant::now();
                let sol = solve_fu_mpc(&problem, &self.warm, m.max_iters, m.rel_tol);
                self.metrics.solve_times.push(start.elapsed().as_secs_f64());
                self.metrics.mpc_solves += 1;
                let l = &m.limits;
                let bad_u = sol.u.u.iter().any(|u| u.abs() > l.u_max + BOUND_TOL);
                let bad_w = sol
                    .states
                    .iter()
                    .any(|x| x.omega < l.omega_min - BOUND_TOL || x.omega > l.omega_max + BOUND_TOL);
                if bad_u || bad_w {
                    self.metrics.mpc_bound_violations += 1;
                }
                if sol.objective > sol.warm_objective {
                    self.metrics.mpc_ascents += 1;
                }
                let (mut js, mut fs) = (0.0, 0.0);
                for (k, x) in sol.states.iter().enumerate() {
                    js += interp_periodic(&problem.j[k], x.theta).0;
                    fs += interp_periodic(&problem.f, x.theta).0;
                }
                objective = Some(sol.objective);
                j_sum = Some(js);
                f_sum = Some(fs);
                self.warm = sol.u.clone();
                sol.omega_cmd
            }
        };
        if omega_cmd != self.omega {
            self.theta_anchor = theta;
            self.anchor_step = self.n;
            self.omega = omega_cmd;
        }
        self.metrics.cycles.push(CycleRecord {
            t,
            position: self.position,
            theta: wrap_angle(theta),
            omega: self.omega,
            coverage: self.coverage(),
            trajectory_length: self.metrics.trajectory_length,
            pose_error: self.pose_error,
            sigma_pose: self.sigma_pose,
            objective,
            j_sum,
            f_sum,
        });
        Ok(())
    }

    fn check_soundness(&mut self) {
        let bad = self
            .belief
            .cells()
            .iter()
            .zip(self.scene.grid.cells())
            .filter(|(b, s)| **b == CellState::Free && **s == CellState::Occupied)
            .count();
        self.metrics.soundness_violations = self.metrics.soundness_violations.max(bad);
    }

    fn replan(&mut self, t: f64) {
        self.last_plan_step = Some(self.n);
        self.metrics.replans += 1;
        self.check_soundness();

        let fcfg = self.cfg.frontier.clone();
        let cells: Vec<usize> = detect_frontiers(&self.belief)
            .into_iter()
            .filter(|&c| !self.abandoned[c])
            .collect();
        let clusters = cluster_frontiers(&cells, &self.belief, fcfg.link_radius, fcfg.max_extent);
        self.targets = clusters
            .iter()
            .map(|c| RewardTarget {
                center: c.center,
                intensity: c.intensity,
            })
            .collect();

        let clearance = ClearanceMap::build(&self.belief, fcfg.safety_clearance);
        self.topo.update(&self.belief, &clearance, &self.position);
        let support = roadmap_support(&self.topo);
        let max_elevation = fcfg.max_elevation.min(self.cfg.sensor.fan_half_angle);

        let mut pairs = Vec::new();
        // small clusters are pursued only once no larger ones remain
        let min_cells = if clusters.iter().any(|c| c.cells.len() >= self.cfg.min_frontier_cells) {
            self.cfg.min_frontier_cells
        } else {
            0
        };
        for c in clusters.iter().filter(|c| c.cells.len() >= min_cells) {
            let reachable = |p: &Vec3| {
                let max_edge = self.topo.config().max_edge_length;
                let k = self.topo.config().k_neighbors;
                let mut near: Vec<(f64, Vec3)> = support
                    .iter()
                    .map(|q| ((q - p).norm(), *q))
                    .filter(|(d, _)| *d <= max_edge)
                    .collect();
                near.sort_by(|a, b| a.0.total_cmp(&b.0));
                near.iter()
                    .take(k)
                    .any(|(_, q)| clearance.is_safe_segment(&self.belief, p, q))
            };
            let candidates = sample_viewpoints(c, &self.belief, &clearance, reachable, &fcfg);
            if candidates.is_empty() {
                continue;
            }
            let probe = subsample(c, self.cfg.visibility_samples);
            let region = visible_region(&probe, &candidates, &self.belief, fcfg.r0, fcfg.sensor_range, max_elevation);
            pairs.push((c.clone(), region));
        }
        let dynamic = update_dynamic_clusters(Vec::new(), &pairs, fcfg.alpha_m, fcfg.beta_m);

        let mut pcfg = self.cfg.planner.clone();
        pcfg.v_max = self.cfg.v_max;
        let state = VehicleState {
            position: self.position,
            velocity: self.velocity,
        };
        match plan_global_tour(&self.topo, &self.belief, &clearance, &dynamic, &state, &pcfg) {
            Ok(plan) => {
                self.last_goal_time = t;
                let mut is_frontier = vec![false; self.belief.len()];
                for &c in &cells {
                    is_frontier[c] = true;
                }
                self.adopt_plan(plan, &dynamic, &clusters, &is_frontier, t);
            }
            Err(status) => {
                self.goal = None;
                if t - self.last_goal_time >= self.cfg.stall_timeout - 1e-9 {
                    self.finish(match status {
                        PlanStatus::Complete => EndReason::Exhausted,
                        PlanStatus::Stalled => EndReason::Stalled,
                    });
                }
            }
        }
    }

    fn adopt_plan(
        &mut self,
        plan: TourPlan,
        dynamic: &[DynamicCluster],
        clusters: &[FrontierCluster],
        is_frontier: &[bool],
        t: f64,
    ) {
        if let Some(goal) = &mut self.goal {
            let remaining: Vec<usize> = goal.cells.iter().copied().filter(|&c| is_frontier[c]).collect();
            if !remaining.is_empty() && remaining.len() as f64 >= self.cfg.goal_retain_fraction * goal.cells.len() as f64 {
                if t < self.traj.end_time() {
                    return;
                }
                let arrived = *goal.arrived_at.get_or_insert(t);
                let waited = t - arrived;
                if waited < self.cfg.dwell_timeout - 1e-9 || (!goal.faced && waited < self.cfg.max_dwell - 1e-9) {
                    return;
                }
                // the frontier did not clear from its own viewpoint; give it up
                for c in remaining {
                    self.abandoned[c] = true;
                }
                self.goal = None;
                self.last_plan_step = None;
                return;
            }
        }
        let traj = match plan_reference(&plan.path, self.cfg.v_max, self.cfg.a_max, t) {
            Ok(traj) => traj,
            Err(_) => ReferenceTrajectory::hold(self.position, t),
        };
        self.traj = traj;
        let members = &dynamic[plan.goal_cluster].members;
        self.goal = Some(Goal {
            centers: dynamic[plan.goal_cluster].member_centers.clone(),
            cells: members.iter().flat_map(|&m| clusters[m].cells.iter().copied()).collect(),
            arrived_at: None,
            faced: false,
        });
    }
}

/// Roadmap nodes in the connected component of the odometry node.
fn roadmap_support(topo: &TopoGraph) -> Vec<Vec3> {
    let Some(odom) = topo.odom_node() else {
        return Vec::new();
    };
    let mut seen = vec![false; topo.nodes().len()];
    seen[odom] = true;
    let mut queue = VecDeque::from([odom]);
    let mut out = Vec::new();
    while let Some(i) = queue.pop_front() {
        out.push(topo.nodes()[i]);
        for j in topo.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    out
}

/// Copy of `c` keeping at most `n` evenly spaced cells.
fn subsample(c: &FrontierCluster, n: usize) -> FrontierCluster {
    let mut out = c.clone();
    if n > 0 && c.cells.len() > n {
        let step = c.cells.len() as f64 / n as f64;
        out.cells = (0..n).map(|k| c.cells[(k as f64 * step) as usize]).collect();
    }
    out
}

pub fn run_episode(cfg: SimConfig) -> Result<EpisodeMetrics, SimError> {
    Episode::new(cfg)?.run()
}
