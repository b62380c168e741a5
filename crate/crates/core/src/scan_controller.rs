//! Receding-horizon control of the rotating sensor.
//!
//! The controller predicts motor states along the reference trajectory, scores each predicted
//! scan direction with a frontier complexity cost and a direction-dependent localization cost,
//! and optimizes the motor acceleration sequence by projected gradient descent.

use std::f64::consts::TAU;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::trajectory::ReferenceTrajectory;
use crate::{wrap_angle, Vec3};

/// Default Fisher regularization.
pub const FISHER_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanState {
    /// Motor angle, accumulated without wrapping (rad).
    pub theta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanLimits {
    pub omega_min: f64,
    pub omega_max: f64,
    pub u_max: f64,
}

impl Default for ScanLimits {
    fn default() -> Self {
        Self {
            omega_min: std::f64::consts::PI / 6.0,
            omega_max: TAU,
            u_max: 4.0 * std::f64::consts::PI,
        }
    }
}

impl ScanLimits {
    pub fn saturate(&self, omega: f64) -> f64 {
        omega.clamp(self.omega_min, self.omega_max)
    }
}

/// Angular accelerations `u_0..u_{N-1}` applied for `dt` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub u: Vec<f64>,
    pub dt: f64,
}

impl ControlSequence {
    pub fn zeros(n: usize, dt: f64) -> Self {
        Self { u: vec![0.0; n], dt }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Drops the first element and repeats the last one.
    pub fn shifted(&self) -> Self {
        let mut u: Vec<f64> = self.u.iter().skip(1).copied().collect();
        if let Some(&last) = self.u.last() {
            u.push(last);
        }
        Self { u, dt: self.dt }
    }
}

/// States `x_1..x_N` produced by `u` from `x0`.
pub fn predict_scan_states(x0: ScanState, u: &ControlSequence, limits: &ScanLimits) -> Vec<ScanState> {
    let mut out = Vec::with_capacity(u.len());
    let mut x = x0;
    for &ui in &u.u {
        let omega = limits.saturate(x.omega + ui * u.dt);
        x = ScanState {
            theta: x.theta + omega * u.dt,
            omega,
        };
        out.push(x);
    }
    out
}

/// Principal scan direction in the world frame.
pub fn scan_direction(r_b_w: &Matrix3<f64>, r_mb_b: &Matrix3<f64>, theta: f64) -> Vec3 {
    r_b_w * (r_mb_b * Vec3::new(theta.cos(), theta.sin(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum NormalError {
    #[error("need at least {0} points")]
    TooFewPoints(usize),
    #[error("neighbourhood is rank deficient")]
    Degenerate,
}

/// Normal of the `k` points nearest `query` (ties by index), oriented toward `sensor`.
pub fn estimate_normal(points: &[Vec3], query: &Vec3, k: usize, sensor: &Vec3) -> Result<Vec3, NormalError> {
    let k = k.max(3);
    if points.len() < k {
        return Err(NormalError::TooFewPoints(k));
    }
    let mut idx: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ((p - query).norm_squared(), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nbrs: Vec<Vec3> = idx[..k].iter().map(|&(_, i)| points[i]).collect();
    let n = plane_normal(&nbrs).ok_or(NormalError::Degenerate)?;
    Ok(if n.dot(&(sensor - query)) < 0.0 { -n } else { n })
}

/// Unoriented smallest-eigenvalue eigenvector of the covariance of `pts`, or `None` when the
/// points are (nearly) collinear.
pub fn plane_normal(pts: &[Vec3]) -> Option<Vec3> {
    if pts.len() < 3 {
        return None;
    }
    let mean = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l_mid, l_max) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if l_max <= 1e-12 || l_mid <= 1e-6 * l_max {
        return None;
    }
    Some(eig.eigenvectors.column(order[0]).normalize())
}

/// `tr((F + eps I)^-1)` and `tr(F + eps I)` for `F = sum n n^T`.
pub fn fisher_cost<'a>(normals: impl IntoIterator<Item = &'a Vec3>, eps: f64) -> (f64, f64) {
    let mut f = Matrix3::identity() * eps;
    for n in normals {
        f += n * n.transpose();
    }
    let cost = f.try_inverse().map_or(f64::INFINITY, |inv| inv.trace());
    (cost, f.trace())
}

/// Linear interpolation over `n` uniform knots on `[0, 2pi)` with wraparound; returns the value
/// and the slope. Exact at the knots.
pub fn interp_periodic(values: &[f64], theta: f64) -> (f64, f64) {
    let n = values.len();
    let h = TAU / n as f64;
    let s = wrap_angle(theta) / h;
    let r = s.round();
    let slope_at = |i: usize| (values[(i + 1) % n] - values[i]) / h;
    if (s - r).abs() < 1e-9 {
        let i = (r as usize) % n;
        return (values[i], slope_at(i));
    }
    let i = (s.floor() as usize).min(n - 1);
    let frac = s - i as f64;
    let (a, b) = (values[i], values[(i + 1) % n]);
    (a + frac * (b - a), slope_at(i))
}

/// Sampled localization cost `f(theta_c)` at uniformly spaced motor angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTable {
    values: Vec<f64>,
    /// `tr(F + eps I)` per knot.
    traces: Vec<f64>,
    epsilon: f64,
    /// Simulation time the table was built for (s).
    pub built_at: f64,
}

impl UncertaintyTable {
    /// Table with given knot values; traces are unknown (set to infinity).
    pub fn from_values(values: Vec<f64>, epsilon: f64) -> Self {
        assert!(values.len() >= 2, "need at least two knots");
        let traces = vec![f64::INFINITY; values.len()];
        Self {
            values,
            traces,
            epsilon,
            built_at: 0.0,
        }
    }

    /// Table for a direction-free scene: every knot carries the empty-direction cost.
    pub fn empty(n_c: usize, epsilon: f64) -> Self {
        let f_empty = 3.0 / epsilon;
        Self {
            values: vec![f_empty; n_c],
            traces: vec![3.0 * epsilon; n_c],
            epsilon,
            built_at: 0.0,
        }
    }

    /// For each knot angle, collects the normals whose point azimuth (in the motor-base frame,
    /// seen from `sensor`) lies within `half_window` and evaluates the A-optimality cost.
    pub fn build(
        points: &[(Vec3, Vec3)],
        sensor: &Vec3,
        base_to_world: &Matrix3<f64>,
        n_c: usize,
        half_window: f64,
        epsilon: f64,
    ) -> Self {
        assert!(n_c >= 2, "need at least two knots");
        let inv = base_to_world.transpose();
        let az: Vec<f64> = points
            .iter()
            .map(|(p, _)| {
                let l = inv * (p - sensor);
                wrap_angle(l.y.atan2(l.x))
            })
            .collect();
        let mut values = Vec::with_capacity(n_c);
        let mut traces = Vec::with_capacity(n_c);
        for c in 0..n_c {
            let tc = c as f64 * TAU / n_c as f64;
            let normals = points
                .iter()
                .zip(&az)
                .filter(|(_, &a)| angle_diff(a, tc) <= half_window)
                .map(|((_, n), _)| n);
            let (f, tr) = fisher_cost(normals, epsilon);
            values.push(f);
            traces.push(tr);
        }
        Self {
            values,
            traces,
            epsilon,
            built_at: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn traces(&self) -> &[f64] {
        &self.traces
    }

    pub fn angle(&self, k: usize) -> f64 {
        k as f64 * TAU / self.values.len() as f64
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn f_empty(&self) -> f64 {
        3.0 / self.epsilon
    }

    pub fn lookup(&self, theta: f64) -> f64 {
        interp_periodic(&self.values, theta).0
    }
}

/// Absolute angular distance on the circle, in `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// `exp(-d^2 / 2 sigma^2) * s` with `d = |p - c|`.
pub fn frontier_reward(p: &Vec3, center: &Vec3, intensity: f64, sigma: f64) -> f64 {
    let d2 = (p - center).norm_squared();
    (-d2 / (2.0 * sigma * sigma)).exp() * intensity
}

/// A frontier target as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTarget {
    pub center: Vec3,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontierGates {
    pub max_dist: f64,
    pub half_angle: f64,
}

impl Default for FrontierGates {
    fn default() -> Self {
        Self {
            max_dist: 15.0,
            half_angle: 35f64.to_radians(),
        }
    }
}

impl FrontierGates {
    pub fn visible(&self, p: &Vec3, dir: &Vec3, c: &Vec3) -> bool {
        let off = c - p;
        let d = off.norm();
        if d > self.max_dist {
            return false;
        }
        if d == 0.0 {
            return true;
        }
        let cos = (dir.dot(&off) / (dir.norm() * d)).clamp(-1.0, 1.0);
        cos.acos() <= self.half_angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityCost {
    pub j: f64,
    pub r_total: f64,
}

/// `J = R_total - sum of rewards of the targets passing both gates`.
pub fn complexity_cost(p: &Vec3, dir: &Vec3, targets: &[RewardTarget], gates: &FrontierGates, sigma: f64) -> ComplexityCost {
    let mut r_total = 0.0;
    let mut seen = 0.0;
    for t in targets {
        let r = frontier_reward(p, &t.center, t.intensity, sigma);
        r_total += r;
        if gates.visible(p, dir, &t.center) {
            seen += r;
        }
    }
    ComplexityCost {
        j: (r_total - seen).max(0.0),
        r_total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon: usize,
    pub dt: f64,
    pub limits: ScanLimits,
    pub weights: MpcWeights,
    pub gates: FrontierGates,
    pub sigma: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Knot count of the uncertainty table.
    pub n_c: usize,
    /// Half width of the azimuth window used when building the table (rad).
    pub half_window: f64,
    pub epsilon: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt: 0.1,
            limits: ScanLimits::default(),
            weights: MpcWeights::default(),
            gates: FrontierGates::default(),
            sigma: 8.0,
            max_iters: 30,
            rel_tol: 1e-4,
            n_c: 36,
            half_window: 35f64.to_radians(),
            epsilon: FISHER_EPSILON,
        }
    }
}

/// Horizon data frozen for one solve: normalized complexity costs tabulated per step at the
/// table's knot angles, and the normalized localization table.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub x0: ScanState,
    pub dt: f64,
    pub limits: ScanLimits,
    pub weights: MpcWeights,
    /// `j[k][c]`: complexity cost at step `k+1`, knot `c`, divided by that step's `R_total`.
    pub j: Vec<Vec<f64>>,
    /// `f / f_empty` per knot.
    pub f: Vec<f64>,
}

impl MpcProblem {
    /// Samples `p_ref` at `t0 + (k+1) dt` for `k = 0..N-1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x0: ScanState,
        traj: &ReferenceTrajectory,
        t0: f64,
        table: &UncertaintyTable,
        targets: &[RewardTarget],
        r_b_w: &Matrix3<f64>,
        r_mb_b: &Matrix3<f64>,
        cfg: &MpcConfig,
    ) -> Self {
        let n_c = table.len();
        let dirs: Vec<Vec3> = (0..n_c).map(|c| scan_direction(r_b_w, r_mb_b, table.angle(c))).collect();
        let j = (0..cfg.horizon)
            .map(|k| {
                let p = traj.sample(t0 + (k + 1) as f64 * cfg.dt).0;
                dirs.iter()
                    .map(|d| {
                        let c = complexity_cost(&p, d, targets, &cfg.gates, cfg.sigma);
                        if c.r_total > 0.0 {
                            c.j / c.r_total
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let f_empty = table.f_empty();
        Self {
            x0,
            dt: cfg.dt,
            limits: cfg.limits,
            weights: cfg.weights,
            j,
            f: table.values().iter().map(|v| v / f_empty).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.j.len()
    }

    fn control(&self, u: &[f64]) -> ControlSequence {
        ControlSequence { u: u.to_vec(), dt: self.dt }
    }

    /// Stage costs `alpha J + beta f` summed over `x_1..x_N` plus the smoothness term.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let states = predict_scan_states(self.x0, &self.control(u), &self.limits);
        let w = self.weights;
        let mut total = 0.0;
        for (k, x) in states.iter().enumerate() {
            total += w.alpha * interp_periodic(&self.j[k], x.theta).0 + w.beta * interp_periodic(&self.f, x.theta).0;
        }
        total + w.gamma * smoothness(u)
    }

    /// Gradient of the piecewise-linear objective at `u`. With `pass_through`, saturated
    /// velocity steps are differentiated as if unsaturated.
    fn gradient(&self, u: &[f64], pass_through: bool) -> Vec<f64> {
        let n = u.len();
        let dt = self.dt;
        let w = self.weights;
        let mut omega = self.x0.omega;
        let mut theta = self.x0.theta;
        let mut active = vec![true; n];
        let mut g = vec![0.0; n];
        for k in 0..n {
            let raw = omega + u[k] * dt;
            let sat = self.limits.saturate(raw);
            active[k] = pass_through || sat == raw;
            omega = sat;
            theta += omega * dt;
            g[k] = w.alpha * interp_periodic(&self.j[k], theta).1 + w.beta * interp_periodic(&self.f, theta).1;
        }
        // lambda_k: derivative of the stage costs with respect to omega_{k+1}
        let mut grad = vec![0.0; n];
        let mut tail = 0.0; // sum of g over steps >= k
        let mut lambda = 0.0;
        for k in (0..n).rev() {
            tail += g[k];
            let carry = if k + 1 < n && active[k + 1] { lambda } else { 0.0 };
            lambda = dt * tail + carry;
            grad[k] = if active[k] { dt * lambda } else { 0.0 };
        }
        for k in 0..n.saturating_sub(1) {
            let d = 2.0 * w.gamma * (u[k + 1] - u[k]);
            grad[k] -= d;
            grad[k + 1] += d;
        }
        grad
    }
}

/// Constant start sequences use `u_max * k / CONST_LEVELS` for `|k| <= CONST_LEVELS`.
const CONST_LEVELS: i32 = 8;

fn smoothness(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub u: ControlSequence,
    /// Predicted `x_1..x_N`.
    pub states: Vec<ScanState>,
    /// Commanded velocity `omega_1`.
    pub omega_cmd: f64,
    pub objective: f64,
    /// Objective of the shifted, box-projected warm start.
    pub warm_objective: f64,
    pub iterations: usize,
}

/// Solves the horizon problem starting from the best of the shifted warm start and a few
/// structured sequences (constants and single-switch bang-bang profiles), then runs projected
/// gradient descent with backtracking that only accepts strict decreases.
pub fn solve_fu_mpc(problem: &MpcProblem, warm: &ControlSequence, max_iters: usize, rel_tol: f64) -> MpcSolution {
    let n = problem.horizon();
    let um = problem.limits.u_max;
    let clip = |v: f64| v.clamp(-um, um);
    let mut shifted: Vec<f64> = warm.shifted().u.into_iter().map(clip).collect();
    shifted.resize(n, shifted.last().copied().unwrap_or(0.0));

    let warm_objective = problem.objective(&shifted);
    let mut best_u = shifted.clone();
    let mut best = warm_objective;
    let try_start = |u: Vec<f64>, best_u: &mut Vec<f64>, best: &mut f64| {
        let o = problem.objective(&u);
        if o < *best {
            *best = o;
            *best_u = u;
        }
    };
    try_start(vec![shifted.first().copied().unwrap_or(0.0); n], &mut best_u, &mut best);
    for k in -CONST_LEVELS..=CONST_LEVELS {
        try_start(vec![um * k as f64 / CONST_LEVELS as f64; n], &mut best_u, &mut best);
    }
    for s in 1..n {
        for (a, b) in [(um, -um), (-um, um)] {
            try_start((0..n).map(|k| if k < s { a } else { b }).collect(), &mut best_u, &mut best);
        }
    }

    let mut u = best_u;
    let mut obj = best;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut improved = None;
        for pass_through in [true, false] {
            let g = problem.gradient(&u, pass_through);
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax == 0.0 {
                continue;
            }
            let mut step = um / gmax;
            for _ in 0..24 {
                let cand: Vec<f64> = u.iter().zip(&g).map(|(ui, gi)| clip(ui - step * gi)).collect();
                let o = problem.objective(&cand);
                if o < obj {
                    improved = Some((cand, o));
                    break;
                }
                step *= 0.5;
            }
            if improved.is_some() {
                break;
            }
        }
        match improved {
            Some((cand, o)) => {
                let rel = (obj - o) / obj.abs().max(1e-12);
                u = cand;
                obj = o;
                if rel < rel_tol {
                    break;
                }
            }
            None => break,
        }
    }

    let seq = ControlSequence { u, dt: problem.dt };
    let states = predict_scan_states(problem.x0, &seq, &problem.limits);
    MpcSolution {
        omega_cmd: states.first().map_or(problem.x0.omega, |x| x.omega),
        u: seq,
        states,
        objective: obj,
        warm_objective,
        iterations,
    }
}

/// Inputs for one asynchronous table build.
#[derive(Debug, Clone)]
pub struct TableJob {
    pub points: Vec<(Vec3, Vec3)>,
    pub sensor: Vec3,
    pub base_to_world: Matrix3<f64>,
    pub n_c: usize,
    pub half_window: f64,
    pub epsilon: f64,
    pub stamp: f64,
}

impl TableJob {
    pub fn build(&self) -> UncertaintyTable {
        let mut t = UncertaintyTable::build(
            &self.points,
            &self.sensor,
            &self.base_to_world,
            self.n_c,
            self.half_window,
            self.epsilon,
        );
        t.built_at = self.stamp;
        t
    }
}

/// Background table builder. Jobs are processed newest-first (stale queued jobs are dropped);
/// finished tables are published by swapping an `Arc`, so readers only ever see complete tables.
pub struct TableService {
    tx: Option<Sender<TableJob>>,
    latest: Arc<RwLock<Option<Arc<UncertaintyTable>>>>,
    worker: Option<JoinHandle<()>>,
}

impl TableService {
    pub fn spawn() -> Self {
        let (tx, rx): (Sender<TableJob>, Receiver<TableJob>) = mpsc::channel();
        let latest = Arc::new(RwLock::new(None));
        let out = Arc::clone(&latest);
        let worker = std::thread::spawn(move || {
            while let Ok(mut job) = rx.recv() {
                while let Ok(newer) = rx.try_recv() {
                    job = newer;
                }
                let table = Arc::new(job.build());
                *out.write().expect("table lock poisoned") = Some(table);
            }
        });
        Self {
            tx: Some(tx),
            latest,
            worker: Some(worker),
        }
    }

    pub fn submit(&self, job: TableJob) {
        if let Some(tx) = &self.tx {
            // the worker only stops when the service is dropped
            let _ = tx.send(job);
        }
    }

    pub fn latest(&self) -> Option<Arc<UncertaintyTable>> {
        self.latest.read().expect("table lock poisoned").clone()
    }
}

impl Drop for TableService {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
