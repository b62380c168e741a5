//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero when any fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scanplan_core::frontier::{merge_cost, DynamicCluster, Viewpoint, VisibleRegion};
use scanplan_core::global_planner::{
    heading_penalty, held_karp_open, heuristic_open_atsp, solve_open_atsp, tour_cost, transition_cost, CostMatrix,
    TopoConfig, TopoGraph,
};
use scanplan_core::scan_controller::{
    fisher_cost, frontier_reward, interp_periodic, predict_scan_states, solve_fu_mpc, ControlSequence, MpcConfig,
    MpcProblem, RewardTarget, ScanLimits, ScanState, UncertaintyTable, FISHER_EPSILON,
};
use scanplan_core::sim::{ControllerSpec, Episode, EpisodeMetrics, SimConfig};
use scanplan_core::trajectory::plan_reference;
use scanplan_core::world_model::{CellState, OccupancyGrid};
use scanplan_core::Vec3;

type Failures = Vec<String>;

macro_rules! check {
    ($f:expr, $cond:expr, $($msg:tt)+) => {
        if !$cond {
            $f.push(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------------------------
// oracles

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CostMatrix {
    let mut c = CostMatrix::zeros(n);
    for i in 0..n {
        for j in 1..n {
            if i != j {
                c.set(i, j, rng.random_range(1.0..100.0));
            }
        }
    }
    c
}

fn brute_force_open(c: &CostMatrix) -> f64 {
    fn rec(c: &CostMatrix, last: usize, left: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if left.is_empty() {
            *best = acc;
            return;
        }
        for k in 0..left.len() {
            let next = left.swap_remove(k);
            rec(c, next, left, acc + c.get(last, next), best);
            left.push(next);
            let n = left.len();
            left.swap(k, n - 1);
        }
    }
    let mut left: Vec<usize> = (1..c.size()).collect();
    let mut best = f64::INFINITY;
    rec(c, 0, &mut left, 0.0, &mut best);
    if c.size() == 1 {
        0.0
    } else {
        best
    }
}

fn is_open_tour(order: &[usize], n: usize) -> bool {
    let mut s = order.to_vec();
    s.sort_unstable();
    order.first() == Some(&0) && s == (0..n).collect::<Vec<_>>()
}

/// First occupied voxel along the ray found by marching in steps of `res / 1000`.
fn marching_hit(g: &OccupancyGrid, o: &Vec3, d: &Vec3, max_range: f64) -> Option<Vec3> {
    let step = g.resolution() / 1000.0;
    let n = (max_range / step) as usize;
    for k in 0..=n {
        let p = o + d * (k as f64 * step);
        let v = g.voxel_of_point(&p)?;
        if g.state(v) == Some(CellState::Occupied) {
            return Some(g.voxel_center(v));
        }
    }
    None
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

// ---------------------------------------------------------------------------------------------
// criteria

fn criterion_oracles() -> Failures {
    let mut f = Failures::new();

    // heuristic tour within 5% of the optimum, exact tour from Held-Karp
    let mut worst: f64 = 1.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = if seed < 50 { 1 + seed as usize % 8 } else { 8 };
        let c = random_matrix(&mut rng, m + 1);
        let opt = brute_force_open(&c);
        let h = heuristic_open_atsp(&c);
        check!(f, is_open_tour(&h, m + 1), "seed {seed}: heuristic order {h:?} is not an open tour");
        worst = worst.max(tour_cost(&c, &h) / opt);
        let exact = solve_open_atsp(&c);
        check!(f, (tour_cost(&c, &exact) - opt).abs() <= 1e-9 * opt, "seed {seed}: solver cost {} vs optimum {opt}", tour_cost(&c, &exact));
    }
    check!(f, worst <= 1.05, "heuristic worst ratio {worst:.4} > 1.05");
    for m in 1..=10usize {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + m as u64);
        let c = random_matrix(&mut rng, m + 1);
        let hk = held_karp_open(&c);
        let opt = brute_force_open(&c);
        check!(f, is_open_tour(&hk, m + 1), "M={m}: Held-Karp order invalid");
        check!(f, (tour_cost(&c, &hk) - opt).abs() <= 1e-9 * opt, "M={m}: Held-Karp {} vs {opt}", tour_cost(&c, &hk));
    }

    // ray casting against fine marching on a cluttered grid
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut g = OccupancyGrid::filled(Vec3::zeros(), 0.1, [60, 50, 40], CellState::Free).unwrap();
    for _ in 0..100 {
        let lo = Vec3::new(rng.random_range(0.0..6.0), rng.random_range(0.0..5.0), rng.random_range(0.0..4.0));
        let size = Vec3::new(rng.random_range(0.1..1.2), rng.random_range(0.1..1.2), rng.random_range(0.1..1.2));
        g.fill_box(lo, lo + size, CellState::Occupied);
    }
    let diag = g.resolution() * 3f64.sqrt();
    let (mut queries, mut hits) = (0, 0);
    while queries < 1000 {
        let o = Vec3::new(rng.random_range(0.05..5.95), rng.random_range(0.05..4.95), rng.random_range(0.05..3.95));
        if g.state_at_point(&o) != Some(CellState::Free) {
            continue;
        }
        queries += 1;
        let d = random_unit(&mut rng);
        let range = rng.random_range(0.5..8.0);
        let got = g.cast_ray(&o, &d, range).unwrap().map(|h| h.point);
        let want = marching_hit(&g, &o, &d, range);
        match (got, want) {
            (Some(a), Some(b)) => {
                hits += 1;
                check!(f, (a - b).norm() <= diag + 1e-12, "ray {o:?} {d:?}: hit {a:?} vs oracle {b:?}");
            }
            (None, None) => {}
            (a, b) => f.push(format!("ray {o:?} {d:?}: hit {a:?} vs oracle {b:?}")),
        }
    }
    println!("    ray casting: {hits} of 1000 queries hit");
    check!(f, hits >= 300, "only {hits} of 1000 rays hit; fixture too sparse");

    // scan-state prediction against the scalar recurrence
    let l = ScanLimits::default();
    for _ in 0..500 {
        let x0 = ScanState { theta: rng.random_range(0.0..TAU), omega: rng.random_range(l.omega_min..l.omega_max) };
        let n = rng.random_range(1..40);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5 * l.u_max..1.5 * l.u_max)).collect();
        let s = predict_scan_states(x0, &ControlSequence { u: u.clone(), dt: 0.1 }, &l);
        let (mut th, mut w) = (x0.theta, x0.omega);
        for (k, ui) in u.iter().enumerate() {
            w = (w + ui * 0.1).max(l.omega_min).min(l.omega_max);
            th += w * 0.1;
            if (s[k].theta - th).abs() > 1e-12 || (s[k].omega - w).abs() > 1e-12 {
                f.push(format!("prediction step {k}: {:?} vs ({th}, {w})", s[k]));
                break;
            }
        }
    }
    f
}

/// Independent A-optimality trace for one knot: counts the normals inside the azimuth window.
fn window_trace(points: &[(Vec3, Vec3)], sensor: &Vec3, center: f64, half: f64, eps: f64) -> f64 {
    points
        .iter()
        .filter(|(p, _)| {
            let a = (p.y - sensor.y).atan2(p.x - sensor.x);
            let mut d = (a - center).rem_euclid(TAU);
            if d > PI {
                d = TAU - d;
            }
            d <= half
        })
        .map(|(_, n)| n.norm_squared())
        .sum::<f64>()
        + 3.0 * eps
}

fn criterion_fisher() -> Failures {
    let mut f = Failures::new();
    let (v, _) = fisher_cost(&[Vec3::x(), Vec3::y(), Vec3::z()], 0.0);
    check!(f, v == 3.0, "orthonormal triple gives {v}, not 3");

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let half = 35f64.to_radians();
    let mut tables = 0;
    for _ in 0..50 {
        let n = rng.random_range(0..200);
        let sensor = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
        let pts: Vec<(Vec3, Vec3)> = (0..n)
            .map(|_| {
                let p = sensor + random_unit(&mut rng) * rng.random_range(0.5..10.0);
                (p, random_unit(&mut rng))
            })
            .collect();
        let t = UncertaintyTable::build(&pts, &sensor, &Matrix3::identity(), 36, half, FISHER_EPSILON);
        tables += 1;
        for (k, (&val, &tr)) in t.values().iter().zip(t.traces()).enumerate() {
            let oracle = window_trace(&pts, &sensor, t.angle(k), half, FISHER_EPSILON);
            check!(f, (tr - oracle).abs() <= 1e-9 * oracle, "knot {k}: trace {tr} vs {oracle}");
            check!(f, val >= 9.0 / tr * (1.0 - 1e-12), "knot {k}: f = {val} below 9/trace = {}", 9.0 / tr);
        }
    }
    // tables published inside a closed-loop episode
    let mut ep = Episode::new(SimConfig { time_limit: 8.0, ..SimConfig::default() }).unwrap();
    let mut last = f64::NAN;
    while ep.step().unwrap() {
        let t = ep.table();
        if t.built_at != last {
            last = t.built_at;
            tables += 1;
            for (&val, &tr) in t.values().iter().zip(t.traces()) {
                check!(f, val >= 9.0 / tr * (1.0 - 1e-12), "episode table: f = {val} below 9/trace");
            }
        }
    }
    check!(f, tables > 55, "only {tables} tables checked");

    // interpolation: exact at knots, unrolled-domain agreement across the wrap
    for n in [2usize, 7, 36, 72] {
        let vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3000.0)).collect();
        let h = TAU / n as f64;
        for (k, &v) in vals.iter().enumerate() {
            for wraps in [-2.0, -1.0, 0.0, 1.0, 3.0] {
                let (got, _) = interp_periodic(&vals, k as f64 * h + wraps * TAU);
                check!(f, (got - v).abs() <= 1e-12 * v.abs().max(1.0), "n={n} knot {k} wrap {wraps}: {got} vs {v}");
            }
        }
        let mut unrolled = vals.clone();
        unrolled.push(vals[0]);
        for _ in 0..200 {
            let th = rng.random_range(-4.0 * TAU..4.0 * TAU);
            let r = th.rem_euclid(TAU);
            let i = ((r / h).floor() as usize).min(n - 1);
            let s = r / h - i as f64;
            let oracle = unrolled[i] + s * (unrolled[i + 1] - unrolled[i]);
            let (got, _) = interp_periodic(&vals, th);
            check!(f, (got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "n={n} theta {th}: {got} vs {oracle}");
        }
        for d in [1e-12, 1e-6, 0.5 * h] {
            let a = interp_periodic(&vals, TAU - d).0;
            let b = interp_periodic(&vals, -d).0;
            check!(f, (a - b).abs() <= 1e-12 * a.abs().max(1.0), "n={n}: wrap mismatch at -{d}");
        }
    }
    f
}

fn fu_mpc_runs<'a>(runs: &'a [(SimConfig, EpisodeMetrics)]) -> impl Iterator<Item = &'a EpisodeMetrics> {
    runs.iter().filter(|(c, _)| c.controller == ControllerSpec::FuMpc).map(|(_, m)| m)
}

fn criterion_mpc(runs: &[(SimConfig, EpisodeMetrics)]) -> Failures {
    let mut f = Failures::new();
    let mut solves = 0;
    let mut times: Vec<f64> = Vec::new();
    for m in fu_mpc_runs(runs) {
        solves += m.mpc_solves;
        times.extend(&m.solve_times);
        check!(f, m.mpc_bound_violations == 0, "{} seed {}: {} bound violations", m.scene, m.seed, m.mpc_bound_violations);
        check!(f, m.mpc_ascents == 0, "{} seed {}: {} solves worse than the warm start", m.scene, m.seed, m.mpc_ascents);
    }
    check!(f, solves > 1000, "only {solves} episode solves");

    // brute force over the 3^5 bang-zero-bang sequences
    let targets = [RewardTarget { center: Vec3::new(3.0, -4.0, 0.0), intensity: 5.0 }];
    let traj = plan_reference(&[Vec3::zeros(), Vec3::new(6.0, 0.0, 0.0)], 3.0, 2.0, 0.0).unwrap();
    let i = Matrix3::identity();
    let mut cfg = MpcConfig { horizon: 5, ..MpcConfig::default() };
    cfg.weights.gamma = 0.005;
    let table = UncertaintyTable::from_values(vec![200.0, 2900.0], FISHER_EPSILON);
    let p = MpcProblem::new(ScanState { theta: 0.4, omega: 3.0 }, &traj, 0.0, &table, &targets, &i, &i, &cfg);
    let um = cfg.limits.u_max;
    let mut brute = f64::INFINITY;
    for code in 0..243usize {
        let u: Vec<f64> = (0..5).map(|k| [-um, 0.0, um][(code / 3usize.pow(k)) % 3]).collect();
        brute = brute.min(p.objective(&u));
    }
    let sol = solve_fu_mpc(&p, &ControlSequence::zeros(5, 0.1), 30, 1e-4);
    check!(f, sol.objective <= 1.02 * brute, "5-step fixture: {} vs brute force {brute}", sol.objective);

    // solve-time budget: N = 20, 36 knots, 50 clusters
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cfg = MpcConfig::default();
    let table = UncertaintyTable::from_values((0..36).map(|_| rng.random_range(0.1..3000.0)).collect(), FISHER_EPSILON);
    let targets: Vec<RewardTarget> = (0..50)
        .map(|_| RewardTarget {
            center: Vec3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(-2.0..2.0)),
            intensity: rng.random_range(1.0..30.0),
        })
        .collect();
    let traj = plan_reference(&[Vec3::zeros(), Vec3::new(10.0, 5.0, 0.0)], 3.0, 2.0, 0.0).unwrap();
    let mut warm = ControlSequence::zeros(cfg.horizon, cfg.dt);
    let mut x = ScanState { theta: 0.0, omega: 2.0 };
    let mut bench = Vec::new();
    for step in 0..300 {
        let start = Instant::now();
        let p = MpcProblem::new(x, &traj, step as f64 * cfg.dt, &table, &targets, &i, &i, &cfg);
        let sol = solve_fu_mpc(&p, &warm, cfg.max_iters, cfg.rel_tol);
        bench.push(start.elapsed().as_secs_f64());
        check!(f, sol.u.u.iter().all(|u| u.abs() <= cfg.limits.u_max), "benchmark step {step}: |u| above u_max");
        check!(f, sol.states.iter().all(|s| s.omega >= cfg.limits.omega_min && s.omega <= cfg.limits.omega_max), "benchmark step {step}: omega out of bounds");
        check!(f, sol.objective <= sol.warm_objective, "benchmark step {step}: objective above warm start");
        x = sol.states[0];
        warm = sol.u;
    }
    for (name, mut v) in [("episode", times), ("50-cluster benchmark", bench)] {
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let p99 = v[(v.len() * 99 / 100).min(v.len() - 1)];
        println!("    {name} solves: {} p99 {:.3} ms", v.len(), p99 * 1e3);
        check!(f, Duration::from_secs_f64(p99) < Duration::from_millis(100), "{name} p99 solve time {:.1} ms", p99 * 1e3);
    }
    f
}

fn criterion_formulas() -> Failures {
    let mut f = Failures::new();

    // transition cost of a pure climb
    for (dz, v_max) in [(4.0, 3.0), (2.5, 3.0), (1.0, 2.0), (7.0, 1.5)] {
        let mut g = TopoGraph::new(TopoConfig::default());
        let a = g.add_node(Vec3::new(1.0, 2.0, 0.5));
        let b = g.add_node(Vec3::new(1.0, 2.0, 0.5 + dz));
        g.add_edge(a, b);
        let d = transition_cost(&g, a, b, v_max).unwrap().unwrap();
        let want = (1.0 / (v_max / 2.0)) * (dz + 0.5 * dz);
        if (dz, v_max) == (4.0, 3.0) {
            check!(f, d == want && d == 4.0, "climb 4 m at 3 m/s: {d} vs {want}");
        }
        check!(f, (d - want).abs() <= 1e-12 * want, "climb {dz} m at {v_max} m/s: {d} vs {want}");
    }

    // merge cost
    let key = |i: i64| [i, 0, 0];
    let region = |keys: &[i64]| VisibleRegion {
        entries: keys
            .iter()
            .map(|&k| (key(k), Viewpoint { position: Vec3::new(k as f64, 0.0, 0.0), visibility: 1.0 }))
            .collect(),
    };
    let dc = DynamicCluster {
        id: 0,
        members: vec![0],
        member_centers: vec![Vec3::zeros()],
        shared_region: (0..5).map(|k| (key(k), (Vec3::new(k as f64, 0.0, 0.0), 1.0))).collect::<BTreeMap<_, _>>(),
        extent: 0.0,
        representative: Viewpoint { position: Vec3::zeros(), visibility: 1.0 },
    };
    check!(f, merge_cost(&dc, &Vec3::zeros(), &region(&[9, 10]), 1.0, 1.0).is_none(), "disjoint regions must be infeasible");
    let j = merge_cost(&dc, &Vec3::zeros(), &region(&[0, 1, 2, 3, 4]), 1.0, 1.0);
    check!(f, j.is_some_and(|j| (j + 5.0).abs() <= 1e-12), "zero growth, q = 5: {j:?} vs -5");
    let j = merge_cost(&dc, &Vec3::new(0.0, 2.0, 0.0), &region(&[0, 1, 2, 7]), 0.5, 1.0);
    check!(f, j.is_some_and(|j| (j - (0.5 * 2.0 - 1.0 * 3.0)).abs() <= 1e-12), "growth 2 m, q = 3: {j:?} vs -2");

    // heading term
    let p = Vec3::new(1.0, 1.0, 1.0);
    let t = Vec3::new(6.0, 1.0, 1.0);
    let cases = [
        (Vec3::new(2.0, 0.0, 0.0), 1.0, 0.0),
        (Vec3::new(-0.5, 0.0, 0.0), 1.0, PI),
        (Vec3::new(0.0, 1.5, 0.0), 0.5, 0.5 * FRAC_PI_2),
        (Vec3::new(1.0, 1.0, 0.0), 2.0, 2.0 * PI / 4.0),
        (Vec3::new(0.01, 0.0, 0.0), 1.0, 0.0),
    ];
    for (v, w_f, want) in cases {
        let got = heading_penalty(&v, &t, &p, w_f, 0.05);
        check!(f, (got - want).abs() <= 1e-12, "heading term for v = {v:?}: {got} vs {want}");
    }

    // frontier reward one sigma away
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let c = Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-3.0..3.0));
        let sigma = rng.random_range(0.5..20.0);
        let s = rng.random_range(1.0..500.0);
        let p = c + random_unit(&mut rng) * sigma;
        let got = frontier_reward(&p, &c, s, sigma);
        let want = s * (-0.5f64).exp();
        check!(f, (got - want).abs() <= 1e-12 * want, "reward at d = sigma: {got} vs {want}");
    }
    f
}

fn corridor(controller: ControllerSpec, seed: u64, sigma_r: Option<f64>) -> SimConfig {
    let mut cfg = SimConfig { controller, seed, ..SimConfig::default() };
    if let Some(s) = sigma_r {
        cfg.sensor.sigma_r = s;
    }
    cfg
}

const FIXED30: ControllerSpec = ControllerSpec::Fixed { deg_per_s: 30.0 };
const FIXED360: ControllerSpec = ControllerSpec::Fixed { deg_per_s: 360.0 };

fn find<'a>(runs: &'a [(SimConfig, EpisodeMetrics)], c: ControllerSpec, seed: u64) -> &'a EpisodeMetrics {
    &runs.iter().find(|(k, _)| k.controller == c && k.seed == seed).expect("episode ran").1
}

fn criterion_trend(runs: &[(SimConfig, EpisodeMetrics)], walls: &[f64]) -> Failures {
    let mut f = Failures::new();
    let (mut faster, mut steadier) = (0, 0);
    for seed in 1..=3 {
        let fu = find(runs, ControllerSpec::FuMpc, seed);
        let slow = find(runs, FIXED30, seed);
        let fast = find(runs, FIXED360, seed);
        let t = |m: &EpisodeMetrics| m.completion_time.unwrap_or(f64::INFINITY);
        let a = fu.completed() && t(fu) <= t(slow);
        let b = fu.completed() && fu.ape_proxy_mean() <= fast.ape_proxy_mean();
        faster += usize::from(a);
        steadier += usize::from(b);
        println!(
            "    seed {seed}: time fu_mpc {:.1} s vs fixed30 {:.1} s [{}]; mean pose proxy fu_mpc {:.3e} m vs fixed360 {:.3e} m [{}]",
            t(fu),
            t(slow),
            if a { "ok" } else { "worse" },
            fu.ape_proxy_mean(),
            fast.ape_proxy_mean(),
            if b { "ok" } else { "worse" },
        );
    }
    let max_wall = walls.iter().copied().fold(0.0, f64::max);
    println!("    longest episode wall-clock {max_wall:.1} s");
    check!(f, faster >= 2, "exploration time <= fixed30 in only {faster} of 3 seeds");
    check!(f, steadier >= 2, "mean pose proxy <= fixed360 in only {steadier} of 3 seeds");
    f
}

fn criterion_soundness(runs: &[(SimConfig, EpisodeMetrics)], noiseless: &[(SimConfig, EpisodeMetrics)]) -> Failures {
    let mut f = Failures::new();
    for (cfg, m) in runs.iter().chain(noiseless) {
        let tag = format!("{} seed {} sigma_r {}", m.controller, m.seed, cfg.sensor.sigma_r);
        check!(f, m.coverage_monotone(), "{tag}: coverage decreased");
        check!(f, m.cycles.windows(2).all(|w| w[1].trajectory_length >= w[0].trajectory_length), "{tag}: trajectory length decreased");
        check!(f, !m.collision, "{tag}: collision");
        if m.completed() {
            check!(f, m.coverage_final >= 0.95, "{tag}: completed at coverage {}", m.coverage_final);
        }
    }
    for (_, m) in noiseless {
        check!(f, m.soundness_violations == 0, "{} seed {}: {} believed-free voxels are solid", m.controller, m.seed, m.soundness_violations);
    }
    // determinism: rerun one sweep cell and one noiseless cell
    for (cfg, m) in [&runs[0], &noiseless[0]] {
        let again = Episode::new(cfg.clone()).unwrap().run().unwrap();
        check!(f, again.to_csv() == m.to_csv(), "{} seed {}: CSV differs on rerun", m.controller, m.seed);
        check!(f, again.summary_json() == m.summary_json(), "{} seed {}: summary differs on rerun", m.controller, m.seed);
    }
    f
}

// ---------------------------------------------------------------------------------------------

fn run_all(cfgs: Vec<SimConfig>) -> (Vec<(SimConfig, EpisodeMetrics)>, Vec<f64>) {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfgs.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(vec![None; cfgs.len()]);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(cfg) = cfgs.get(i) else { break };
                let start = Instant::now();
                let m = Episode::new(cfg.clone()).and_then(Episode::run).expect("episode runs");
                slots.lock().unwrap()[i] = Some((m, start.elapsed().as_secs_f64()));
            });
        }
    });
    let mut runs = Vec::new();
    let mut walls = Vec::new();
    for (cfg, slot) in cfgs.into_iter().zip(slots.into_inner().unwrap()) {
        let (m, w) = slot.expect("every episode finished");
        walls.push(w);
        runs.push((cfg, m));
    }
    (runs, walls)
}

fn main() {
    let controllers = [ControllerSpec::FuMpc, FIXED30, FIXED360];
    let sweep = |sigma_r: Option<f64>| -> Vec<SimConfig> {
        (1..=3).flat_map(|seed| controllers.iter().map(move |&c| corridor(c, seed, sigma_r))).collect()
    };

    let mut results: Vec<(&str, Failures)> = Vec::new();
    let start = Instant::now();
    results.push(("oracle suite (ATSP, ray casting, scan-state prediction)", criterion_oracles()));
    results.push(("Fisher cost, table bound and periodic interpolation", criterion_fisher()));
    results.push(("transition, merge, heading and reward formulas", criterion_formulas()));
    println!("unit-level criteria done in {:.1} s; running corridor episodes", start.elapsed().as_secs_f64());
    let (runs, walls) = run_all(sweep(None));
    let (noiseless, _) = run_all(sweep(Some(0.0)));
    let mut all = runs.clone();
    all.extend(noiseless.iter().cloned());
    results.insert(2, ("MPC contract (bounds, descent, brute force, solve time)", criterion_mpc(&all)));
    results.push(("trend on the corridor scene (fu_mpc vs fixed30 time, vs fixed360 pose proxy)", criterion_trend(&runs, &walls)));
    results.push(("closed-loop soundness (monotone coverage, noiseless map, no collisions, determinism)", criterion_soundness(&runs, &noiseless)));

    let mut failed = 0;
    for (k, (name, failures)) in results.iter().enumerate() {
        if failures.is_empty() {
            println!("criterion {}: PASS  {name}", k + 1);
        } else {
            failed += 1;
            println!("criterion {}: FAIL  {name}", k + 1);
            for msg in failures.iter().take(10) {
                println!("    {msg}");
            }
            if failures.len() > 10 {
                println!("    ... {} more", failures.len() - 10);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed in {:.0} s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
