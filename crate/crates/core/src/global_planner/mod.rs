//! Topology-aware global tour over representative viewpoints.

mod atsp;
mod topo;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use atsp::{
    held_karp_open, heuristic_open_atsp, nearest_neighbor_open, solve_open_atsp, tour_cost,
    EXACT_MAX_TARGETS,
};
pub use topo::{edge_weight, ShortestPaths, TopoConfig, TopoGraph};

use crate::frontier::{DynamicCluster, Viewpoint};
use crate::world_model::{ClearanceMap, OccupancyGrid};
use crate::Vec3;

/// Cost assigned to unreachable pairs (s).
pub const UNREACHABLE: f64 = 1e6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlanError {
    #[error("unknown roadmap node {0}")]
    UnknownNode(usize),
    #[error("roadmap has no odometry node")]
    NoOdometry,
}

/// Outcome of a global planning round that produced no goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    /// No active dynamic clusters remain.
    Complete,
    /// Targets exist but none is reachable on the roadmap.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalPlannerConfig {
    /// Maximum flight speed (m/s).
    pub v_max: f64,
    /// Heading-consistency weight (s/rad).
    pub w_f: f64,
    /// Speeds below this disable the heading term (m/s).
    pub hover_speed: f64,
    pub big: f64,
    pub replan_period: f64,
    pub topo: TopoConfig,
}

impl Default for GlobalPlannerConfig {
    fn default() -> Self {
        Self {
            v_max: 3.0,
            w_f: 2.0,
            hover_speed: 0.05,
            big: UNREACHABLE,
            replan_period: 1.0,
            topo: TopoConfig::default(),
        }
    }
}

/// Dense square cost matrix; row/column 0 is the current odometry node.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "cost matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Tab-separated rows, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.get(i, j))).collect();
            writeln!(s, "{}", row.join("\t")).unwrap();
        }
        s
    }
}

/// Travel time along a polyline: path length plus half the absolute altitude change, divided
/// by half the maximum speed.
pub fn polyline_cost(points: &[Vec3], v_max: f64) -> f64 {
    let sum: f64 = points.windows(2).map(|w| edge_weight(&w[0], &w[1])).sum();
    sum / (v_max / 2.0)
}

/// Travel time between roadmap nodes along the shortest roadmap path, or `None` when no path
/// exists.
pub fn transition_cost(graph: &TopoGraph, i: usize, j: usize, v_max: f64) -> Result<Option<f64>, PlanError> {
    if j >= graph.nodes().len() {
        return Err(PlanError::UnknownNode(j));
    }
    let sp = graph.shortest_paths(i)?;
    Ok(sp
        .path(j)
        .map(|p| polyline_cost(&graph.path_points(&p), v_max)))
}

/// `w_f` times the angle between the current velocity and the direction to `target`; zero while
/// hovering.
pub fn heading_penalty(velocity: &Vec3, target: &Vec3, position: &Vec3, w_f: f64, hover_speed: f64) -> f64 {
    let to = target - position;
    let speed = velocity.norm();
    if speed < hover_speed || to.norm() == 0.0 {
        return 0.0;
    }
    let c = (velocity.dot(&to) / (speed * to.norm())).clamp(-1.0, 1.0);
    w_f * c.acos()
}

/// Kinematic state the global planner conditions on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Cost matrix plus the roadmap it was computed on, with viewpoints inserted as nodes.
#[derive(Debug, Clone)]
pub struct TourProblem {
    pub costs: CostMatrix,
    pub graph: TopoGraph,
    /// Roadmap node of each matrix index; index 0 is the odometry node.
    pub nodes: Vec<usize>,
    pub paths: Vec<ShortestPaths>,
}

/// Inserts the viewpoints into a copy of `graph` and assembles the matrix: entries between
/// viewpoints are transition costs, row 0 adds the heading term, unreachable pairs get `big`
/// and column 0 is zero so the tour is open.
pub fn build_cost_matrix(
    graph: &TopoGraph,
    grid: &OccupancyGrid,
    clearance: &ClearanceMap,
    viewpoints: &[Vec3],
    state: &VehicleState,
    cfg: &GlobalPlannerConfig,
) -> Result<TourProblem, PlanError> {
    let odom = graph.odom_node().ok_or(PlanError::NoOdometry)?;
    let mut g = graph.clone();
    let mut nodes = vec![odom];
    for vp in viewpoints {
        let id = g.add_node(*vp);
        g.connect_node(id, grid, clearance);
        nodes.push(id);
    }
    let n = nodes.len();
    let paths = nodes
        .iter()
        .map(|&s| g.shortest_paths(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut costs = CostMatrix::zeros(n);
    for i in 0..n {
        for j in 1..n {
            if i == j {
                continue;
            }
            let c = match paths[i].path(nodes[j]) {
                Some(p) => {
                    let mut c = polyline_cost(&g.path_points(&p), cfg.v_max);
                    if i == 0 {
                        c += heading_penalty(
                            &state.velocity,
                            &viewpoints[j - 1],
                            &state.position,
                            cfg.w_f,
                            cfg.hover_speed,
                        );
                    }
                    c
                }
                None => cfg.big,
            };
            costs.set(i, j, c);
        }
    }
    Ok(TourProblem {
        costs,
        graph: g,
        nodes,
        paths,
    })
}

#[derive(Debug, Clone)]
pub struct TourPlan {
    pub next_goal: Viewpoint,
    /// Index of the goal's dynamic cluster in the planner input.
    pub goal_cluster: usize,
    /// Full visiting order over matrix indices (0 = odometry node).
    pub order: Vec<usize>,
    /// Polyline from the current position through the roadmap to the goal.
    pub path: Vec<Vec3>,
    pub costs: CostMatrix,
}

impl TourPlan {
    pub fn to_text(&self) -> String {
        let order: Vec<String> = self.order.iter().map(|i| i.to_string()).collect();
        format!(
            "order\t{}\ngoal\t{}\t{}\t{}\n{}",
            order.join(" "),
            self.next_goal.position.x,
            self.next_goal.position.y,
            self.next_goal.position.z,
            self.costs.to_text()
        )
    }
}

/// Representative extraction, cost matrix and open tour; returns the first reachable
/// viewpoint of the tour.
pub fn plan_global_tour(
    graph: &TopoGraph,
    grid: &OccupancyGrid,
    clearance: &ClearanceMap,
    clusters: &[DynamicCluster],
    state: &VehicleState,
    cfg: &GlobalPlannerConfig,
) -> Result<TourPlan, PlanStatus> {
    if clusters.is_empty() {
        return Err(PlanStatus::Complete);
    }
    let reps: Vec<Vec3> = clusters.iter().map(|d| d.representative.position).collect();
    let problem =
        build_cost_matrix(graph, grid, clearance, &reps, state, cfg).map_err(|_| PlanStatus::Stalled)?;
    let order = solve_open_atsp(&problem.costs);
    let first = order
        .iter()
        .skip(1)
        .copied()
        .find(|&k| problem.paths[0].path(problem.nodes[k]).is_some())
        .ok_or(PlanStatus::Stalled)?;
    let node_path = problem.paths[0]
        .path(problem.nodes[first])
        .expect("reachability checked");
    let mut path = vec![state.position];
    for p in problem.graph.path_points(&node_path) {
        if (p - path[path.len() - 1]).norm() > 1e-9 {
            path.push(p);
        }
    }
    Ok(TourPlan {
        next_goal: clusters[first - 1].representative,
        goal_cluster: first - 1,
        order,
        path,
        costs: problem.costs,
    })
}
