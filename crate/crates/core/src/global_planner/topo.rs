use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::world_model::{ClearanceMap, OccupancyGrid};
use crate::Vec3;

use super::PlanError;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TopoConfig {
    /// Edge length of the coarse sampling lattice (m).
    pub lattice_spacing: f64,
    /// Number of neighbours each node tries to connect to.
    pub k_neighbors: usize,
    /// Candidate neighbours farther than this are ignored (m).
    pub max_edge_length: f64,
    /// A new odometry node is inserted when the nearest node is farther than this (m).
    pub odom_insert_distance: f64,
}

impl Default for TopoConfig {
    fn default() -> Self {
        Self {
            lattice_spacing: 2.0,
            k_neighbors: 6,
            max_edge_length: 6.0,
            odom_insert_distance: 1.0,
        }
    }
}

/// Sparse roadmap over known free space.
#[derive(Debug, Clone, Default)]
pub struct TopoGraph {
    nodes: Vec<Vec3>,
    adjacency: Vec<BTreeSet<usize>>,
    lattice_cells: BTreeMap<[i64; 3], usize>,
    odom: Option<usize>,
    config: TopoConfig,
}

#[derive(Clone, Copy, PartialEq)]
struct QueueEntry {
    cost: f64,
    node: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on node id
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths over a roadmap.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    source: usize,
    dist: Vec<f64>,
    prev: Vec<usize>,
}

impl ShortestPaths {
    pub fn distance(&self, target: usize) -> Option<f64> {
        self.dist.get(target).copied().filter(|d| d.is_finite())
    }

    /// Node sequence from the source to `target`, inclusive.
    pub fn path(&self, target: usize) -> Option<Vec<usize>> {
        self.distance(target)?;
        let mut out = vec![target];
        let mut cur = target;
        while cur != self.source {
            cur = self.prev[cur];
            out.push(cur);
        }
        out.reverse();
        Some(out)
    }
}

impl TopoGraph {
    pub fn new(config: TopoConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }

    pub fn config(&self) -> &TopoConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Option<Vec3> {
        self.nodes.get(id).copied()
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[id].iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn odom_node(&self) -> Option<usize> {
        self.odom
    }

    pub fn add_node(&mut self, p: Vec3) -> usize {
        self.nodes.push(p);
        self.adjacency.push(BTreeSet::new());
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adjacency[a].insert(b);
            self.adjacency[b].insert(a);
        }
    }

    fn remove_edge(&mut self, a: usize, b: usize) {
        self.adjacency[a].remove(&b);
        self.adjacency[b].remove(&a);
    }

    /// Nodes ordered by distance to `p` (ties by id), limited to `max_dist`.
    fn nearest(&self, p: &Vec3, max_dist: f64) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, q)| ((q - p).norm(), i))
            .filter(|(d, _)| *d <= max_dist)
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v
    }

    /// Connects `id` to up to `k` nearby nodes whose straight segment is safe.
    pub fn connect_node(&mut self, id: usize, grid: &OccupancyGrid, clearance: &ClearanceMap) -> usize {
        let p = self.nodes[id];
        let mut made = 0;
        for (_, other) in self.nearest(&p, self.config.max_edge_length) {
            if made >= self.config.k_neighbors {
                break;
            }
            if other == id {
                continue;
            }
            if self.adjacency[id].contains(&other) {
                made += 1;
                continue;
            }
            if clearance.is_safe_segment(grid, &p, &self.nodes[other]) {
                self.add_edge(id, other);
                made += 1;
            }
        }
        made
    }

    /// Refreshes the roadmap from the current belief.
    ///
    /// Drops edges that are no longer safe, places one node per lattice cell at the safe voxel
    /// closest to the cell center, reconnects nodes to their nearest safe neighbours, and moves
    /// the odometry node to the node nearest `pose` (inserting one when none is close enough).
    pub fn update(&mut self, grid: &OccupancyGrid, clearance: &ClearanceMap, pose: &Vec3) {
        let stale: Vec<(usize, usize)> = self
            .edges()
            .filter(|&(a, b)| !clearance.is_safe_segment(grid, &self.nodes[a], &self.nodes[b]))
            .collect();
        for (a, b) in stale {
            self.remove_edge(a, b);
        }

        let spacing = self.config.lattice_spacing;
        let extent = grid.max_corner() - grid.origin();
        let cells = [
            (extent.x / spacing).ceil() as i64,
            (extent.y / spacing).ceil() as i64,
            (extent.z / spacing).ceil() as i64,
        ];
        for cz in 0..cells[2] {
            for cy in 0..cells[1] {
                for cx in 0..cells[0] {
                    let key = [cx, cy, cz];
                    if self.lattice_cells.contains_key(&key) {
                        continue;
                    }
                    let lo = grid.origin() + Vec3::new(cx as f64, cy as f64, cz as f64) * spacing;
                    if let Some(p) = best_voxel_in_box(grid, clearance, &lo, spacing) {
                        let id = self.add_node(p);
                        self.lattice_cells.insert(key, id);
                    }
                }
            }
        }

        for id in 0..self.nodes.len() {
            if self.adjacency[id].len() < self.config.k_neighbors {
                self.connect_node(id, grid, clearance);
            }
        }

        self.odom = Some(self.attach_point(grid, clearance, pose));
    }

    /// Id of the node nearest `pose` reachable by a safe segment within the insertion distance,
    /// inserting and connecting a new node otherwise.
    pub fn attach_point(&mut self, grid: &OccupancyGrid, clearance: &ClearanceMap, pose: &Vec3) -> usize {
        let near = self
            .nearest(pose, self.config.odom_insert_distance)
            .into_iter()
            .find(|&(_, i)| clearance.is_safe_segment(grid, pose, &self.nodes[i]) || self.nodes[i] == *pose);
        let id = match near {
            Some((_, i)) if !self.adjacency[i].is_empty() => return i,
            Some((_, i)) => i,
            None => self.add_node(*pose),
        };
        if self.connect_node(id, grid, clearance) == 0 {
            // the pose itself may sit inside the clearance margin; fall back to free-only links,
            // then to links that merely avoid known obstacles (speckle Unknown cells inside seen space)
            let near = self.nearest(pose, self.config.max_edge_length);
            for pass in [free_segment as fn(&OccupancyGrid, &Vec3, &Vec3) -> bool, unblocked_segment] {
                let mut linked = 0;
                for &(_, other) in &near {
                    if other != id && linked < self.config.k_neighbors && pass(grid, pose, &self.nodes[other]) {
                        self.add_edge(id, other);
                        linked += 1;
                    }
                }
                if linked > 0 {
                    break;
                }
            }
        }
        id
    }

    pub fn shortest_paths(&self, source: usize) -> Result<ShortestPaths, PlanError> {
        if source >= self.nodes.len() {
            return Err(PlanError::UnknownNode(source));
        }
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(QueueEntry {
            cost: 0.0,
            node: source,
        });
        while let Some(QueueEntry { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &next in &self.adjacency[node] {
                let c = cost + edge_weight(&self.nodes[node], &self.nodes[next]);
                if c < dist[next] {
                    dist[next] = c;
                    prev[next] = node;
                    heap.push(QueueEntry { cost: c, node: next });
                }
            }
        }
        Ok(ShortestPaths { source, dist, prev })
    }

    pub fn path_points(&self, path: &[usize]) -> Vec<Vec3> {
        path.iter().map(|&i| self.nodes[i]).collect()
    }
}

/// Path length plus half the absolute altitude change.
pub fn edge_weight(a: &Vec3, b: &Vec3) -> f64 {
    (b - a).norm() + 0.5 * (b.z - a.z).abs()
}

fn free_segment(grid: &OccupancyGrid, a: &Vec3, b: &Vec3) -> bool {
    let len = (b - a).norm();
    let n = ((len / (0.5 * grid.resolution())).ceil() as usize).max(1);
    (0..=n).all(|k| {
        let p = a + (b - a) * (k as f64 / n as f64);
        grid.state_at_point(&p) == Some(crate::world_model::CellState::Free)
    })
}

fn unblocked_segment(grid: &OccupancyGrid, a: &Vec3, b: &Vec3) -> bool {
    let len = (b - a).norm();
    let n = ((len / (0.5 * grid.resolution())).ceil() as usize).max(1);
    (0..=n).all(|k| {
        let p = a + (b - a) * (k as f64 / n as f64);
        matches!(grid.state_at_point(&p), Some(s) if s != crate::world_model::CellState::Occupied)
    })
}

fn best_voxel_in_box(grid: &OccupancyGrid, clearance: &ClearanceMap, lo: &Vec3, size: f64) -> Option<Vec3> {
    let center = lo + Vec3::repeat(0.5 * size);
    let a = grid.voxel_of_point_unchecked(lo);
    let b = grid.voxel_of_point_unchecked(&(lo + Vec3::repeat(size)));
    let d = grid.dims();
    let mut best: Option<(f64, usize)> = None;
    for z in a[2].max(0)..b[2].min(d[2] as i64) {
        for y in a[1].max(0)..b[1].min(d[1] as i64) {
            for x in a[0].max(0)..b[0].min(d[0] as i64) {
                let i = grid.linear_index([x, y, z]).expect("clamped to bounds");
                if grid.state_at(i) != crate::world_model::CellState::Free || clearance.is_blocked_index(i) {
                    continue;
                }
                let dist = (grid.index_center(i) - center).norm_squared();
                if best.map_or(true, |(bd, bi)| dist < bd || (dist == bd && i < bi)) {
                    best = Some((dist, i));
                }
            }
        }
    }
    best.map(|(_, i)| grid.index_center(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world_model::CellState;
    use std::collections::VecDeque;

    fn open_cube() -> OccupancyGrid {
        // 10 m free cube inside a 0.2 m occupied shell
        let mut g = OccupancyGrid::filled(Vec3::zeros(), 0.2, [52, 52, 52], CellState::Occupied).unwrap();
        g.fill_box(Vec3::repeat(0.2), Vec3::repeat(10.2), CellState::Free);
        g
    }

    fn bfs_connected(g: &TopoGraph) -> bool {
        if g.nodes().is_empty() {
            return true;
        }
        let mut seen = vec![false; g.nodes().len()];
        let mut q = VecDeque::from([0]);
        seen[0] = true;
        while let Some(a) = q.pop_front() {
            for b in g.neighbors(a) {
                if !seen[b] {
                    seen[b] = true;
                    q.push_back(b);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    #[test]
    fn open_cube_lattice_is_connected() {
        let g = open_cube();
        let c = ClearanceMap::build(&g, 0.6);
        let mut t = TopoGraph::new(TopoConfig::default());
        t.update(&g, &c, &Vec3::repeat(5.1));
        assert!(t.nodes().len() >= 125);
        assert!(bfs_connected(&t));
        assert!(t.odom_node().is_some());
        for (a, b) in t.edges() {
            assert!(c.is_safe_segment(&g, &t.nodes()[a], &t.nodes()[b]));
        }
    }

    #[test]
    fn repeated_update_keeps_nodes() {
        let g = open_cube();
        let c = ClearanceMap::build(&g, 0.6);
        let mut t = TopoGraph::new(TopoConfig::default());
        t.update(&g, &c, &Vec3::repeat(5.0));
        let before = t.nodes().to_vec();
        t.update(&g, &c, &Vec3::repeat(5.0));
        assert_eq!(t.nodes(), &before[..]);
        // moving far from every node inserts exactly one odometry node
        t.update(&g, &c, &Vec3::new(2.1, 2.1, 2.1));
        assert!(t.nodes().len() <= before.len() + 1);
        assert_eq!(&t.nodes()[..before.len()], &before[..]);
    }

    #[test]
    fn isolated_odometry_node_is_relinked() {
        let pose = Vec3::new(0.5, 5.1, 5.1);
        let shell = |g: &mut OccupancyGrid, state| {
            g.fill_box(pose - Vec3::repeat(0.9), pose + Vec3::repeat(0.9), state);
            g.fill_box(pose - Vec3::repeat(0.3), pose + Vec3::repeat(0.3), CellState::Free);
        };
        let mut g = open_cube();
        shell(&mut g, CellState::Occupied);
        let c = ClearanceMap::build(&g, 0.6);
        let mut t = TopoGraph::new(TopoConfig::default());
        t.update(&g, &c, &pose);
        let odom = t.odom_node().unwrap();
        assert_eq!(t.neighbors(odom).count(), 0);

        // the enclosure turns out to be unobserved speckle, not an obstacle
        let mut g = open_cube();
        shell(&mut g, CellState::Unknown);
        let c = ClearanceMap::build(&g, 0.6);
        t.update(&g, &c, &pose);
        assert_eq!(t.odom_node(), Some(odom));
        assert!(t.neighbors(odom).count() > 0);
    }

    #[test]
    fn wall_is_never_crossed() {
        let mut g = open_cube();
        g.fill_box(Vec3::new(4.9, 0.0, 0.0), Vec3::new(5.3, 10.4, 10.4), CellState::Occupied);
        let c = ClearanceMap::build(&g, 0.6);
        let mut t = TopoGraph::new(TopoConfig::default());
        t.update(&g, &c, &Vec3::new(2.0, 5.0, 5.0));
        assert!(t.edge_count() > 0);
        for (a, b) in t.edges() {
            let (pa, pb) = (t.nodes()[a], t.nodes()[b]);
            assert!((pa.x < 5.0) == (pb.x < 5.0), "edge crosses wall: {pa:?} {pb:?}");
        }
    }

    #[test]
    fn shortest_path_prefers_short_edges() {
        let mut t = TopoGraph::new(TopoConfig::default());
        let a = t.add_node(Vec3::new(0.0, 0.0, 0.0));
        let b = t.add_node(Vec3::new(1.0, 0.0, 0.0));
        let c = t.add_node(Vec3::new(2.0, 0.0, 0.0));
        let d = t.add_node(Vec3::new(1.0, 5.0, 0.0));
        t.add_edge(a, b);
        t.add_edge(b, c);
        t.add_edge(a, d);
        t.add_edge(d, c);
        let sp = t.shortest_paths(a).unwrap();
        assert_eq!(sp.path(c).unwrap(), vec![a, b, c]);
        assert!((sp.distance(c).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(t.shortest_paths(9), Err(PlanError::UnknownNode(9))));
    }
}
