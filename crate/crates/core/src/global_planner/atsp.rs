//! Open asymmetric TSP: node 0 is the fixed start and the tour does not return.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CostMatrix;

/// Held-Karp is used up to this many targets (excluding the start node).
pub const EXACT_MAX_TARGETS: usize = 10;

/// Sum of consecutive transition costs along `order` (no closing edge).
pub fn tour_cost(costs: &CostMatrix, order: &[usize]) -> f64 {
    order.windows(2).map(|w| costs.get(w[0], w[1])).sum()
}

/// Visiting order starting at node 0. Exact (Held-Karp) for up to
/// [`EXACT_MAX_TARGETS`] targets, otherwise nearest neighbour followed by 2-opt and Or-opt.
pub fn solve_open_atsp(costs: &CostMatrix) -> Vec<usize> {
    if costs.size() <= EXACT_MAX_TARGETS + 1 {
        held_karp_open(costs)
    } else {
        heuristic_open_atsp(costs)
    }
}

pub fn held_karp_open(costs: &CostMatrix) -> Vec<usize> {
    let n = costs.size();
    if n <= 2 {
        return (0..n).collect();
    }
    let m = n - 1; // targets 1..n mapped to bits 0..m
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (1 << m) * m];
    let mut parent = vec![usize::MAX; (1 << m) * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = costs.get(0, j + 1);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + costs.get(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j;
                }
            }
        }
    }
    let mut last = 0;
    for j in 1..m {
        if dp[full * m + j] < dp[full * m + last] {
            last = j;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = last;
    loop {
        rev.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == usize::MAX {
            break;
        }
        j = p;
    }
    rev.push(0);
    rev.reverse();
    rev
}

pub fn nearest_neighbor_open(costs: &CostMatrix) -> Vec<usize> {
    nearest_neighbor_from(costs, &[0])
}

/// Greedy completion of the partial order `head` (which must start at 0).
fn nearest_neighbor_from(costs: &CostMatrix, head: &[usize]) -> Vec<usize> {
    let n = costs.size();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &h in head {
        visited[h] = true;
        order.push(h);
    }
    let mut cur = *order.last().expect("non-empty head");
    for _ in head.len()..n {
        let mut best = usize::MAX;
        for j in 0..n {
            if !visited[j] && (best == usize::MAX || costs.get(cur, j) < costs.get(cur, best)) {
                best = j;
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }
    order
}

/// Local search from several greedy starts: plain nearest neighbour, then one nearest-neighbour
/// tour per forced first target, followed by perturbation restarts. The result is deterministic.
pub fn heuristic_open_atsp(costs: &CostMatrix) -> Vec<usize> {
    let n = costs.size();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut best = local_search(costs, nearest_neighbor_open(costs));
    let mut best_cost = tour_cost(costs, &best);
    for first in 1..n {
        let order = local_search(costs, nearest_neighbor_from(costs, &[0, first]));
        let c = tour_cost(costs, &order);
        if c < best_cost - EPS {
            best = order;
            best_cost = c;
        }
    }
    if n < 5 {
        return best;
    }
    // iterated local search from a fixed seed, alternating double-bridge kicks and random
    // restarts; only improvements are kept
    let mut rng = ChaCha8Rng::seed_from_u64(KICK_SEED);
    let kicks = (KICKS_PER_NODE * n).min(MAX_KICKS);
    for kick in 0..kicks {
        let start = if kick % 2 == 0 {
            double_bridge(&best, &mut rng)
        } else {
            let mut o = best.clone();
            o[1..].shuffle(&mut rng);
            o
        };
        let order = local_search(costs, start);
        let c = tour_cost(costs, &order);
        if c < best_cost - EPS {
            best = order;
            best_cost = c;
        }
    }
    best
}

/// Splits `order[1..]` into four non-empty parts A B C D and returns A C B D.
fn double_bridge(order: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = order.len();
    let mut cuts = rand::seq::index::sample(rng, n - 2, 3).into_vec();
    cuts.iter_mut().for_each(|c| *c += 2);
    cuts.sort_unstable();
    let (a, b, c) = (cuts[0], cuts[1], cuts[2]);
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&order[..a]);
    out.extend_from_slice(&order[b..c]);
    out.extend_from_slice(&order[a..b]);
    out.extend_from_slice(&order[c..]);
    out
}

fn local_search(costs: &CostMatrix, mut order: Vec<usize>) -> Vec<usize> {
    while two_opt_pass(costs, &mut order) || or_opt_pass(costs, &mut order) {}
    order
}

const EPS: f64 = 1e-9;
const OR_OPT_MAX_SEGMENT: usize = 3;
const KICK_SEED: u64 = 0x5eed;
const KICKS_PER_NODE: usize = 50;
const MAX_KICKS: usize = 300;

/// Prefix sums of forward and reversed edge costs along `order`.
fn prefix(costs: &CostMatrix, order: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut fwd = vec![0.0; order.len()];
    let mut bwd = vec![0.0; order.len()];
    for t in 1..order.len() {
        fwd[t] = fwd[t - 1] + costs.get(order[t - 1], order[t]);
        bwd[t] = bwd[t - 1] + costs.get(order[t], order[t - 1]);
    }
    (fwd, bwd)
}

/// First-improvement 2-opt: reverse `order[i..=j]`.
fn two_opt_pass(costs: &CostMatrix, order: &mut [usize]) -> bool {
    let n = order.len();
    let (fwd, bwd) = prefix(costs, order);
    for i in 1..n {
        for j in i + 1..n {
            let a = order[i - 1];
            let old_in = fwd[j] - fwd[i];
            let new_in = bwd[j] - bwd[i];
            let mut delta = costs.get(a, order[j]) - costs.get(a, order[i]) + new_in - old_in;
            if j + 1 < n {
                let b = order[j + 1];
                delta += costs.get(order[i], b) - costs.get(order[j], b);
            }
            if delta < -EPS {
                order[i..=j].reverse();
                return true;
            }
        }
    }
    false
}

/// First-improvement Or-opt: move a segment (optionally reversed) elsewhere. Short segments are
/// tried first; segment length is bounded by [`OR_OPT_MAX_SEGMENT`].
fn or_opt_pass(costs: &CostMatrix, order: &mut Vec<usize>) -> bool {
    let n = order.len();
    let (fwd, bwd) = prefix(costs, order);
    for len in 1..=OR_OPT_MAX_SEGMENT.min(n.saturating_sub(2)) {
        for i in 1..n {
            let k = i + len - 1;
            if k >= n {
                break;
            }
            let prev = order[i - 1];
            let mut removal = -costs.get(prev, order[i]);
            if k + 1 < n {
                let next = order[k + 1];
                removal += costs.get(prev, next) - costs.get(order[k], next);
            }
            for p in 0..n {
                if p + 1 >= i && p <= k {
                    continue;
                }
                let a = order[p];
                let b = order.get(p + 1).copied();
                for reversed in [false, true] {
                    if reversed && len == 1 {
                        continue;
                    }
                    let (first, last, internal) = if reversed {
                        (order[k], order[i], bwd[k] - bwd[i] - (fwd[k] - fwd[i]))
                    } else {
                        (order[i], order[k], 0.0)
                    };
                    let mut insertion = costs.get(a, first) + internal;
                    if let Some(b) = b {
                        insertion += costs.get(last, b) - costs.get(a, b);
                    }
                    if removal + insertion < -EPS {
                        let mut seg: Vec<usize> = order[i..=k].to_vec();
                        if reversed {
                            seg.reverse();
                        }
                        let mut rest: Vec<usize> = order[..i].iter().chain(&order[k + 1..]).copied().collect();
                        let pos = rest.iter().position(|&x| x == a).expect("anchor kept") + 1;
                        rest.splice(pos..pos, seg);
                        *order = rest;
                        return true;
                    }
                }
            }
        }
    }
    false
}
