//! Minimum-cost flow inference.
//!
//! [`solve_optimal`] runs successive shortest paths on the residual network:
//! each round finds the cheapest residual `(s,t)`-path and augments one unit
//! along it while that path has negative cost. Because the flow value is
//! free, stopping at the first non-negative path gives the global minimum
//! over all flow values. Costs are log-likelihoods and are routinely
//! negative, so the first search relaxes the acyclic base graph in
//! topological order and later searches either use node potentials with
//! Dijkstra or plain label correcting.
//!
//! [`solve_greedy`] repeatedly takes the single cheapest path and deletes its
//! vertices. [`solve_bruteforce`] enumerates every clustering and is the test
//! oracle for the other two.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Clustering, EventSet, ObservationId};
use crate::model::{clustering_log_ratio, MmrpModel};
use crate::network::{build_network, node_position, ArcKind, FlowNetwork, SINK, SOURCE};

/// Paths whose cost is above `-COST_EPS` are not worth augmenting; zero-cost
/// paths are left out so ties resolve towards fewer clusters.
pub const COST_EPS: f64 = 1e-12;

/// Largest event set [`solve_bruteforce`] accepts.
pub const MAX_BRUTEFORCE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Optimal,
    Greedy,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Optimal => "optimal",
            SolverKind::Greedy => "greedy",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(SolverKind::Optimal),
            "greedy" => Ok(SolverKind::Greedy),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

/// Shortest-path routine used on the residual network after the first round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResidualSearch {
    /// Dijkstra on reduced costs under node potentials.
    #[default]
    Potentials,
    /// Queue-based label correcting on the raw costs.
    LabelCorrecting,
}

/// Per-augmentation costs from an optimal solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimalTrace {
    pub path_costs: Vec<f64>,
}

pub fn solve_optimal(network: &mut FlowNetwork) -> Result<Clustering> {
    solve_optimal_with(network, ResidualSearch::default()).map(|(c, _)| c)
}

/// Successive shortest paths from zero flow. The network keeps the optimal
/// flow afterwards.
pub fn solve_optimal_with(
    network: &mut FlowNetwork,
    search: ResidualSearch,
) -> Result<(Clustering, OptimalTrace)> {
    network.reset_flow();
    let n = network.node_count();
    let mut trace = OptimalTrace::default();
    if network.num_observations() == 0 {
        return Ok((network.to_clustering()?, trace));
    }

    let mut potential = dag_distances(network);
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    for round in 0.. {
        let reduced = round > 0 && search == ResidualSearch::Potentials;
        if round == 0 {
            // the base graph is acyclic: reuse the topological pass
            dist.copy_from_slice(&potential);
            dag_predecessors(network, &dist, &mut pred);
        } else {
            match search {
                ResidualSearch::Potentials => {
                    dijkstra_reduced(network, &potential, &mut dist, &mut pred);
                }
                ResidualSearch::LabelCorrecting => label_correcting(network, &mut dist, &mut pred)?,
            }
        }
        if !dist[SINK].is_finite() {
            break;
        }
        let path = residual_path(network, &pred);
        let cost: f64 = path
            .iter()
            .map(|&(a, forward)| {
                let c = network.arc(a).cost;
                if forward {
                    c
                } else {
                    -c
                }
            })
            .sum();
        if cost >= -COST_EPS {
            break;
        }
        for &(a, forward) in &path {
            network.set_flow(a, if forward { 1 } else { 0 });
        }
        trace.path_costs.push(cost);
        if trace.path_costs.len() > network.num_observations() {
            return Err(Error::InfeasibleFlow("more augmentations than observations".into()));
        }
        if search == ResidualSearch::Potentials {
            update_potentials(&mut potential, &dist, reduced);
        }
    }
    let clustering = network.to_clustering()?;
    Ok((clustering, trace))
}

/// `dist` holds true distances after the first round and reduced distances
/// afterwards.
fn update_potentials(potential: &mut [f64], dist: &[f64], reduced: bool) {
    if !reduced {
        potential.copy_from_slice(dist);
        return;
    }
    // unreached nodes are shifted by the largest finite distance, which keeps
    // every residual reduced cost non-negative
    let max_finite = dist
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0f64, f64::max);
    for (p, &d) in potential.iter_mut().zip(dist) {
        *p += if d.is_finite() { d } else { max_finite };
    }
}

/// Shortest distances from the source over the zero-flow base graph.
fn dag_distances(network: &FlowNetwork) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; network.node_count()];
    dist[SOURCE] = 0.0;
    for node in network.topological_order() {
        let d = dist[node];
        if !d.is_finite() {
            continue;
        }
        for &a in network.out_arcs(node) {
            let arc = network.arc(a);
            let nd = d + arc.cost;
            if nd < dist[arc.head] {
                dist[arc.head] = nd;
            }
        }
    }
    dist
}

fn dag_predecessors(network: &FlowNetwork, dist: &[f64], pred: &mut [usize]) {
    pred.fill(usize::MAX);
    for node in network.topological_order() {
        if !dist[node].is_finite() {
            continue;
        }
        for &a in network.out_arcs(node) {
            let arc = network.arc(a);
            if pred[arc.head] == usize::MAX && dist[node] + arc.cost == dist[arc.head] {
                pred[arc.head] = encode(a, true);
            }
        }
    }
}

// Predecessor entries pack (arc index, direction) into one word.
fn encode(arc: usize, forward: bool) -> usize {
    arc << 1 | usize::from(forward)
}

fn decode(entry: usize) -> (usize, bool) {
    (entry >> 1, entry & 1 == 1)
}

/// Residual arcs leaving `node` as `(arc, forward, next node, cost)`.
fn residual_arcs(network: &FlowNetwork, node: usize) -> impl Iterator<Item = (usize, bool, usize, f64)> + '_ {
    let forward = network.out_arcs(node).iter().filter_map(move |&a| {
        let arc = network.arc(a);
        (arc.flow < arc.upper).then_some((a, true, arc.head, arc.cost))
    });
    let backward = network.in_arcs(node).iter().filter_map(move |&a| {
        let arc = network.arc(a);
        (arc.flow > arc.lower).then_some((a, false, arc.tail, -arc.cost))
    });
    forward.chain(backward)
}

#[derive(PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra_reduced(network: &FlowNetwork, potential: &[f64], dist: &mut [f64], pred: &mut [usize]) {
    dist.fill(f64::INFINITY);
    pred.fill(usize::MAX);
    let mut done = vec![false; dist.len()];
    let mut heap = BinaryHeap::new();
    dist[SOURCE] = 0.0;
    heap.push(HeapEntry(0.0, SOURCE));
    while let Some(HeapEntry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for (a, forward, v, cost) in residual_arcs(network, u) {
            if done[v] {
                continue;
            }
            // rounding can leave reduced costs a hair below zero
            let reduced = (cost + potential[u] - potential[v]).max(0.0);
            let nd = d + reduced;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = encode(a, forward);
                heap.push(HeapEntry(nd, v));
            }
        }
    }
}

fn label_correcting(network: &FlowNetwork, dist: &mut [f64], pred: &mut [usize]) -> Result<()> {
    let n = dist.len();
    dist.fill(f64::INFINITY);
    pred.fill(usize::MAX);
    let mut in_queue = vec![false; n];
    let mut relaxations = vec![0usize; n];
    let mut queue = VecDeque::new();
    dist[SOURCE] = 0.0;
    queue.push_back(SOURCE);
    in_queue[SOURCE] = true;
    while let Some(u) = queue.pop_front() {
        in_queue[u] = false;
        for (a, forward, v, cost) in residual_arcs(network, u) {
            let nd = dist[u] + cost;
            if nd < dist[v] - COST_EPS * (1.0 + nd.abs()) {
                dist[v] = nd;
                pred[v] = encode(a, forward);
                relaxations[v] += 1;
                if relaxations[v] > n {
                    return Err(Error::InfeasibleFlow("negative cycle in residual network".into()));
                }
                if !in_queue[v] {
                    in_queue[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(())
}

/// Arcs from source to sink along the predecessor tree.
fn residual_path(network: &FlowNetwork, pred: &[usize]) -> Vec<(usize, bool)> {
    let mut path = Vec::new();
    let mut node = SINK;
    while node != SOURCE {
        let (a, forward) = decode(pred[node]);
        path.push((a, forward));
        let arc = network.arc(a);
        node = if forward { arc.tail } else { arc.head };
        debug_assert!(path.len() <= network.arc_count());
    }
    path.reverse();
    path
}

/// Greedy inference: take the cheapest `(s,t)`-path among the remaining
/// vertices while it has negative cost, then delete its vertices. Each
/// search is one dynamic-programming pass over the acyclic graph.
pub fn solve_greedy(network: &mut FlowNetwork) -> Result<Clustering> {
    network.reset_flow();
    let n = network.node_count();
    let mut removed = vec![false; network.num_observations()];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let alive = |node: usize, removed: &[bool]| node_position(node).is_none_or(|p| !removed[p]);
    loop {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        dist[SOURCE] = 0.0;
        for node in network.topological_order() {
            if !dist[node].is_finite() || !alive(node, &removed) {
                continue;
            }
            for &a in network.out_arcs(node) {
                let arc = network.arc(a);
                if !alive(arc.head, &removed) {
                    continue;
                }
                let nd = dist[node] + arc.cost;
                if nd < dist[arc.head] {
                    dist[arc.head] = nd;
                    pred[arc.head] = a;
                }
            }
        }
        if !(dist[SINK] < -COST_EPS) {
            break;
        }
        let mut node = SINK;
        while node != SOURCE {
            let a = pred[node];
            network.set_flow(a, 1);
            if let ArcKind::Clutter(p) = network.arc(a).kind {
                removed[p] = true;
            }
            node = network.arc(a).tail;
        }
    }
    network.to_clustering()
}

/// Builds the network for `events` and solves it.
pub fn infer<M: MmrpModel + Sync + ?Sized>(
    events: &EventSet,
    model: &M,
    solver: SolverKind,
) -> Result<Inference> {
    let mut network = build_network(events, model)?;
    let clustering = match solver {
        SolverKind::Optimal => solve_optimal(&mut network)?,
        SolverKind::Greedy => solve_greedy(&mut network)?,
    };
    Ok(Inference {
        log_ratio: -network.total_cost(),
        clustering,
        network,
    })
}

/// Result of [`infer`]: the clustering, its log likelihood ratio against
/// the all-clutter hypothesis, and the solved network.
#[derive(Clone, Debug)]
pub struct Inference {
    pub clustering: Clustering,
    pub log_ratio: f64,
    pub network: FlowNetwork,
}

/// Exhaustive search over every set of disjoint time-ordered chains
/// (respecting `tau_max` and zero-likelihood transitions) plus noise.
///
/// Ties within `COST_EPS` go to the lexicographically smallest list of
/// clusters (clusters listed by first observation), so fewer and earlier
/// clusters win.
pub fn solve_bruteforce<M: MmrpModel + ?Sized>(events: &EventSet, model: &M) -> Result<Clustering> {
    let n = events.len();
    if n > MAX_BRUTEFORCE {
        return Err(Error::TooManyObservations {
            max: MAX_BRUTEFORCE,
            got: n,
        });
    }
    let obs = events.observations();
    let tau_max = model.tau_max();
    let birth: Vec<f64> = obs.iter().map(|o| model.birth_loglik(&o.state)).collect();
    let death: Vec<f64> = obs.iter().map(|o| model.death_loglik(&o.state)).collect();
    let clutter: Vec<f64> = obs.iter().map(|o| model.clutter_loglik(&o.state)).collect();
    let mut trans = vec![vec![f64::NEG_INFINITY; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let gap = obs[j].time - obs[i].time;
            if gap > 0.0 && gap <= tau_max {
                trans[i][j] = model.transition_loglik(&obs[i].state, &obs[j].state, gap);
            }
        }
    }

    struct Search<'a> {
        birth: &'a [f64],
        death: &'a [f64],
        clutter: &'a [f64],
        trans: &'a [Vec<f64>],
        ids: Vec<ObservationId>,
        chains: Vec<Vec<usize>>,
        best: f64,
        best_chains: Vec<Vec<ObservationId>>,
    }

    impl Search<'_> {
        fn visit(&mut self, pos: usize, partial: f64) {
            if pos == self.ids.len() {
                let score = partial + self.chains.iter().map(|c| self.death[*c.last().unwrap()]).sum::<f64>();
                if !score.is_finite() {
                    return;
                }
                let encoded: Vec<Vec<ObservationId>> = self
                    .chains
                    .iter()
                    .map(|c| c.iter().map(|&p| self.ids[p]).collect())
                    .collect();
                let better = score > self.best + COST_EPS
                    || ((score - self.best).abs() <= COST_EPS && encoded < self.best_chains);
                if better {
                    self.best = score;
                    self.best_chains = encoded;
                }
                return;
            }
            // noise
            self.visit(pos + 1, partial);
            // new chain
            if self.birth[pos].is_finite() {
                self.chains.push(vec![pos]);
                self.visit(pos + 1, partial + self.birth[pos] - self.clutter[pos]);
                self.chains.pop();
            }
            // extend an existing chain
            for k in 0..self.chains.len() {
                let last = *self.chains[k].last().unwrap();
                let lt = self.trans[last][pos];
                if lt == f64::NEG_INFINITY {
                    continue;
                }
                self.chains[k].push(pos);
                self.visit(pos + 1, partial + lt - self.clutter[pos]);
                self.chains[k].pop();
            }
        }
    }

    let mut search = Search {
        birth: &birth,
        death: &death,
        clutter: &clutter,
        trans: &trans,
        ids: obs.iter().map(|o| o.id).collect(),
        chains: Vec::new(),
        best: 0.0,
        best_chains: Vec::new(),
    };
    search.visit(0, 0.0);
    let used: std::collections::HashSet<ObservationId> =
        search.best_chains.iter().flatten().copied().collect();
    let noise = events.ids().filter(|id| !used.contains(id));
    let clustering = Clustering::new(search.best_chains, noise)?;
    debug_assert!((clustering_log_ratio(model, events, &clustering)? - search.best).abs() < 1e-6);
    Ok(clustering)
}
