//! The observation flow network.
//!
//! Every observation becomes an in-vertex and an out-vertex joined by a unit
//! arc carrying the clutter cost. Transition arcs run from out-vertices to
//! later in-vertices, birth arcs leave the source and death arcs enter the
//! sink. All arcs have capacity 1, so an integer flow is a set of
//! vertex-disjoint `(s,t)`-paths, one per track.
//!
//! Node numbering: `0` is the source, `1` the sink, and the observation at
//! time-order position `i` owns nodes `2 + 2i` (in) and `3 + 2i` (out). The
//! sequence `s, in_0, out_0, in_1, ..., t` is a topological order.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Clustering, EventSet, ObservationId};
use crate::model::{birth_cost, clutter_cost, death_cost, transition_cost, MmrpModel};

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

pub fn in_node(pos: usize) -> usize {
    2 + 2 * pos
}

pub fn out_node(pos: usize) -> usize {
    3 + 2 * pos
}

/// Observation position of an in- or out-vertex.
pub fn node_position(node: usize) -> Option<usize> {
    (node >= 2).then(|| (node - 2) / 2)
}

/// What an arc stands for, in terms of observation positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcKind {
    Birth(usize),
    Death(usize),
    Clutter(usize),
    Transition(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub lower: i32,
    pub upper: i32,
    pub cost: f64,
    pub flow: i32,
    pub kind: ArcKind,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    ids: Vec<ObservationId>,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
}

/// Builds the network for `events` under `model`.
///
/// Arcs whose likelihood is zero are left out. Fails only if some
/// observation has a zero or non-finite clutter likelihood, which would make
/// the all-clutter reference hypothesis impossible.
pub fn build_network<M: MmrpModel + Sync + ?Sized>(events: &EventSet, model: &M) -> Result<FlowNetwork> {
    let obs = events.observations();
    let n = obs.len();
    let tau_max = model.tau_max();

    // candidate transitions per observation, computed in parallel
    let transitions: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let from = &obs[i];
            let mut out = Vec::new();
            for (j, to) in obs.iter().enumerate().skip(i + 1) {
                let gap = to.time - from.time;
                if gap > tau_max {
                    break;
                }
                if gap <= 0.0 {
                    continue;
                }
                let cost = transition_cost(model, &from.state, &to.state, gap);
                if cost.is_finite() {
                    out.push((j, cost));
                }
            }
            out
        })
        .collect();

    let mut net = FlowNetwork {
        ids: obs.iter().map(|o| o.id).collect(),
        arcs: Vec::with_capacity(3 * n + transitions.iter().map(Vec::len).sum::<usize>()),
        out_arcs: vec![Vec::new(); 2 * n + 2],
        in_arcs: vec![Vec::new(); 2 * n + 2],
    };
    for (i, o) in obs.iter().enumerate() {
        let clutter = clutter_cost(model, &o.state);
        if !clutter.is_finite() {
            return Err(Error::InvalidModel(format!(
                "observation {} has clutter log-likelihood {clutter}",
                o.id
            )));
        }
        net.add_arc(in_node(i), out_node(i), clutter, ArcKind::Clutter(i));
        let birth = birth_cost(model, &o.state);
        if birth.is_finite() {
            net.add_arc(SOURCE, in_node(i), birth, ArcKind::Birth(i));
        }
        let death = death_cost(model, &o.state);
        if death.is_finite() {
            net.add_arc(out_node(i), SINK, death, ArcKind::Death(i));
        }
    }
    for (i, list) in transitions.into_iter().enumerate() {
        for (j, cost) in list {
            net.add_arc(out_node(i), in_node(j), cost, ArcKind::Transition(i, j));
        }
    }
    Ok(net)
}

impl FlowNetwork {
    fn add_arc(&mut self, tail: usize, head: usize, cost: f64, kind: ArcKind) {
        let idx = self.arcs.len();
        self.arcs.push(Arc {
            tail,
            head,
            lower: 0,
            upper: 1,
            cost,
            flow: 0,
            kind,
        });
        self.out_arcs[tail].push(idx);
        self.in_arcs[head].push(idx);
    }

    pub fn node_count(&self) -> usize {
        self.out_arcs.len()
    }

    pub fn num_observations(&self) -> usize {
        self.ids.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, idx: usize) -> &Arc {
        &self.arcs[idx]
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Observation id at time-order position `pos`.
    pub fn observation_id(&self, pos: usize) -> ObservationId {
        self.ids[pos]
    }

    pub fn observation_ids(&self) -> &[ObservationId] {
        &self.ids
    }

    pub fn out_arcs(&self, node: usize) -> &[usize] {
        &self.out_arcs[node]
    }

    pub fn in_arcs(&self, node: usize) -> &[usize] {
        &self.in_arcs[node]
    }

    pub(crate) fn set_flow(&mut self, arc: usize, flow: i32) {
        self.arcs[arc].flow = flow;
    }

    /// Nodes in topological order: source, observation vertices by time, sink.
    pub fn topological_order(&self) -> impl Iterator<Item = usize> {
        std::iter::once(SOURCE)
            .chain(2..self.node_count())
            .chain(std::iter::once(SINK))
    }

    pub fn reset_flow(&mut self) {
        for a in &mut self.arcs {
            a.flow = 0;
        }
    }

    /// Units of flow leaving the source; the number of tracks `K`.
    pub fn flow_value(&self) -> i64 {
        self.out_arcs[SOURCE]
            .iter()
            .map(|&a| i64::from(self.arcs[a].flow))
            .sum()
    }

    /// `sum a_ij x_ij` over all arcs.
    pub fn total_cost(&self) -> f64 {
        self.arcs
            .iter()
            .filter(|a| a.flow != 0)
            .map(|a| a.cost * f64::from(a.flow))
            .sum()
    }

    /// Checks capacity bounds and conservation at every node but `s` and `t`.
    pub fn check_feasible(&self) -> Result<()> {
        for (idx, a) in self.arcs.iter().enumerate() {
            if a.flow < a.lower || a.flow > a.upper {
                return Err(Error::InfeasibleFlow(format!(
                    "arc {idx} ({} -> {}) carries {} outside [{}, {}]",
                    a.tail, a.head, a.flow, a.lower, a.upper
                )));
            }
        }
        for node in 2..self.node_count() {
            let inflow: i64 = self.in_arcs[node].iter().map(|&a| i64::from(self.arcs[a].flow)).sum();
            let outflow: i64 = self.out_arcs[node].iter().map(|&a| i64::from(self.arcs[a].flow)).sum();
            if inflow != outflow {
                return Err(Error::InfeasibleFlow(format!(
                    "node {node} has inflow {inflow} and outflow {outflow}"
                )));
            }
        }
        Ok(())
    }

    /// Decomposes the current flow into unit `(s,t)`-paths, one cluster each,
    /// ordered by the time of their first observation. Observations without
    /// flow are noise.
    pub fn to_clustering(&self) -> Result<Clustering> {
        self.check_feasible()?;
        let mut clusters = Vec::new();
        let mut used = vec![false; self.ids.len()];
        let mut starts: Vec<usize> = self.out_arcs[SOURCE]
            .iter()
            .filter(|&&a| self.arcs[a].flow > 0)
            .map(|&a| self.arcs[a].head)
            .collect();
        starts.sort_unstable();
        for start in starts {
            let mut cluster = Vec::new();
            let mut node = start;
            while node != SINK {
                let pos = node_position(node).expect("observation vertex");
                if used[pos] {
                    return Err(Error::InfeasibleFlow(format!(
                        "observation {} lies on two paths",
                        self.ids[pos]
                    )));
                }
                used[pos] = true;
                cluster.push(self.ids[pos]);
                // in -> out over the clutter arc, then the flowed arc with the
                // lowest head leaving out
                let out = out_node(pos);
                node = self.out_arcs[out]
                    .iter()
                    .filter(|&&a| self.arcs[a].flow > 0)
                    .map(|&a| self.arcs[a].head)
                    .min_by_key(|&h| if h == SINK { usize::MAX } else { h })
                    .ok_or_else(|| {
                        Error::InfeasibleFlow(format!("path stops at observation {}", self.ids[pos]))
                    })?;
            }
            clusters.push(cluster);
        }
        let noise = used
            .iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(pos, _)| self.ids[pos]);
        let clustering = Clustering::new(clusters, noise)?;
        if clustering.num_signal() != used.iter().filter(|&&u| u).count()
            || self.arcs.iter().any(|a| matches!(a.kind, ArcKind::Clutter(p) if (a.flow > 0) != used[p]))
        {
            return Err(Error::InfeasibleFlow("flow does not decompose into paths".into()));
        }
        Ok(clustering)
    }

    /// Replaces the current flow with the one that encodes `clustering`.
    pub fn apply_clustering(&mut self, clustering: &Clustering) -> Result<()> {
        self.reset_flow();
        let position: std::collections::HashMap<ObservationId, usize> =
            self.ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let pos_of = |id: &ObservationId| {
            position
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidClustering(format!("id {id} not in network")))
        };
        for cluster in clustering.clusters() {
            let positions = cluster.iter().map(pos_of).collect::<Result<Vec<_>>>()?;
            let mut prev = SOURCE;
            for &p in &positions {
                self.push_unit(prev, in_node(p))?;
                self.push_unit(in_node(p), out_node(p))?;
                prev = out_node(p);
            }
            self.push_unit(prev, SINK)?;
        }
        Ok(())
    }

    fn push_unit(&mut self, tail: usize, head: usize) -> Result<()> {
        let arc = self.out_arcs[tail]
            .iter()
            .copied()
            .find(|&a| self.arcs[a].head == head)
            .ok_or_else(|| Error::InvalidClustering(format!("no arc {tail} -> {head} in network")))?;
        if self.arcs[arc].flow >= self.arcs[arc].upper {
            return Err(Error::InvalidClustering(format!(
                "arc {tail} -> {head} used twice"
            )));
        }
        self.arcs[arc].flow += 1;
        Ok(())
    }

    /// Number of distinct `(s,t)`-paths, by dynamic programming over the
    /// topological order. Saturates at `u128::MAX`.
    pub fn count_st_paths(&self) -> u128 {
        let mut paths = vec![0u128; self.node_count()];
        paths[SOURCE] = 1;
        for node in self.topological_order() {
            for &a in &self.out_arcs[node] {
                let head = self.arcs[a].head;
                paths[head] = paths[head].saturating_add(paths[node]);
            }
        }
        paths[SINK]
    }

    /// Graphviz DOT text for inspection; arcs with flow are drawn bold.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph mmrp {\n  rankdir=LR;\n  s [shape=box];\n  t [shape=box];\n");
        let name = |node: usize| match node {
            SOURCE => "s".to_string(),
            SINK => "t".to_string(),
            n => {
                let pos = node_position(n).unwrap();
                let side = if n == in_node(pos) { "in" } else { "out" };
                format!("\"{}_{side}\"", self.ids[pos])
            }
        };
        for a in &self.arcs {
            let style = if a.flow > 0 { ", style=bold" } else { "" };
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{:.3}\"{style}];",
                name(a.tail),
                name(a.head),
                a.cost
            );
        }
        out.push_str("}\n");
        out
    }
}
