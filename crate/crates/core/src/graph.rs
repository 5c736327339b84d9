//! Per-epoch individual directed graphs (IDGs).
//!
//! Nodes are people; a directed edge runs from the person who left a shared
//! place earlier to the one who left later, carrying total contact seconds
//! and the closest centroid distance. Direction comes from a per-epoch total
//! order on people (latest departure, ties by id), which makes every graph
//! acyclic by construction.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;

use crate::epidemic::{StateAssignment, StateLabel};
use crate::ingest::{CoLocationEvent, PersonId};

/// One directed contact edge.
#[derive(Debug, Clone, PartialEq)]
pub struct IdgEdge {
    pub src: PersonId,
    pub dst: PersonId,
    /// Total contact overlap, seconds.
    pub delta_time: i64,
    /// Closest centroid distance, meters.
    pub delta_distance: f64,
}

/// Exact per-layer counts of infected and exposed people.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerCounts {
    pub infected: u32,
    pub exposed: u32,
}

/// Per-layer estimate from budgeted sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEstimate {
    pub infected: f64,
    pub exposed: f64,
    /// Frontier size discovered from visited parents.
    pub discovered: usize,
    /// Nodes actually visited at this layer.
    pub sampled: usize,
    /// True when every earlier layer was fully visited, so `discovered`
    /// is the exact layer population.
    pub frontier_exact: bool,
}

impl LayerEstimate {
    pub fn coverage(&self) -> f64 {
        if self.discovered == 0 {
            1.0
        } else {
            self.sampled as f64 / self.discovered as f64
        }
    }
}

/// Result of [`EpochGraph::sample_neighborhood`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCounts {
    pub layers: Vec<LayerEstimate>,
    /// Total nodes visited beyond the start node; never exceeds the budget.
    pub visited: usize,
}

/// Reusable visitation stamps for breadth-first walks.
struct BfsScratch {
    marks: Vec<u64>,
    stamp: u64,
}

impl BfsScratch {
    fn begin(&mut self, nodes: usize) -> u64 {
        if self.marks.len() < nodes {
            self.marks.resize(nodes, 0);
        }
        self.stamp += 1;
        self.stamp
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<BfsScratch> = const {
        std::cell::RefCell::new(BfsScratch {
            marks: Vec::new(),
            stamp: 0,
        })
    };
}

/// Immutable per-epoch contact graph.
#[derive(Debug, Clone)]
pub struct EpochGraph {
    epoch: u32,
    nodes: Vec<PersonId>,
    index: HashMap<PersonId, usize>,
    edges: Vec<IdgEdge>,
    out: Vec<Vec<u32>>,
    inn: Vec<Vec<u32>>,
    // Node-index adjacency mirrors of `out`/`inn`; breadth-first walks stay
    // free of id lookups.
    out_nodes: Vec<Vec<u32>>,
    in_nodes: Vec<Vec<u32>>,
}

impl EpochGraph {
    /// Build the IDG for one epoch from its co-location events.
    ///
    /// Each person's departure key is their latest recorded leave time in the
    /// epoch (ties broken by smaller id as the earlier leaver); every
    /// contacting pair is oriented along that order. Parallel contacts merge
    /// into one edge with summed contact seconds and minimum distance.
    pub fn build(events: &[CoLocationEvent], epoch: u32) -> EpochGraph {
        let mut last_leave: BTreeMap<PersonId, i64> = BTreeMap::new();
        for e in events {
            let a = last_leave.entry(e.person_a).or_insert(i64::MIN);
            *a = (*a).max(e.leave_a);
            let b = last_leave.entry(e.person_b).or_insert(i64::MIN);
            *b = (*b).max(e.leave_b);
        }

        let nodes: Vec<PersonId> = last_leave.keys().copied().collect();
        let index: HashMap<PersonId, usize> =
            nodes.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let key = |p: PersonId| (last_leave[&p], p);

        let mut merged: BTreeMap<(usize, usize), (i64, f64)> = BTreeMap::new();
        for e in events {
            let (src, dst) = if key(e.person_a) < key(e.person_b) {
                (e.person_a, e.person_b)
            } else {
                (e.person_b, e.person_a)
            };
            let entry = merged
                .entry((index[&src], index[&dst]))
                .or_insert((0, f64::INFINITY));
            entry.0 += e.contact_seconds();
            entry.1 = entry.1.min(e.closest_distance);
        }

        let mut edges = Vec::with_capacity(merged.len());
        let mut out = vec![Vec::new(); nodes.len()];
        let mut inn = vec![Vec::new(); nodes.len()];
        let mut out_nodes = vec![Vec::new(); nodes.len()];
        let mut in_nodes = vec![Vec::new(); nodes.len()];
        for ((src_idx, dst_idx), (delta_time, delta_distance)) in merged {
            let edge_idx = edges.len() as u32;
            edges.push(IdgEdge {
                src: nodes[src_idx],
                dst: nodes[dst_idx],
                delta_time,
                delta_distance,
            });
            out[src_idx].push(edge_idx);
            inn[dst_idx].push(edge_idx);
            out_nodes[src_idx].push(dst_idx as u32);
            in_nodes[dst_idx].push(src_idx as u32);
        }

        EpochGraph {
            epoch,
            nodes,
            index,
            edges,
            out,
            inn,
            out_nodes,
            in_nodes,
        }
    }

    /// Rebuild a graph from already-merged edges (artifact round-trips).
    pub fn from_edges(edges: Vec<IdgEdge>, epoch: u32) -> EpochGraph {
        let mut node_set: BTreeMap<PersonId, ()> = BTreeMap::new();
        for e in &edges {
            node_set.insert(e.src, ());
            node_set.insert(e.dst, ());
        }
        let nodes: Vec<PersonId> = node_set.into_keys().collect();
        let index: HashMap<PersonId, usize> =
            nodes.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut out = vec![Vec::new(); nodes.len()];
        let mut inn = vec![Vec::new(); nodes.len()];
        let mut out_nodes = vec![Vec::new(); nodes.len()];
        let mut in_nodes = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            let (s, d) = (index[&e.src], index[&e.dst]);
            out[s].push(i as u32);
            inn[d].push(i as u32);
            out_nodes[s].push(d as u32);
            in_nodes[d].push(s as u32);
        }
        EpochGraph {
            epoch,
            nodes,
            index,
            edges,
            out,
            inn,
            out_nodes,
            in_nodes,
        }
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[PersonId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[IdgEdge] {
        &self.edges
    }

    pub fn contains(&self, person: PersonId) -> bool {
        self.index.contains_key(&person)
    }

    pub fn node_index(&self, person: PersonId) -> Option<usize> {
        self.index.get(&person).copied()
    }

    /// Out-edges of a node (transmission direction).
    pub fn out_edges(&self, idx: usize) -> impl Iterator<Item = &IdgEdge> {
        self.out[idx].iter().map(|&e| &self.edges[e as usize])
    }

    /// In-edges of a node.
    pub fn in_edges(&self, idx: usize) -> impl Iterator<Item = &IdgEdge> {
        self.inn[idx].iter().map(|&e| &self.edges[e as usize])
    }

    /// All edges incident to a node. At most one edge exists per pair, so no
    /// neighbor repeats between the two halves.
    pub fn incident_edges(&self, idx: usize) -> impl Iterator<Item = &IdgEdge> {
        self.out_edges(idx).chain(self.in_edges(idx))
    }

    fn undirected_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_nodes[idx]
            .iter()
            .chain(self.in_nodes[idx].iter())
            .map(|&n| n as usize)
    }

    /// Successor node indices along edge direction.
    pub fn successors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_nodes[idx].iter().map(|&n| n as usize)
    }

    /// Predecessor node indices against edge direction.
    pub fn predecessors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.in_nodes[idx].iter().map(|&n| n as usize)
    }

    /// Minimum number of edges between two nodes, ignoring edge direction.
    /// `Some(0)` iff `a == b`; `None` when unreachable or absent.
    pub fn layer_of(&self, a: PersonId, b: PersonId) -> Option<u32> {
        let (start, goal) = (self.node_index(a)?, self.node_index(b)?);
        if start == goal {
            return Some(0);
        }
        let mut dist = vec![u32::MAX; self.nodes.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in self.undirected_neighbors(u) {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    if v == goal {
                        return Some(dist[v]);
                    }
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Breadth-first distances (direction-agnostic) from one node, capped at
    /// `max_layer`. Returns `(node_index, layer)` pairs including the start.
    ///
    /// Visitation bookkeeping reuses a thread-local stamp buffer, so the
    /// cost scales with nodes actually reached rather than graph size.
    pub fn layers_from(&self, start: usize, max_layer: u32) -> Vec<(usize, u32)> {
        SCRATCH.with_borrow_mut(|scratch| {
            let stamp = scratch.begin(self.nodes.len());
            let mut order = vec![(start, 0u32)];
            scratch.marks[start] = stamp;
            let mut head = 0;
            while head < order.len() {
                let (u, layer) = order[head];
                head += 1;
                if layer == max_layer {
                    continue;
                }
                for v in self.undirected_neighbors(u) {
                    if scratch.marks[v] != stamp {
                        scratch.marks[v] = stamp;
                        order.push((v, layer + 1));
                    }
                }
            }
            order
        })
    }

    /// Exact counts of I- and E-state people in each layer `1..=max_layer`
    /// around `node`, each person counted once at their minimal layer.
    /// Absent nodes get all-zero counts.
    pub fn neighborhood_counts(
        &self,
        node: PersonId,
        states: &StateAssignment,
        max_layer: u32,
    ) -> Vec<LayerCounts> {
        let mut counts = vec![LayerCounts::default(); max_layer as usize];
        let Some(start) = self.node_index(node) else {
            return counts;
        };
        for (idx, layer) in self.layers_from(start, max_layer) {
            if layer == 0 {
                continue;
            }
            match states.state_of(self.nodes[idx]) {
                Some(StateLabel::I) => counts[layer as usize - 1].infected += 1,
                Some(StateLabel::E) => counts[layer as usize - 1].exposed += 1,
                _ => {}
            }
        }
        counts
    }

    /// Randomized no-repeat neighborhood sampling under a node-visit budget.
    ///
    /// Expands layer by layer, visiting up to `budget` nodes total, choosing
    /// uniformly at random without replacement among the unvisited frontier.
    /// Counts are scaled by `discovered / sampled` per layer; when the budget
    /// covers every reachable node the result equals
    /// [`EpochGraph::neighborhood_counts`] exactly.
    pub fn sample_neighborhood<R: Rng>(
        &self,
        node: PersonId,
        states: &StateAssignment,
        max_layer: u32,
        budget: usize,
        rng: &mut R,
    ) -> SampledCounts {
        let empty = |layers: usize| SampledCounts {
            layers: vec![
                LayerEstimate {
                    infected: 0.0,
                    exposed: 0.0,
                    discovered: 0,
                    sampled: 0,
                    frontier_exact: true,
                };
                layers
            ],
            visited: 0,
        };
        let Some(start) = self.node_index(node) else {
            return empty(max_layer as usize);
        };

        let mut visited = vec![false; self.nodes.len()];
        visited[start] = true;
        let mut marked = vec![false; self.nodes.len()];
        let mut budget_left = budget;
        let mut total_visited = 0usize;
        let mut frontier_exact = true;
        let mut prev_layer = vec![start];
        let mut layers = Vec::with_capacity(max_layer as usize);

        for _ in 0..max_layer {
            let mut discovered = Vec::new();
            for &u in &prev_layer {
                for v in self.undirected_neighbors(u) {
                    if !visited[v] && !marked[v] {
                        marked[v] = true;
                        discovered.push(v);
                    }
                }
            }
            for &v in &discovered {
                marked[v] = false;
            }

            let k = budget_left.min(discovered.len());
            let mut infected = 0u32;
            let mut exposed = 0u32;
            let mut chosen = Vec::with_capacity(k);
            if k > 0 {
                for di in rand::seq::index::sample(rng, discovered.len(), k) {
                    let v = discovered[di];
                    chosen.push(v);
                    visited[v] = true;
                    match states.state_of(self.nodes[v]) {
                        Some(StateLabel::I) => infected += 1,
                        Some(StateLabel::E) => exposed += 1,
                        _ => {}
                    }
                }
            }
            let scale = if k == 0 {
                0.0
            } else {
                discovered.len() as f64 / k as f64
            };
            layers.push(LayerEstimate {
                infected: f64::from(infected) * scale,
                exposed: f64::from(exposed) * scale,
                discovered: discovered.len(),
                sampled: k,
                frontier_exact,
            });
            budget_left -= k;
            total_visited += k;
            frontier_exact = frontier_exact && k == discovered.len();
            prev_layer = chosen;
        }

        SampledCounts {
            layers,
            visited: total_visited,
        }
    }

    /// Kahn-style topological order of node indices; `None` if a cycle
    /// exists. Construction guarantees `Some` for built graphs.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree: Vec<usize> = self.inn.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for v in self.successors(u) {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }
}
