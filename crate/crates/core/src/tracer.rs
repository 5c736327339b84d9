//! Backward/forward tracking around newly confirmed infections.
//!
//! A confirmation at epoch `t` opens a search window covering the maximal
//! incubation length before `t`. Within that window's graphs we track
//! forward from infected people, collect candidates lying on directed paths
//! between two infected people, group the remaining E- and S-state people,
//! and extract the four interaction features per candidate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;

use crate::epidemic::{StateAssignment, StateLabel};
use crate::graph::EpochGraph;
use crate::ingest::PersonId;

/// Epoch range searched backward from a confirmation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchWindow {
    pub confirm_epoch: u32,
    pub start: u32,
    /// Inclusive; always strictly before `confirm_epoch`.
    pub end: u32,
    /// Set when the window was clamped at the start of the series.
    pub truncated: bool,
}

impl SearchWindow {
    /// Window epochs, oldest first. Empty for a confirmation at epoch 0.
    pub fn epochs(&self) -> impl Iterator<Item = u32> {
        let end = self.end.min(self.confirm_epoch.saturating_sub(1));
        let empty = self.confirm_epoch == 0;
        (self.start..=end).filter(move |_| !empty)
    }

    pub fn len(&self) -> usize {
        self.epochs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Compute the incubation search window `[t - n_max * epochs_per_day, t - 1]`
/// for a confirmation at epoch `t`. Windows reaching before the series start
/// are clamped to 0 and flagged as truncated.
pub fn backward_window(
    confirm_epoch: u32,
    incubation: &crate::epidemic::IncubationModel,
    epochs_per_day: u32,
) -> SearchWindow {
    let span = i64::from(incubation.window_days()) * i64::from(epochs_per_day);
    let raw_start = i64::from(confirm_epoch) - span;
    SearchWindow {
        confirm_epoch,
        start: raw_start.max(0) as u32,
        end: confirm_epoch.saturating_sub(1),
        truncated: raw_start < 0 || confirm_epoch == 0,
    }
}

/// Direction-respecting reachability from `sources` across the window's
/// graphs, annotated with the minimal layer; expansion stops at `max_layer`.
/// Sources are always present at layer 0.
pub fn forward_track(
    graphs: &[&EpochGraph],
    sources: &BTreeSet<PersonId>,
    max_layer: u32,
) -> BTreeMap<PersonId, u32> {
    let mut result: BTreeMap<PersonId, u32> = sources.iter().map(|&p| (p, 0)).collect();
    for graph in graphs {
        let dist = directed_layers(graph, sources, Direction::Forward, max_layer);
        for (idx, layer) in dist.into_iter().enumerate() {
            if layer == u32::MAX {
                continue;
            }
            let person = graph.nodes()[idx];
            result
                .entry(person)
                .and_modify(|l| *l = (*l).min(layer))
                .or_insert(layer);
        }
    }
    result
}

enum Direction {
    Forward,
    Backward,
}

/// Multi-source directed BFS within one graph; `u32::MAX` marks unreached.
fn directed_layers(
    graph: &EpochGraph,
    sources: &BTreeSet<PersonId>,
    direction: Direction,
    max_layer: u32,
) -> Vec<u32> {
    let mut dist = vec![u32::MAX; graph.node_count()];
    let mut queue = VecDeque::new();
    for &person in sources {
        if let Some(idx) = graph.node_index(person) {
            dist[idx] = 0;
            queue.push_back(idx);
        }
    }
    while let Some(u) = queue.pop_front() {
        if dist[u] == max_layer {
            continue;
        }
        let next: Vec<usize> = match direction {
            Direction::Forward => graph.successors(u).collect(),
            Direction::Backward => graph.predecessors(u).collect(),
        };
        for v in next {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Non-infected people lying on a direction-respecting path between two
/// distinct infected people within any one window graph, with total path
/// length at most `max_layer`.
pub fn path_candidates(
    graphs: &[&EpochGraph],
    infected: &BTreeSet<PersonId>,
    max_layer: u32,
) -> BTreeSet<PersonId> {
    let mut result = BTreeSet::new();
    for graph in graphs {
        let forward = directed_layers(graph, infected, Direction::Forward, max_layer);
        let backward = directed_layers(graph, infected, Direction::Backward, max_layer);
        for idx in 0..graph.node_count() {
            let person = graph.nodes()[idx];
            if infected.contains(&person) {
                continue;
            }
            let (f, b) = (forward[idx], backward[idx]);
            if f != u32::MAX && b != u32::MAX && f + b <= max_layer {
                // The graphs are acyclic, so the forward source and backward
                // target of a non-infected node are necessarily distinct.
                result.insert(person);
            }
        }
    }
    result
}

/// One priority group of screening candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateGroup {
    /// 1 = on-path, 2 = E-state, 3 = S-state.
    pub rank: u8,
    pub members: Vec<PersonId>,
}

/// Build the three candidate groups: on-path people first, then E-state
/// people not on a path, then S-state people. People in states I, H, R, Sq
/// and Eq are excluded everywhere; the groups are disjoint.
pub fn candidate_groups(
    graphs: &[&EpochGraph],
    states: &StateAssignment,
    infected: &BTreeSet<PersonId>,
    max_layer: u32,
) -> Vec<CandidateGroup> {
    let eligible = |p: PersonId| {
        matches!(
            states.state_of(p),
            Some(StateLabel::S) | Some(StateLabel::E)
        )
    };
    let on_path: BTreeSet<PersonId> = path_candidates(graphs, infected, max_layer)
        .into_iter()
        .filter(|&p| eligible(p))
        .collect();

    let mut exposed = Vec::new();
    let mut susceptible = Vec::new();
    for (person, label) in states.iter() {
        if on_path.contains(&person) {
            continue;
        }
        match label {
            StateLabel::E => exposed.push(person),
            StateLabel::S => susceptible.push(person),
            _ => {}
        }
    }

    vec![
        CandidateGroup {
            rank: 1,
            members: on_path.into_iter().collect(),
        },
        CandidateGroup {
            rank: 2,
            members: exposed,
        },
        CandidateGroup {
            rank: 3,
            members: susceptible,
        },
    ]
}

/// Whether neighborhood counts are exact or sampled under a budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountsMode {
    Exact,
    Sampled,
}

/// Feature-extraction knobs.
#[derive(Debug, Clone, Copy)]
pub struct FeatureConfig {
    pub max_layer: u32,
    /// Distance reported when a candidate has no infected contact.
    pub sentinel_distance: f64,
    pub mode: CountsMode,
    /// Node-visit budget per graph in sampled mode.
    pub budget: usize,
}

/// The four interaction features for one candidate, plus an optional
/// training label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Total contact seconds with I-state neighbors across the window.
    pub delta_time: f64,
    /// Minimum contact distance to an I-state neighbor; sentinel when none.
    pub delta_distance: f64,
    /// I-state people in layers 1..=max_layer, summed over window graphs.
    pub infected_around: f64,
    /// E-state people in layers 1..=max_layer, summed over window graphs.
    pub exposed_around: f64,
    pub label: Option<bool>,
    /// Set when the person appeared in no window graph.
    pub missing: bool,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.delta_time,
            self.delta_distance,
            self.infected_around,
            self.exposed_around,
        ]
    }
}

/// Extract the feature vector of one person over the window's graphs, using
/// the given state assignment for neighbor labels.
pub fn extract_features<R: Rng>(
    person: PersonId,
    graphs: &[&EpochGraph],
    states: &StateAssignment,
    config: &FeatureConfig,
    rng: &mut R,
) -> FeatureVector {
    let mut delta_time = 0.0f64;
    let mut delta_distance = f64::INFINITY;
    let mut infected_around = 0.0f64;
    let mut exposed_around = 0.0f64;
    let mut seen = false;

    for graph in graphs {
        let Some(idx) = graph.node_index(person) else {
            continue;
        };
        seen = true;
        for edge in graph.incident_edges(idx) {
            let other = if edge.src == person { edge.dst } else { edge.src };
            if states.state_of(other) == Some(StateLabel::I) {
                delta_time += edge.delta_time as f64;
                delta_distance = delta_distance.min(edge.delta_distance);
            }
        }
        match config.mode {
            CountsMode::Exact => {
                for counts in graph.neighborhood_counts(person, states, config.max_layer) {
                    infected_around += f64::from(counts.infected);
                    exposed_around += f64::from(counts.exposed);
                }
            }
            CountsMode::Sampled => {
                let sampled =
                    graph.sample_neighborhood(person, states, config.max_layer, config.budget, rng);
                for layer in sampled.layers {
                    infected_around += layer.infected;
                    exposed_around += layer.exposed;
                }
            }
        }
    }

    FeatureVector {
        delta_time,
        delta_distance: if delta_distance.is_finite() {
            delta_distance
        } else {
            config.sentinel_distance
        },
        infected_around,
        exposed_around,
        label: None,
        missing: !seen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::{IncubationModel, Population};
    use crate::graph::IdgEdge;
    use rand::Rng;

    /// Directed test edge.
    fn arrow(src: u64, dst: u64, dt: i64, dd: f64) -> IdgEdge {
        IdgEdge {
            src: PersonId(src),
            dst: PersonId(dst),
            delta_time: dt,
            delta_distance: dd,
        }
    }

    fn graph_of(arrows: &[(u64, u64)]) -> EpochGraph {
        let edges: Vec<_> = arrows.iter().map(|&(s, d)| arrow(s, d, 120, 2.0)).collect();
        EpochGraph::from_edges(edges, 0)
    }

    fn people(n: u64) -> Population {
        Population::new((0..n).map(PersonId).collect())
    }

    fn set(ids: &[u64]) -> BTreeSet<PersonId> {
        ids.iter().map(|&i| PersonId(i)).collect()
    }

    #[test]
    fn window_formula_matches_day_arithmetic() {
        // Day-granular epochs: t = 10, n_max = 7 gives [3, 9].
        let w = backward_window(10, &IncubationModel::uniform(5, 7), 1);
        assert_eq!((w.start, w.end, w.truncated), (3, 9, false));
    }

    #[test]
    fn window_point_mass_substitution() {
        let w = backward_window(10, &IncubationModel::point(5), 1);
        assert_eq!((w.start, w.end), (5, 9));
    }

    #[test]
    fn window_truncates_at_series_start() {
        let w = backward_window(3, &IncubationModel::uniform(5, 7), 1);
        assert_eq!((w.start, w.end), (0, 2));
        assert!(w.truncated);
    }

    #[test]
    fn window_end_is_strictly_before_confirmation() {
        let inc = IncubationModel::uniform(5, 7);
        for t in 1..40 {
            for epd in [1, 4, 12] {
                let w = backward_window(t, &inc, epd);
                assert!(w.end < w.confirm_epoch);
                assert!(w.start <= w.end);
                assert_eq!(w.epochs().count(), (w.end - w.start + 1) as usize);
            }
        }
        assert!(backward_window(0, &inc, 12).is_empty());
    }

    #[test]
    fn forward_track_isolated_source() {
        let g = graph_of(&[(1, 2)]);
        let tracked = forward_track(&[&g], &set(&[5]), 3);
        assert_eq!(tracked.len(), 1);
        assert_eq!(tracked[&PersonId(5)], 0);
    }

    #[test]
    fn forward_track_chain_layers() {
        let g = graph_of(&[(1, 2), (2, 3)]);
        let tracked = forward_track(&[&g], &set(&[1]), 2);
        assert_eq!(tracked[&PersonId(1)], 0);
        assert_eq!(tracked[&PersonId(2)], 1);
        assert_eq!(tracked[&PersonId(3)], 2);
    }

    #[test]
    fn forward_track_respects_direction_and_cap() {
        let g = graph_of(&[(1, 2), (2, 3), (3, 4), (9, 1)]);
        let tracked = forward_track(&[&g], &set(&[1]), 2);
        // 9 points at 1, not reachable forward; 4 is past the cap.
        assert!(!tracked.contains_key(&PersonId(9)));
        assert!(!tracked.contains_key(&PersonId(4)));
    }

    /// Matrix-power reachability oracle restricted to `max_layer`.
    fn matrix_power_oracle(
        graph: &EpochGraph,
        sources: &BTreeSet<PersonId>,
        max_layer: u32,
    ) -> BTreeMap<PersonId, u32> {
        let n = graph.node_count();
        let mut adjacency = vec![vec![false; n]; n];
        for e in graph.edges() {
            adjacency[graph.node_index(e.src).unwrap()][graph.node_index(e.dst).unwrap()] = true;
        }
        // reach[k][i][j]: path of length exactly k from i to j.
        let mut reach: Vec<Vec<Vec<bool>>> = Vec::new();
        let mut identity = vec![vec![false; n]; n];
        for (i, row) in identity.iter_mut().enumerate() {
            row[i] = true;
        }
        reach.push(identity);
        for _ in 0..max_layer {
            let prev = reach.last().unwrap();
            let mut next = vec![vec![false; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if prev[i][j] {
                        for (k, edge) in adjacency[j].iter().enumerate() {
                            if *edge {
                                next[i][k] = true;
                            }
                        }
                    }
                }
            }
            reach.push(next);
        }
        let mut out = BTreeMap::new();
        for &s in sources {
            out.insert(s, 0);
        }
        for v in 0..n {
            let person = graph.nodes()[v];
            'layers: for (k, matrix) in reach.iter().enumerate() {
                for &s in sources {
                    if let Some(si) = graph.node_index(s) {
                        if matrix[si][v] {
                            let layer = k as u32;
                            out.entry(person)
                                .and_modify(|l| *l = (*l).min(layer))
                                .or_insert(layer);
                            break 'layers;
                        }
                    }
                }
            }
        }
        out
    }

    /// Random DAG: edges oriented along a random node permutation.
    fn random_dag(rng: &mut impl Rng, people: u64, contacts: usize) -> EpochGraph {
        use rand::seq::SliceRandom;
        let mut priority: Vec<u64> = (0..people).collect();
        priority.shuffle(rng);
        let mut pairs = std::collections::BTreeSet::new();
        let mut edges = Vec::new();
        for _ in 0..contacts {
            let a = rng.random_range(0..people);
            let b = rng.random_range(0..people);
            if a == b {
                continue;
            }
            let (src, dst) = if priority[a as usize] < priority[b as usize] {
                (a, b)
            } else {
                (b, a)
            };
            if pairs.insert((src, dst)) {
                edges.push(arrow(src, dst, rng.random_range(1..900), rng.random_range(0.0..10.0)));
            }
        }
        EpochGraph::from_edges(edges, 0)
    }

    #[test]
    fn forward_track_matches_matrix_power_oracle() {
        let mut rng = crate::rng::stream_rng(41, "fwd-oracle");
        for _ in 0..10 {
            let g = random_dag(&mut rng, 30, 60);
            let sources: BTreeSet<PersonId> = g
                .nodes()
                .iter()
                .filter(|_| rng.random_bool(0.15))
                .copied()
                .collect();
            if sources.is_empty() {
                continue;
            }
            let got = forward_track(&[&g], &sources, 3);
            let want = matrix_power_oracle(&g, &sources, 3);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn forward_track_monotone_in_max_layer() {
        let mut rng = crate::rng::stream_rng(43, "fwd-mono");
        for _ in 0..10 {
            let g = random_dag(&mut rng, 40, 100);
            let sources = set(&[0, 1]);
            let small = forward_track(&[&g], &sources, 2);
            let large = forward_track(&[&g], &sources, 4);
            for (person, layer) in &small {
                assert!(large.contains_key(person));
                assert!(large[person] <= *layer);
            }
        }
    }

    #[test]
    fn path_between_two_infected() {
        let g = graph_of(&[(1, 10), (10, 2)]);
        let candidates = path_candidates(&[&g], &set(&[1, 2]), 3);
        assert_eq!(candidates, set(&[10]));
    }

    #[test]
    fn no_connecting_path_is_empty() {
        let g = graph_of(&[(1, 10), (2, 11)]);
        let candidates = path_candidates(&[&g], &set(&[1, 2]), 3);
        assert!(candidates.is_empty());
    }

    #[test]
    fn path_length_cap_applies() {
        // 1 -> a -> b -> c -> 2 needs 4 edges.
        let g = graph_of(&[(1, 10), (10, 11), (11, 12), (12, 2)]);
        assert!(path_candidates(&[&g], &set(&[1, 2]), 3).is_empty());
        assert_eq!(path_candidates(&[&g], &set(&[1, 2]), 4), set(&[10, 11, 12]));
    }

    /// Reachability-intersection oracle: per infected pair, forward-reach of
    /// one intersected with backward-reach of the other under the length cap.
    fn intersection_oracle(
        graph: &EpochGraph,
        infected: &BTreeSet<PersonId>,
        max_layer: u32,
    ) -> BTreeSet<PersonId> {
        let mut out = BTreeSet::new();
        for &a in infected {
            for &b in infected {
                if a == b {
                    continue;
                }
                let fwd =
                    directed_layers(graph, &BTreeSet::from([a]), Direction::Forward, max_layer);
                let bwd =
                    directed_layers(graph, &BTreeSet::from([b]), Direction::Backward, max_layer);
                for idx in 0..graph.node_count() {
                    let person = graph.nodes()[idx];
                    if infected.contains(&person) {
                        continue;
                    }
                    if fwd[idx] != u32::MAX
                        && bwd[idx] != u32::MAX
                        && fwd[idx] + bwd[idx] <= max_layer
                    {
                        out.insert(person);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn path_candidates_match_intersection_oracle() {
        let mut rng = crate::rng::stream_rng(47, "path-oracle");
        for _ in 0..20 {
            let g = random_dag(&mut rng, 40, 90);
            let infected: BTreeSet<PersonId> = g
                .nodes()
                .iter()
                .filter(|_| rng.random_bool(0.2))
                .copied()
                .collect();
            let got = path_candidates(&[&g], &infected, 3);
            let want = intersection_oracle(&g, &infected, 3);
            assert_eq!(got, want);
        }
    }

    fn assignment_with(population: &Population, labels: &[(u64, StateLabel)]) -> StateAssignment {
        let mut st = StateAssignment::uniform(population, 0, StateLabel::S);
        for &(p, label) in labels {
            st.set_state(PersonId(p), label);
        }
        st
    }

    #[test]
    fn all_susceptible_goes_to_group_three() {
        let g = graph_of(&[(1, 2), (2, 3)]);
        let population = people(5);
        let states = assignment_with(&population, &[]);
        let groups = candidate_groups(&[&g], &states, &BTreeSet::new(), 3);
        assert!(groups[0].members.is_empty());
        assert!(groups[1].members.is_empty());
        assert_eq!(groups[2].members.len(), 5);
    }

    #[test]
    fn on_path_exposed_person_stays_in_group_one() {
        let g = graph_of(&[(1, 10), (10, 2)]);
        let population = people(11);
        let states = assignment_with(
            &population,
            &[(1, StateLabel::I), (2, StateLabel::I), (10, StateLabel::E)],
        );
        let groups = candidate_groups(&[&g], &states, &set(&[1, 2]), 3);
        assert_eq!(groups[0].members, vec![PersonId(10)]);
        assert!(!groups[1].members.contains(&PersonId(10)));
    }

    #[test]
    fn quarantined_and_resolved_states_are_excluded() {
        let g = graph_of(&[(1, 10), (10, 2)]);
        let population = people(15);
        let states = assignment_with(
            &population,
            &[
                (1, StateLabel::I),
                (2, StateLabel::I),
                (10, StateLabel::Eq),
                (11, StateLabel::Sq),
                (12, StateLabel::H),
                (13, StateLabel::R),
                (14, StateLabel::E),
            ],
        );
        let groups = candidate_groups(&[&g], &states, &set(&[1, 2]), 3);
        // 10 is on the path but quarantined, so it is excluded everywhere.
        let all: Vec<PersonId> = groups.iter().flat_map(|g| g.members.clone()).collect();
        for excluded in [1, 2, 10, 11, 12, 13] {
            assert!(!all.contains(&PersonId(excluded)), "{excluded} leaked in");
        }
        assert_eq!(groups[1].members, vec![PersonId(14)]);
    }

    #[test]
    fn groups_match_definition_oracle_on_random_scenario() {
        let mut rng = crate::rng::stream_rng(53, "groups");
        let g = random_dag(&mut rng, 200, 500);
        let population = people(200);
        let mut labels = Vec::new();
        let mut infected = BTreeSet::new();
        for p in 0..200u64 {
            let r: f64 = rng.random();
            if r < 0.1 {
                labels.push((p, StateLabel::I));
                infected.insert(PersonId(p));
            } else if r < 0.25 {
                labels.push((p, StateLabel::E));
            } else if r < 0.3 {
                labels.push((p, StateLabel::Sq));
            }
        }
        let states = assignment_with(&population, &labels);
        let groups = candidate_groups(&[&g], &states, &infected, 3);

        // Independent recomputation straight from the definitions.
        let on_path = intersection_oracle(&g, &infected, 3);
        let mut want1 = BTreeSet::new();
        let mut want2 = BTreeSet::new();
        let mut want3 = BTreeSet::new();
        for (person, label) in states.iter() {
            let eligible = matches!(label, StateLabel::S | StateLabel::E);
            if on_path.contains(&person) && eligible {
                want1.insert(person);
            } else if label == StateLabel::E {
                want2.insert(person);
            } else if label == StateLabel::S {
                want3.insert(person);
            }
        }
        assert_eq!(groups[0].members, want1.into_iter().collect::<Vec<_>>());
        assert_eq!(groups[1].members, want2.into_iter().collect::<Vec<_>>());
        assert_eq!(groups[2].members, want3.into_iter().collect::<Vec<_>>());

        // Disjointness and exhaustiveness over eligible people.
        let mut seen = BTreeSet::new();
        for group in &groups {
            for member in &group.members {
                assert!(seen.insert(*member), "{member} appears twice");
            }
        }
        let eligible_count = states
            .iter()
            .filter(|(_, l)| matches!(l, StateLabel::S | StateLabel::E))
            .count();
        assert_eq!(seen.len(), eligible_count);
    }

    fn feature_config() -> FeatureConfig {
        FeatureConfig {
            max_layer: 3,
            sentinel_distance: 100.0,
            mode: CountsMode::Exact,
            budget: 0,
        }
    }

    #[test]
    fn isolated_person_gets_sentinel_vector() {
        let g = graph_of(&[(1, 2)]);
        let population = people(5);
        let states = assignment_with(&population, &[]);
        let mut rng = crate::rng::stream_rng(59, "fv");
        let fv = extract_features(PersonId(4), &[&g], &states, &feature_config(), &mut rng);
        assert_eq!(fv.as_array(), [0.0, 100.0, 0.0, 0.0]);
        assert!(fv.missing);
    }

    #[test]
    fn single_infected_neighbor_arithmetic() {
        let g = EpochGraph::from_edges(vec![arrow(1, 2, 120, 2.0)], 0);
        let population = people(3);
        let states = assignment_with(&population, &[(1, StateLabel::I)]);
        let mut rng = crate::rng::stream_rng(61, "fv2");
        let fv = extract_features(PersonId(2), &[&g], &states, &feature_config(), &mut rng);
        assert_eq!(fv.as_array(), [120.0, 2.0, 1.0, 0.0]);
        assert!(!fv.missing);
    }

    #[test]
    fn features_match_recount_oracle() {
        let mut rng = crate::rng::stream_rng(67, "fv-oracle");
        let g1 = random_dag(&mut rng, 300, 700);
        let g2 = random_dag(&mut rng, 300, 700);
        let population = people(300);
        let mut labels = Vec::new();
        for p in 0..300u64 {
            let r: f64 = rng.random();
            if r < 0.12 {
                labels.push((p, StateLabel::I));
            } else if r < 0.3 {
                labels.push((p, StateLabel::E));
            }
        }
        let states = assignment_with(&population, &labels);
        let graphs = [&g1, &g2];
        for probe in [0u64, 17, 99, 250] {
            let fv =
                extract_features(PersonId(probe), &graphs, &states, &feature_config(), &mut rng);

            // Recount by scanning raw edges and a fresh BFS per graph.
            let mut dt = 0.0;
            let mut dd = f64::INFINITY;
            let mut inf = 0.0;
            let mut exp = 0.0;
            for g in graphs {
                if g.node_index(PersonId(probe)).is_none() {
                    continue;
                }
                for e in g.edges() {
                    let other = if e.src == PersonId(probe) {
                        Some(e.dst)
                    } else if e.dst == PersonId(probe) {
                        Some(e.src)
                    } else {
                        None
                    };
                    if let Some(o) = other {
                        if states.state_of(o) == Some(StateLabel::I) {
                            dt += e.delta_time as f64;
                            dd = dd.min(e.delta_distance);
                        }
                    }
                }
                for c in g.neighborhood_counts(PersonId(probe), &states, 3) {
                    inf += f64::from(c.infected);
                    exp += f64::from(c.exposed);
                }
            }
            if !dd.is_finite() {
                dd = 100.0;
            }
            assert_eq!(fv.as_array(), [dt, dd, inf, exp]);
        }
    }

    #[test]
    fn sampled_mode_with_full_budget_equals_exact() {
        let mut rng = crate::rng::stream_rng(71, "fv-sampled");
        let g = random_dag(&mut rng, 80, 200);
        let population = people(80);
        let mut labels = Vec::new();
        for p in 0..80u64 {
            if rng.random_bool(0.2) {
                labels.push((p, StateLabel::I));
            }
        }
        let states = assignment_with(&population, &labels);
        let exact_cfg = feature_config();
        let sampled_cfg = FeatureConfig {
            mode: CountsMode::Sampled,
            budget: 80,
            ..exact_cfg
        };
        for probe in 0..20u64 {
            let exact = extract_features(PersonId(probe), &[&g], &states, &exact_cfg, &mut rng);
            let sampled = extract_features(PersonId(probe), &[&g], &states, &sampled_cfg, &mut rng);
            assert_eq!(exact.as_array(), sampled.as_array(), "probe {probe}");
        }
    }
}
