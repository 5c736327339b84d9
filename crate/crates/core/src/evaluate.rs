//! Screening evaluation: ranked testing curves against a layer-by-layer
//! contact-tracing baseline, and the screening-reduction metric.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::epidemic::{StateAssignment, StateLabel};
use crate::error::{Error, Result};
use crate::graph::EpochGraph;
use crate::ingest::PersonId;
use crate::learner::TreeEnsemble;
use crate::tracer::{CandidateGroup, FeatureVector};

/// One ranked screening candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub person: PersonId,
    pub group: u8,
    pub probability: f64,
}

/// Order all candidates group-major (1, 2, 3), probability-descending
/// within a group, ties broken by ascending person id.
pub fn rank_all(
    model: &TreeEnsemble,
    groups: &[CandidateGroup],
    features: &BTreeMap<PersonId, FeatureVector>,
) -> Vec<RankedCandidate> {
    let mut ranked = Vec::new();
    for group in groups {
        let mut scored: Vec<RankedCandidate> = group
            .members
            .iter()
            .map(|&person| {
                let fv = features
                    .get(&person)
                    .expect("every group member must have a feature vector");
                RankedCandidate {
                    person,
                    group: group.rank,
                    probability: model.predict(&fv.as_array()),
                }
            })
            .collect();
        scored.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then(a.person.cmp(&b.person))
        });
        ranked.extend(scored);
    }
    ranked
}

/// Cohort metadata attached to a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortDesc {
    /// Candidates in the ranking.
    pub population: usize,
    /// Hidden infected among them.
    pub hidden: usize,
    /// Fig-style ratio base unit (people per unit).
    pub ratio_base: usize,
    pub label: String,
}

/// Cumulative hidden-infected found as a function of people screened in
/// order. `found[k]` is the count after screening `k + 1` people; entries
/// are fractional for shuffle-averaged curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningCurve {
    pub found: Vec<f64>,
    pub cohort: CohortDesc,
}

impl ScreeningCurve {
    /// Tests needed until `found >= target * hidden`. `None` when the curve
    /// never reaches the target.
    pub fn tests_to_reach(&self, target: f64) -> Option<usize> {
        let threshold = target * self.cohort.hidden as f64 - 1e-9;
        if threshold <= 0.0 {
            return Some(0);
        }
        self.found.iter().position(|&f| f >= threshold).map(|k| k + 1)
    }

    pub fn total_found(&self) -> f64 {
        self.found.last().copied().unwrap_or(0.0)
    }
}

/// Walk a ranking and count cumulative hits against the hidden set.
pub fn screening_curve(
    ranked: &[PersonId],
    hidden: &HashSet<PersonId>,
    ratio_base: usize,
    label: &str,
) -> ScreeningCurve {
    let mut found = Vec::with_capacity(ranked.len());
    let mut hits = 0u64;
    for person in ranked {
        if hidden.contains(person) {
            hits += 1;
        }
        found.push(hits as f64);
    }
    ScreeningCurve {
        found,
        cohort: CohortDesc {
            population: ranked.len(),
            hidden: hidden.len(),
            ratio_base,
            label: label.to_string(),
        },
    }
}

/// Candidates (S- and E-state people) grouped into breadth-first layers
/// around the confirmed set; the final block holds unreachable candidates.
fn baseline_layers(
    graphs: &[&EpochGraph],
    confirmed: &BTreeSet<PersonId>,
    states: &StateAssignment,
) -> Vec<Vec<PersonId>> {
    let mut layer_of: BTreeMap<PersonId, u32> = BTreeMap::new();
    for graph in graphs {
        let mut dist = vec![u32::MAX; graph.node_count()];
        let mut queue = std::collections::VecDeque::new();
        for &person in confirmed {
            if let Some(idx) = graph.node_index(person) {
                dist[idx] = 0;
                queue.push_back(idx);
            }
        }
        while let Some(u) = queue.pop_front() {
            let neighbors: Vec<usize> = graph
                .successors(u)
                .chain(graph.predecessors(u))
                .collect();
            for v in neighbors {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (idx, &d) in dist.iter().enumerate() {
            if d != u32::MAX {
                let person = graph.nodes()[idx];
                layer_of
                    .entry(person)
                    .and_modify(|l| *l = (*l).min(d))
                    .or_insert(d);
            }
        }
    }

    let mut blocks: BTreeMap<u32, Vec<PersonId>> = BTreeMap::new();
    let mut unreachable = Vec::new();
    for (person, label) in states.iter() {
        if !matches!(label, StateLabel::S | StateLabel::E) {
            continue;
        }
        match layer_of.get(&person) {
            Some(&layer) if layer > 0 => blocks.entry(layer).or_default().push(person),
            Some(_) => {} // layer 0 would be a confirmed case itself
            None => unreachable.push(person),
        }
    }
    let mut result: Vec<Vec<PersonId>> = blocks.into_values().collect();
    result.push(unreachable);
    result
}

/// Plain contact tracing: test all layer-1 contacts of the confirmed cases
/// in random order, then layer-2, and so on until every candidate is listed.
pub fn baseline_contact_tracing<R: Rng>(
    graphs: &[&EpochGraph],
    confirmed: &BTreeSet<PersonId>,
    states: &StateAssignment,
    rng: &mut R,
) -> Vec<PersonId> {
    let mut order = Vec::new();
    for mut block in baseline_layers(graphs, confirmed, states) {
        block.shuffle(rng);
        order.extend(block);
    }
    order
}

/// Baseline curve averaged over within-layer orderings.
pub fn averaged_baseline_curve<R: Rng>(
    graphs: &[&EpochGraph],
    confirmed: &BTreeSet<PersonId>,
    states: &StateAssignment,
    hidden: &HashSet<PersonId>,
    shuffles: usize,
    ratio_base: usize,
    rng: &mut R,
) -> ScreeningCurve {
    let blocks = baseline_layers(graphs, confirmed, states);
    let total: usize = blocks.iter().map(Vec::len).sum();
    let mut hit_mass = vec![0.0f64; total];
    for _ in 0..shuffles {
        let mut offset = 0;
        for block in &blocks {
            let mut shuffled: Vec<&PersonId> = block.iter().collect();
            shuffled.shuffle(rng);
            for (i, person) in shuffled.iter().enumerate() {
                if hidden.contains(person) {
                    hit_mass[offset + i] += 1.0;
                }
            }
            offset += block.len();
        }
    }
    let mut found = Vec::with_capacity(total);
    let mut acc = 0.0;
    for mass in hit_mass {
        acc += mass / shuffles as f64;
        found.push(acc);
    }
    ScreeningCurve {
        found,
        cohort: CohortDesc {
            population: total,
            hidden: hidden.len(),
            ratio_base,
            label: "baseline".to_string(),
        },
    }
}

/// Fraction of baseline tests saved to reach `coverage_target` of the
/// hidden infected: `1 - tests_ranked / tests_baseline`.
pub fn screening_reduction(
    ranked: &ScreeningCurve,
    baseline: &ScreeningCurve,
    coverage_target: f64,
) -> Result<f64> {
    if !(coverage_target > 0.0 && coverage_target <= 1.0) {
        return Err(Error::Config(format!(
            "coverage target {coverage_target} outside (0, 1]"
        )));
    }
    if ranked.cohort.hidden != baseline.cohort.hidden {
        return Err(Error::Config(format!(
            "curves come from different cohorts: {} vs {} hidden",
            ranked.cohort.hidden, baseline.cohort.hidden
        )));
    }
    let tests_ranked = ranked.tests_to_reach(coverage_target).ok_or(
        Error::CoverageUnreachable {
            curve: "ranked",
            target: coverage_target,
        },
    )?;
    let tests_baseline = baseline.tests_to_reach(coverage_target).ok_or(
        Error::CoverageUnreachable {
            curve: "baseline",
            target: coverage_target,
        },
    )?;
    if tests_baseline == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - tests_ranked as f64 / tests_baseline as f64)
}
