//! End-to-end orchestration: simulate the city and contagion process, replay
//! confirmations through the continuous-learning ranker, and score the
//! resulting screening order against the contact-tracing baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;

use crate::artifacts::{HeatmapRow, RankingRow, TrainingRow};
use crate::config::{InitialCounts, PositiveClass, RunConfig};
use crate::epidemic::{
    generate_aggregates, init_population, proportional_initial_counts, step_individualize,
    AggregateSeries, CompartmentalRates, Counts, Population, StateAssignment, StateLabel,
};
use crate::error::{Error, Result};
use crate::evaluate::{
    averaged_baseline_curve, rank_all, screening_curve, screening_reduction, RankedCandidate,
    ScreeningCurve,
};
use crate::graph::EpochGraph;
use crate::ingest::{co_locations, detect_stays, load_trajectories, IngestConfig, PersonId, Stay, TimeInterval};
use crate::learner::{ContinuousLearner, TrainReport, TrainRow};
use crate::rng::stream_rng;
use crate::synth::{cohort_communities, cohort_epoch_events, CityParams, CohortParams};
use crate::tracer::{backward_window, candidate_groups, extract_features, CandidateGroup, FeatureVector, SearchWindow};

/// Everything the simulate stage produces.
#[derive(Debug, Clone)]
pub struct SimulationArtifacts {
    pub population: Population,
    pub graphs: Vec<EpochGraph>,
    pub aggregates: AggregateSeries,
    pub assignments: Vec<StateAssignment>,
    /// First-confirmation events in epoch order (epoch-0 infected included).
    pub confirmations: Vec<(u32, PersonId)>,
    pub last_positions: BTreeMap<PersonId, (f64, f64)>,
}

/// Build per-epoch contact graphs from stays.
pub fn build_epoch_graphs(
    stays: &[Stay],
    config: &RunConfig,
) -> Vec<EpochGraph> {
    let total = config.total_epochs();
    (0..total)
        .map(|epoch| {
            let interval = TimeInterval::new(
                i64::from(epoch) * config.epoch_seconds,
                (i64::from(epoch) + 1) * config.epoch_seconds,
            );
            let events = co_locations(
                stays,
                interval,
                config.distance_threshold,
                config.lingering_window,
            );
            EpochGraph::build(&events, epoch)
        })
        .collect()
}

fn resolve_initial_counts(config: &RunConfig, population: &Population) -> Result<Counts> {
    match config.initial_counts {
        InitialCounts::Proportional => Ok(proportional_initial_counts(population.len() as u32)),
        InitialCounts::Explicit(counts) => {
            if counts.sum() != population.len() as u64 {
                return Err(Error::Config(format!(
                    "initial_counts sum to {}, population is {}",
                    counts.sum(),
                    population.len()
                )));
            }
            Ok(counts)
        }
    }
}

/// Drive the individualized process across every epoch.
fn run_contagion<R: Rng>(
    config: &RunConfig,
    population: &Population,
    graphs: &[EpochGraph],
    aggregates: &AggregateSeries,
    rng: &mut R,
) -> Result<(Vec<StateAssignment>, Vec<(u32, PersonId)>)> {
    let incubation = config.incubation();
    let thresholds = config.thresholds();
    let epd = config.epochs_per_day();
    let window = config.contact_window_epochs.max(1) as usize;

    let initial = resolve_initial_counts(config, population)?;
    let mut assignment =
        init_population(population, &initial, &graphs[0], &incubation, epd, rng)?;

    let mut confirmations: Vec<(u32, PersonId)> = assignment
        .people_in(StateLabel::I)
        .into_iter()
        .map(|p| (0, p))
        .collect();
    let mut assignments = vec![assignment.clone()];

    for epoch in 1..config.total_epochs() {
        let start = (epoch as usize).saturating_sub(window - 1);
        let recent: Vec<&EpochGraph> = graphs[start..=epoch as usize].iter().collect();
        let target = &aggregates.epochs[epoch as usize];
        let next = step_individualize(
            &assignment,
            target,
            &recent,
            &incubation,
            thresholds,
            epd,
            rng,
        )?;
        for (person, label) in next.iter() {
            if label == StateLabel::I && assignment.state_of(person) != Some(StateLabel::I) {
                confirmations.push((epoch, person));
            }
        }
        assignments.push(next.clone());
        assignment = next;
    }
    Ok((assignments, confirmations))
}

/// Run the simulate stage: trajectories (file or synthetic city), stays,
/// per-epoch graphs, aggregate series (file or driver) and the
/// individualized state sequence.
pub fn simulate(config: &RunConfig) -> Result<SimulationArtifacts> {
    config.validate()?;

    let (stays, last_positions, population) = match config.trajectories_path() {
        Some(path) => {
            let ingest = IngestConfig {
                cell_size: config.cell_size,
                min_dwell: config.min_dwell,
                distance_threshold: config.distance_threshold,
                lingering_window: config.lingering_window,
                latlon: config.latlon,
            };
            let set = load_trajectories(&path, &ingest)?;
            let stays = detect_stays(&set, config.cell_size, config.min_dwell);
            let positions = set.last_positions();
            let population = Population::new(set.people().collect());
            (stays, positions, population)
        }
        None => {
            let params: CityParams = config.city_params();
            let mut rng = stream_rng(config.seed, "city");
            crate::synth::generate_city_stays(&params, config.min_dwell, &mut rng)
        }
    };
    if population.is_empty() {
        return Err(Error::Config("simulation needs a non-empty population".into()));
    }

    let graphs = build_epoch_graphs(&stays, config);

    let aggregates = match config.aggregates_path() {
        Some(path) => {
            let series = crate::artifacts::read_aggregates_csv(&path)?;
            if series.len() < config.total_epochs() as usize {
                return Err(Error::Config(format!(
                    "aggregate series has {} epochs, run needs {}",
                    series.len(),
                    config.total_epochs()
                )));
            }
            series.validate_conservation(population.len() as u64)?;
            series
        }
        None => {
            let initial = resolve_initial_counts(config, &population)?;
            let mut rng = stream_rng(config.seed, "aggregates");
            generate_aggregates(&config.rates, initial, config.total_epochs(), &mut rng)
        }
    };

    let mut rng = stream_rng(config.seed, "epidemic");
    let (assignments, confirmations) =
        run_contagion(config, &population, &graphs, &aggregates, &mut rng)?;

    Ok(SimulationArtifacts {
        population,
        graphs,
        aggregates,
        assignments,
        confirmations,
        last_positions,
    })
}

/// One confirmation batch replayed through the ranker.
#[derive(Debug, Clone)]
pub struct RankedBatch {
    pub epoch: u32,
    pub window: SearchWindow,
    pub new_confirmations: Vec<PersonId>,
    pub confirmed: BTreeSet<PersonId>,
    pub groups: Vec<CandidateGroup>,
    pub features: BTreeMap<PersonId, FeatureVector>,
    pub ranking: Vec<RankedCandidate>,
    /// Ground truth available (label horizon fits inside the series).
    pub labeled: bool,
    /// Positive-labeled candidates: the hidden infected to find.
    pub hidden: BTreeSet<PersonId>,
}

/// Everything the rank stage produces.
pub struct RankArtifacts {
    pub batches: Vec<RankedBatch>,
    pub learner: ContinuousLearner,
    pub training_rows: Vec<TrainingRow>,
    pub ranking_rows: Vec<RankingRow>,
}

/// First epoch each person entered a state, from the assignment sequence.
fn first_transition(assignments: &[StateAssignment], label: StateLabel) -> BTreeMap<PersonId, u32> {
    let mut first = BTreeMap::new();
    for assignment in assignments {
        for (person, state) in assignment.iter() {
            if state == label {
                first.entry(person).or_insert(assignment.epoch());
            }
        }
    }
    first
}

fn positive_label(
    config: &RunConfig,
    person: PersonId,
    batch_epoch: u32,
    horizon_end: u32,
    states: &StateAssignment,
    first_i: &BTreeMap<PersonId, u32>,
    first_e: &BTreeMap<PersonId, u32>,
) -> bool {
    let became_i = first_i
        .get(&person)
        .is_some_and(|&e| e > batch_epoch && e <= horizon_end);
    match config.positive_class {
        PositiveClass::IOnly => became_i,
        PositiveClass::IOrE => {
            became_i
                || states.state_of(person) == Some(StateLabel::E)
                || first_e
                    .get(&person)
                    .is_some_and(|&e| e > batch_epoch && e <= horizon_end)
        }
    }
}

/// Replay confirmation events in epoch order: per batch, compute the
/// backward window, group candidates, extract features, update the learner
/// on labeled examples, and emit the ranked screening list.
pub fn rank_replay(
    config: &RunConfig,
    sim: &SimulationArtifacts,
    confirmations: &[(u32, PersonId)],
) -> Result<RankArtifacts> {
    let mut learner = ContinuousLearner::new(
        config.gbdt,
        config.update_policy,
        config.split_ratio,
        config.seed,
    );
    let mut rng = stream_rng(config.seed, "rank");
    let incubation = config.incubation();
    let epd = config.epochs_per_day();
    let horizon = config.label_horizon_days * epd;
    let last_epoch = config.total_epochs() - 1;
    let feature_config = config.feature_config();

    let first_i = first_transition(&sim.assignments, StateLabel::I);
    let first_e = first_transition(&sim.assignments, StateLabel::E);

    let mut batches = Vec::new();
    let mut training_rows = Vec::new();
    let mut ranking_rows = Vec::new();
    let mut confirmed: BTreeSet<PersonId> = BTreeSet::new();
    let mut cursor = 0usize;
    let mut previous_batch_epoch = 0u32;

    let mut batch_epoch = config.batch_interval_epochs;
    while batch_epoch <= last_epoch {
        let mut new_confirmations = Vec::new();
        while cursor < confirmations.len() && confirmations[cursor].0 <= batch_epoch {
            confirmed.insert(confirmations[cursor].1);
            new_confirmations.push(confirmations[cursor].1);
            cursor += 1;
        }
        if new_confirmations.is_empty() {
            previous_batch_epoch = batch_epoch;
            batch_epoch += config.batch_interval_epochs;
            continue;
        }
        let _ = previous_batch_epoch;

        let window = backward_window(batch_epoch, &incubation, epd);
        if window.is_empty() {
            previous_batch_epoch = batch_epoch;
            batch_epoch += config.batch_interval_epochs;
            continue;
        }
        let window_graphs: Vec<&EpochGraph> = window
            .epochs()
            .map(|e| &sim.graphs[e as usize])
            .collect();
        let states = &sim.assignments[batch_epoch as usize];

        let groups = candidate_groups(&window_graphs, states, &confirmed, config.max_layer);
        let mut features: BTreeMap<PersonId, FeatureVector> = BTreeMap::new();
        for group in &groups {
            for &person in &group.members {
                let fv = extract_features(person, &window_graphs, states, &feature_config, &mut rng);
                features.insert(person, fv);
            }
        }

        let labeled = batch_epoch + horizon <= last_epoch;
        let mut hidden = BTreeSet::new();
        if labeled {
            let horizon_end = batch_epoch + horizon;
            let mut rows: Vec<(PersonId, TrainRow)> = Vec::new();
            for (&person, fv) in &features {
                let label = positive_label(
                    config,
                    person,
                    batch_epoch,
                    horizon_end,
                    states,
                    &first_i,
                    &first_e,
                );
                if label {
                    hidden.insert(person);
                }
                rows.push((
                    person,
                    TrainRow {
                        features: fv.as_array(),
                        label,
                    },
                ));
            }
            // All positives plus a bounded uniform sample of negatives.
            let (positives, negatives): (Vec<_>, Vec<_>) =
                rows.into_iter().partition(|(_, r)| r.label);
            let keep_negatives = if negatives.len() > config.max_negatives_per_batch {
                rand::seq::index::sample(&mut rng, negatives.len(), config.max_negatives_per_batch)
                    .into_iter()
                    .map(|i| negatives[i].clone())
                    .collect()
            } else {
                negatives
            };
            let mut batch_rows: Vec<(PersonId, TrainRow)> = positives;
            batch_rows.extend(keep_negatives);
            batch_rows.sort_by_key(|(p, _)| *p);
            for (person, row) in &batch_rows {
                training_rows.push(TrainingRow {
                    person: *person,
                    epoch: batch_epoch,
                    features: row.features,
                    label: row.label,
                });
            }
            let plain: Vec<TrainRow> = batch_rows.into_iter().map(|(_, r)| r).collect();
            learner.update(&plain)?;
        }

        let ranking = rank_all(learner.model(), &groups, &features);
        for (position, candidate) in ranking.iter().enumerate() {
            ranking_rows.push(RankingRow {
                epoch: batch_epoch,
                rank: position + 1,
                person: candidate.person,
                group: candidate.group,
                probability: candidate.probability,
            });
        }

        batches.push(RankedBatch {
            epoch: batch_epoch,
            window,
            new_confirmations,
            confirmed: confirmed.clone(),
            groups,
            features,
            ranking,
            labeled,
            hidden,
        });
        previous_batch_epoch = batch_epoch;
        batch_epoch += config.batch_interval_epochs;
    }

    Ok(RankArtifacts {
        batches,
        learner,
        training_rows,
        ranking_rows,
    })
}

/// Everything the eval stage produces.
pub struct EvalArtifacts {
    pub report: TrainReport,
    /// `(method, curve)` pairs for export.
    pub curves: Vec<(String, ScreeningCurve)>,
    /// `(coverage_target, reduction)` pairs.
    pub reductions: Vec<(f64, f64)>,
    pub heatmap: Vec<HeatmapRow>,
}

/// Score the final labeled ranking against the averaged contact-tracing
/// baseline and assemble the report and heatmap.
pub fn evaluate_run(
    config: &RunConfig,
    sim: &SimulationArtifacts,
    rank: &RankArtifacts,
) -> Result<EvalArtifacts> {
    let report = rank.learner.report().cloned().ok_or_else(|| {
        Error::Train(format!(
            "no trainable batches: labels stayed single-class across epochs 0..{}",
            config.total_epochs() - 1
        ))
    })?;

    let batch = rank
        .batches
        .iter()
        .rev()
        .find(|b| b.labeled && !b.hidden.is_empty())
        .ok_or_else(|| {
            Error::Train(format!(
                "no labeled batch with hidden infected across epochs 0..{}",
                config.total_epochs() - 1
            ))
        })?;

    let ranked_people: Vec<PersonId> = batch.ranking.iter().map(|r| r.person).collect();
    let hidden: HashSet<PersonId> = batch.hidden.iter().copied().collect();
    let ranked_curve = screening_curve(&ranked_people, &hidden, 500, "ranked");

    let window_graphs: Vec<&EpochGraph> = batch
        .window
        .epochs()
        .map(|e| &sim.graphs[e as usize])
        .collect();
    let states = &sim.assignments[batch.epoch as usize];
    let mut rng = stream_rng(config.seed, "eval");
    let baseline = averaged_baseline_curve(
        &window_graphs,
        &batch.confirmed,
        states,
        &hidden,
        config.baseline_shuffles,
        500,
        &mut rng,
    );

    let mut targets = vec![config.coverage_target, 0.95, 0.9];
    targets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut reductions = Vec::new();
    for target in targets {
        let reduction = screening_reduction(&ranked_curve, &baseline, target)?;
        reductions.push((target, reduction));
    }

    let mut heatmap = Vec::new();
    for candidate in &batch.ranking {
        if let Some(&(x, y)) = sim.last_positions.get(&candidate.person) {
            heatmap.push(HeatmapRow {
                person: candidate.person,
                x,
                y,
                probability: candidate.probability,
                state: states.state_of(candidate.person).unwrap_or(StateLabel::S),
            });
        }
    }

    Ok(EvalArtifacts {
        report,
        curves: vec![
            ("ranked".to_string(), ranked_curve),
            ("baseline".to_string(), baseline),
        ],
        reductions,
        heatmap,
    })
}

/// Outcome of one cohort screening comparison.
#[derive(Debug, Clone)]
pub struct CohortOutcome {
    pub candidates: usize,
    pub hidden: usize,
    /// Ranked tests over baseline tests at full coverage.
    pub full_coverage_ratio: f64,
    pub reduction: f64,
    /// Fraction of screened counts where the ranked curve is at or above
    /// the averaged baseline.
    pub dominance_fraction: f64,
    pub auc: Option<f64>,
}

/// Run one screening-comparison cohort end to end: synthesize community
/// contact graphs, drive the contagion process, train on early confirmation
/// batches, rank at the evaluation epoch, and compare against the averaged
/// contact-tracing baseline.
pub fn run_cohort(params: &CohortParams, config: &RunConfig, seed: u64) -> Result<CohortOutcome> {
    let epd = params.epochs_per_day;
    let total_epochs = params.total_epochs();
    let horizon_days = config.label_horizon_days;
    let horizon = horizon_days * epd;
    assert!(
        params.days > horizon_days + 2,
        "cohort needs room for training and the label horizon"
    );

    let mut graph_rng = stream_rng(seed, "cohort-graphs");
    let communities = cohort_communities(params, &mut graph_rng);
    let graphs: Vec<EpochGraph> = (0..total_epochs)
        .map(|epoch| {
            let events = cohort_epoch_events(params, &communities, epoch, &mut graph_rng);
            EpochGraph::build(&events, epoch)
        })
        .collect();

    let population = Population::new(
        (0..params.population_size()).map(|i| PersonId(u64::from(i))).collect(),
    );

    // Driver rates scaled for the cohort epoch length.
    let n = population.len() as f64;
    let rates = CompartmentalRates {
        beta: 0.12 * n / (n - f64::from(params.confirmed)).max(1.0),
        eq_fraction: 0.05,
        sq_rate: 0.0,
        sq_release: 0.0,
        sigma: 1.0 / (6.0 * f64::from(epd)),
        eq_hosp: 0.02,
        i_hosp: 0.002,
        i_recov: 0.002,
        h_recov: 0.01,
    };
    let initial = Counts::new(
        params.population_size() - params.confirmed - params.confirmed / 2,
        0,
        params.confirmed / 2,
        0,
        params.confirmed,
        0,
        0,
    );
    let incubation = config.incubation();
    let thresholds = config.thresholds();

    let mut epi_rng = stream_rng(seed, "cohort-epidemic");
    let aggregates = generate_aggregates(&rates, initial, total_epochs, &mut epi_rng);
    let mut assignment = init_population(
        &population,
        &initial,
        &graphs[0],
        &incubation,
        epd,
        &mut epi_rng,
    )?;
    let mut assignments = vec![assignment.clone()];
    let window = epd as usize;
    for epoch in 1..total_epochs {
        let start = (epoch as usize).saturating_sub(window - 1);
        let recent: Vec<&EpochGraph> = graphs[start..=epoch as usize].iter().collect();
        assignment = step_individualize(
            &assignment,
            &aggregates.epochs[epoch as usize],
            &recent,
            &incubation,
            thresholds,
            epd,
            &mut epi_rng,
        )?;
        assignments.push(assignment.clone());
    }

    let first_i = first_transition(&assignments, StateLabel::I);
    let first_e = first_transition(&assignments, StateLabel::E);
    let feature_config = config.feature_config();
    let eval_epoch = (params.days - horizon_days - 1) * epd;

    // Train on daily batches before the evaluation epoch, sampling a
    // bounded candidate set per batch.
    let mut learner = ContinuousLearner::new(
        config.gbdt,
        config.update_policy,
        config.split_ratio,
        seed,
    );
    let mut rng = stream_rng(seed, "cohort-train");
    let mut train_epoch = 2 * epd;
    while train_epoch < eval_epoch {
        let window = backward_window(train_epoch, &incubation, epd);
        let window_graphs: Vec<&EpochGraph> =
            window.epochs().map(|e| &graphs[e as usize]).collect();
        let states = &assignments[train_epoch as usize];
        let horizon_end = train_epoch + horizon;

        let exposed = states.people_in(StateLabel::E);
        let susceptible = states.people_in(StateLabel::S);
        let sample_size = config.max_negatives_per_batch.min(susceptible.len());
        let mut sampled: Vec<PersonId> = exposed;
        sampled.extend(
            rand::seq::index::sample(&mut rng, susceptible.len(), sample_size)
                .into_iter()
                .map(|i| susceptible[i]),
        );
        sampled.sort_unstable();

        let mut rows = Vec::with_capacity(sampled.len());
        for person in sampled {
            let fv = extract_features(person, &window_graphs, states, &feature_config, &mut rng);
            let label = positive_label(
                config,
                person,
                train_epoch,
                horizon_end,
                states,
                &first_i,
                &first_e,
            );
            rows.push(TrainRow {
                features: fv.as_array(),
                label,
            });
        }
        learner.update(&rows)?;
        train_epoch += epd;
    }

    // Full ranking at the evaluation epoch.
    let window = backward_window(eval_epoch, &incubation, epd);
    let window_graphs: Vec<&EpochGraph> = window.epochs().map(|e| &graphs[e as usize]).collect();
    let states = &assignments[eval_epoch as usize];
    let confirmed: BTreeSet<PersonId> = first_i
        .iter()
        .filter(|(_, &e)| e <= eval_epoch)
        .map(|(&p, _)| p)
        .collect();
    let groups = candidate_groups(&window_graphs, states, &confirmed, config.max_layer);
    let horizon_end = eval_epoch + horizon;
    let mut features = BTreeMap::new();
    let mut hidden = HashSet::new();
    for group in &groups {
        for &person in &group.members {
            let fv = extract_features(person, &window_graphs, states, &feature_config, &mut rng);
            features.insert(person, fv);
            if positive_label(config, person, eval_epoch, horizon_end, states, &first_i, &first_e) {
                hidden.insert(person);
            }
        }
    }
    if hidden.is_empty() {
        return Err(Error::Config("cohort produced no hidden infected".into()));
    }

    let ranking = rank_all(learner.model(), &groups, &features);
    let ranked_people: Vec<PersonId> = ranking.iter().map(|r| r.person).collect();
    let ranked_curve = screening_curve(&ranked_people, &hidden, params.ratio_base as usize, "cohort");

    let mut eval_rng = stream_rng(seed, "cohort-eval");
    let baseline = averaged_baseline_curve(
        &window_graphs,
        &confirmed,
        states,
        &hidden,
        config.baseline_shuffles,
        params.ratio_base as usize,
        &mut eval_rng,
    );

    let tests_ranked = ranked_curve
        .tests_to_reach(1.0)
        .ok_or(Error::CoverageUnreachable { curve: "ranked", target: 1.0 })?;
    let tests_baseline = baseline
        .tests_to_reach(1.0)
        .ok_or(Error::CoverageUnreachable { curve: "baseline", target: 1.0 })?;
    let reduction = screening_reduction(&ranked_curve, &baseline, 1.0)?;

    let points = ranked_curve.found.len().min(baseline.found.len());
    let dominated = (0..points)
        .filter(|&k| ranked_curve.found[k] >= baseline.found[k] - 1e-9)
        .count();

    Ok(CohortOutcome {
        candidates: ranked_people.len(),
        hidden: hidden.len(),
        full_coverage_ratio: tests_ranked as f64 / tests_baseline as f64,
        reduction,
        dominance_fraction: dominated as f64 / points.max(1) as f64,
        auc: learner.report().map(|r| r.auc),
    })
}
