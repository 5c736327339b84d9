//! The `ctrace` command line: seeded, reproducible pipeline runs driven by a
//! flat key=value config file. Every subcommand echoes the effective config
//! and writes its artifacts under the output directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use ctrace_core::artifacts::{self, CurveExport};
use ctrace_core::pipeline;
use ctrace_core::rng::stream_rng;
use ctrace_core::synth;
use ctrace_core::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "ctrace",
    about = "Contact-graph epidemic simulation and asymptomatic-carrier ranking",
    version
)]
pub struct Cli {
    /// Flat key=value config file; defaults apply for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the run seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories, contact graphs and the contagion process.
    Simulate,
    /// Replay confirmations through the continuous-learning ranker.
    Rank {
        /// Confirmation events CSV (`epoch,person_id`); defaults to the
        /// simulate artifact.
        #[arg(long)]
        confirm: Option<PathBuf>,
    },
    /// Score rankings against the contact-tracing baseline.
    Eval,
    /// Export the last-known-location probability heatmap.
    ExportHeatmap,
    /// Generate a synthetic city trajectory file.
    GenCity,
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn echo_config(config: &RunConfig, out: &Path) -> anyhow::Result<()> {
    print!("{}", config.echo());
    artifacts::write_effective_config(&out.join(artifacts::CONFIG_FILE), config)?;
    Ok(())
}

/// Run one parsed invocation. Returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    let out = &cli.out;

    match cli.command {
        Command::Simulate => {
            echo_config(&config, out)?;
            let sim = pipeline::simulate(&config)?;
            artifacts::write_aggregates_csv(&out.join(artifacts::AGGREGATES_FILE), &sim.aggregates)?;
            artifacts::write_assignments_csv(&out.join(artifacts::ASSIGNMENTS_FILE), &sim.assignments)?;
            artifacts::write_graphs_csv(&out.join(artifacts::GRAPHS_FILE), &sim.graphs)?;
            artifacts::write_confirmations_csv(
                &out.join(artifacts::CONFIRMATIONS_FILE),
                &sim.confirmations,
            )?;
            artifacts::write_positions_csv(&out.join(artifacts::POSITIONS_FILE), &sim.last_positions)?;
            let edges: usize = sim.graphs.iter().map(|g| g.edges().len()).sum();
            println!(
                "simulated {} people over {} epochs: {} contact edges, {} confirmations",
                sim.population.len(),
                sim.graphs.len(),
                edges,
                sim.confirmations.len()
            );
            Ok(())
        }
        Command::Rank { confirm } => {
            echo_config(&config, out)?;
            let sim = reload_simulation(&config, out)?;
            let confirm_path = confirm
                .or_else(|| config.confirmations_path())
                .unwrap_or_else(|| out.join(artifacts::CONFIRMATIONS_FILE));
            artifacts::require(&confirm_path)?;
            let confirmations = artifacts::read_confirmations_csv(&confirm_path)?;
            let rank = pipeline::rank_replay(&config, &sim, &confirmations)?;
            artifacts::write_ranking_csv(&out.join(artifacts::RANKING_FILE), &rank.ranking_rows)?;
            artifacts::write_training_csv(&out.join(artifacts::TRAINING_FILE), &rank.training_rows)?;
            artifacts::write_model_json(&out.join(artifacts::MODEL_FILE), rank.learner.model())?;
            println!(
                "ranked {} batches, {} training rows, model with {} trees",
                rank.batches.len(),
                rank.training_rows.len(),
                rank.learner.model().trees.len()
            );
            if let Some(report) = rank.learner.report() {
                println!("latest training report: AUC {:.4}", report.auc);
            }
            Ok(())
        }
        Command::Eval => {
            echo_config(&config, out)?;
            for artifact in [artifacts::RANKING_FILE, artifacts::MODEL_FILE] {
                artifacts::require(&out.join(artifact))?;
            }
            let sim = reload_simulation(&config, out)?;
            let confirm_path = config
                .confirmations_path()
                .unwrap_or_else(|| out.join(artifacts::CONFIRMATIONS_FILE));
            artifacts::require(&confirm_path)?;
            let confirmations = artifacts::read_confirmations_csv(&confirm_path)?;
            let rank = pipeline::rank_replay(&config, &sim, &confirmations)?;
            let eval = pipeline::evaluate_run(&config, &sim, &rank)?;
            artifacts::write_train_report_json(&out.join(artifacts::TRAIN_REPORT_FILE), &eval.report)?;
            let exports: Vec<CurveExport<'_>> = eval
                .curves
                .iter()
                .map(|(method, curve)| CurveExport {
                    curve,
                    method,
                    seed: config.seed,
                })
                .collect();
            artifacts::write_curves_csv(&out.join(artifacts::CURVES_FILE), &exports)?;
            artifacts::write_heatmap_csv(&out.join(artifacts::HEATMAP_FILE), &eval.heatmap)?;
            println!(
                "test AUC {:.4}, feature importance {:?}",
                eval.report.auc, eval.report.feature_importance
            );
            for (target, reduction) in &eval.reductions {
                println!(
                    "screening reduction at coverage {:.2}: {:.1}%",
                    target,
                    reduction * 100.0
                );
            }
            Ok(())
        }
        Command::ExportHeatmap => {
            echo_config(&config, out)?;
            for artifact in [artifacts::RANKING_FILE, artifacts::MODEL_FILE] {
                artifacts::require(&out.join(artifact))?;
            }
            let sim = reload_simulation(&config, out)?;
            let confirm_path = config
                .confirmations_path()
                .unwrap_or_else(|| out.join(artifacts::CONFIRMATIONS_FILE));
            artifacts::require(&confirm_path)?;
            let confirmations = artifacts::read_confirmations_csv(&confirm_path)?;
            let rank = pipeline::rank_replay(&config, &sim, &confirmations)?;
            let eval = pipeline::evaluate_run(&config, &sim, &rank)?;
            artifacts::write_heatmap_csv(&out.join(artifacts::HEATMAP_FILE), &eval.heatmap)?;
            println!("wrote {} heatmap rows", eval.heatmap.len());
            Ok(())
        }
        Command::GenCity => {
            echo_config(&config, out)?;
            let params = config.city_params();
            let mut rng = stream_rng(config.seed, "city");
            let set = synth::generate_city(&params, &mut rng);
            let path = out.join(artifacts::TRAJECTORIES_FILE);
            artifacts::write_trajectories_csv(&path, &set)?;
            println!(
                "wrote {} people of trajectory data to {}",
                set.person_count(),
                path.display()
            );
            Ok(())
        }
    }
}

/// Rebuild the simulate stage for dependent commands. Artifact files gate
/// the command; the stage itself is recomputed deterministically from the
/// config, which is cheaper than re-parsing multi-million-row dumps and
/// guarantees the exact in-memory structures.
fn reload_simulation(
    config: &RunConfig,
    out: &Path,
) -> anyhow::Result<pipeline::SimulationArtifacts> {
    for artifact in [
        artifacts::CONFIG_FILE,
        artifacts::AGGREGATES_FILE,
        artifacts::ASSIGNMENTS_FILE,
        artifacts::GRAPHS_FILE,
    ] {
        artifacts::require(&out.join(artifact))?;
    }
    let stored = std::fs::read_to_string(out.join(artifacts::CONFIG_FILE))?;
    if stored != config.echo() {
        bail!(
            "config mismatch: {} was produced with a different effective config; \
             rerun simulate or pass the original config",
            out.join(artifacts::CONFIG_FILE).display()
        );
    }
    Ok(pipeline::simulate(config)?)
}
