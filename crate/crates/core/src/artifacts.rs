//! Artifact file formats.
//!
//! Everything a run writes or reads back lives here: CSV dumps for graphs,
//! assignments, aggregates, confirmations, rankings, training rows, curves
//! and the heatmap, plus the versioned model JSON. Writers format floats
//! with the shortest round-trip representation, so identical runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::epidemic::{AggregateSeries, Counts, Population, StateAssignment, StateLabel};
use crate::error::{Error, Result};
use crate::evaluate::ScreeningCurve;
use crate::graph::{EpochGraph, IdgEdge};
use crate::ingest::{PersonId, TrajectorySet};
use crate::learner::{TrainReport, TreeEnsemble, MODEL_FORMAT_VERSION};

pub const CONFIG_FILE: &str = "effective_config.txt";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const GRAPHS_FILE: &str = "graphs.csv";
pub const CONFIRMATIONS_FILE: &str = "confirmations.csv";
pub const POSITIONS_FILE: &str = "positions.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const RANKING_FILE: &str = "ranking.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    ))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Require an artifact file to exist before a dependent stage runs.
pub fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

pub fn write_effective_config(path: &Path, config: &RunConfig) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "{}", config.echo()).map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(w, path)
}

pub fn write_trajectories_csv(path: &Path, set: &TrajectorySet) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "person_id,timestamp,x,y").map_err(io_err)?;
    for (person, pings) in set.iter() {
        for ping in pings {
            writeln!(w, "{},{},{},{}", person, ping.timestamp, ping.x, ping.y).map_err(io_err)?;
        }
    }
    finish(w, path)
}

pub fn write_aggregates_csv(path: &Path, series: &AggregateSeries) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "epoch,S,Sq,E,Eq,I,H,R").map_err(io_err)?;
    for (epoch, c) in series.epochs.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            epoch, c.s, c.sq, c.e, c.eq, c.i, c.h, c.r
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

pub fn read_aggregates_csv(path: &Path) -> Result<AggregateSeries> {
    let mut reader = csv_reader(path)?;
    let mut epochs = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let get = |i: usize| -> Result<u32> {
            record
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_error(path, &record, "invalid count"))
        };
        let epoch: usize = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid epoch"))?;
        if epoch != idx {
            return Err(parse_error(path, &record, "epochs must be consecutive from 0"));
        }
        epochs.push(Counts::new(
            get(1)?,
            get(2)?,
            get(3)?,
            get(4)?,
            get(5)?,
            get(6)?,
            get(7)?,
        ));
    }
    Ok(AggregateSeries { epochs })
}

pub fn write_assignments_csv(path: &Path, assignments: &[StateAssignment]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "epoch,person_id,state").map_err(io_err)?;
    for assignment in assignments {
        for (person, label) in assignment.iter() {
            writeln!(w, "{},{},{}", assignment.epoch(), person, label).map_err(io_err)?;
        }
    }
    finish(w, path)
}

/// Rebuild the per-epoch assignments (and the roster) from a dump.
pub fn read_assignments_csv(path: &Path) -> Result<(Population, Vec<StateAssignment>)> {
    let mut reader = csv_reader(path)?;
    let mut rows: Vec<(u32, PersonId, StateLabel)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let epoch: u32 = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid epoch"))?;
        let person: u64 = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid person_id"))?;
        let state: StateLabel = record
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid state"))?;
        rows.push((epoch, PersonId(person), state));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!(
            "assignment dump {} is empty",
            path.display()
        )));
    }
    let roster: Vec<PersonId> = rows
        .iter()
        .filter(|(e, _, _)| *e == 0)
        .map(|(_, p, _)| *p)
        .collect();
    let population = Population::new(roster);
    let max_epoch = rows.iter().map(|(e, _, _)| *e).max().unwrap();
    let mut assignments: Vec<StateAssignment> = (0..=max_epoch)
        .map(|e| StateAssignment::uniform(&population, e, StateLabel::S))
        .collect();
    for (epoch, person, state) in rows {
        assignments[epoch as usize].set_state(person, state);
    }
    Ok((population, assignments))
}

pub fn write_graphs_csv(path: &Path, graphs: &[EpochGraph]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "epoch,src,dst,delta_time,delta_distance").map_err(io_err)?;
    for graph in graphs {
        for edge in graph.edges() {
            writeln!(
                w,
                "{},{},{},{},{}",
                graph.epoch(),
                edge.src,
                edge.dst,
                edge.delta_time,
                edge.delta_distance
            )
            .map_err(io_err)?;
        }
    }
    finish(w, path)
}

/// Rebuild per-epoch graphs; epochs with no rows become empty graphs.
pub fn read_graphs_csv(path: &Path, total_epochs: u32) -> Result<Vec<EpochGraph>> {
    let mut reader = csv_reader(path)?;
    let mut edges_by_epoch: BTreeMap<u32, Vec<IdgEdge>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let epoch: u32 = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid epoch"))?;
        let src: u64 = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid src"))?;
        let dst: u64 = record
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid dst"))?;
        let delta_time: i64 = record
            .get(3)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid delta_time"))?;
        let delta_distance: f64 = record
            .get(4)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid delta_distance"))?;
        edges_by_epoch.entry(epoch).or_default().push(IdgEdge {
            src: PersonId(src),
            dst: PersonId(dst),
            delta_time,
            delta_distance,
        });
    }
    Ok((0..total_epochs)
        .map(|epoch| EpochGraph::from_edges(edges_by_epoch.remove(&epoch).unwrap_or_default(), epoch))
        .collect())
}

pub fn write_confirmations_csv(path: &Path, confirmations: &[(u32, PersonId)]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "epoch,person_id").map_err(io_err)?;
    for (epoch, person) in confirmations {
        writeln!(w, "{epoch},{person}").map_err(io_err)?;
    }
    finish(w, path)
}

pub fn read_confirmations_csv(path: &Path) -> Result<Vec<(u32, PersonId)>> {
    let mut reader = csv_reader(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let epoch: u32 = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid epoch"))?;
        let person: u64 = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid person_id"))?;
        out.push((epoch, PersonId(person)));
    }
    Ok(out)
}

pub fn write_positions_csv(path: &Path, positions: &BTreeMap<PersonId, (f64, f64)>) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "person_id,x,y").map_err(io_err)?;
    for (person, (x, y)) in positions {
        writeln!(w, "{person},{x},{y}").map_err(io_err)?;
    }
    finish(w, path)
}

pub fn read_positions_csv(path: &Path) -> Result<BTreeMap<PersonId, (f64, f64)>> {
    let mut reader = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let person: u64 = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid person_id"))?;
        let x: f64 = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid x"))?;
        let y: f64 = record
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_error(path, &record, "invalid y"))?;
        out.insert(PersonId(person), (x, y));
    }
    Ok(out)
}

/// One row of the ranked output.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub epoch: u32,
    pub rank: usize,
    pub person: PersonId,
    pub group: u8,
    pub probability: f64,
}

pub fn write_ranking_csv(path: &Path, rows: &[RankingRow]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "epoch,rank,person_id,group,probability").map_err(io_err)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.epoch, row.rank, row.person, row.group, row.probability
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

/// One labeled training example as exported.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub person: PersonId,
    pub epoch: u32,
    pub features: [f64; 4],
    pub label: bool,
}

pub fn write_training_csv(path: &Path, rows: &[TrainingRow]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(
        w,
        "person_id,epoch,delta_time,delta_distance,infected_around,exposed_around,label"
    )
    .map_err(io_err)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.person,
            row.epoch,
            row.features[0],
            row.features[1],
            row.features[2],
            row.features[3],
            u8::from(row.label)
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

pub fn write_model_json(path: &Path, model: &TreeEnsemble) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, model)
        .map_err(|e| Error::Config(format!("model serialization failed: {e}")))?;
    w.write_all(b"\n")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(w, path)
}

pub fn read_model_json(path: &Path) -> Result<TreeEnsemble> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let model: TreeEnsemble = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::Config(format!("model parse failed for {}: {e}", path.display())))?;
    if model.version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model format version {} unsupported (expected {MODEL_FORMAT_VERSION})",
            model.version
        )));
    }
    Ok(model)
}

pub fn write_train_report_json(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    w.write_all(b"\n")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(w, path)
}

/// A labeled curve ready for export.
pub struct CurveExport<'a> {
    pub curve: &'a ScreeningCurve,
    pub method: &'a str,
    pub seed: u64,
}

pub fn write_curves_csv(path: &Path, curves: &[CurveExport<'_>]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "screened,found,method,seed,cohort").map_err(io_err)?;
    for export in curves {
        for (k, found) in export.curve.found.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k + 1,
                found,
                export.method,
                export.seed,
                export.curve.cohort.label
            )
            .map_err(io_err)?;
        }
    }
    finish(w, path)
}

/// One heatmap row: last known location, carrier probability and state.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub person: PersonId,
    pub x: f64,
    pub y: f64,
    pub probability: f64,
    pub state: StateLabel,
}

pub fn write_heatmap_csv(path: &Path, rows: &[HeatmapRow]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "person_id,x,y,probability,state").map_err(io_err)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.person, row.x, row.y, row.probability, row.state
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: e.position().map_or(0, csv::Position::line),
        message: e.to_string(),
    }
}

fn parse_error(path: &Path, record: &csv::StringRecord, message: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: record.position().map_or(0, csv::Position::line),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::{CompartmentalRates, IncubationModel};

    #[test]
    fn aggregates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        let mut rng = crate::rng::stream_rng(1, "artifacts");
        let series = crate::epidemic::generate_aggregates(
            &CompartmentalRates::default(),
            crate::epidemic::proportional_initial_counts(500),
            20,
            &mut rng,
        );
        write_aggregates_csv(&path, &series).unwrap();
        let back = read_aggregates_csv(&path).unwrap();
        assert_eq!(series, back);
    }

    #[test]
    fn assignments_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assign.csv");
        let population = Population::new((0..50).map(PersonId).collect());
        let graph = EpochGraph::from_edges(Vec::new(), 0);
        let mut rng = crate::rng::stream_rng(2, "artifacts");
        let initial = crate::epidemic::proportional_initial_counts(50);
        let a0 = crate::epidemic::init_population(
            &population,
            &initial,
            &graph,
            &IncubationModel::uniform(5, 7),
            12,
            &mut rng,
        )
        .unwrap();
        write_assignments_csv(&path, std::slice::from_ref(&a0)).unwrap();
        let (pop_back, back) = read_assignments_csv(&path).unwrap();
        assert_eq!(pop_back.len(), 50);
        assert_eq!(back.len(), 1);
        for (person, label) in a0.iter() {
            assert_eq!(back[0].state_of(person), Some(label));
        }
    }

    #[test]
    fn graphs_round_trip_with_empty_epochs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graphs.csv");
        let g1 = EpochGraph::from_edges(
            vec![
                IdgEdge {
                    src: PersonId(1),
                    dst: PersonId(2),
                    delta_time: 120,
                    delta_distance: 1.25,
                },
                IdgEdge {
                    src: PersonId(2),
                    dst: PersonId(3),
                    delta_time: 60,
                    delta_distance: 3.5,
                },
            ],
            1,
        );
        write_graphs_csv(&path, &[g1.clone()]).unwrap();
        let back = read_graphs_csv(&path, 3).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].edges().len(), 0);
        assert_eq!(back[1].edges(), g1.edges());
        assert_eq!(back[2].edges().len(), 0);
    }

    #[test]
    fn model_file_round_trips_and_checks_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = TreeEnsemble::empty(0.1);
        write_model_json(&path, &model).unwrap();
        let back = read_model_json(&path).unwrap();
        assert_eq!(model, back);

        let mut wrong = model.clone();
        wrong.version = 999;
        write_model_json(&path, &wrong).unwrap();
        assert!(read_model_json(&path).is_err());
    }

    #[test]
    fn missing_artifact_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope.csv");
        match require(&path).unwrap_err() {
            Error::MissingArtifact(p) => assert_eq!(p, path),
            other => panic!("unexpected {other}"),
        }
    }
}
