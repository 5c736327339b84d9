//! Trajectory ingestion: load pings, detect stays at grid cells, and join
//! stays into pairwise co-location events that seed contact-graph edges.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque person identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonId(pub u64);

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One timestamped position sample, planar meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ping {
    pub person: PersonId,
    /// Seconds since epoch start.
    pub timestamp: i64,
    pub x: f64,
    pub y: f64,
}

/// Discrete grid cell keyed by floor-divided coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub i64, pub i64);

impl CellId {
    pub fn of(x: f64, y: f64, cell_size: f64) -> CellId {
        CellId((x / cell_size).floor() as i64, (y / cell_size).floor() as i64)
    }
}

/// A detected dwell interval of one person at one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Stay {
    pub person: PersonId,
    pub cell: CellId,
    pub enter_time: i64,
    pub leave_time: i64,
    pub centroid_x: f64,
    pub centroid_y: f64,
}

impl Stay {
    pub fn duration(&self) -> i64 {
        self.leave_time - self.enter_time
    }
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeInterval {
    pub start: i64,
    pub end: i64,
}

impl TimeInterval {
    pub fn new(start: i64, end: i64) -> TimeInterval {
        TimeInterval { start, end }
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }
}

/// How two stays touched: a strictly positive time overlap, or a
/// same-place succession within the lingering window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactKind {
    Overlap,
    Lingering,
}

/// A pairwise co-location of two people at one cell.
///
/// `person_a < person_b` canonically. For `Overlap` contacts the overlap
/// interval is the intersection of the two stays clipped to the epoch; for
/// `Lingering` contacts it encodes the gap between the earlier leave and the
/// later enter, and contributes zero contact time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoLocationEvent {
    pub person_a: PersonId,
    pub person_b: PersonId,
    pub cell: CellId,
    pub overlap_start: i64,
    pub overlap_end: i64,
    pub closest_distance: f64,
    pub leave_a: i64,
    pub leave_b: i64,
    pub kind: ContactKind,
}

impl CoLocationEvent {
    /// Contact seconds contributed to an edge.
    pub fn contact_seconds(&self) -> i64 {
        match self.kind {
            ContactKind::Overlap => self.overlap_end - self.overlap_start,
            ContactKind::Lingering => 0,
        }
    }
}

/// Per-person ping sequences, sorted by timestamp.
#[derive(Debug, Clone, Default)]
pub struct TrajectorySet {
    by_person: BTreeMap<PersonId, Vec<Ping>>,
}

impl TrajectorySet {
    pub fn new() -> TrajectorySet {
        TrajectorySet::default()
    }

    /// Insert raw pings; ordering and dedup are applied by `normalize`.
    pub fn push(&mut self, ping: Ping) {
        self.by_person.entry(ping.person).or_default().push(ping);
    }

    /// Sort each person's pings by timestamp and drop duplicate
    /// `(person, timestamp)` samples, keeping the first occurrence.
    pub fn normalize(&mut self) {
        for pings in self.by_person.values_mut() {
            pings.sort_by_key(|p| p.timestamp);
            pings.dedup_by_key(|p| p.timestamp);
        }
    }

    pub fn person_count(&self) -> usize {
        self.by_person.len()
    }

    pub fn people(&self) -> impl Iterator<Item = PersonId> + '_ {
        self.by_person.keys().copied()
    }

    pub fn pings(&self, person: PersonId) -> Option<&[Ping]> {
        self.by_person.get(&person).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PersonId, &[Ping])> {
        self.by_person.iter().map(|(p, v)| (*p, v.as_slice()))
    }

    /// Last recorded position per person (for the heatmap export).
    pub fn last_positions(&self) -> BTreeMap<PersonId, (f64, f64)> {
        self.by_person
            .iter()
            .filter_map(|(p, v)| v.last().map(|ping| (*p, (ping.x, ping.y))))
            .collect()
    }
}

/// Ingest thresholds. All distances in meters, times in seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub cell_size: f64,
    pub min_dwell: i64,
    pub distance_threshold: f64,
    /// Maximum gap for same-place-successive contacts; 0 disables them.
    pub lingering_window: i64,
    /// Interpret input coordinates as `(lon, lat)` degrees and project them
    /// to planar meters around the first row's position.
    pub latlon: bool,
}

impl Default for IngestConfig {
    fn default() -> IngestConfig {
        IngestConfig {
            cell_size: 10.0,
            min_dwell: 300,
            distance_threshold: 10.0,
            lingering_window: 0,
            latlon: false,
        }
    }
}

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Equirectangular projection of `(lon, lat)` degrees to planar meters
/// relative to a reference point.
pub fn project_equirectangular(lon: f64, lat: f64, ref_lon: f64, ref_lat: f64) -> (f64, f64) {
    let x = (lon - ref_lon).to_radians() * ref_lat.to_radians().cos() * EARTH_RADIUS_M;
    let y = (lat - ref_lat).to_radians() * EARTH_RADIUS_M;
    (x, y)
}

/// Load a trajectory CSV with header `person_id,timestamp,x,y`.
///
/// Rows are grouped by person and sorted by timestamp; duplicate
/// `(person, timestamp)` rows keep the first occurrence. An empty file is an
/// empty set, not an error. Malformed rows report their line number.
pub fn load_trajectories(path: &Path, config: &IngestConfig) -> Result<TrajectorySet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_trajectories_from(file, &path.display().to_string(), config)
}

/// Same as [`load_trajectories`] but reading from any source.
pub fn load_trajectories_from<R: Read>(
    reader: R,
    source_name: &str,
    config: &IngestConfig,
) -> Result<TrajectorySet> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let parse_err = |line: u64, message: String| Error::Parse {
        path: source_name.to_string(),
        line,
        message,
    };

    let mut set = TrajectorySet::new();
    let mut reference: Option<(f64, f64)> = None;
    for record in csv_reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", record.len())));
        }
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let person: u64 = field(0)
            .parse()
            .map_err(|e| parse_err(line, format!("person_id: {e}")))?;
        let timestamp: i64 = field(1)
            .parse()
            .map_err(|e| parse_err(line, format!("timestamp: {e}")))?;
        let mut x: f64 = field(2)
            .parse()
            .map_err(|e| parse_err(line, format!("x: {e}")))?;
        let mut y: f64 = field(3)
            .parse()
            .map_err(|e| parse_err(line, format!("y: {e}")))?;
        if config.latlon {
            let (ref_lon, ref_lat) = *reference.get_or_insert((x, y));
            let (px, py) = project_equirectangular(x, y, ref_lon, ref_lat);
            x = px;
            y = py;
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(line, "non-finite coordinate".to_string()));
        }
        set.push(Ping {
            person: PersonId(person),
            timestamp,
            x,
            y,
        });
    }
    set.normalize();
    Ok(set)
}

/// Detect stays: maximal runs of consecutive same-cell pings per person with
/// duration at least `min_dwell`. The centroid is the mean of run
/// coordinates. Output is ordered by `(person, enter_time)`.
pub fn detect_stays(trajectories: &TrajectorySet, cell_size: f64, min_dwell: i64) -> Vec<Stay> {
    let mut stays = Vec::new();
    for (person, pings) in trajectories.iter() {
        detect_stays_for(person, pings, cell_size, min_dwell, &mut stays);
    }
    stays
}

/// Stay detection for one person's sorted pings; appends to `out`.
pub fn detect_stays_for(
    person: PersonId,
    pings: &[Ping],
    cell_size: f64,
    min_dwell: i64,
    out: &mut Vec<Stay>,
) {
    let mut run_start = 0usize;
    let mut run_cell: Option<CellId> = None;
    let flush = |start: usize, end: usize, cell: CellId, out: &mut Vec<Stay>| {
        let first = &pings[start];
        let last = &pings[end - 1];
        if last.timestamp - first.timestamp >= min_dwell {
            let n = (end - start) as f64;
            let (sx, sy) = pings[start..end]
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            out.push(Stay {
                person,
                cell,
                enter_time: first.timestamp,
                leave_time: last.timestamp,
                centroid_x: sx / n,
                centroid_y: sy / n,
            });
        }
    };
    for (i, ping) in pings.iter().enumerate() {
        let cell = CellId::of(ping.x, ping.y, cell_size);
        match run_cell {
            Some(current) if current == cell => {}
            Some(current) => {
                flush(run_start, i, current, out);
                run_start = i;
                run_cell = Some(cell);
            }
            None => {
                run_start = i;
                run_cell = Some(cell);
            }
        }
    }
    if let Some(cell) = run_cell {
        flush(run_start, pings.len(), cell, out);
    }
}

/// Join stays into co-location events for one epoch.
///
/// Two stays in the same cell produce an `Overlap` event when the
/// intersection of their intervals and the epoch has positive length, and the
/// centroid distance is within `distance_threshold`. When
/// `lingering_window > 0`, stays separated by a gap of at most that many
/// seconds produce a `Lingering` event with zero contact time. Output is
/// sorted by `(person_a, person_b, overlap_start, overlap_end, cell)`.
pub fn co_locations(
    stays: &[Stay],
    epoch: TimeInterval,
    distance_threshold: f64,
    lingering_window: i64,
) -> Vec<CoLocationEvent> {
    let mut by_cell: HashMap<CellId, Vec<&Stay>> = HashMap::new();
    for stay in stays {
        // Only stays that touch the epoch can produce an event in it.
        if stay.leave_time + lingering_window.max(0) < epoch.start || stay.enter_time >= epoch.end {
            continue;
        }
        by_cell.entry(stay.cell).or_default().push(stay);
    }

    let mut events = Vec::new();
    for cell_stays in by_cell.values_mut() {
        cell_stays.sort_by_key(|s| (s.enter_time, s.leave_time, s.person));
        for i in 0..cell_stays.len() {
            let a = cell_stays[i];
            for b in cell_stays[i + 1..].iter() {
                // Sorted by enter time: once b starts past a's reach, stop.
                if b.enter_time > a.leave_time + lingering_window.max(0) {
                    break;
                }
                if a.person == b.person {
                    continue;
                }
                if let Some(event) = pair_event(a, b, epoch, distance_threshold, lingering_window) {
                    events.push(event);
                }
            }
        }
    }
    events.sort_by(|l, r| {
        (l.person_a, l.person_b, l.overlap_start, l.overlap_end, l.cell).cmp(&(
            r.person_a,
            r.person_b,
            r.overlap_start,
            r.overlap_end,
            r.cell,
        ))
    });
    events
}

fn pair_event(
    a: &Stay,
    b: &Stay,
    epoch: TimeInterval,
    distance_threshold: f64,
    lingering_window: i64,
) -> Option<CoLocationEvent> {
    debug_assert_eq!(a.cell, b.cell);
    let distance = ((a.centroid_x - b.centroid_x).powi(2) + (a.centroid_y - b.centroid_y).powi(2)).sqrt();
    if distance > distance_threshold {
        return None;
    }

    let raw_start = a.enter_time.max(b.enter_time);
    let raw_end = a.leave_time.min(b.leave_time);

    let (kind, start, end) = if raw_end > raw_start {
        // Clip the stay intersection to the epoch.
        let start = raw_start.max(epoch.start);
        let end = raw_end.min(epoch.end);
        if end <= start {
            return None;
        }
        (ContactKind::Overlap, start, end)
    } else if lingering_window > 0 {
        // Successive occupation of the same cell: gap from the earlier
        // leaver to the later arriver.
        let (gap_start, gap_end) = if a.leave_time <= b.enter_time {
            (a.leave_time, b.enter_time)
        } else {
            (b.leave_time, a.enter_time)
        };
        let gap = gap_end - gap_start;
        if gap < 0 || gap > lingering_window {
            return None;
        }
        if gap_end < epoch.start || gap_start >= epoch.end {
            return None;
        }
        (ContactKind::Lingering, gap_start, gap_end)
    } else {
        return None;
    };

    let (first, second) = if a.person < b.person { (a, b) } else { (b, a) };
    Some(CoLocationEvent {
        person_a: first.person,
        person_b: second.person,
        cell: a.cell,
        overlap_start: start,
        overlap_end: end,
        closest_distance: distance,
        leave_a: first.leave_time,
        leave_b: second.leave_time,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ping(person: u64, t: i64, x: f64, y: f64) -> Ping {
        Ping {
            person: PersonId(person),
            timestamp: t,
            x,
            y,
        }
    }

    fn stay(person: u64, cell: (i64, i64), enter: i64, leave: i64, cx: f64, cy: f64) -> Stay {
        Stay {
            person: PersonId(person),
            cell: CellId(cell.0, cell.1),
            enter_time: enter,
            leave_time: leave,
            centroid_x: cx,
            centroid_y: cy,
        }
    }

    #[test]
    fn empty_file_is_empty_set() {
        let cfg = IngestConfig::default();
        let set = load_trajectories_from("person_id,timestamp,x,y\n".as_bytes(), "mem", &cfg).unwrap();
        assert_eq!(set.person_count(), 0);
    }

    #[test]
    fn shuffled_rows_sort_ascending() {
        let cfg = IngestConfig::default();
        let data = "person_id,timestamp,x,y\n1,300,5.0,5.0\n1,100,1.0,1.0\n1,200,3.0,3.0\n";
        let set = load_trajectories_from(data.as_bytes(), "mem", &cfg).unwrap();
        assert_eq!(set.person_count(), 1);
        let ts: Vec<i64> = set.pings(PersonId(1)).unwrap().iter().map(|p| p.timestamp).collect();
        assert_eq!(ts, vec![100, 200, 300]);
    }

    #[test]
    fn duplicate_timestamps_keep_first() {
        let cfg = IngestConfig::default();
        let data = "person_id,timestamp,x,y\n1,100,1.0,1.0\n1,100,9.0,9.0\n";
        let set = load_trajectories_from(data.as_bytes(), "mem", &cfg).unwrap();
        let pings = set.pings(PersonId(1)).unwrap();
        assert_eq!(pings.len(), 1);
        assert_eq!(pings[0].x, 1.0);
    }

    #[test]
    fn malformed_row_names_line() {
        let cfg = IngestConfig::default();
        let data = "person_id,timestamp,x,y\n1,100,1.0,1.0\n1,not_a_number,2.0,2.0\n";
        let err = load_trajectories_from(data.as_bytes(), "mem", &cfg).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn latlon_projection_is_metric_near_reference() {
        // One degree of latitude is ~111.2 km everywhere.
        let (_, y) = project_equirectangular(0.0, 1.0, 0.0, 0.0);
        assert!((y - 111_194.9).abs() < 1.0, "y = {y}");
    }

    #[test]
    fn stay_emitted_when_dwell_reached() {
        let mut set = TrajectorySet::new();
        set.push(ping(1, 0, 1.0, 1.0));
        set.push(ping(1, 600, 2.0, 2.0));
        set.normalize();
        let stays = detect_stays(&set, 10.0, 300);
        assert_eq!(stays.len(), 1);
        assert_eq!(stays[0].enter_time, 0);
        assert_eq!(stays[0].leave_time, 600);
        assert_eq!(stays[0].centroid_x, 1.5);
    }

    #[test]
    fn distinct_cells_yield_no_stays() {
        let mut set = TrajectorySet::new();
        for i in 0..10 {
            set.push(ping(1, i * 100, (i * 50) as f64, 0.0));
        }
        set.normalize();
        let stays = detect_stays(&set, 10.0, 300);
        assert!(stays.is_empty());
    }

    #[test]
    fn zero_min_dwell_keeps_single_ping_runs() {
        let mut set = TrajectorySet::new();
        set.push(ping(1, 0, 1.0, 1.0));
        set.normalize();
        let stays = detect_stays(&set, 10.0, 0);
        assert_eq!(stays.len(), 1);
        assert_eq!(stays[0].duration(), 0);
    }

    /// Independent run-length oracle: walks pings and emits (start, end, cell)
    /// spans without sharing any code with `detect_stays`.
    fn run_length_oracle(pings: &[Ping], cell_size: f64, min_dwell: i64) -> Vec<(i64, i64, CellId)> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < pings.len() {
            let cell = CellId::of(pings[i].x, pings[i].y, cell_size);
            let mut j = i;
            while j + 1 < pings.len() && CellId::of(pings[j + 1].x, pings[j + 1].y, cell_size) == cell {
                j += 1;
            }
            if pings[j].timestamp - pings[i].timestamp >= min_dwell {
                spans.push((pings[i].timestamp, pings[j].timestamp, cell));
            }
            i = j + 1;
        }
        spans
    }

    #[test]
    fn random_walk_matches_run_length_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, "ingest-test");
        let mut set = TrajectorySet::new();
        let mut x = 0.0f64;
        let mut y = 0.0f64;
        for i in 0..50 {
            if rng.random_bool(0.4) {
                x += rng.random_range(-15.0..15.0);
                y += rng.random_range(-15.0..15.0);
            }
            set.push(ping(1, i * 120, x, y));
        }
        set.normalize();
        let stays = detect_stays(&set, 10.0, 300);
        let oracle = run_length_oracle(set.pings(PersonId(1)).unwrap(), 10.0, 300);
        assert_eq!(stays.len(), oracle.len());
        for (s, (enter, leave, cell)) in stays.iter().zip(oracle) {
            assert_eq!((s.enter_time, s.leave_time, s.cell), (enter, leave, cell));
        }
    }

    #[test]
    fn overlap_intersection() {
        let a = stay(1, (0, 0), 0, 100, 1.0, 1.0);
        let b = stay(2, (0, 0), 50, 150, 2.0, 2.0);
        let events = co_locations(&[a, b], TimeInterval::new(0, 1000), 10.0, 0);
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!((e.overlap_start, e.overlap_end), (50, 100));
        assert_eq!(e.contact_seconds(), 50);
        assert_eq!(e.kind, ContactKind::Overlap);
    }

    #[test]
    fn disjoint_stays_no_event() {
        let a = stay(1, (0, 0), 0, 100, 1.0, 1.0);
        let b = stay(2, (0, 0), 200, 300, 2.0, 2.0);
        let events = co_locations(&[a, b], TimeInterval::new(0, 1000), 10.0, 0);
        assert!(events.is_empty());
    }

    #[test]
    fn lingering_contact_within_window() {
        let a = stay(1, (0, 0), 0, 100, 1.0, 1.0);
        let b = stay(2, (0, 0), 160, 300, 2.0, 2.0);
        let events = co_locations(&[a.clone(), b.clone()], TimeInterval::new(0, 1000), 10.0, 100);
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.kind, ContactKind::Lingering);
        assert_eq!((e.overlap_start, e.overlap_end), (100, 160));
        assert_eq!(e.contact_seconds(), 0);

        // Window of 0 disables lingering contacts entirely.
        let events = co_locations(&[a, b], TimeInterval::new(0, 1000), 10.0, 0);
        assert!(events.is_empty());
    }

    #[test]
    fn distance_threshold_excludes_far_centroids() {
        let a = stay(1, (0, 0), 0, 100, 0.5, 0.5);
        let b = stay(2, (0, 0), 0, 100, 9.5, 9.5);
        let events = co_locations(&[a, b], TimeInterval::new(0, 1000), 10.0, 0);
        assert!(events.is_empty(), "centroid distance ~12.7 m > 10 m");
    }

    #[test]
    fn epoch_clips_overlap() {
        let a = stay(1, (0, 0), 0, 100, 1.0, 1.0);
        let b = stay(2, (0, 0), 50, 150, 2.0, 2.0);
        let events = co_locations(&[a, b], TimeInterval::new(0, 60), 10.0, 0);
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].overlap_start, events[0].overlap_end), (50, 60));
    }

    /// Brute-force all-pairs oracle over raw stays.
    fn pairwise_oracle(
        stays: &[Stay],
        epoch: TimeInterval,
        distance_threshold: f64,
    ) -> Vec<(PersonId, PersonId, i64, i64)> {
        let mut out = Vec::new();
        for i in 0..stays.len() {
            for j in (i + 1)..stays.len() {
                let (a, b) = (&stays[i], &stays[j]);
                if a.cell != b.cell || a.person == b.person {
                    continue;
                }
                let d = ((a.centroid_x - b.centroid_x).powi(2) + (a.centroid_y - b.centroid_y).powi(2))
                    .sqrt();
                if d > distance_threshold {
                    continue;
                }
                let start = a.enter_time.max(b.enter_time).max(epoch.start);
                let end = a.leave_time.min(b.leave_time).min(epoch.end);
                if end > start {
                    let (pa, pb) = if a.person < b.person {
                        (a.person, b.person)
                    } else {
                        (b.person, a.person)
                    };
                    out.push((pa, pb, start, end));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn random_stays_match_pairwise_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(5, "coloc-test");
        let mut stays = Vec::new();
        for person in 0..20u64 {
            let cell = rng.random_range(0..3i64);
            let enter = rng.random_range(0..5_000i64);
            let leave = enter + rng.random_range(1..4_000i64);
            stays.push(stay(
                person,
                (cell, 0),
                enter,
                leave,
                cell as f64 * 10.0 + rng.random_range(0.0..5.0),
                rng.random_range(0.0..5.0),
            ));
        }
        let epoch = TimeInterval::new(0, 7_200);
        let events = co_locations(&stays, epoch, 10.0, 0);
        let got: Vec<_> = events
            .iter()
            .map(|e| (e.person_a, e.person_b, e.overlap_start, e.overlap_end))
            .collect();
        assert_eq!(got, pairwise_oracle(&stays, epoch, 10.0));
    }

    #[test]
    fn permuting_input_stays_is_invariant() {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::stream_rng(6, "coloc-perm");
        let mut stays = vec![
            stay(1, (0, 0), 0, 500, 1.0, 1.0),
            stay(2, (0, 0), 100, 600, 2.0, 2.0),
            stay(3, (0, 0), 200, 700, 3.0, 3.0),
            stay(4, (1, 0), 0, 900, 12.0, 1.0),
            stay(5, (1, 0), 300, 400, 13.0, 2.0),
        ];
        let epoch = TimeInterval::new(0, 7_200);
        let baseline = co_locations(&stays, epoch, 10.0, 0);
        for _ in 0..10 {
            stays.shuffle(&mut rng);
            assert_eq!(co_locations(&stays, epoch, 10.0, 0), baseline);
        }
    }

    #[test]
    fn overlap_contained_in_both_stays() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(7, "coloc-contain");
        let mut stays = Vec::new();
        for person in 0..30u64 {
            let enter = rng.random_range(0..3_000i64);
            stays.push(stay(
                person,
                (0, 0),
                enter,
                enter + rng.random_range(1..3_000i64),
                rng.random_range(0.0..6.0),
                rng.random_range(0.0..6.0),
            ));
        }
        let by_person: HashMap<PersonId, &Stay> = stays.iter().map(|s| (s.person, s)).collect();
        for e in co_locations(&stays, TimeInterval::new(0, 10_000), 10.0, 0) {
            for p in [e.person_a, e.person_b] {
                let s = by_person[&p];
                assert!(e.overlap_start >= s.enter_time && e.overlap_end <= s.leave_time);
            }
        }
    }
}
