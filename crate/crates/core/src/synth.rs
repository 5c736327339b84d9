//! Self-contained scenario generators.
//!
//! The city generator produces trajectory pings for a population moving
//! between household, workplace and venue anchors on a grid; the cohort
//! generator produces ready-made contact graphs at screening-comparison
//! scale without trajectory synthesis.

use std::collections::BTreeMap;

use rand::Rng;

use crate::epidemic::Population;
use crate::ingest::{detect_stays_for, PersonId, Ping, Stay, TrajectorySet};

/// Parameters for the synthetic city.
#[derive(Debug, Clone)]
pub struct CityParams {
    pub people: u32,
    pub days: u32,
    /// Seconds between pings while dwelling at an anchor.
    pub ping_interval: i64,
    /// Grid cell side, meters; anchors sit at cell centers.
    pub cell_size: f64,
    /// World side length in cells.
    pub extent_cells: u32,
    pub employed_frac: f64,
    /// Mean workplace size, people.
    pub workplace_mean: f64,
    /// Shared venues for evening visits.
    pub venues: u32,
    pub venue_visit_prob: f64,
    pub work_attendance: f64,
}

impl Default for CityParams {
    fn default() -> CityParams {
        CityParams {
            people: 3_000,
            days: 30,
            ping_interval: 1_200,
            cell_size: 10.0,
            extent_cells: 300,
            employed_frac: 0.72,
            workplace_mean: 12.0,
            venues: 100,
            venue_visit_prob: 0.35,
            work_attendance: 0.9,
        }
    }
}

const DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy)]
struct Anchor {
    x: f64,
    y: f64,
}

struct PersonPlan {
    home: Anchor,
    workplace: Option<Anchor>,
}

struct CityLayout {
    plans: Vec<PersonPlan>,
    venues: Vec<Anchor>,
}

fn cell_center<R: Rng>(params: &CityParams, rng: &mut R) -> Anchor {
    let cx = rng.random_range(0..params.extent_cells) as f64;
    let cy = rng.random_range(0..params.extent_cells) as f64;
    Anchor {
        x: (cx + 0.5) * params.cell_size,
        y: (cy + 0.5) * params.cell_size,
    }
}

fn build_layout<R: Rng>(params: &CityParams, rng: &mut R) -> CityLayout {
    // Households of 1-4 people share a home anchor.
    let mut homes = Vec::new();
    let mut assigned = 0u32;
    while assigned < params.people {
        let size = match rng.random_range(0..100u32) {
            0..=24 => 1,
            25..=59 => 2,
            60..=84 => 3,
            _ => 4,
        }
        .min(params.people - assigned);
        let anchor = cell_center(params, rng);
        for _ in 0..size {
            homes.push(anchor);
        }
        assigned += size;
    }

    let employed = (f64::from(params.people) * params.employed_frac).round() as u32;
    let workplace_count = (f64::from(employed) / params.workplace_mean).ceil().max(1.0) as u32;
    let workplaces: Vec<Anchor> = (0..workplace_count).map(|_| cell_center(params, rng)).collect();

    let mut plans = Vec::with_capacity(params.people as usize);
    for person in 0..params.people {
        let workplace = if person < employed {
            Some(workplaces[rng.random_range(0..workplaces.len())])
        } else {
            None
        };
        plans.push(PersonPlan {
            home: homes[person as usize],
            workplace,
        });
    }

    let venues: Vec<Anchor> = (0..params.venues.max(1)).map(|_| cell_center(params, rng)).collect();
    CityLayout { plans, venues }
}

/// Emit pings for one dwell: one every `ping_interval` seconds, jittered
/// within a meter of the anchor so runs stay inside one grid cell.
fn dwell_pings<R: Rng>(
    person: PersonId,
    anchor: Anchor,
    start: i64,
    end: i64,
    params: &CityParams,
    rng: &mut R,
    out: &mut Vec<Ping>,
) {
    let mut t = start;
    while t < end {
        out.push(Ping {
            person,
            timestamp: t,
            x: anchor.x + rng.random_range(-1.0..1.0),
            y: anchor.y + rng.random_range(-1.0..1.0),
        });
        t += params.ping_interval;
    }
}

fn person_day_pings<R: Rng>(
    person: PersonId,
    plan: &PersonPlan,
    venues: &[Anchor],
    day: u32,
    params: &CityParams,
    rng: &mut R,
    out: &mut Vec<Ping>,
) {
    let base = i64::from(day) * DAY;
    let mut dwells: Vec<(Anchor, i64, i64)> = Vec::new();

    let works_today = plan
        .workplace
        .is_some_and(|_| rng.random_bool(params.work_attendance));
    let evening_out = rng.random_bool(params.venue_visit_prob);

    if works_today {
        let work = plan.workplace.unwrap();
        let work_start = base + 8 * 3_600 + rng.random_range(0..3_600);
        let work_end = base + 16 * 3_600 + rng.random_range(0..5_400);
        let commute = rng.random_range(600..1_800);
        dwells.push((plan.home, base, work_start - commute));
        dwells.push((work, work_start, work_end));
        if evening_out {
            let venue = venues[rng.random_range(0..venues.len())];
            let visit_start = work_end + rng.random_range(900..2_700);
            let visit_end = visit_start + rng.random_range(1_800..4_500);
            dwells.push((venue, visit_start, visit_end));
            dwells.push((plan.home, visit_end + rng.random_range(600..1_800), base + DAY));
        } else {
            dwells.push((plan.home, work_end + rng.random_range(600..1_800), base + DAY));
        }
    } else if evening_out {
        let venue = venues[rng.random_range(0..venues.len())];
        let visit_start = base + 18 * 3_600 + rng.random_range(0..5_400);
        let visit_end = visit_start + rng.random_range(1_800..4_500);
        dwells.push((plan.home, base, visit_start - rng.random_range(600..1_800)));
        dwells.push((venue, visit_start, visit_end));
        dwells.push((plan.home, visit_end + rng.random_range(600..1_800), base + DAY));
    } else {
        dwells.push((plan.home, base, base + DAY));
    }

    for (i, &(anchor, start, end)) in dwells.iter().enumerate() {
        dwell_pings(person, anchor, start, end, params, rng, out);
        // A transit ping between dwells; single out-of-run samples never
        // become stays.
        if i + 1 < dwells.len() {
            let next = dwells[i + 1];
            out.push(Ping {
                person,
                timestamp: end + (next.1 - end) / 2,
                x: (anchor.x + next.0.x) / 2.0,
                y: (anchor.y + next.0.y) / 2.0,
            });
        }
    }
}

/// Generate the city, streaming each person's pings to `sink` in person-id
/// order. Pings arrive sorted by timestamp.
pub fn generate_city_into<R, F>(params: &CityParams, rng: &mut R, mut sink: F)
where
    R: Rng,
    F: FnMut(PersonId, &[Ping]),
{
    let layout = build_layout(params, rng);
    let mut buffer = Vec::new();
    for person in 0..params.people {
        buffer.clear();
        let id = PersonId(u64::from(person));
        for day in 0..params.days {
            person_day_pings(
                id,
                &layout.plans[person as usize],
                &layout.venues,
                day,
                params,
                rng,
                &mut buffer,
            );
        }
        buffer.sort_by_key(|p| p.timestamp);
        buffer.dedup_by_key(|p| p.timestamp);
        sink(id, &buffer);
    }
}

/// Generate the city as a full in-memory trajectory set.
pub fn generate_city<R: Rng>(params: &CityParams, rng: &mut R) -> TrajectorySet {
    let mut set = TrajectorySet::new();
    generate_city_into(params, rng, |_, pings| {
        for &p in pings {
            set.push(p);
        }
    });
    set.normalize();
    set
}

/// Generate the city and keep only detected stays and last positions;
/// avoids holding every ping in memory.
pub fn generate_city_stays<R: Rng>(
    params: &CityParams,
    min_dwell: i64,
    rng: &mut R,
) -> (Vec<Stay>, BTreeMap<PersonId, (f64, f64)>, Population) {
    let mut stays = Vec::new();
    let mut last_positions = BTreeMap::new();
    let mut ids = Vec::with_capacity(params.people as usize);
    generate_city_into(params, rng, |person, pings| {
        ids.push(person);
        detect_stays_for(person, pings, params.cell_size, min_dwell, &mut stays);
        if let Some(last) = pings.last() {
            last_positions.insert(person, (last.x, last.y));
        }
    });
    (stays, last_positions, Population::new(ids))
}

/// Parameters for the screening-comparison cohort: a population at ratio
/// `ratio_units` of the base unit plus a block of confirmed cases, with
/// community-structured contacts generated directly as graph events.
#[derive(Debug, Clone)]
pub struct CohortParams {
    pub ratio_units: u32,
    pub ratio_base: u32,
    pub confirmed: u32,
    pub days: u32,
    pub epochs_per_day: u32,
    pub community_size: u32,
    /// Contact draws per present person per epoch.
    pub contacts_per_epoch: f64,
    /// Probability a contact reaches outside the community.
    pub cross_community_prob: f64,
    /// Probability a person mixes at all in a given epoch.
    pub presence_prob: f64,
}

impl Default for CohortParams {
    fn default() -> CohortParams {
        CohortParams {
            ratio_units: 50,
            ratio_base: 500,
            confirmed: 500,
            days: 12,
            epochs_per_day: 4,
            community_size: 18,
            contacts_per_epoch: 1.4,
            cross_community_prob: 0.04,
            presence_prob: 0.55,
        }
    }
}

impl CohortParams {
    pub fn population_size(&self) -> u32 {
        self.ratio_units * self.ratio_base + self.confirmed
    }

    pub fn total_epochs(&self) -> u32 {
        self.days * self.epochs_per_day
    }
}

/// Contact events for one cohort epoch.
pub fn cohort_epoch_events<R: Rng>(
    params: &CohortParams,
    communities: &[Vec<u32>],
    epoch: u32,
    rng: &mut R,
) -> Vec<crate::ingest::CoLocationEvent> {
    use crate::ingest::{CellId, CoLocationEvent, ContactKind};

    let epoch_seconds = DAY / i64::from(params.epochs_per_day);
    let epoch_start = i64::from(epoch) * epoch_seconds;
    let population = params.population_size();
    let mut events = Vec::new();
    for community in communities {
        for &person in community {
            if !rng.random_bool(params.presence_prob) {
                continue;
            }
            let mut contacts = params.contacts_per_epoch.floor() as u32;
            if rng.random_bool(params.contacts_per_epoch.fract()) {
                contacts += 1;
            }
            for _ in 0..contacts {
                let other = if rng.random_bool(params.cross_community_prob) {
                    rng.random_range(0..population)
                } else {
                    community[rng.random_range(0..community.len())]
                };
                if other == person {
                    continue;
                }
                let (a, b) = (person.min(other), person.max(other));
                let overlap = rng.random_range(300..3_600);
                let overlap_start = epoch_start + rng.random_range(0..epoch_seconds - overlap);
                let leave_a = overlap_start + overlap + rng.random_range(0..900);
                let leave_b = overlap_start + overlap + rng.random_range(0..900);
                events.push(CoLocationEvent {
                    person_a: PersonId(u64::from(a)),
                    person_b: PersonId(u64::from(b)),
                    cell: CellId(i64::from(a % 1_000), i64::from(b % 1_000)),
                    overlap_start,
                    overlap_end: overlap_start + overlap,
                    closest_distance: rng.random_range(0.5..9.5),
                    leave_a,
                    leave_b,
                    kind: ContactKind::Overlap,
                });
            }
        }
    }
    events
}

/// Random partition of the cohort population into communities.
pub fn cohort_communities<R: Rng>(params: &CohortParams, rng: &mut R) -> Vec<Vec<u32>> {
    use rand::seq::SliceRandom;
    let mut people: Vec<u32> = (0..params.population_size()).collect();
    people.shuffle(rng);
    people
        .chunks(params.community_size.max(2) as usize)
        .map(|c| c.to_vec())
        .collect()
}
