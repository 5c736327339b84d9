//! Run configuration: a flat `key = value` file, every key optional, every
//! CLI flag overriding its key. The echo includes every default that was
//! applied so artifacts are self-describing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::epidemic::{CompartmentalRates, Counts};
use crate::error::{Error, Result};
use crate::learner::{GbdtParams, UpdatePolicy};
use crate::synth::CityParams;
use crate::tracer::CountsMode;

/// Which ground-truth transition marks a training example positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveClass {
    /// Becomes confirmed infected within the label horizon.
    IOnly,
    /// Is or becomes exposed, or becomes infected, within the horizon.
    IOrE,
}

/// How epoch-0 bucket sizes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCounts {
    /// Reference proportions scaled to the population.
    Proportional,
    /// Explicit `S,Sq,E,Eq,I,H,R`.
    Explicit(Counts),
}

/// The full run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    /// Trajectory CSV; empty means generate the synthetic city.
    pub trajectories: String,
    /// Aggregate-series CSV; empty means run the compartmental driver.
    pub aggregates: String,
    /// Confirmation-events CSV for `rank`; empty means the simulate artifact.
    pub confirmations: String,

    // Ingest.
    pub cell_size: f64,
    pub min_dwell: i64,
    pub distance_threshold: f64,
    pub lingering_window: i64,
    pub latlon: bool,

    // Epochs.
    pub epoch_seconds: i64,
    pub days: u32,

    // Incubation.
    pub incubation_min_days: u32,
    pub incubation_max_days: u32,

    // Tracking and features.
    pub max_layer: u32,
    pub counts_mode: CountsMode,
    pub sample_budget: usize,
    sentinel_distance: Option<f64>,
    pub positive_class: PositiveClass,
    pub label_horizon_days: u32,
    pub batch_interval_epochs: u32,
    pub max_negatives_per_batch: usize,

    // Exposure-candidate thresholds (default to the ingest thresholds).
    min_overlap: Option<i64>,
    max_distance: Option<f64>,
    pub contact_window_epochs: u32,

    // Aggregate driver.
    pub rates: CompartmentalRates,
    pub initial_counts: InitialCounts,

    // Learner.
    pub gbdt: GbdtParams,
    pub split_ratio: f64,
    pub update_policy: UpdatePolicy,

    // Evaluation.
    pub baseline_shuffles: usize,
    pub coverage_target: f64,

    // Synthetic city.
    pub city_people: u32,
    pub city_ping_interval: i64,
    pub city_extent_cells: u32,
    pub city_employed_frac: f64,
    pub city_workplace_mean: f64,
    pub city_venues: u32,
    pub city_venue_visit_prob: f64,
    pub city_work_attendance: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        let city = CityParams::default();
        RunConfig {
            seed: 42,
            trajectories: String::new(),
            aggregates: String::new(),
            confirmations: String::new(),
            cell_size: 10.0,
            min_dwell: 300,
            distance_threshold: 10.0,
            lingering_window: 0,
            latlon: false,
            epoch_seconds: 7_200,
            days: 30,
            incubation_min_days: 5,
            incubation_max_days: 7,
            max_layer: 3,
            counts_mode: CountsMode::Exact,
            sample_budget: 256,
            sentinel_distance: None,
            positive_class: PositiveClass::IOnly,
            label_horizon_days: 5,
            batch_interval_epochs: 12,
            max_negatives_per_batch: 1_500,
            min_overlap: None,
            max_distance: None,
            contact_window_epochs: 12,
            rates: CompartmentalRates::default(),
            initial_counts: InitialCounts::Proportional,
            gbdt: GbdtParams::default(),
            split_ratio: 0.3,
            update_policy: UpdatePolicy::FullRetrain,
            baseline_shuffles: 100,
            coverage_target: 1.0,
            city_people: city.people,
            city_ping_interval: city.ping_interval,
            city_extent_cells: city.extent_cells,
            city_employed_frac: city.employed_frac,
            city_workplace_mean: city.workplace_mean,
            city_venues: city.venues,
            city_venue_visit_prob: city.venue_visit_prob,
            city_work_attendance: city.work_attendance,
        }
    }
}

impl RunConfig {
    /// Exposure-candidate overlap threshold; mirrors `min_dwell` unless set.
    pub fn min_overlap(&self) -> i64 {
        self.min_overlap.unwrap_or(self.min_dwell)
    }

    /// Exposure-candidate distance cap; mirrors `distance_threshold` unless set.
    pub fn max_distance(&self) -> f64 {
        self.max_distance.unwrap_or(self.distance_threshold)
    }

    /// No-contact feature distance; ten grid thresholds unless set.
    pub fn sentinel_distance(&self) -> f64 {
        self.sentinel_distance.unwrap_or(10.0 * self.distance_threshold)
    }

    pub fn epochs_per_day(&self) -> u32 {
        (86_400 / self.epoch_seconds) as u32
    }

    pub fn total_epochs(&self) -> u32 {
        self.days * self.epochs_per_day()
    }

    pub fn city_params(&self) -> CityParams {
        CityParams {
            people: self.city_people,
            days: self.days,
            ping_interval: self.city_ping_interval,
            cell_size: self.cell_size,
            extent_cells: self.city_extent_cells,
            employed_frac: self.city_employed_frac,
            workplace_mean: self.city_workplace_mean,
            venues: self.city_venues,
            venue_visit_prob: self.city_venue_visit_prob,
            work_attendance: self.city_work_attendance,
        }
    }

    pub fn incubation(&self) -> crate::epidemic::IncubationModel {
        crate::epidemic::IncubationModel::uniform(self.incubation_min_days, self.incubation_max_days)
    }

    pub fn thresholds(&self) -> crate::epidemic::ContactThresholds {
        crate::epidemic::ContactThresholds {
            min_overlap: self.min_overlap(),
            max_distance: self.max_distance(),
        }
    }

    pub fn feature_config(&self) -> crate::tracer::FeatureConfig {
        crate::tracer::FeatureConfig {
            max_layer: self.max_layer,
            sentinel_distance: self.sentinel_distance(),
            mode: self.counts_mode,
            budget: self.sample_budget,
        }
    }

    /// Load a config file and apply it over the defaults.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config = RunConfig::default();
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: number as u64 + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            config
                .apply(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: number as u64 + 1,
                    message: e.to_string(),
                })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Set one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("key {key}: {what}: {value:?}"));
        macro_rules! parse {
            ($t:ty) => {
                value.parse::<$t>().map_err(|_| bad("invalid value"))?
            };
        }
        match key {
            "seed" => self.seed = parse!(u64),
            "trajectories" => self.trajectories = value.to_string(),
            "aggregates" => self.aggregates = value.to_string(),
            "confirmations" => self.confirmations = value.to_string(),
            "cell_size" => self.cell_size = parse!(f64),
            "min_dwell" => self.min_dwell = parse!(i64),
            "distance_threshold" => self.distance_threshold = parse!(f64),
            "lingering_window" => self.lingering_window = parse!(i64),
            "latlon" => self.latlon = parse!(bool),
            "epoch_seconds" => self.epoch_seconds = parse!(i64),
            "days" => self.days = parse!(u32),
            "incubation_min_days" => self.incubation_min_days = parse!(u32),
            "incubation_max_days" => self.incubation_max_days = parse!(u32),
            "max_layer" => self.max_layer = parse!(u32),
            "counts_mode" => {
                self.counts_mode = match value {
                    "exact" => CountsMode::Exact,
                    "sampled" => CountsMode::Sampled,
                    _ => return Err(bad("expected exact|sampled")),
                }
            }
            "sample_budget" => self.sample_budget = parse!(usize),
            "sentinel_distance" => self.sentinel_distance = Some(parse!(f64)),
            "positive_class" => {
                self.positive_class = match value {
                    "i-only" => PositiveClass::IOnly,
                    "i-or-e" => PositiveClass::IOrE,
                    _ => return Err(bad("expected i-only|i-or-e")),
                }
            }
            "label_horizon_days" => self.label_horizon_days = parse!(u32),
            "batch_interval_epochs" => self.batch_interval_epochs = parse!(u32),
            "max_negatives_per_batch" => self.max_negatives_per_batch = parse!(usize),
            "min_overlap" => self.min_overlap = Some(parse!(i64)),
            "max_distance" => self.max_distance = Some(parse!(f64)),
            "contact_window_epochs" => self.contact_window_epochs = parse!(u32),
            "rate_beta" => self.rates.beta = parse!(f64),
            "rate_eq_fraction" => self.rates.eq_fraction = parse!(f64),
            "rate_sq" => self.rates.sq_rate = parse!(f64),
            "rate_sq_release" => self.rates.sq_release = parse!(f64),
            "rate_sigma" => self.rates.sigma = parse!(f64),
            "rate_eq_hosp" => self.rates.eq_hosp = parse!(f64),
            "rate_i_hosp" => self.rates.i_hosp = parse!(f64),
            "rate_i_recov" => self.rates.i_recov = parse!(f64),
            "rate_h_recov" => self.rates.h_recov = parse!(f64),
            "initial_counts" => {
                self.initial_counts = if value == "proportional" {
                    InitialCounts::Proportional
                } else {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 7 {
                        return Err(bad("expected proportional or S,Sq,E,Eq,I,H,R"));
                    }
                    let mut nums = [0u32; 7];
                    for (slot, part) in nums.iter_mut().zip(&parts) {
                        *slot = part.parse().map_err(|_| bad("invalid count"))?;
                    }
                    InitialCounts::Explicit(Counts::new(
                        nums[0], nums[1], nums[2], nums[3], nums[4], nums[5], nums[6],
                    ))
                }
            }
            "gbdt_rounds" => self.gbdt.rounds = parse!(u32),
            "gbdt_max_depth" => self.gbdt.max_depth = parse!(u32),
            "gbdt_learning_rate" => self.gbdt.learning_rate = parse!(f64),
            "gbdt_leaf_clamp" => self.gbdt.leaf_clamp = parse!(f64),
            "gbdt_lambda" => self.gbdt.lambda = parse!(f64),
            "gbdt_min_leaf" => self.gbdt.min_leaf = parse!(usize),
            "split_ratio" => self.split_ratio = parse!(f64),
            "update_policy" => {
                self.update_policy = if value == "full-retrain" {
                    UpdatePolicy::FullRetrain
                } else if let Some(rounds) = value.strip_prefix("warm-start:") {
                    UpdatePolicy::WarmStart {
                        rounds: rounds.parse().map_err(|_| bad("invalid round count"))?,
                    }
                } else {
                    return Err(bad("expected full-retrain|warm-start:<rounds>"));
                }
            }
            "baseline_shuffles" => self.baseline_shuffles = parse!(usize),
            "coverage_target" => self.coverage_target = parse!(f64),
            "city_people" => self.city_people = parse!(u32),
            "city_ping_interval" => self.city_ping_interval = parse!(i64),
            "city_extent_cells" => self.city_extent_cells = parse!(u32),
            "city_employed_frac" => self.city_employed_frac = parse!(f64),
            "city_workplace_mean" => self.city_workplace_mean = parse!(f64),
            "city_venues" => self.city_venues = parse!(u32),
            "city_venue_visit_prob" => self.city_venue_visit_prob = parse!(f64),
            "city_work_attendance" => self.city_work_attendance = parse!(f64),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        };
        check(self.cell_size > 0.0, "cell_size must be positive")?;
        check(self.min_dwell >= 0, "min_dwell must be non-negative")?;
        check(self.distance_threshold >= 0.0, "distance_threshold must be non-negative")?;
        check(self.lingering_window >= 0, "lingering_window must be non-negative")?;
        check(self.epoch_seconds > 0, "epoch_seconds must be positive")?;
        check(
            86_400 % self.epoch_seconds == 0,
            "epoch_seconds must divide a day evenly",
        )?;
        check(self.days > 0, "days must be positive")?;
        check(
            self.incubation_min_days >= 1 && self.incubation_max_days >= self.incubation_min_days,
            "incubation bounds must satisfy 1 <= min <= max",
        )?;
        check(self.max_layer >= 1, "max_layer must be at least 1")?;
        check(self.sample_budget >= 1, "sample_budget must be at least 1")?;
        check(
            self.split_ratio > 0.0 && self.split_ratio < 1.0,
            "split_ratio must lie in (0, 1)",
        )?;
        check(
            self.coverage_target > 0.0 && self.coverage_target <= 1.0,
            "coverage_target must lie in (0, 1]",
        )?;
        check(self.batch_interval_epochs >= 1, "batch_interval_epochs must be at least 1")?;
        check(self.min_overlap() >= 0, "min_overlap must be non-negative")?;
        check(self.max_distance() >= 0.0, "max_distance must be non-negative")?;
        check(self.gbdt.rounds >= 1, "gbdt_rounds must be at least 1")?;
        check(self.gbdt.max_depth >= 1, "gbdt_max_depth must be at least 1")?;
        check(self.gbdt.learning_rate > 0.0, "gbdt_learning_rate must be positive")?;
        check(self.city_people >= 1, "city_people must be at least 1")?;
        Ok(())
    }

    /// Every effective key, sorted, defaults included.
    pub fn echo(&self) -> String {
        let policy = match self.update_policy {
            UpdatePolicy::FullRetrain => "full-retrain".to_string(),
            UpdatePolicy::WarmStart { rounds } => format!("warm-start:{rounds}"),
        };
        let initial = match self.initial_counts {
            InitialCounts::Proportional => "proportional".to_string(),
            InitialCounts::Explicit(c) => {
                format!("{},{},{},{},{},{},{}", c.s, c.sq, c.e, c.eq, c.i, c.h, c.r)
            }
        };
        let mut pairs: Vec<(&str, String)> = vec![
            ("aggregates", self.aggregates.clone()),
            ("baseline_shuffles", self.baseline_shuffles.to_string()),
            ("batch_interval_epochs", self.batch_interval_epochs.to_string()),
            ("cell_size", self.cell_size.to_string()),
            ("city_employed_frac", self.city_employed_frac.to_string()),
            ("city_extent_cells", self.city_extent_cells.to_string()),
            ("city_people", self.city_people.to_string()),
            ("city_ping_interval", self.city_ping_interval.to_string()),
            ("city_venue_visit_prob", self.city_venue_visit_prob.to_string()),
            ("city_venues", self.city_venues.to_string()),
            ("city_work_attendance", self.city_work_attendance.to_string()),
            ("city_workplace_mean", self.city_workplace_mean.to_string()),
            ("confirmations", self.confirmations.clone()),
            ("contact_window_epochs", self.contact_window_epochs.to_string()),
            ("counts_mode", match self.counts_mode {
                CountsMode::Exact => "exact".to_string(),
                CountsMode::Sampled => "sampled".to_string(),
            }),
            ("coverage_target", self.coverage_target.to_string()),
            ("days", self.days.to_string()),
            ("distance_threshold", self.distance_threshold.to_string()),
            ("epoch_seconds", self.epoch_seconds.to_string()),
            ("gbdt_lambda", self.gbdt.lambda.to_string()),
            ("gbdt_leaf_clamp", self.gbdt.leaf_clamp.to_string()),
            ("gbdt_learning_rate", self.gbdt.learning_rate.to_string()),
            ("gbdt_max_depth", self.gbdt.max_depth.to_string()),
            ("gbdt_min_leaf", self.gbdt.min_leaf.to_string()),
            ("gbdt_rounds", self.gbdt.rounds.to_string()),
            ("incubation_max_days", self.incubation_max_days.to_string()),
            ("incubation_min_days", self.incubation_min_days.to_string()),
            ("initial_counts", initial),
            ("label_horizon_days", self.label_horizon_days.to_string()),
            ("latlon", self.latlon.to_string()),
            ("lingering_window", self.lingering_window.to_string()),
            ("max_distance", self.max_distance().to_string()),
            ("max_layer", self.max_layer.to_string()),
            ("max_negatives_per_batch", self.max_negatives_per_batch.to_string()),
            ("min_dwell", self.min_dwell.to_string()),
            ("min_overlap", self.min_overlap().to_string()),
            ("positive_class", match self.positive_class {
                PositiveClass::IOnly => "i-only".to_string(),
                PositiveClass::IOrE => "i-or-e".to_string(),
            }),
            ("rate_beta", self.rates.beta.to_string()),
            ("rate_eq_fraction", self.rates.eq_fraction.to_string()),
            ("rate_eq_hosp", self.rates.eq_hosp.to_string()),
            ("rate_h_recov", self.rates.h_recov.to_string()),
            ("rate_i_hosp", self.rates.i_hosp.to_string()),
            ("rate_i_recov", self.rates.i_recov.to_string()),
            ("rate_sigma", self.rates.sigma.to_string()),
            ("rate_sq", self.rates.sq_rate.to_string()),
            ("rate_sq_release", self.rates.sq_release.to_string()),
            ("sample_budget", self.sample_budget.to_string()),
            ("seed", self.seed.to_string()),
            ("sentinel_distance", self.sentinel_distance().to_string()),
            ("split_ratio", self.split_ratio.to_string()),
            ("trajectories", self.trajectories.clone()),
            ("update_policy", policy),
        ];
        pairs.sort_by_key(|(k, _)| *k);
        let mut out = String::new();
        for (key, value) in pairs {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn trajectories_path(&self) -> Option<PathBuf> {
        (!self.trajectories.is_empty()).then(|| PathBuf::from(&self.trajectories))
    }

    pub fn aggregates_path(&self) -> Option<PathBuf> {
        (!self.aggregates.is_empty()).then(|| PathBuf::from(&self.aggregates))
    }

    pub fn confirmations_path(&self) -> Option<PathBuf> {
        (!self.confirmations.is_empty()).then(|| PathBuf::from(&self.confirmations))
    }
}
