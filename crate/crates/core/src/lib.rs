//! Core library for `ctrace`: builds per-epoch directed contact graphs from
//! raw trajectory pings, drives an individualized seven-state SEIR process
//! over them, and continuously trains a gradient-boosted ranker that orders
//! unconfirmed people by their probability of being asymptomatic carriers.
//!
//! The pipeline stages map onto the modules below:
//!
//! * [`ingest`] — trajectory loading, stay detection, co-location joins
//! * [`graph`] — per-epoch directed contact graphs and layer queries
//! * [`epidemic`] — the individualized SEIR state machine
//! * [`tracer`] — incubation windows, path tracking, feature extraction
//! * [`learner`] — gradient-boosted trees, AUC, superspreader scores
//! * [`evaluate`] — screening curves against a contact-tracing baseline
//! * [`pipeline`] — end-to-end orchestration used by the CLI
//! * [`synth`] — synthetic city and cohort generators for self-contained runs

pub mod artifacts;
pub mod config;
pub mod epidemic;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod ingest;
pub mod learner;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tracer;


pub use config::RunConfig;
pub use epidemic::{AggregateSeries, Counts, IncubationModel, Population, StateAssignment, StateLabel};
pub use error::{Error, Result};
pub use graph::{EpochGraph, IdgEdge, LayerCounts};
pub use ingest::{CoLocationEvent, PersonId, Ping, Stay, TimeInterval, TrajectorySet};
pub use learner::{TrainReport, TreeEnsemble};
pub use tracer::{CandidateGroup, FeatureVector, SearchWindow};


