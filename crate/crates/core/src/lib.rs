//! Rareness-and-relevance (RR) surprise statistics for clusters of inscribed
//! names, scored against a gender-stratified onomasticon and calibrated by a
//! configuration-conditioned Monte Carlo null.

pub mod analysis;
pub mod assignment;
pub mod assumptions;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod nulldist;
pub mod onomasticon;
pub mod report;
pub mod rng;
pub mod rr_engine;

pub use assumptions::{AssumptionSet, Candidate, DisqualifierRule, Flags, Penalty, SlotSpec};
pub use error::{Error, Result};
pub use nulldist::{estimate_tail_area, tomb_correction, Statistic, TailAreaEstimate};
pub use onomasticon::{Gender, Onomasticon};
pub use rng::SeedStream;
pub use rr_engine::{cluster_rr, Cluster, Inscription, RRBreakdown, RrEngine, Slot};
