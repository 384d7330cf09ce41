//! Desk-scale fixtures shipped with the crate. They are synthetic examples
//! for tests and demonstrations, not historical claims.

use crate::assumptions::AssumptionSet;
use crate::onomasticon::Onomasticon;
use crate::rr_engine::{Cluster, ClusterFile};

pub const ONOM_A_CSV: &str = include_str!("../fixtures/onom_a.csv");
pub const ONOM_B_CSV: &str = include_str!("../fixtures/onom_b.csv");
pub const ASSUMPTIONS_A_JSON: &str = include_str!("../fixtures/assumptions_a.json");
pub const ASSUMPTIONS_B_JSON: &str = include_str!("../fixtures/assumptions_b.json");
pub const TALPIYOT_LIKE_JSON: &str = include_str!("../fixtures/talpiyot_like.json");
pub const CLUSTER_B_JSON: &str = include_str!("../fixtures/cluster_b.json");
pub const SWEEP_DESK_ASSUMPTIONS_JSON: &str =
    include_str!("../fixtures/sweep_desk_assumptions.json");
pub const SWEEP_DESK_CLUSTER_JSON: &str = include_str!("../fixtures/sweep_desk_cluster.json");
pub const SWEEP_DESK_VARIANTS_JSON: &str = include_str!("../fixtures/sweep_desk_variants.json");
pub const POWER_ASSUMPTIONS_JSON: &str = include_str!("../fixtures/power_assumptions.json");
pub const POWER_CONFIG_JSON: &str = include_str!("../fixtures/power_config.json");
pub const POWER_ALT_JSON: &str = include_str!("../fixtures/power_alt.json");

pub fn onom_a() -> Onomasticon {
    Onomasticon::from_csv_str(ONOM_A_CSV).expect("fixture parses")
}

pub fn onom_b() -> Onomasticon {
    Onomasticon::from_csv_str(ONOM_B_CSV).expect("fixture parses")
}

pub fn assumptions_a() -> AssumptionSet {
    AssumptionSet::from_json_str(ASSUMPTIONS_A_JSON).expect("fixture parses")
}

pub fn assumptions_b() -> AssumptionSet {
    AssumptionSet::from_json_str(ASSUMPTIONS_B_JSON).expect("fixture parses")
}

pub fn talpiyot_like_file() -> ClusterFile {
    ClusterFile::from_json_str(TALPIYOT_LIKE_JSON).expect("fixture parses")
}

fn resolve(text: &str, onom: &Onomasticon) -> Cluster {
    ClusterFile::from_json_str(text)
        .and_then(|f| f.resolve(onom, true))
        .expect("fixture resolves")
        .0
}

pub fn talpiyot_like() -> Cluster {
    resolve(TALPIYOT_LIKE_JSON, &onom_a())
}

pub fn cluster_b() -> Cluster {
    resolve(CLUSTER_B_JSON, &onom_b())
}

pub fn sweep_desk_assumptions() -> AssumptionSet {
    AssumptionSet::from_json_str(SWEEP_DESK_ASSUMPTIONS_JSON).expect("fixture parses")
}

pub fn sweep_desk_cluster() -> Cluster {
    resolve(SWEEP_DESK_CLUSTER_JSON, &onom_a())
}

pub fn power_assumptions() -> AssumptionSet {
    AssumptionSet::from_json_str(POWER_ASSUMPTIONS_JSON).expect("fixture parses")
}

pub fn power_config() -> Cluster {
    resolve(POWER_CONFIG_JSON, &onom_a())
}
