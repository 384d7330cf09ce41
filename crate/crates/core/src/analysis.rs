//! Sensitivity and study layer: assumption sweeps, onomasticon bootstrap,
//! and level/power studies.
//!
//! Every row, replicate and study draw takes its own substream keyed by a
//! stable label (variant id, replicate index, draw index), never by loop
//! position, so adding work never perturbs existing results.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assumptions::{tiers_to_ratings, validate, AssumptionSet, Candidate, DisqualifierRule};
use crate::error::{Error, Result};
use crate::nulldist::{
    estimate_tail_area, tomb_correction, ClusterConfiguration, NullModel, Statistic,
    TailAreaEstimate,
};
use crate::onomasticon::{normalize_token, Onomasticon};
use crate::rng::SeedStream;
use crate::rr_engine::{Cluster, RrEngine, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagName {
    DistinctIndividuals,
    ConditionOnGender,
    ChainYoungestNeutral,
    UnknownFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotPosition {
    Personal,
    Patronym,
    Grandpatronym,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ScenarioEdit {
    AddCandidate {
        candidate: Candidate,
    },
    RemoveCandidate {
        candidate_id: String,
    },
    SetRatings {
        candidate_id: String,
        #[serde(default = "personal")]
        slot: SlotPosition,
        #[serde(default)]
        tiers: Option<Vec<Vec<String>>>,
        #[serde(default)]
        ratings: Option<std::collections::BTreeMap<String, u32>>,
    },
    SetFlag {
        flag: FlagName,
        value: bool,
    },
    SetTombs {
        value: u64,
    },
    AddDisqualifier {
        rule: DisqualifierRule,
    },
    ClearDisqualifiers,
}

fn personal() -> SlotPosition {
    SlotPosition::Personal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVariant {
    pub variant_id: String,
    #[serde(default)]
    pub edits: Vec<ScenarioEdit>,
}

impl ScenarioVariant {
    pub fn list_from_json_str(text: &str) -> Result<Vec<ScenarioVariant>> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn apply(&self, base: &AssumptionSet) -> Result<AssumptionSet> {
        let mut set = base.clone();
        for edit in &self.edits {
            apply_edit(&mut set, edit)?;
        }
        set.check_structure()?;
        Ok(set)
    }
}

fn apply_edit(set: &mut AssumptionSet, edit: &ScenarioEdit) -> Result<()> {
    let missing = |id: &str| Error::InvalidAssumptions(format!("no candidate {id:?}"));
    match edit {
        ScenarioEdit::AddCandidate { candidate } => set.candidates.push(candidate.clone()),
        ScenarioEdit::RemoveCandidate { candidate_id } => {
            let id = normalize_token(candidate_id);
            let before = set.candidates.len();
            set.candidates.retain(|c| c.candidate_id != id);
            if set.candidates.len() == before {
                return Err(missing(&id));
            }
        }
        ScenarioEdit::SetRatings {
            candidate_id,
            slot,
            tiers,
            ratings,
        } => {
            let id = normalize_token(candidate_id);
            let cand = set
                .candidates
                .iter_mut()
                .find(|c| c.candidate_id == id)
                .ok_or_else(|| missing(&id))?;
            let spec = match slot {
                SlotPosition::Personal => Some(&mut cand.personal),
                SlotPosition::Patronym => cand.patronym.as_mut(),
                SlotPosition::Grandpatronym => cand.grandpatronym.as_mut(),
            }
            .ok_or_else(|| {
                Error::InvalidAssumptions(format!("candidate {id:?} lacks slot {slot:?}"))
            })?;
            spec.ratings = match (tiers, ratings) {
                (Some(t), None) => tiers_to_ratings(t)?,
                (None, Some(r)) => r.iter().map(|(k, v)| (normalize_token(k), *v)).collect(),
                _ => {
                    return Err(Error::InvalidAssumptions(
                        "set_ratings needs exactly one of tiers or ratings".into(),
                    ))
                }
            };
        }
        ScenarioEdit::SetFlag { flag, value } => {
            let f = &mut set.flags;
            *match flag {
                FlagName::DistinctIndividuals => &mut f.distinct_individuals,
                FlagName::ConditionOnGender => &mut f.condition_on_gender,
                FlagName::ChainYoungestNeutral => &mut f.chain_youngest_neutral,
                FlagName::UnknownFloor => &mut f.unknown_floor,
            } = *value;
        }
        ScenarioEdit::SetTombs { value } => set.tombs_count = *value,
        ScenarioEdit::AddDisqualifier { rule } => set.disqualifiers.push(rule.clone()),
        ScenarioEdit::ClearDisqualifiers => set.disqualifiers.clear(),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variant_id: String,
    pub lock_digest: Option<String>,
    pub observed_rr: Option<f64>,
    pub p_hat: Option<f64>,
    pub mc_se: Option<f64>,
    pub bonferroni: Option<f64>,
    pub exact: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(variant_id: &str, lock_digest: Option<String>, error: String) -> Self {
        SweepRow {
            variant_id: variant_id.to_string(),
            lock_digest,
            observed_rr: None,
            p_hat: None,
            mc_se: None,
            bonferroni: None,
            exact: None,
            error: Some(error),
        }
    }
}

pub const BASE_VARIANT: &str = "base";

fn sweep_row(
    variant_id: &str,
    set: Result<AssumptionSet>,
    cluster: &Cluster,
    onom: &Onomasticon,
    n_sims: u64,
    stream: SeedStream,
) -> SweepRow {
    let set = match set {
        Ok(s) => s,
        Err(e) => return SweepRow::failed(variant_id, None, e.to_string()),
    };
    let digest = set.lock_hash();
    let report = validate(&set, onom);
    if !report.is_valid() {
        let msgs: Vec<&str> = report.fatal().map(|f| f.message.as_str()).collect();
        return SweepRow::failed(variant_id, Some(digest), msgs.join("; "));
    }
    let onom = &report.onomasticon;
    let run = || -> Result<(f64, TailAreaEstimate)> {
        let observed = RrEngine::new(&set, onom).cluster_rr(cluster)?.product();
        let est = estimate_tail_area(
            cluster,
            &set,
            onom,
            Statistic::Rr,
            n_sims,
            stream.derive(&format!("sweep/{variant_id}")),
        )?;
        Ok((observed, est))
    };
    match run() {
        Ok((observed, est)) => {
            let corr = tomb_correction(est.p_hat, set.tombs_count);
            SweepRow {
                variant_id: variant_id.to_string(),
                lock_digest: Some(digest),
                observed_rr: Some(observed),
                p_hat: Some(est.p_hat),
                mc_se: Some(est.mc_se),
                bonferroni: Some(corr.bonferroni),
                exact: Some(corr.exact),
                error: None,
            }
        }
        Err(e) => SweepRow::failed(variant_id, Some(digest), e.to_string()),
    }
}

/// One row for the base set followed by one per variant, in input order.
/// Invalid variants yield a row carrying the error; the sweep continues.
pub fn scenario_sweep(
    base: &AssumptionSet,
    variants: &[ScenarioVariant],
    cluster: &Cluster,
    onom: &Onomasticon,
    n_sims: u64,
    stream: SeedStream,
) -> Vec<SweepRow> {
    let mut jobs: Vec<(String, Result<AssumptionSet>)> =
        vec![(BASE_VARIANT.into(), Ok(base.clone()))];
    let mut seen = BTreeSet::from([BASE_VARIANT.to_string()]);
    for v in variants {
        let set = if seen.insert(v.variant_id.clone()) {
            v.apply(base)
        } else {
            Err(Error::InvalidAssumptions(format!(
                "duplicate variant_id {:?}",
                v.variant_id
            )))
        };
        jobs.push((v.variant_id.clone(), set));
    }
    jobs.into_par_iter()
        .map(|(id, set)| sweep_row(&id, set, cluster, onom, n_sims, stream))
        .collect()
}

pub const BOOTSTRAP_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub replicates: Vec<TailAreaEstimate>,
    /// `(probability level, p_hat quantile)` for [`BOOTSTRAP_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
}

/// Linear-interpolation sample quantile (the usual "type 7" definition).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Spread of the tail area over onomasticons resampled from the given one.
pub fn bootstrap_variability(
    cluster: &Cluster,
    assumptions: &AssumptionSet,
    onom: &Onomasticon,
    replicates: u64,
    n_sims: u64,
    stream: SeedStream,
) -> Result<BootstrapSummary> {
    if replicates < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 replicates".into(),
        ));
    }
    let reps = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let resampled =
                onom.bootstrap_resample(&mut stream.derive(&format!("bootstrap/{b}")).rng());
            estimate_tail_area(
                cluster,
                assumptions,
                &resampled,
                Statistic::Rr,
                n_sims,
                stream.derive(&format!("bootstrap/{b}/null")),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut p: Vec<f64> = reps.iter().map(|r| r.p_hat).collect();
    p.sort_by(f64::total_cmp);
    let quantiles = BOOTSTRAP_LEVELS
        .iter()
        .map(|&q| (q, quantile(&p, q)))
        .collect();
    Ok(BootstrapSummary {
        replicates: reps,
        quantiles,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedName {
    pub candidate_id: String,
    pub rendition_id: String,
}

/// Alternative hypothesis: listed inscriptions have their personal slot forced
/// to a candidate's rendition; everything else is drawn from the null.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AlternativeSpec {
    pub planted: Vec<Option<PlantedName>>,
}

impl AlternativeSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn resolve(
        &self,
        assumptions: &AssumptionSet,
        config: &ClusterConfiguration,
        onom: &Onomasticon,
    ) -> Result<Vec<Option<Slot>>> {
        if self.planted.is_empty() {
            return Ok(vec![None; config.inscriptions.len()]);
        }
        if self.planted.len() != config.inscriptions.len() {
            return Err(Error::InvalidAlternative(format!(
                "{} planted entries for {} inscriptions",
                self.planted.len(),
                config.inscriptions.len()
            )));
        }
        self.planted
            .iter()
            .zip(&config.inscriptions)
            .map(|(p, genders)| {
                let Some(p) = p else { return Ok(None) };
                let id = normalize_token(&p.candidate_id);
                let cand = assumptions
                    .candidate(&id)
                    .ok_or_else(|| Error::InvalidAlternative(format!("no candidate {id:?}")))?;
                let spec = &cand.personal;
                let rendition = normalize_token(&p.rendition_id);
                let exists = onom
                    .entry(&spec.generic_id, spec.gender)
                    .is_some_and(|e| e.rendition(&rendition).is_some());
                if !exists {
                    return Err(Error::InvalidAlternative(format!(
                        "rendition {rendition:?} not attested under ({}, {})",
                        spec.generic_id, spec.gender
                    )));
                }
                if assumptions.flags.condition_on_gender && genders[0] != spec.gender {
                    return Err(Error::InvalidAlternative(format!(
                        "candidate {id:?} is {} but the slot is {}",
                        spec.gender, genders[0]
                    )));
                }
                Ok(Some(Slot::new(&spec.generic_id, &rendition, spec.gender)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub clusters: u64,
    pub rejections: u64,
    pub rate: f64,
    pub alpha: f64,
    pub statistic: Statistic,
    pub p_values: Vec<f64>,
}

/// Draw `clusters` observed clusters (null with optional planting) and test
/// each. Level and power studies share draw keys, so an empty alternative
/// reproduces the level study exactly.
#[allow(clippy::too_many_arguments)]
fn rejection_study(
    assumptions: &AssumptionSet,
    plants: &[Option<Slot>],
    config: &ClusterConfiguration,
    onom: &Onomasticon,
    clusters: u64,
    n_sims: u64,
    alpha: f64,
    statistic: Statistic,
    stream: SeedStream,
) -> Result<StudyResult> {
    if clusters < 100 {
        return Err(Error::InvalidArgument(format!(
            "studies need at least 100 clusters, got {clusters}"
        )));
    }
    if n_sims == 0 {
        return Err(Error::InvalidArgument(
            "at least one simulation is required".into(),
        ));
    }
    let model = NullModel::new(assumptions, onom, config.clone())?;
    let p_values = (0..clusters)
        .into_par_iter()
        .map(|m| {
            let mut observed = model.draw(&mut stream.derive(&format!("study/{m}/cluster")).rng());
            for (ins, plant) in observed.inscriptions.iter_mut().zip(plants) {
                if let Some(slot) = plant {
                    ins.slots[0] = slot.clone();
                }
            }
            model
                .tail_area(
                    &observed,
                    statistic,
                    n_sims,
                    stream.derive(&format!("study/{m}/null")),
                )
                .map(|e| e.p_hat)
        })
        .collect::<Result<Vec<_>>>()?;
    let rejections = p_values.iter().filter(|&&p| p <= alpha).count() as u64;
    Ok(StudyResult {
        clusters,
        rejections,
        rate: rejections as f64 / clusters as f64,
        alpha,
        statistic,
        p_values,
    })
}

/// Empirical rejection rate at `alpha` over clusters drawn from the null.
#[allow(clippy::too_many_arguments)]
pub fn level_study(
    assumptions: &AssumptionSet,
    config: &ClusterConfiguration,
    onom: &Onomasticon,
    clusters: u64,
    n_sims: u64,
    alpha: f64,
    statistic: Statistic,
    stream: SeedStream,
) -> Result<StudyResult> {
    let plants = vec![None; config.inscriptions.len()];
    rejection_study(
        assumptions,
        &plants,
        config,
        onom,
        clusters,
        n_sims,
        alpha,
        statistic,
        stream,
    )
}

/// Empirical rejection rate at `alpha` over clusters drawn from a planted
/// alternative.
#[allow(clippy::too_many_arguments)]
pub fn power_study(
    assumptions: &AssumptionSet,
    alt: &AlternativeSpec,
    config: &ClusterConfiguration,
    onom: &Onomasticon,
    clusters: u64,
    n_sims: u64,
    alpha: f64,
    statistic: Statistic,
    stream: SeedStream,
) -> Result<StudyResult> {
    let plants = alt.resolve(assumptions, config, onom)?;
    rejection_study(
        assumptions,
        &plants,
        config,
        onom,
        clusters,
        n_sims,
        alpha,
        statistic,
        stream,
    )
}
