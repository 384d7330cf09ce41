//! RR (rareness-and-relevance) scoring of an inscription cluster.
//!
//! A slot matched by a candidate scores the share of its gender stratum that
//! bears the same generic name under a rendition rated at least as high as the
//! observed one. Inscriptions score the product over the candidate's slots,
//! unmatched inscriptions score 1, and the cluster scores the product under
//! the cheapest admissible candidate assignment.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::assignment::{max_matching, min_cost_assignment};
use crate::assumptions::{
    AssumptionSet, Candidate, DisqualifierRule, NamePattern, Penalty, SlotSpec,
};
use crate::error::{Error, Result};
use crate::onomasticon::{normalize_token, Gender, GenericNameEntry, Onomasticon};

pub const MAX_CHAIN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot {
    pub generic_id: Arc<str>,
    pub rendition_id: Arc<str>,
    pub gender: Gender,
}

impl Slot {
    pub fn new(generic_id: &str, rendition_id: &str, gender: Gender) -> Self {
        Slot {
            generic_id: Arc::from(normalize_token(generic_id)),
            rendition_id: Arc::from(normalize_token(rendition_id)),
            gender,
        }
    }

    fn matches(&self, pattern: &NamePattern) -> bool {
        self.gender == pattern.gender && *self.generic_id == *pattern.generic_id
    }
}

/// Name chain, youngest first. `script` and `raw` never affect a statistic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inscription {
    pub slots: Vec<Slot>,
    pub script: Option<String>,
    pub raw: Option<String>,
}

impl Inscription {
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        if slots.is_empty() || slots.len() > MAX_CHAIN {
            return Err(Error::InvalidCluster(format!(
                "chain length must be 1..={MAX_CHAIN}, got {}",
                slots.len()
            )));
        }
        if slots[1..].iter().any(|s| s.gender != Gender::M) {
            return Err(Error::InvalidCluster("patronymic slots must be M".into()));
        }
        Ok(Inscription {
            slots,
            script: None,
            raw: None,
        })
    }

    pub fn single(generic_id: &str, rendition_id: &str, gender: Gender) -> Self {
        Inscription::new(vec![Slot::new(generic_id, rendition_id, gender)])
            .expect("single slot is always valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub cluster_id: String,
    pub inscriptions: Vec<Inscription>,
}

impl Cluster {
    pub fn new(cluster_id: impl Into<String>, inscriptions: Vec<Inscription>) -> Result<Self> {
        if inscriptions.is_empty() {
            return Err(Error::InvalidCluster(
                "a cluster needs at least one inscription".into(),
            ));
        }
        Ok(Cluster {
            cluster_id: cluster_id.into(),
            inscriptions,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic_id: Option<String>,
    pub rendition_id: String,
    pub gender: Gender,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InscriptionFile {
    pub slots: Vec<SlotFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

/// On-disk cluster. Slots may omit `generic_id`, in which case it is looked
/// up from the onomasticon by rendition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterFile {
    pub cluster_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub inscriptions: Vec<InscriptionFile>,
}

impl ClusterFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves generics against `onom`. Renditions with an explicit generic
    /// that the lexicon lacks are injected at count 1 when `unknown_floor`
    /// is set; the returned lexicon carries those injections.
    pub fn resolve(
        &self,
        onom: &Onomasticon,
        unknown_floor: bool,
    ) -> Result<(Cluster, Onomasticon)> {
        let mut onom = onom.clone();
        let mut inscriptions = Vec::with_capacity(self.inscriptions.len());
        for ins in &self.inscriptions {
            let mut slots = Vec::with_capacity(ins.slots.len());
            for s in &ins.slots {
                let rendition = normalize_token(&s.rendition_id);
                let generic = match &s.generic_id {
                    Some(g) => {
                        let g = normalize_token(g);
                        let entry =
                            onom.entry(&g, s.gender)
                                .ok_or_else(|| Error::MissingGeneric {
                                    generic: g.clone(),
                                    gender: s.gender,
                                })?;
                        if entry.rendition(&rendition).is_none() {
                            if !unknown_floor {
                                return Err(Error::MissingRendition {
                                    generic: g,
                                    gender: s.gender,
                                    rendition,
                                });
                            }
                            onom = onom.with_unknown_rendition(&g, s.gender, &rendition)?;
                        }
                        g
                    }
                    None => {
                        let found = onom.generics_for_rendition(&rendition, s.gender);
                        match found.as_slice() {
                            [one] => one.to_string(),
                            [] => {
                                return Err(Error::InvalidCluster(format!(
                                    "rendition {rendition:?} ({}) not in the onomasticon; give its generic_id",
                                    s.gender
                                )))
                            }
                            _ => {
                                return Err(Error::AmbiguousRendition {
                                    rendition,
                                    gender: s.gender,
                                    candidates: found.iter().map(|g| g.to_string()).collect(),
                                })
                            }
                        }
                    }
                };
                slots.push(Slot::new(&generic, &rendition, s.gender));
            }
            let mut inscription = Inscription::new(slots)?;
            inscription.script = ins.script.clone();
            inscription.raw = ins.raw.clone();
            inscriptions.push(inscription);
        }
        Ok((Cluster::new(self.cluster_id.clone(), inscriptions)?, onom))
    }
}

/// Exact slot score, or `None` when the slot's generic/gender differ from the
/// spec's.
pub fn slot_rr(
    spec: &SlotSpec,
    slot: &Slot,
    onom: &Onomasticon,
    unknown_floor: bool,
) -> Result<Option<Ratio<u64>>> {
    if slot.gender != spec.gender || *slot.generic_id != *spec.generic_id {
        return Ok(None);
    }
    let entry = onom
        .entry(&spec.generic_id, spec.gender)
        .ok_or_else(|| Error::MissingGeneric {
            generic: spec.generic_id.clone(),
            gender: spec.gender,
        })?;
    let qualifying = qualifying_persons(spec, entry, &slot.rendition_id, unknown_floor)?;
    Ok(Some(Ratio::new(
        qualifying,
        onom.stratum_total(spec.gender),
    )))
}

/// A rendition the lexicon has never seen counts as at most one person.
fn qualifying_persons(
    spec: &SlotSpec,
    entry: &GenericNameEntry,
    rendition: &str,
    unknown_floor: bool,
) -> Result<u64> {
    let qualifying = spec.qualifying_count(entry, rendition);
    if entry.rendition(rendition).is_some() {
        return Ok(qualifying);
    }
    if unknown_floor {
        Ok(qualifying.max(1))
    } else {
        Err(Error::MissingRendition {
            generic: entry.generic_id.to_string(),
            gender: entry.gender,
            rendition: rendition.to_string(),
        })
    }
}

/// Product of slot scores over the slots `candidate` specifies, aligned
/// youngest to youngest. Inscription slots the candidate leaves unspecified
/// contribute 1.
pub fn inscription_rr(
    candidate: &Candidate,
    inscription: &Inscription,
    onom: &Onomasticon,
    unknown_floor: bool,
) -> Result<Option<Ratio<u128>>> {
    if candidate.slots().count() > inscription.slots.len() {
        return Ok(None);
    }
    let mut acc = Ratio::<u128>::one();
    for (spec, slot) in candidate.slots().zip(&inscription.slots) {
        match slot_rr(spec, slot, onom, unknown_floor)? {
            Some(r) => acc *= Ratio::new(*r.numer() as u128, *r.denom() as u128),
            None => return Ok(None),
        }
    }
    Ok(Some(acc))
}

/// Indices of inscriptions that are the youngest member of an
/// "A son of B son of C" chain: `[a|b]` such that another inscription reads
/// `[b'|c]` with `b'` of the same generic name as `b`.
pub fn find_generational_chains(cluster: &Cluster, enabled: bool) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if !enabled {
        return out;
    }
    let ins = &cluster.inscriptions;
    for (i, a) in ins.iter().enumerate() {
        let Some(father) = a.slots.get(1) else {
            continue;
        };
        let linked = ins.iter().enumerate().any(|(j, b)| {
            j != i
                && b.slots.len() >= 2
                && b.slots[0].gender == father.gender
                && b.slots[0].generic_id == father.generic_id
        });
        if linked {
            out.insert(i);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyHit {
    pub inscription: usize,
    pub rule: usize,
    /// `None` for a hard disqualification.
    pub factor: Option<f64>,
}

/// Per-inscription outcome of scoring a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct RRBreakdown {
    /// Match factors in (0, 1]; 1 for Other and for neutralized inscriptions.
    pub factors: Vec<f64>,
    pub exact_factors: Vec<Ratio<u128>>,
    pub assignment: Vec<Option<String>>,
    pub neutralized: BTreeSet<usize>,
    pub penalties: Vec<PenaltyHit>,
    /// Product of finite penalty factors (1 when none hit).
    pub penalty: f64,
    pub disqualified: bool,
    /// Natural log of the cluster product; `+inf` when disqualified.
    pub ln_product: f64,
}

impl RRBreakdown {
    /// Cluster RR, with `+inf` standing for a disqualified cluster.
    pub fn product(&self) -> f64 {
        if self.disqualified {
            f64::INFINITY
        } else {
            self.ln_product.exp()
        }
    }

    pub fn log10_product(&self) -> f64 {
        self.ln_product / std::f64::consts::LN_10
    }

    /// Exact product of the match factors (penalties excluded).
    pub fn exact_match_product(&self) -> BigRational {
        let mut acc = Ratio::<BigUint>::one();
        for f in &self.exact_factors {
            acc *= Ratio::new(BigUint::from(*f.numer()), BigUint::from(*f.denom()));
        }
        BigRational::new(acc.numer().clone().into(), acc.denom().clone().into())
    }
}

struct CompiledSlot {
    spec: SlotSpec,
    /// rendition -> ln(qualifying / stratum total)
    table: HashMap<Arc<str>, f64>,
}

struct CompiledCandidate {
    slots: Vec<CompiledSlot>,
}

struct Evaluation {
    neutralized: BTreeSet<usize>,
    /// `(row inscription, chosen candidate, ln factor)`
    chosen: Vec<(usize, usize, f64)>,
    penalties: Vec<PenaltyHit>,
    disqualified: bool,
}

/// Scoring pipeline compiled against one assumption set and lexicon. Observed
/// and simulated clusters go through the same code.
pub struct RrEngine<'a> {
    assumptions: &'a AssumptionSet,
    onom: &'a Onomasticon,
    candidates: Vec<CompiledCandidate>,
}

impl<'a> RrEngine<'a> {
    pub fn new(assumptions: &'a AssumptionSet, onom: &'a Onomasticon) -> Self {
        let candidates = assumptions
            .candidates
            .iter()
            .map(|c| CompiledCandidate {
                slots: c
                    .slots()
                    .map(|spec| {
                        let total = onom.stratum_total(spec.gender) as f64;
                        let table = onom
                            .entry(&spec.generic_id, spec.gender)
                            .map(|entry| {
                                entry
                                    .renditions
                                    .iter()
                                    .map(|cell| {
                                        let q = spec.qualifying_count(entry, &cell.rendition_id);
                                        (cell.rendition_id.clone(), (q as f64 / total).ln())
                                    })
                                    .collect()
                            })
                            .unwrap_or_default();
                        CompiledSlot {
                            spec: spec.clone(),
                            table,
                        }
                    })
                    .collect(),
            })
            .collect();
        RrEngine {
            assumptions,
            onom,
            candidates,
        }
    }

    pub fn assumptions(&self) -> &AssumptionSet {
        self.assumptions
    }

    pub fn onomasticon(&self) -> &Onomasticon {
        self.onom
    }

    fn slot_ln(&self, compiled: &CompiledSlot, slot: &Slot) -> Result<Option<f64>> {
        let spec = &compiled.spec;
        if slot.gender != spec.gender || *slot.generic_id != *spec.generic_id {
            return Ok(None);
        }
        if let Some(&ln) = compiled.table.get(&slot.rendition_id) {
            return Ok(Some(ln));
        }
        let r = slot_rr(spec, slot, self.onom, self.assumptions.flags.unknown_floor)?
            .expect("generic checked above");
        Ok(Some((*r.numer() as f64 / *r.denom() as f64).ln()))
    }

    fn candidate_ln(
        &self,
        c: &CompiledCandidate,
        inscription: &Inscription,
    ) -> Result<Option<f64>> {
        if c.slots.len() > inscription.slots.len() {
            return Ok(None);
        }
        let mut acc = 0.0;
        for (compiled, slot) in c.slots.iter().zip(&inscription.slots) {
            match self.slot_ln(compiled, slot)? {
                Some(ln) => acc += ln,
                None => return Ok(None),
            }
        }
        Ok(Some(acc))
    }

    fn pattern_match(c: &CompiledCandidate, inscription: &Inscription) -> bool {
        c.slots.len() <= inscription.slots.len()
            && c.slots
                .iter()
                .zip(&inscription.slots)
                .all(|(cs, s)| s.gender == cs.spec.gender && *s.generic_id == *cs.spec.generic_id)
    }

    fn rule_hits(rule: &DisqualifierRule, inscription: &Inscription) -> bool {
        inscription.slots[0].matches(&rule.personal)
            && rule
                .patronym
                .as_ref()
                .is_none_or(|p| inscription.slots.get(1).is_some_and(|s| s.matches(p)))
    }

    fn evaluate(&self, cluster: &Cluster) -> Result<Evaluation> {
        let flags = &self.assumptions.flags;
        let neutralized = find_generational_chains(cluster, flags.chain_youngest_neutral);
        let rows: Vec<usize> = (0..cluster.inscriptions.len())
            .filter(|i| !neutralized.contains(i))
            .collect();
        let mut matrix = Vec::with_capacity(rows.len());
        for &i in &rows {
            let ins = &cluster.inscriptions[i];
            let row = self
                .candidates
                .iter()
                .map(|c| self.candidate_ln(c, ins))
                .collect::<Result<Vec<_>>>()?;
            matrix.push(row);
        }

        let picks: Vec<Option<usize>> = if flags.distinct_individuals {
            min_cost_assignment(&matrix, self.candidates.len())
        } else {
            matrix
                .iter()
                .map(|row| {
                    let mut best: Option<(usize, f64)> = None;
                    for (j, c) in row.iter().enumerate() {
                        if let Some(c) = *c {
                            if c < 0.0 && best.is_none_or(|(_, b)| c < b) {
                                best = Some((j, c));
                            }
                        }
                    }
                    best.map(|(j, _)| j)
                })
                .collect()
        };
        let chosen = picks
            .iter()
            .enumerate()
            .filter_map(|(r, p)| {
                p.map(|j| (rows[r], j, matrix[r][j].expect("picked cells are allowed")))
            })
            .collect();

        let mut penalties = Vec::new();
        let mut disqualified = false;
        for (i, ins) in cluster.inscriptions.iter().enumerate() {
            for (k, rule) in self.assumptions.disqualifiers.iter().enumerate() {
                if Self::rule_hits(rule, ins) {
                    let factor = match rule.penalty {
                        Penalty::Factor(f) => Some(f),
                        Penalty::Hard => {
                            disqualified = true;
                            None
                        }
                    };
                    penalties.push(PenaltyHit {
                        inscription: i,
                        rule: k,
                        factor,
                    });
                }
            }
        }
        Ok(Evaluation {
            neutralized,
            chosen,
            penalties,
            disqualified,
        })
    }

    fn ln_of(eval: &Evaluation) -> f64 {
        if eval.disqualified {
            return f64::INFINITY;
        }
        let matched: f64 = eval.chosen.iter().map(|&(_, _, ln)| ln).sum();
        let penalty: f64 = eval
            .penalties
            .iter()
            .filter_map(|p| p.factor)
            .map(f64::ln)
            .sum();
        matched + penalty
    }

    /// Natural log of the cluster RR; `+inf` when disqualified.
    pub fn ln_rr(&self, cluster: &Cluster) -> Result<f64> {
        Ok(Self::ln_of(&self.evaluate(cluster)?))
    }

    pub fn cluster_rr(&self, cluster: &Cluster) -> Result<RRBreakdown> {
        let eval = self.evaluate(cluster)?;
        let n = cluster.inscriptions.len();
        let mut factors = vec![1.0; n];
        let mut exact_factors = vec![Ratio::<u128>::one(); n];
        let mut assignment = vec![None; n];
        let floor = self.assumptions.flags.unknown_floor;
        for &(i, j, _) in &eval.chosen {
            let candidate = &self.assumptions.candidates[j];
            let exact = inscription_rr(candidate, &cluster.inscriptions[i], self.onom, floor)?
                .expect("chosen candidates match");
            factors[i] = exact.to_f64().expect("ratio of integers");
            exact_factors[i] = exact;
            assignment[i] = Some(candidate.candidate_id.clone());
        }
        let penalty = eval.penalties.iter().filter_map(|p| p.factor).product();
        Ok(RRBreakdown {
            factors,
            exact_factors,
            assignment,
            ln_product: Self::ln_of(&eval),
            neutralized: eval.neutralized,
            penalties: eval.penalties,
            penalty,
            disqualified: eval.disqualified,
        })
    }

    /// Number of candidates matched by generic name alone, under the same
    /// injectivity and chain rules as the RR statistic.
    pub fn lumped(&self, cluster: &Cluster) -> usize {
        let neutralized =
            find_generational_chains(cluster, self.assumptions.flags.chain_youngest_neutral);
        let allowed: Vec<Vec<bool>> = cluster
            .inscriptions
            .iter()
            .enumerate()
            .filter(|(i, _)| !neutralized.contains(i))
            .map(|(_, ins)| {
                self.candidates
                    .iter()
                    .map(|c| Self::pattern_match(c, ins))
                    .collect()
            })
            .collect();
        if self.assumptions.flags.distinct_individuals {
            max_matching(&allowed, self.candidates.len())
        } else {
            (0..self.candidates.len())
                .filter(|&j| allowed.iter().any(|row| row[j]))
                .count()
        }
    }

    pub fn is_disqualified(&self, cluster: &Cluster) -> bool {
        cluster.inscriptions.iter().any(|ins| {
            self.assumptions
                .disqualifiers
                .iter()
                .any(|r| r.penalty == Penalty::Hard && Self::rule_hits(r, ins))
        })
    }
}

pub fn cluster_rr(
    cluster: &Cluster,
    assumptions: &AssumptionSet,
    onom: &Onomasticon,
) -> Result<RRBreakdown> {
    RrEngine::new(assumptions, onom).cluster_rr(cluster)
}

pub fn lumped_statistic(
    cluster: &Cluster,
    assumptions: &AssumptionSet,
    onom: &Onomasticon,
) -> usize {
    RrEngine::new(assumptions, onom).lumped(cluster)
}
