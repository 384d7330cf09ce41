//! A priori provisos: candidate individuals, rendition ratings, disqualifier
//! rules and behavioural flags, plus the lock digest that pins them down
//! before any data is scored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::onomasticon::{normalize_token, Gender, GenericNameEntry, Onomasticon};

/// Rating assigned to every rendition a slot does not list.
pub const UNRATED: u32 = 0;

/// Converts nested tiers (rarest first) to integer ratings: the first of `k`
/// tiers gets rating `k`, the last gets 1.
pub fn tiers_to_ratings<S: AsRef<str>>(tiers: &[Vec<S>]) -> Result<BTreeMap<String, u32>> {
    let mut ratings = BTreeMap::new();
    let k = tiers.len() as u32;
    for (idx, tier) in tiers.iter().enumerate() {
        for rendition in tier {
            let id = normalize_token(rendition.as_ref());
            if ratings.insert(id.clone(), k - idx as u32).is_some() {
                return Err(Error::OverlappingTiers { rendition: id });
            }
        }
    }
    Ok(ratings)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SlotSpecFile {
    generic_id: String,
    gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tiers: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratings: Option<BTreeMap<String, u32>>,
}

/// A candidate's expectation for one position of a name chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SlotSpecFile")]
pub struct SlotSpec {
    pub generic_id: String,
    pub gender: Gender,
    /// Higher is rarer and more relevant. Absent renditions rate [`UNRATED`].
    pub ratings: BTreeMap<String, u32>,
}

impl TryFrom<SlotSpecFile> for SlotSpec {
    type Error = Error;

    fn try_from(file: SlotSpecFile) -> Result<Self> {
        let ratings = match (file.tiers, file.ratings) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidAssumptions(format!(
                    "slot {} gives both tiers and ratings",
                    file.generic_id
                )))
            }
            (Some(tiers), None) => tiers_to_ratings(&tiers)?,
            (None, Some(r)) => r
                .into_iter()
                .map(|(k, v)| (normalize_token(&k), v))
                .collect(),
            (None, None) => BTreeMap::new(),
        };
        Ok(SlotSpec {
            generic_id: normalize_token(&file.generic_id),
            gender: file.gender,
            ratings,
        })
    }
}

impl SlotSpec {
    pub fn generic(generic_id: &str, gender: Gender) -> Self {
        SlotSpec {
            generic_id: normalize_token(generic_id),
            gender,
            ratings: BTreeMap::new(),
        }
    }

    pub fn with_tiers<S: AsRef<str>>(mut self, tiers: &[Vec<S>]) -> Result<Self> {
        self.ratings = tiers_to_ratings(tiers)?;
        Ok(self)
    }

    pub fn with_ratings<I, S>(mut self, ratings: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: AsRef<str>,
    {
        self.ratings = ratings
            .into_iter()
            .map(|(k, v)| (normalize_token(k.as_ref()), v))
            .collect();
        self
    }

    pub fn rating(&self, rendition_id: &str) -> u32 {
        self.ratings.get(rendition_id).copied().unwrap_or(UNRATED)
    }

    /// Persons in `entry` whose rendition is rated at least as high as
    /// `rendition_id`.
    pub fn qualifying_count(&self, entry: &GenericNameEntry, rendition_id: &str) -> u64 {
        let threshold = self.rating(rendition_id);
        entry
            .renditions
            .iter()
            .filter(|c| self.rating(&c.rendition_id) >= threshold)
            .map(|c| c.count)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    #[serde(default)]
    pub label: String,
    pub personal: SlotSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patronym: Option<SlotSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grandpatronym: Option<SlotSpec>,
}

impl Candidate {
    pub fn new(candidate_id: &str, personal: SlotSpec) -> Self {
        Candidate {
            candidate_id: normalize_token(candidate_id),
            label: String::new(),
            personal,
            patronym: None,
            grandpatronym: None,
        }
    }

    pub fn with_patronym(mut self, patronym: SlotSpec) -> Self {
        self.patronym = Some(patronym);
        self
    }

    /// Specified slots, youngest first.
    pub fn slots(&self) -> impl Iterator<Item = &SlotSpec> {
        std::iter::once(&self.personal)
            .chain(self.patronym.as_ref())
            .chain(self.grandpatronym.as_ref())
    }

    pub(crate) fn slots_mut(&mut self) -> impl Iterator<Item = &mut SlotSpec> {
        std::iter::once(&mut self.personal)
            .chain(self.patronym.as_mut())
            .chain(self.grandpatronym.as_mut())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NamePattern {
    pub generic_id: String,
    pub gender: Gender,
}

impl NamePattern {
    pub fn new(generic_id: &str, gender: Gender) -> Self {
        NamePattern {
            generic_id: normalize_token(generic_id),
            gender,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Factor(f64),
    Hard,
}

impl Serialize for Penalty {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Penalty::Factor(f) => s.serialize_f64(*f),
            Penalty::Hard => s.serialize_str("hard"),
        }
    }
}

impl<'de> Deserialize<'de> for Penalty {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Factor(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Factor(f) => Ok(Penalty::Factor(f)),
            Repr::Word(w) if w.eq_ignore_ascii_case("hard") => Ok(Penalty::Hard),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "penalty must be a number or \"hard\", got {w:?}"
            ))),
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Penalty::Factor(x) => write!(f, "{x}"),
            Penalty::Hard => f.write_str("hard"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisqualifierRule {
    pub personal: NamePattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patronym: Option<NamePattern>,
    pub penalty: Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Flags {
    pub distinct_individuals: bool,
    pub condition_on_gender: bool,
    pub chain_youngest_neutral: bool,
    pub unknown_floor: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            distinct_individuals: true,
            condition_on_gender: true,
            chain_youngest_neutral: true,
            unknown_floor: true,
        }
    }
}

fn default_tombs() -> u64 {
    1
}

fn default_sims() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSet {
    #[serde(default)]
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub disqualifiers: Vec<DisqualifierRule>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default = "default_tombs")]
    pub tombs_count: u64,
    #[serde(default = "default_sims")]
    pub mc_sims: u64,
}

impl Default for AssumptionSet {
    fn default() -> Self {
        AssumptionSet {
            candidates: Vec::new(),
            disqualifiers: Vec::new(),
            flags: Flags::default(),
            tombs_count: default_tombs(),
            mc_sims: default_sims(),
        }
    }
}

impl AssumptionSet {
    pub fn with_candidates(candidates: Vec<Candidate>) -> Self {
        AssumptionSet {
            candidates,
            ..Default::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut set: AssumptionSet = serde_json::from_str(text)?;
        set.normalize();
        set.check_structure()?;
        Ok(set)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("assumption sets always serialize")
    }

    fn normalize(&mut self) {
        for c in &mut self.candidates {
            c.candidate_id = normalize_token(&c.candidate_id);
            for slot in c.slots_mut() {
                slot.generic_id = normalize_token(&slot.generic_id);
            }
        }
        for d in &mut self.disqualifiers {
            d.personal.generic_id = normalize_token(&d.personal.generic_id);
            if let Some(p) = &mut d.patronym {
                p.generic_id = normalize_token(&p.generic_id);
            }
        }
    }

    /// Invariants that hold independently of any onomasticon.
    pub fn check_structure(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for c in &self.candidates {
            if !ids.insert(c.candidate_id.as_str()) {
                return Err(Error::InvalidAssumptions(format!(
                    "duplicate candidate_id {:?}",
                    c.candidate_id
                )));
            }
            if c.grandpatronym.is_some() && c.patronym.is_none() {
                return Err(Error::InvalidAssumptions(format!(
                    "candidate {:?} has a grandpatronym without a patronym",
                    c.candidate_id
                )));
            }
        }
        for d in &self.disqualifiers {
            if let Penalty::Factor(f) = d.penalty {
                if !(f > 1.0 && f.is_finite()) {
                    return Err(Error::InvalidAssumptions(format!(
                        "finite disqualifier penalty must exceed 1, got {f}"
                    )));
                }
            }
        }
        if self.tombs_count < 1 {
            return Err(Error::InvalidAssumptions(
                "tombs_count must be at least 1".into(),
            ));
        }
        if self.mc_sims < 1000 {
            return Err(Error::InvalidAssumptions(format!(
                "mc_sims must be at least 1000, got {}",
                self.mc_sims
            )));
        }
        Ok(())
    }

    pub fn candidate(&self, candidate_id: &str) -> Option<&Candidate> {
        self.candidates
            .iter()
            .find(|c| c.candidate_id == candidate_id)
    }

    /// Canonical JSON: sorted keys, candidates ordered by id, disqualifiers
    /// ordered by their own canonical text.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("assumption sets always serialize");
        let obj = value.as_object_mut().expect("struct serializes to object");
        if let Some(serde_json::Value::Array(cands)) = obj.get_mut("candidates") {
            cands.sort_by_key(|c| c["candidate_id"].as_str().unwrap_or_default().to_string());
        }
        if let Some(serde_json::Value::Array(dq)) = obj.get_mut("disqualifiers") {
            dq.sort_by_cached_key(|d| d.to_string());
        }
        value.to_string()
    }

    /// Hex SHA-256 digest of [`Self::canonical_json`].
    pub fn lock_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Format of a lockfile line: `<digest>  <filename>`.
pub fn lockfile_line(digest: &str, filename: &str) -> String {
    format!("{digest}  {filename}\n")
}

/// Digest from the first non-empty line of a lockfile.
pub fn parse_lockfile(text: &str) -> Option<&str> {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| l.split_whitespace().next())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Fatal,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// The onomasticon with any unknown renditions injected at count 1.
    pub onomasticon: Onomasticon,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.iter().all(|f| f.severity != Severity::Fatal)
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Fatal)
    }
}

/// Checks assumptions against a lexicon. Never fails; problems come back as
/// findings.
pub fn validate(assumptions: &AssumptionSet, onom: &Onomasticon) -> ValidationReport {
    let mut findings = Vec::new();
    let mut fatal = |message: String| {
        findings.push(Finding {
            severity: Severity::Fatal,
            message,
        })
    };
    if let Err(e) = assumptions.check_structure() {
        fatal(e.to_string());
    }
    let mut injected: Vec<(String, Gender, String)> = Vec::new();
    for c in &assumptions.candidates {
        for (pos, slot) in c.slots().enumerate() {
            if pos > 0 && slot.gender != Gender::M {
                fatal(format!(
                    "candidate {:?}: patronymic slots must be M",
                    c.candidate_id
                ));
            }
            if onom.stratum_total(slot.gender) == 0 {
                fatal(format!(
                    "candidate {:?} references the empty {} stratum",
                    c.candidate_id, slot.gender
                ));
                continue;
            }
            let Some(entry) = onom.entry(&slot.generic_id, slot.gender) else {
                fatal(format!(
                    "candidate {:?} references unknown generic ({}, {})",
                    c.candidate_id, slot.generic_id, slot.gender
                ));
                continue;
            };
            for rendition in slot.ratings.keys() {
                if entry.rendition(rendition).is_some() {
                    continue;
                }
                if assumptions.flags.unknown_floor {
                    let key = (slot.generic_id.clone(), slot.gender, rendition.clone());
                    if !injected.contains(&key) {
                        injected.push(key);
                    }
                } else {
                    fatal(format!(
                        "candidate {:?}: rated rendition {:?} missing from ({}, {})",
                        c.candidate_id, rendition, slot.generic_id, slot.gender
                    ));
                }
            }
        }
    }
    for d in &assumptions.disqualifiers {
        for p in std::iter::once(&d.personal).chain(d.patronym.as_ref()) {
            if onom.entry(&p.generic_id, p.gender).is_none() {
                fatal(format!(
                    "disqualifier references unknown generic ({}, {})",
                    p.generic_id, p.gender
                ));
            }
        }
    }
    let mut onomasticon = onom.clone();
    for (generic, gender, rendition) in injected {
        onomasticon = onomasticon
            .with_unknown_rendition(&generic, gender, &rendition)
            .expect("rendition checked absent");
        findings.push(Finding {
            severity: Severity::Info,
            message: format!(
                "rendition {rendition:?} of ({generic}, {gender}) injected at count 1"
            ),
        });
    }
    ValidationReport {
        findings,
        onomasticon,
    }
}

/// Conditional tail within the generic name for every attested rendition.
pub fn rating_tail_table(
    slot: &SlotSpec,
    onom: &Onomasticon,
) -> Result<BTreeMap<String, Ratio<u64>>> {
    let entry = onom
        .entry(&slot.generic_id, slot.gender)
        .ok_or_else(|| Error::MissingGeneric {
            generic: slot.generic_id.clone(),
            gender: slot.gender,
        })?;
    if entry.total == 0 {
        return Ok(BTreeMap::new());
    }
    Ok(entry
        .renditions
        .iter()
        .map(|c| {
            let qualifying = slot.qualifying_count(entry, &c.rendition_id);
            (
                c.rendition_id.to_string(),
                Ratio::new(qualifying, entry.total),
            )
        })
        .collect())
}
