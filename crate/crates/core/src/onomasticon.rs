//! Gender-stratified name lexicon.
//!
//! Every null-distribution proportion in the crate is a ratio of person counts
//! taken from an [`Onomasticon`]. Counts stay integral so that tails can be
//! checked as exact rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::M, Gender::F];

    pub(crate) fn index(self) -> usize {
        match self {
            Gender::M => 0,
            Gender::F => 1,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::M => "M",
            Gender::F => "F",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "M" | "m" => Ok(Gender::M),
            "F" | "f" => Ok(Gender::F),
            other => Err(Error::UnknownGender(other.to_string())),
        }
    }
}

/// Lowercases and collapses internal whitespace. Transliteration is left to
/// whoever produced the data.
pub fn normalize_token(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenditionCell {
    pub rendition_id: Arc<str>,
    pub display: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericNameEntry {
    pub generic_id: Arc<str>,
    pub gender: Gender,
    /// Sorted by `rendition_id`.
    pub renditions: Vec<RenditionCell>,
    pub total: u64,
}

impl GenericNameEntry {
    pub fn rendition(&self, rendition_id: &str) -> Option<&RenditionCell> {
        self.renditions
            .binary_search_by(|c| c.rendition_id.as_ref().cmp(rendition_id))
            .ok()
            .map(|i| &self.renditions[i])
    }
}

/// One row of the onomasticon CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnomasticonRow {
    pub generic_id: String,
    pub gender: String,
    pub rendition_id: String,
    pub display: String,
    pub count: i64,
}

/// Immutable name lexicon keyed by (gender, generic name).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Onomasticon {
    strata: [BTreeMap<Arc<str>, GenericNameEntry>; 2],
    stratum_totals: [u64; 2],
}

impl Onomasticon {
    /// Builds a validated lexicon. Row order is irrelevant: renditions are
    /// stored sorted by id.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = OnomasticonRow>,
    {
        let mut strata: [BTreeMap<Arc<str>, GenericNameEntry>; 2] = Default::default();
        let mut any = false;
        for row in rows {
            any = true;
            let gender: Gender = row.gender.parse()?;
            let generic = normalize_token(&row.generic_id);
            let rendition = normalize_token(&row.rendition_id);
            if row.count < 1 {
                return Err(Error::InvalidCount {
                    generic,
                    gender,
                    rendition,
                    count: row.count,
                });
            }
            let generic: Arc<str> = Arc::from(generic);
            let entry = strata[gender.index()]
                .entry(generic.clone())
                .or_insert_with(|| GenericNameEntry {
                    generic_id: generic.clone(),
                    gender,
                    renditions: Vec::new(),
                    total: 0,
                });
            match entry
                .renditions
                .binary_search_by(|c| c.rendition_id.as_ref().cmp(rendition.as_str()))
            {
                Ok(_) => {
                    return Err(Error::DuplicateRendition {
                        generic: generic.to_string(),
                        gender,
                        rendition,
                    })
                }
                Err(pos) => entry.renditions.insert(
                    pos,
                    RenditionCell {
                        rendition_id: Arc::from(rendition),
                        display: row.display,
                        count: row.count as u64,
                    },
                ),
            }
            entry.total += row.count as u64;
        }
        if !any {
            return Err(Error::EmptyOnomasticon);
        }
        Ok(Self::from_strata(strata))
    }

    fn from_strata(strata: [BTreeMap<Arc<str>, GenericNameEntry>; 2]) -> Self {
        let mut stratum_totals = [0u64; 2];
        for (total, stratum) in stratum_totals.iter_mut().zip(&strata) {
            *total = stratum.values().map(|e| e.total).sum();
        }
        Onomasticon {
            strata,
            stratum_totals,
        }
    }

    /// Reads the `generic_id,gender,rendition_id,display,count` CSV format.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let rows = rdr
            .deserialize::<OnomasticonRow>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn stratum_total(&self, gender: Gender) -> u64 {
        self.stratum_totals[gender.index()]
    }

    pub fn entry(&self, generic_id: &str, gender: Gender) -> Option<&GenericNameEntry> {
        self.strata[gender.index()].get(generic_id)
    }

    pub fn entries(&self, gender: Gender) -> impl Iterator<Item = &GenericNameEntry> {
        self.strata[gender.index()].values()
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &GenericNameEntry> {
        self.strata.iter().flat_map(|s| s.values())
    }

    /// Share of the gender stratum bearing the generic name, as an exact ratio.
    pub fn generic_frequency(&self, generic_id: &str, gender: Gender) -> Result<Ratio<u64>> {
        let entry = self
            .entry(generic_id, gender)
            .ok_or_else(|| Error::MissingGeneric {
                generic: generic_id.to_string(),
                gender,
            })?;
        Ok(Ratio::new(entry.total, self.stratum_total(gender)))
    }

    /// Generic names under which `rendition_id` is attested for `gender`.
    pub fn generics_for_rendition(&self, rendition_id: &str, gender: Gender) -> Vec<Arc<str>> {
        self.entries(gender)
            .filter(|e| e.rendition(rendition_id).is_some())
            .map(|e| e.generic_id.clone())
            .collect()
    }

    /// Adds a previously unseen rendition with a count of one person.
    pub fn with_unknown_rendition(
        &self,
        generic_id: &str,
        gender: Gender,
        rendition_id: &str,
    ) -> Result<Self> {
        let rendition = normalize_token(rendition_id);
        let mut strata = self.strata.clone();
        let entry =
            strata[gender.index()]
                .get_mut(generic_id)
                .ok_or_else(|| Error::MissingGeneric {
                    generic: generic_id.to_string(),
                    gender,
                })?;
        match entry
            .renditions
            .binary_search_by(|c| c.rendition_id.as_ref().cmp(rendition.as_str()))
        {
            Ok(_) => Err(Error::RenditionExists {
                generic: generic_id.to_string(),
                gender,
                rendition,
            }),
            Err(pos) => {
                entry.renditions.insert(
                    pos,
                    RenditionCell {
                        rendition_id: Arc::from(rendition.as_str()),
                        display: rendition.clone(),
                        count: 1,
                    },
                );
                entry.total += 1;
                Ok(Self::from_strata(strata))
            }
        }
    }

    /// Redraws every stratum as a multinomial sample of its own size over the
    /// empirical person distribution. Cells that receive no draws are
    /// dropped; generic entries are kept even at total 0 so that frequency
    /// queries against them return exactly 0.
    pub fn bootstrap_resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut strata = self.strata.clone();
        for gender in Gender::ALL {
            let stratum = &mut strata[gender.index()];
            let total = self.stratum_total(gender);
            let mut cumulative = Vec::new();
            let mut acc = 0u64;
            for entry in stratum.values() {
                for cell in &entry.renditions {
                    acc += cell.count;
                    cumulative.push(acc);
                }
            }
            // With a single cell every draw lands on it; skip the RNG so the
            // result is trivially identical.
            if cumulative.len() <= 1 {
                continue;
            }
            let mut draws = vec![0u64; cumulative.len()];
            for _ in 0..total {
                let u = rng.gen_range(0..total);
                draws[cumulative.partition_point(|&c| c <= u)] += 1;
            }
            let mut draws = draws.into_iter();
            for entry in stratum.values_mut() {
                let mut kept = Vec::with_capacity(entry.renditions.len());
                for mut cell in entry.renditions.drain(..) {
                    let n = draws.next().expect("one draw count per cell");
                    if n > 0 {
                        cell.count = n;
                        kept.push(cell);
                    }
                }
                entry.total = kept.iter().map(|c| c.count).sum();
                entry.renditions = kept;
            }
        }
        Self::from_strata(strata)
    }

    /// Rows in canonical (gender, generic, rendition) order.
    pub fn rows(&self) -> Vec<OnomasticonRow> {
        self.all_entries()
            .flat_map(|e| {
                e.renditions.iter().map(move |c| OnomasticonRow {
                    generic_id: e.generic_id.to_string(),
                    gender: e.gender.to_string(),
                    rendition_id: c.rendition_id.to_string(),
                    display: c.display.clone(),
                    count: c.count as i64,
                })
            })
            .collect()
    }

    /// SHA-256 over the canonical row listing; independent of input row order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for row in self.rows() {
            hasher.update(
                format!(
                    "{}\t{}\t{}\t{}\n",
                    row.gender, row.generic_id, row.rendition_id, row.count
                )
                .as_bytes(),
            );
        }
        hex::encode(hasher.finalize())
    }
}
