//! Monte Carlo null distribution of the cluster statistic, conditioned on the
//! observed cluster's configuration (chain lengths and genders).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assumptions::AssumptionSet;
use crate::error::{Error, Result};
use crate::onomasticon::{Gender, Onomasticon};
use crate::rng::SeedStream;
use crate::rr_engine::{Cluster, Inscription, RrEngine, Slot};

/// Draws per RNG chunk. Fixed so that results are independent of threading.
pub const CHUNK_SIZE: u64 = 4096;

/// Width of the log10 RR histogram bins.
pub const LOG10_BIN_WIDTH: f64 = 0.25;

/// Simulated log RR values within this distance of the observed one count as
/// ties. Distinct rational products of desk-scale counts are much further apart.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterConfiguration {
    /// Per inscription, the genders of its chain, youngest first.
    pub inscriptions: Vec<Vec<Gender>>,
}

impl fmt::Display for ClusterConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .inscriptions
            .iter()
            .map(|g| {
                let genders: Vec<String> = g.iter().map(Gender::to_string).collect();
                format!("({},{})", g.len(), genders.join(" "))
            })
            .collect();
        write!(f, "[{}]", parts.join(","))
    }
}

pub fn extract_configuration(cluster: &Cluster) -> ClusterConfiguration {
    ClusterConfiguration {
        inscriptions: cluster
            .inscriptions
            .iter()
            .map(|i| i.slots.iter().map(|s| s.gender).collect())
            .collect(),
    }
}

struct StratumTable {
    cells: Vec<Slot>,
    cumulative: Vec<u64>,
    total: u64,
}

/// Person-level sampler over an onomasticon: a uniform draw from a gender
/// stratum picks the generic in proportion to its total and the rendition in
/// proportion to its count.
pub struct NullSampler {
    strata: [StratumTable; 2],
}

impl NullSampler {
    pub fn new(onom: &Onomasticon) -> Self {
        let table = |gender: Gender| {
            let mut cells = Vec::new();
            let mut cumulative = Vec::new();
            let mut acc = 0u64;
            for entry in onom.entries(gender) {
                for cell in &entry.renditions {
                    acc += cell.count;
                    cells.push(Slot {
                        generic_id: entry.generic_id.clone(),
                        rendition_id: cell.rendition_id.clone(),
                        gender,
                    });
                    cumulative.push(acc);
                }
            }
            StratumTable {
                cells,
                cumulative,
                total: acc,
            }
        };
        NullSampler {
            strata: [table(Gender::M), table(Gender::F)],
        }
    }

    fn stratum(&self, gender: Gender) -> &StratumTable {
        &self.strata[gender.index()]
    }

    /// Errors unless every stratum the configuration can draw from is
    /// non-empty.
    pub fn check(&self, config: &ClusterConfiguration, condition_on_gender: bool) -> Result<()> {
        for genders in &config.inscriptions {
            for (pos, &g) in genders.iter().enumerate() {
                if pos == 0 && !condition_on_gender {
                    if self.strata.iter().all(|s| s.total == 0) {
                        return Err(Error::EmptyStratum(g));
                    }
                } else if self.stratum(g).total == 0 {
                    return Err(Error::EmptyStratum(g));
                }
            }
        }
        Ok(())
    }

    pub fn sample_slot<R: Rng + ?Sized>(&self, gender: Gender, rng: &mut R) -> Slot {
        let s = self.stratum(gender);
        let u = rng.gen_range(0..s.total);
        s.cells[s.cumulative.partition_point(|&c| c <= u)].clone()
    }

    fn sample_any_gender<R: Rng + ?Sized>(&self, rng: &mut R) -> Slot {
        let m = self.stratum(Gender::M).total;
        let f = self.stratum(Gender::F).total;
        let gender = if rng.gen_range(0..m + f) < m {
            Gender::M
        } else {
            Gender::F
        };
        self.sample_slot(gender, rng)
    }

    /// Independent draws for every slot. Call [`Self::check`] first.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        config: &ClusterConfiguration,
        condition_on_gender: bool,
        rng: &mut R,
    ) -> Cluster {
        let inscriptions = config
            .inscriptions
            .iter()
            .map(|genders| {
                let slots = genders
                    .iter()
                    .enumerate()
                    .map(|(pos, &g)| {
                        if pos == 0 && !condition_on_gender {
                            self.sample_any_gender(rng)
                        } else {
                            self.sample_slot(g, rng)
                        }
                    })
                    .collect();
                Inscription {
                    slots,
                    script: None,
                    raw: None,
                }
            })
            .collect();
        Cluster {
            cluster_id: "simulated".into(),
            inscriptions,
        }
    }
}

/// One simulated cluster with gender conditioning on.
pub fn sample_cluster<R: Rng + ?Sized>(
    config: &ClusterConfiguration,
    onom: &Onomasticon,
    rng: &mut R,
) -> Result<Cluster> {
    let sampler = NullSampler::new(onom);
    sampler.check(config, true)?;
    Ok(sampler.sample(config, true, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Rr,
    Lumped,
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr" => Ok(Statistic::Rr),
            "lumped" => Ok(Statistic::Lumped),
            other => Err(Error::InvalidArgument(format!(
                "unknown statistic {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Rr => "rr",
            Statistic::Lumped => "lumped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Bin `k` covers `[k * bin_width, (k + 1) * bin_width)`.
    pub bins: BTreeMap<i64, u64>,
    /// Simulated clusters that were disqualified outright.
    pub disqualified: u64,
}

impl Histogram {
    fn new(bin_width: f64) -> Self {
        Histogram {
            bin_width,
            bins: BTreeMap::new(),
            disqualified: 0,
        }
    }

    fn add(&mut self, value: f64) {
        if value.is_finite() {
            *self
                .bins
                .entry((value / self.bin_width).floor() as i64)
                .or_default() += 1;
        } else {
            self.disqualified += 1;
        }
    }

    fn merge(mut self, other: Histogram) -> Histogram {
        for (k, v) in other.bins {
            *self.bins.entry(k).or_default() += v;
        }
        self.disqualified += other.disqualified;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailAreaEstimate {
    pub statistic: Statistic,
    /// Observed RR product (`+inf` if disqualified) or lumped count.
    pub observed: f64,
    pub observed_disqualified: bool,
    pub n_sims: u64,
    pub n_hits: u64,
    pub p_hat: f64,
    pub mc_se: f64,
    /// log10 RR for the RR statistic, the count itself for the lumped one.
    pub histogram: Histogram,
    pub seed: u64,
    pub chunk_size: u64,
}

impl TailAreaEstimate {
    fn from_counts(
        statistic: Statistic,
        observed: f64,
        observed_disqualified: bool,
        n_sims: u64,
        n_hits: u64,
        histogram: Histogram,
        stream: SeedStream,
    ) -> Self {
        let p_hat = (n_hits + 1) as f64 / (n_sims + 1) as f64;
        let mc_se = if n_sims == 0 {
            0.0
        } else {
            (p_hat * (1.0 - p_hat) / n_sims as f64).sqrt()
        };
        TailAreaEstimate {
            statistic,
            observed,
            observed_disqualified,
            n_sims,
            n_hits,
            p_hat,
            mc_se,
            histogram,
            seed: stream.seed,
            chunk_size: CHUNK_SIZE,
        }
    }
}

/// Observed value of a statistic in the comparison domain: ln RR for RR,
/// the count for lumped. `None` means disqualified.
fn observed_value(
    engine: &RrEngine<'_>,
    statistic: Statistic,
    cluster: &Cluster,
) -> Result<Option<f64>> {
    if engine.is_disqualified(cluster) {
        return Ok(None);
    }
    Ok(Some(match statistic {
        Statistic::Rr => engine.ln_rr(cluster)?,
        Statistic::Lumped => engine.lumped(cluster) as f64,
    }))
}

/// Null simulation shared by every tail-area consumer.
pub(crate) struct NullModel<'a> {
    pub engine: RrEngine<'a>,
    pub sampler: NullSampler,
    pub config: ClusterConfiguration,
}

impl<'a> NullModel<'a> {
    pub fn new(
        assumptions: &'a AssumptionSet,
        onom: &'a Onomasticon,
        config: ClusterConfiguration,
    ) -> Result<Self> {
        let sampler = NullSampler::new(onom);
        sampler.check(&config, assumptions.flags.condition_on_gender)?;
        Ok(NullModel {
            engine: RrEngine::new(assumptions, onom),
            sampler,
            config,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Cluster {
        self.sampler.sample(
            &self.config,
            self.engine.assumptions().flags.condition_on_gender,
            rng,
        )
    }

    pub fn tail_area(
        &self,
        observed_cluster: &Cluster,
        statistic: Statistic,
        n_sims: u64,
        stream: SeedStream,
    ) -> Result<TailAreaEstimate> {
        let bin_width = match statistic {
            Statistic::Rr => LOG10_BIN_WIDTH,
            Statistic::Lumped => 1.0,
        };
        let Some(observed) = observed_value(&self.engine, statistic, observed_cluster)? else {
            return Ok(TailAreaEstimate::from_counts(
                statistic,
                f64::INFINITY,
                true,
                0,
                0,
                Histogram::new(bin_width),
                stream,
            ));
        };
        let chunks = n_sims.div_ceil(CHUNK_SIZE);
        let (hits, histogram) = (0..chunks)
            .into_par_iter()
            .map(|chunk| -> Result<(u64, Histogram)> {
                let mut rng = stream.chunk_rng(chunk);
                let len = CHUNK_SIZE.min(n_sims - chunk * CHUNK_SIZE);
                let mut hits = 0u64;
                let mut hist = Histogram::new(bin_width);
                for _ in 0..len {
                    let sim = self.draw(&mut rng);
                    match statistic {
                        Statistic::Rr => {
                            let ln = self.engine.ln_rr(&sim)?;
                            if ln <= observed + TIE_TOLERANCE {
                                hits += 1;
                            }
                            hist.add(ln / std::f64::consts::LN_10);
                        }
                        Statistic::Lumped => {
                            if self.engine.is_disqualified(&sim) {
                                hist.add(f64::INFINITY);
                                continue;
                            }
                            let count = self.engine.lumped(&sim) as f64;
                            if count >= observed {
                                hits += 1;
                            }
                            hist.add(count);
                        }
                    }
                }
                Ok((hits, hist))
            })
            .try_reduce(
                || (0, Histogram::new(bin_width)),
                |a, b| Ok((a.0 + b.0, a.1.merge(b.1))),
            )?;
        let reported = match statistic {
            Statistic::Rr => observed.exp(),
            Statistic::Lumped => observed,
        };
        Ok(TailAreaEstimate::from_counts(
            statistic, reported, false, n_sims, hits, histogram, stream,
        ))
    }
}

/// Tail area of the observed cluster's statistic under the configuration-
/// conditioned null. `assumptions` must already be validated against `onom`.
pub fn estimate_tail_area(
    cluster: &Cluster,
    assumptions: &AssumptionSet,
    onom: &Onomasticon,
    statistic: Statistic,
    n_sims: u64,
    stream: SeedStream,
) -> Result<TailAreaEstimate> {
    if n_sims == 0 {
        return Err(Error::InvalidArgument(
            "at least one simulation is required".into(),
        ));
    }
    let engine = RrEngine::new(assumptions, onom);
    if engine.is_disqualified(cluster) {
        // Disqualification closes the question; no null is needed.
        return NullModel {
            engine,
            sampler: NullSampler::new(onom),
            config: extract_configuration(cluster),
        }
        .tail_area(cluster, statistic, n_sims, stream);
    }
    NullModel::new(assumptions, onom, extract_configuration(cluster))?
        .tail_area(cluster, statistic, n_sims, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TombCorrection {
    pub bonferroni: f64,
    pub exact: f64,
}

/// Adjusts a single-tomb tail area for `tombs` comparable tombsites.
pub fn tomb_correction(p_hat: f64, tombs: u64) -> TombCorrection {
    let t = tombs.max(1) as f64;
    TombCorrection {
        bonferroni: (t * p_hat).min(1.0),
        exact: -(t * (-p_hat).ln_1p()).exp_m1(),
    }
}
