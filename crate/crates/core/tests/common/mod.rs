//! Shared generators and brute-force oracles for the integration tests.
//!
//! The oracles recount everything from raw lexicon cells with exact
//! rationals and search assignments exhaustively; they share no scoring code
//! with the library.

#![allow(dead_code)]

pub mod cli;
pub mod invariants;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use surprise_rr::onomasticon::OnomasticonRow;
use surprise_rr::{
    AssumptionSet, Candidate, Cluster, Gender, Inscription, Onomasticon, Slot, SlotSpec,
};

/// One lexicon cell: (generic, gender, rendition, count).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub generic: String,
    pub gender: Gender,
    pub rendition: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub cells: Vec<Cell>,
}

impl Lexicon {
    pub fn from_csv(text: &str) -> Self {
        let mut cells = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            cells.push(Cell {
                generic: f[0].trim().to_string(),
                gender: f[1].trim().parse().unwrap(),
                rendition: f[2].trim().to_string(),
                count: f[4].trim().parse().unwrap(),
            });
        }
        Lexicon { cells }
    }

    pub fn onomasticon(&self) -> Onomasticon {
        Onomasticon::from_rows(self.cells.iter().map(|c| OnomasticonRow {
            generic_id: c.generic.clone(),
            gender: c.gender.to_string(),
            rendition_id: c.rendition.clone(),
            display: c.rendition.clone(),
            count: c.count as i64,
        }))
        .unwrap()
    }

    pub fn stratum_total(&self, g: Gender) -> u64 {
        self.cells
            .iter()
            .filter(|c| c.gender == g)
            .map(|c| c.count)
            .sum()
    }

    pub fn stratum(&self, g: Gender) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.gender == g).collect()
    }
}

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Exact score of `cand` on `ins`, `None` if the names do not line up.
pub fn oracle_factor(lex: &Lexicon, cand: &Candidate, ins: &Inscription) -> Option<BigRational> {
    let specs: Vec<&SlotSpec> = cand.slots().collect();
    if specs.len() > ins.slots.len() {
        return None;
    }
    let mut acc = BigRational::one();
    for (spec, slot) in specs.iter().zip(&ins.slots) {
        if spec.gender != slot.gender || spec.generic_id != *slot.generic_id {
            return None;
        }
        let rate = |r: &str| spec.ratings.get(r).copied().unwrap_or(0);
        let observed = rate(&slot.rendition_id);
        let qualifying: u64 = lex
            .cells
            .iter()
            .filter(|c| {
                c.gender == spec.gender
                    && c.generic == spec.generic_id
                    && rate(&c.rendition) >= observed
            })
            .map(|c| c.count)
            .sum();
        acc *= ratio(qualifying, lex.stratum_total(spec.gender));
    }
    Some(acc)
}

/// Youngest members of father-son chains, recomputed from scratch.
pub fn oracle_neutral(cluster: &Cluster, enabled: bool) -> Vec<bool> {
    let ins = &cluster.inscriptions;
    (0..ins.len())
        .map(|i| {
            enabled
                && ins[i].slots.len() >= 2
                && (0..ins.len()).any(|j| {
                    j != i
                        && ins[j].slots.len() >= 2
                        && ins[j].slots[0].generic_id == ins[i].slots[1].generic_id
                        && ins[j].slots[0].gender == ins[i].slots[1].gender
                })
        })
        .collect()
}

fn min_product(
    scores: &[Vec<Option<BigRational>>],
    row: usize,
    used: &mut Vec<bool>,
) -> BigRational {
    if row == scores.len() {
        return BigRational::one();
    }
    let mut best = min_product(scores, row + 1, used);
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        if let Some(s) = &scores[row][j] {
            used[j] = true;
            let v = s * min_product(scores, row + 1, used);
            used[j] = false;
            if v < best {
                best = v;
            }
        }
    }
    best
}

fn score_matrix(
    lex: &Lexicon,
    set: &AssumptionSet,
    cluster: &Cluster,
) -> Vec<Vec<Option<BigRational>>> {
    let neutral = oracle_neutral(cluster, set.flags.chain_youngest_neutral);
    cluster
        .inscriptions
        .iter()
        .zip(&neutral)
        .filter(|(_, &n)| !n)
        .map(|(ins, _)| {
            set.candidates
                .iter()
                .map(|c| oracle_factor(lex, c, ins))
                .collect()
        })
        .collect()
}

/// Exhaustive minimum of the cluster product (no disqualifiers).
pub fn oracle_rr(lex: &Lexicon, set: &AssumptionSet, cluster: &Cluster) -> BigRational {
    let scores = score_matrix(lex, set, cluster);
    if set.flags.distinct_individuals {
        min_product(&scores, 0, &mut vec![false; set.candidates.len()])
    } else {
        scores
            .iter()
            .map(|row| {
                row.iter().flatten().fold(
                    BigRational::one(),
                    |m, s| if *s < m { s.clone() } else { m },
                )
            })
            .product()
    }
}

fn pattern_ok(cand: &Candidate, ins: &Inscription) -> bool {
    let specs: Vec<&SlotSpec> = cand.slots().collect();
    specs.len() <= ins.slots.len()
        && specs
            .iter()
            .zip(&ins.slots)
            .all(|(s, slot)| s.gender == slot.gender && s.generic_id == *slot.generic_id)
}

fn max_pairs(allowed: &[Vec<bool>], row: usize, used: &mut Vec<bool>) -> usize {
    if row == allowed.len() {
        return 0;
    }
    let mut best = max_pairs(allowed, row + 1, used);
    for j in 0..used.len() {
        if allowed[row][j] && !used[j] {
            used[j] = true;
            best = best.max(1 + max_pairs(allowed, row + 1, used));
            used[j] = false;
        }
    }
    best
}

pub fn oracle_lumped(set: &AssumptionSet, cluster: &Cluster) -> usize {
    let neutral = oracle_neutral(cluster, set.flags.chain_youngest_neutral);
    let allowed: Vec<Vec<bool>> = cluster
        .inscriptions
        .iter()
        .zip(&neutral)
        .filter(|(_, &n)| !n)
        .map(|(ins, _)| set.candidates.iter().map(|c| pattern_ok(c, ins)).collect())
        .collect();
    if set.flags.distinct_individuals {
        max_pairs(&allowed, 0, &mut vec![false; set.candidates.len()])
    } else {
        (0..set.candidates.len())
            .filter(|&j| allowed.iter().any(|r| r[j]))
            .count()
    }
}

/// Gender shape of each inscription, youngest slot first.
pub fn shape(cluster: &Cluster) -> Vec<Vec<Gender>> {
    cluster
        .inscriptions
        .iter()
        .map(|i| i.slots.iter().map(|s| s.gender).collect())
        .collect()
}

/// Exact null probability that a configuration-matched cluster is at least
/// as extreme as `observed`, by enumerating every weighted outcome.
pub fn oracle_tail(
    lex: &Lexicon,
    set: &AssumptionSet,
    observed: &Cluster,
    lumped: bool,
) -> BigRational {
    let config = shape(observed);
    let obs_rr = oracle_rr(lex, set, observed);
    let obs_lumped = oracle_lumped(set, observed);
    let slots: Vec<Gender> = config.iter().flatten().copied().collect();
    let mut total = BigRational::zero();
    let mut pick = vec![0usize; slots.len()];
    let strata: Vec<Vec<&Cell>> = slots.iter().map(|&g| lex.stratum(g)).collect();
    loop {
        let mut weight = BigRational::one();
        let mut flat = Vec::with_capacity(slots.len());
        for (k, &g) in slots.iter().enumerate() {
            let c = strata[k][pick[k]];
            weight *= ratio(c.count, lex.stratum_total(g));
            flat.push(Slot::new(&c.generic, &c.rendition, g));
        }
        let mut it = flat.into_iter();
        let inscriptions = config
            .iter()
            .map(|s| Inscription::new(it.by_ref().take(s.len()).collect()).unwrap())
            .collect();
        let sim = Cluster::new("sim", inscriptions).unwrap();
        let hit = if lumped {
            oracle_lumped(set, &sim) >= obs_lumped
        } else {
            oracle_rr(lex, set, &sim) <= obs_rr
        };
        if hit {
            total += weight;
        }
        // Odometer step.
        let mut k = 0;
        loop {
            if k == pick.len() {
                return total;
            }
            pick[k] += 1;
            if pick[k] < strata[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

/// Number of weighted outcomes `oracle_tail` visits.
pub fn outcome_count(lex: &Lexicon, config: &[Vec<Gender>]) -> usize {
    config
        .iter()
        .flatten()
        .map(|&g| lex.stratum(g).len())
        .product()
}

// ---------------------------------------------------------------------------
// Random instances

#[derive(Debug, Clone)]
pub struct CandDraw {
    pub female: bool,
    pub generic: usize,
    pub ratings: Vec<u32>,
    pub patronym: Option<(usize, Vec<u32>)>,
}

#[derive(Debug, Clone)]
pub struct InsDraw {
    pub female: bool,
    pub generic: usize,
    pub rendition: usize,
    pub father: Option<(usize, usize)>,
}

/// A random lexicon, candidate list and observed cluster. Indices are taken
/// modulo the relevant lengths when the case is built.
#[derive(Debug, Clone)]
pub struct Case {
    pub male: Vec<Vec<u64>>,
    pub female: Vec<Vec<u64>>,
    pub candidates: Vec<CandDraw>,
    pub inscriptions: Vec<InsDraw>,
    pub distinct: bool,
    pub chains: bool,
    pub shuffle: u64,
}

fn generic_name(female: bool, g: usize) -> String {
    format!("{}{}", if female { "f" } else { "m" }, g)
}

fn rendition_name(female: bool, g: usize, r: usize) -> String {
    format!("{}r{}", generic_name(female, g), r)
}

impl Case {
    fn generics(&self, female: bool) -> &Vec<Vec<u64>> {
        if female {
            &self.female
        } else {
            &self.male
        }
    }

    pub fn lexicon(&self) -> Lexicon {
        let mut cells = Vec::new();
        for female in [false, true] {
            for (g, counts) in self.generics(female).iter().enumerate() {
                for (r, &count) in counts.iter().enumerate() {
                    cells.push(Cell {
                        generic: generic_name(female, g),
                        gender: if female { Gender::F } else { Gender::M },
                        rendition: rendition_name(female, g, r),
                        count,
                    });
                }
            }
        }
        Lexicon { cells }
    }

    fn spec(&self, female: bool, generic: usize, ratings: &[u32]) -> SlotSpec {
        let gens = self.generics(female);
        let g = generic % gens.len();
        let n = gens[g].len();
        SlotSpec::generic(
            &generic_name(female, g),
            if female { Gender::F } else { Gender::M },
        )
        .with_ratings((0..n).map(|r| (rendition_name(female, g, r), ratings[r % ratings.len()])))
    }

    pub fn assumptions(&self) -> AssumptionSet {
        let candidates = self
            .candidates
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut c =
                    Candidate::new(&format!("c{i}"), self.spec(d.female, d.generic, &d.ratings));
                if let Some((g, ratings)) = &d.patronym {
                    c = c.with_patronym(self.spec(false, *g, ratings));
                }
                c
            })
            .collect();
        let mut set = AssumptionSet::with_candidates(candidates);
        set.flags.distinct_individuals = self.distinct;
        set.flags.chain_youngest_neutral = self.chains;
        set
    }

    fn slot(&self, female: bool, generic: usize, rendition: usize) -> Slot {
        let gens = self.generics(female);
        let g = generic % gens.len();
        let r = rendition % gens[g].len();
        Slot::new(
            &generic_name(female, g),
            &rendition_name(female, g, r),
            if female { Gender::F } else { Gender::M },
        )
    }

    pub fn cluster(&self) -> Cluster {
        let inscriptions = self
            .inscriptions
            .iter()
            .map(|d| {
                let mut slots = vec![self.slot(d.female, d.generic, d.rendition)];
                if let Some((g, r)) = d.father {
                    slots.push(self.slot(false, g, r));
                }
                Inscription::new(slots).unwrap()
            })
            .collect();
        Cluster::new("case", inscriptions).unwrap()
    }

    pub fn build(&self) -> (Lexicon, Onomasticon, AssumptionSet, Cluster) {
        let lex = self.lexicon();
        let onom = lex.onomasticon();
        (lex, onom, self.assumptions(), self.cluster())
    }
}

fn generics_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
    prop::collection::vec(prop::collection::vec(1u64..=30, 1..=3), 1..=3)
}

fn cand_strategy() -> impl Strategy<Value = CandDraw> {
    let ratings = || prop::collection::vec(0u32..=3, 3);
    (
        any::<bool>(),
        0usize..3,
        ratings(),
        prop::option::weighted(0.3, (0usize..3, ratings())),
    )
        .prop_map(|(female, generic, ratings, patronym)| CandDraw {
            female,
            generic,
            ratings,
            patronym,
        })
}

fn ins_strategy() -> impl Strategy<Value = InsDraw> {
    (
        any::<bool>(),
        0usize..3,
        0usize..3,
        prop::option::weighted(0.35, (0usize..3, 0usize..3)),
    )
        .prop_map(|(female, generic, rendition, father)| InsDraw {
            female,
            generic,
            rendition,
            father,
        })
}

pub fn case_with(max_candidates: usize, max_inscriptions: usize) -> impl Strategy<Value = Case> {
    (
        generics_strategy(),
        generics_strategy(),
        prop::collection::vec(cand_strategy(), 1..=max_candidates),
        prop::collection::vec(ins_strategy(), 1..=max_inscriptions),
        prop::bool::weighted(0.8),
        prop::bool::weighted(0.8),
        any::<u64>(),
    )
        .prop_map(
            |(male, female, candidates, inscriptions, distinct, chains, shuffle)| Case {
                male,
                female,
                candidates,
                inscriptions,
                distinct,
                chains,
                shuffle,
            },
        )
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    case_with(4, 5)
}

/// Runs `check` over `cases` deterministic draws of `strategy`.
pub fn run_cases<S, F>(cases: u32, strategy: S, check: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

/// Deterministic permutation of `0..n` from `seed`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut s = seed | 1;
    for i in (1..n).rev() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        idx.swap(i, (s % (i as u64 + 1)) as usize);
    }
    idx
}

/// Persons per (generic, gender).
pub fn generic_totals(lex: &Lexicon) -> BTreeMap<(String, Gender), u64> {
    let mut m = BTreeMap::new();
    for c in &lex.cells {
        *m.entry((c.generic.clone(), c.gender)).or_insert(0) += c.count;
    }
    m
}
