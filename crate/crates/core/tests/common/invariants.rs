//! Invariance checks over random cases, shared by the property tests and the
//! acceptance suite.

use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use surprise_rr::nulldist::Statistic;
use surprise_rr::rr_engine::lumped_statistic;
use surprise_rr::{cluster_rr, estimate_tail_area, Cluster, Onomasticon, SeedStream, Slot};

use super::{generic_totals, oracle_lumped, oracle_rr, permutation, Case, Cell, Lexicon};

pub const COUPLING_SIMS: u64 = 200;

fn exact(
    cluster: &Cluster,
    case_set: &surprise_rr::AssumptionSet,
    onom: &Onomasticon,
) -> BigRational {
    cluster_rr(cluster, case_set, onom)
        .unwrap()
        .exact_match_product()
}

pub fn matches_oracle(case: Case) -> Result<(), TestCaseError> {
    let (lex, onom, set, cluster) = case.build();
    prop_assert_eq!(
        exact(&cluster, &set, &onom),
        oracle_rr(&lex, &set, &cluster)
    );
    prop_assert_eq!(
        lumped_statistic(&cluster, &set, &onom),
        oracle_lumped(&set, &cluster)
    );
    Ok(())
}

pub fn inscription_permutation(case: Case) -> Result<(), TestCaseError> {
    let (_, onom, set, cluster) = case.build();
    let perm = permutation(cluster.inscriptions.len(), case.shuffle);
    let shuffled = Cluster::new(
        "case",
        perm.iter()
            .map(|&i| cluster.inscriptions[i].clone())
            .collect(),
    )
    .unwrap();
    prop_assert_eq!(exact(&cluster, &set, &onom), exact(&shuffled, &set, &onom));
    prop_assert_eq!(
        lumped_statistic(&cluster, &set, &onom),
        lumped_statistic(&shuffled, &set, &onom)
    );
    Ok(())
}

pub fn candidate_permutation(case: Case) -> Result<(), TestCaseError> {
    let (_, onom, set, cluster) = case.build();
    let mut shuffled = set.clone();
    let perm = permutation(set.candidates.len(), case.shuffle);
    shuffled.candidates = perm.iter().map(|&i| set.candidates[i].clone()).collect();
    prop_assert_eq!(
        exact(&cluster, &set, &onom),
        exact(&cluster, &shuffled, &onom)
    );
    prop_assert_eq!(
        lumped_statistic(&cluster, &set, &onom),
        lumped_statistic(&cluster, &shuffled, &onom)
    );
    Ok(())
}

/// Strictly increasing on positive ratings; unrated stays unrated.
fn relabel(r: u32) -> u32 {
    if r == 0 {
        0
    } else {
        r * r + 2
    }
}

pub fn rating_relabel(case: Case) -> Result<(), TestCaseError> {
    let (_, onom, set, cluster) = case.build();
    let mut relabelled = set.clone();
    for c in &mut relabelled.candidates {
        for spec in std::iter::once(&mut c.personal).chain(c.patronym.as_mut()) {
            for v in spec.ratings.values_mut() {
                *v = relabel(*v);
            }
        }
    }
    prop_assert_eq!(
        exact(&cluster, &set, &onom),
        exact(&cluster, &relabelled, &onom)
    );
    Ok(())
}

pub fn metadata_inert(case: Case) -> Result<(), TestCaseError> {
    let (_, onom, set, cluster) = case.build();
    let mut decorated = cluster.clone();
    decorated.cluster_id = "renamed".into();
    for (i, ins) in decorated.inscriptions.iter_mut().enumerate() {
        ins.script = Some(if i % 2 == 0 { "greek" } else { "aramaic" }.into());
        ins.raw = Some(format!("inscription {i}"));
    }
    let mut labelled = set.clone();
    for c in &mut labelled.candidates {
        c.label = format!("label of {}", c.candidate_id);
    }
    let a = cluster_rr(&cluster, &set, &onom).unwrap();
    let b = cluster_rr(&decorated, &labelled, &onom).unwrap();
    prop_assert_eq!(a, b);
    Ok(())
}

/// Splitting one rendition cell in two (and relabelling some of its
/// occurrences) leaves the lumped statistic unchanged.
pub fn lumped_split_invariance(case: Case) -> Result<(), TestCaseError> {
    let (lex, onom, set, cluster) = case.build();
    let k = (case.shuffle % cluster.inscriptions.len() as u64) as usize;
    let target = cluster.inscriptions[k].slots[0].clone();
    let pos = lex
        .cells
        .iter()
        .position(|c| c.gender == target.gender && c.rendition == *target.rendition_id)
        .unwrap();
    let count = lex.cells[pos].count;
    if count < 2 {
        return Ok(());
    }
    let moved = 1 + (case.shuffle >> 8) % (count - 1);
    let split_id = format!("{}s", target.rendition_id);
    let mut split = lex.clone();
    split.cells[pos].count -= moved;
    split.cells.push(Cell {
        generic: target.generic_id.to_string(),
        gender: target.gender,
        rendition: split_id.clone(),
        count: moved,
    });
    let split_onom = split.onomasticon();
    let mut relabelled = cluster.clone();
    for (i, ins) in relabelled.inscriptions.iter_mut().enumerate() {
        for (j, slot) in ins.slots.iter_mut().enumerate() {
            let flip = (case.shuffle >> (16 + 2 * i + j)) & 1 == 1;
            if flip && slot.gender == target.gender && slot.rendition_id == target.rendition_id {
                *slot = Slot::new(&target.generic_id, &split_id, target.gender);
            }
        }
    }
    prop_assert_eq!(
        lumped_statistic(&cluster, &set, &onom),
        lumped_statistic(&relabelled, &set, &split_onom)
    );
    Ok(())
}

/// A rendition rated at least as high as the observed one by every candidate
/// on that name; `None` if there is no such alternative.
fn rarer_substitute(
    case: &Case,
    set: &surprise_rr::AssumptionSet,
    lex: &Lexicon,
    cluster: &Cluster,
) -> Option<Cluster> {
    let k = (case.shuffle % cluster.inscriptions.len() as u64) as usize;
    let slot = &cluster.inscriptions[k].slots[0];
    let specs: Vec<_> = set
        .candidates
        .iter()
        .map(|c| &c.personal)
        .filter(|s| s.gender == slot.gender && s.generic_id == *slot.generic_id)
        .collect();
    let rate = |spec: &surprise_rr::SlotSpec, r: &str| spec.ratings.get(r).copied().unwrap_or(0);
    let options: Vec<&str> = lex
        .cells
        .iter()
        .filter(|c| {
            c.gender == slot.gender
                && c.generic == *slot.generic_id
                && c.rendition != *slot.rendition_id
        })
        .filter(|c| {
            specs
                .iter()
                .all(|s| rate(s, &c.rendition) >= rate(s, &slot.rendition_id))
        })
        .map(|c| c.rendition.as_str())
        .collect();
    if options.is_empty() {
        return None;
    }
    let pick = options[((case.shuffle >> 32) % options.len() as u64) as usize];
    let mut out = cluster.clone();
    out.inscriptions[k].slots[0] = Slot::new(&slot.generic_id, pick, slot.gender);
    Some(out)
}

pub fn rarer_tier_monotone(case: Case) -> Result<(), TestCaseError> {
    let (lex, onom, set, cluster) = case.build();
    if let Some(rarer) = rarer_substitute(&case, &set, &lex, &cluster) {
        prop_assert!(exact(&rarer, &set, &onom) <= exact(&cluster, &set, &onom));
    }
    Ok(())
}

/// Same configuration, same stream: the rarer observation never has the
/// larger tail-area estimate.
pub fn coupled_p_hat_monotone(case: Case) -> Result<(), TestCaseError> {
    let (lex, onom, set, cluster) = case.build();
    if let Some(rarer) = rarer_substitute(&case, &set, &lex, &cluster) {
        let stream = SeedStream::new(case.shuffle);
        let p = estimate_tail_area(&cluster, &set, &onom, Statistic::Rr, COUPLING_SIMS, stream)
            .unwrap();
        let q =
            estimate_tail_area(&rarer, &set, &onom, Statistic::Rr, COUPLING_SIMS, stream).unwrap();
        prop_assert!(q.observed <= p.observed * (1.0 + 1e-12));
        prop_assert!(
            q.p_hat <= p.p_hat,
            "rarer p {} > base p {}",
            q.p_hat,
            p.p_hat
        );
    }
    Ok(())
}

/// Totals are sums of cells, and the lexicon ignores row order.
pub fn lexicon_sums_and_order(case: Case) -> Result<(), TestCaseError> {
    let lex = case.lexicon();
    let onom = lex.onomasticon();
    for g in surprise_rr::Gender::ALL {
        prop_assert_eq!(onom.stratum_total(g), lex.stratum_total(g));
    }
    for ((generic, g), total) in generic_totals(&lex) {
        let entry = onom.entry(&generic, g).unwrap();
        prop_assert_eq!(entry.total, total);
        prop_assert_eq!(entry.renditions.iter().map(|c| c.count).sum::<u64>(), total);
    }
    let perm = permutation(lex.cells.len(), case.shuffle);
    let shuffled = Lexicon {
        cells: perm.iter().map(|&i| lex.cells[i].clone()).collect(),
    };
    let other = shuffled.onomasticon();
    prop_assert_eq!(other.checksum(), onom.checksum());
    prop_assert_eq!(other, onom);
    Ok(())
}

pub type Check = fn(Case) -> Result<(), TestCaseError>;

/// Every invariant, in reporting order.
pub const ALL: &[(&str, Check)] = &[
    ("oracle agreement", matches_oracle),
    ("inscription permutation", inscription_permutation),
    ("candidate permutation", candidate_permutation),
    ("rating relabel", rating_relabel),
    ("metadata inertness", metadata_inert),
    ("lumped split invariance", lumped_split_invariance),
    ("rarer-tier monotonicity", rarer_tier_monotone),
    ("coupled p_hat monotonicity", coupled_p_hat_monotone),
    ("lexicon sums and load order", lexicon_sums_and_order),
];
