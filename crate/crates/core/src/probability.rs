//! Relative probabilities over alignments that explain the same New symbols.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::search::ScoredAlignment;

/// Competing alignments that encode exactly the same New symbol instances.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisGroup {
    pub matched_new: Vec<(String, usize)>,
    pub members: Vec<ScoredAlignment>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub matched_symbols: usize,
    pub members: usize,
    pub best_cd: f64,
}

impl HypothesisGroup {
    pub fn best(&self) -> &ScoredAlignment {
        &self.members[0]
    }

    pub fn summary(&self) -> GroupSummary {
        GroupSummary {
            matched_symbols: self.matched_new.len(),
            members: self.members.len(),
            best_cd: self.best().score.cd,
        }
    }
}

/// Groups results by matched New instances and sets `p_rel` within each group.
///
/// Input order is kept inside a group (so ranked input stays ranked); groups
/// are ordered by the position of their first member.
pub fn group_and_rank(results: Vec<ScoredAlignment>) -> Vec<HypothesisGroup> {
    let mut order: Vec<Vec<(String, usize)>> = Vec::new();
    let mut groups: BTreeMap<Vec<(String, usize)>, Vec<ScoredAlignment>> = BTreeMap::new();
    for r in results {
        let key = r.alignment.matched_new();
        let slot = groups.entry(key.clone()).or_default();
        if slot.is_empty() {
            order.push(key);
        }
        slot.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let mut members = groups.remove(&key).unwrap();
            let p = relative_probabilities(members.iter().map(|m| m.score.b_e));
            for (m, p) in members.iter_mut().zip(p) {
                m.score.p_rel = Some(p);
            }
            HypothesisGroup {
                matched_new: key,
                members,
            }
        })
        .collect()
}

/// `2^-b_j / Σ 2^-b_i`, shifted by the smallest code size to avoid underflow.
pub fn relative_probabilities(code_bits: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let min = code_bits.clone().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = code_bits.map(|b| (min - b).exp2()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}
