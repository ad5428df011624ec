//! Pairwise matching of two symbol sequences by k-best dynamic programming.
//!
//! Each DP cell keeps up to `depth` partial hypotheses ranked by partial score,
//! plus the best hypothesis for every distinct gap state, so the top result
//! is always the exact optimum and `depth` only controls how many
//! alternatives survive.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpError};
use crate::model::{Symbol, SymbolTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub max_alternatives: usize,
    pub depth: usize,
    pub gap_cost_bits: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            max_alternatives: 4,
            depth: 8,
            gap_cost_bits: 1.0,
        }
    }
}

impl MatchOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_alternatives == 0 || self.depth == 0 {
            return Err(SpError::InvalidAlignment(
                "max_alternatives and depth must be at least 1".into(),
            ));
        }
        if self.gap_cost_bits.is_nan() || self.gap_cost_bits < 0.0 {
            return Err(SpError::InvalidAlignment(
                "gap cost must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One way of linking identical symbols of two sequences, order preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAlignment {
    pub left: Vec<Symbol>,
    pub right: Vec<Symbol>,
    pub links: Vec<(usize, usize)>,
    /// Linked weight minus gap charges on both sides.
    pub score: f64,
    pub gaps: usize,
}

impl PairwiseAlignment {
    pub fn transposed(&self) -> PairwiseAlignment {
        PairwiseAlignment {
            left: self.right.clone(),
            right: self.left.clone(),
            links: self.links.iter().map(|&(l, r)| (r, l)).collect(),
            score: self.score,
            gaps: self.gaps,
        }
    }
}

/// Score quantised to 1e-9 bits so that sums taken in different orders tie.
pub(crate) fn quantise(bits: f64) -> i64 {
    (bits * 1e9).round() as i64
}

/// Gap state of one sequence while scanning it left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum GapState {
    Start,
    Matched,
    Pending,
}

impl GapState {
    /// Advances over one symbol; returns true when a gap is closed.
    pub(crate) fn step(&mut self, matched: bool) -> bool {
        match (*self, matched) {
            (GapState::Pending, true) => {
                *self = GapState::Matched;
                true
            }
            (_, true) => {
                *self = GapState::Matched;
                false
            }
            (GapState::Matched, false) => {
                *self = GapState::Pending;
                false
            }
            _ => false,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Move {
    Start,
    SkipLeft,
    SkipRight,
    Link,
}

#[derive(Clone, Copy)]
struct Hyp {
    score: f64,
    gaps: usize,
    left: GapState,
    right: GapState,
    prev: usize,
    mv: Move,
}

impl Hyp {
    fn key(&self) -> (std::cmp::Reverse<i64>, usize) {
        (std::cmp::Reverse(quantise(self.score)), self.gaps)
    }
}

/// Returns up to `max_alternatives` distinct pairwise alignments, best first.
pub fn match_pair(
    left: &[Symbol],
    right: &[Symbol],
    opts: &MatchOptions,
    weights: &SymbolTable,
) -> Result<Vec<PairwiseAlignment>> {
    if left.is_empty() || right.is_empty() {
        return Err(SpError::Empty("match_pair needs two non-empty sequences"));
    }
    opts.validate()?;
    let n = left.len();
    let m = right.len();
    let w: Vec<f64> = left.iter().map(|s| weights.weight(s.as_str())).collect();
    let gap = opts.gap_cost_bits;
    let width = m + 1;
    let mut cells: Vec<Vec<Hyp>> = vec![Vec::new(); (n + 1) * width];
    cells[0].push(Hyp {
        score: 0.0,
        gaps: 0,
        left: GapState::Start,
        right: GapState::Start,
        prev: 0,
        mv: Move::Start,
    });
    let mut cand = Vec::new();
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            cand.clear();
            if i > 0 {
                for (k, h) in cells[(i - 1) * width + j].iter().enumerate() {
                    // Unmatched runs are emitted left-first so each link set has one path.
                    if h.mv == Move::SkipRight {
                        continue;
                    }
                    let mut next = Hyp {
                        prev: k,
                        mv: Move::SkipLeft,
                        ..*h
                    };
                    next.left.step(false);
                    cand.push(next);
                }
            }
            if j > 0 {
                for (k, h) in cells[i * width + j - 1].iter().enumerate() {
                    let mut next = Hyp {
                        prev: k,
                        mv: Move::SkipRight,
                        ..*h
                    };
                    next.right.step(false);
                    cand.push(next);
                }
            }
            if i > 0 && j > 0 && left[i - 1] == right[j - 1] {
                for (k, h) in cells[(i - 1) * width + j - 1].iter().enumerate() {
                    let mut next = Hyp {
                        prev: k,
                        mv: Move::Link,
                        ..*h
                    };
                    next.score += w[i - 1];
                    let closed = next.left.step(true) as usize + next.right.step(true) as usize;
                    next.gaps += closed;
                    next.score -= gap * closed as f64;
                    cand.push(next);
                }
            }
            cells[i * width + j] = prune(&cand, opts.depth);
        }
    }

    let mut results: Vec<PairwiseAlignment> = cells[n * width + m]
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let mut links = Vec::new();
            let (mut i, mut j, mut k) = (n, m, k);
            loop {
                let h = cells[i * width + j][k];
                match h.mv {
                    Move::Start => break,
                    Move::SkipLeft => i -= 1,
                    Move::SkipRight => j -= 1,
                    Move::Link => {
                        i -= 1;
                        j -= 1;
                        links.push((i, j));
                    }
                }
                k = h.prev;
            }
            links.reverse();
            PairwiseAlignment {
                left: left.to_vec(),
                right: right.to_vec(),
                links,
                score: h.score,
                gaps: h.gaps,
            }
        })
        .filter(|a| !a.links.is_empty())
        .collect();
    results.sort_by(|a, b| {
        quantise(b.score)
            .cmp(&quantise(a.score))
            .then(a.gaps.cmp(&b.gaps))
            .then_with(|| a.links.cmp(&b.links))
    });
    results.dedup_by(|a, b| a.links == b.links);
    results.truncate(opts.max_alternatives);
    Ok(results)
}

fn prune(cand: &[Hyp], depth: usize) -> Vec<Hyp> {
    let mut order: Vec<usize> = (0..cand.len()).collect();
    order.sort_by_key(|&i| cand[i].key());
    let mut keep = Vec::with_capacity(depth + 18);
    let mut seen_states = Vec::with_capacity(18);
    for &i in &order {
        let h = &cand[i];
        let state = (h.left, h.right, h.mv == Move::SkipRight);
        let fresh_state = !seen_states.contains(&state);
        if fresh_state {
            seen_states.push(state);
        }
        if keep.len() < depth || fresh_state {
            keep.push(*h);
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{symbols_of, KnowledgeStore, Pattern};

    fn syms(t: &str) -> Vec<Symbol> {
        symbols_of(t).unwrap()
    }

    fn uniform(alphabet: &str) -> SymbolTable {
        let store =
            KnowledgeStore::new(vec![Pattern::old("u", alphabet, 1, 0, 0).unwrap()]).unwrap();
        store.symbol_table().clone()
    }

    #[test]
    fn identity_links_everything() {
        let t = uniform("a b c");
        let r = match_pair(&syms("a b c"), &syms("a b c"), &MatchOptions::default(), &t).unwrap();
        assert_eq!(r[0].links, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(r[0].gaps, 0);
    }

    #[test]
    fn skips_inserted_symbols() {
        let t = uniform("a b c d e");
        let r = match_pair(
            &syms("a c e"),
            &syms("a b c d e"),
            &MatchOptions::default(),
            &t,
        )
        .unwrap();
        assert_eq!(r[0].links, vec![(0, 0), (1, 2), (2, 4)]);
        assert_eq!(r[0].gaps, 2);
    }

    #[test]
    fn returns_alternatives_in_order() {
        let t = uniform("a b");
        let opts = MatchOptions {
            max_alternatives: 3,
            ..Default::default()
        };
        let r = match_pair(&syms("a b a"), &syms("a"), &opts, &t).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].links, vec![(0, 0)]);
        assert_eq!(r[1].links, vec![(2, 0)]);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let t = uniform("a");
        assert!(match_pair(&[], &syms("a"), &MatchOptions::default(), &t).is_err());
    }

    #[test]
    fn no_common_symbol_gives_nothing() {
        let t = uniform("a b");
        let r = match_pair(&syms("a"), &syms("b"), &MatchOptions::default(), &t).unwrap();
        assert!(r.is_empty());
    }
}
