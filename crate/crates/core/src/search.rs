//! Iterative beam search over multiple alignments.
//!
//! Stage one merges every New pattern with every Old pattern. Each later
//! iteration merges every retained alignment with every pattern it does
//! not already contain and with every other retained alignment, then keeps
//! the best `beam_width`. The loop stops when the beam no longer changes.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alignment::{Alignment, AlignmentScore};
use crate::engine::{merge, rank, Arena, Draft};
use crate::error::{Result, SpError};
use crate::matcher::{quantise, MatchOptions};
use crate::model::{KnowledgeStore, Pattern};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub beam_width: usize,
    pub max_iterations: usize,
    pub matching: MatchOptions,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            beam_width: 20,
            max_iterations: 60,
            matching: MatchOptions::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAlignment {
    pub alignment: Alignment,
    pub score: AlignmentScore,
}

/// Builds alignments of `new_set` against the store, best first.
///
/// Only alignments with positive compression survive; alignments that add
/// rows to another result without explaining more New symbols and without
/// compressing better are dropped, as are alternative encodings that differ
/// only in how Old patterns are unified among themselves.
pub fn build_alignments(
    new_set: &[Pattern],
    store: &KnowledgeStore,
    opts: &SearchOptions,
) -> Result<Vec<ScoredAlignment>> {
    if new_set.is_empty() {
        return Err(SpError::Empty("no New patterns"));
    }
    if store.is_empty() {
        return Err(SpError::NoOldPatterns);
    }
    if opts.beam_width == 0 || opts.max_iterations == 0 {
        return Err(SpError::InvalidAlignment(
            "beam width and iteration limit must be at least 1".into(),
        ));
    }
    opts.matching.validate()?;
    let mut news: Vec<Arc<Pattern>> = new_set.iter().cloned().map(Arc::new).collect();
    // New patterns form a set; their order must not change the result.
    news.sort_by(|a, b| {
        a.symbols()
            .cmp(b.symbols())
            .then_with(|| a.id().cmp(b.id()))
    });
    let mut ids = HashSet::new();
    for p in news.iter().chain(store.patterns()) {
        if !ids.insert(p.id()) {
            return Err(SpError::DuplicateId(p.id().to_owned()));
        }
        if p.origin().is_new() != news.iter().any(|n| Arc::ptr_eq(n, p)) {
            return Err(SpError::InvalidPattern {
                id: p.id().to_owned(),
                reason: "origin does not match its role".into(),
            });
        }
    }
    let all: Vec<Arc<Pattern>> = news.iter().chain(store.patterns()).cloned().collect();
    let arena = Arena::new(&all, store.symbol_table(), opts.matching.gap_cost_bits);
    let drafts = search(&arena, news.len(), opts);
    Ok(drafts
        .iter()
        .map(|d| ScoredAlignment {
            alignment: Alignment::from_draft(&arena, d),
            score: AlignmentScore::from_engine(&d.score, arena.gap_cost),
        })
        .collect())
}

pub(crate) fn search(arena: &Arena, new_count: usize, opts: &SearchOptions) -> Vec<Draft> {
    let singles: Vec<Draft> = (0..arena.pats.len() as u32)
        .map(|p| arena.single(p))
        .collect();
    let olds = &singles[new_count..];
    let m = &opts.matching;

    let mut archive: HashMap<Vec<u32>, Draft> = HashMap::new();
    let stage_one: Vec<(usize, usize)> = (0..new_count)
        .flat_map(|n| (0..olds.len()).map(move |o| (n, o)))
        .collect();
    let fresh = par::flat_map(opts.execution, &stage_one, |&(n, o)| {
        merge(arena, &singles[n], &olds[o], m)
    });
    let beam = select(fresh.iter(), opts.beam_width);
    absorb(&mut archive, fresh);
    let mut tried = Tried::default();
    let beam = grow(arena, &singles, beam, &mut archive, &mut tried, opts);

    // Swap each Old pattern of the leading results for every other one, so
    // that competing explanations of the same New symbols get built too.
    let leaders = select(
        archive.values().filter(|d| d.score.cd > 0.0),
        opts.beam_width,
    );
    let mut tasks: Vec<(usize, u32, usize)> = Vec::new();
    for (i, d) in leaders.iter().enumerate() {
        for &r in d.rows.iter().filter(|&&r| r as usize >= new_count) {
            for (o, single) in olds.iter().enumerate() {
                if !d.has_row(single.rows[0]) {
                    tasks.push((i, r, o));
                }
            }
        }
    }
    let swapped = par::flat_map(opts.execution, &tasks, |&(i, r, o)| {
        merge(arena, &leaders[i].without_row(arena, r), &olds[o], m)
    });
    if !swapped.is_empty() {
        let beam = select(beam.iter().chain(swapped.iter()), opts.beam_width);
        absorb(&mut archive, swapped);
        grow(arena, &singles, beam, &mut archive, &mut tried, opts);
    }
    finish(archive.into_values().collect())
}

/// Merges already made. A beam member that survives an iteration would
/// otherwise be merged again with the same partners; whatever that produced
/// already lost to the current beam.
#[derive(Default)]
struct Tried {
    singles: HashSet<(Vec<u32>, usize)>,
    pairs: HashSet<(Vec<u32>, Vec<u32>)>,
}

/// Extends the beam until it stops changing, recording every alignment made.
fn grow(
    arena: &Arena,
    singles: &[Draft],
    mut beam: Vec<Draft>,
    archive: &mut HashMap<Vec<u32>, Draft>,
    tried: &mut Tried,
    opts: &SearchOptions,
) -> Vec<Draft> {
    let m = &opts.matching;
    for iteration in 1..opts.max_iterations {
        let mut tasks: Vec<(usize, Option<usize>, Option<usize>)> = Vec::new();
        for (i, a) in beam.iter().enumerate() {
            for (o, single) in singles.iter().enumerate() {
                if !a.has_row(single.rows[0]) && tried.singles.insert((a.canon.clone(), o)) {
                    tasks.push((i, Some(o), None));
                }
            }
            for j in i + 1..beam.len() {
                if tried.pairs.insert((a.canon.clone(), beam[j].canon.clone())) {
                    tasks.push((i, None, Some(j)));
                }
            }
        }
        let fresh = par::flat_map(opts.execution, &tasks, |&(i, o, j)| match (o, j) {
            (Some(o), _) => merge(arena, &beam[i], &singles[o], m),
            (_, Some(j)) => merge(arena, &beam[i], &beam[j], m),
            _ => Vec::new(),
        });
        let next = select(beam.iter().chain(fresh.iter()), opts.beam_width);
        absorb(archive, fresh);
        let same =
            next.len() == beam.len() && next.iter().zip(&beam).all(|(x, y)| x.canon == y.canon);
        beam = next;
        if same {
            log::debug!("beam settled after {iteration} iterations");
            break;
        }
    }
    beam
}

fn absorb(archive: &mut HashMap<Vec<u32>, Draft>, drafts: Vec<Draft>) {
    for d in drafts {
        archive.entry(d.canon.clone()).or_insert(d);
    }
}

/// Best variant per hypothesis, best `width` hypotheses.
fn select<'a>(pool: impl Iterator<Item = &'a Draft>, width: usize) -> Vec<Draft> {
    let mut best: HashMap<&[u32], &Draft> = HashMap::new();
    for d in pool {
        best.entry(&d.hyp)
            .and_modify(|cur| {
                if rank(d, cur).is_lt() {
                    *cur = d;
                }
            })
            .or_insert(d);
    }
    let mut out: Vec<&Draft> = best.into_values().collect();
    out.sort_by(|a, b| rank(a, b));
    out.truncate(width);
    out.into_iter().cloned().collect()
}

fn finish(all: Vec<Draft>) -> Vec<Draft> {
    let positive = all.iter().filter(|d| d.score.cd > 0.0);
    let mut unique = select(positive, usize::MAX);
    // Dominance: drop an alignment when a result using a strict subset of its
    // rows explains the same New symbols at least as well.
    let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (i, d) in unique.iter().enumerate() {
        groups.entry(d.matched_new().to_vec()).or_default().push(i);
    }
    let mut dropped = vec![false; unique.len()];
    for members in groups.values_mut() {
        members.sort_by_key(|&i| unique[i].rows.len());
        let mut kept: Vec<usize> = Vec::new();
        for &i in members.iter() {
            let d = &unique[i];
            let dominated = kept.iter().any(|&k| {
                let b = &unique[k];
                b.rows.len() < d.rows.len()
                    && b.rows_subset_of(d)
                    && quantise(b.score.cd) >= quantise(d.score.cd)
            });
            if dominated {
                dropped[i] = true;
            } else {
                kept.push(i);
            }
        }
    }
    let mut i = 0;
    unique.retain(|_| {
        let keep = !dropped[i];
        i += 1;
        keep
    });
    unique
}
