//! Pattern abstraction from partial matches and grammar selection by
//! minimum length encoding.
//!
//! A pairwise alignment of two raw patterns is cut into matched runs and the
//! unmatched runs between them. Each run becomes a small pattern headed by a
//! class symbol and a member discriminator; unmatched runs at the same slot
//! share their class, and one abstract pattern lists the classes in order.
//! A hill climb over subsets of these candidates then keeps the set that
//! encodes the corpus most compactly.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpError};
use crate::matcher::{match_pair, MatchOptions, PairwiseAlignment};
use crate::model::{KnowledgeStore, Origin, Pattern, Symbol, SymbolTable};
use crate::par;
use crate::search::{build_alignments, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    MatchedRun,
    UnmatchedRun,
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePattern {
    pub pattern: Pattern,
    pub kind: SegmentKind,
    /// The two source sequences, as text.
    pub source: (String, String),
}

/// Hands out class symbols `%1`, `%2`, ... that do not occur anywhere else.
#[derive(Debug, Clone, Default)]
pub struct SymbolSupply {
    taken: HashSet<String>,
    next: u64,
    next_id: u64,
}

impl SymbolSupply {
    pub fn new<'a>(reserved: impl IntoIterator<Item = &'a Symbol>) -> Self {
        SymbolSupply {
            taken: reserved
                .into_iter()
                .map(|s| s.as_str().to_owned())
                .collect(),
            next: 1,
            next_id: 1,
        }
    }

    pub fn reserve<'a>(&mut self, symbols: impl IntoIterator<Item = &'a Symbol>) {
        self.taken
            .extend(symbols.into_iter().map(|s| s.as_str().to_owned()));
    }

    fn class(&mut self) -> Symbol {
        loop {
            let text = format!("%{}", self.next);
            self.next += 1;
            if self.taken.insert(text.clone()) {
                return Symbol::new(text).expect("class symbols are well formed");
            }
        }
    }

    fn pattern_id(&mut self) -> String {
        let id = format!("c{}", self.next_id);
        self.next_id += 1;
        id
    }
}

fn sym(text: &str) -> Symbol {
    Symbol::new(text).expect("fixed symbols are well formed")
}

/// `< class discriminator body... >`, with class and discriminator as the
/// ID-symbols.
fn member(id: String, class: &Symbol, discriminator: usize, body: &[Symbol]) -> Result<Pattern> {
    let mut symbols = vec![sym("<"), class.clone(), sym(&discriminator.to_string())];
    symbols.extend_from_slice(body);
    symbols.push(sym(">"));
    Pattern::new(id, symbols, 1, 1, 2, Origin::Learned)
}

/// Candidates from one pairwise alignment, using a fresh supply of class
/// symbols that avoids every symbol of the two sequences.
pub fn derive_candidates(a: &PairwiseAlignment) -> Result<Vec<CandidatePattern>> {
    let mut supply = SymbolSupply::new(a.left.iter().chain(a.right.iter()));
    derive_candidates_with(a, &mut supply)
}

/// As [`derive_candidates`], drawing class symbols and pattern ids from
/// `supply` so that several derivations never collide.
pub fn derive_candidates_with(
    a: &PairwiseAlignment,
    supply: &mut SymbolSupply,
) -> Result<Vec<CandidatePattern>> {
    if a.links.is_empty() {
        return Err(SpError::InvalidAlignment(
            "candidates need at least one matched symbol".into(),
        ));
    }
    for w in a.links.windows(2) {
        if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
            return Err(SpError::InvalidAlignment(
                "links must increase on both sides".into(),
            ));
        }
    }
    supply.reserve(a.left.iter().chain(a.right.iter()));
    let source = (text_of(&a.left), text_of(&a.right));
    let mut out = Vec::new();
    let mut classes: Vec<Symbol> = Vec::new();

    let unmatched_slot = |lo: (usize, usize),
                          hi: (usize, usize),
                          out: &mut Vec<CandidatePattern>,
                          supply: &mut SymbolSupply|
     -> Result<Option<Symbol>> {
        let left = &a.left[lo.0..hi.0];
        let right = &a.right[lo.1..hi.1];
        if left.is_empty() && right.is_empty() {
            return Ok(None);
        }
        let class = supply.class();
        for (d, body) in [left, right].into_iter().enumerate() {
            if !body.is_empty() {
                out.push(CandidatePattern {
                    pattern: member(supply.pattern_id(), &class, d, body)?,
                    kind: SegmentKind::UnmatchedRun,
                    source: source.clone(),
                });
            }
        }
        Ok(Some(class))
    };

    let mut cursor = (0usize, 0usize);
    let mut k = 0;
    while k < a.links.len() {
        let start = a.links[k];
        if let Some(c) = unmatched_slot(cursor, start, &mut out, supply)? {
            classes.push(c);
        }
        let mut end = k;
        while end + 1 < a.links.len()
            && a.links[end + 1] == (a.links[end].0 + 1, a.links[end].1 + 1)
        {
            end += 1;
        }
        let body = &a.left[start.0..=a.links[end].0];
        let class = supply.class();
        out.push(CandidatePattern {
            pattern: member(supply.pattern_id(), &class, 0, body)?,
            kind: SegmentKind::MatchedRun,
            source: source.clone(),
        });
        classes.push(class);
        cursor = (a.links[end].0 + 1, a.links[end].1 + 1);
        k = end + 1;
    }
    if let Some(c) = unmatched_slot(cursor, (a.left.len(), a.right.len()), &mut out, supply)? {
        classes.push(c);
    }

    let head = supply.class();
    let mut symbols = vec![sym("<"), head];
    for c in &classes {
        symbols.extend([sym("<"), c.clone(), sym(">")]);
    }
    symbols.push(sym(">"));
    out.push(CandidatePattern {
        pattern: Pattern::new(supply.pattern_id(), symbols, 1, 1, 1, Origin::Learned)?,
        kind: SegmentKind::Abstract,
        source,
    });
    Ok(out)
}

fn text_of(symbols: &[Symbol]) -> String {
    symbols
        .iter()
        .map(Symbol::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Costs used when weighing a grammar against the corpus it encodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnPolicy {
    /// Fixed charge per retained pattern for its delimiters and frequency.
    pub pattern_overhead_bits: f64,
    pub search: SearchOptions,
}

impl Default for LearnPolicy {
    fn default() -> Self {
        LearnPolicy {
            pattern_overhead_bits: 8.0,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrammarScore {
    pub grammar_bits: f64,
    pub data_bits: f64,
    pub total_bits: f64,
}

/// Retained patterns with frequencies set to how often each was used in
/// the best encodings of the corpus, together with the resulting score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGrammar {
    pub patterns: Vec<Pattern>,
    pub score: GrammarScore,
}

/// Weights for symbols of the raw corpus; anything else costs the novel
/// weight of this table.
fn corpus_table(corpus: &[Pattern]) -> Result<SymbolTable> {
    let as_old: Vec<Pattern> = corpus
        .iter()
        .map(|p| Pattern::new(p.id(), p.symbols().to_vec(), 1, 0, 0, Origin::Old))
        .collect::<Result<_>>()?;
    SymbolTable::from_patterns(&as_old)
}

/// Encodes every corpus pattern with its best alignment against `store`.
/// Returns the data cost and, per store pattern id, how many corpus
/// patterns used it.
fn encode(
    store: &KnowledgeStore,
    corpus: &[Pattern],
    literal_bits: f64,
    opts: &SearchOptions,
) -> Result<(f64, BTreeMap<String, u64>)> {
    // Repeated observations share one search.
    let mut distinct: Vec<(&Pattern, u64)> = Vec::new();
    for p in corpus {
        match distinct
            .iter_mut()
            .find(|(q, _)| q.symbols() == p.symbols())
        {
            Some((_, n)) => *n += 1,
            None => distinct.push((p, 1)),
        }
    }
    let per_pattern = par::flat_map(opts.execution, &distinct, |&(p, n)| {
        vec![
            build_alignments(std::slice::from_ref(p), store, opts).map(|found| {
                match found.into_iter().next() {
                    Some(best) => {
                        let a = &best.alignment;
                        let unmatched = p.len() - a.matched_new().len();
                        let used: Vec<String> = a
                            .rows()
                            .iter()
                            .filter(|r| !r.origin().is_new())
                            .map(|r| r.id().to_owned())
                            .collect();
                        (n, best.score.b_e + unmatched as f64 * literal_bits, used)
                    }
                    None => (n, p.len() as f64 * literal_bits, Vec::new()),
                }
            }),
        ]
    });
    let mut bits = 0.0;
    let mut uses: BTreeMap<String, u64> = BTreeMap::new();
    for r in per_pattern {
        let (n, b, used) = r?;
        bits += n as f64 * b;
        for id in used {
            *uses.entry(id).or_default() += n;
        }
    }
    Ok((bits, uses))
}

/// Minimum-length-encoding score of `retained` as a grammar for `corpus`.
pub fn score_grammar(
    retained: &[Pattern],
    corpus: &[Pattern],
    policy: &LearnPolicy,
) -> Result<ScoredGrammar> {
    if corpus.is_empty() {
        return Err(SpError::Empty("corpus"));
    }
    let table = corpus_table(corpus)?;
    let literal = table.novel_weight();
    if retained.is_empty() {
        let data_bits = corpus.iter().map(|p| p.len() as f64 * literal).sum();
        return Ok(ScoredGrammar {
            patterns: Vec::new(),
            score: GrammarScore {
                grammar_bits: 0.0,
                data_bits,
                total_bits: data_bits,
            },
        });
    }
    let first = KnowledgeStore::new(
        retained
            .iter()
            .map(|p| p.with_frequency(1))
            .collect::<Result<_>>()?,
    )?;
    let (_, uses) = encode(&first, corpus, literal, &policy.search)?;
    let patterns: Vec<Pattern> = retained
        .iter()
        .map(|p| p.with_frequency(uses.get(p.id()).copied().unwrap_or(1).max(1)))
        .collect::<Result<_>>()?;
    let store = KnowledgeStore::new(patterns.clone())?;
    let (data_bits, _) = encode(&store, corpus, literal, &policy.search)?;
    let grammar_bits = patterns
        .iter()
        .map(|p| {
            policy.pattern_overhead_bits
                + p.symbols()
                    .iter()
                    .map(|s| table.weight(s.as_str()))
                    .sum::<f64>()
        })
        .sum();
    Ok(ScoredGrammar {
        patterns,
        score: GrammarScore {
            grammar_bits,
            data_bits,
            total_bits: grammar_bits + data_bits,
        },
    })
}

/// Hill climbing over subsets of `candidates`: start with all of them and
/// apply the single inclusion toggle that lowers the total most, until none
/// does. Ties go to the earlier candidate. The empty grammar is returned
/// instead when it scores lower than where the climb stops.
pub fn select_grammar(
    candidates: &[Pattern],
    corpus: &[Pattern],
    policy: &LearnPolicy,
) -> Result<ScoredGrammar> {
    if candidates.is_empty() {
        return Err(SpError::Empty("candidates"));
    }
    let subset = |mask: &[bool]| -> Vec<Pattern> {
        candidates
            .iter()
            .zip(mask)
            .filter(|(_, &on)| on)
            .map(|(p, _)| p.clone())
            .collect()
    };
    let mut mask = vec![true; candidates.len()];
    let mut current = score_grammar(&subset(&mask), corpus, policy)?;
    for _ in 0..candidates.len() * candidates.len() {
        let mut best: Option<(usize, ScoredGrammar)> = None;
        for i in 0..candidates.len() {
            mask[i] = !mask[i];
            let s = score_grammar(&subset(&mask), corpus, policy)?;
            mask[i] = !mask[i];
            if best
                .as_ref()
                .is_none_or(|(_, b)| s.score.total_bits < b.score.total_bits - 1e-9)
            {
                best = Some((i, s));
            }
        }
        match best {
            Some((i, s)) if s.score.total_bits < current.score.total_bits - 1e-9 => {
                mask[i] = !mask[i];
                current = s;
            }
            _ => break,
        }
    }
    let empty = score_grammar(&[], corpus, policy)?;
    if empty.score.total_bits < current.score.total_bits - 1e-9 {
        current = empty;
    }
    Ok(current)
}

/// Candidates from every pair of corpus patterns, matched with weights from
/// the corpus itself.
pub fn derive_from_corpus(
    corpus: &[Pattern],
    opts: &MatchOptions,
) -> Result<Vec<CandidatePattern>> {
    let table = corpus_table(corpus)?;
    let mut supply = SymbolSupply::new(corpus.iter().flat_map(|p| p.symbols()));
    let mut out = Vec::new();
    for i in 0..corpus.len() {
        for j in i + 1..corpus.len() {
            let found = match_pair(corpus[i].symbols(), corpus[j].symbols(), opts, &table)?;
            if let Some(best) = found.first() {
                out.extend(derive_candidates_with(best, &mut supply)?);
            }
        }
    }
    Ok(out)
}
