//! Symbols, patterns, the store of Old patterns and the frequency-derived
//! symbol weights.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpError};

/// An atomic token. Two symbols are either the same or different.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(String);

impl Symbol {
    /// Builds a symbol, rejecting empty text and text containing whitespace.
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(SpError::InvalidPattern {
                id: String::new(),
                reason: format!("`{text}` is not a valid symbol"),
            });
        }
        Ok(Symbol(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Symbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    New,
    Old,
    Learned,
}

impl Origin {
    pub fn is_new(self) -> bool {
        self == Origin::New
    }
}

/// An ordered sequence of symbols with a frequency of occurrence.
///
/// A contiguous window of `id_count` symbols starting at `id_offset` is
/// designated as ID-symbols; those are the symbols that may appear in the
/// code of an alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    id: String,
    symbols: Vec<Symbol>,
    frequency: u64,
    id_offset: usize,
    id_count: usize,
    origin: Origin,
}

impl Pattern {
    pub fn new(
        id: impl Into<String>,
        symbols: Vec<Symbol>,
        frequency: u64,
        id_offset: usize,
        id_count: usize,
        origin: Origin,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| SpError::InvalidPattern {
            id: id.clone(),
            reason,
        };
        if symbols.is_empty() {
            return Err(invalid("a pattern needs at least one symbol".into()));
        }
        if frequency == 0 {
            return Err(invalid("frequency must be positive".into()));
        }
        if id_offset + id_count > symbols.len() {
            return Err(invalid(format!(
                "ID-symbol window {}..{} exceeds pattern length {}",
                id_offset,
                id_offset + id_count,
                symbols.len()
            )));
        }
        if origin.is_new() && (frequency != 1 || id_count != 0) {
            return Err(invalid(
                "New patterns carry frequency 1 and no ID-symbols".into(),
            ));
        }
        Ok(Pattern {
            id,
            symbols,
            frequency,
            id_offset,
            id_count,
            origin,
        })
    }

    /// An Old pattern from whitespace-separated text.
    pub fn old(
        id: impl Into<String>,
        text: &str,
        frequency: u64,
        id_offset: usize,
        id_count: usize,
    ) -> Result<Self> {
        Self::new(
            id,
            symbols_of(text)?,
            frequency,
            id_offset,
            id_count,
            Origin::Old,
        )
    }

    /// A New pattern from whitespace-separated text.
    pub fn new_observation(id: impl Into<String>, text: &str) -> Result<Self> {
        Self::new(id, symbols_of(text)?, 1, 0, 0, Origin::New)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn frequency(&self) -> u64 {
        self.frequency
    }

    pub fn id_offset(&self) -> usize {
        self.id_offset
    }

    pub fn id_symbol_count(&self) -> usize {
        self.id_count
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn is_id_symbol(&self, index: usize) -> bool {
        index >= self.id_offset && index < self.id_offset + self.id_count
    }

    pub fn id_symbols(&self) -> &[Symbol] {
        &self.symbols[self.id_offset..self.id_offset + self.id_count]
    }

    pub fn with_frequency(&self, frequency: u64) -> Result<Self> {
        Self::new(
            self.id.clone(),
            self.symbols.clone(),
            frequency,
            self.id_offset,
            self.id_count,
            self.origin,
        )
    }

    pub fn with_id(&self, id: impl Into<String>) -> Self {
        Pattern {
            id: id.into(),
            ..self.clone()
        }
    }

    /// Space-joined symbol text.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(s.as_str());
        }
        out
    }
}

pub(crate) fn symbols_of(text: &str) -> Result<Vec<Symbol>> {
    text.split_whitespace().map(Symbol::new).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub occurrences: u64,
    pub probability: f64,
    pub weight_bits: f64,
}

/// Symbol probabilities and code lengths derived from Old pattern frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolTable {
    entries: BTreeMap<String, SymbolEntry>,
    total: u64,
}

impl SymbolTable {
    /// Tallies every symbol occurrence weighted by its pattern's frequency.
    pub fn from_patterns<'a>(patterns: impl IntoIterator<Item = &'a Pattern>) -> Result<Self> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut any = false;
        for p in patterns {
            any = true;
            for s in p.symbols() {
                *counts.entry(s.as_str().to_owned()).or_default() += p.frequency();
            }
        }
        if !any {
            return Err(SpError::NoOldPatterns);
        }
        let total: u64 = counts.values().sum();
        let entries = counts
            .into_iter()
            .map(|(text, occurrences)| {
                let probability = occurrences as f64 / total as f64;
                let entry = SymbolEntry {
                    occurrences,
                    probability,
                    weight_bits: -probability.log2(),
                };
                (text, entry)
            })
            .collect();
        Ok(SymbolTable { entries, total })
    }

    pub fn get(&self, symbol: &str) -> Option<&SymbolEntry> {
        self.entries.get(symbol)
    }

    /// Code length in bits; symbols unseen in Old get the novel-symbol weight.
    pub fn weight(&self, symbol: &str) -> f64 {
        self.entries
            .get(symbol)
            .map_or_else(|| self.novel_weight(), |e| e.weight_bits)
    }

    /// `-log2(1 / (N + 1))` with N the total weighted occurrence count.
    pub fn novel_weight(&self) -> f64 {
        ((self.total + 1) as f64).log2()
    }

    pub fn total_occurrences(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SymbolEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// The repository of Old patterns plus its cached symbol table.
#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    patterns: Vec<Arc<Pattern>>,
    table: SymbolTable,
}

impl KnowledgeStore {
    pub fn new(patterns: Vec<Pattern>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &patterns {
            if !seen.insert(p.id().to_owned()) {
                return Err(SpError::DuplicateId(p.id().to_owned()));
            }
            if p.origin().is_new() {
                return Err(SpError::InvalidPattern {
                    id: p.id().to_owned(),
                    reason: "New patterns cannot be stored as Old knowledge".into(),
                });
            }
        }
        let table = SymbolTable::from_patterns(&patterns)?;
        Ok(KnowledgeStore {
            patterns: patterns.into_iter().map(Arc::new).collect(),
            table,
        })
    }

    pub fn patterns(&self) -> &[Arc<Pattern>] {
        &self.patterns
    }

    pub fn symbol_table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Pattern>> {
        self.patterns.iter().find(|p| p.id() == id)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Adds a pattern, recomputing the symbol table.
    pub fn insert(&mut self, pattern: Pattern) -> Result<()> {
        let mut all: Vec<Pattern> = self.patterns.iter().map(|p| (**p).clone()).collect();
        all.push(pattern);
        *self = KnowledgeStore::new(all)?;
        Ok(())
    }
}

/// Symbol table over the store's Old patterns.
pub fn compute_symbol_table(store: &KnowledgeStore) -> Result<SymbolTable> {
    SymbolTable::from_patterns(store.patterns().iter().map(|p| p.as_ref()))
}
