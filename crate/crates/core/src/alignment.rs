//! Multiple alignments of New and Old patterns, and their evaluation.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::engine::{self, Arena, Col, Draft};
use crate::error::{Result, SpError};
use crate::matcher::MatchOptions;
use crate::model::{Origin, Pattern, Symbol, SymbolTable};

/// A cell of a column: symbol `index` of the pattern in row `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub cells: Vec<Cell>,
}

impl Column {
    pub fn is_singleton(&self) -> bool {
        self.cells.len() == 1
    }
}

/// Rows of patterns with identical symbols stacked in columns.
///
/// Columns partition every symbol of every row; within a row, column order
/// follows symbol order; a column's symbols are all the same.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    rows: Vec<Arc<Pattern>>,
    columns: Vec<Column>,
}

impl Alignment {
    pub fn new(rows: Vec<Arc<Pattern>>, columns: Vec<Column>) -> Result<Self> {
        let a = Alignment { rows, columns };
        a.validate()?;
        Ok(a)
    }

    /// One row, every symbol in its own column.
    pub fn single(pattern: Arc<Pattern>) -> Self {
        let columns = (0..pattern.len())
            .map(|index| Column {
                cells: vec![Cell { row: 0, index }],
            })
            .collect();
        Alignment {
            rows: vec![pattern],
            columns,
        }
    }

    pub fn rows(&self) -> &[Arc<Pattern>] {
        &self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn symbol(&self, cell: Cell) -> &Symbol {
        &self.rows[cell.row].symbols()[cell.index]
    }

    /// The symbol shared by all cells of a column.
    pub fn column_symbol(&self, column: &Column) -> &Symbol {
        self.symbol(column.cells[0])
    }

    pub fn is_new_row(&self, row: usize) -> bool {
        self.rows[row].origin().is_new()
    }

    /// True when the column holds at least one Old symbol.
    pub fn has_old(&self, column: &Column) -> bool {
        column.cells.iter().any(|c| !self.is_new_row(c.row))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SpError::InvalidAlignment(m));
        let mut ids = HashSet::new();
        for r in &self.rows {
            if !ids.insert(r.id()) {
                return bad(format!("pattern `{}` appears in more than one row", r.id()));
            }
        }
        let mut next: Vec<usize> = vec![0; self.rows.len()];
        for (k, col) in self.columns.iter().enumerate() {
            if col.cells.is_empty() {
                return bad(format!("column {k} is empty"));
            }
            let mut seen_rows = HashSet::new();
            for c in &col.cells {
                if c.row >= self.rows.len() {
                    return bad(format!("column {k} refers to missing row {}", c.row));
                }
                if !seen_rows.insert(c.row) {
                    return bad(format!("column {k} holds row {} twice", c.row));
                }
                if c.index != next[c.row] {
                    return bad(format!(
                        "row {} symbol {} out of order in column {k}",
                        c.row, c.index
                    ));
                }
                next[c.row] += 1;
                if self.symbol(*c) != self.symbol(col.cells[0]) {
                    return bad(format!("column {k} mixes different symbols"));
                }
            }
        }
        for (r, p) in self.rows.iter().enumerate() {
            if next[r] != p.len() {
                return bad(format!("row {r} is not fully covered by columns"));
            }
        }
        Ok(())
    }

    /// Matched New symbol instances as (pattern id, symbol index), sorted.
    pub fn matched_new(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self
            .columns
            .iter()
            .filter(|c| self.has_old(c))
            .flat_map(|c| c.cells.iter())
            .filter(|c| self.is_new_row(c.row))
            .map(|c| (self.rows[c.row].id().to_owned(), c.index))
            .collect();
        out.sort();
        out
    }

    pub(crate) fn to_draft(&self, arena: &Arena, index_of: impl Fn(&str) -> u32) -> Draft {
        let ix: Vec<u32> = self.rows.iter().map(|r| index_of(r.id())).collect();
        let mut rows: SmallVec<[u32; 8]> = ix.iter().copied().collect();
        rows.sort_unstable();
        let cols = self
            .columns
            .iter()
            .map(|c| {
                let mut entries: engine::Entries = c
                    .cells
                    .iter()
                    .map(|e| (ix[e.row], e.index as u32))
                    .collect();
                entries.sort_unstable();
                let (p, q) = entries[0];
                Col {
                    sym: arena.pats[p as usize].syms[q as usize],
                    entries,
                }
            })
            .collect();
        Draft::new(arena, rows, cols)
    }

    pub(crate) fn from_draft(arena: &Arena, d: &Draft) -> Alignment {
        // New rows first, then Old rows, each in arena order.
        let mut order: Vec<u32> = d.rows.to_vec();
        order.sort_by_key(|&p| (!arena.pats[p as usize].new, p));
        let row_of = |p: u32| order.iter().position(|&x| x == p).unwrap();
        let rows = order
            .iter()
            .map(|&p| arena.pats[p as usize].pattern.clone())
            .collect();
        let columns = d
            .cols
            .iter()
            .map(|c| {
                let mut cells: Vec<Cell> = c
                    .entries
                    .iter()
                    .map(|&(p, q)| Cell {
                        row: row_of(p),
                        index: q as usize,
                    })
                    .collect();
                cells.sort();
                Column { cells }
            })
            .collect();
        Alignment { rows, columns }
    }
}

/// Evaluation of one alignment in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    /// Weight of New symbols matched to Old symbols.
    pub b_n: f64,
    /// Weight of the code.
    pub b_e: f64,
    pub gap_adjust: f64,
    pub gaps: usize,
    pub cd: f64,
    /// `2^-b_e`.
    pub p_abs: f64,
    /// Set by grouping.
    pub p_rel: Option<f64>,
}

impl AlignmentScore {
    pub(crate) fn from_engine(s: &engine::Score, gap_cost: f64) -> Self {
        AlignmentScore {
            b_n: s.b_n,
            b_e: s.b_e,
            gap_adjust: gap_cost * s.gaps_new as f64,
            gaps: s.gaps_new as usize,
            cd: s.cd,
            p_abs: (-s.b_e).exp2(),
            p_rel: None,
        }
    }
}

/// Lone ID-symbols, scanned left to right.
pub fn extract_code(a: &Alignment) -> Vec<Symbol> {
    a.columns
        .iter()
        .filter(|c| c.is_singleton())
        .map(|c| c.cells[0])
        .filter(|c| a.rows[c.row].is_id_symbol(c.index))
        .map(|c| a.symbol(c).clone())
        .collect()
}

pub(crate) fn arena_for(a: &Alignment, weights: &SymbolTable, gap: f64) -> Arena {
    let mut rows: Vec<Arc<Pattern>> = a.rows.clone();
    rows.sort_by(|x, y| {
        (x.origin() != Origin::New, x.id()).cmp(&(y.origin() != Origin::New, y.id()))
    });
    Arena::new(&rows, weights, gap)
}

/// Compression difference and probabilities of an alignment.
pub fn score_alignment(
    a: &Alignment,
    weights: &SymbolTable,
    opts: &MatchOptions,
) -> AlignmentScore {
    let arena = arena_for(a, weights, opts.gap_cost_bits);
    let draft = a.to_draft(&arena, |id| {
        arena
            .pats
            .iter()
            .position(|p| p.pattern.id() == id)
            .unwrap() as u32
    });
    AlignmentScore::from_engine(&draft.score, opts.gap_cost_bits)
}
