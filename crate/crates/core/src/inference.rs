//! Inferences: Old symbols in an alignment that no New symbol accounts for.

use serde::{Deserialize, Serialize};

use crate::alignment::{Alignment, AlignmentScore};
use crate::model::Symbol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub pattern_id: String,
    pub start: usize,
    pub symbols: Vec<Symbol>,
    pub probability: f64,
}

impl Inference {
    pub fn text(&self) -> String {
        self.symbols
            .iter()
            .map(Symbol::as_str)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Whether `needle` occurs as a contiguous run inside this inference.
    pub fn contains(&self, needle: &str) -> bool {
        let n: Vec<&str> = needle.split_whitespace().collect();
        let h: Vec<&str> = self.symbols.iter().map(Symbol::as_str).collect();
        !n.is_empty() && h.windows(n.len()).any(|w| w == n.as_slice())
    }
}

/// Maximal runs, per Old row, of symbols whose column holds no New symbol.
pub fn extract_inferences(a: &Alignment, score: &AlignmentScore) -> Vec<Inference> {
    let probability = score.p_rel.unwrap_or(score.p_abs);
    let mut new_linked: Vec<Vec<bool>> = a.rows().iter().map(|r| vec![false; r.len()]).collect();
    for col in a.columns() {
        if col.cells.iter().any(|c| a.is_new_row(c.row)) {
            for c in &col.cells {
                new_linked[c.row][c.index] = true;
            }
        }
    }
    let mut out = Vec::new();
    for (row, pattern) in a.rows().iter().enumerate() {
        if a.is_new_row(row) {
            continue;
        }
        let mut start = None;
        for i in 0..=pattern.len() {
            let free = i < pattern.len() && !new_linked[row][i];
            match (free, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push(Inference {
                        pattern_id: pattern.id().to_owned(),
                        start: s,
                        symbols: pattern.symbols()[s..i].to_vec(),
                        probability,
                    });
                    start = None;
                }
                _ => {}
            }
        }
    }
    out
}
