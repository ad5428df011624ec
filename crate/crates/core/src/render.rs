//! Text layouts and a structured document for alignments.

use serde::{Deserialize, Serialize};

use crate::alignment::{extract_code, Alignment, AlignmentScore};
use crate::model::Origin;

/// Rows as lines, New rows first, matched cells joined by `|`.
pub fn render_horizontal(a: &Alignment) -> String {
    let rows = a.rows().len();
    let widths: Vec<usize> = a
        .columns()
        .iter()
        .map(|c| a.column_symbol(c).as_str().chars().count())
        .collect();
    let label_w = rows.saturating_sub(1).to_string().len();
    let present = |row: usize, c: usize| a.columns()[c].cells.iter().any(|x| x.row == row);
    let spans = |c: usize| {
        let rs: Vec<usize> = a.columns()[c].cells.iter().map(|x| x.row).collect();
        (*rs.iter().min().unwrap(), *rs.iter().max().unwrap())
    };
    let mut out = String::new();
    for r in 0..rows {
        let mut line = format!("{:>label_w$} ", r);
        for (c, w) in widths.iter().enumerate() {
            let (lo, hi) = spans(c);
            let cell = if present(r, c) {
                a.column_symbol(&a.columns()[c]).to_string()
            } else if lo < r && r < hi {
                "|".to_string()
            } else {
                String::new()
            };
            line.push_str(&format!(" {:<w$}", cell));
        }
        out.push_str(line.trim_end());
        out.push_str(&format!(" {r}\n"));
        if r + 1 < rows {
            let mut link = " ".repeat(label_w + 1);
            for (c, w) in widths.iter().enumerate() {
                let (lo, hi) = spans(c);
                let cell = if lo <= r && r < hi { "|" } else { "" };
                link.push_str(&format!(" {:<w$}", cell));
            }
            let link = link.trim_end();
            if !link.trim().is_empty() {
                out.push_str(link);
                out.push('\n');
            }
        }
    }
    out
}

/// One pattern per text column, one alignment column per line, matched
/// symbols joined by dashes. New rows come first.
pub fn render_rotated(a: &Alignment) -> String {
    let rows = a.rows().len();
    let mut widths = vec![1usize; rows];
    for c in a.columns() {
        for x in &c.cells {
            widths[x.row] = widths[x.row].max(a.symbol(*x).as_str().chars().count());
        }
    }
    let header: Vec<String> = (0..rows)
        .map(|r| format!("{:<w$}", r, w = widths[r]))
        .collect();
    let mut out = header.join("    ").trim_end().to_string();
    out.push_str("\n\n");
    for col in a.columns() {
        let mut cells: Vec<Option<String>> = vec![None; rows];
        for x in &col.cells {
            cells[x.row] = Some(a.symbol(*x).to_string());
        }
        let first = cells.iter().position(Option::is_some).unwrap();
        let last = cells.iter().rposition(Option::is_some).unwrap();
        let mut line = String::new();
        for r in 0..rows {
            let joined = r >= first && r < last;
            let text = cells[r].clone().unwrap_or_default();
            let fill = if joined { '-' } else { ' ' };
            let mut cell = text.clone();
            if r > first && r <= last && cells[r].is_none() {
                cell.clear();
            }
            let pad = widths[r] - cell.chars().count();
            if cells[r].is_some() || !joined {
                line.push_str(&cell);
                line.extend(std::iter::repeat_n(fill, pad));
            } else {
                line.extend(std::iter::repeat_n('-', widths[r]));
            }
            if r + 1 < rows {
                if joined {
                    line.push_str(if cells[r].is_some() { " -- " } else { "----" });
                } else {
                    line.push_str("    ");
                }
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDocument {
    pub row: usize,
    pub pattern_id: String,
    pub origin: Origin,
    pub frequency: u64,
    pub symbols: Vec<String>,
    pub id_symbols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDocument {
    pub row: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDocument {
    pub symbol: String,
    pub cells: Vec<CellDocument>,
}

/// Machine-readable alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDocument {
    pub rows: Vec<RowDocument>,
    pub columns: Vec<ColumnDocument>,
    pub code: Vec<String>,
    pub score: AlignmentScore,
}

impl AlignmentDocument {
    pub fn new(a: &Alignment, score: &AlignmentScore) -> Self {
        let rows = a
            .rows()
            .iter()
            .enumerate()
            .map(|(row, p)| RowDocument {
                row,
                pattern_id: p.id().to_owned(),
                origin: p.origin(),
                frequency: p.frequency(),
                symbols: p.symbols().iter().map(|s| s.to_string()).collect(),
                id_symbols: (p.id_offset()..p.id_offset() + p.id_symbol_count()).collect(),
            })
            .collect();
        let columns = a
            .columns()
            .iter()
            .map(|c| ColumnDocument {
                symbol: a.column_symbol(c).to_string(),
                cells: c
                    .cells
                    .iter()
                    .map(|x| CellDocument {
                        row: x.row,
                        index: x.index,
                    })
                    .collect(),
            })
            .collect();
        AlignmentDocument {
            rows,
            columns,
            code: extract_code(a).iter().map(|s| s.to_string()).collect(),
            score: *score,
        }
    }
}
