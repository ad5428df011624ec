//! Plain-text knowledge and observation files.
//!
//! A knowledge file is a sequence of blocks separated by blank lines. A block
//! may start with a header line of `key=value` tokens (`ids=<k>` or
//! `ids=<k>@<offset>`, and `name=<id>`), followed by whitespace-separated
//! symbols over any number of lines, ending with a `(<frequency>)` token.
//! Lines starting with `#` are comments. Observation files use the same
//! layout without header or frequency.

use std::fmt::Write as _;

use log::warn;

use crate::error::{Result, SpError};
use crate::model::{KnowledgeStore, Pattern, Symbol};

struct Block<'a> {
    first_line: usize,
    lines: Vec<(usize, &'a str)>,
}

fn blocks(text: &str) -> Vec<Block<'_>> {
    let mut out = Vec::new();
    let mut current: Option<Block<'_>> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if let Some(b) = current.take() {
                out.push(b);
            }
            continue;
        }
        current
            .get_or_insert_with(|| Block {
                first_line: line_no,
                lines: Vec::new(),
            })
            .lines
            .push((line_no, line));
    }
    out.extend(current);
    out
}

#[derive(Default)]
struct Header {
    name: Option<String>,
    id_count: usize,
    id_offset: usize,
}

fn is_header_token(t: &str) -> bool {
    t.starts_with("ids=") || t.starts_with("name=")
}

fn parse_header(line_no: usize, line: &str) -> Result<Header> {
    let bad = |message: String| SpError::Parse {
        line: line_no,
        message,
    };
    let mut header = Header::default();
    for token in line.split_whitespace() {
        if let Some(v) = token.strip_prefix("ids=") {
            let (count, offset) = match v.split_once('@') {
                Some((c, o)) => (c, o),
                None => (v, "0"),
            };
            header.id_count = count
                .parse()
                .map_err(|_| bad(format!("bad ID-symbol count `{v}`")))?;
            header.id_offset = offset
                .parse()
                .map_err(|_| bad(format!("bad ID-symbol offset `{v}`")))?;
        } else if let Some(v) = token.strip_prefix("name=") {
            if v.is_empty() {
                return Err(bad("empty pattern name".into()));
            }
            header.name = Some(v.to_owned());
        }
    }
    Ok(header)
}

fn parse_frequency(line_no: usize, token: &str) -> Result<u64> {
    let inner = token
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| SpError::Parse {
            line: line_no,
            message: "pattern must end with a frequency such as `(10)`".into(),
        })?;
    match inner.parse::<i64>() {
        Ok(f) if f > 0 => Ok(f as u64),
        Ok(_) => Err(SpError::Parse {
            line: line_no,
            message: format!("frequency must be positive, got {inner}"),
        }),
        Err(_) => Err(SpError::Parse {
            line: line_no,
            message: format!("bad frequency `{inner}`"),
        }),
    }
}

/// Parses a knowledge file into a store of Old patterns.
///
/// Patterns without a `name=` header are named `p1`, `p2`, ... by position.
pub fn parse_knowledge_file(text: &str) -> Result<KnowledgeStore> {
    let mut patterns = Vec::new();
    for (n, block) in blocks(text).into_iter().enumerate() {
        let mut tokens: Vec<(usize, &str)> = block
            .lines
            .iter()
            .flat_map(|&(no, l)| l.split_whitespace().map(move |t| (no, t)))
            .collect();
        // Header tokens lead the block, on their own line or inline.
        let lead = tokens
            .iter()
            .take_while(|(_, t)| is_header_token(t))
            .count();
        let header = match tokens.first() {
            Some(&(line_no, _)) if lead > 0 => {
                let text: Vec<&str> = tokens[..lead].iter().map(|t| t.1).collect();
                parse_header(line_no, &text.join(" "))?
            }
            _ => Header::default(),
        };
        tokens.drain(..lead);
        let last_line = block.lines.last().map_or(block.first_line, |l| l.0);
        let (freq_line, freq_token) = tokens.pop().ok_or(SpError::Parse {
            line: last_line,
            message: "block has no symbols".into(),
        })?;
        let frequency = parse_frequency(freq_line, freq_token)?;
        if tokens.is_empty() {
            return Err(SpError::Parse {
                line: freq_line,
                message: "block has no symbols".into(),
            });
        }
        let symbols = tokens
            .into_iter()
            .map(|(_, t)| Symbol::new(t))
            .collect::<Result<Vec<_>>>()?;
        let id = header.name.unwrap_or_else(|| format!("p{}", n + 1));
        let pattern = Pattern::new(
            id,
            symbols,
            frequency,
            header.id_offset,
            header.id_count,
            crate::model::Origin::Old,
        )
        .map_err(|e| SpError::Parse {
            line: block.first_line,
            message: e.to_string(),
        })?;
        patterns.push(pattern);
    }
    KnowledgeStore::new(patterns)
}

/// Parses observation blocks into New patterns named `n1`, `n2`, ...
///
/// Empty blocks are skipped with a warning.
pub fn parse_new_patterns(text: &str) -> Result<Vec<Pattern>> {
    let mut out = Vec::new();
    for block in blocks(text) {
        let body: Vec<&str> = block
            .lines
            .iter()
            .flat_map(|(_, l)| l.split_whitespace())
            .collect();
        if body.is_empty() {
            warn!("skipping empty block at line {}", block.first_line);
            continue;
        }
        let id = format!("n{}", out.len() + 1);
        let pattern =
            Pattern::new_observation(id, &body.join(" ")).map_err(|e| SpError::Parse {
                line: block.first_line,
                message: e.to_string(),
            })?;
        out.push(pattern);
    }
    Ok(out)
}

/// Writes a store in knowledge-file format; `parse_knowledge_file` reads it back.
pub fn serialize_knowledge(patterns: &[impl AsRef<Pattern>]) -> String {
    let mut out = String::new();
    for (i, p) in patterns.iter().enumerate() {
        let p = p.as_ref();
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "name={}", p.id());
        if p.id_symbol_count() > 0 {
            let _ = write!(out, " ids={}", p.id_symbol_count());
            if p.id_offset() > 0 {
                let _ = write!(out, "@{}", p.id_offset());
            }
        }
        let _ = writeln!(out, "\n{} ({})", p.text(), p.frequency());
    }
    out
}

/// Writes observation patterns one block each.
pub fn serialize_new_patterns(patterns: &[Pattern]) -> String {
    patterns
        .iter()
        .map(|p| p.text())
        .collect::<Vec<_>>()
        .join("\n\n")
        + "\n"
}

impl AsRef<Pattern> for Pattern {
    fn as_ref(&self) -> &Pattern {
        self
    }
}
