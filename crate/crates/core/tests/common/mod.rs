//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::Rng;

/// A pattern as plain data: symbols, frequency and the number of leading
/// code symbols.
#[derive(Debug, Clone)]
pub struct Plain {
    pub symbols: Vec<String>,
    pub frequency: u64,
    pub ids: usize,
}

/// Symbol weights computed directly from pattern frequencies.
pub fn weights(olds: &[Plain]) -> (HashMap<String, f64>, f64) {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for p in olds {
        for s in &p.symbols {
            *counts.entry(s.clone()).or_default() += p.frequency;
            total += p.frequency;
        }
    }
    let w = counts
        .into_iter()
        .map(|(s, c)| (s, (total as f64 / c as f64).log2()))
        .collect();
    (w, ((total + 1) as f64).log2())
}

/// Best compression difference over every alignment of `new` with any
/// subset of `olds`, each used at most once. Returns negative infinity only
/// when nothing at all can be formed.
pub fn best_cd(new: &[String], olds: &[Plain], gap_cost: f64) -> f64 {
    let (w, novel) = weights(olds);
    let weight = |s: &str| *w.get(s).unwrap_or(&novel);
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << olds.len()) {
        let chosen: Vec<&Plain> = (0..olds.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &olds[i])
            .collect();
        let mut memo = HashMap::new();
        let start = vec![0usize; chosen.len() + 1];
        let v = lattice(new, &chosen, &weight, gap_cost, start, 0, &mut memo);
        best = best.max(v);
    }
    best
}

/// `state` for the New row: 0 = nothing matched yet, 1 = last symbol
/// matched, 2 = unmatched run after a match.
fn lattice(
    new: &[String],
    olds: &[&Plain],
    weight: &dyn Fn(&str) -> f64,
    gap_cost: f64,
    pos: Vec<usize>,
    state: u8,
    memo: &mut HashMap<(Vec<usize>, u8), f64>,
) -> f64 {
    let rows = olds.len() + 1;
    let sym = |r: usize, i: usize| -> Option<&str> {
        if r == 0 {
            new.get(i).map(|s| s.as_str())
        } else {
            olds[r - 1].symbols.get(i).map(|s| s.as_str())
        }
    };
    if (0..rows).all(|r| sym(r, pos[r]).is_none()) {
        return 0.0;
    }
    if let Some(&v) = memo.get(&(pos.clone(), state)) {
        return v;
    }
    let mut best = f64::NEG_INFINITY;
    for subset in 1u32..(1 << rows) {
        let members: Vec<usize> = (0..rows).filter(|r| subset & (1 << r) != 0).collect();
        let Some(first) = sym(members[0], pos[members[0]]) else {
            continue;
        };
        if !members.iter().all(|&r| sym(r, pos[r]) == Some(first)) {
            continue;
        }
        let has_old = members.iter().any(|&r| r > 0);
        let mut gain = 0.0;
        let mut next_state = state;
        if subset & 1 != 0 {
            if has_old {
                gain += weight(first);
                if state == 2 {
                    gain -= gap_cost;
                }
                next_state = 1;
            } else if state != 0 {
                next_state = 2;
            }
        }
        if members.len() == 1 && members[0] > 0 && pos[members[0]] < olds[members[0] - 1].ids {
            gain -= weight(first);
        }
        let mut next = pos.clone();
        for &r in &members {
            next[r] += 1;
        }
        let v = gain + lattice(new, olds, weight, gap_cost, next, next_state, memo);
        best = best.max(v);
    }
    memo.insert((pos, state), best);
    best
}

pub fn random_symbols(rng: &mut StdRng, alphabet: usize, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| ((b'a' + rng.gen_range(0..alphabet) as u8) as char).to_string())
        .collect()
}

/// A random instance: one New pattern and up to three Old patterns whose
/// first symbol is a unique code symbol.
pub fn random_instance(rng: &mut StdRng) -> (Vec<String>, Vec<Plain>) {
    let alphabet = rng.gen_range(2..=4);
    let len = rng.gen_range(1..=8);
    let new = random_symbols(rng, alphabet, len);
    let count = rng.gen_range(1..=3);
    let olds = (0..count)
        .map(|i| {
            let mut symbols = vec![format!("P{i}")];
            let len = rng.gen_range(1..=7);
            symbols.extend(random_symbols(rng, alphabet, len));
            Plain {
                symbols,
                frequency: rng.gen_range(1..=20),
                ids: 1,
            }
        })
        .collect();
    (new, olds)
}

pub fn knowledge_text(olds: &[Plain]) -> String {
    olds.iter()
        .enumerate()
        .map(|(i, p)| {
            format!(
                "name=o{i} ids={}\n{} ({})",
                p.ids,
                p.symbols.join(" "),
                p.frequency
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}
