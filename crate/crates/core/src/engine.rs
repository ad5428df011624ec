//! Compact internal alignment representation and the merge DP that grows
//! alignments. Symbols are interned in lexicographic order so that ordering
//! interned codes matches ordering their text.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::matcher::{quantise, GapState, MatchOptions};
use crate::model::{Pattern, SymbolTable};

pub(crate) type Entries = SmallVec<[(u32, u32); 4]>;
type States = SmallVec<[GapState; 24]>;

pub(crate) struct PatInfo {
    pub pattern: Arc<Pattern>,
    pub new: bool,
    pub syms: Vec<u32>,
    pub weights: Vec<f64>,
}

impl PatInfo {
    pub fn is_id(&self, pos: u32) -> bool {
        self.pattern.is_id_symbol(pos as usize)
    }
}

pub(crate) struct Arena {
    pub pats: Vec<PatInfo>,
    pub gap_cost: f64,
}

impl Arena {
    /// Patterns keep the order given; callers sort New patterns beforehand.
    pub fn new(patterns: &[Arc<Pattern>], table: &SymbolTable, gap_cost: f64) -> Arena {
        let texts: Vec<String> = patterns
            .iter()
            .flat_map(|p| p.symbols().iter().map(|s| s.as_str().to_owned()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, u32> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();
        let pats = patterns
            .iter()
            .map(|p| PatInfo {
                pattern: p.clone(),
                new: p.origin().is_new(),
                syms: p.symbols().iter().map(|s| index[s.as_str()]).collect(),
                weights: p
                    .symbols()
                    .iter()
                    .map(|s| table.weight(s.as_str()))
                    .collect(),
            })
            .collect();
        Arena { pats, gap_cost }
    }

    pub fn single(&self, pat: u32) -> Draft {
        let info = &self.pats[pat as usize];
        let cols = (0..info.syms.len() as u32)
            .map(|pos| Col {
                sym: info.syms[pos as usize],
                entries: smallvec::smallvec![(pat, pos)],
            })
            .collect();
        Draft::new(self, smallvec::smallvec![pat], cols)
    }

    fn is_new(&self, pat: u32) -> bool {
        self.pats[pat as usize].new
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Col {
    pub sym: u32,
    pub entries: Entries,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Score {
    pub b_n: f64,
    pub b_e: f64,
    pub gaps_new: u32,
    pub gaps_all: u32,
    pub cd: f64,
}

/// Score contribution of one column; updates the per-row gap states.
#[derive(Default, Clone, Copy)]
struct Contribution {
    b_n: f64,
    b_e: f64,
    gaps_new: u32,
    gaps_all: u32,
}

fn contribution(
    arena: &Arena,
    entries: &[(u32, u32)],
    slot: impl Fn(u32) -> usize,
    states: &mut [GapState],
) -> Contribution {
    let has_old = entries.iter().any(|&(p, _)| !arena.is_new(p));
    let multi = entries.len() >= 2;
    let mut c = Contribution::default();
    for &(p, pos) in entries {
        let info = &arena.pats[p as usize];
        let matched = if info.new { has_old } else { multi };
        if info.new && matched {
            c.b_n += info.weights[pos as usize];
        }
        if !multi && info.is_id(pos) {
            c.b_e += info.weights[pos as usize];
        }
        if states[slot(p)].step(matched) {
            c.gaps_all += 1;
            if info.new {
                c.gaps_new += 1;
            }
        }
    }
    c
}

#[derive(Debug, Clone)]
pub(crate) struct Draft {
    pub rows: SmallVec<[u32; 8]>,
    pub cols: Vec<Col>,
    pub score: Score,
    pub canon: Vec<u32>,
    pub hyp: Vec<u32>,
    pub code: Vec<u32>,
}

const SEP: u32 = u32::MAX;

impl Draft {
    pub fn new(arena: &Arena, rows: SmallVec<[u32; 8]>, cols: Vec<Col>) -> Draft {
        let score = evaluate(arena, &rows, &cols);
        let mut multi: Vec<&Entries> = cols
            .iter()
            .filter(|c| c.entries.len() >= 2)
            .map(|c| &c.entries)
            .collect();
        multi.sort();
        let mut canon: Vec<u32> = rows.to_vec();
        for e in multi {
            canon.push(SEP);
            canon.extend(e.iter().flat_map(|&(p, q)| [p, q]));
        }
        let mut matched_new: Vec<(u32, u32)> = Vec::new();
        let mut code = Vec::new();
        for c in &cols {
            let has_old = c.entries.iter().any(|&(p, _)| !arena.is_new(p));
            if has_old {
                matched_new.extend(c.entries.iter().filter(|&&(p, _)| arena.is_new(p)));
            }
            if c.entries.len() == 1 {
                let (p, pos) = c.entries[0];
                if arena.pats[p as usize].is_id(pos) {
                    code.push(c.sym);
                }
            }
        }
        matched_new.sort();
        let mut hyp: Vec<u32> = rows.to_vec();
        hyp.push(SEP);
        hyp.extend(matched_new.iter().flat_map(|&(p, q)| [p, q]));
        hyp.push(SEP);
        Draft {
            rows,
            cols,
            score,
            canon,
            hyp,
            code,
        }
    }

    /// Matched New symbol instances, as a sorted key.
    pub fn matched_new(&self) -> &[u32] {
        let start = self.hyp.iter().position(|&x| x == SEP).unwrap() + 1;
        let end = start + self.hyp[start..].iter().position(|&x| x == SEP).unwrap();
        &self.hyp[start..end]
    }

    pub fn has_row(&self, pat: u32) -> bool {
        self.rows.binary_search(&pat).is_ok()
    }

    pub fn rows_subset_of(&self, other: &Draft) -> bool {
        self.rows.iter().all(|r| other.has_row(*r))
    }

    /// The alignment left after deleting one row.
    pub fn without_row(&self, arena: &Arena, row: u32) -> Draft {
        let rows = self.rows.iter().copied().filter(|&r| r != row).collect();
        let cols = self
            .cols
            .iter()
            .filter_map(|c| {
                let entries: Entries = c.entries.iter().copied().filter(|e| e.0 != row).collect();
                (!entries.is_empty()).then_some(Col {
                    sym: c.sym,
                    entries,
                })
            })
            .collect();
        Draft::new(arena, rows, cols)
    }
}

/// Total ranking: higher CD, then smaller code, fewer rows, lexicographic
/// code, more unification, fewer gaps, and finally the canonical key.
pub(crate) fn rank(a: &Draft, b: &Draft) -> std::cmp::Ordering {
    quantise(b.score.cd)
        .cmp(&quantise(a.score.cd))
        .then(quantise(a.score.b_e).cmp(&quantise(b.score.b_e)))
        .then(a.rows.len().cmp(&b.rows.len()))
        .then_with(|| a.code.cmp(&b.code))
        .then(a.cols.len().cmp(&b.cols.len()))
        .then(a.score.gaps_all.cmp(&b.score.gaps_all))
        .then_with(|| a.canon.cmp(&b.canon))
}

pub(crate) fn evaluate(arena: &Arena, rows: &[u32], cols: &[Col]) -> Score {
    let mut states: States = smallvec::smallvec![GapState::Start; rows.len()];
    let slot = |p: u32| {
        rows.binary_search(&p)
            .expect("entry row present in alignment")
    };
    let mut s = Score::default();
    for c in cols {
        let k = contribution(arena, &c.entries, slot, &mut states);
        s.b_n += k.b_n;
        s.b_e += k.b_e;
        s.gaps_new += k.gaps_new;
        s.gaps_all += k.gaps_all;
    }
    s.cd = s.b_n - s.b_e - arena.gap_cost * s.gaps_new as f64;
    s
}

type Cut = SmallVec<[i32; 24]>;

fn state_key(ideal: &[i32], last: &[i32]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = rustc_hash::FxHasher::default();
    ideal.hash(&mut h);
    last.hash(&mut h);
    h.finish()
}

#[derive(Clone)]
struct Hyp {
    score: f64,
    rank_score: i64,
    links: u32,
    gaps: i32,
    ideal: Cut,
    last: Cut,
    key: u64,
    size: i64,
    prev: u32,
    link: Option<u32>,
}

/// What backtracking needs from a hypothesis.
#[derive(Clone, Copy)]
struct Step {
    prev: u32,
    link: Option<u32>,
}

/// Per-row bookkeeping for the merged alignment: which positions are
/// already matched before any new link.
struct RowTrack {
    prev_static: Vec<i32>,
    next_static: Vec<i32>,
}

impl RowTrack {
    fn new(matched: &[bool]) -> RowTrack {
        let n = matched.len();
        let mut prev_static = vec![-1; n];
        let mut next_static = vec![-1; n];
        let mut last = -1;
        for q in 0..n {
            prev_static[q] = last;
            if matched[q] {
                last = q as i32;
            }
        }
        let mut next = -1;
        for q in (0..n).rev() {
            next_static[q] = next;
            if matched[q] {
                next = q as i32;
            }
        }
        RowTrack {
            prev_static,
            next_static,
        }
    }

    /// Change in gap count when `q` becomes matched after `last`.
    fn gap_delta(&self, q: i32, last: i32) -> i32 {
        let l = last.max(self.prev_static[q as usize]);
        let r = self.next_static[q as usize];
        let before = (l >= 0 && r >= 0 && r - l > 1) as i32;
        let after = (l >= 0 && q - l > 1) as i32 + (r >= 0 && r - q > 1) as i32;
        after - before
    }
}

fn column_value(arena: &Arena, entries: &[(u32, u32)]) -> f64 {
    let has_old = entries.iter().any(|&(p, _)| !arena.is_new(p));
    let mut v = 0.0;
    for &(p, pos) in entries {
        let info = &arena.pats[p as usize];
        if info.new && has_old {
            v += info.weights[pos as usize];
        }
        if entries.len() == 1 && info.is_id(pos) {
            v -= info.weights[pos as usize];
        }
    }
    v
}

/// Merges `b` into `a`, returning up to `max_alternatives` distinct merged
/// alignments with at least one link, best first.
///
/// `a` is treated as a partial order: a column of `b` may link to any column
/// of `a` that is not below an earlier link, whatever its position in the
/// stored column sequence. `b` is taken in its stored order. Rows present in
/// both are unified position by position.
pub(crate) fn merge(arena: &Arena, a: &Draft, b: &Draft, opts: &MatchOptions) -> Vec<Draft> {
    if b.rows_subset_of(a) || a.rows_subset_of(b) {
        return Vec::new();
    }
    let mut rows: SmallVec<[u32; 8]> = a.rows.iter().chain(b.rows.iter()).copied().collect();
    rows.sort_unstable();
    rows.dedup();
    let shared: SmallVec<[u32; 8]> = a.rows.iter().copied().filter(|r| b.has_row(*r)).collect();
    let is_shared = |p: u32| shared.binary_search(&p).is_ok();

    let n = a.cols.len();
    let m = b.cols.len();
    let mut forced_a: Vec<Option<usize>> = vec![None; n];
    let mut forced_b: Vec<Option<usize>> = vec![None; m];
    if !shared.is_empty() {
        let mut where_b: HashMap<(u32, u32), usize> = HashMap::new();
        for (j, c) in b.cols.iter().enumerate() {
            for &e in c.entries.iter().filter(|e| is_shared(e.0)) {
                where_b.insert(e, j);
            }
        }
        for (i, c) in a.cols.iter().enumerate() {
            let sig: Entries = c
                .entries
                .iter()
                .copied()
                .filter(|e| is_shared(e.0))
                .collect();
            let Some(first) = sig.first() else { continue };
            let j = where_b[first];
            let sig_b: Entries = b.cols[j]
                .entries
                .iter()
                .copied()
                .filter(|e| is_shared(e.0))
                .collect();
            if sig != sig_b {
                return Vec::new();
            }
            forced_a[i] = Some(j);
            forced_b[j] = Some(i);
        }
    } else {
        let syms_b: BTreeSet<u32> = b.cols.iter().map(|c| c.sym).collect();
        if !a.cols.iter().any(|c| syms_b.contains(&c.sym)) {
            return Vec::new();
        }
    }

    // Order structure of `a`: for every column, the per-row cut of
    // everything at or below it.
    let a_slot = |p: u32| a.rows.binary_search(&p).unwrap();
    let mut pos_col: Vec<Vec<u32>> = a
        .rows
        .iter()
        .map(|&p| vec![0; arena.pats[p as usize].syms.len()])
        .collect();
    for (i, c) in a.cols.iter().enumerate() {
        for &(p, q) in &c.entries {
            pos_col[a_slot(p)][q as usize] = i as u32;
        }
    }
    let mut down: Vec<Cut> = Vec::with_capacity(n);
    for c in &a.cols {
        let mut d: Cut = smallvec::smallvec![-1; a.rows.len()];
        for &(p, q) in &c.entries {
            if q > 0 {
                let below = &down[pos_col[a_slot(p)][q as usize - 1] as usize];
                for (x, y) in d.iter_mut().zip(below) {
                    *x = (*x).max(*y);
                }
            }
        }
        for &(p, q) in &c.entries {
            let s = a_slot(p);
            d[s] = d[s].max(q as i32);
        }
        down.push(d);
    }
    let in_ideal = |ideal: &Cut, i: usize| {
        let (p, q) = a.cols[i].entries[0];
        q as i32 <= ideal[a_slot(p)]
    };
    let mut by_sym: HashMap<u32, SmallVec<[u32; 4]>> = HashMap::new();
    for (i, c) in a.cols.iter().enumerate() {
        if forced_a[i].is_none() {
            by_sym.entry(c.sym).or_default().push(i as u32);
        }
    }

    // Matched positions of every row before linking. A New symbol counts as
    // matched once its column holds an Old symbol, an Old one once its column
    // holds anything else.
    let slot = |p: u32| rows.binary_search(&p).unwrap();
    let is_matched = |p: u32, entries: &[(u32, u32)]| {
        if arena.is_new(p) {
            entries.iter().any(|&(x, _)| !arena.is_new(x))
        } else {
            entries.len() >= 2
        }
    };
    let mut matched: Vec<Vec<bool>> = rows
        .iter()
        .map(|&p| vec![false; arena.pats[p as usize].syms.len()])
        .collect();
    for c in a.cols.iter().chain(b.cols.iter()) {
        for &(p, q) in &c.entries {
            if is_matched(p, &c.entries) {
                matched[slot(p)][q as usize] = true;
            }
        }
    }
    let tracks: Vec<RowTrack> = matched.iter().map(|v| RowTrack::new(v)).collect();
    let gap = arena.gap_cost;

    let cap = opts.depth * 8;
    // Pairwise matches keep more alternatives per state; they seed everything.
    let per_state = if rows.len() <= 2 {
        opts.max_alternatives
    } else {
        2
    };
    let mut steps: Vec<Vec<Step>> = Vec::with_capacity(m);
    let mut current: Vec<Hyp> = vec![Hyp {
        score: 0.0,
        rank_score: 0,
        links: 0,
        gaps: 0,
        ideal: smallvec::smallvec![-1; a.rows.len()],
        last: smallvec::smallvec![-1; rows.len()],
        key: 0,
        size: 0,
        prev: 0,
        link: None,
    }];
    let mut buf = Entries::new();
    // Columns of `b` with nothing to link to leave the states unchanged and
    // get no layer of their own.
    let mut layer_col: Vec<usize> = Vec::new();
    for j in 0..m {
        let bc = &b.cols[j];
        let b_value = column_value(arena, &bc.entries);
        let targets: SmallVec<[u32; 4]> = match forced_b[j] {
            Some(i) => smallvec::smallvec![i as u32],
            None => by_sym.get(&bc.sym).cloned().unwrap_or_default(),
        };
        if targets.is_empty() {
            continue;
        }
        layer_col.push(j);
        let mut next: Vec<Hyp> = Vec::new();
        for (k, h) in current.iter().enumerate() {
            if forced_b[j].is_none() {
                let mut s = h.clone();
                s.prev = k as u32;
                s.link = None;
                next.push(s);
            }
            for &i in &targets {
                let i = i as usize;
                if in_ideal(&h.ideal, i) {
                    continue;
                }
                let ac = &a.cols[i];
                union_into(&mut buf, &ac.entries, &bc.entries);
                let mut score = h.score + column_value(arena, &buf)
                    - column_value(arena, &ac.entries)
                    - b_value;
                let mut last = h.last.clone();
                let mut gaps = h.gaps;
                for &(p, q) in buf.iter() {
                    let r = slot(p);
                    if !matched[r][q as usize] && is_matched(p, &buf) {
                        let d = tracks[r].gap_delta(q as i32, last[r]);
                        if arena.is_new(p) {
                            score -= gap * d as f64;
                        }
                        gaps += d;
                        last[r] = q as i32;
                    }
                }
                let mut ideal = h.ideal.clone();
                for (x, y) in ideal.iter_mut().zip(&down[i]) {
                    *x = (*x).max(*y);
                }
                let size = ideal.iter().map(|&x| x as i64).sum();
                let key = state_key(&ideal, &last);
                next.push(Hyp {
                    score,
                    rank_score: quantise(score),
                    links: h.links + 1,
                    gaps,
                    ideal,
                    last,
                    key,
                    size,
                    prev: k as u32,
                    link: Some(i as u32),
                });
            }
        }
        let mut order: Vec<u32> = (0..next.len() as u32).collect();
        order.sort_by(|&i, &j| {
            let (x, y) = (&next[i as usize], &next[j as usize]);
            y.rank_score
                .cmp(&x.rank_score)
                .then(y.links.cmp(&x.links))
                .then(x.gaps.cmp(&y.gaps))
                .then(x.size.cmp(&y.size))
        });
        // Several histories may share a state; keep a few of each so that
        // equally good alternatives survive, within the overall budget.
        let mut seen: FxHashMap<u64, usize> = FxHashMap::default();
        order.retain(|&i| {
            let fresh = seen.len() < cap;
            match seen.entry(next[i as usize].key) {
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    *e.get_mut() += 1;
                    *e.get() <= per_state
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(1);
                    fresh
                }
            }
        });
        let mut slots: Vec<Option<Hyp>> = next.into_iter().map(Some).collect();
        current = order
            .iter()
            .map(|&i| slots[i as usize].take().unwrap())
            .collect();
        steps.push(
            current
                .iter()
                .map(|h| Step {
                    prev: h.prev,
                    link: h.link,
                })
                .collect(),
        );
    }

    let mut out: Vec<Draft> = Vec::new();
    let finals = current.len();
    let mut hyps_seen: Vec<Vec<u32>> = Vec::new();
    // New symbols each candidate newly explains; alternatives that differ
    // only in how Old rows are unified are assembled at most twice.
    let mut per_signature: FxHashMap<Vec<(u32, u32)>, usize> = FxHashMap::default();
    for k in 0..finals.min(opts.max_alternatives * 8) {
        let mut links: Vec<Option<u32>> = vec![None; m];
        let mut k = k;
        for (l, &j) in layer_col.iter().enumerate().rev() {
            let h = steps[l][k];
            links[j] = h.link;
            k = h.prev as usize;
        }
        if links.iter().all(Option::is_none) {
            continue;
        }
        let mut signature: Vec<(u32, u32)> = Vec::new();
        for (j, link) in links.iter().enumerate() {
            if let Some(i) = link {
                union_into(&mut buf, &a.cols[*i as usize].entries, &b.cols[j].entries);
                if buf.iter().any(|&(p, _)| !arena.is_new(p)) {
                    signature.extend(buf.iter().filter(|&&(p, _)| arena.is_new(p)));
                }
            }
        }
        signature.sort_unstable();
        let count = per_signature.entry(signature).or_default();
        *count += 1;
        if *count > 2 {
            continue;
        }
        if let Some(cols) = assemble(arena, a, b, &rows, &links) {
            let draft = Draft::new(arena, rows.clone(), cols);
            if !out.iter().any(|d| d.canon == draft.canon) {
                if !hyps_seen.contains(&draft.hyp) {
                    hyps_seen.push(draft.hyp.clone());
                }
                out.push(draft);
            }
        }
        if hyps_seen.len() >= opts.max_alternatives {
            break;
        }
    }
    // Best of each distinct explanation first, then the rest by rank.
    out.sort_by(rank);
    let mut firsts: Vec<Draft> = Vec::new();
    let mut rest: Vec<Draft> = Vec::new();
    for d in out {
        if firsts.iter().any(|f| f.hyp == d.hyp) {
            rest.push(d);
        } else {
            firsts.push(d);
        }
    }
    firsts.extend(rest);
    firsts.truncate(opts.max_alternatives);
    firsts
}

/// Lays out the merged columns in an order consistent with every row,
/// keeping `a`'s order and slotting unlinked columns of `b` after the
/// column their predecessor in `b` was linked to.
fn assemble(
    arena: &Arena,
    a: &Draft,
    b: &Draft,
    rows: &[u32],
    links: &[Option<u32>],
) -> Option<Vec<Col>> {
    let n = a.cols.len();
    let mut cols: Vec<Col> = a.cols.clone();
    let mut keys: Vec<(usize, u8, usize)> = (0..n).map(|i| (i + 1, 0, i)).collect();
    let mut anchor = 0;
    for (j, bc) in b.cols.iter().enumerate() {
        match links[j] {
            Some(i) => {
                let i = i as usize;
                let mut entries = Entries::new();
                union_into(&mut entries, &cols[i].entries, &bc.entries);
                cols[i].entries = entries;
                anchor = i + 1;
            }
            None => {
                keys.push((anchor, 1, j));
                cols.push(bc.clone());
            }
        }
    }
    let slot = |p: u32| rows.binary_search(&p).unwrap();
    let mut at: Vec<Vec<usize>> = rows
        .iter()
        .map(|&p| vec![usize::MAX; arena.pats[p as usize].syms.len()])
        .collect();
    for (v, c) in cols.iter().enumerate() {
        for &(p, q) in &c.entries {
            at[slot(p)][q as usize] = v;
        }
    }
    let total = cols.len();
    let mut indegree = vec![0u32; total];
    let mut succ: Vec<SmallVec<[usize; 4]>> = vec![SmallVec::new(); total];
    for row in &at {
        for w in row.windows(2) {
            succ[w[0]].push(w[1]);
            indegree[w[1]] += 1;
        }
    }
    let mut heap: BinaryHeap<Reverse<((usize, u8, usize), usize)>> = (0..total)
        .filter(|&v| indegree[v] == 0)
        .map(|v| Reverse((keys[v], v)))
        .collect();
    let mut order = Vec::with_capacity(total);
    while let Some(Reverse((_, v))) = heap.pop() {
        order.push(v);
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                heap.push(Reverse((keys[w], w)));
            }
        }
    }
    if order.len() != total {
        debug_assert!(false, "merged columns are cyclic");
        return None;
    }
    let mut slots: Vec<Option<Col>> = cols.into_iter().map(Some).collect();
    Some(
        order
            .into_iter()
            .map(|v| slots[v].take().unwrap())
            .collect(),
    )
}

fn union_into(out: &mut Entries, x: &[(u32, u32)], y: &[(u32, u32)]) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) if a == b => {
                i += 1;
                j += 1;
                a
            }
            (Some(&a), Some(&b)) if a < b => {
                i += 1;
                a
            }
            (Some(_), Some(&b)) => {
                j += 1;
                b
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (None, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
}
