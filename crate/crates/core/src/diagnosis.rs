//! The diagnostic cycle: findings accumulate in a session and every change
//! re-runs the search, producing a report of competing hypotheses.
//!
//! A report depends only on the set of findings and the knowledge base, so
//! replaying a session's revisions, or submitting the same findings in
//! another order, yields the same report.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::alignment::{extract_code, Alignment};
use crate::error::Result;
use crate::format::parse_new_patterns;
use crate::model::{KnowledgeStore, Pattern};
use crate::probability::group_and_rank;
use crate::render::render_rotated;
use crate::search::{build_alignments, ScoredAlignment, SearchOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosisConfig {
    pub search: SearchOptions,
    /// Field names whose inferred values are tests to order rather than
    /// symptoms to expect.
    pub investigation_fields: Vec<String>,
    pub treatment_fields: Vec<String>,
    /// Field holding a hypothesis' display name.
    pub name_field: String,
    pub max_groups: usize,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        DiagnosisConfig {
            search: SearchOptions::default(),
            investigation_fields: ["blood_test", "x_ray", "chest", "lymph_nodes"]
                .map(String::from)
                .to_vec(),
            treatment_fields: vec!["treatment".into()],
            name_field: "dname".into(),
            max_groups: 5,
        }
    }
}

/// A value an Old pattern supplies for a field the findings leave open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldInference {
    pub field: String,
    pub value: String,
    pub pattern_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    /// Index into the session's ranked alignments.
    pub alignment: usize,
    pub patterns: Vec<String>,
    pub code: Vec<String>,
    pub compression: f64,
    pub code_bits: f64,
    pub p_abs: f64,
    pub p_rel: f64,
    pub predicted_symptoms: Vec<FieldInference>,
    pub investigations: Vec<FieldInference>,
    pub treatments: Vec<FieldInference>,
}

/// Hypotheses that explain the same findings and so compete directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisGroupReport {
    pub explained_symbols: usize,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub text: String,
    /// False when no alignment matches any of its symbols.
    pub explained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosisReport {
    pub findings: Vec<Finding>,
    pub groups: Vec<HypothesisGroupReport>,
    /// Rotated layout of the best alignment.
    pub top_alignment: String,
}

impl DiagnosisReport {
    pub fn top(&self) -> Option<&Hypothesis> {
        self.groups.first().and_then(|g| g.hypotheses.first())
    }
}

/// One accepted batch of findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub number: u64,
    pub added: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DiagnosisSession {
    id: String,
    kb_id: String,
    findings: BTreeSet<String>,
    revisions: Vec<Revision>,
    results: Vec<ScoredAlignment>,
    report: DiagnosisReport,
}

impl DiagnosisSession {
    pub fn new(id: impl Into<String>, kb_id: impl Into<String>) -> Self {
        DiagnosisSession {
            id: id.into(),
            kb_id: kb_id.into(),
            findings: BTreeSet::new(),
            revisions: Vec::new(),
            results: Vec::new(),
            report: DiagnosisReport::default(),
        }
    }

    /// Rebuilds a session by applying `revisions` in order.
    pub fn replay(
        id: impl Into<String>,
        kb_id: impl Into<String>,
        store: &KnowledgeStore,
        revisions: &[Revision],
        config: &DiagnosisConfig,
    ) -> Result<Self> {
        let mut s = DiagnosisSession::new(id, kb_id);
        for r in revisions {
            s.add_findings(store, &r.added.join("\n\n"), config)?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kb_id(&self) -> &str {
        &self.kb_id
    }

    pub fn findings(&self) -> impl Iterator<Item = &str> {
        self.findings.iter().map(String::as_str)
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn report(&self) -> &DiagnosisReport {
        &self.report
    }

    /// The `k`-th ranked alignment behind the current report.
    pub fn alignment(&self, k: usize) -> Option<&ScoredAlignment> {
        self.results.get(k)
    }

    /// Parses blank-line separated findings, adds the new ones and re-runs
    /// the search. Returns a warning for each finding already present.
    pub fn add_findings(
        &mut self,
        store: &KnowledgeStore,
        text: &str,
        config: &DiagnosisConfig,
    ) -> Result<Vec<String>> {
        let parsed = parse_new_patterns(text)?;
        let mut warnings = Vec::new();
        let mut added = Vec::new();
        for p in parsed {
            let t = p.text();
            if self.findings.contains(&t) || added.contains(&t) {
                warnings.push(format!("duplicate finding `{t}` ignored"));
            } else {
                added.push(t);
            }
        }
        if added.is_empty() {
            return Ok(warnings);
        }
        let mut findings = self.findings.clone();
        findings.extend(added.iter().cloned());
        let (results, report) = diagnose(store, &findings, config)?;
        self.findings = findings;
        self.results = results;
        self.report = report;
        self.revisions.push(Revision {
            number: self.revisions.len() as u64 + 1,
            added,
        });
        Ok(warnings)
    }
}

/// Runs the search over a set of findings and builds the report.
pub fn diagnose(
    store: &KnowledgeStore,
    findings: &BTreeSet<String>,
    config: &DiagnosisConfig,
) -> Result<(Vec<ScoredAlignment>, DiagnosisReport)> {
    if findings.is_empty() {
        return Ok((Vec::new(), DiagnosisReport::default()));
    }
    let patterns: Vec<Pattern> = findings
        .iter()
        .enumerate()
        .map(|(i, t)| Pattern::new_observation(format!("f{}", i + 1), t))
        .collect::<Result<_>>()?;
    let results = build_alignments(&patterns, store, &config.search)?;
    let groups = group_and_rank(results);

    // Flatten in report order so hypotheses can point at their alignment.
    let mut ranked: Vec<ScoredAlignment> = Vec::new();
    let mut out_groups = Vec::new();
    for g in &groups {
        let mut hypotheses = Vec::new();
        for m in &g.members {
            let index = ranked.len();
            ranked.push(m.clone());
            if out_groups.len() < config.max_groups {
                hypotheses.push(hypothesis(m, index, config));
            }
        }
        if out_groups.len() < config.max_groups {
            out_groups.push(HypothesisGroupReport {
                explained_symbols: g.matched_new.len(),
                hypotheses,
            });
        }
    }

    let explained: BTreeSet<String> = ranked
        .iter()
        .flat_map(|r| r.alignment.matched_new())
        .map(|(id, _)| id)
        .collect();
    let report = DiagnosisReport {
        findings: patterns
            .iter()
            .map(|p| Finding {
                id: p.id().to_owned(),
                text: p.text(),
                explained: explained.contains(p.id()),
            })
            .collect(),
        groups: out_groups,
        top_alignment: ranked
            .first()
            .map(|r| render_rotated(&r.alignment))
            .unwrap_or_default(),
    };
    Ok((ranked, report))
}

fn hypothesis(m: &ScoredAlignment, index: usize, config: &DiagnosisConfig) -> Hypothesis {
    let a = &m.alignment;
    let fields = field_inferences(a);
    let name = fields_of(a, &config.name_field)
        .into_iter()
        .next()
        .unwrap_or_else(|| {
            a.rows()
                .iter()
                .filter(|r| !r.origin().is_new())
                .map(|r| r.id())
                .collect::<Vec<_>>()
                .join("+")
        });
    let mut predicted = Vec::new();
    let mut investigations = Vec::new();
    let mut treatments = Vec::new();
    for f in fields {
        if f.field == config.name_field {
            continue;
        }
        if config.treatment_fields.contains(&f.field) {
            treatments.push(f);
        } else if config.investigation_fields.contains(&f.field) {
            investigations.push(f);
        } else {
            predicted.push(f);
        }
    }
    Hypothesis {
        name,
        alignment: index,
        patterns: a
            .rows()
            .iter()
            .filter(|r| !r.origin().is_new())
            .map(|r| r.id().to_owned())
            .collect(),
        code: extract_code(a).iter().map(|s| s.to_string()).collect(),
        compression: m.score.cd,
        code_bits: m.score.b_e,
        p_abs: m.score.p_abs,
        p_rel: m.score.p_rel.unwrap_or(1.0),
        predicted_symptoms: predicted,
        investigations,
        treatments,
    }
}

fn open_tag(s: &str) -> Option<&str> {
    s.strip_prefix('<')?
        .strip_suffix('>')
        .filter(|n| !n.is_empty() && !n.starts_with('/'))
}

fn is_tag(s: &str) -> bool {
    s.len() > 1 && s.starts_with('<') && s.ends_with('>') || s == "<" || s == ">"
}

/// `<field> value... </field>` spans of Old rows for fields the findings do
/// not mention and whose values are not aligned: what the hypothesis adds to
/// the findings.
pub fn field_inferences(a: &Alignment) -> Vec<FieldInference> {
    // Field enclosing each symbol, per row.
    let field_at: Vec<Vec<Option<&str>>> = a
        .rows()
        .iter()
        .map(|p| {
            let mut v = vec![None; p.len()];
            for (f, lo, hi) in spans(p) {
                v[lo..hi].fill(Some(f));
            }
            v
        })
        .collect();
    let is_new = |row: usize| a.rows()[row].origin().is_new();
    let mut stated: BTreeSet<&str> = BTreeSet::new();
    let mut old_fields: BTreeSet<&str> = BTreeSet::new();
    for (row, fields) in field_at.iter().enumerate() {
        let set = if is_new(row) {
            &mut stated
        } else {
            &mut old_fields
        };
        set.extend(fields.iter().flatten());
    }
    // A value may be aligned with a New symbol of another field when that
    // compresses better. It explains the value only when the New field is
    // the same one or is not a field any Old row gives a value for.
    let mut aligned: Vec<Vec<bool>> = a.rows().iter().map(|r| vec![false; r.len()]).collect();
    for col in a.columns() {
        if col.cells.len() < 2 {
            continue;
        }
        let new_fields: Vec<Option<&str>> = col
            .cells
            .iter()
            .filter(|c| is_new(c.row))
            .map(|c| field_at[c.row][c.index])
            .collect();
        for c in &col.cells {
            let own = field_at[c.row][c.index];
            aligned[c.row][c.index] = new_fields.iter().all(|g| match g {
                Some(g) => Some(*g) == own || !old_fields.contains(g),
                None => true,
            });
        }
    }
    let mut out = Vec::new();
    for (row, p) in a.rows().iter().enumerate() {
        if p.origin().is_new() {
            continue;
        }
        for (field, lo, hi) in spans(p) {
            // Stated fields are never inferred, even with a different value.
            if stated.contains(field) || (lo..hi).any(|i| aligned[row][i]) {
                continue;
            }
            out.push(FieldInference {
                field: field.to_owned(),
                value: p.symbols()[lo..hi]
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                pattern_id: p.id().to_owned(),
            });
        }
    }
    out
}

/// Values of `field` wherever it appears in any Old row.
fn fields_of(a: &Alignment, field: &str) -> Vec<String> {
    a.rows()
        .iter()
        .filter(|p| !p.origin().is_new())
        .flat_map(|p| {
            spans(p)
                .into_iter()
                .filter(|(f, _, _)| *f == field)
                .map(|(_, lo, hi)| {
                    p.symbols()[lo..hi]
                        .iter()
                        .map(|s| s.as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Non-empty, tag-free bodies of `<f> ... </f>` pairs.
fn spans(p: &Pattern) -> Vec<(&str, usize, usize)> {
    let s = p.symbols();
    let mut out = Vec::new();
    for i in 0..s.len() {
        let Some(name) = open_tag(s[i].as_str()) else {
            continue;
        };
        let close = format!("</{name}>");
        let mut j = i + 1;
        while j < s.len() && !is_tag(s[j].as_str()) {
            j += 1;
        }
        if j > i + 1 && j < s.len() && s[j].as_str() == close {
            out.push((name, i + 1, j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_knowledge_file;

    fn store() -> KnowledgeStore {
        parse_knowledge_file(
            "name=cold ids=1@1\n< cold <dname> Cold </dname> <nose> runny </nose> \
             <cough> yes </cough> <treatment> rest </treatment> > (10)",
        )
        .unwrap()
    }

    #[test]
    fn empty_session_has_empty_report() {
        let s = DiagnosisSession::new("s", "kb");
        assert!(s.report().groups.is_empty());
        assert!(s.report().top().is_none());
    }

    #[test]
    fn inferences_are_partitioned() {
        let mut s = DiagnosisSession::new("s", "kb");
        s.add_findings(
            &store(),
            "<nose> runny </nose>",
            &DiagnosisConfig::default(),
        )
        .unwrap();
        let top = s.report().top().unwrap();
        assert_eq!(top.name, "Cold");
        assert_eq!(top.p_rel, 1.0);
        let values: Vec<&str> = top
            .predicted_symptoms
            .iter()
            .map(|f| f.value.as_str())
            .collect();
        assert_eq!(values, ["yes"]);
        assert_eq!(top.treatments[0].value, "rest");
        assert!(top.investigations.is_empty());
    }

    #[test]
    fn value_aligned_across_fields_is_still_inferred() {
        use crate::alignment::{Cell, Column};
        use std::sync::Arc;
        // New `<a> yes </a>`; Old `<a> no </a> <b> yes </b>` with both `yes`
        // in one column, as if the search had crossed fields.
        let new = Arc::new(Pattern::new_observation("f1", "<a> yes </a>").unwrap());
        let old = Arc::new(
            crate::format::parse_knowledge_file("name=o ids=0\n<a> no </a> <b> yes </b> (1)")
                .unwrap()
                .patterns()[0]
                .as_ref()
                .clone(),
        );
        let cell = |row, index| Cell { row, index };
        let col = |cells: Vec<Cell>| Column { cells };
        let a = Alignment::new(
            vec![new, old],
            vec![
                col(vec![cell(0, 0), cell(1, 0)]),
                col(vec![cell(1, 1)]),
                col(vec![cell(1, 2)]),
                col(vec![cell(1, 3)]),
                col(vec![cell(0, 1), cell(1, 4)]),
                col(vec![cell(0, 2)]),
                col(vec![cell(1, 5)]),
            ],
        )
        .unwrap();
        let got: Vec<(String, String)> = field_inferences(&a)
            .into_iter()
            .map(|f| (f.field, f.value))
            .collect();
        assert_eq!(got, [("b".to_string(), "yes".to_string())]);
    }

    #[test]
    fn duplicates_warn_and_leave_history_alone() {
        let cfg = DiagnosisConfig::default();
        let mut s = DiagnosisSession::new("s", "kb");
        s.add_findings(&store(), "<nose> runny </nose>", &cfg)
            .unwrap();
        let w = s
            .add_findings(&store(), "<nose> runny </nose>", &cfg)
            .unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(s.revisions().len(), 1);
    }

    #[test]
    fn unmatched_finding_is_flagged() {
        let cfg = DiagnosisConfig::default();
        let mut s = DiagnosisSession::new("s", "kb");
        s.add_findings(&store(), "<nose> runny </nose>", &cfg)
            .unwrap();
        let before = s.report().groups.clone();
        s.add_findings(&store(), "<gait> odd </gait>", &cfg)
            .unwrap();
        assert_eq!(s.report().groups, before);
        let odd = s
            .report()
            .findings
            .iter()
            .find(|f| f.text.contains("gait"))
            .unwrap();
        assert!(!odd.explained);
    }
}
