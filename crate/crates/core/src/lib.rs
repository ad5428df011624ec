//! Pattern recognition as information compression.
//!
//! New observation patterns are aligned against a store of frequency-weighted
//! Old patterns. Each alignment is scored by how many bits of New it explains
//! (`b_n`) less the size of the code that encodes it (`b_e`); code sizes give
//! absolute and relative probabilities for competing hypotheses.

pub mod alignment;
pub mod diagnosis;
mod engine;
pub mod error;
pub mod format;
pub mod inference;
pub mod learner;
pub mod matcher;
pub mod model;
mod par;
pub mod probability;
pub mod render;
pub mod search;

pub use alignment::{extract_code, score_alignment, Alignment, AlignmentScore, Cell, Column};
pub use diagnosis::{DiagnosisConfig, DiagnosisReport, DiagnosisSession, Revision};
pub use error::{Result, SpError};
pub use format::{
    parse_knowledge_file, parse_new_patterns, serialize_knowledge, serialize_new_patterns,
};
pub use inference::{extract_inferences, Inference};
pub use learner::{
    derive_candidates, score_grammar, select_grammar, CandidatePattern, GrammarScore,
};
pub use matcher::{match_pair, MatchOptions, PairwiseAlignment};
pub use model::{compute_symbol_table, KnowledgeStore, Origin, Pattern, Symbol, SymbolTable};
pub use probability::{group_and_rank, HypothesisGroup};
pub use render::{render_horizontal, render_rotated, AlignmentDocument};
pub use search::{build_alignments, Execution, ScoredAlignment, SearchOptions};
