//! Knowledge-base snapshots and diagnostic sessions kept as plain files.
//!
//! Layout under the data directory:
//!
//! ```text
//! kb/<id>.sp           knowledge file exactly as uploaded
//! sessions/<id>.json   session record: knowledge-base id, timestamps, revisions
//! ```
//!
//! A session's report is never stored. It is rebuilt on load by replaying the
//! revisions, which gives the same bytes the live session served.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sp_core::{
    parse_knowledge_file, parse_new_patterns, DiagnosisConfig, DiagnosisReport, DiagnosisSession,
    KnowledgeStore, Revision, ScoredAlignment, SpError,
};

use crate::error::ServiceError;

type Result<T> = std::result::Result<T, ServiceError>;

struct Kb {
    id: String,
    text: String,
    store: Arc<KnowledgeStore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KbSummary {
    pub id: String,
    pub patterns: usize,
    pub symbols: usize,
}

impl Kb {
    fn summary(&self) -> KbSummary {
        KbSummary {
            id: self.id.clone(),
            patterns: self.store.len(),
            symbols: self.store.symbol_table().len(),
        }
    }
}

/// What goes to disk for a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionRecord {
    id: String,
    kb_id: String,
    created_ms: u64,
    updated_ms: u64,
    revisions: Vec<Revision>,
}

struct Entry {
    session: DiagnosisSession,
    store: Arc<KnowledgeStore>,
    created_ms: u64,
    updated_ms: u64,
    deleted: bool,
}

impl Entry {
    fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.session.id().to_owned(),
            kb_id: self.session.kb_id().to_owned(),
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
            revisions: self.session.revisions().to_vec(),
        }
    }

    fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.session.id().to_owned(),
            kb_id: self.session.kb_id().to_owned(),
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
            findings: self.session.findings().map(String::from).collect(),
            revisions: self.session.revisions().len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub kb_id: String,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub findings: Vec<String>,
    pub revisions: usize,
}

/// Result of one accepted batch of findings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FindingsOutcome {
    /// Revision count after the call; unchanged when every finding was a
    /// duplicate.
    pub revision: usize,
    pub warnings: Vec<String>,
    pub report: DiagnosisReport,
}

/// One ranked alignment of a session, rendered and structured.
#[derive(Debug, Clone, Serialize)]
pub struct AlignmentView {
    pub index: usize,
    pub rotated: String,
    pub horizontal: String,
    pub document: sp_core::AlignmentDocument,
}

impl AlignmentView {
    fn new(index: usize, s: &ScoredAlignment) -> Self {
        AlignmentView {
            index,
            rotated: sp_core::render_rotated(&s.alignment),
            horizontal: sp_core::render_horizontal(&s.alignment),
            document: sp_core::AlignmentDocument::new(&s.alignment, &s.score),
        }
    }
}

/// Sessions may be read and changed from many threads. Mutations of one
/// session hold its lock for the whole search, so they queue up and each
/// sees the result of the one before; distinct sessions never wait on each
/// other.
pub struct Service {
    root: PathBuf,
    config: DiagnosisConfig,
    kbs: RwLock<HashMap<String, Arc<Kb>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Writes through a temporary file so a crash never leaves half a record.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_kb(text: String) -> Result<Kb> {
    let store = parse_knowledge_file(&text).map_err(ServiceError::InvalidKnowledge)?;
    if store.is_empty() {
        return Err(ServiceError::EmptyKnowledge);
    }
    let digest = Sha256::digest(text.as_bytes());
    let id: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    Ok(Kb {
        id,
        text,
        store: Arc::new(store),
    })
}

impl Service {
    /// Opens (creating if needed) a data directory and replays every stored
    /// session.
    pub fn open(root: impl Into<PathBuf>, config: DiagnosisConfig) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("kb"))?;
        fs::create_dir_all(root.join("sessions"))?;
        let svc = Service {
            root,
            config,
            kbs: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        };
        for path in sorted_files(&svc.root.join("kb"), "sp")? {
            let kb = load_kb(fs::read_to_string(&path)?)?;
            svc.kbs.write().insert(kb.id.clone(), Arc::new(kb));
        }
        for path in sorted_files(&svc.root.join("sessions"), "json")? {
            let record: SessionRecord = serde_json::from_slice(&fs::read(&path)?)?;
            let store = svc.kb(&record.kb_id)?.store.clone();
            let session = DiagnosisSession::replay(
                record.id.clone(),
                record.kb_id.clone(),
                &store,
                &record.revisions,
                &svc.config,
            )
            .map_err(ServiceError::Engine)?;
            let entry = Entry {
                session,
                store,
                created_ms: record.created_ms,
                updated_ms: record.updated_ms,
                deleted: false,
            };
            svc.sessions
                .write()
                .insert(record.id, Arc::new(Mutex::new(entry)));
        }
        log::info!(
            "opened {}: {} knowledge bases, {} sessions",
            svc.root.display(),
            svc.kbs.read().len(),
            svc.sessions.read().len()
        );
        Ok(svc)
    }

    pub fn config(&self) -> &DiagnosisConfig {
        &self.config
    }

    fn kb(&self, id: &str) -> Result<Arc<Kb>> {
        self.kbs
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::KbNotFound(id.to_owned()))
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::SessionNotFound(id.to_owned()))
    }

    /// Stores an immutable snapshot. The id is derived from the text, so
    /// uploading the same file twice yields the same snapshot and any edit
    /// yields a new one.
    pub fn add_kb(&self, text: String) -> Result<KbSummary> {
        let kb = load_kb(text)?;
        let summary = kb.summary();
        let mut kbs = self.kbs.write();
        if !kbs.contains_key(&kb.id) {
            write_atomic(
                &self.root.join("kb").join(format!("{}.sp", kb.id)),
                kb.text.as_bytes(),
            )?;
            kbs.insert(kb.id.clone(), Arc::new(kb));
        }
        Ok(summary)
    }

    pub fn kb_summary(&self, id: &str) -> Result<KbSummary> {
        Ok(self.kb(id)?.summary())
    }

    pub fn kb_text(&self, id: &str) -> Result<String> {
        Ok(self.kb(id)?.text.clone())
    }

    pub fn list_kbs(&self) -> Vec<KbSummary> {
        let mut out: Vec<KbSummary> = self.kbs.read().values().map(|k| k.summary()).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn create_session(&self, kb_id: &str) -> Result<SessionSummary> {
        let kb = self.kb(kb_id)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = now_ms();
        let entry = Entry {
            session: DiagnosisSession::new(id.clone(), kb_id),
            store: kb.store.clone(),
            created_ms: now,
            updated_ms: now,
            deleted: false,
        };
        self.persist(&entry)?;
        let summary = entry.summary();
        self.sessions
            .write()
            .insert(id, Arc::new(Mutex::new(entry)));
        Ok(summary)
    }

    pub fn list_sessions(&self) -> Vec<SessionSummary> {
        let entries: Vec<Arc<Mutex<Entry>>> = self.sessions.read().values().cloned().collect();
        let mut out: Vec<SessionSummary> = entries.iter().map(|e| e.lock().summary()).collect();
        out.sort_by(|a, b| (a.created_ms, &a.id).cmp(&(b.created_ms, &b.id)));
        out
    }

    pub fn session(&self, id: &str) -> Result<SessionSummary> {
        let entry = self.entry(id)?;
        let e = entry.lock();
        if e.deleted {
            return Err(ServiceError::SessionNotFound(id.to_owned()));
        }
        Ok(e.summary())
    }

    /// Adds blank-line separated findings and re-runs the search. Blocks for
    /// as long as the search takes.
    pub fn add_findings(&self, id: &str, text: &str) -> Result<FindingsOutcome> {
        let parsed = parse_new_patterns(text).map_err(ServiceError::InvalidFindings)?;
        if parsed.is_empty() {
            return Err(ServiceError::InvalidFindings(SpError::Empty("no findings")));
        }
        let entry = self.entry(id)?;
        let mut e = entry.lock();
        if e.deleted {
            return Err(ServiceError::SessionNotFound(id.to_owned()));
        }
        let store = e.store.clone();
        let before = e.session.revisions().len();
        let warnings = e
            .session
            .add_findings(&store, text, &self.config)
            .map_err(ServiceError::Engine)?;
        if e.session.revisions().len() != before {
            e.updated_ms = now_ms();
            self.persist(&e)?;
        }
        Ok(FindingsOutcome {
            revision: e.session.revisions().len(),
            warnings,
            report: e.session.report().clone(),
        })
    }

    pub fn report(&self, id: &str) -> Result<DiagnosisReport> {
        let entry = self.entry(id)?;
        let e = entry.lock();
        if e.deleted {
            return Err(ServiceError::SessionNotFound(id.to_owned()));
        }
        Ok(e.session.report().clone())
    }

    pub fn revisions(&self, id: &str) -> Result<Vec<Revision>> {
        let entry = self.entry(id)?;
        let e = entry.lock();
        Ok(e.session.revisions().to_vec())
    }

    pub fn alignment(&self, id: &str, index: usize) -> Result<AlignmentView> {
        let entry = self.entry(id)?;
        let e = entry.lock();
        if e.deleted {
            return Err(ServiceError::SessionNotFound(id.to_owned()));
        }
        e.session
            .alignment(index)
            .map(|s| AlignmentView::new(index, s))
            .ok_or_else(|| ServiceError::AlignmentNotFound {
                session: id.to_owned(),
                index,
            })
    }

    /// Removes a session after any mutation already queued on it finishes;
    /// mutations queued later fail with not-found.
    pub fn delete_session(&self, id: &str) -> Result<()> {
        let entry = self.entry(id)?;
        let mut e = entry.lock();
        if e.deleted {
            return Err(ServiceError::SessionNotFound(id.to_owned()));
        }
        e.deleted = true;
        self.sessions.write().remove(id);
        match fs::remove_file(self.session_path(id)) {
            Err(err) if err.kind() != std::io::ErrorKind::NotFound => Err(err.into()),
            _ => Ok(()),
        }
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn persist(&self, e: &Entry) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&e.record())?;
        write_atomic(&self.session_path(e.session.id()), &bytes)
    }
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for item in fs::read_dir(dir)? {
        let path = item?.path();
        if path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
