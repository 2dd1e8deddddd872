use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, Ranking};
use super::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecItem {
    pub service_id: String,
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionItem {
    pub selected_id: String,
    pub weight: f64,
}

/// What a create, select or undo call returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub session_id: String,
    pub round: usize,
    pub recommendations: Vec<RecItem>,
    pub attention: Vec<AttentionItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Create,
    Select { service_id: String },
    Undo { service_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: usize,
    #[serde(flatten)]
    pub event: Event,
    pub recommendations: Vec<RecItem>,
    pub attention: Vec<AttentionItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub requirements: String,
    pub tags: Vec<String>,
    /// In selection order.
    pub selected: Vec<String>,
    pub round: usize,
    pub history: Vec<HistoryEntry>,
}

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum LogRecord {
    Create { session_id: String, requirements: String, tags: Vec<String> },
    Select { session_id: String, service_id: String },
    Undo { session_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub service_id: String,
    pub name: String,
    pub provider: String,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub variant: String,
    pub strategy: String,
    pub checkpoint_hash: String,
    pub top_n: usize,
}

/// In-memory sessions over a shared engine, with an optional append-only
/// log of every state change.
#[derive(Debug, Default)]
pub struct SessionStore {
    engine: RwLock<Option<Arc<Engine>>>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    log: Option<Mutex<File>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends every change to `path`, creating it if needed.
    pub fn with_log(path: &Path) -> anyhow::Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening session log {}", path.display()))?;
        Ok(Self { log: Some(Mutex::new(file)), ..Self::default() })
    }

    pub fn set_engine(&self, engine: Arc<Engine>) {
        *self.engine.write().expect("engine lock") = Some(engine);
    }

    fn engine(&self) -> Result<Arc<Engine>, ApiError> {
        self.engine.read().expect("engine lock").clone().ok_or_else(|| ApiError::unavailable("model not loaded yet"))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }

    fn append(&self, record: &LogRecord) -> Result<(), ApiError> {
        if let Some(log) = &self.log {
            let line = serde_json::to_string(record).map_err(ApiError::internal)? + "\n";
            let mut f = log.lock().expect("log lock");
            f.write_all(line.as_bytes()).and_then(|()| f.flush()).map_err(ApiError::internal)?;
        }
        Ok(())
    }

    fn view(engine: &Engine, session: &Session, ranking: &Ranking) -> RoundView {
        let repo = engine.repo();
        RoundView {
            session_id: session.session_id.clone(),
            round: session.round,
            recommendations: ranking
                .items
                .iter()
                .map(|s| {
                    let svc = repo.service(s.service);
                    RecItem { service_id: svc.id.clone(), name: svc.name.clone(), score: s.score }
                })
                .collect(),
            attention: ranking
                .attention
                .iter()
                .map(|&(s, weight)| AttentionItem { selected_id: repo.service(s).id.clone(), weight })
                .collect(),
        }
    }

    /// Recomputes the list for the session's current state and records it.
    fn rerank(engine: &Engine, session: &mut Session, event: Event) -> Result<RoundView, ApiError> {
        let repo = engine.repo();
        let selected: Vec<usize> = session.selected.iter().map(|id| repo.service_idx(id).expect("validated on select")).collect();
        let target = Engine::target(&session.requirements, &session.tags);
        let ranking = engine.rank(&target, &selected).map_err(ApiError::internal)?;
        session.round = session.selected.len() + 1;
        let view = Self::view(engine, session, &ranking);
        session.history.push(HistoryEntry {
            round: view.round,
            event,
            recommendations: view.recommendations.clone(),
            attention: view.attention.clone(),
        });
        Ok(view)
    }

    pub fn create(&self, requirements: &str, tags: &[String]) -> Result<RoundView, ApiError> {
        let id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::SeqCst) + 1);
        self.create_with_id(id, requirements, tags, true)
    }

    fn create_with_id(&self, id: String, requirements: &str, tags: &[String], log: bool) -> Result<RoundView, ApiError> {
        if requirements.trim().is_empty() {
            return Err(ApiError::validation("requirements must not be empty"));
        }
        let engine = self.engine()?;
        let mut session = Session {
            session_id: id.clone(),
            requirements: requirements.to_string(),
            tags: tags.to_vec(),
            selected: Vec::new(),
            round: 1,
            history: Vec::new(),
        };
        let view = Self::rerank(&engine, &mut session, Event::Create)?;
        let mut map = self.sessions.lock().expect("session map lock");
        if map.contains_key(&id) {
            return Err(ApiError::conflict(format!("session {id} already exists")));
        }
        if log {
            self.append(&LogRecord::Create { session_id: id.clone(), requirements: requirements.to_string(), tags: tags.to_vec() })?;
        }
        map.insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn select(&self, id: &str, service_id: &str) -> Result<RoundView, ApiError> {
        self.select_inner(id, service_id, true)
    }

    fn select_inner(&self, id: &str, service_id: &str, log: bool) -> Result<RoundView, ApiError> {
        let engine = self.engine()?;
        let handle = self.session(id)?;
        let mut session = handle.lock().expect("session lock");
        if engine.repo().service_idx(service_id).is_none() {
            return Err(ApiError::validation(format!("unknown service {service_id}")));
        }
        if session.selected.iter().any(|s| s == service_id) {
            return Err(ApiError::conflict(format!("{service_id} is already selected")));
        }
        let mut next = session.clone();
        next.selected.push(service_id.to_string());
        let view = Self::rerank(&engine, &mut next, Event::Select { service_id: service_id.to_string() })?;
        if log {
            self.append(&LogRecord::Select { session_id: id.to_string(), service_id: service_id.to_string() })?;
        }
        *session = next;
        Ok(view)
    }

    pub fn undo(&self, id: &str) -> Result<RoundView, ApiError> {
        self.undo_inner(id, true)
    }

    fn undo_inner(&self, id: &str, log: bool) -> Result<RoundView, ApiError> {
        let engine = self.engine()?;
        let handle = self.session(id)?;
        let mut session = handle.lock().expect("session lock");
        let mut next = session.clone();
        let Some(last) = next.selected.pop() else {
            return Err(ApiError::conflict("nothing to undo"));
        };
        let view = Self::rerank(&engine, &mut next, Event::Undo { service_id: last })?;
        if log {
            self.append(&LogRecord::Undo { session_id: id.to_string() })?;
        }
        *session = next;
        Ok(view)
    }

    pub fn get(&self, id: &str) -> Result<Session, ApiError> {
        Ok(self.session(id)?.lock().expect("session lock").clone())
    }

    pub fn catalog(&self) -> Result<Vec<CatalogEntry>, ApiError> {
        let engine = self.engine()?;
        Ok(engine
            .repo()
            .services()
            .iter()
            .map(|s| CatalogEntry {
                service_id: s.id.clone(),
                name: s.name.clone(),
                provider: s.provider.clone(),
                tags: s.tags.iter().cloned().collect(),
            })
            .collect())
    }

    pub fn model_info(&self) -> Result<ModelInfo, ApiError> {
        let engine = self.engine()?;
        Ok(ModelInfo {
            variant: engine.variant.to_string(),
            strategy: engine.strategy.to_string(),
            checkpoint_hash: engine.checkpoint_hash.clone(),
            top_n: engine.top_n,
        })
    }

    /// Applies one logged change without logging it again.
    pub fn apply(&self, record: &LogRecord) -> Result<RoundView, ApiError> {
        match record {
            LogRecord::Create { session_id, requirements, tags } => {
                if let Some(n) = session_id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                    self.next_id.fetch_max(n, Ordering::SeqCst);
                }
                self.create_with_id(session_id.clone(), requirements, tags, false)
            }
            LogRecord::Select { session_id, service_id } => self.select_inner(session_id, service_id, false),
            LogRecord::Undo { session_id } => self.undo_inner(session_id, false),
        }
    }

    /// Replays a session log in order and returns every list it produced.
    pub fn replay(&self, path: &Path) -> anyhow::Result<Vec<RoundView>> {
        let file = File::open(path).with_context(|| format!("opening session log {}", path.display()))?;
        let mut views = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.with_context(|| format!("reading {}", path.display()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            let view = self.apply(&record).map_err(|e| anyhow::anyhow!("{}:{}: {}", path.display(), i + 1, e.message))?;
            views.push(view);
        }
        Ok(views)
    }
}
