//! Session persistence: one JSON file per session under `<data_dir>/sessions`,
//! loaded on first access. Each session sits behind its own async RwLock, so
//! mutations of one session are serialized while reads run concurrently.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use smashspeed_core::config::PipelineConfig;
use smashspeed_core::session::Session;
use smashspeed_core::{Error, Result};
use tokio::sync::RwLock;

/// A stored response to a mutating request, replayed for repeated request ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub status: u16,
    pub body: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stored {
    pub session: Session,
    #[serde(default)]
    pub replies: BTreeMap<String, Reply>,
}

pub type Entry = Arc<RwLock<Stored>>;

pub struct Store {
    dir: PathBuf,
    pub defaults: PipelineConfig,
    sessions: Mutex<HashMap<String, Entry>>,
    creates: tokio::sync::Mutex<BTreeMap<String, Reply>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_hexdigit() || b == b'-')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>, defaults: PipelineConfig) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(dir.join("sessions"))?;
        let creates_path = dir.join("create_requests.json");
        let creates = if creates_path.exists() {
            let text = std::fs::read_to_string(&creates_path)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                message: format!("{}: {e}", creates_path.display()),
            })?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            dir,
            defaults,
            sessions: Mutex::new(HashMap::new()),
            creates: tokio::sync::Mutex::new(creates),
        })
    }

    fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join("sessions").join(format!("{id}.json"))
    }

    pub fn get(&self, id: &str) -> Result<Entry> {
        let not_found = || Error::NotFound(format!("no session {id}"));
        if !valid_id(id) {
            return Err(not_found());
        }
        let mut sessions = self.sessions.lock().expect("session map lock");
        if let Some(e) = sessions.get(id) {
            return Ok(e.clone());
        }
        let path = self.path_of(id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => return Err(e.into()),
        };
        let stored: Stored = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        let entry = Arc::new(RwLock::new(stored));
        sessions.insert(id.to_string(), entry.clone());
        Ok(entry)
    }

    pub fn persist(&self, stored: &Stored) -> Result<()> {
        let bytes = serde_json::to_vec(stored).expect("session serializes");
        write_atomic(&self.path_of(&stored.session.id), &bytes)
    }

    pub fn insert(&self, session: Session) -> Result<Entry> {
        let stored = Stored {
            session,
            replies: BTreeMap::new(),
        };
        self.persist(&stored)?;
        let id = stored.session.id.clone();
        let entry = Arc::new(RwLock::new(stored));
        self.sessions
            .lock()
            .expect("session map lock")
            .insert(id, entry.clone());
        Ok(entry)
    }

    /// Runs `create` once per request id; later calls with the same id get
    /// the first reply back.
    pub async fn create_once<F>(&self, request_id: Option<&str>, create: F) -> Result<Reply>
    where
        F: FnOnce() -> Result<Reply>,
    {
        let Some(rid) = request_id else {
            return create();
        };
        let mut creates = self.creates.lock().await;
        if let Some(r) = creates.get(rid) {
            return Ok(r.clone());
        }
        let reply = create()?;
        creates.insert(rid.to_string(), reply.clone());
        let bytes = serde_json::to_vec(&*creates).expect("replies serialize");
        write_atomic(&self.dir.join("create_requests.json"), &bytes)?;
        Ok(reply)
    }
}
