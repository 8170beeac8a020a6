//! In-memory session store with write-through persistence.
//!
//! Each session is guarded by its own mutex, so mutations on one session
//! serialize while distinct sessions run in parallel. With a storage
//! directory configured every successful mutation rewrites
//! `<dir>/<id>.zip` (via a temporary file and rename) next to a small
//! `<id>.json` holding timestamps.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use objrestore::compose::Project;
use objrestore::Error;

use crate::error::{ServiceError, ServiceResult};
use crate::ops::LayerInfo;

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct Session {
    pub id: String,
    pub project: Project,
    pub created: u64,
    pub modified: u64,
    /// Set while in-memory state is ahead of the persisted copy.
    pub dirty: bool,
    previews: HashMap<String, Arc<AtomicU64>>,
}

/// Token identifying one preview request; stale once a newer one starts.
#[derive(Clone)]
pub struct PreviewTicket {
    counter: Arc<AtomicU64>,
    generation: u64,
}

impl PreviewTicket {
    pub fn is_current(&self) -> bool {
        self.counter.load(Ordering::SeqCst) == self.generation
    }
}

impl Session {
    pub fn new(id: String, project: Project) -> Self {
        let t = now_secs();
        Session {
            id,
            project,
            created: t,
            modified: t,
            dirty: true,
            previews: HashMap::new(),
        }
    }

    /// Starts a preview for `layer_id`, superseding any earlier one.
    pub fn begin_preview(&mut self, layer_id: &str) -> PreviewTicket {
        let counter = self
            .previews
            .entry(layer_id.to_string())
            .or_default()
            .clone();
        let generation = counter.fetch_add(1, Ordering::SeqCst) + 1;
        PreviewTicket {
            counter,
            generation,
        }
    }

    pub fn info(&self) -> SessionInfo {
        let s = self.project.source();
        SessionInfo {
            id: self.id.clone(),
            width: s.width(),
            height: s.height(),
            channels: s.channels(),
            jpeg_tables: self.project.quant_tables.is_some(),
            created: self.created,
            modified: self.modified,
            dirty: self.dirty,
            layers: self.project.layers.iter().map(LayerInfo::from).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// True when the upload was a JPEG whose quantisation tables were kept.
    pub jpeg_tables: bool,
    pub created: u64,
    pub modified: u64,
    pub dirty: bool,
    pub layers: Vec<LayerInfo>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    created: u64,
    modified: u64,
}

pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    storage: Option<PathBuf>,
}

fn valid_session_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit())
}

fn lock(s: &Mutex<Session>) -> MutexGuard<'_, Session> {
    // A panic inside an operation leaves the project in its last consistent
    // state (operations only assign on success), so poisoning is ignored.
    s.lock().unwrap_or_else(|e| e.into_inner())
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            storage: None,
        }
    }

    /// Opens a persistent store, reloading every session found in `dir`.
    pub fn open(dir: &Path) -> ServiceResult<Self> {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(dir).map_err(Error::from)? {
            let path = entry.map_err(Error::from)?.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".zip"))
            else {
                continue;
            };
            if !valid_session_id(id) {
                continue;
            }
            let project = match Project::load(&path) {
                Ok(p) => p,
                Err(e) => {
                    tracing::warn!(session = id, error = %e, "skipping unreadable session");
                    continue;
                }
            };
            let mut session = Session::new(id.to_string(), project);
            if let Ok(meta) = std::fs::read(dir.join(format!("{id}.json"))) {
                if let Ok(meta) = serde_json::from_slice::<Meta>(&meta) {
                    session.created = meta.created;
                    session.modified = meta.modified;
                }
            }
            session.dirty = false;
            sessions.insert(id.to_string(), Arc::new(Mutex::new(session)));
        }
        Ok(SessionStore {
            sessions: RwLock::new(sessions),
            storage: Some(dir.to_path_buf()),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, project: Project) -> ServiceResult<SessionInfo> {
        let id = format!("{:032x}", rand::random::<u128>());
        let mut session = Session::new(id.clone(), project);
        self.persist(&mut session)?;
        let info = session.info();
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(info)
    }

    pub fn get(&self, id: &str) -> ServiceResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    pub fn delete(&self, id: &str) -> ServiceResult<()> {
        let removed = self
            .sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .remove(id);
        if removed.is_none() {
            return Err(ServiceError::NotFound(format!("session {id}")));
        }
        if let Some(dir) = &self.storage {
            for name in [format!("{id}.zip"), format!("{id}.json")] {
                match std::fs::remove_file(dir.join(name)) {
                    Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                        return Err(Error::from(e).into())
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Read-only access under the session lock.
    pub fn read<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> ServiceResult<T>,
    ) -> ServiceResult<T> {
        let s = self.get(id)?;
        let mut guard = lock(&s);
        f(&mut guard)
    }

    /// Runs a mutation under the session lock and persists the result.
    pub fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> ServiceResult<T>,
    ) -> ServiceResult<T> {
        let s = self.get(id)?;
        let mut guard = lock(&s);
        let out = f(&mut guard)?;
        guard.modified = now_secs();
        guard.dirty = true;
        self.persist(&mut guard)?;
        Ok(out)
    }

    fn persist(&self, session: &mut Session) -> ServiceResult<()> {
        let Some(dir) = &self.storage else {
            return Ok(());
        };
        let zip = session.project.to_zip()?;
        write_atomic(&dir.join(format!("{}.zip", session.id)), &zip)?;
        let meta = serde_json::to_vec(&Meta {
            created: session.created,
            modified: session.modified,
        })
        .expect("meta serialises");
        write_atomic(&dir.join(format!("{}.json", session.id)), &meta)?;
        session.dirty = false;
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> ServiceResult<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(Error::from)?;
    std::fs::rename(&tmp, path).map_err(Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use objrestore::fixtures;

    fn project() -> Project {
        Project::new(fixtures::natural(1, 32, 24), None).unwrap()
    }

    #[test]
    fn ids_are_hex_tokens() {
        let store = SessionStore::in_memory();
        let info = store.create(project()).unwrap();
        assert!(valid_session_id(&info.id));
        assert!(matches!(store.get("nope"), Err(ServiceError::NotFound(_))));
    }

    #[test]
    fn persistent_store_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = SessionStore::open(dir.path()).unwrap();
            let info = store.create(project()).unwrap();
            assert!(!info.dirty);
            info.id
        };
        let store = SessionStore::open(dir.path()).unwrap();
        let info = store.read(&id, |s| Ok(s.info())).unwrap();
        assert_eq!((info.width, info.height), (32, 24));
        store.delete(&id).unwrap();
        assert!(SessionStore::open(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn newer_preview_supersedes() {
        let mut s = Session::new("a".into(), project());
        let first = s.begin_preview("layer-1");
        assert!(first.is_current());
        let second = s.begin_preview("layer-1");
        assert!(!first.is_current() && second.is_current());
        assert!(s.begin_preview("layer-2").is_current() && second.is_current());
    }
}
