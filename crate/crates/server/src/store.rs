//! Session storage: one immutable snapshot per session, replaced whole on
//! every accepted mutation, with optional JSON persistence.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use clipscaffold::extrude::{ExtrusionSolution, SolveConfig};
use clipscaffold::model::{Annotation, Clipart};
use clipscaffold::shape::GuidingShape;
use serde::{Deserialize, Serialize};

use crate::drawing::DrawingDoc;
use crate::error::ApiError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionData {
    pub id: String,
    pub revision: u64,
    pub clipart_svg: Option<String>,
    pub clipart: Option<Clipart>,
    /// Guiding shape as uploaded, before alignment.
    pub shape: Option<GuidingShape>,
    pub annotations: Vec<Annotation>,
    pub config: SolveConfig,
    pub solution: Option<ExtrusionSolution>,
    pub drawings: BTreeMap<String, DrawingDoc>,
}

impl SessionData {
    /// Drops anything derived from the solver inputs.
    pub fn invalidate_solution(&mut self) {
        self.solution = None;
    }
}

pub struct SessionHandle {
    writer: tokio::sync::Mutex<()>,
    current: RwLock<Arc<SessionData>>,
    renders: Mutex<HashMap<String, Arc<Vec<u8>>>>,
}

impl SessionHandle {
    fn new(data: SessionData) -> Self {
        SessionHandle {
            writer: tokio::sync::Mutex::new(()),
            current: RwLock::new(Arc::new(data)),
            renders: Mutex::new(HashMap::new()),
        }
    }

    pub fn snapshot(&self) -> Arc<SessionData> {
        self.current.read().expect("session lock").clone()
    }

    pub fn cached_render(&self, key: &str) -> Option<Arc<Vec<u8>>> {
        self.renders.lock().expect("render cache").get(key).cloned()
    }

    pub fn store_render(&self, key: String, png: Arc<Vec<u8>>) {
        self.renders.lock().expect("render cache").insert(key, png);
    }
}

pub struct Store {
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    data_dir: Option<PathBuf>,
}

impl Store {
    /// Opens a store, loading every snapshot found in `data_dir`.
    pub fn open(data_dir: Option<PathBuf>) -> std::io::Result<Store> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let text = std::fs::read_to_string(&path)?;
                match serde_json::from_str::<SessionData>(&text) {
                    Ok(data) => {
                        sessions.insert(data.id.clone(), Arc::new(SessionHandle::new(data)));
                    }
                    Err(e) => log::warn!("skipping unreadable session file {}: {e}", path.display()),
                }
            }
            log::info!("loaded {} sessions from {}", sessions.len(), dir.display());
        }
        Ok(Store {
            sessions: RwLock::new(sessions),
            data_dir,
        })
    }

    pub fn create(&self) -> Result<Arc<SessionData>, ApiError> {
        let data = SessionData {
            id: uuid::Uuid::new_v4().simple().to_string(),
            ..Default::default()
        };
        self.persist(&data)?;
        let handle = Arc::new(SessionHandle::new(data));
        let snap = handle.snapshot();
        self.sessions
            .write()
            .expect("session map")
            .insert(snap.id.clone(), handle);
        Ok(snap)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    /// Applies `change` to a copy of the session if `expected` matches the
    /// current revision. Nothing is kept when `change` fails.
    pub async fn mutate<T, F>(&self, id: &str, expected: u64, change: F) -> Result<(T, Arc<SessionData>), ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut SessionData) -> Result<T, ApiError> + Send + 'static,
    {
        let handle = self.get(id)?;
        let _guard = handle.writer.lock().await;
        let current = handle.snapshot();
        if current.revision != expected {
            return Err(ApiError::Conflict {
                expected,
                current: current.revision,
            });
        }
        let mut next = (*current).clone();
        let (out, next) = tokio::task::spawn_blocking(move || {
            let out = change(&mut next)?;
            next.revision += 1;
            Ok::<_, ApiError>((out, next))
        })
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))??;
        self.persist(&next)?;
        let next = Arc::new(next);
        *handle.current.write().expect("session lock") = next.clone();
        handle.renders.lock().expect("render cache").clear();
        Ok((out, next))
    }

    fn persist(&self, data: &SessionData) -> Result<(), ApiError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        write_atomic(dir, &data.id, &serde_json::to_vec(data).expect("session serializes"))
            .map_err(|e| ApiError::Internal(format!("persisting session: {e}")))
    }
}

fn write_atomic(dir: &Path, id: &str, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{id}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, dir.join(format!("{id}.json")))
}
