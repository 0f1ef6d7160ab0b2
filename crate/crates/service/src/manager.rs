//! Owns every live session. Each session sits behind its own mutex, so
//! actions on one session are serialized while sessions run independently.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use jade_core::bundled::DataSet;
use tokio::sync::broadcast;

use crate::feedback::{DebriefRecord, QuestionnaireResponse};
use crate::protocol::*;
use crate::session::Session;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

const CHANNEL_CAPACITY: usize = 1024;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Debug)]
pub struct SessionHandle {
    session: Mutex<Session>,
    tx: broadcast::Sender<SessionEnvelope>,
}

impl SessionHandle {
    fn new(session: Session) -> Arc<Self> {
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Arc::new(Self {
            session: Mutex::new(session),
            tx,
        })
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Snapshot plus a receiver positioned right after it.
    pub fn subscribe(&self) -> (Snapshot, broadcast::Receiver<SessionEnvelope>) {
        let s = self.lock();
        (s.snapshot(), self.tx.subscribe())
    }

    fn publish(&self, envelopes: &[SessionEnvelope]) {
        for e in envelopes {
            let _ = self.tx.send(e.clone());
        }
    }

    /// Runs `f` under the lock and broadcasts what it produced, still under
    /// the lock so subscribers see envelopes in seq order.
    pub fn apply<F>(&self, f: F) -> Result<Vec<SessionEnvelope>, Rejection>
    where
        F: FnOnce(&mut Session) -> Result<Vec<SessionEnvelope>, Rejection>,
    {
        let mut s = self.lock();
        let out = f(&mut s)?;
        self.publish(&out);
        Ok(out)
    }
}

pub struct SessionManager {
    data: Arc<DataSet>,
    dir: Option<PathBuf>,
    clock: Clock,
    seed: Option<u64>,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
}

impl SessionManager {
    pub fn new(data: DataSet, dir: Option<PathBuf>) -> Self {
        Self {
            data: Arc::new(data),
            dir,
            clock: system_clock(),
            seed: None,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Forces every new session to use this dice seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn now(&self) -> u64 {
        (self.clock)()
    }

    fn map(&self) -> MutexGuard<'_, HashMap<String, Arc<SessionHandle>>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, Rejection> {
        self.map()
            .get(id)
            .cloned()
            .ok_or_else(|| Rejection::new(ErrorCode::NotFound, format!("no session `{id}`")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.map().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create(&self, mut request: CreateSession) -> Result<SessionCreated, Rejection> {
        if let Some(seed) = self.seed {
            request.config.rng_seed = seed;
        }
        let session = Session::create(
            &self.data,
            request,
            self.now(),
            || uuid::Uuid::new_v4().simple().to_string(),
            self.dir.as_deref(),
        )?;
        let created = session.created();
        self.map().insert(created.session_id.clone(), SessionHandle::new(session));
        Ok(created)
    }

    pub fn join(
        &self,
        id: &str,
        token: &str,
        display_name: &str,
        resume: bool,
    ) -> Result<(Role, Vec<SessionEnvelope>), Rejection> {
        let h = self.get(id)?;
        let mut s = h.lock();
        let (role, envs) = s.join(token, display_name, resume)?;
        h.publish(&envs);
        Ok((role, envs))
    }

    pub fn act(&self, id: &str, token: &str, action: Action) -> Result<Vec<SessionEnvelope>, Rejection> {
        let now = self.now();
        self.get(id)?.apply(|s| s.act(token, action, now))
    }

    pub fn questionnaire(
        &self,
        id: &str,
        token: &str,
        response: QuestionnaireResponse,
    ) -> Result<Vec<SessionEnvelope>, Rejection> {
        self.get(id)?.apply(|s| s.submit_questionnaire(token, response))
    }

    pub fn debrief(&self, id: &str, token: &str, record: DebriefRecord) -> Result<Vec<SessionEnvelope>, Rejection> {
        self.get(id)?.apply(|s| s.record_debrief(token, record))
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, Rejection> {
        Ok(self.get(id)?.lock().snapshot())
    }

    /// Loads every session file in the data directory. Files that cannot be
    /// restored are reported and skipped.
    pub fn restore_all(&self) -> Vec<String> {
        let Some(dir) = &self.dir else {
            return Vec::new();
        };
        let Ok(entries) = std::fs::read_dir(dir) else {
            return Vec::new();
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
            .collect();
        paths.sort();
        let mut report = Vec::new();
        for path in paths {
            match self.restore_file(&path) {
                Ok(warnings) => report.extend(warnings),
                Err(e) => report.push(e),
            }
        }
        report
    }

    pub fn restore_file(&self, path: &Path) -> Result<Vec<String>, String> {
        let (session, warnings) = Session::restore(&self.data, path)?;
        let id = session.id().to_owned();
        self.map().insert(id.clone(), SessionHandle::new(session));
        Ok(warnings.into_iter().map(|w| format!("{id}: {w}")).collect())
    }
}
