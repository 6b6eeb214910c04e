//! Flat-file session persistence.
//!
//! Each session owns two files under the store directory: an append-only
//! `<id>.events.jsonl` log and a `<id>.json` snapshot rewritten after every
//! change. The log is written first, so a crash between the two writes
//! leaves a snapshot that replay can bring forward.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crate::error::{Result, ServiceError};
use crate::session::{Event, Session, SessionConfig, SessionSettings, Status};

const SNAPSHOT_EXT: &str = "json";
const LOG_SUFFIX: &str = ".events.jsonl";

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    pub settings: SessionSettings,
    /// Whether the observer-model debug view is served.
    pub debug_panel: bool,
    /// Active sessions idle for longer than this expire on next access.
    pub idle_timeout: Option<Duration>,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            settings: SessionSettings::default(),
            debug_panel: false,
            idle_timeout: Some(Duration::from_secs(24 * 3600)),
        }
    }
}

/// Sessions keyed by id, each behind its own lock.
pub struct SessionStore {
    dir: PathBuf,
    options: StoreOptions,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    /// Opens the store, resuming every session found on disk.
    pub fn open(dir: impl Into<PathBuf>, options: StoreOptions) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(LOG_SUFFIX))
            else {
                continue;
            };
            let session = load(&dir, id)?;
            sessions.insert(id.to_string(), Arc::new(Mutex::new(session)));
        }
        tracing::info!(dir = %dir.display(), sessions = sessions.len(), "session store opened");
        Ok(Self {
            dir,
            options,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn options(&self) -> &StoreOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, config: SessionConfig) -> Result<Session> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let (session, event) = Session::create(id.clone(), config, self.options.settings, now_millis())?;
        persist(&self.dir, &session, std::slice::from_ref(&event))?;
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    /// Runs `f` on a working copy of the session under its lock. The events
    /// `f` returns are logged and the copy committed only if `f` succeeds,
    /// so a failed request leaves the session untouched.
    pub fn update<T>(&self, id: &str, f: impl FnOnce(&mut Session, u64) -> Result<(T, Vec<Event>)>) -> Result<T> {
        let handle = self.handle(id)?;
        let mut guard = handle.lock().unwrap_or_else(|e| e.into_inner());
        let now = now_millis();
        self.expire_if_idle(&mut guard, now)?;
        let mut work = guard.clone();
        let (out, events) = f(&mut work, now)?;
        if !events.is_empty() {
            persist(&self.dir, &work, &events)?;
            *guard = work;
        }
        Ok(out)
    }

    /// Read-only access under the session lock.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> Result<T>) -> Result<T> {
        self.update(id, |s, _| Ok((f(s)?, Vec::new())))
    }

    /// Expires every active session idle since before `now - timeout`.
    pub fn expire_idle(&self, now: u64) -> Result<usize> {
        let handles: Vec<_> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let mut count = 0;
        for h in handles {
            let mut guard = h.lock().unwrap_or_else(|e| e.into_inner());
            count += usize::from(self.expire_if_idle(&mut guard, now)?);
        }
        Ok(count)
    }

    fn expire_if_idle(&self, session: &mut Session, now: u64) -> Result<bool> {
        let Some(timeout) = self.options.idle_timeout else {
            return Ok(false);
        };
        let idle = now.saturating_sub(session.updated_at());
        if session.status() != Status::Active || idle <= timeout.as_millis() as u64 {
            return Ok(false);
        }
        let mut work = session.clone();
        let event = work.expire(now)?;
        persist(&self.dir, &work, &[event])?;
        *session = work;
        tracing::info!(id = session.id(), "session expired");
        Ok(true)
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }
}

pub fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.{SNAPSHOT_EXT}"))
}

pub fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}{LOG_SUFFIX}"))
}

fn persist(dir: &Path, session: &Session, events: &[Event]) -> Result<()> {
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path(dir, session.id()))?;
    let mut buf = Vec::new();
    for e in events {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    log.write_all(&buf)?;
    log.sync_data()?;

    let target = snapshot_path(dir, session.id());
    let tmp = target.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(session)?)?;
    fs::rename(tmp, target)?;
    Ok(())
}

pub fn read_log(dir: &Path, id: &str) -> Result<Vec<Event>> {
    let file = File::open(log_path(dir, id))?;
    BufReader::new(file)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub fn read_snapshot(dir: &Path, id: &str) -> Result<Session> {
    Ok(serde_json::from_slice(&fs::read(snapshot_path(dir, id))?)?)
}

/// Loads a session, preferring a replay of its log whenever the snapshot is
/// missing or lags behind.
fn load(dir: &Path, id: &str) -> Result<Session> {
    let events = read_log(dir, id)?;
    let replayed = Session::replay(&events)?;
    match read_snapshot(dir, id) {
        Ok(snapshot) if snapshot == replayed => Ok(snapshot),
        _ => {
            tracing::warn!(id, "snapshot missing or stale; rebuilt from event log");
            let tmp = snapshot_path(dir, id).with_extension("json.tmp");
            fs::write(&tmp, serde_json::to_vec(&replayed)?)?;
            fs::rename(tmp, snapshot_path(dir, id))?;
            Ok(replayed)
        }
    }
}
