use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime};

use indexmap::IndexMap;

use qep_core::plan_ingest::DatabaseConnection;
use qep_core::PlanContext;

use crate::error::ApiError;

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

pub struct Session {
    pub id: String,
    pub connection: Option<Arc<Mutex<DatabaseConnection>>>,
    pub plans: IndexMap<String, Arc<PlanContext>>,
    pub created_at: SystemTime,
    last_used: Instant,
}

/// Sessions keyed by id. Expired sessions are dropped lazily on access.
pub struct SessionStore {
    ttl: Duration,
    sessions: RwLock<HashMap<String, Session>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            ttl,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn create(&self, connection: Option<DatabaseConnection>) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session {
            id: id.clone(),
            connection: connection.map(|c| Arc::new(Mutex::new(c))),
            plans: IndexMap::new(),
            created_at: SystemTime::now(),
            last_used: Instant::now(),
        };
        let mut sessions = self.sessions.write().expect("session lock");
        self.purge(&mut sessions);
        sessions.insert(id.clone(), session);
        id
    }

    fn purge(&self, sessions: &mut HashMap<String, Session>) {
        let ttl = self.ttl;
        sessions.retain(|_, s| s.last_used.elapsed() < ttl);
    }

    /// Runs `f` on a live session and marks it used.
    pub fn with<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> T) -> Result<T, ApiError> {
        let mut sessions = self.sessions.write().expect("session lock");
        self.purge(&mut sessions);
        let session = sessions.get_mut(id).ok_or_else(|| ApiError::unknown_session(id))?;
        session.last_used = Instant::now();
        Ok(f(session))
    }

    pub fn connection(&self, id: &str) -> Result<Arc<Mutex<DatabaseConnection>>, ApiError> {
        self.with(id, |s| s.connection.clone())?
            .ok_or_else(ApiError::no_live_connection)
    }

    pub fn plan(&self, id: &str, plan_id: &str) -> Result<Arc<PlanContext>, ApiError> {
        self.with(id, |s| s.plans.get(plan_id).cloned())?
            .ok_or_else(|| ApiError::unknown_plan(plan_id))
    }

    pub fn store_plan(&self, id: &str, plan_id: String, ctx: Arc<PlanContext>) -> Result<(), ApiError> {
        self.with(id, |s| {
            s.plans.insert(plan_id, ctx);
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
