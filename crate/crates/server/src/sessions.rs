//! In-memory conversation sessions with an idle timeout.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use saathi_core::pipeline::ConversationState;

/// One conversation. Turns lock `state`, so requests for the same session
/// run one at a time in arrival order.
pub struct Session {
    pub state: Arc<tokio::sync::Mutex<ConversationState>>,
    last_seen: Mutex<Instant>,
}

impl Session {
    fn touch(&self, now: Instant) {
        *self.last_seen.lock().expect("session poisoned") = now;
    }

    fn idle_since(&self) -> Instant {
        *self.last_seen.lock().expect("session poisoned")
    }
}

pub struct SessionTable {
    ttl: Duration,
    inner: Mutex<HashMap<String, Arc<Session>>>,
}

impl SessionTable {
    pub fn new(ttl: Duration) -> Self {
        SessionTable { ttl, inner: Mutex::new(HashMap::new()) }
    }

    pub fn insert(&self, state: ConversationState) -> Arc<Session> {
        self.insert_at(state, Instant::now())
    }

    fn insert_at(&self, state: ConversationState, now: Instant) -> Arc<Session> {
        let id = state.conversation_id.as_str().to_string();
        let session = Arc::new(Session {
            state: Arc::new(tokio::sync::Mutex::new(state)),
            last_seen: Mutex::new(now),
        });
        let mut map = self.inner.lock().expect("session table poisoned");
        self.sweep(&mut map, now);
        map.insert(id, session.clone());
        session
    }

    /// Looks up a live session and refreshes its idle timer.
    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.get_at(id, Instant::now())
    }

    fn get_at(&self, id: &str, now: Instant) -> Option<Arc<Session>> {
        let mut map = self.inner.lock().expect("session table poisoned");
        self.sweep(&mut map, now);
        let s = map.get(id)?.clone();
        s.touch(now);
        Some(s)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("session table poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sweep(&self, map: &mut HashMap<String, Arc<Session>>, now: Instant) {
        map.retain(|_, s| now.saturating_duration_since(s.idle_since()) < self.ttl);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use saathi_core::model::Id;

    #[test]
    fn idle_sessions_expire() {
        let t = SessionTable::new(Duration::from_secs(10));
        let t0 = Instant::now();
        t.insert_at(ConversationState::new(Id::from("a")), t0);
        t.insert_at(ConversationState::new(Id::from("b")), t0);
        assert!(t.get_at("a", t0 + Duration::from_secs(9)).is_some());
        assert!(t.get_at("a", t0 + Duration::from_secs(15)).is_some());
        assert!(t.get_at("b", t0 + Duration::from_secs(15)).is_none());
        assert!(t.get_at("a", t0 + Duration::from_secs(30)).is_none());
        assert!(t.is_empty());
    }
}
