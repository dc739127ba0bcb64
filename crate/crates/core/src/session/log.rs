use serde::{Deserialize, Serialize};

use super::{apply_event, Broadcast, Event, ParamLookup, SessionError, SessionState};
use crate::{Error, Result};

/// One accepted event as stored in a session log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    /// Milliseconds since the Unix epoch; informational only.
    pub timestamp: u64,
    pub user: String,
    #[serde(flatten)]
    pub event: Event,
}

impl LogRecord {
    pub fn broadcast(&self) -> Broadcast {
        Broadcast {
            seq: self.seq,
            user: self.user.clone(),
            event: self.event.clone(),
        }
    }
}

/// A state with the ordered log of events that produced it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Session {
    pub state: SessionState,
    pub log: Vec<LogRecord>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies and records `event`; on rejection nothing changes.
    pub fn submit(
        &mut self,
        user: &str,
        event: Event,
        timestamp: u64,
        lookup: &dyn ParamLookup,
    ) -> std::result::Result<LogRecord, SessionError> {
        let (next, b) = apply_event(&self.state, user, &event, lookup)?;
        self.state = next;
        let rec = LogRecord {
            seq: b.seq,
            timestamp,
            user: b.user,
            event,
        };
        self.log.push(rec.clone());
        Ok(rec)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<LogRecord>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::format("session log", format!("line {}: {e}", i + 1)))
            })
            .collect()
    }
}

/// Rebuilds the state from a log, requiring gapless sequence numbers.
pub fn replay(records: &[LogRecord], lookup: &dyn ParamLookup) -> Result<SessionState> {
    let mut state = SessionState::default();
    for r in records {
        if r.seq != state.seq + 1 {
            return Err(Error::format(
                "session log",
                format!("sequence gap: expected {}, found {}", state.seq + 1, r.seq),
            ));
        }
        state = apply_event(&state, &r.user, &r.event, lookup)?.0;
    }
    Ok(state)
}
