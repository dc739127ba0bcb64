//! Collaborative session state.
//!
//! A session is a value: [`apply_event`] maps a state and one event to the
//! next state plus a broadcast record, or rejects the event and leaves the
//! state untouched. Replaying an accepted-event log therefore reproduces the
//! state bit for bit, and [`SessionState::hash`] makes that checkable.

mod log;
mod stream;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::surface::TimbreSurface;
use crate::synth::ParameterVector;

pub use self::log::{replay, LogRecord, Session};
pub use self::stream::{
    NoteEvent, NoteStream, Progression, NOTES_PER_CHORD, NOTE_LENGTH_RANGE, RATE_RANGE,
};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_USERS: usize = 5;
pub const MAX_ID_LEN: usize = 64;
pub const PITCH_RANGE: i32 = 12;
pub const MAX_SEGMENT_SECONDS: f64 = 600.0;
pub const PUBLIC_CHANNEL: &str = "public";
pub const DEFAULT_SEGMENT_SECONDS: f64 = 1.0;

pub fn private_channel(user: &str) -> String {
    format!("private:{user}")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown {kind} {id:?}")]
    Unknown { kind: &'static str, id: String },
    #[error("{kind} {id:?} already exists")]
    Duplicate { kind: &'static str, id: String },
    #[error("{field} out of range: {value}")]
    Range { field: &'static str, value: f64 },
    #[error("chaining path {0:?} would create a cycle")]
    Cycle(String),
    #[error("{kind} {id:?} is still referenced")]
    InUse { kind: &'static str, id: String },
    #[error("session is full ({MAX_USERS} users)")]
    Full,
    #[error("invalid id {0:?}")]
    BadId(String),
    #[error("{0}")]
    Invalid(String),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Unknown { .. } => "unknown_entity",
            SessionError::Duplicate { .. } => "duplicate_id",
            SessionError::Range { .. } => "range",
            SessionError::Cycle(_) => "cycle",
            SessionError::InUse { .. } => "in_use",
            SessionError::Full => "session_full",
            SessionError::BadId(_) => "bad_id",
            SessionError::Invalid(_) => "invalid",
        }
    }
}

type Res<T> = std::result::Result<T, SessionError>;

/// Resolves a surface position to synthesis parameters.
pub trait ParamLookup {
    fn lookup(&self, position: [f64; 2]) -> Option<ParameterVector>;
}

/// Leaves node parameters unset.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoLookup;

impl ParamLookup for NoLookup {
    fn lookup(&self, _: [f64; 2]) -> Option<ParameterVector> {
        None
    }
}

impl ParamLookup for TimbreSurface {
    fn lookup(&self, position: [f64; 2]) -> Option<ParameterVector> {
        self.lookup_params(position).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub owner: String,
    pub position: [f64; 2],
    pub volume: f64,
    pub pitch_offset: i32,
    pub stream: Option<String>,
    pub channel: String,
    pub playing: bool,
    /// Parameters at `position`, if a surface is attached.
    pub params: Option<ParameterVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// Absolute positions of the two inner Bezier control points.
    pub controls: [[f64; 2]; 2],
    pub volume: f64,
    pub pitch_offset: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub id: String,
    pub owner: String,
    pub nodes: Vec<String>,
    pub segments: Vec<Segment>,
    pub chain_to: Option<String>,
    pub playhead: f64,
    pub playing: bool,
}

impl Path {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "user", rename_all = "snake_case")]
pub enum ChannelKind {
    Public,
    Private(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    pub kind: ChannelKind,
    pub listeners: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub muted: BTreeSet<String>,
    pub gains: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub seq: u64,
    pub playing: bool,
    pub users: BTreeMap<String, User>,
    pub nodes: BTreeMap<String, Node>,
    pub paths: BTreeMap<String, Path>,
    pub streams: BTreeMap<String, NoteStream>,
    pub channels: BTreeMap<String, Channel>,
}

impl Default for SessionState {
    fn default() -> Self {
        let public = Channel {
            id: PUBLIC_CHANNEL.into(),
            kind: ChannelKind::Public,
            listeners: BTreeSet::new(),
        };
        SessionState {
            seq: 0,
            playing: true,
            users: BTreeMap::new(),
            nodes: BTreeMap::new(),
            paths: BTreeMap::new(),
            streams: BTreeMap::new(),
            channels: BTreeMap::from([(PUBLIC_CHANNEL.to_string(), public)]),
        }
    }
}

impl SessionState {
    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    Duration,
    Volume,
    Pitch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Node { id: String },
    Segment { path: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaybackTarget {
    Global,
    Node { id: String },
    Path { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Join,
    Leave,
    CreateNode {
        id: String,
        position: [f64; 2],
        #[serde(default)]
        channel: Option<String>,
    },
    RemoveNode {
        id: String,
    },
    MoveNode {
        id: String,
        position: [f64; 2],
    },
    ConnectPath {
        id: String,
        nodes: Vec<String>,
    },
    RemovePath {
        id: String,
    },
    ChainPath {
        id: String,
        next: Option<String>,
    },
    EditSegment {
        path: String,
        index: usize,
        #[serde(default)]
        duration: Option<f64>,
        #[serde(default)]
        controls: Option<[[f64; 2]; 2]>,
        #[serde(default)]
        volume: Option<f64>,
        #[serde(default)]
        pitch_offset: Option<i32>,
    },
    SetTool {
        target: Target,
        tool: Tool,
        value: f64,
    },
    TogglePlayback {
        target: PlaybackTarget,
    },
    SetChannel {
        node: String,
        channel: String,
    },
    CreateStream {
        id: String,
        progression: Progression,
        note_length: f64,
        rate: f64,
    },
    SetStreamParams {
        id: String,
        note_length: f64,
        rate: f64,
    },
    SetStream {
        node: String,
        stream: Option<String>,
    },
    Subscribe {
        channel: String,
    },
    Unsubscribe {
        channel: String,
    },
    Mute {
        user: String,
    },
    Unmute {
        user: String,
    },
    SetGain {
        user: String,
        gain: f64,
    },
    /// Advances the playheads of playing paths.
    Tick {
        dt: f64,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Join => "join",
            Event::Leave => "leave",
            Event::CreateNode { .. } => "create_node",
            Event::RemoveNode { .. } => "remove_node",
            Event::MoveNode { .. } => "move_node",
            Event::ConnectPath { .. } => "connect_path",
            Event::RemovePath { .. } => "remove_path",
            Event::ChainPath { .. } => "chain_path",
            Event::EditSegment { .. } => "edit_segment",
            Event::SetTool { .. } => "set_tool",
            Event::TogglePlayback { .. } => "toggle_playback",
            Event::SetChannel { .. } => "set_channel",
            Event::CreateStream { .. } => "create_stream",
            Event::SetStreamParams { .. } => "set_stream_params",
            Event::SetStream { .. } => "set_stream",
            Event::Subscribe { .. } => "subscribe",
            Event::Unsubscribe { .. } => "unsubscribe",
            Event::Mute { .. } => "mute",
            Event::Unmute { .. } => "unmute",
            Event::SetGain { .. } => "set_gain",
            Event::Tick { .. } => "tick",
        }
    }
}

/// Who did what, as sent to every participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub seq: u64,
    pub user: String,
    #[serde(flatten)]
    pub event: Event,
}

fn check_id(id: &str) -> Res<()> {
    if id.is_empty() || id.len() > MAX_ID_LEN || id.chars().any(|c| c.is_control()) {
        return Err(SessionError::BadId(id.to_string()));
    }
    Ok(())
}

fn check_position(p: [f64; 2]) -> Res<()> {
    for v in p {
        if !v.is_finite() || v.abs() > 1.0 {
            return Err(SessionError::Range {
                field: "position",
                value: v,
            });
        }
    }
    Ok(())
}

fn check_unit(field: &'static str, v: f64) -> Res<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(SessionError::Range { field, value: v });
    }
    Ok(())
}

fn check_pitch(p: i32) -> Res<()> {
    if p.abs() > PITCH_RANGE {
        return Err(SessionError::Range {
            field: "pitch_offset",
            value: p as f64,
        });
    }
    Ok(())
}

fn check_duration(d: f64) -> Res<()> {
    if !(d > 0.0 && d <= MAX_SEGMENT_SECONDS) {
        return Err(SessionError::Range {
            field: "duration",
            value: d,
        });
    }
    Ok(())
}

fn check_stream_params(note_length: f64, rate: f64) -> Res<()> {
    if !(NOTE_LENGTH_RANGE.0..=NOTE_LENGTH_RANGE.1).contains(&note_length) {
        return Err(SessionError::Range {
            field: "note_length",
            value: note_length,
        });
    }
    if !(RATE_RANGE.0..=RATE_RANGE.1).contains(&rate) {
        return Err(SessionError::Range {
            field: "rate",
            value: rate,
        });
    }
    Ok(())
}

fn unknown(kind: &'static str, id: &str) -> SessionError {
    SessionError::Unknown {
        kind,
        id: id.to_string(),
    }
}

fn straight_controls(a: [f64; 2], b: [f64; 2]) -> [[f64; 2]; 2] {
    let lerp = |t: f64| [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
    [lerp(1.0 / 3.0), lerp(2.0 / 3.0)]
}

/// Applies one event from `user`. Rejected events leave `state` as it was.
pub fn apply_event(
    state: &SessionState,
    user: &str,
    event: &Event,
    lookup: &dyn ParamLookup,
) -> Res<(SessionState, Broadcast)> {
    let mut s = state.clone();
    check_id(user)?;
    if !matches!(event, Event::Join) && !s.users.contains_key(user) {
        return Err(unknown("user", user));
    }
    match event {
        Event::Join => {
            if s.users.contains_key(user) {
                return Err(SessionError::Duplicate {
                    kind: "user",
                    id: user.into(),
                });
            }
            if s.users.len() >= MAX_USERS {
                return Err(SessionError::Full);
            }
            s.users.insert(
                user.into(),
                User {
                    id: user.into(),
                    muted: BTreeSet::new(),
                    gains: BTreeMap::new(),
                },
            );
            let private = private_channel(user);
            s.channels
                .entry(private.clone())
                .or_insert_with(|| Channel {
                    id: private,
                    kind: ChannelKind::Private(user.into()),
                    listeners: BTreeSet::new(),
                })
                .listeners
                .insert(user.into());
        }
        Event::Leave => {
            s.users.remove(user);
            for c in s.channels.values_mut() {
                c.listeners.remove(user);
            }
        }
        Event::CreateNode {
            id,
            position,
            channel,
        } => {
            check_id(id)?;
            check_position(*position)?;
            if s.nodes.contains_key(id) {
                return Err(SessionError::Duplicate {
                    kind: "node",
                    id: id.clone(),
                });
            }
            let channel = channel.clone().unwrap_or_else(|| PUBLIC_CHANNEL.into());
            if !s.channels.contains_key(&channel) {
                return Err(unknown("channel", &channel));
            }
            s.nodes.insert(
                id.clone(),
                Node {
                    id: id.clone(),
                    owner: user.into(),
                    position: *position,
                    volume: 1.0,
                    pitch_offset: 0,
                    stream: None,
                    channel,
                    playing: false,
                    params: lookup.lookup(*position),
                },
            );
        }
        Event::RemoveNode { id } => {
            if !s.nodes.contains_key(id) {
                return Err(unknown("node", id));
            }
            if s.paths.values().any(|p| p.nodes.contains(id)) {
                return Err(SessionError::InUse {
                    kind: "node",
                    id: id.clone(),
                });
            }
            s.nodes.remove(id);
        }
        Event::MoveNode { id, position } => {
            check_position(*position)?;
            let node = s.nodes.get_mut(id).ok_or_else(|| unknown("node", id))?;
            node.position = *position;
            node.params = lookup.lookup(*position);
        }
        Event::ConnectPath { id, nodes } => {
            check_id(id)?;
            if s.paths.contains_key(id) {
                return Err(SessionError::Duplicate {
                    kind: "path",
                    id: id.clone(),
                });
            }
            if nodes.len() < 2 {
                return Err(SessionError::Invalid(
                    "a path needs at least two nodes".into(),
                ));
            }
            let mut segments = Vec::with_capacity(nodes.len() - 1);
            for pair in nodes.windows(2) {
                let a = s
                    .nodes
                    .get(&pair[0])
                    .ok_or_else(|| unknown("node", &pair[0]))?;
                let b = s
                    .nodes
                    .get(&pair[1])
                    .ok_or_else(|| unknown("node", &pair[1]))?;
                segments.push(Segment {
                    duration: DEFAULT_SEGMENT_SECONDS,
                    controls: straight_controls(a.position, b.position),
                    volume: 1.0,
                    pitch_offset: 0,
                });
            }
            s.paths.insert(
                id.clone(),
                Path {
                    id: id.clone(),
                    owner: user.into(),
                    nodes: nodes.clone(),
                    segments,
                    chain_to: None,
                    playhead: 0.0,
                    playing: false,
                },
            );
        }
        Event::RemovePath { id } => {
            if !s.paths.contains_key(id) {
                return Err(unknown("path", id));
            }
            if s.paths.values().any(|p| p.chain_to.as_deref() == Some(id)) {
                return Err(SessionError::InUse {
                    kind: "path",
                    id: id.clone(),
                });
            }
            s.paths.remove(id);
        }
        Event::ChainPath { id, next } => {
            if !s.paths.contains_key(id) {
                return Err(unknown("path", id));
            }
            if let Some(next) = next {
                if !s.paths.contains_key(next) {
                    return Err(unknown("path", next));
                }
                let mut cursor = Some(next.clone());
                while let Some(c) = cursor {
                    if &c == id {
                        return Err(SessionError::Cycle(id.clone()));
                    }
                    cursor = s.paths[&c].chain_to.clone();
                }
            }
            s.paths.get_mut(id).expect("checked").chain_to = next.clone();
        }
        Event::EditSegment {
            path,
            index,
            duration,
            controls,
            volume,
            pitch_offset,
        } => {
            let p = s.paths.get_mut(path).ok_or_else(|| unknown("path", path))?;
            let len = p.segments.len();
            let seg = p
                .segments
                .get_mut(*index)
                .ok_or_else(|| SessionError::Range {
                    field: "segment index",
                    value: *index as f64,
                })?;
            if let Some(d) = duration {
                check_duration(*d)?;
                seg.duration = *d;
            }
            if let Some(c) = controls {
                check_position(c[0])?;
                check_position(c[1])?;
                seg.controls = *c;
            }
            if let Some(v) = volume {
                check_unit("volume", *v)?;
                seg.volume = *v;
            }
            if let Some(po) = pitch_offset {
                check_pitch(*po)?;
                seg.pitch_offset = *po;
            }
            debug_assert!(*index < len);
            let total = p.total_duration();
            p.playhead = p.playhead.min(total);
        }
        Event::SetTool {
            target,
            tool,
            value,
        } => {
            let value = *value;
            match (target, tool) {
                (Target::Node { .. }, Tool::Duration) => {
                    return Err(SessionError::Invalid(
                        "the duration tool applies to path segments".into(),
                    ));
                }
                (Target::Node { id }, Tool::Volume) => {
                    check_unit("volume", value)?;
                    s.nodes
                        .get_mut(id)
                        .ok_or_else(|| unknown("node", id))?
                        .volume = value;
                }
                (Target::Node { id }, Tool::Pitch) => {
                    let p = semitones(value)?;
                    s.nodes
                        .get_mut(id)
                        .ok_or_else(|| unknown("node", id))?
                        .pitch_offset = p;
                }
                (Target::Segment { path, index }, tool) => {
                    let p = s.paths.get_mut(path).ok_or_else(|| unknown("path", path))?;
                    let seg = p
                        .segments
                        .get_mut(*index)
                        .ok_or_else(|| SessionError::Range {
                            field: "segment index",
                            value: *index as f64,
                        })?;
                    match tool {
                        Tool::Duration => {
                            check_duration(value)?;
                            seg.duration = value;
                        }
                        Tool::Volume => {
                            check_unit("volume", value)?;
                            seg.volume = value;
                        }
                        Tool::Pitch => seg.pitch_offset = semitones(value)?,
                    }
                    let total = p.total_duration();
                    p.playhead = p.playhead.min(total);
                }
            }
        }
        Event::TogglePlayback { target } => match target {
            PlaybackTarget::Global => s.playing = !s.playing,
            PlaybackTarget::Node { id } => {
                let n = s.nodes.get_mut(id).ok_or_else(|| unknown("node", id))?;
                n.playing = !n.playing;
            }
            PlaybackTarget::Path { id } => {
                let p = s.paths.get_mut(id).ok_or_else(|| unknown("path", id))?;
                p.playing = !p.playing;
                if p.playing && p.playhead >= p.total_duration() {
                    p.playhead = 0.0;
                }
            }
        },
        Event::SetChannel { node, channel } => {
            if !s.channels.contains_key(channel) {
                return Err(unknown("channel", channel));
            }
            s.nodes
                .get_mut(node)
                .ok_or_else(|| unknown("node", node))?
                .channel = channel.clone();
        }
        Event::CreateStream {
            id,
            progression,
            note_length,
            rate,
        } => {
            check_id(id)?;
            check_stream_params(*note_length, *rate)?;
            if s.streams.contains_key(id) {
                return Err(SessionError::Duplicate {
                    kind: "stream",
                    id: id.clone(),
                });
            }
            s.streams.insert(
                id.clone(),
                NoteStream {
                    id: id.clone(),
                    progression: *progression,
                    note_length: *note_length,
                    rate: *rate,
                },
            );
        }
        Event::SetStreamParams {
            id,
            note_length,
            rate,
        } => {
            check_stream_params(*note_length, *rate)?;
            let st = s.streams.get_mut(id).ok_or_else(|| unknown("stream", id))?;
            st.note_length = *note_length;
            st.rate = *rate;
        }
        Event::SetStream { node, stream } => {
            if let Some(st) = stream {
                if !s.streams.contains_key(st) {
                    return Err(unknown("stream", st));
                }
            }
            s.nodes
                .get_mut(node)
                .ok_or_else(|| unknown("node", node))?
                .stream = stream.clone();
        }
        Event::Subscribe { channel } => {
            s.channels
                .get_mut(channel)
                .ok_or_else(|| unknown("channel", channel))?
                .listeners
                .insert(user.into());
        }
        Event::Unsubscribe { channel } => {
            s.channels
                .get_mut(channel)
                .ok_or_else(|| unknown("channel", channel))?
                .listeners
                .remove(user);
        }
        Event::Mute { user: other } => {
            check_id(other)?;
            s.users
                .get_mut(user)
                .expect("checked")
                .muted
                .insert(other.clone());
        }
        Event::Unmute { user: other } => {
            s.users.get_mut(user).expect("checked").muted.remove(other);
        }
        Event::SetGain { user: other, gain } => {
            check_id(other)?;
            check_unit("gain", *gain)?;
            s.users
                .get_mut(user)
                .expect("checked")
                .gains
                .insert(other.clone(), *gain);
        }
        Event::Tick { dt } => {
            if !(dt.is_finite() && *dt >= 0.0) {
                return Err(SessionError::Range {
                    field: "dt",
                    value: *dt,
                });
            }
            if s.playing {
                advance_paths(&mut s, *dt);
            }
        }
    }
    s.seq += 1;
    let broadcast = Broadcast {
        seq: s.seq,
        user: user.into(),
        event: event.clone(),
    };
    Ok((s, broadcast))
}

fn semitones(value: f64) -> Res<i32> {
    if value.fract() != 0.0 || !value.is_finite() || value.abs() > PITCH_RANGE as f64 {
        return Err(SessionError::Range {
            field: "pitch_offset",
            value,
        });
    }
    Ok(value as i32)
}

/// Moves playheads forward; a path that reaches its end stops and starts the
/// path it is chained to.
fn advance_paths(s: &mut SessionState, dt: f64) {
    let mut starts = Vec::new();
    for p in s.paths.values_mut() {
        if !p.playing {
            continue;
        }
        let total = p.total_duration();
        p.playhead = (p.playhead + dt).min(total);
        if p.playhead >= total {
            p.playing = false;
            if let Some(next) = &p.chain_to {
                starts.push(next.clone());
            }
        }
    }
    for id in starts {
        if let Some(p) = s.paths.get_mut(&id) {
            p.playing = true;
            p.playhead = 0.0;
        }
    }
}

fn bezier(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], p3: [f64; 2], u: f64) -> [f64; 2] {
    let v = 1.0 - u;
    let (a, b, c, d) = (v * v * v, 3.0 * v * v * u, 3.0 * v * u * u, u * u * u);
    [
        a * p0[0] + b * p1[0] + c * p2[0] + d * p3[0],
        a * p0[1] + b * p1[1] + c * p2[1] + d * p3[1],
    ]
}

/// Position along a path `t` seconds after its start.
pub fn path_position(state: &SessionState, path: &str, t: f64) -> Res<[f64; 2]> {
    let p = state.paths.get(path).ok_or_else(|| unknown("path", path))?;
    let total = p.total_duration();
    if !(0.0..=total).contains(&t) {
        return Err(SessionError::Range {
            field: "t",
            value: t,
        });
    }
    let pos = |i: usize| -> Res<[f64; 2]> {
        state
            .nodes
            .get(&p.nodes[i])
            .map(|n| n.position)
            .ok_or_else(|| unknown("node", &p.nodes[i]))
    };
    let last = p.segments.len() - 1;
    let mut start = 0.0;
    for (i, seg) in p.segments.iter().enumerate() {
        let end = start + seg.duration;
        if t < end || i == last {
            let u = if i == last && t >= total {
                1.0
            } else {
                ((t - start) / seg.duration).clamp(0.0, 1.0)
            };
            return Ok(bezier(
                pos(i)?,
                seg.controls[0],
                seg.controls[1],
                pos(i + 1)?,
                u,
            ));
        }
        start = end;
    }
    unreachable!("paths have at least one segment")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum VoiceSource {
    Node(String),
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    pub source: VoiceSource,
    pub owner: String,
    pub channel: String,
    pub gain: f64,
}

fn audible(state: &SessionState, channel: &str, listener: &str) -> bool {
    match state.channels.get(channel) {
        Some(Channel {
            kind: ChannelKind::Public,
            ..
        }) => true,
        Some(c) => c.listeners.contains(listener),
        None => false,
    }
}

/// Playing voices that `user` hears, with their gains.
pub fn mixdown_routing(state: &SessionState, user: &str) -> Res<Vec<Voice>> {
    let me = state.users.get(user).ok_or_else(|| unknown("user", user))?;
    if !state.playing {
        return Ok(Vec::new());
    }
    let heard =
        |owner: &str, channel: &str| !me.muted.contains(owner) && audible(state, channel, user);
    let gain_for = |owner: &str| me.gains.get(owner).copied().unwrap_or(1.0);
    let mut out = Vec::new();
    for n in state.nodes.values().filter(|n| n.playing) {
        if heard(&n.owner, &n.channel) {
            out.push(Voice {
                source: VoiceSource::Node(n.id.clone()),
                owner: n.owner.clone(),
                channel: n.channel.clone(),
                gain: n.volume * gain_for(&n.owner),
            });
        }
    }
    for p in state.paths.values().filter(|p| p.playing) {
        let Some(first) = state.nodes.get(&p.nodes[0]) else {
            continue;
        };
        if heard(&p.owner, &first.channel) {
            let seg = active_segment(p);
            out.push(Voice {
                source: VoiceSource::Path(p.id.clone()),
                owner: p.owner.clone(),
                channel: first.channel.clone(),
                gain: p.segments[seg].volume * gain_for(&p.owner),
            });
        }
    }
    Ok(out)
}

fn active_segment(p: &Path) -> usize {
    let mut start = 0.0;
    for (i, s) in p.segments.iter().enumerate() {
        start += s.duration;
        if p.playhead < start {
            return i;
        }
    }
    p.segments.len() - 1
}
