//! Sessions and the per-connection state machine. Nothing here touches a
//! socket: a connection turns one incoming line into replies, and session
//! members are notified through a broadcast channel.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use tokio::sync::broadcast;

use iglu_core::env::{EnvError, EpisodeConfig};
use iglu_core::replay::{Recorder, ReplayError, SystemClock, EPISODE_EXTENSION};
use iglu_core::tasks::{TaskError, TaskLibrary};
use iglu_core::{Action, Env};

use crate::wire::{
    decode, encode, ErrorCode, Incoming, Reply, Request, Role, TaskInfo, WireObservation, PROTOCOL_VERSION,
};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Sessions with no client message for this long are closed.
    pub idle_timeout: Duration,
    /// Where episode records are written; `None` disables recording.
    pub record_dir: Option<PathBuf>,
    pub max_line_bytes: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            idle_timeout: Duration::from_secs(600),
            record_dir: None,
            max_line_bytes: 1 << 20,
        }
    }
}

/// Shared registry of live sessions.
pub(crate) struct Hub {
    pub library: TaskLibrary,
    pub config: ServerConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_session: AtomicU64,
    next_connection: AtomicU64,
}

impl Hub {
    pub fn new(library: TaskLibrary, config: ServerConfig) -> Self {
        Hub {
            library,
            config,
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            next_connection: AtomicU64::new(1),
        }
    }

    fn open(&self) -> Arc<Session> {
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        let (events, _) = broadcast::channel(256);
        let session = Arc::new(Session {
            id: id.clone(),
            state: Mutex::new(Episode {
                slot: Slot::Empty,
                episodes: 0,
            }),
            last_activity: Mutex::new(Instant::now()),
            events,
        });
        lock(&self.sessions).insert(id, session.clone());
        session
    }

    fn find(&self, id: &str) -> Option<Arc<Session>> {
        lock(&self.sessions).get(id).cloned()
    }

    fn close(&self, id: &str) {
        lock(&self.sessions).remove(id);
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

pub(crate) struct Session {
    pub id: String,
    state: Mutex<Episode>,
    last_activity: Mutex<Instant>,
    events: broadcast::Sender<Event>,
}

impl Session {
    fn touch(&self) {
        *lock(&self.last_activity) = Instant::now();
    }

    pub fn last_activity(&self) -> Instant {
        *lock(&self.last_activity)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    fn notify(&self, origin: u64, reply: Reply) {
        // no receivers is fine
        let _ = self.events.send(Event { origin, reply });
    }
}

struct Episode {
    slot: Slot,
    episodes: u32,
}

enum Slot {
    Empty,
    Live(Box<Recorder>),
    /// Record closed; the final state stays available for observation.
    Over(Box<Env>),
}

impl Episode {
    fn env(&self) -> Option<&Env> {
        match &self.slot {
            Slot::Empty => None,
            Slot::Live(rec) => Some(rec.env()),
            Slot::Over(env) => Some(env),
        }
    }

    /// Writes the footer of a live record and keeps its final state.
    fn finish(&mut self) -> Result<(), ReplayError> {
        match std::mem::replace(&mut self.slot, Slot::Empty) {
            Slot::Live(rec) => {
                self.slot = Slot::Over(Box::new(rec.env().clone()));
                rec.finish().map(drop)
            }
            other => {
                self.slot = other;
                Ok(())
            }
        }
    }
}

/// Notification for the other members of a session.
#[derive(Debug, Clone)]
pub(crate) struct Event {
    pub origin: u64,
    pub reply: Reply,
}

struct Membership {
    role: Role,
    session: Arc<Session>,
    owner: bool,
}

/// Protocol state of one connection.
pub(crate) struct Connection {
    pub id: u64,
    hub: Arc<Hub>,
    member: Option<Membership>,
    out_seq: u64,
    last_in_seq: Option<u64>,
}

/// Lines to send back and whether to close afterwards.
pub(crate) struct Outcome {
    pub lines: Vec<String>,
    pub close: bool,
}

impl Connection {
    pub fn new(hub: Arc<Hub>) -> Self {
        let id = hub.next_connection.fetch_add(1, Ordering::Relaxed);
        Connection {
            id,
            hub,
            member: None,
            out_seq: 0,
            last_in_seq: None,
        }
    }

    pub fn session(&self) -> Option<&Arc<Session>> {
        self.member.as_ref().map(|m| &m.session)
    }

    pub fn encode(&mut self, reply: &Reply, reply_to: Option<u64>) -> String {
        self.out_seq += 1;
        encode(reply, self.session().map(|s| s.id.as_str()), self.out_seq, reply_to)
    }

    /// Handles one client message; always produces exactly one reply.
    pub fn handle(&mut self, text: &str) -> Outcome {
        let (reply, reply_to, close) = match decode(text) {
            Err((code, message, seq)) => (Reply::error(code, message), seq, false),
            Ok(msg) => {
                let seq = msg.seq;
                match self.check_envelope(&msg) {
                    Err((code, message)) => (Reply::error(code, message), seq, false),
                    Ok(()) => {
                        if let Some(s) = seq {
                            self.last_in_seq = Some(s);
                        }
                        if let Some(m) = &self.member {
                            m.session.touch();
                        }
                        let close = matches!(msg.request, Request::Bye {});
                        (self.dispatch(msg.request), seq, close)
                    }
                }
            }
        };
        Outcome {
            lines: vec![self.encode(&reply, reply_to)],
            close,
        }
    }

    fn check_envelope(&self, msg: &Incoming) -> Result<(), (ErrorCode, String)> {
        if let (Some(seq), Some(last)) = (msg.seq, self.last_in_seq) {
            if seq <= last {
                return Err((ErrorCode::BadSeq, format!("seq {seq} is not greater than {last}")));
            }
        }
        if let (Some(claimed), Some(m)) = (&msg.session_id, &self.member) {
            if !matches!(msg.request, Request::Hello { .. }) && *claimed != m.session.id {
                return Err((
                    ErrorCode::UnknownSession,
                    format!("this connection is in session {}", m.session.id),
                ));
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, request: Request) -> Reply {
        if let Request::Hello {
            protocol_version,
            role,
            session_id,
        } = request
        {
            return self.hello(protocol_version, role.unwrap_or(Role::BuilderAgent), session_id);
        }
        if matches!(request, Request::Bye {}) {
            return Reply::bye("client_bye");
        }
        let Some(member) = &self.member else {
            return Reply::error(ErrorCode::NotGreeted, "send hello first");
        };
        let (role, session) = (member.role, member.session.clone());
        match request {
            Request::ListTasks {} => Reply::TaskList {
                tasks: self
                    .hub
                    .library
                    .tasks()
                    .iter()
                    .map(|t| TaskInfo::new(t, role.sees_target()))
                    .collect(),
            },
            Request::Reset {
                task_id,
                max_steps,
                seed,
                termination_on_exit,
            } => {
                if !role.can_drive() {
                    return forbidden(role, "reset");
                }
                let mut config = EpisodeConfig::new(task_id);
                if let Some(n) = max_steps {
                    config.max_steps = n;
                }
                if let Some(s) = seed {
                    config.seed = s;
                }
                if let Some(t) = termination_on_exit {
                    config.termination_on_exit = t;
                }
                self.reset(&session, config)
            }
            Request::Observation {} => {
                let state = lock(&session.state);
                match state.env() {
                    Some(env) => Reply::Observation {
                        observation: WireObservation::new(env.observation(), true, env.matched_cells()),
                    },
                    None => no_episode(),
                }
            }
            Request::Step { action } => {
                if !role.can_drive() {
                    return forbidden(role, "step");
                }
                let Some(action) = action
                    .as_u64()
                    .and_then(|c| u8::try_from(c).ok())
                    .and_then(Action::from_code)
                else {
                    return Reply::error(
                        ErrorCode::BadAction,
                        format!("action must be an integer in 0..=17, got {action}"),
                    );
                };
                self.step(&session, action)
            }
            Request::Chat { text } => {
                if !role.can_chat() {
                    return forbidden(role, "chat");
                }
                let mut state = lock(&session.state);
                let rec = match &mut state.slot {
                    Slot::Live(rec) => rec,
                    Slot::Over(_) => return over(),
                    Slot::Empty => return no_episode(),
                };
                let speaker = role.speaker();
                match rec.chat(speaker, &text) {
                    Ok(()) => {
                        let step_index = rec.env().step_index();
                        session.notify(
                            self.id,
                            Reply::Chat {
                                speaker,
                                text,
                                step_index,
                            },
                        );
                        Reply::ChatAck { step_index }
                    }
                    Err(ReplayError::Env(EnvError::EmptyChat)) => {
                        Reply::error(ErrorCode::EmptyChat, "chat text is empty")
                    }
                    Err(e) => Reply::error(ErrorCode::Internal, e.to_string()),
                }
            }
            Request::Hello { .. } | Request::Bye {} => unreachable!("handled above"),
        }
    }

    fn hello(&mut self, version: u32, role: Role, session_id: Option<String>) -> Reply {
        if self.member.is_some() {
            return Reply::error(ErrorCode::AlreadyGreeted, "hello was already accepted");
        }
        if version != PROTOCOL_VERSION {
            return Reply::error(
                ErrorCode::UnsupportedVersion,
                format!("protocol_version {version} is not supported (server speaks {PROTOCOL_VERSION})"),
            );
        }
        let (session, owner) = match session_id {
            None => (self.hub.open(), true),
            Some(_) if role.can_drive() => {
                return Reply::error(ErrorCode::RoleForbidden, "builder roles open their own session");
            }
            Some(id) => match self.hub.find(&id) {
                Some(s) => (s, false),
                None => return Reply::error(ErrorCode::UnknownSession, format!("no session `{id}`")),
            },
        };
        session.touch();
        self.member = Some(Membership { role, session, owner });
        Reply::HelloAck {
            protocol_version: PROTOCOL_VERSION,
            role,
            attached: !owner,
        }
    }

    fn reset(&self, session: &Session, config: EpisodeConfig) -> Reply {
        let mut state = lock(&session.state);
        let mut rec = match Recorder::start(config, &self.hub.library, Box::new(SystemClock)) {
            Ok(rec) => rec,
            Err(ReplayError::Env(EnvError::Task(TaskError::UnknownTask(id)))) => {
                return Reply::error(ErrorCode::UnknownTask, format!("unknown task `{id}`"));
            }
            Err(e) => return Reply::error(ErrorCode::BadConfig, e.to_string()),
        };
        if let Err(e) = state.finish() {
            return Reply::error(ErrorCode::Internal, format!("closing previous record: {e}"));
        }
        state.episodes += 1;
        if let Some(dir) = &self.hub.config.record_dir {
            let path = dir.join(format!("{}-{:04}.{EPISODE_EXTENSION}", session.id, state.episodes));
            let sink = fs::create_dir_all(dir).and_then(|()| File::create(&path));
            match sink {
                Ok(file) => {
                    if let Err(e) = rec.stream_to(Box::new(BufWriter::new(file))) {
                        return Reply::error(ErrorCode::Internal, format!("writing {}: {e}", path.display()));
                    }
                }
                Err(e) => return Reply::error(ErrorCode::Internal, format!("creating {}: {e}", path.display())),
            }
        }
        let observation = WireObservation::new(rec.env().observation(), true, Vec::new());
        state.slot = Slot::Live(Box::new(rec));
        session.notify(
            self.id,
            Reply::Observation {
                observation: observation.clone(),
            },
        );
        Reply::Observation { observation }
    }

    fn step(&self, session: &Session, action: Action) -> Reply {
        let mut state = lock(&session.state);
        let rec = match &mut state.slot {
            Slot::Live(rec) => rec,
            Slot::Over(_) => return over(),
            Slot::Empty => return no_episode(),
        };
        let out = match rec.step(action) {
            Ok(out) => out,
            Err(e) => return Reply::error(ErrorCode::Internal, e.to_string()),
        };
        let matched = rec.env().matched_cells();
        if out.done {
            if let Err(e) = state.finish() {
                eprintln!("session {}: closing record: {e}", session.id);
            }
        }
        let full = WireObservation::new(out.observation.clone(), true, matched.clone());
        session.notify(self.id, Reply::Observation { observation: full });
        Reply::StepResult {
            observation: WireObservation::new(out.observation, false, matched),
            reward: out.reward,
            done: out.done,
            info: out.info,
        }
    }

    /// Leaves the session; the owner closes it and its record.
    pub fn close(&mut self) {
        let Some(m) = self.member.take() else {
            return;
        };
        if m.owner {
            self.hub.close(&m.session.id);
            if let Err(e) = lock(&m.session.state).finish() {
                eprintln!("session {}: closing record: {e}", m.session.id);
            }
            m.session.notify(self.id, Reply::bye("session_closed"));
        }
    }
}

fn no_episode() -> Reply {
    Reply::error(ErrorCode::NoActiveEpisode, "no episode yet; send reset")
}

fn over() -> Reply {
    Reply::error(ErrorCode::EpisodeOver, "episode is over; reset to start another")
}

fn forbidden(role: Role, what: &str) -> Reply {
    let role = serde_json::to_value(role).expect("role serializes");
    Reply::error(ErrorCode::RoleForbidden, format!("role {role} may not {what}"))
}
