//! Message schema. Every message is one JSON object; on raw sockets each is
//! terminated by `\n`, on WebSocket each is one text frame.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use iglu_core::env::{Observation, Pose, Speaker, StepInfo, Utterance};
use iglu_core::tasks::{Difficulty, TaskDef};
use iglu_core::voxel::NUM_COLORS;
use iglu_core::{Pos, RewardEvent, Structure, VoxelGrid};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    BuilderAgent,
    HumanBuilder,
    Architect,
    Observer,
}

impl Role {
    pub fn can_drive(self) -> bool {
        matches!(self, Role::BuilderAgent | Role::HumanBuilder)
    }

    pub fn can_chat(self) -> bool {
        self != Role::Observer
    }

    /// Roles that may see the target structure in `task_list`.
    pub fn sees_target(self) -> bool {
        matches!(self, Role::Architect | Role::Observer)
    }

    pub fn speaker(self) -> Speaker {
        match self {
            Role::Architect => Speaker::Architect,
            _ => Speaker::Builder,
        }
    }
}

/// Client to server, tagged by `kind`. Unknown fields are ignored.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Request {
    Hello {
        protocol_version: u32,
        #[serde(default)]
        role: Option<Role>,
        /// Join an existing session instead of opening one.
        #[serde(default)]
        session_id: Option<String>,
    },
    ListTasks {},
    Reset {
        task_id: String,
        #[serde(default)]
        max_steps: Option<u32>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        termination_on_exit: Option<bool>,
    },
    /// Asks for the current observation with the full grid.
    Observation {},
    Step {
        action: Value,
    },
    Chat {
        text: String,
    },
    Bye {},
}

pub const REQUEST_KINDS: [&str; 7] = ["hello", "list_tasks", "reset", "observation", "step", "chat", "bye"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadMessage,
    UnknownKind,
    BadSeq,
    NotGreeted,
    AlreadyGreeted,
    UnsupportedVersion,
    UnknownSession,
    RoleForbidden,
    UnknownTask,
    BadConfig,
    NoActiveEpisode,
    EpisodeOver,
    BadAction,
    EmptyChat,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub task_id: String,
    pub difficulty: Difficulty,
    pub blocks: usize,
    pub subgoals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Structure>,
}

impl TaskInfo {
    pub fn new(task: &TaskDef, with_target: bool) -> Self {
        TaskInfo {
            task_id: task.task_id.clone(),
            difficulty: task.difficulty,
            blocks: task.target.len(),
            subgoals: task.subgoals.len(),
            target: with_target.then(|| task.target.clone()),
        }
    }
}

/// Observation as sent on the wire. `grid` is present after a reset and on
/// request; step results leave it out and carry `info.grid_delta` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireObservation {
    pub step_index: u32,
    pub pose: Pose,
    pub inventory: [u8; NUM_COLORS],
    pub grid: Option<VoxelGrid>,
    pub chat: Vec<Utterance>,
    pub current_instruction: Option<String>,
    pub last_reward: RewardEvent,
    /// Built cells counted by the current match.
    pub matched: Vec<Pos>,
}

impl WireObservation {
    pub fn new(obs: Observation, full_grid: bool, matched: Vec<Pos>) -> Self {
        WireObservation {
            step_index: obs.step_index,
            pose: obs.pose,
            inventory: obs.inventory,
            grid: full_grid.then_some(obs.grid),
            chat: obs.chat,
            current_instruction: obs.current_instruction,
            last_reward: obs.last_reward,
            matched,
        }
    }
}

/// Server to client payloads; the envelope adds `kind`, `session_id`, `seq`
/// and `reply_to`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Reply {
    HelloAck {
        protocol_version: u32,
        role: Role,
        attached: bool,
    },
    TaskList {
        tasks: Vec<TaskInfo>,
    },
    Observation {
        observation: WireObservation,
    },
    StepResult {
        observation: WireObservation,
        reward: RewardEvent,
        done: bool,
        info: StepInfo,
    },
    ChatAck {
        step_index: u32,
    },
    Chat {
        speaker: Speaker,
        text: String,
        step_index: u32,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
    Bye {
        reason: String,
    },
}

impl Reply {
    pub fn kind(&self) -> &'static str {
        match self {
            Reply::HelloAck { .. } => "hello_ack",
            Reply::TaskList { .. } => "task_list",
            Reply::Observation { .. } => "observation",
            Reply::StepResult { .. } => "step_result",
            Reply::ChatAck { .. } => "chat_ack",
            Reply::Chat { .. } => "chat",
            Reply::Error { .. } => "error",
            Reply::Bye { .. } => "bye",
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Reply::Error {
            code,
            message: message.into(),
        }
    }

    pub fn bye(reason: &str) -> Self {
        Reply::Bye {
            reason: reason.to_string(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    session_id: Option<&'a str>,
    seq: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reply_to: Option<u64>,
    #[serde(flatten)]
    body: &'a Reply,
}

/// Serializes one server message without the line terminator.
pub fn encode(body: &Reply, session_id: Option<&str>, seq: u64, reply_to: Option<u64>) -> String {
    serde_json::to_string(&Envelope {
        kind: body.kind(),
        session_id,
        seq,
        reply_to,
        body,
    })
    .expect("reply serialization")
}

/// Envelope fields of an incoming message.
#[derive(Debug, Clone, PartialEq)]
pub struct Incoming {
    pub seq: Option<u64>,
    pub session_id: Option<String>,
    pub request: Request,
}

/// Parses one client message; errors carry the code to answer with.
pub fn decode(text: &str) -> Result<Incoming, (ErrorCode, String, Option<u64>)> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| (ErrorCode::BadMessage, format!("invalid JSON: {e}"), None))?;
    let Value::Object(map) = &value else {
        return Err((ErrorCode::BadMessage, "message must be a JSON object".into(), None));
    };
    let seq = match map.get("seq") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or((ErrorCode::BadSeq, "seq must be a non-negative integer".into(), None))?,
        ),
    };
    let session_id = match map.get("session_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err((ErrorCode::BadMessage, "session_id must be a string".into(), seq)),
    };
    let kind = map.get("kind").and_then(Value::as_str).ok_or((
        ErrorCode::BadMessage,
        "missing string field `kind`".into(),
        seq,
    ))?;
    if !REQUEST_KINDS.contains(&kind) {
        return Err((ErrorCode::UnknownKind, format!("unknown kind `{kind}`"), seq));
    }
    let request = serde_json::from_value(value.clone()).map_err(|e| (ErrorCode::BadMessage, e.to_string(), seq))?;
    Ok(Incoming {
        seq,
        session_id,
        request,
    })
}
