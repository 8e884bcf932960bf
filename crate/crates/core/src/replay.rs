//! Episode records: line-oriented persistence and replay verification.
//!
//! A record is one JSON object per line: a header, one line per step and a
//! footer. Recording goes through [`Recorder`], which wraps an [`Env`] and can
//! stream each line to a sink as it is produced.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::Agent;
use crate::env::{
    sha256_hex, Action, Blocked, CellChange, EndReason, Env, EnvError, EpisodeConfig, Pose, Speaker, StepOutcome,
};
use crate::matching::RewardEvent;
use crate::metrics::{fixed_frame_hamming, rho, EpisodeSummary};
use crate::tasks::{TaskDef, TaskLibrary};

pub const FORMAT_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const EPISODE_EXTENSION: &str = "iglu-episode";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },
    #[error("file has no header line")]
    MissingHeader,
    #[error("file ends without a footer line")]
    MissingFooter,
    #[error("line {line}: {message}")]
    Layout { line: usize, message: String },
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("recorded with engine {found}, this is engine {expected}")]
    EngineVersion { found: String, expected: String },
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Source of wall-clock timestamps (milliseconds since the Unix epoch).
pub trait Clock: Send {
    fn now_ms(&mut self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&mut self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// Starts at `start` and advances by `tick` on every reading.
#[derive(Debug, Clone, Copy)]
pub struct ManualClock {
    pub now: u64,
    pub tick: u64,
}

impl ManualClock {
    pub fn new(start: u64, tick: u64) -> Self {
        ManualClock { now: start, tick }
    }
}

impl Clock for ManualClock {
    fn now_ms(&mut self) -> u64 {
        let t = self.now;
        self.now += self.tick;
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub engine_version: String,
    pub started_at: u64,
    pub config: EpisodeConfig,
    /// SHA-256 of the task definition's JSON form.
    pub task_digest: String,
    /// Digest of the observation right after reset.
    pub initial_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEvent {
    pub t: u64,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub i: u32,
    pub t: u64,
    pub action: u8,
    pub reward: RewardEvent,
    pub blocked: Option<Blocked>,
    pub delta: Vec<CellChange>,
    pub pose: Pose,
    /// Utterances added since the previous step, applied before the action.
    pub chat: Vec<ChatEvent>,
    pub done: bool,
    pub max_match: usize,
    pub obs_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub g: i64,
    pub c: u8,
    pub rho: f64,
    /// Fixed-frame Hamming distance to the target over the zone volume.
    pub hamming: f64,
    pub steps_used: u32,
    pub end_reason: Option<EndReason>,
    /// Utterances added after the last step.
    pub trailing_chat: Vec<ChatEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(Header),
    Step(StepRecord),
    Footer(Footer),
}

fn line_json<T: Serialize>(kind: &str, body: &T) -> String {
    // Tag first, then the body's fields in declaration order.
    let mut out = format!("{{\"kind\":\"{kind}\"");
    let body = serde_json::to_string(body).expect("record serialization");
    if body.len() > 2 {
        out.push(',');
        out.push_str(&body[1..body.len() - 1]);
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub header: Header,
    pub steps: Vec<StepRecord>,
    pub footer: Footer,
}

impl EpisodeRecord {
    pub fn to_jsonl(&self) -> String {
        let mut out = line_json("header", &self.header);
        for s in &self.steps {
            out.push_str(&line_json("step", s));
        }
        out.push_str(&line_json("footer", &self.footer));
        out
    }

    /// The serialized form with every timestamp zeroed; two runs of the
    /// same episode produce identical bytes.
    pub fn canonical(&self) -> String {
        let mut r = self.clone();
        r.header.started_at = 0;
        for s in &mut r.steps {
            s.t = 0;
            s.chat.iter_mut().for_each(|c| c.t = 0);
        }
        r.footer.trailing_chat.iter_mut().for_each(|c| c.t = 0);
        r.to_jsonl()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ReplayError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// Parses a complete record. A missing footer, a bad line or a trailing
    /// partial line is an error; no partial record is returned.
    pub fn from_jsonl(text: &str) -> Result<Self, ReplayError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        let mut offset = 0;
        for (n, raw) in text.split_inclusive('\n').enumerate() {
            let line_no = n + 1;
            let start = offset;
            offset += raw.len();
            let Some(body) = raw.strip_suffix('\n') else {
                return Err(ReplayError::Parse {
                    line: line_no,
                    offset: start + raw.len(),
                    message: "line is not terminated".into(),
                });
            };
            let body = body.strip_suffix('\r').unwrap_or(body);
            if body.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                check_header_version(body, line_no, start)?;
            }
            let line: Line = serde_json::from_str(body).map_err(|e| ReplayError::Parse {
                line: line_no,
                offset: start + e.column().saturating_sub(1),
                message: e.to_string(),
            })?;
            let layout = |message: &str| ReplayError::Layout {
                line: line_no,
                message: message.into(),
            };
            if footer.is_some() {
                return Err(layout("content after footer"));
            }
            match line {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => return Err(layout("second header")),
                _ if header.is_none() => return Err(ReplayError::MissingHeader),
                Line::Step(s) => steps.push(s),
                Line::Footer(f) => footer = Some(f),
            }
        }
        let header = header.ok_or(ReplayError::MissingHeader)?;
        let footer = footer.ok_or(ReplayError::MissingFooter)?;
        Ok(EpisodeRecord { header, steps, footer })
    }

    pub fn actions(&self) -> impl Iterator<Item = u8> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            task_id: self.header.config.task_id.clone(),
            g: self.footer.g,
            success: self.footer.c == 1,
            rho: self.footer.rho,
            steps_used: self.footer.steps_used,
        }
    }

    /// Internal bookkeeping checks that need no engine: contiguous step
    /// indices, reward sum, step count and end state.
    pub fn check_consistency(&self) -> Result<(), ReplayError> {
        let bad = |m: String| Err(ReplayError::Inconsistent(m));
        for (k, s) in self.steps.iter().enumerate() {
            if s.i as usize != k + 1 {
                return bad(format!("step line {} has index {}", k + 1, s.i));
            }
            if s.reward.value != s.reward.cause.value() {
                return bad(format!("step {}: reward {} does not match cause", s.i, s.reward.value));
            }
            if s.done && k + 1 != self.steps.len() {
                return bad(format!("step {} is done but more steps follow", s.i));
            }
        }
        let g: i64 = self.steps.iter().map(|s| s.reward.value as i64).sum();
        if g != self.footer.g {
            return bad(format!("footer g {} but steps sum to {g}", self.footer.g));
        }
        if self.footer.steps_used as usize != self.steps.len() {
            return bad(format!(
                "footer steps_used {} but {} steps",
                self.footer.steps_used,
                self.steps.len()
            ));
        }
        if self.footer.c > 1 {
            return bad(format!("footer c is {}", self.footer.c));
        }
        if !(0.0..=1.0).contains(&self.footer.rho) || (self.footer.c == 1 && self.footer.rho != 0.0) {
            return bad(format!("footer rho {} with c {}", self.footer.rho, self.footer.c));
        }
        let done = self.steps.last().is_some_and(|s| s.done);
        if done != self.footer.end_reason.is_some() {
            return bad("footer end_reason disagrees with the last step".into());
        }
        Ok(())
    }
}

fn check_header_version(body: &str, line: usize, offset: usize) -> Result<(), ReplayError> {
    // Read the version before the full schema so old files fail with a
    // version error rather than a field error.
    let value: Value = serde_json::from_str(body).map_err(|e| ReplayError::Parse {
        line,
        offset: offset + e.column().saturating_sub(1),
        message: e.to_string(),
    })?;
    if value.get("kind").and_then(Value::as_str) != Some("header") {
        return Err(ReplayError::MissingHeader);
    }
    match value.get("format_version").and_then(Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => Ok(()),
        Some(v) => Err(ReplayError::FormatVersion {
            found: v as u32,
            expected: FORMAT_VERSION,
        }),
        None => Ok(()),
    }
}

pub fn task_digest(task: &TaskDef) -> String {
    sha256_hex(serde_json::to_string(task).expect("task serialization").as_bytes())
}

/// Drives an [`Env`] and records every step and utterance.
pub struct Recorder {
    env: Env,
    header: Header,
    steps: Vec<StepRecord>,
    pending_chat: Vec<ChatEvent>,
    clock: Box<dyn Clock>,
    sink: Option<Box<dyn Write + Send>>,
}

impl fmt::Debug for Recorder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Recorder")
            .field("header", &self.header)
            .field("steps", &self.steps.len())
            .finish()
    }
}

impl Recorder {
    pub fn start(config: EpisodeConfig, library: &TaskLibrary, clock: Box<dyn Clock>) -> Result<Self, ReplayError> {
        Ok(Self::with_env(Env::new(config, library)?, clock))
    }

    /// Resets `env` and starts a record of its next episode.
    pub fn with_env(mut env: Env, mut clock: Box<dyn Clock>) -> Self {
        let initial = env.reset();
        let header = Header {
            format_version: FORMAT_VERSION,
            engine_version: ENGINE_VERSION.to_string(),
            started_at: clock.now_ms(),
            config: env.config().clone(),
            task_digest: task_digest(env.task()),
            initial_digest: initial.digest(),
        };
        Recorder {
            env,
            header,
            steps: Vec::new(),
            pending_chat: Vec::new(),
            clock,
            sink: None,
        }
    }

    /// Streams lines to `sink` from now on, starting with the header.
    pub fn stream_to(&mut self, mut sink: Box<dyn Write + Send>) -> Result<(), ReplayError> {
        sink.write_all(line_json("header", &self.header).as_bytes())?;
        for s in &self.steps {
            sink.write_all(line_json("step", s).as_bytes())?;
        }
        sink.flush()?;
        self.sink = Some(sink);
        Ok(())
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn chat(&mut self, speaker: Speaker, text: &str) -> Result<(), ReplayError> {
        self.env.chat(speaker, text)?;
        let t = self.clock.now_ms();
        self.pending_chat.push(ChatEvent {
            t,
            speaker,
            text: text.to_string(),
        });
        Ok(())
    }

    pub fn step_code(&mut self, code: u8) -> Result<StepOutcome, ReplayError> {
        self.step(Action::try_from(code)?)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, ReplayError> {
        let out = self.env.step(action)?;
        let record = StepRecord {
            i: out.observation.step_index,
            t: self.clock.now_ms(),
            action: action.code(),
            reward: out.reward,
            blocked: out.info.blocked,
            delta: out.info.grid_delta.clone(),
            pose: out.observation.pose,
            chat: std::mem::take(&mut self.pending_chat),
            done: out.done,
            max_match: out.info.max_match,
            obs_digest: out.observation.digest(),
        };
        if let Some(sink) = &mut self.sink {
            sink.write_all(line_json("step", &record).as_bytes())?;
            sink.flush()?;
        }
        self.steps.push(record);
        Ok(out)
    }

    /// Closes the record, whether or not the episode is over.
    pub fn finish(mut self) -> Result<EpisodeRecord, ReplayError> {
        let env = &self.env;
        let target = &env.task().target;
        let footer = Footer {
            g: env.episode_reward(),
            c: env.is_success() as u8,
            rho: rho(target.len(), env.built().len(), env.max_match()),
            hamming: fixed_frame_hamming(env.grid(), target),
            steps_used: env.step_index(),
            end_reason: env.end_reason(),
            trailing_chat: std::mem::take(&mut self.pending_chat),
        };
        if let Some(sink) = &mut self.sink {
            sink.write_all(line_json("footer", &footer).as_bytes())?;
            sink.flush()?;
        }
        Ok(EpisodeRecord {
            header: self.header,
            steps: self.steps,
            footer,
        })
    }
}

/// Runs `agent` until the episode ends.
pub fn run_episode(
    config: EpisodeConfig,
    library: &TaskLibrary,
    agent: &mut dyn Agent,
    clock: Box<dyn Clock>,
) -> Result<EpisodeRecord, ReplayError> {
    let mut rec = Recorder::start(config, library, clock)?;
    while !rec.env().is_done() {
        let action = agent.act(rec.env());
        rec.step(action)?;
    }
    rec.finish()
}

/// First field where a recomputed episode differs from its record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Step index, or `None` for header and footer fields.
    pub step: Option<u32>,
    pub field: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {i}")?,
            None => f.write_str("record")?,
        }
        write!(
            f,
            ": {} recorded {} but replay gives {}",
            self.field, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    /// Verify records written by a different engine version.
    pub allow_version_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub steps_checked: usize,
    pub divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Re-runs the recorded config, chat and actions and compares everything
/// except timestamps.
pub fn replay_verify(
    record: &EpisodeRecord,
    library: &TaskLibrary,
    options: VerifyOptions,
) -> Result<VerifyReport, ReplayError> {
    if record.header.engine_version != ENGINE_VERSION && !options.allow_version_mismatch {
        return Err(ReplayError::EngineVersion {
            found: record.header.engine_version.clone(),
            expected: ENGINE_VERSION.to_string(),
        });
    }
    let mut rec = Recorder::start(record.header.config.clone(), library, Box::new(ManualClock::new(0, 0)))?;
    let fail = |step: Option<u32>, field: &str, expected: String, actual: String| VerifyReport {
        steps_checked: step.unwrap_or(0) as usize,
        divergence: Some(Divergence {
            step,
            field: field.into(),
            expected,
            actual,
        }),
    };
    for s in &record.steps {
        for c in &s.chat {
            if let Err(e) = rec.chat(c.speaker, &c.text) {
                return Ok(fail(Some(s.i), "chat", c.text.clone(), e.to_string()));
            }
        }
        if let Err(e) = rec.step_code(s.action) {
            return Ok(fail(Some(s.i), "action", s.action.to_string(), e.to_string()));
        }
    }
    for c in &record.footer.trailing_chat {
        if let Err(e) = rec.chat(c.speaker, &c.text) {
            return Ok(fail(None, "trailing_chat", c.text.clone(), e.to_string()));
        }
    }
    let fresh = rec.finish()?;
    Ok(VerifyReport {
        steps_checked: record.steps.len(),
        divergence: first_divergence(record, &fresh),
    })
}

fn fields<T: Serialize>(value: &T, skip: &[&str]) -> Vec<(String, Value)> {
    match serde_json::to_value(value).expect("record serialization") {
        Value::Object(map) => map.into_iter().filter(|(k, _)| !skip.contains(&k.as_str())).collect(),
        _ => unreachable!("records serialize as objects"),
    }
}

fn strip_chat_times(v: &mut Value) {
    if let Value::Array(items) = v {
        for item in items {
            if let Value::Object(m) = item {
                m.remove("t");
            }
        }
    }
}

fn diff_fields(
    step: Option<u32>,
    prefix: &str,
    expected: Vec<(String, Value)>,
    actual: Vec<(String, Value)>,
) -> Option<Divergence> {
    for ((name, mut e), (_, mut a)) in expected.into_iter().zip(actual) {
        if name == "chat" || name == "trailing_chat" {
            strip_chat_times(&mut e);
            strip_chat_times(&mut a);
        }
        if e != a {
            return Some(Divergence {
                step,
                field: format!("{prefix}{name}"),
                expected: e.to_string(),
                actual: a.to_string(),
            });
        }
    }
    None
}

fn first_divergence(recorded: &EpisodeRecord, fresh: &EpisodeRecord) -> Option<Divergence> {
    let header_skip = ["started_at", "engine_version"];
    if let Some(d) = diff_fields(
        None,
        "header.",
        fields(&recorded.header, &header_skip),
        fields(&fresh.header, &header_skip),
    ) {
        return Some(d);
    }
    for (r, f) in recorded.steps.iter().zip(&fresh.steps) {
        if let Some(d) = diff_fields(Some(r.i), "", fields(r, &["t"]), fields(f, &["t"])) {
            return Some(d);
        }
    }
    if recorded.steps.len() != fresh.steps.len() {
        return Some(Divergence {
            step: None,
            field: "steps".into(),
            expected: recorded.steps.len().to_string(),
            actual: fresh.steps.len().to_string(),
        });
    }
    diff_fields(
        None,
        "footer.",
        fields(&recorded.footer, &[]),
        fields(&fresh.footer, &[]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{GreedyOracle, RandomAgent};

    fn oracle_l5() -> EpisodeRecord {
        let lib = TaskLibrary::bundled();
        run_episode(
            EpisodeConfig::new("L5"),
            &lib,
            &mut GreedyOracle::new(),
            Box::new(ManualClock::new(1000, 7)),
        )
        .unwrap()
    }

    #[test]
    fn single_noop_episode() {
        let lib = TaskLibrary::bundled();
        let mut rec = Recorder::start(
            EpisodeConfig::new("L5").with_max_steps(1),
            &lib,
            Box::new(ManualClock::new(0, 1)),
        )
        .unwrap();
        rec.step(Action::Noop).unwrap();
        let r = rec.finish().unwrap();
        assert_eq!(r.steps.len(), 1);
        assert!(r.steps[0].done);
        assert_eq!(r.footer.end_reason, Some(EndReason::MaxSteps));
        assert_eq!(r.footer.rho, 1.0);
        r.check_consistency().unwrap();
    }

    #[test]
    fn oracle_round_trip() {
        let r = oracle_l5();
        assert_eq!(r.footer.g, 10);
        assert_eq!(r.footer.c, 1);
        assert_eq!(r.footer.rho, 0.0);
        assert_eq!(r.footer.hamming, 0.0);
        r.check_consistency().unwrap();
        let back = EpisodeRecord::from_jsonl(&r.to_jsonl()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_jsonl(), r.to_jsonl());
    }

    #[test]
    fn line_layout() {
        let text = oracle_l5().to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("{\"kind\":\"header\",\"format_version\":1,"));
        assert!(lines[1].starts_with("{\"kind\":\"step\",\"i\":1,\"t\":1007,\"action\":"));
        assert!(lines
            .last()
            .unwrap()
            .starts_with("{\"kind\":\"footer\",\"g\":10,\"c\":1,\"rho\":0.0,"));
    }

    #[test]
    fn canonical_ignores_clock() {
        let lib = TaskLibrary::bundled();
        let run = |start| {
            run_episode(
                EpisodeConfig::new("L5").with_max_steps(60),
                &lib,
                &mut RandomAgent::new(9),
                Box::new(ManualClock::new(start, 3)),
            )
            .unwrap()
        };
        let (a, b) = (run(0), run(55_000));
        assert_ne!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.canonical(), b.canonical());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = oracle_l5().to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        let without_footer = lines[..lines.len() - 1].join("\n") + "\n";
        assert!(matches!(
            EpisodeRecord::from_jsonl(&without_footer),
            Err(ReplayError::MissingFooter)
        ));
        let cut = &text[..text.len() - 20];
        assert!(matches!(EpisodeRecord::from_jsonl(cut), Err(ReplayError::Parse { .. })));
        assert!(matches!(EpisodeRecord::from_jsonl(""), Err(ReplayError::MissingHeader)));
    }

    #[test]
    fn parse_error_reports_offset() {
        let text = oracle_l5().to_jsonl();
        let first_len = text.find('\n').unwrap() + 1;
        let broken = format!("{}{{\"kind\":\"step\",\"i\":oops}}\n", &text[..first_len]);
        match EpisodeRecord::from_jsonl(&broken) {
            Err(ReplayError::Parse { line, offset, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(&broken[offset..offset + 1], "o");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_typed() {
        let text = oracle_l5()
            .to_jsonl()
            .replacen("\"format_version\":1", "\"format_version\":7", 1);
        assert!(matches!(
            EpisodeRecord::from_jsonl(&text),
            Err(ReplayError::FormatVersion { found: 7, expected: 1 })
        ));

        let mut r = oracle_l5();
        r.header.engine_version = "0.0.1".into();
        let lib = TaskLibrary::bundled();
        assert!(matches!(
            replay_verify(&r, &lib, VerifyOptions::default()),
            Err(ReplayError::EngineVersion { .. })
        ));
        let ok = replay_verify(
            &r,
            &lib,
            VerifyOptions {
                allow_version_mismatch: true,
            },
        )
        .unwrap();
        assert!(ok.is_ok());
    }

    #[test]
    fn fresh_record_verifies() {
        let lib = TaskLibrary::bundled();
        let r = oracle_l5();
        let report = replay_verify(&r, &lib, VerifyOptions::default()).unwrap();
        assert_eq!(
            report,
            VerifyReport {
                steps_checked: r.steps.len(),
                divergence: None
            }
        );
    }

    #[test]
    fn tampered_reward_diverges_at_its_step() {
        let lib = TaskLibrary::bundled();
        let mut r = oracle_l5();
        let k = r.steps.iter().position(|s| s.reward.value == 2).unwrap();
        r.steps[k].reward.value = 1;
        let d = replay_verify(&r, &lib, VerifyOptions::default())
            .unwrap()
            .divergence
            .unwrap();
        assert_eq!(d.step, Some(r.steps[k].i));
        assert_eq!(d.field, "reward");
        assert!(r.check_consistency().is_err());
    }

    #[test]
    fn chat_is_recorded_and_replayed() {
        let lib = TaskLibrary::bundled();
        let mut rec = Recorder::start(EpisodeConfig::new("L5"), &lib, Box::new(ManualClock::new(0, 1))).unwrap();
        rec.chat(Speaker::Architect, "put a red block down").unwrap();
        rec.step(Action::Noop).unwrap();
        rec.chat(Speaker::Builder, "where?").unwrap();
        let r = rec.finish().unwrap();
        assert_eq!(r.steps[0].chat.len(), 1);
        assert_eq!(r.footer.trailing_chat[0].text, "where?");
        assert_eq!(r.footer.end_reason, None);
        r.check_consistency().unwrap();
        assert!(replay_verify(&r, &lib, VerifyOptions::default()).unwrap().is_ok());

        let mut tampered = r.clone();
        tampered.steps[0].chat[0].text = "something else".into();
        let d = replay_verify(&tampered, &lib, VerifyOptions::default())
            .unwrap()
            .divergence
            .unwrap();
        assert_eq!((d.step, d.field.as_str()), (Some(1), "obs_digest"));
    }

    #[test]
    fn streamed_bytes_match_saved_bytes() {
        use std::sync::{Arc, Mutex};

        #[derive(Clone, Default)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }

        let lib = TaskLibrary::bundled();
        let buf = Shared::default();
        let mut rec = Recorder::start(EpisodeConfig::new("L5"), &lib, Box::new(ManualClock::new(5, 5))).unwrap();
        rec.step(Action::TurnLeft).unwrap();
        rec.stream_to(Box::new(buf.clone())).unwrap();
        rec.step(Action::PlaceBlock).unwrap();
        let r = rec.finish().unwrap();
        assert_eq!(String::from_utf8(buf.0.lock().unwrap().clone()).unwrap(), r.to_jsonl());
    }
}
