//! Episode state machine: the embodied builder, its 18 discrete actions,
//! ray-marched block targeting, rewards and termination.
//!
//! The agent occupies two stacked cells (feet and head). A cell `(x, y, z)`
//! spans `[x, x+1) × [y, y+1) × [z, z+1)`, so an agent standing in cell
//! `(5, 0, 5)` reports position `(5.5, 0.0, 5.5)`. Yaw 0 faces `+z`, yaw 90
//! faces `-x`; turning right adds 90°. Negative pitch looks down.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matching::{classify_reward, max_match, BlockChange, Edit, MatchError, MatchIndex, RewardEvent};
use crate::tasks::{SubgoalQueue, TaskDef, TaskError, TaskLibrary};
use crate::voxel::{BlockColor, Pos, Structure, VoxelGrid, COLOR_LIMIT, NUM_COLORS, ZONE_X, ZONE_Z};

pub const DEFAULT_MAX_STEPS: u32 = 500;
pub const SPAWN: Pos = Pos::new(5, 0, 5);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("ray parameters must be positive")]
    BadRayParams,
    #[error("episode is over")]
    EpisodeOver,
    #[error("unknown action code {0}")]
    BadAction(u8),
    #[error("chat text is empty")]
    EmptyChat,
    #[error(transparent)]
    Match(#[from] MatchError),
}

/// The discrete action set, with stable codes `0..=17`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Action {
    Noop = 0,
    StepForward = 1,
    StepBackward = 2,
    StepRight = 3,
    StepLeft = 4,
    TurnUp = 5,
    TurnDown = 6,
    TurnLeft = 7,
    TurnRight = 8,
    Jump = 9,
    Attack = 10,
    PlaceBlock = 11,
    ChooseType1 = 12,
    ChooseType2 = 13,
    ChooseType3 = 14,
    ChooseType4 = 15,
    ChooseType5 = 16,
    ChooseType6 = 17,
}

pub const ACTION_COUNT: u8 = 18;

impl Action {
    pub const ALL: [Action; ACTION_COUNT as usize] = [
        Action::Noop,
        Action::StepForward,
        Action::StepBackward,
        Action::StepRight,
        Action::StepLeft,
        Action::TurnUp,
        Action::TurnDown,
        Action::TurnLeft,
        Action::TurnRight,
        Action::Jump,
        Action::Attack,
        Action::PlaceBlock,
        Action::ChooseType1,
        Action::ChooseType2,
        Action::ChooseType3,
        Action::ChooseType4,
        Action::ChooseType5,
        Action::ChooseType6,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn choose(color: BlockColor) -> Self {
        Self::ALL[Action::ChooseType1 as usize + color.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Noop => "noop",
            Action::StepForward => "step_forward",
            Action::StepBackward => "step_backward",
            Action::StepRight => "step_right",
            Action::StepLeft => "step_left",
            Action::TurnUp => "turn_up",
            Action::TurnDown => "turn_down",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Jump => "jump",
            Action::Attack => "attack",
            Action::PlaceBlock => "place_block",
            Action::ChooseType1 => "choose_type_1",
            Action::ChooseType2 => "choose_type_2",
            Action::ChooseType3 => "choose_type_3",
            Action::ChooseType4 => "choose_type_4",
            Action::ChooseType5 => "choose_type_5",
            Action::ChooseType6 => "choose_type_6",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<u8> for Action {
    type Error = EnvError;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Action::from_code(code).ok_or(EnvError::BadAction(code))
    }
}

/// Ray-march constants for block targeting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayParams {
    pub eye_height: f64,
    pub reach: f64,
    pub step: f64,
}

impl Default for RayParams {
    fn default() -> Self {
        RayParams {
            eye_height: 1.5,
            reach: 5.0,
            step: 0.25,
        }
    }
}

fn default_max_steps() -> u32 {
    DEFAULT_MAX_STEPS
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub task_id: String,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub termination_on_exit: bool,
    #[serde(default)]
    pub ray: RayParams,
}

impl EpisodeConfig {
    pub fn new(task_id: impl Into<String>) -> Self {
        EpisodeConfig {
            task_id: task_id.into(),
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
            termination_on_exit: true,
            ray: RayParams::default(),
        }
    }

    pub fn with_max_steps(mut self, max_steps: u32) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self) -> Result<(), EnvError> {
        if self.max_steps == 0 {
            return Err(EnvError::ZeroMaxSteps);
        }
        let r = &self.ray;
        if !(r.eye_height > 0.0 && r.reach > 0.0 && r.step > 0.0) {
            return Err(EnvError::BadRayParams);
        }
        Ok(())
    }
}

/// Unit horizontal step for a yaw given in quarter turns.
fn heading(quarter_turns: u8) -> (i32, i32) {
    match quarter_turns % 4 {
        0 => (0, 1),
        1 => (-1, 0),
        2 => (0, -1),
        _ => (1, 0),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    /// Feet cell.
    pub cell: Pos,
    /// Quarter turns: 0 → 0°, 1 → 90°, 2 → 180°, 3 → 270°.
    pub yaw: u8,
    /// Notches of 45°, `-2..=2`.
    pub pitch: i8,
    pub inventory: [u8; NUM_COLORS],
    pub selected: BlockColor,
}

impl AgentState {
    pub fn spawn() -> Self {
        AgentState {
            cell: SPAWN,
            yaw: 0,
            pitch: 0,
            inventory: [COLOR_LIMIT as u8; NUM_COLORS],
            selected: BlockColor::Blue,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            x: self.cell.x as f64 + 0.5,
            y: self.cell.y as f64,
            z: self.cell.z as f64 + 0.5,
            yaw: 90.0 * self.yaw as f64,
            pitch: 45.0 * self.pitch as f64,
        }
    }

    pub fn head(&self) -> Pos {
        self.cell.offset(0, 1, 0)
    }

    fn occupies(&self, p: Pos) -> bool {
        p == self.cell || p == self.head()
    }

    fn direction(&self) -> (f64, f64, f64) {
        let (hx, hz) = heading(self.yaw);
        let (horizontal, vertical) = match self.pitch {
            0 => (1.0, 0.0),
            1 => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            -1 => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            p if p > 0 => (0.0, 1.0),
            _ => (0.0, -1.0),
        };
        (hx as f64 * horizontal, vertical, hz as f64 * horizontal)
    }
}

/// Position `(x, y, z)` in cell units plus yaw and pitch in degrees;
/// serialized as a five-element array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(5)?;
        for v in [self.x, self.y, self.z, self.yaw, self.pitch] {
            t.serialize_element(&v)?;
        }
        t.end()
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z, yaw, pitch] = <[f64; 5]>::deserialize(deserializer)?;
        Ok(Pose { x, y, z, yaw, pitch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Targeting {
    /// First solid cell along the ray.
    pub hit: Option<Pos>,
    /// Where `place_block` would put a block.
    pub place_at: Option<Pos>,
}

/// Marches a ray from the eye in fixed steps up to the reach distance.
///
/// The floor below `y = 0` stops the ray without a hit cell. Cells occupied
/// by the agent are passed through and can never receive a block. Cells
/// outside the zone are air that cannot be built in.
pub fn target_cell(state: &AgentState, grid: &VoxelGrid, ray: &RayParams) -> Targeting {
    let eye = (
        state.cell.x as f64 + 0.5,
        state.cell.y as f64 + ray.eye_height,
        state.cell.z as f64 + 0.5,
    );
    let dir = state.direction();
    let samples = (ray.reach / ray.step).round() as u32;
    let cell_at = |t: f64| {
        Pos::new(
            (eye.0 + dir.0 * t).floor() as i32,
            (eye.1 + dir.1 * t).floor() as i32,
            (eye.2 + dir.2 * t).floor() as i32,
        )
    };

    let mut last_air = None;
    let mut previous = None;
    let mut cell = cell_at(0.0);
    for k in 1..=samples {
        cell = cell_at(k as f64 * ray.step);
        if previous == Some(cell) {
            continue;
        }
        previous = Some(cell);
        if cell.y < 0 {
            return Targeting {
                hit: None,
                place_at: last_air,
            };
        }
        if state.occupies(cell) {
            continue;
        }
        if !cell.in_zone() {
            last_air = None;
            continue;
        }
        if grid.get(cell).is_some() {
            return Targeting {
                hit: Some(cell),
                place_at: last_air,
            };
        }
        last_air = Some(cell);
    }

    let supported = cell.y == 0
        || [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
            .into_iter()
            .any(|(dx, dy, dz)| grid.get(cell.offset(dx, dy, dz)).is_some());
    let place_at = (cell.in_zone() && grid.is_air(cell) && !state.occupies(cell) && supported).then_some(cell);
    Targeting { hit: None, place_at }
}

/// Exact reproduction of the target up to a transform, with no stray blocks.
pub fn is_success(built: &Structure, target: &Structure) -> bool {
    built.len() == target.len() && max_match(built, target).max_match == target.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Architect,
    Builder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

/// Everything the builder sees after a reset or step. Field order is the
/// canonical serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step_index: u32,
    pub pose: Pose,
    pub inventory: [u8; NUM_COLORS],
    pub grid: VoxelGrid,
    pub chat: Vec<Utterance>,
    pub current_instruction: Option<String>,
    pub last_reward: RewardEvent,
}

impl Observation {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("observation serialization")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Why an action had no effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blocked {
    InventoryEmpty,
    NoTarget,
    Obstructed,
    ZoneBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Success,
    Exited,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub blocked: Option<Blocked>,
    pub success: bool,
    pub exited: bool,
    pub max_match: usize,
    pub subgoals_completed: usize,
    pub end_reason: Option<EndReason>,
    /// Cells written this step, with their new state.
    pub grid_delta: Vec<CellChange>,
}

/// One cell write: position and new cell code (0 for air).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellChange {
    pub pos: Pos,
    pub code: u8,
}

impl Serialize for CellChange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.pos.x, self.pos.y, self.pos.z, self.code as i32].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CellChange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z, code] = <[i32; 4]>::deserialize(deserializer)?;
        let code = u8::try_from(code)
            .ok()
            .filter(|&c| c as usize <= NUM_COLORS)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid cell code {code}")))?;
        Ok(CellChange {
            pos: Pos::new(x, y, z),
            code,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardEvent,
    pub done: bool,
    pub info: StepInfo,
}

/// One building episode.
#[derive(Debug, Clone)]
pub struct Env {
    config: EpisodeConfig,
    task: TaskDef,
    agent: AgentState,
    grid: VoxelGrid,
    index: MatchIndex,
    queue: SubgoalQueue,
    chat: Vec<Utterance>,
    step_index: u32,
    done: bool,
    last_reward: RewardEvent,
    episode_reward: i64,
    end_reason: Option<EndReason>,
}

impl Env {
    /// Looks the task up by `config.task_id` and resets.
    pub fn new(config: EpisodeConfig, library: &TaskLibrary) -> Result<Self, EnvError> {
        let task = library.get(&config.task_id)?.clone();
        Self::with_task(config, task)
    }

    pub fn with_task(config: EpisodeConfig, task: TaskDef) -> Result<Self, EnvError> {
        config.check()?;
        if config.task_id != task.task_id {
            return Err(TaskError::UnknownTask(config.task_id).into());
        }
        let index = MatchIndex::new(&Structure::new(), &task.target)?;
        let mut env = Env {
            config,
            task,
            agent: AgentState::spawn(),
            grid: VoxelGrid::new(),
            index,
            queue: SubgoalQueue::new(),
            chat: Vec::new(),
            step_index: 0,
            done: false,
            last_reward: RewardEvent::NEUTRAL,
            episode_reward: 0,
            end_reason: None,
        };
        env.reset();
        Ok(env)
    }

    /// Restarts the episode: empty zone, agent at spawn, full inventory,
    /// sub-goal queue and chat cleared.
    pub fn reset(&mut self) -> Observation {
        self.agent = AgentState::spawn();
        self.grid = VoxelGrid::new();
        self.index = MatchIndex::new(&Structure::new(), &self.task.target).expect("empty structure indexes");
        self.queue = SubgoalQueue::new();
        self.chat.clear();
        self.step_index = 0;
        self.done = false;
        self.last_reward = RewardEvent::NEUTRAL;
        self.episode_reward = 0;
        self.end_reason = None;
        self.observation()
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn task(&self) -> &TaskDef {
        &self.task
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn built(&self) -> &Structure {
        self.index.built()
    }

    pub fn max_match(&self) -> usize {
        self.index.max_match()
    }

    pub fn queue(&self) -> &SubgoalQueue {
        &self.queue
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step_index(&self) -> u32 {
        self.step_index
    }

    pub fn episode_reward(&self) -> i64 {
        self.episode_reward
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.end_reason
    }

    pub fn is_success(&self) -> bool {
        let n = self.task.target.len();
        self.index.max_match() == n && self.index.built().len() == n
    }

    /// Built cells that count toward the match under the first witness
    /// transform; empty when nothing matches.
    pub fn matched_cells(&self) -> Vec<Pos> {
        if self.index.max_match() == 0 {
            return Vec::new();
        }
        let w = self.index.result().witnesses[0];
        let built = self.index.built();
        self.task
            .target
            .iter()
            .map(|(p, c)| (w.apply(p), c))
            .filter(|&(q, c)| built.contains(q, c))
            .map(|(q, _)| q)
            .collect()
    }

    pub fn targeting(&self) -> Targeting {
        target_cell(&self.agent, &self.grid, &self.config.ray)
    }

    pub fn observation(&self) -> Observation {
        Observation {
            step_index: self.step_index,
            pose: self.agent.pose(),
            inventory: self.agent.inventory,
            grid: self.grid.clone(),
            chat: self.chat.clone(),
            current_instruction: self.queue.current(&self.task).map(|sg| sg.instruction.clone()),
            last_reward: self.last_reward,
        }
    }

    /// Appends an utterance to the episode chat.
    pub fn chat(&mut self, speaker: Speaker, text: &str) -> Result<(), EnvError> {
        if text.trim().is_empty() {
            return Err(EnvError::EmptyChat);
        }
        self.chat.push(Utterance {
            speaker,
            text: text.to_string(),
        });
        Ok(())
    }

    pub fn step_code(&mut self, code: u8) -> Result<StepOutcome, EnvError> {
        self.step(Action::try_from(code)?)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        self.step_index += 1;
        let mut info = StepInfo::default();
        let mut edit = None;

        match action {
            Action::Noop => {}
            Action::StepForward | Action::StepRight | Action::StepBackward | Action::StepLeft | Action::Jump => {
                self.apply_movement(action, &mut info)
            }
            Action::TurnUp => self.agent.pitch = (self.agent.pitch + 1).min(2),
            Action::TurnDown => self.agent.pitch = (self.agent.pitch - 1).max(-2),
            Action::TurnLeft => self.agent.yaw = (self.agent.yaw + 3) % 4,
            Action::TurnRight => self.agent.yaw = (self.agent.yaw + 1) % 4,
            Action::Attack => match self.targeting().hit {
                Some(pos) => {
                    let color = self
                        .grid
                        .set(pos, None)
                        .expect("hit cell is in zone")
                        .expect("hit cell is solid");
                    let slot = &mut self.agent.inventory[color.index()];
                    *slot = (*slot + 1).min(COLOR_LIMIT as u8);
                    edit = Some(Edit::Remove { pos, color });
                }
                None => info.blocked = Some(Blocked::NoTarget),
            },
            Action::PlaceBlock => {
                let color = self.agent.selected;
                if self.agent.inventory[color.index()] == 0 {
                    info.blocked = Some(Blocked::InventoryEmpty);
                } else if let Some(pos) = self.targeting().place_at {
                    self.grid
                        .set(pos, Some(color))
                        .expect("inventory bounds the color count");
                    self.agent.inventory[color.index()] -= 1;
                    edit = Some(Edit::Place { pos, color });
                } else {
                    info.blocked = Some(Blocked::NoTarget);
                }
            }
            choose => {
                let i = choose.code() - Action::ChooseType1.code();
                self.agent.selected = BlockColor::ALL[i as usize];
            }
        }
        if !info.exited {
            self.settle();
        }

        let prev_match = self.index.max_match();
        let reward = match edit {
            Some(e) => {
                let new_match = self.index.apply(e)?;
                let (pos, change) = match e {
                    Edit::Place { pos, .. } => (pos, BlockChange::Placed),
                    Edit::Remove { pos, .. } => (pos, BlockChange::Removed),
                };
                info.grid_delta.push(CellChange {
                    pos,
                    code: self.grid.get(pos).map_or(0, BlockColor::code),
                });
                self.queue.advance(&self.task, self.index.built());
                classify_reward(Some(change), prev_match, new_match)
            }
            None => RewardEvent::NEUTRAL,
        };
        self.last_reward = reward;
        self.episode_reward += reward.value as i64;

        info.success = self.is_success();
        info.max_match = self.index.max_match();
        info.subgoals_completed = self.queue.completed_count();
        self.end_reason = if info.success {
            Some(EndReason::Success)
        } else if info.exited {
            Some(EndReason::Exited)
        } else if self.step_index >= self.config.max_steps {
            Some(EndReason::MaxSteps)
        } else {
            None
        };
        self.done = self.end_reason.is_some();
        info.end_reason = self.end_reason;

        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.done,
            info,
        })
    }

    fn apply_movement(&mut self, action: Action, info: &mut StepInfo) {
        match movement(&self.grid, self.agent.cell, self.agent.yaw, action) {
            Movement::To(cell) => self.agent.cell = cell,
            Movement::Obstructed => info.blocked = Some(Blocked::Obstructed),
            Movement::Exit(to) => {
                if self.config.termination_on_exit {
                    self.agent.cell = to;
                    info.exited = true;
                } else {
                    info.blocked = Some(Blocked::ZoneBoundary);
                }
            }
        }
    }

    fn settle(&mut self) {
        self.agent.cell = settle(&self.grid, self.agent.cell);
    }
}

/// Result of a movement action from a standing cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Movement {
    /// New feet cell, after falling onto the highest support below.
    To(Pos),
    Obstructed,
    /// The move would leave the zone horizontally; carries the outside cell.
    Exit(Pos),
}

/// Drops a feet cell onto the floor or the first block below it.
pub fn settle(grid: &VoxelGrid, mut cell: Pos) -> Pos {
    while cell.y > 0 && grid.is_air(cell.offset(0, -1, 0)) {
        cell.y -= 1;
    }
    cell
}

/// Where a step or jump action takes an agent standing at `cell` facing `yaw`.
///
/// Steps move one cell relative to facing and need free feet and head cells.
/// A jump hops one cell forward, or climbs onto a single block in front when
/// the two cells above it and the cell above the agent's head are free.
/// Other actions leave the agent where it is.
pub fn movement(grid: &VoxelGrid, cell: Pos, yaw: u8, action: Action) -> Movement {
    let turn = match action {
        Action::StepForward | Action::Jump => 0,
        Action::StepRight => 1,
        Action::StepBackward => 2,
        Action::StepLeft => 3,
        _ => return Movement::To(cell),
    };
    let (dx, dz) = heading(yaw + turn);
    let to = cell.offset(dx, 0, dz);
    let free = |p: Pos| grid.is_air(p);
    if !horizontal_in_zone(to) {
        Movement::Exit(to)
    } else if free(to) && free(to.offset(0, 1, 0)) {
        Movement::To(settle(grid, to))
    } else if action == Action::Jump
        && !free(to)
        && to.y + 1 < crate::voxel::ZONE_Y
        && free(to.offset(0, 1, 0))
        && free(to.offset(0, 2, 0))
        && free(cell.offset(0, 2, 0))
    {
        Movement::To(to.offset(0, 1, 0))
    } else {
        Movement::Obstructed
    }
}

fn horizontal_in_zone(p: Pos) -> bool {
    (0..ZONE_X).contains(&p.x) && (0..ZONE_Z).contains(&p.z)
}
