//! Task definitions, the task file format, validation, difficulty
//! classification and the sub-goal queue that plays the Architect's role.
//!
//! Task files are TOML:
//!
//! ```toml
//! format_version = 1
//!
//! [[task]]
//! task_id = "L5"
//! difficulty = "easy"          # optional, computed when absent
//! provenance = "hand-authored"
//! target = [[3, 0, 3, "red"], [4, 0, 3, "red"]]
//!
//! [[task.subgoal]]
//! instruction = "put two red blocks side by side"
//! blocks = [[3, 0, 3, "red"], [4, 0, 3, "red"]]
//! ```
//!
//! Sub-goal block lists are cumulative: each one holds everything built so far.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::max_match;
use crate::voxel::{apply_transform, Pos, Structure, Transform, COLOR_LIMIT};

pub const TASK_FORMAT_VERSION: u32 = 1;

const BUNDLED_TASKS: &str = include_str!("../tasks/bundled.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Normal,
    Hard,
}

impl Difficulty {
    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Normal => "normal",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Score is `block_count + color_weight · distinct_colors`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyThresholds {
    pub color_weight: usize,
    pub easy_max: usize,
    pub normal_max: usize,
}

impl Default for DifficultyThresholds {
    fn default() -> Self {
        DifficultyThresholds {
            color_weight: 3,
            easy_max: 12,
            normal_max: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoal {
    pub instruction: String,
    /// Everything that should stand once this step is done.
    #[serde(rename = "blocks")]
    pub cumulative_target: Structure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDef {
    pub task_id: String,
    pub target: Structure,
    pub difficulty: Difficulty,
    pub subgoals: Vec<SubGoal>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported task format version {found} (expected {TASK_FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("task `{task_id}` is invalid: {}", join_violations(.violations))]
    Validation {
        task_id: String,
        violations: Vec<Violation>,
    },
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("cannot classify an empty structure")]
    EmptyStructure,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Where in a task a rule was broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Target,
    /// One-based sub-goal number.
    Subgoal(usize),
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Part::Target => f.write_str("target"),
            Part::Subgoal(i) => write!(f, "subgoal {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("EmptyTarget: target has no blocks")]
    EmptyTarget,
    #[error("OutOfZone: {part} block at {pos}")]
    OutOfZone { part: Part, pos: Pos },
    #[error("InventoryExceeded: {part} uses {count} {color} blocks (limit {COLOR_LIMIT})")]
    InventoryExceeded {
        part: Part,
        color: crate::voxel::BlockColor,
        count: usize,
    },
    #[error("EmptyInstruction: subgoal {0} has no instruction text")]
    EmptyInstruction(usize),
    #[error("NestingViolation: subgoal {subgoal} drops block {pos} present in the previous subgoal")]
    NestingViolation { subgoal: usize, pos: Pos },
    #[error("SubgoalOutsideTarget: subgoal {subgoal} block {pos} is not part of the target")]
    SubgoalOutsideTarget { subgoal: usize, pos: Pos },
    #[error("IncompleteDecomposition: final subgoal does not equal the target")]
    IncompleteDecomposition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// Block with no chain of face-adjacent target blocks down to the floor.
    Floating(Pos),
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Floating(p) => write!(f, "Floating: block at {p} has no support path to the floor"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_structure(part: Part, s: &Structure, out: &mut Vec<Violation>) {
    for (pos, _) in s.iter().filter(|(p, _)| !p.in_zone()) {
        out.push(Violation::OutOfZone { part, pos });
    }
    for color in crate::voxel::BlockColor::ALL {
        let count = s.color_counts()[color.index()];
        if count > COLOR_LIMIT {
            out.push(Violation::InventoryExceeded { part, color, count });
        }
    }
}

fn floating_blocks(s: &Structure) -> Vec<Pos> {
    let mut supported: BTreeSet<Pos> = BTreeSet::new();
    let mut queue: VecDeque<Pos> = s.iter().map(|(p, _)| p).filter(|p| p.y == 0).collect();
    supported.extend(queue.iter().copied());
    while let Some(p) = queue.pop_front() {
        for (dx, dy, dz) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            let q = p.offset(dx, dy, dz);
            if s.get(q).is_some() && supported.insert(q) {
                queue.push_back(q);
            }
        }
    }
    s.iter().map(|(p, _)| p).filter(|p| !supported.contains(p)).collect()
}

/// Checks every task rule. Never fails; problems come back as violations.
pub fn validate_task(t: &TaskDef) -> ValidationReport {
    let mut violations = Vec::new();
    if t.target.is_empty() {
        violations.push(Violation::EmptyTarget);
    }
    check_structure(Part::Target, &t.target, &mut violations);

    let mut previous: Option<&Structure> = None;
    for (i, sg) in t.subgoals.iter().enumerate() {
        let n = i + 1;
        if sg.instruction.trim().is_empty() {
            violations.push(Violation::EmptyInstruction(n));
        }
        check_structure(Part::Subgoal(n), &sg.cumulative_target, &mut violations);
        for (pos, _) in sg.cumulative_target.iter().filter(|&(p, c)| !t.target.contains(p, c)) {
            violations.push(Violation::SubgoalOutsideTarget { subgoal: n, pos });
        }
        if let Some(prev) = previous {
            for (pos, _) in prev.iter().filter(|&(p, c)| !sg.cumulative_target.contains(p, c)) {
                violations.push(Violation::NestingViolation { subgoal: n, pos });
            }
        }
        previous = Some(&sg.cumulative_target);
    }
    if t.subgoals.last().map(|sg| &sg.cumulative_target) != Some(&t.target) {
        violations.push(Violation::IncompleteDecomposition);
    }

    let warnings = floating_blocks(&t.target).into_iter().map(Warning::Floating).collect();
    ValidationReport { violations, warnings }
}

pub fn classify_difficulty(target: &Structure, thresholds: &DifficultyThresholds) -> Result<Difficulty, TaskError> {
    if target.is_empty() {
        return Err(TaskError::EmptyStructure);
    }
    let score = target.len() + thresholds.color_weight * target.distinct_colors();
    Ok(if score <= thresholds.easy_max {
        Difficulty::Easy
    } else if score <= thresholds.normal_max {
        Difficulty::Normal
    } else {
        Difficulty::Hard
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    format_version: u32,
    #[serde(default)]
    task: Vec<RawTask>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    task_id: String,
    difficulty: Option<Difficulty>,
    #[serde(default)]
    provenance: String,
    target: Structure,
    #[serde(default)]
    subgoal: Vec<SubGoal>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a task file; tasks come back sorted by id.
pub fn load_tasks(text: &str) -> Result<Vec<TaskDef>, TaskError> {
    load_tasks_with(text, &DifficultyThresholds::default())
}

pub fn load_tasks_with(text: &str, thresholds: &DifficultyThresholds) -> Result<Vec<TaskDef>, TaskError> {
    let mut tasks = parse_tasks_with(text, thresholds)?;
    for task in &mut tasks {
        let report = validate_task(task);
        if !report.is_ok() {
            return Err(TaskError::Validation {
                task_id: std::mem::take(&mut task.task_id),
                violations: report.violations,
            });
        }
    }
    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    if let Some(w) = tasks.windows(2).find(|w| w[0].task_id == w[1].task_id) {
        return Err(TaskError::DuplicateId(w[0].task_id.clone()));
    }
    Ok(tasks)
}

/// Parses a task file without validating the tasks; file order is kept.
pub fn parse_tasks_with(text: &str, thresholds: &DifficultyThresholds) -> Result<Vec<TaskDef>, TaskError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        TaskError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    if raw.format_version != TASK_FORMAT_VERSION {
        return Err(TaskError::Version {
            found: raw.format_version,
        });
    }
    Ok(raw
        .task
        .into_iter()
        .map(|rt| TaskDef {
            difficulty: match rt.difficulty {
                Some(d) => d,
                None => classify_difficulty(&rt.target, thresholds).unwrap_or(Difficulty::Easy),
            },
            task_id: rt.task_id,
            target: rt.target,
            subgoals: rt.subgoal,
            provenance: rt.provenance,
        })
        .collect())
}

fn write_blocks(out: &mut String, key: &str, s: &Structure) {
    out.push_str(key);
    out.push_str(" = [");
    for (i, (p, c)) in s.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("[{}, {}, {}, \"{}\"]", p.x, p.y, p.z, c));
    }
    out.push_str("]\n");
}

fn quote(s: &str) -> String {
    // serde_json string escaping is a subset of TOML basic-string escaping
    serde_json::to_string(s).expect("string serialization")
}

/// Canonical task file text: tasks in id order, fixed key order, blocks sorted.
pub fn write_tasks(tasks: &[TaskDef]) -> String {
    let mut sorted: Vec<&TaskDef> = tasks.iter().collect();
    sorted.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let mut out = format!("format_version = {TASK_FORMAT_VERSION}\n");
    for t in sorted {
        out.push_str("\n[[task]]\n");
        out.push_str(&format!("task_id = {}\n", quote(&t.task_id)));
        out.push_str(&format!("difficulty = \"{}\"\n", t.difficulty));
        out.push_str(&format!("provenance = {}\n", quote(&t.provenance)));
        write_blocks(&mut out, "target", &t.target);
        for sg in &t.subgoals {
            out.push_str("\n[[task.subgoal]]\n");
            out.push_str(&format!("instruction = {}\n", quote(&sg.instruction)));
            write_blocks(&mut out, "blocks", &sg.cumulative_target);
        }
    }
    out
}

/// Immutable, id-sorted set of tasks.
#[derive(Debug, Clone, Default)]
pub struct TaskLibrary {
    tasks: Vec<TaskDef>,
}

impl TaskLibrary {
    pub fn new(mut tasks: Vec<TaskDef>) -> Result<Self, TaskError> {
        tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        if let Some(w) = tasks.windows(2).find(|w| w[0].task_id == w[1].task_id) {
            return Err(TaskError::DuplicateId(w[0].task_id.clone()));
        }
        Ok(TaskLibrary { tasks })
    }

    pub fn bundled() -> Self {
        let tasks = load_tasks(BUNDLED_TASKS).expect("bundled tasks are valid");
        TaskLibrary { tasks }
    }

    pub fn from_text(text: &str) -> Result<Self, TaskError> {
        Self::new(load_tasks(text)?)
    }

    pub fn get(&self, task_id: &str) -> Result<&TaskDef, TaskError> {
        self.tasks
            .binary_search_by(|t| t.task_id.as_str().cmp(task_id))
            .map(|i| &self.tasks[i])
            .map_err(|_| TaskError::UnknownTask(task_id.to_string()))
    }

    pub fn tasks(&self) -> &[TaskDef] {
        &self.tasks
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.iter().map(|t| t.task_id.as_str())
    }

    /// Adds tasks from another library; ids must not collide.
    pub fn extend(&mut self, other: TaskLibrary) -> Result<(), TaskError> {
        let mut all = std::mem::take(&mut self.tasks);
        all.extend(other.tasks);
        *self = TaskLibrary::new(all)?;
        Ok(())
    }
}

/// Progress through a task's sub-goals.
///
/// The first completed sub-goal pins the frame (the witness transform) in
/// which every later sub-goal is judged. A sub-goal is complete when its
/// cumulative blocks all stand in that frame and nothing has been built
/// outside the full target's image in that frame.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalQueue {
    completed: usize,
    witness: Option<Transform>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Advance {
    /// True if at least one sub-goal was completed by this check.
    pub completed: bool,
    /// Index of the active sub-goal, `None` once the queue is drained.
    pub current: Option<usize>,
}

impl SubgoalQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn completed_count(&self) -> usize {
        self.completed
    }

    pub fn witness(&self) -> Option<Transform> {
        self.witness
    }

    pub fn current<'t>(&self, task: &'t TaskDef) -> Option<&'t SubGoal> {
        task.subgoals.get(self.completed)
    }

    pub fn is_drained(&self, task: &TaskDef) -> bool {
        self.completed >= task.subgoals.len()
    }

    /// Pops every sub-goal that `built` satisfies, in order, until one is not.
    pub fn advance(&mut self, task: &TaskDef, built: &Structure) -> Advance {
        let before = self.completed;
        while let Some(sg) = task.subgoals.get(self.completed) {
            let frame = match self.witness {
                Some(w) => satisfies(built, &sg.cumulative_target, &task.target, &w).then_some(w),
                None => find_frame(built, &sg.cumulative_target, &task.target),
            };
            match frame {
                Some(w) => {
                    self.witness = Some(w);
                    self.completed += 1;
                }
                None => break,
            }
        }
        Advance {
            completed: self.completed > before,
            current: (self.completed < task.subgoals.len()).then_some(self.completed),
        }
    }
}

fn satisfies(built: &Structure, cumulative: &Structure, target: &Structure, w: &Transform) -> bool {
    apply_transform(cumulative, w).is_subset_of(built) && built.is_subset_of(&apply_transform(target, w))
}

fn find_frame(built: &Structure, cumulative: &Structure, target: &Structure) -> Option<Transform> {
    if built.is_empty() || built.len() > target.len() {
        return None;
    }
    let m = max_match(built, cumulative);
    if m.max_match != cumulative.len() {
        return None;
    }
    m.witnesses
        .into_iter()
        .find(|w| satisfies(built, cumulative, target, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::BlockColor;

    fn blocks(list: &[(i32, i32, i32, BlockColor)]) -> Structure {
        Structure::from_blocks(list.iter().map(|&(x, y, z, c)| (Pos::new(x, y, z), c))).unwrap()
    }

    fn two_step_task() -> TaskDef {
        let r = BlockColor::Red;
        let first = blocks(&[(3, 0, 3, r), (4, 0, 3, r)]);
        let full = blocks(&[(3, 0, 3, r), (4, 0, 3, r), (3, 0, 4, r)]);
        TaskDef {
            task_id: "t".into(),
            target: full.clone(),
            difficulty: Difficulty::Easy,
            subgoals: vec![
                SubGoal {
                    instruction: "two".into(),
                    cumulative_target: first,
                },
                SubGoal {
                    instruction: "three".into(),
                    cumulative_target: full,
                },
            ],
            provenance: String::new(),
        }
    }

    #[test]
    fn bundled_l5_loads() {
        let lib = TaskLibrary::bundled();
        assert!(lib.tasks().len() >= 8);
        let l5 = lib.get("L5").unwrap();
        assert_eq!(l5.target.len(), 5);
        assert_eq!(l5.difficulty, Difficulty::Easy);
        for t in lib.tasks() {
            assert!(validate_task(t).is_ok(), "{}", t.task_id);
        }
    }

    #[test]
    fn block_above_zone_is_rejected() {
        let text = r#"
format_version = 1
[[task]]
task_id = "tall"
target = [[0, 9, 0, "red"]]
[[task.subgoal]]
instruction = "x"
blocks = [[0, 9, 0, "red"]]
"#;
        match load_tasks(text) {
            Err(TaskError::Validation { task_id, violations }) => {
                assert_eq!(task_id, "tall");
                assert!(violations.contains(&Violation::OutOfZone {
                    part: Part::Target,
                    pos: Pos::new(0, 9, 0)
                }));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn too_many_red_blocks_is_rejected() {
        let target: Vec<String> = (0..21)
            .map(|i| format!("[{}, 0, {}, \"red\"]", i % 11, i / 11))
            .collect();
        let list = target.join(", ");
        let text = format!(
            "format_version = 1\n[[task]]\ntask_id = \"many\"\ntarget = [{list}]\n[[task.subgoal]]\ninstruction = \"x\"\nblocks = [{list}]\n"
        );
        match load_tasks(&text) {
            Err(TaskError::Validation { violations, .. }) => assert!(violations.iter().any(|v| matches!(
                v,
                Violation::InventoryExceeded {
                    part: Part::Target,
                    color: BlockColor::Red,
                    count: 21
                }
            ))),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = load_tasks("format_version = 1\n[[task]]\ntask_id = 7\n").unwrap_err();
        match err {
            TaskError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_tasks("format_version = 2\n"),
            Err(TaskError::Version { found: 2 })
        ));
    }

    #[test]
    fn validation_rules() {
        let t = two_step_task();
        assert!(validate_task(&t).is_ok());

        let mut broken = t.clone();
        broken.subgoals[1].cumulative_target.remove(Pos::new(4, 0, 3));
        let report = validate_task(&broken);
        assert!(report.violations.contains(&Violation::NestingViolation {
            subgoal: 2,
            pos: Pos::new(4, 0, 3)
        }));
        assert!(report.violations.contains(&Violation::IncompleteDecomposition));

        let mut short = t.clone();
        short.subgoals.pop();
        assert_eq!(
            validate_task(&short).violations,
            vec![Violation::IncompleteDecomposition]
        );
    }

    #[test]
    fn floating_blocks_warn_only() {
        let mut t = two_step_task();
        t.target.insert(Pos::new(8, 3, 8), BlockColor::Red);
        t.subgoals[1].cumulative_target = t.target.clone();
        let report = validate_task(&t);
        assert!(report.is_ok());
        assert_eq!(report.warnings, vec![Warning::Floating(Pos::new(8, 3, 8))]);
    }

    #[test]
    fn difficulty_formula() {
        let th = DifficultyThresholds::default();
        let l5 = TaskLibrary::bundled().get("L5").unwrap().target.clone();
        // 5 blocks + 3 * 1 color = 8
        assert_eq!(classify_difficulty(&l5, &th), Ok(Difficulty::Easy));

        let colors = [BlockColor::Red, BlockColor::Blue, BlockColor::Green, BlockColor::Yellow];
        let twenty: Structure = (0..20)
            .map(|i| (Pos::new(i % 10, 0, i / 10), colors[(i % 4) as usize]))
            .collect();
        // 20 + 3 * 4 = 32
        assert_eq!(classify_difficulty(&twenty, &th), Ok(Difficulty::Hard));

        let one = blocks(&[(0, 0, 0, BlockColor::Blue)]);
        assert_eq!(classify_difficulty(&one, &th), Ok(Difficulty::Easy));
        assert_eq!(
            classify_difficulty(&Structure::new(), &th),
            Err(TaskError::EmptyStructure)
        );
    }

    #[test]
    fn queue_advances_on_first_subgoal() {
        let t = two_step_task();
        let mut q = SubgoalQueue::new();
        assert_eq!(
            q.advance(&t, &Structure::new()),
            Advance {
                completed: false,
                current: Some(0)
            }
        );

        // built shifted by (+2, 0, +1): judged in that frame from now on
        let shifted = blocks(&[(5, 0, 4, BlockColor::Red), (6, 0, 4, BlockColor::Red)]);
        assert_eq!(
            q.advance(&t, &shifted),
            Advance {
                completed: true,
                current: Some(1)
            }
        );
        assert_eq!(q.witness(), Some(Transform::translation(2, 0, 1)));
    }

    #[test]
    fn queue_drains_in_one_burst() {
        let lib = TaskLibrary::bundled();
        let l5 = lib.get("L5").unwrap();
        let mut q = SubgoalQueue::new();
        let a = q.advance(l5, &l5.target);
        assert!(a.completed);
        assert_eq!(a.current, None);
        assert_eq!(q.completed_count(), l5.subgoals.len());
        assert!(q.is_drained(l5));
    }

    #[test]
    fn stray_block_blocks_subgoal() {
        let t = two_step_task();
        let mut q = SubgoalQueue::new();
        let built = blocks(&[
            (3, 0, 3, BlockColor::Red),
            (4, 0, 3, BlockColor::Red),
            (9, 0, 9, BlockColor::Red),
        ]);
        assert!(!q.advance(&t, &built).completed);
    }

    #[test]
    fn canonical_writer_round_trips() {
        let lib = TaskLibrary::bundled();
        let text = write_tasks(lib.tasks());
        let reloaded = load_tasks(&text).unwrap();
        assert_eq!(reloaded, lib.tasks());
        assert_eq!(write_tasks(&reloaded), text);
    }
}
