//! Browser bindings: drive an episode by action code, explore the best
//! match between two block lists, and score an instruction against a
//! reference. Every call returns a JSON string.
//!
//! The `try_*` methods are the same operations with plain `String` errors so
//! they can be exercised off the browser.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use iglu_core::env::{Action, Pose, StepInfo};
use iglu_core::metrics::{bleu, keyword_pr, KeywordLexicon, KeywordRow};
use iglu_core::voxel::apply_transform;
use iglu_core::{max_match, Env, EpisodeConfig, Pos, RewardEvent, Structure, TaskLibrary};

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Ids of the bundled tasks.
#[wasm_bindgen]
pub fn task_ids() -> String {
    let lib = TaskLibrary::bundled();
    serde_json::to_string(&lib.ids().collect::<Vec<_>>()).unwrap()
}

/// `[code, name]` for every action.
#[wasm_bindgen]
pub fn action_names() -> String {
    let all: Vec<_> = Action::ALL.iter().map(|a| (a.code(), a.name())).collect();
    serde_json::to_string(&all).unwrap()
}

#[derive(Serialize)]
struct PlaygroundState<'a> {
    task_id: &'a str,
    step_index: u32,
    pose: Pose,
    inventory: [u8; 6],
    /// Nine `/`-separated layers of digit rows, y ascending.
    layers: Vec<String>,
    target: &'a Structure,
    matched: Vec<Pos>,
    hit: Option<Pos>,
    place_at: Option<Pos>,
    max_match: usize,
    target_blocks: usize,
    instruction: Option<String>,
    episode_reward: i64,
    done: bool,
}

#[derive(Serialize)]
struct StepView {
    action: &'static str,
    reward: RewardEvent,
    info: StepInfo,
}

#[wasm_bindgen]
pub struct Playground {
    env: Env,
}

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new(task_id: &str, seed: u32) -> Result<Playground, JsError> {
        Self::try_new(task_id, seed).map_err(js)
    }

    /// Applies one action code and returns the step result.
    pub fn step(&mut self, code: u8) -> Result<String, JsError> {
        self.try_step(code).map_err(js)
    }

    /// Current world, target and agent as JSON.
    pub fn state(&self) -> String {
        let obs = self.env.observation();
        let aim = self.env.targeting();
        let task = self.env.task();
        serde_json::to_string(&PlaygroundState {
            task_id: &task.task_id,
            step_index: obs.step_index,
            pose: obs.pose,
            inventory: obs.inventory,
            layers: obs.grid.layers(),
            target: &task.target,
            matched: self.env.matched_cells(),
            hit: aim.hit,
            place_at: aim.place_at,
            max_match: self.env.max_match(),
            target_blocks: task.target.len(),
            instruction: obs.current_instruction,
            episode_reward: self.env.episode_reward(),
            done: self.env.is_done(),
        })
        .unwrap()
    }
}

impl Playground {
    pub fn try_new(task_id: &str, seed: u32) -> Result<Playground, String> {
        let config = EpisodeConfig::new(task_id).with_seed(seed as u64);
        let mut env = Env::new(config, &TaskLibrary::bundled()).map_err(|e| e.to_string())?;
        env.reset();
        Ok(Playground { env })
    }

    pub fn try_step(&mut self, code: u8) -> Result<String, String> {
        let action = Action::from_code(code).ok_or_else(|| format!("no action with code {code}"))?;
        let out = self.env.step(action).map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&StepView {
            action: action.name(),
            reward: out.reward,
            info: out.info,
        })
        .unwrap())
    }
}

/// Best overlap of two block lists, each `[[x, y, z, "color"], ...]`.
#[wasm_bindgen]
pub fn explore_match(built: &str, target: &str) -> Result<String, JsError> {
    try_explore_match(built, target).map_err(js)
}

pub fn try_explore_match(built: &str, target: &str) -> Result<String, String> {
    let parse = |what: &str, text: &str| serde_json::from_str::<Structure>(text).map_err(|e| format!("{what}: {e}"));
    let built = parse("built", built)?;
    let target = parse("target", target)?;
    let result = max_match(&built, &target);
    let first = result.witnesses[0];
    let placed = apply_transform(&target, &first);
    let matched: Vec<Pos> = placed
        .iter()
        .filter(|&(p, c)| built.contains(p, c))
        .map(|(p, _)| p)
        .collect();
    Ok(json!({
        "max_match": result.max_match,
        "witness_count": result.witnesses.len(),
        "witness": first,
        "placed_target": placed,
        "matched": if result.max_match > 0 { matched } else { Vec::new() },
    })
    .to_string())
}

/// BLEU-1..4 of one candidate against one reference, and keyword
/// precision/recall with the default lexicon.
#[wasm_bindgen]
pub fn score_text(candidate: &str, reference: &str) -> Result<String, JsError> {
    try_score_text(candidate, reference).map_err(js)
}

pub fn try_score_text(candidate: &str, reference: &str) -> Result<String, String> {
    let scores = (1..=4)
        .map(|n| bleu(candidate, &[reference], n))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    let kw = KeywordRow::from(&keyword_pr(candidate, reference, &KeywordLexicon::default()));
    Ok(json!({ "bleu": scores, "keywords": kw }).to_string())
}
