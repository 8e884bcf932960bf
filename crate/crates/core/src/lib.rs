//! Deterministic voxel blocks-world environment for collaborative building
//! tasks: an 11×11×9 build zone, an 18-action embodied builder, a reward
//! driven by the best rotation/translation-invariant match between the built
//! and target structures, evaluation metrics, and replayable episode logs.

pub mod agents;
pub mod env;
pub mod matching;
pub mod metrics;
pub mod replay;
pub mod tasks;
pub mod voxel;

pub use env::{Action, Env, EpisodeConfig, Observation};
pub use matching::{max_match, MatchIndex, MatchResult, RewardCause, RewardEvent};
pub use tasks::{TaskDef, TaskLibrary};
pub use voxel::{BlockColor, Pos, Structure, Transform, VoxelGrid};
