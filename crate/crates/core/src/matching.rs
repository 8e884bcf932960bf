//! Maximal structure match over vertical rotations and integer translations,
//! the incremental index that keeps it current under single-block edits, and
//! the per-step reward rule built on top of it.
//!
//! Both the full computation and the index count, for every transform `t`,
//! how many built blocks coincide (same cell, same color) with `t(target)`.
//! A pair `(target block, built block)` of equal color votes for exactly one
//! translation per rotation, so the counts are accumulated by voting rather
//! than by scanning every transform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::voxel::{BlockColor, Pos, Structure, Transform, NUM_COLORS, ZONE_X, ZONE_Y, ZONE_Z};

pub const MAX_DX: i32 = ZONE_X - 1;
pub const MAX_DY: i32 = ZONE_Y - 1;
pub const MAX_DZ: i32 = ZONE_Z - 1;

const SPAN_X: usize = (2 * MAX_DX + 1) as usize;
const SPAN_Y: usize = (2 * MAX_DY + 1) as usize;
const SPAN_Z: usize = (2 * MAX_DZ + 1) as usize;
/// Size of the searched transform space: 4 rotations × 17 × 21 × 21 translations.
pub const TRANSFORM_COUNT: usize = 4 * SPAN_Y * SPAN_X * SPAN_Z;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("structures differ by {0} blocks; a step may change at most one")]
    MultiBlockEdit(usize),
    #[error("edit inconsistent with indexed structure: {0}")]
    InconsistentEdit(String),
}

/// Slot of a transform in the dense counter table; ordered by rotation, then
/// dy, dx, dz ascending.
fn slot(rotation: u8, dx: i32, dy: i32, dz: i32) -> Option<usize> {
    if dx.abs() > MAX_DX || dy.abs() > MAX_DY || dz.abs() > MAX_DZ {
        return None;
    }
    let k = rotation as usize;
    let y = (dy + MAX_DY) as usize;
    let x = (dx + MAX_DX) as usize;
    let z = (dz + MAX_DZ) as usize;
    Some(((k * SPAN_Y + y) * SPAN_X + x) * SPAN_Z + z)
}

fn transform_at(slot: usize) -> Transform {
    let z = slot % SPAN_Z;
    let x = (slot / SPAN_Z) % SPAN_X;
    let y = (slot / (SPAN_Z * SPAN_X)) % SPAN_Y;
    let k = slot / (SPAN_Z * SPAN_X * SPAN_Y);
    Transform::new(k as u8, x as i32 - MAX_DX, y as i32 - MAX_DY, z as i32 - MAX_DZ)
}

/// Target blocks pre-rotated for each quarter turn, bucketed by color.
#[derive(Debug, Clone)]
struct RotatedTarget {
    by_color: [[Vec<Pos>; NUM_COLORS]; 4],
    len: usize,
}

impl RotatedTarget {
    fn new(target: &Structure) -> Self {
        let mut by_color: [[Vec<Pos>; NUM_COLORS]; 4] = Default::default();
        for (k, buckets) in by_color.iter_mut().enumerate() {
            for (p, c) in target.iter() {
                buckets[c.index()].push(Transform::rotate(p, k as u8));
            }
        }
        RotatedTarget {
            by_color,
            len: target.len(),
        }
    }

    /// Slots of every transform that maps some target block of color `c` onto `p`.
    fn votes(&self, p: Pos, c: BlockColor) -> impl Iterator<Item = usize> + '_ {
        (0..4u8).flat_map(move |k| {
            self.by_color[k as usize][c.index()]
                .iter()
                .filter_map(move |r| slot(k, p.x - r.x, p.y - r.y, p.z - r.z))
        })
    }

    /// Whether the transform keeps at least one target block inside the zone.
    fn keeps_block_in_zone(&self, t: &Transform) -> bool {
        self.by_color[t.rotation as usize]
            .iter()
            .flatten()
            .any(|r| r.offset(t.dx, t.dy, t.dz).in_zone())
    }

    fn valid_transforms(&self) -> impl Iterator<Item = Transform> + '_ {
        (0..TRANSFORM_COUNT)
            .map(transform_at)
            .filter(|t| self.keeps_block_in_zone(t))
    }
}

/// Best overlap between a built structure and a target, with every transform
/// of the target that achieves it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub max_match: usize,
    pub witnesses: Vec<Transform>,
}

impl MatchResult {
    fn empty_target() -> Self {
        MatchResult {
            max_match: 0,
            witnesses: vec![Transform::IDENTITY],
        }
    }
}

fn collect_result(rotated: &RotatedTarget, counters: &[u16], max_match: usize) -> MatchResult {
    if rotated.len == 0 {
        return MatchResult::empty_target();
    }
    let witnesses = if max_match > 0 {
        counters
            .iter()
            .enumerate()
            .filter(|&(_, &n)| n as usize == max_match)
            .map(|(i, _)| transform_at(i))
            .collect()
    } else {
        rotated.valid_transforms().collect()
    };
    MatchResult { max_match, witnesses }
}

/// Largest color-exact overlap of `built` with any rotated and translated copy
/// of `target`. Target blocks moved outside the zone are ignored.
pub fn max_match(built: &Structure, target: &Structure) -> MatchResult {
    let rotated = RotatedTarget::new(target);
    let mut counters = vec![0u16; TRANSFORM_COUNT];
    for (p, c) in built.iter() {
        for s in rotated.votes(p, c) {
            counters[s] += 1;
        }
    }
    let best = counters.iter().copied().max().unwrap_or(0) as usize;
    collect_result(&rotated, &counters, best)
}

/// Only the match size, without collecting witnesses.
pub fn max_match_size(built: &Structure, target: &Structure) -> usize {
    let rotated = RotatedTarget::new(target);
    let mut counters = vec![0u16; TRANSFORM_COUNT];
    let mut best = 0;
    for (p, c) in built.iter() {
        for s in rotated.votes(p, c) {
            counters[s] += 1;
            best = best.max(counters[s]);
        }
    }
    best as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    Place { pos: Pos, color: BlockColor },
    Remove { pos: Pos, color: BlockColor },
}

/// Per-transform overlap counters for a fixed target, updated in
/// `O(4·|target|)` per placed or removed block.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    rotated: RotatedTarget,
    built: Structure,
    counters: Vec<u16>,
    /// `histogram[v]` is the number of transforms whose counter equals `v`.
    histogram: Vec<u32>,
    max_match: usize,
}

impl MatchIndex {
    pub fn new(built: &Structure, target: &Structure) -> Result<Self, MatchError> {
        let mut index = MatchIndex {
            rotated: RotatedTarget::new(target),
            built: Structure::new(),
            counters: vec![0; TRANSFORM_COUNT],
            histogram: vec![0; target.len() + 1],
            max_match: 0,
        };
        index.histogram[0] = TRANSFORM_COUNT as u32;
        for (pos, color) in built.iter() {
            index.apply(Edit::Place { pos, color })?;
        }
        Ok(index)
    }

    pub fn built(&self) -> &Structure {
        &self.built
    }

    pub fn max_match(&self) -> usize {
        self.max_match
    }

    pub fn result(&self) -> MatchResult {
        collect_result(&self.rotated, &self.counters, self.max_match)
    }

    /// Applies one edit and returns the new match size.
    pub fn apply(&mut self, edit: Edit) -> Result<usize, MatchError> {
        match edit {
            Edit::Place { pos, color } => {
                if !pos.in_zone() {
                    return Err(MatchError::InconsistentEdit(format!("place outside zone at {pos}")));
                }
                if let Some(existing) = self.built.get(pos) {
                    return Err(MatchError::InconsistentEdit(format!(
                        "place on occupied cell {pos} ({existing})"
                    )));
                }
                self.built.insert(pos, color);
                let slots: Vec<usize> = self.rotated.votes(pos, color).collect();
                for s in slots {
                    self.bump_up(s);
                }
            }
            Edit::Remove { pos, color } => {
                if self.built.get(pos) != Some(color) {
                    return Err(MatchError::InconsistentEdit(format!(
                        "no {color} block at {pos} to remove"
                    )));
                }
                self.built.remove(pos);
                let slots: Vec<usize> = self.rotated.votes(pos, color).collect();
                for s in slots {
                    self.bump_down(s);
                }
            }
        }
        Ok(self.max_match)
    }

    /// Applies an edit and reports the full result with witnesses.
    pub fn apply_and_result(&mut self, edit: Edit) -> Result<MatchResult, MatchError> {
        self.apply(edit)?;
        Ok(self.result())
    }

    fn bump_up(&mut self, s: usize) {
        let v = self.counters[s] as usize;
        self.counters[s] += 1;
        self.histogram[v] -= 1;
        self.histogram[v + 1] += 1;
        self.max_match = self.max_match.max(v + 1);
    }

    fn bump_down(&mut self, s: usize) {
        let v = self.counters[s] as usize;
        self.counters[s] -= 1;
        self.histogram[v] -= 1;
        self.histogram[v - 1] += 1;
        if v == self.max_match && self.histogram[v] == 0 {
            self.max_match = v - 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardCause {
    MatchGain,
    MatchLoss,
    StrayPlace,
    StrayRemove,
    Neutral,
}

impl RewardCause {
    pub fn value(self) -> i32 {
        match self {
            RewardCause::MatchGain => 2,
            RewardCause::MatchLoss => -2,
            RewardCause::StrayPlace => -1,
            RewardCause::StrayRemove => 1,
            RewardCause::Neutral => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewardEvent {
    pub value: i32,
    pub cause: RewardCause,
}

impl From<RewardCause> for RewardEvent {
    fn from(cause: RewardCause) -> Self {
        RewardEvent {
            value: cause.value(),
            cause,
        }
    }
}

impl RewardEvent {
    pub const NEUTRAL: RewardEvent = RewardEvent {
        value: 0,
        cause: RewardCause::Neutral,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockChange {
    Placed,
    Removed,
}

/// Reward for one step. A change of the match size takes precedence; the
/// stray rewards apply only when the match size is unchanged.
pub fn classify_reward(change: Option<BlockChange>, prev_match: usize, new_match: usize) -> RewardEvent {
    let cause = if new_match > prev_match {
        RewardCause::MatchGain
    } else if new_match < prev_match {
        RewardCause::MatchLoss
    } else {
        match change {
            Some(BlockChange::Placed) => RewardCause::StrayPlace,
            Some(BlockChange::Removed) => RewardCause::StrayRemove,
            None => RewardCause::Neutral,
        }
    };
    cause.into()
}

/// Reward for moving from `prev_built` to `new_built`, which may differ by at
/// most one placed or removed block. Returns the event and the new match size.
pub fn step_reward(
    prev_built: &Structure,
    new_built: &Structure,
    target: &Structure,
    prev_match: usize,
) -> Result<(RewardEvent, usize), MatchError> {
    let placed: Vec<_> = new_built.iter().filter(|&(p, c)| !prev_built.contains(p, c)).collect();
    let removed: Vec<_> = prev_built.iter().filter(|&(p, c)| !new_built.contains(p, c)).collect();
    let change = match (placed.len(), removed.len()) {
        (0, 0) => None,
        (1, 0) => Some(BlockChange::Placed),
        (0, 1) => Some(BlockChange::Removed),
        (a, b) => return Err(MatchError::MultiBlockEdit(a + b)),
    };
    let new_match = if change.is_some() {
        max_match_size(new_built, target)
    } else {
        prev_match
    };
    Ok((classify_reward(change, prev_match, new_match), new_match))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::apply_transform;

    fn s(blocks: &[(i32, i32, i32, BlockColor)]) -> Structure {
        Structure::from_blocks(blocks.iter().map(|&(x, y, z, c)| (Pos::new(x, y, z), c))).unwrap()
    }

    fn l5(c: BlockColor) -> Structure {
        s(&[(3, 0, 3, c), (4, 0, 3, c), (5, 0, 3, c), (3, 0, 4, c), (3, 0, 5, c)])
    }

    #[test]
    fn slot_ordering_round_trips() {
        let mut prev = None;
        for i in [0, 1, 500, 7000, TRANSFORM_COUNT - 1] {
            let t = transform_at(i);
            assert_eq!(slot(t.rotation, t.dx, t.dy, t.dz), Some(i));
            if let Some(p) = prev {
                assert!(t > p);
            }
            prev = Some(t);
        }
        assert_eq!(transform_at(0), Transform::new(0, -10, -8, -10));
    }

    #[test]
    fn translation_invariant_single_block() {
        let target = s(&[(5, 0, 5, BlockColor::Red)]);
        let built = s(&[(0, 0, 0, BlockColor::Red)]);
        let r = max_match(&built, &target);
        assert_eq!(r.max_match, 1);
        assert!(r.witnesses.contains(&Transform::translation(-5, 0, -5)));
    }

    #[test]
    fn rotated_and_shifted_l_matches_fully() {
        let target = l5(BlockColor::Red);
        let built = apply_transform(&target, &Transform::new(1, 2, 0, 1));
        assert!(built.fits_zone());
        assert_eq!(max_match(&built, &target).max_match, 5);
    }

    #[test]
    fn colors_must_match() {
        assert_eq!(max_match(&l5(BlockColor::Blue), &l5(BlockColor::Red)).max_match, 0);
    }

    #[test]
    fn empty_target_has_identity_witness() {
        let r = max_match(&l5(BlockColor::Red), &Structure::new());
        assert_eq!(
            r,
            MatchResult {
                max_match: 0,
                witnesses: vec![Transform::IDENTITY]
            }
        );
    }

    #[test]
    fn zero_match_witnesses_keep_a_block_in_zone() {
        let target = s(&[(0, 0, 0, BlockColor::Red)]);
        let r = max_match(&Structure::new(), &target);
        assert_eq!(r.max_match, 0);
        // every in-zone destination of the single block, for each of 4 rotations
        assert_eq!(r.witnesses.len(), 4 * 11 * 11 * 9);
        assert!(r.witnesses.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn witnesses_reproduce_the_match() {
        let target = l5(BlockColor::Green);
        let mut built = apply_transform(&target, &Transform::new(3, -1, 2, 0));
        built.remove(Pos::new(7, 2, 7));
        built.insert(Pos::new(0, 0, 0), BlockColor::Green);
        let r = max_match(&built, &target);
        for w in &r.witnesses {
            let moved: Structure = apply_transform(&target, w)
                .iter()
                .filter(|(p, _)| p.in_zone())
                .collect();
            assert_eq!(crate::voxel::intersection_size(&moved, &built), r.max_match);
        }
    }

    #[test]
    fn reward_rules() {
        let target = l5(BlockColor::Red);
        let full = target.clone();
        let mut four = target.clone();
        four.remove(Pos::new(3, 0, 5));

        assert_eq!(
            step_reward(&four, &full, &target, 4).unwrap(),
            (RewardCause::MatchGain.into(), 5)
        );
        assert_eq!(
            step_reward(&full, &four, &target, 5).unwrap(),
            (RewardCause::MatchLoss.into(), 4)
        );

        let mut stray = full.clone();
        stray.insert(Pos::new(10, 8, 10), BlockColor::Red);
        let (ev, m) = step_reward(&full, &stray, &target, 5).unwrap();
        assert_eq!((ev.value, ev.cause, m), (-1, RewardCause::StrayPlace, 5));
        let (ev, m) = step_reward(&stray, &full, &target, 5).unwrap();
        assert_eq!((ev.value, ev.cause, m), (1, RewardCause::StrayRemove, 5));

        assert_eq!(
            step_reward(&full, &full, &target, 5).unwrap(),
            (RewardEvent::NEUTRAL, 5)
        );
    }

    #[test]
    fn multi_block_difference_is_rejected() {
        let target = l5(BlockColor::Red);
        let mut recolored = target.clone();
        recolored.insert(Pos::new(3, 0, 3), BlockColor::Blue);
        assert_eq!(
            step_reward(&target, &recolored, &target, 5),
            Err(MatchError::MultiBlockEdit(2))
        );
    }

    #[test]
    fn index_place_then_remove_restores() {
        let target = l5(BlockColor::Red);
        let mut index = MatchIndex::new(&Structure::new(), &target).unwrap();
        assert_eq!(
            index
                .apply(Edit::Place {
                    pos: Pos::new(9, 4, 1),
                    color: BlockColor::Red
                })
                .unwrap(),
            1
        );
        assert_eq!(
            index
                .apply(Edit::Remove {
                    pos: Pos::new(9, 4, 1),
                    color: BlockColor::Red
                })
                .unwrap(),
            0
        );
        assert_eq!(index.result(), max_match(&Structure::new(), &target));
    }

    #[test]
    fn index_rejects_inconsistent_edits() {
        let target = l5(BlockColor::Red);
        let mut index = MatchIndex::new(&target, &target).unwrap();
        assert_eq!(index.max_match(), 5);
        assert!(index
            .apply(Edit::Place {
                pos: Pos::new(3, 0, 3),
                color: BlockColor::Blue
            })
            .is_err());
        assert!(index
            .apply(Edit::Remove {
                pos: Pos::new(3, 0, 3),
                color: BlockColor::Blue
            })
            .is_err());
        assert!(index
            .apply(Edit::Remove {
                pos: Pos::new(0, 0, 0),
                color: BlockColor::Red
            })
            .is_err());
        assert!(index
            .apply(Edit::Place {
                pos: Pos::new(0, 9, 0),
                color: BlockColor::Red
            })
            .is_err());
        assert_eq!(index.max_match(), 5);
    }
}
