//! Reference implementations used to check the engine. They favour the
//! plainest possible formulation over speed and share no code with the
//! engine beyond the data types.

use iglu_core::voxel::{ZONE_X, ZONE_Y, ZONE_Z};
use iglu_core::{BlockColor, Pos, Structure};

/// Quarter turns about the vertical axis through the zone center, written
/// as the rotation matrix `[[0, 1], [-1, 0]]` on offsets from `(5, 5)`.
pub fn rotate(p: Pos, quarter_turns: u8) -> Pos {
    let (cx, cz) = (ZONE_X / 2, ZONE_Z / 2);
    const M: [[i32; 2]; 2] = [[0, 1], [-1, 0]];
    let (mut u, mut w) = (p.x - cx, p.z - cz);
    for _ in 0..quarter_turns % 4 {
        (u, w) = (M[0][0] * u + M[0][1] * w, M[1][0] * u + M[1][1] * w);
    }
    Pos::new(u + cx, p.y, w + cz)
}

/// Dense occupancy of the zone; `None` is air.
struct Dense(Vec<Option<BlockColor>>);

impl Dense {
    fn new(s: &Structure) -> Self {
        let mut cells = vec![None; (ZONE_X * ZONE_Y * ZONE_Z) as usize];
        for (p, c) in s.iter() {
            cells[Self::index(p).expect("built blocks lie in the zone")] = Some(c);
        }
        Dense(cells)
    }

    fn index(p: Pos) -> Option<usize> {
        let inside = (0..ZONE_X).contains(&p.x) && (0..ZONE_Y).contains(&p.y) && (0..ZONE_Z).contains(&p.z);
        inside.then(|| ((p.y * ZONE_Z + p.z) * ZONE_X + p.x) as usize)
    }

    fn get(&self, p: Pos) -> Option<BlockColor> {
        Self::index(p).and_then(|i| self.0[i])
    }
}

/// Largest number of target blocks that coincide in position and color with
/// built blocks, over every rotation and every translation that can move a
/// zone cell onto another zone cell.
pub fn brute_max_match(built: &Structure, target: &Structure) -> usize {
    let dense = Dense::new(built);
    let blocks: Vec<(Pos, BlockColor)> = target.iter().collect();
    let mut best = 0;
    for k in 0..4 {
        let turned: Vec<(Pos, BlockColor)> = blocks.iter().map(|&(p, c)| (rotate(p, k), c)).collect();
        for dy in -(ZONE_Y - 1)..ZONE_Y {
            for dx in -(ZONE_X - 1)..ZONE_X {
                for dz in -(ZONE_Z - 1)..ZONE_Z {
                    let n = turned
                        .iter()
                        .filter(|&&(p, c)| dense.get(p.offset(dx, dy, dz)) == Some(c))
                        .count();
                    best = best.max(n);
                }
            }
        }
    }
    best
}

/// Overlap of `built` with `target` under one rotation and translation.
pub fn overlap_under(built: &Structure, target: &Structure, quarter_turns: u8, d: (i32, i32, i32)) -> usize {
    target
        .iter()
        .filter(|&(p, c)| built.get(rotate(p, quarter_turns).offset(d.0, d.1, d.2)) == Some(c))
        .count()
}

/// Symmetric-difference distance: `(|T| + |B| - 2M) / max(1, |T| + |B|)`.
pub fn brute_rho(built: &Structure, target: &Structure) -> f64 {
    let total = built.len() + target.len();
    let m = brute_max_match(built, target);
    (total - 2 * m) as f64 / total.max(1) as f64
}
