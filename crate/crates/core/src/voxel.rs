//! Voxel grids, block colors, structures and the vertical-axis symmetry group.
//!
//! Coordinates: `x` and `z` are horizontal and span `0..11`, `y` is height and
//! spans `0..9`. Rotations turn about the vertical line through the zone
//! center `(5, ·, 5)`, so a pure rotation maps the zone onto itself.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const ZONE_X: i32 = 11;
pub const ZONE_Y: i32 = 9;
pub const ZONE_Z: i32 = 11;
pub const ZONE_CELLS: usize = (ZONE_X * ZONE_Y * ZONE_Z) as usize;
/// Blocks available per color, and the most a grid may hold of one color.
pub const COLOR_LIMIT: usize = 20;
pub const NUM_COLORS: usize = 6;

const CENTER_X: i32 = 5;
const CENTER_Z: i32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoxelError {
    #[error("block at {0} lies outside the build zone")]
    OutOfZone(Pos),
    #[error("more than {COLOR_LIMIT} {0} blocks")]
    ColorLimit(BlockColor),
    #[error("duplicate block at {0}")]
    DuplicateBlock(Pos),
    #[error("grid dimension mismatch: expected {expected} cells, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid cell code {0}")]
    BadCode(u8),
    #[error("unknown block color `{0}`")]
    UnknownColor(String),
    #[error("malformed grid layers: {0}")]
    BadLayers(String),
}

/// The six block colors. Codes `1..=6` are stable; `0` is air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockColor {
    Blue = 1,
    Green = 2,
    Red = 3,
    Orange = 4,
    Purple = 5,
    Yellow = 6,
}

impl BlockColor {
    pub const ALL: [BlockColor; NUM_COLORS] = [
        BlockColor::Blue,
        BlockColor::Green,
        BlockColor::Red,
        BlockColor::Orange,
        BlockColor::Purple,
        BlockColor::Yellow,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1..=6 => Some(Self::ALL[code as usize - 1]),
            _ => None,
        }
    }

    /// Zero-based slot in per-color arrays such as the inventory.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockColor::Blue => "blue",
            BlockColor::Green => "green",
            BlockColor::Red => "red",
            BlockColor::Orange => "orange",
            BlockColor::Purple => "purple",
            BlockColor::Yellow => "yellow",
        }
    }
}

impl fmt::Display for BlockColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockColor {
    type Err = VoxelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| VoxelError::UnknownColor(s.to_string()))
    }
}

impl Serialize for BlockColor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for BlockColor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Integer cell coordinate. May lie outside the zone (e.g. after a transform).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Pos { x, y, z }
    }

    pub fn in_zone(self) -> bool {
        (0..ZONE_X).contains(&self.x) && (0..ZONE_Y).contains(&self.y) && (0..ZONE_Z).contains(&self.z)
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Pos::new(self.x + dx, self.y + dy, self.z + dz)
    }

    fn grid_index(self) -> Option<usize> {
        self.in_zone()
            .then(|| ((self.y * ZONE_Z + self.z) * ZONE_X + self.x) as usize)
    }

    fn from_grid_index(i: usize) -> Self {
        let i = i as i32;
        Pos::new(i % ZONE_X, i / (ZONE_X * ZONE_Z), (i / ZONE_X) % ZONE_Z)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Serialize for Pos {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pos {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[i32; 3]>::deserialize(deserializer)?;
        Ok(Pos::new(x, y, z))
    }
}

/// A rotation by `rotation` quarter-turns about the vertical axis through the
/// zone center, followed by an integer translation.
///
/// Transforms order by rotation, then `dy`, `dx`, `dz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: u8,
    pub dx: i32,
    pub dy: i32,
    pub dz: i32,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rotation: 0,
        dx: 0,
        dy: 0,
        dz: 0,
    };

    /// Panics if `rotation > 3`.
    pub fn new(rotation: u8, dx: i32, dy: i32, dz: i32) -> Self {
        assert!(rotation < 4, "rotation must be 0..=3 quarter turns, got {rotation}");
        Transform { rotation, dx, dy, dz }
    }

    pub fn translation(dx: i32, dy: i32, dz: i32) -> Self {
        Transform {
            rotation: 0,
            dx,
            dy,
            dz,
        }
    }

    pub fn rotate(p: Pos, rotation: u8) -> Pos {
        let (mut u, mut w) = (p.x - CENTER_X, p.z - CENTER_Z);
        for _ in 0..(rotation % 4) {
            (u, w) = (w, -u);
        }
        Pos::new(u + CENTER_X, p.y, w + CENTER_Z)
    }

    pub fn apply(&self, p: Pos) -> Pos {
        Self::rotate(p, self.rotation).offset(self.dx, self.dy, self.dz)
    }
}

impl Ord for Transform {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.rotation, self.dy, self.dx, self.dz).cmp(&(other.rotation, other.dy, other.dx, other.dz))
    }
}

impl PartialOrd for Transform {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A set of colored blocks with distinct coordinates, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Structure {
    blocks: BTreeMap<Pos, BlockColor>,
}

impl Structure {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a structure, rejecting repeated coordinates.
    pub fn from_blocks<I>(blocks: I) -> Result<Self, VoxelError>
    where
        I: IntoIterator<Item = (Pos, BlockColor)>,
    {
        let mut s = Structure::new();
        for (p, c) in blocks {
            if s.blocks.insert(p, c).is_some() {
                return Err(VoxelError::DuplicateBlock(p));
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, p: Pos) -> Option<BlockColor> {
        self.blocks.get(&p).copied()
    }

    pub fn contains(&self, p: Pos, c: BlockColor) -> bool {
        self.get(p) == Some(c)
    }

    /// Inserts or recolors a block, returning the previous color at `p`.
    pub fn insert(&mut self, p: Pos, c: BlockColor) -> Option<BlockColor> {
        self.blocks.insert(p, c)
    }

    pub fn remove(&mut self, p: Pos) -> Option<BlockColor> {
        self.blocks.remove(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pos, BlockColor)> + '_ {
        self.blocks.iter().map(|(p, c)| (*p, *c))
    }

    pub fn color_counts(&self) -> [usize; NUM_COLORS] {
        let mut counts = [0; NUM_COLORS];
        for (_, c) in self.iter() {
            counts[c.index()] += 1;
        }
        counts
    }

    pub fn distinct_colors(&self) -> usize {
        self.color_counts().iter().filter(|&&n| n > 0).count()
    }

    pub fn fits_zone(&self) -> bool {
        self.blocks.keys().all(|p| p.in_zone())
    }

    /// True if every block of `self` appears, with the same color, in `other`.
    pub fn is_subset_of(&self, other: &Structure) -> bool {
        self.iter().all(|(p, c)| other.contains(p, c))
    }
}

impl FromIterator<(Pos, BlockColor)> for Structure {
    /// Later entries overwrite earlier ones at the same coordinate.
    fn from_iter<I: IntoIterator<Item = (Pos, BlockColor)>>(iter: I) -> Self {
        Structure {
            blocks: iter.into_iter().collect(),
        }
    }
}

impl Serialize for Structure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for (p, c) in self.iter() {
            seq.serialize_element(&(p.x, p.y, p.z, c))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Structure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct BlocksVisitor;

        impl<'de> Visitor<'de> for BlocksVisitor {
            type Value = Structure;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a list of [x, y, z, color] entries")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Structure, A::Error> {
                let mut s = Structure::new();
                while let Some((x, y, z, c)) = seq.next_element::<(i32, i32, i32, BlockColor)>()? {
                    let p = Pos::new(x, y, z);
                    if s.insert(p, c).is_some() {
                        return Err(de::Error::custom(VoxelError::DuplicateBlock(p)));
                    }
                }
                Ok(s)
            }
        }

        deserializer.deserialize_seq(BlocksVisitor)
    }
}

/// Rotates then translates every block. Coordinates may leave the zone.
pub fn apply_transform(s: &Structure, t: &Transform) -> Structure {
    s.iter().map(|(p, c)| (t.apply(p), c)).collect()
}

/// Number of `(coordinate, color)` pairs present in both structures.
pub fn intersection_size(a: &Structure, b: &Structure) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter(|&(p, c)| large.contains(p, c)).count()
}

/// Dense 11×11×9 occupancy grid. Cell codes: 0 air, 1..=6 colors.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VoxelGrid {
    cells: [u8; ZONE_CELLS],
    counts: [u8; NUM_COLORS],
}

impl Default for VoxelGrid {
    fn default() -> Self {
        VoxelGrid {
            cells: [0; ZONE_CELLS],
            counts: [0; NUM_COLORS],
        }
    }
}

impl fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VoxelGrid")
            .field("counts", &self.counts)
            .field("layers", &self.layers())
            .finish()
    }
}

impl VoxelGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a grid from raw cell codes in `(y, z, x)` order.
    pub fn from_codes(codes: &[u8]) -> Result<Self, VoxelError> {
        if codes.len() != ZONE_CELLS {
            return Err(VoxelError::DimensionMismatch {
                expected: ZONE_CELLS,
                found: codes.len(),
            });
        }
        let mut grid = VoxelGrid::new();
        for (i, &code) in codes.iter().enumerate() {
            if code == 0 {
                continue;
            }
            let color = BlockColor::from_code(code).ok_or(VoxelError::BadCode(code))?;
            grid.set(Pos::from_grid_index(i), Some(color))?;
        }
        Ok(grid)
    }

    pub fn codes(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, p: Pos) -> Option<BlockColor> {
        p.grid_index().and_then(|i| BlockColor::from_code(self.cells[i]))
    }

    pub fn is_air(&self, p: Pos) -> bool {
        self.get(p).is_none()
    }

    /// Writes a cell and returns its previous state.
    pub fn set(&mut self, p: Pos, cell: Option<BlockColor>) -> Result<Option<BlockColor>, VoxelError> {
        let i = p.grid_index().ok_or(VoxelError::OutOfZone(p))?;
        let prev = BlockColor::from_code(self.cells[i]);
        if prev == cell {
            return Ok(prev);
        }
        if let Some(c) = cell {
            if self.counts[c.index()] as usize >= COLOR_LIMIT {
                return Err(VoxelError::ColorLimit(c));
            }
            self.counts[c.index()] += 1;
        }
        if let Some(c) = prev {
            self.counts[c.index()] -= 1;
        }
        self.cells[i] = cell.map_or(0, BlockColor::code);
        Ok(prev)
    }

    pub fn color_count(&self, c: BlockColor) -> usize {
        self.counts[c.index()] as usize
    }

    pub fn block_count(&self) -> usize {
        self.counts.iter().map(|&n| n as usize).sum()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (Pos, BlockColor)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &code)| BlockColor::from_code(code).map(|c| (Pos::from_grid_index(i), c)))
    }

    /// Nine layers (y ascending), each 11 rows (z ascending) of 11 digit
    /// columns (x ascending), rows separated by `/`.
    pub fn layers(&self) -> Vec<String> {
        (0..ZONE_Y)
            .map(|y| {
                let rows: Vec<String> = (0..ZONE_Z)
                    .map(|z| {
                        (0..ZONE_X)
                            .map(|x| char::from(b'0' + self.cells[Pos::new(x, y, z).grid_index().unwrap()]))
                            .collect()
                    })
                    .collect();
                rows.join("/")
            })
            .collect()
    }

    pub fn from_layers<S: AsRef<str>>(layers: &[S]) -> Result<Self, VoxelError> {
        if layers.len() != ZONE_Y as usize {
            return Err(VoxelError::BadLayers(format!(
                "expected {ZONE_Y} layers, found {}",
                layers.len()
            )));
        }
        let mut codes = vec![0u8; ZONE_CELLS];
        for (y, layer) in layers.iter().enumerate() {
            let rows: Vec<&str> = layer.as_ref().split('/').collect();
            if rows.len() != ZONE_Z as usize {
                return Err(VoxelError::BadLayers(format!(
                    "layer {y}: expected {ZONE_Z} rows, found {}",
                    rows.len()
                )));
            }
            for (z, row) in rows.iter().enumerate() {
                if row.len() != ZONE_X as usize {
                    return Err(VoxelError::BadLayers(format!(
                        "layer {y} row {z}: expected {ZONE_X} columns"
                    )));
                }
                for (x, ch) in row.bytes().enumerate() {
                    if !ch.is_ascii_digit() {
                        return Err(VoxelError::BadLayers(format!(
                            "layer {y} row {z}: non-digit `{}`",
                            ch as char
                        )));
                    }
                    let p = Pos::new(x as i32, y as i32, z as i32);
                    codes[p.grid_index().unwrap()] = ch - b'0';
                }
            }
        }
        Self::from_codes(&codes)
    }
}

impl Serialize for VoxelGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.layers().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VoxelGrid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let layers = Vec::<String>::deserialize(deserializer)?;
        VoxelGrid::from_layers(&layers).map_err(de::Error::custom)
    }
}

/// Number of cells whose state differs between the two grids.
pub fn hamming(a: &VoxelGrid, b: &VoxelGrid) -> usize {
    a.cells.iter().zip(b.cells.iter()).filter(|(x, y)| x != y).count()
}

/// Hamming distance over raw cell-code buffers, which must have equal length.
pub fn hamming_codes(a: &[u8], b: &[u8]) -> Result<usize, VoxelError> {
    if a.len() != b.len() {
        return Err(VoxelError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

pub fn grid_from_structure(s: &Structure) -> Result<VoxelGrid, VoxelError> {
    let mut grid = VoxelGrid::new();
    for (p, c) in s.iter() {
        grid.set(p, Some(c))?;
    }
    Ok(grid)
}

pub fn structure_from_grid(g: &VoxelGrid) -> Structure {
    g.blocks().collect()
}
