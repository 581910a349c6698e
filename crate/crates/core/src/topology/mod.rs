//! Mesh geometry, snake (boustrophedon) labeling and the high/low channel
//! subnetworks.
//!
//! Every node of a `width x height` mesh gets a label that walks the rows
//! alternately left-to-right and right-to-left, so consecutive labels are
//! always mesh neighbors and the labels trace a Hamiltonian path. A directed
//! channel `u -> v` belongs to the high subnetwork when `label(v) > label(u)`
//! and to the low subnetwork otherwise.

pub mod cdg;

use std::fmt;
use std::str::FromStr;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MeshShape", into = "MeshShape")]
pub struct MeshConfig {
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct MeshShape {
    width: usize,
    height: usize,
}

impl TryFrom<MeshShape> for MeshConfig {
    type Error = Error;
    fn try_from(s: MeshShape) -> Result<Self> {
        MeshConfig::new(s.width, s.height)
    }
}

impl From<MeshConfig> for MeshShape {
    fn from(m: MeshConfig) -> Self {
        MeshShape {
            width: m.width,
            height: m.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeCoord {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeLabel(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subnet {
    High,
    Low,
}

/// Mesh direction; `North` increases `y`, `East` increases `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }
}

impl NodeCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        NodeCoord { x, y }
    }

    pub fn manhattan(self, other: NodeCoord) -> u32 {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as u32
    }
}

impl fmt::Display for NodeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl FromStr for NodeCoord {
    type Err = Error;

    /// Parses `x,y`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("expected a coordinate `x,y`, got `{s}`"));
        let (x, y) = s.trim().split_once(',').ok_or_else(bad)?;
        let x = x.trim().parse().map_err(|_| bad())?;
        let y = y.trim().parse().map_err(|_| bad())?;
        Ok(NodeCoord { x, y })
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for MeshConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for MeshConfig {
    type Err = Error;

    /// Parses `WxH`, e.g. `8x8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("expected mesh dimensions `WxH`, got `{s}`"));
        let (w, h) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        MeshConfig::new(w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?)
    }
}

impl MeshConfig {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::MeshTooSmall { width, height });
        }
        Ok(MeshConfig { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_count(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, c: NodeCoord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn check(&self, c: NodeCoord) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                coord: c,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Snake label: `y*w + x` on even rows, `y*w + w - x - 1` on odd rows.
    pub fn label_of(&self, c: NodeCoord) -> Result<NodeLabel> {
        self.check(c)?;
        Ok(self.label(c))
    }

    /// Unchecked variant of [`label_of`](Self::label_of) for coordinates
    /// already known to be in bounds.
    #[inline]
    pub fn label(&self, c: NodeCoord) -> NodeLabel {
        let row = c.y * self.width;
        if c.y % 2 == 0 {
            NodeLabel(row + c.x)
        } else {
            NodeLabel(row + self.width - c.x - 1)
        }
    }

    pub fn coord_of(&self, label: NodeLabel) -> Result<NodeCoord> {
        if label.0 >= self.node_count() {
            return Err(Error::LabelOutOfRange {
                label,
                nodes: self.node_count(),
            });
        }
        Ok(self.coord(label))
    }

    #[inline]
    pub fn coord(&self, label: NodeLabel) -> NodeCoord {
        let y = label.0 / self.width;
        let r = label.0 % self.width;
        let x = if y % 2 == 0 { r } else { self.width - 1 - r };
        NodeCoord { x, y }
    }

    /// Plain row-major index `y*w + x`. Not the routing label; used where a
    /// non-snake ordering is wanted (node storage, nearest-first tie breaks).
    #[inline]
    pub fn row_major(&self, c: NodeCoord) -> usize {
        c.y * self.width + c.x
    }

    #[inline]
    pub fn from_row_major(&self, index: usize) -> NodeCoord {
        NodeCoord {
            x: index % self.width,
            y: index / self.width,
        }
    }

    #[inline]
    pub fn neighbor(&self, c: NodeCoord, dir: Direction) -> Option<NodeCoord> {
        match dir {
            Direction::North if c.y + 1 < self.height => Some(NodeCoord::new(c.x, c.y + 1)),
            Direction::East if c.x + 1 < self.width => Some(NodeCoord::new(c.x + 1, c.y)),
            Direction::South if c.y > 0 => Some(NodeCoord::new(c.x, c.y - 1)),
            Direction::West if c.x > 0 => Some(NodeCoord::new(c.x - 1, c.y)),
            _ => None,
        }
    }

    pub fn neighbors(&self, c: NodeCoord) -> Result<ArrayVec<NodeCoord, 4>> {
        self.check(c)?;
        Ok(self.neighbors_unchecked(c))
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, c: NodeCoord) -> ArrayVec<NodeCoord, 4> {
        Direction::ALL
            .iter()
            .filter_map(|&d| self.neighbor(c, d))
            .collect()
    }

    pub fn direction_between(&self, from: NodeCoord, to: NodeCoord) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|&d| self.neighbor(from, d) == Some(to))
    }

    pub fn channel_subnet(&self, from: NodeCoord, to: NodeCoord) -> Result<Subnet> {
        self.check(from)?;
        self.check(to)?;
        if from.manhattan(to) != 1 {
            return Err(Error::NotAdjacent { from, to });
        }
        Ok(if self.label(to) > self.label(from) {
            Subnet::High
        } else {
            Subnet::Low
        })
    }

    /// All nodes in label order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeCoord> + '_ {
        (0..self.node_count()).map(|l| self.coord(NodeLabel(l)))
    }
}
