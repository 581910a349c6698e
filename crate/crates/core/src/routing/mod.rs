//! Hop-level routing functions and whole-multicast route planners.
//!
//! The Hamiltonian functions move a packet along the high (label ascending)
//! or low (label descending) subnetwork by picking the neighbor whose label
//! is furthest along without overshooting the destination. Every hop is
//! strictly monotone in label, so walks terminate and never mix subnets.

pub mod relations;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{self, CostModel};
use crate::topology::{MeshConfig, NodeCoord, Subnet};

/// Delivery method inside a partition; carried in the header routing field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteMode {
    DualPath,
    MultiUnicast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Dpm,
    Mp,
    Nmp,
    Dp,
    Mu,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::Dpm,
        PlannerKind::Mp,
        PlannerKind::Nmp,
        PlannerKind::Dp,
        PlannerKind::Mu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Dpm => "dpm",
            PlannerKind::Mp => "mp",
            PlannerKind::Nmp => "nmp",
            PlannerKind::Dp => "dp",
            PlannerKind::Mu => "mu",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown planner `{s}` (dpm, mp, nmp, dp, mu)")))
    }
}

/// How the source reaches a partition's representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproachRouting {
    /// Label-monotone subnet routing, same as every other leg.
    #[default]
    Hamiltonian,
    /// Dimension-ordered X-then-Y routing.
    Xy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanOptions {
    pub cost_model: CostModel,
    pub approach: ApproachRouting,
}

fn precondition(msg: String) -> Error {
    Error::Routing(msg)
}

/// Neighbor of `u` with the largest label not exceeding `label(dest)`.
pub fn next_hop_high(mesh: &MeshConfig, u: NodeCoord, dest: NodeCoord) -> Result<NodeCoord> {
    mesh.check(u)?;
    mesh.check(dest)?;
    let (lu, ld) = (mesh.label(u), mesh.label(dest));
    if ld <= lu {
        return Err(precondition(format!(
            "high hop needs label(dest) > label(u), got {ld} <= {lu}"
        )));
    }
    Ok(high_hop(mesh, u, dest))
}

/// Neighbor of `u` with the smallest label not below `label(dest)`.
pub fn next_hop_low(mesh: &MeshConfig, u: NodeCoord, dest: NodeCoord) -> Result<NodeCoord> {
    mesh.check(u)?;
    mesh.check(dest)?;
    let (lu, ld) = (mesh.label(u), mesh.label(dest));
    if ld >= lu {
        return Err(precondition(format!(
            "low hop needs label(dest) < label(u), got {ld} >= {lu}"
        )));
    }
    Ok(low_hop(mesh, u, dest))
}

#[inline]
pub(crate) fn high_hop(mesh: &MeshConfig, u: NodeCoord, dest: NodeCoord) -> NodeCoord {
    let ld = mesh.label(dest);
    mesh.neighbors_unchecked(u)
        .into_iter()
        .filter(|&v| mesh.label(v) <= ld)
        .max_by_key(|&v| mesh.label(v))
        .expect("the label-successor of u is always admissible")
}

#[inline]
pub(crate) fn low_hop(mesh: &MeshConfig, u: NodeCoord, dest: NodeCoord) -> NodeCoord {
    let ld = mesh.label(dest);
    mesh.neighbors_unchecked(u)
        .into_iter()
        .filter(|&v| mesh.label(v) >= ld)
        .min_by_key(|&v| mesh.label(v))
        .expect("the label-predecessor of u is always admissible")
}

/// Hamiltonian next hop in whichever subnet leads towards `dest`.
#[inline]
pub(crate) fn hamiltonian_hop(mesh: &MeshConfig, u: NodeCoord, dest: NodeCoord) -> (NodeCoord, Subnet) {
    if mesh.label(dest) > mesh.label(u) {
        (high_hop(mesh, u, dest), Subnet::High)
    } else {
        (low_hop(mesh, u, dest), Subnet::Low)
    }
}

/// X first, then Y.
pub fn next_hop_xy(mesh: &MeshConfig, u: NodeCoord, dest: NodeCoord) -> Result<NodeCoord> {
    mesh.check(u)?;
    mesh.check(dest)?;
    if u == dest {
        return Err(precondition(format!("xy hop requested at its destination {u}")));
    }
    Ok(xy_hop(u, dest))
}

#[inline]
pub(crate) fn xy_hop(u: NodeCoord, dest: NodeCoord) -> NodeCoord {
    use std::cmp::Ordering::*;
    match (dest.x.cmp(&u.x), dest.y.cmp(&u.y)) {
        (Greater, _) => NodeCoord::new(u.x + 1, u.y),
        (Less, _) => NodeCoord::new(u.x - 1, u.y),
        (Equal, Greater) => NodeCoord::new(u.x, u.y + 1),
        (Equal, Less) => NodeCoord::new(u.x, u.y - 1),
        (Equal, Equal) => u,
    }
}

/// Minimal routing with no turn restriction: X first when both offsets have
/// the same sign, Y first otherwise. Deadlock-prone on purpose; it exists to
/// exercise the watchdog and the dependency checker.
#[inline]
pub(crate) fn all_turns_hop(u: NodeCoord, dest: NodeCoord) -> NodeCoord {
    let dx = dest.x as isize - u.x as isize;
    let dy = dest.y as isize - u.y as isize;
    let x_first = dx != 0 && (dy == 0 || (dx > 0) == (dy > 0));
    if x_first {
        NodeCoord::new((u.x as isize + dx.signum()) as usize, u.y)
    } else {
        NodeCoord::new(u.x, (u.y as isize + dy.signum()) as usize)
    }
}

/// Node path of a single leg, both endpoints included.
pub fn walk_leg(
    mesh: &MeshConfig,
    from: NodeCoord,
    to: NodeCoord,
    routing: ApproachRouting,
) -> Result<Vec<NodeCoord>> {
    mesh.check(from)?;
    mesh.check(to)?;
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        cur = match routing {
            ApproachRouting::Hamiltonian => hamiltonian_hop(mesh, cur, to).0,
            ApproachRouting::Xy => xy_hop(cur, to),
        };
        path.push(cur);
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainWalk {
    pub hops: u32,
    /// Full node path, starting at the chain origin.
    pub path: Vec<NodeCoord>,
    /// Indices into `path` of the listed destinations (copy-and-forward
    /// points, the last one being the chain end).
    pub stops: Vec<usize>,
}

/// Walks `start -> d0 -> d1 -> ...` on one subnet. The destinations must be
/// strictly ascending in label (high chain) or strictly descending (low).
pub fn walk_chain(mesh: &MeshConfig, start: NodeCoord, ordered: &[NodeCoord]) -> Result<ChainWalk> {
    mesh.check(start)?;
    let mut walk = ChainWalk {
        hops: 0,
        path: vec![start],
        stops: Vec::with_capacity(ordered.len()),
    };
    let Some(&first) = ordered.first() else {
        return Ok(walk);
    };
    mesh.check(first)?;
    let ascending = mesh.label(first) > mesh.label(start);
    let mut cur = start;
    for &d in ordered {
        mesh.check(d)?;
        let ok = if ascending {
            mesh.label(d) > mesh.label(cur)
        } else {
            mesh.label(d) < mesh.label(cur)
        };
        if !ok {
            return Err(Error::NonMonotoneChain(d));
        }
        while cur != d {
            cur = if ascending {
                high_hop(mesh, cur, d)
            } else {
                low_hop(mesh, cur, d)
            };
            walk.path.push(cur);
        }
        walk.stops.push(walk.path.len() - 1);
    }
    walk.hops = (walk.path.len() - 1) as u32;
    Ok(walk)
}

/// Hop count of [`walk_chain`] without building the path.
pub fn chain_hops(mesh: &MeshConfig, start: NodeCoord, ordered: &[NodeCoord]) -> Result<u32> {
    mesh.check(start)?;
    let Some(&first) = ordered.first() else {
        return Ok(0);
    };
    let ascending = mesh.label(first) > mesh.label(start);
    let (mut cur, mut hops) = (start, 0);
    for &d in ordered {
        mesh.check(d)?;
        if (mesh.label(d) > mesh.label(cur)) != ascending || d == cur {
            return Err(Error::NonMonotoneChain(d));
        }
        while cur != d {
            cur = if ascending {
                high_hop(mesh, cur, d)
            } else {
                low_hop(mesh, cur, d)
            };
            hops += 1;
        }
    }
    Ok(hops)
}

/// Walks an arbitrary visiting order, each leg on whichever subnet reaches
/// the next destination. Subnet switches only happen at listed destinations.
pub fn walk_sequence(mesh: &MeshConfig, start: NodeCoord, order: &[NodeCoord]) -> Result<ChainWalk> {
    let mut walk = ChainWalk {
        hops: 0,
        path: vec![start],
        stops: Vec::with_capacity(order.len()),
    };
    let mut cur = start;
    for &d in order {
        let leg = walk_leg(mesh, cur, d, ApproachRouting::Hamiltonian)?;
        walk.path.extend_from_slice(&leg[1..]);
        walk.stops.push(walk.path.len() - 1);
        cur = d;
    }
    walk.hops = (walk.path.len() - 1) as u32;
    Ok(walk)
}

/// One independently injected delivery unit of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanEntry {
    /// Hand-off node; `None` when delivery starts at the source itself.
    pub representative: Option<NodeCoord>,
    /// Node path from the source to the representative (both included);
    /// empty when there is no representative.
    pub approach: Vec<NodeCoord>,
    pub mode: RouteMode,
    /// Ascending-label chain walked from the entry origin.
    pub high_chain: Vec<NodeCoord>,
    /// Descending-label chain walked from the entry origin.
    pub low_chain: Vec<NodeCoord>,
    /// Unicast targets sent from the entry origin.
    pub unicast_fanout: Vec<NodeCoord>,
    /// Nearest-first visiting order walked from the source.
    pub sequence: Vec<NodeCoord>,
}

impl PlanEntry {
    fn empty(mode: RouteMode) -> Self {
        PlanEntry {
            representative: None,
            approach: Vec::new(),
            mode,
            high_chain: Vec::new(),
            low_chain: Vec::new(),
            unicast_fanout: Vec::new(),
            sequence: Vec::new(),
        }
    }

    /// Node the chains and fan-out start from.
    pub fn origin(&self, source: NodeCoord) -> NodeCoord {
        self.representative.unwrap_or(source)
    }

    /// Every destination this entry delivers to.
    pub fn destinations(&self) -> impl Iterator<Item = NodeCoord> + '_ {
        self.representative
            .iter()
            .chain(&self.high_chain)
            .chain(&self.low_chain)
            .chain(&self.unicast_fanout)
            .chain(&self.sequence)
            .copied()
    }

    pub fn hops(&self, mesh: &MeshConfig, source: NodeCoord) -> Result<u32> {
        let origin = self.origin(source);
        let mut hops = self.approach.len().saturating_sub(1) as u32;
        hops += walk_chain(mesh, origin, &self.high_chain)?.hops;
        hops += walk_chain(mesh, origin, &self.low_chain)?.hops;
        hops += walk_sequence(mesh, source, &self.sequence)?.hops;
        for &d in &self.unicast_fanout {
            hops += walk_leg(mesh, origin, d, ApproachRouting::Hamiltonian)?.len() as u32 - 1;
        }
        Ok(hops)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutePlan {
    pub planner: PlannerKind,
    pub mesh: MeshConfig,
    pub source: NodeCoord,
    pub entries: Vec<PlanEntry>,
}

impl RoutePlan {
    pub fn destinations(&self) -> impl Iterator<Item = NodeCoord> + '_ {
        self.entries.iter().flat_map(|e| e.destinations())
    }
}

/// Total hops over all entries: approach legs, chain walks and unicast legs.
pub fn planned_cost(plan: &RoutePlan) -> Result<u32> {
    plan.entries
        .iter()
        .map(|e| e.hops(&plan.mesh, plan.source))
        .sum()
}

/// Validates `(dests, src)` and returns the destinations sorted by label.
pub(crate) fn checked_destinations(
    mesh: &MeshConfig,
    dests: &[NodeCoord],
    src: NodeCoord,
) -> Result<Vec<NodeCoord>> {
    mesh.check(src)?;
    let mut sorted = Vec::with_capacity(dests.len());
    for &d in dests {
        mesh.check(d)?;
        if d == src {
            return Err(Error::SourceIsDestination(src));
        }
        sorted.push(d);
    }
    sorted.sort_by_key(|&d| mesh.label(d));
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateDestination(w[0]));
    }
    Ok(sorted)
}

/// Multi-path: split into higher/lower label halves, then each half by
/// `x < s_x` versus `x >= s_x`. Emitted as D_H1, D_H2, D_L1, D_L2.
pub fn plan_mp(mesh: &MeshConfig, dests: &[NodeCoord], src: NodeCoord) -> Result<RoutePlan> {
    let sorted = checked_destinations(mesh, dests, src)?;
    let ls = mesh.label(src);
    let mut groups: [Vec<NodeCoord>; 4] = Default::default();
    for &d in &sorted {
        let high = mesh.label(d) > ls;
        let west = d.x < src.x;
        let g = match (high, west) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        groups[g].push(d);
    }
    groups[2].reverse();
    groups[3].reverse();
    let entries = groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(i, g)| {
            let mut e = PlanEntry::empty(RouteMode::DualPath);
            if i < 2 {
                e.high_chain = g;
            } else {
                e.low_chain = g;
            }
            e
        })
        .collect();
    Ok(RoutePlan {
        planner: PlannerKind::Mp,
        mesh: *mesh,
        source: src,
        entries,
    })
}

/// Greedy nearest-first order from `start`; ties go to the smaller
/// row-major index.
pub(crate) fn nearest_first(mesh: &MeshConfig, start: NodeCoord, group: &[NodeCoord]) -> Vec<NodeCoord> {
    let mut left = group.to_vec();
    let mut order = Vec::with_capacity(left.len());
    let mut cur = start;
    while !left.is_empty() {
        let (i, _) = left
            .iter()
            .enumerate()
            .min_by_key(|(_, &d)| (cur.manhattan(d), mesh.row_major(d)))
            .expect("non-empty");
        cur = left.swap_remove(i);
        order.push(cur);
    }
    order
}

/// New multi-path: the MP split computed on row-major labels, each group
/// visited nearest-first.
pub fn plan_nmp(mesh: &MeshConfig, dests: &[NodeCoord], src: NodeCoord) -> Result<RoutePlan> {
    let sorted = checked_destinations(mesh, dests, src)?;
    let rs = mesh.row_major(src);
    let mut groups: [Vec<NodeCoord>; 4] = Default::default();
    for &d in &sorted {
        let high = mesh.row_major(d) > rs;
        let west = d.x < src.x;
        let g = match (high, west) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        groups[g].push(d);
    }
    let entries = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let mut e = PlanEntry::empty(RouteMode::DualPath);
            e.sequence = nearest_first(mesh, src, g);
            e
        })
        .collect();
    Ok(RoutePlan {
        planner: PlannerKind::Nmp,
        mesh: *mesh,
        source: src,
        entries,
    })
}

/// One unicast packet per destination, in label order.
pub fn plan_mu(mesh: &MeshConfig, dests: &[NodeCoord], src: NodeCoord) -> Result<RoutePlan> {
    let sorted = checked_destinations(mesh, dests, src)?;
    let entries = sorted
        .into_iter()
        .map(|d| {
            let mut e = PlanEntry::empty(RouteMode::MultiUnicast);
            e.unicast_fanout.push(d);
            e
        })
        .collect();
    Ok(RoutePlan {
        planner: PlannerKind::Mu,
        mesh: *mesh,
        source: src,
        entries,
    })
}

/// Dual-path: one ascending chain and one descending chain from the source.
pub fn plan_dp(mesh: &MeshConfig, dests: &[NodeCoord], src: NodeCoord) -> Result<RoutePlan> {
    let sorted = checked_destinations(mesh, dests, src)?;
    let (high, low) = split_around(mesh, &sorted, src);
    let mut entries = Vec::new();
    if !high.is_empty() {
        let mut e = PlanEntry::empty(RouteMode::DualPath);
        e.high_chain = high;
        entries.push(e);
    }
    if !low.is_empty() {
        let mut e = PlanEntry::empty(RouteMode::DualPath);
        e.low_chain = low;
        entries.push(e);
    }
    Ok(RoutePlan {
        planner: PlannerKind::Dp,
        mesh: *mesh,
        source: src,
        entries,
    })
}

/// Splits label-sorted `members` around `pivot` into an ascending high chain
/// and a descending low chain; `pivot` itself is dropped.
pub(crate) fn split_around(
    mesh: &MeshConfig,
    members: &[NodeCoord],
    pivot: NodeCoord,
) -> (Vec<NodeCoord>, Vec<NodeCoord>) {
    let lp = mesh.label(pivot);
    let mut high: Vec<NodeCoord> = members.iter().copied().filter(|&d| mesh.label(d) > lp).collect();
    let mut low: Vec<NodeCoord> = members.iter().copied().filter(|&d| mesh.label(d) < lp).collect();
    high.sort_by_key(|&d| mesh.label(d));
    low.sort_by_key(|&d| std::cmp::Reverse(mesh.label(d)));
    (high, low)
}

/// Dynamic partition merging: one entry per final partition, each delivered
/// to its representative and from there by dual-path or multiple unicast.
pub fn plan_dpm(
    mesh: &MeshConfig,
    dests: &[NodeCoord],
    src: NodeCoord,
    opts: PlanOptions,
) -> Result<RoutePlan> {
    let fp = partition::dpm_partition(mesh, dests, src, opts.cost_model)?;
    let mut entries = Vec::with_capacity(fp.sets.len());
    for set in &fp.sets {
        let r = set.representative.expect("final partitions are non-empty");
        let mut e = PlanEntry::empty(set.mode);
        e.representative = Some(r);
        e.approach = walk_leg(mesh, src, r, opts.approach)?;
        match set.mode {
            RouteMode::DualPath => {
                let (high, low) = split_around(mesh, &set.members, r);
                e.high_chain = high;
                e.low_chain = low;
            }
            RouteMode::MultiUnicast => {
                e.unicast_fanout = set.members.iter().copied().filter(|&d| d != r).collect();
            }
        }
        entries.push(e);
    }
    Ok(RoutePlan {
        planner: PlannerKind::Dpm,
        mesh: *mesh,
        source: src,
        entries,
    })
}

pub fn plan(
    kind: PlannerKind,
    mesh: &MeshConfig,
    dests: &[NodeCoord],
    src: NodeCoord,
    opts: PlanOptions,
) -> Result<RoutePlan> {
    match kind {
        PlannerKind::Dpm => plan_dpm(mesh, dests, src, opts),
        PlannerKind::Mp => plan_mp(mesh, dests, src),
        PlannerKind::Nmp => plan_nmp(mesh, dests, src),
        PlannerKind::Dp => plan_dp(mesh, dests, src),
        PlannerKind::Mu => plan_mu(mesh, dests, src),
    }
}
