//! Destination-set partitioning by dynamic partition merging.
//!
//! The destinations are first split into eight sectors around the source
//! (four quadrants and four half-axes, indexed counter-clockwise starting at
//! the north-east quadrant). The search set holds every sector, every pair
//! of circularly adjacent sectors and every run of three. Each candidate is
//! priced by its cheaper delivery method from its representative (the
//! member nearest the source); merged candidates are scored by how many hops
//! they save over their constituents. The greedy loop repeatedly takes the
//! best-saving merge that does not overlap an earlier one, then appends the
//! sectors that were never merged.

mod exact;

pub use exact::exact_optimal_partition;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::{self, chain_hops, RouteMode};
use crate::topology::{MeshConfig, NodeCoord};

/// Sector index `0..8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PartitionIndex(u8);

impl PartitionIndex {
    pub const COUNT: usize = 8;

    pub fn new(i: usize) -> Option<Self> {
        (i < Self::COUNT).then_some(PartitionIndex(i as u8))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// The index `k` steps further round the circle.
    pub fn advance(self, k: usize) -> Self {
        PartitionIndex(((self.0 as usize + k) % Self::COUNT) as u8)
    }
}

impl fmt::Display for PartitionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Whether a candidate's cost includes the hops from the source to its
/// representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// Delivery cost measured from the representative only.
    FromRepresentative,
    /// Delivery cost plus the Manhattan distance source -> representative.
    #[default]
    IncludeApproachLeg,
}

/// Sector of `dest` relative to `src`.
pub fn classify(dest: NodeCoord, src: NodeCoord) -> Result<PartitionIndex> {
    use std::cmp::Ordering::*;
    let i = match (dest.x.cmp(&src.x), dest.y.cmp(&src.y)) {
        (Greater, Greater) => 0,
        (Equal, Greater) => 1,
        (Less, Greater) => 2,
        (Less, Equal) => 3,
        (Less, Less) => 4,
        (Equal, Less) => 5,
        (Greater, Less) => 6,
        (Greater, Equal) => 7,
        (Equal, Equal) => return Err(Error::SourceIsDestination(src)),
    };
    Ok(PartitionIndex(i))
}

pub type BasicPartitions = [Vec<NodeCoord>; PartitionIndex::COUNT];

/// The eight sector member sets, each sorted by label.
pub fn basic_partitions(mesh: &MeshConfig, dests: &[NodeCoord], src: NodeCoord) -> Result<BasicPartitions> {
    let sorted = routing::checked_destinations(mesh, dests, src)?;
    let mut parts: BasicPartitions = Default::default();
    for d in sorted {
        parts[classify(d, src)?.get()].push(d);
    }
    Ok(parts)
}

/// Member nearest to `src` in Manhattan distance, ties to the smaller label.
pub fn representative(mesh: &MeshConfig, members: &[NodeCoord], src: NodeCoord) -> Result<NodeCoord> {
    members
        .iter()
        .copied()
        .min_by_key(|&d| (d.manhattan(src), mesh.label(d)))
        .ok_or(Error::EmptyMembers)
}

/// Sum of Manhattan distances from `r` to every member.
pub fn cost_multi_unicast(members: &[NodeCoord], r: NodeCoord) -> Result<u32> {
    if !members.contains(&r) {
        return Err(Error::RepresentativeNotMember(r));
    }
    Ok(members.iter().map(|&d| d.manhattan(r)).sum())
}

/// Hops of the ascending chain plus the descending chain walked from `r`.
pub fn cost_dual_path(mesh: &MeshConfig, members: &[NodeCoord], r: NodeCoord) -> Result<u32> {
    if !members.contains(&r) {
        return Err(Error::RepresentativeNotMember(r));
    }
    let (high, low) = routing::split_around(mesh, members, r);
    Ok(chain_hops(mesh, r, &high)? + chain_hops(mesh, r, &low)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PartitionCost {
    pub cost: u32,
    pub mode: RouteMode,
    pub representative: Option<NodeCoord>,
    pub multi_unicast: u32,
    pub dual_path: u32,
}

/// Cheaper of multiple-unicast and dual-path delivery (multiple unicast on
/// ties), plus the approach leg under [`CostModel::IncludeApproachLeg`].
pub fn cost(mesh: &MeshConfig, members: &[NodeCoord], src: NodeCoord, model: CostModel) -> Result<PartitionCost> {
    if members.is_empty() {
        return Ok(PartitionCost {
            cost: 0,
            mode: RouteMode::MultiUnicast,
            representative: None,
            multi_unicast: 0,
            dual_path: 0,
        });
    }
    let r = representative(mesh, members, src)?;
    let mu = cost_multi_unicast(members, r)?;
    let dp = cost_dual_path(mesh, members, r)?;
    let (base, mode) = if dp < mu {
        (dp, RouteMode::DualPath)
    } else {
        (mu, RouteMode::MultiUnicast)
    };
    let approach = match model {
        CostModel::FromRepresentative => 0,
        CostModel::IncludeApproachLeg => src.manhattan(r),
    };
    Ok(PartitionCost {
        cost: base + approach,
        mode,
        representative: Some(r),
        multi_unicast: mu,
        dual_path: dp,
    })
}

/// One element of the search set: a run of 1-3 adjacent sectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateSet {
    pub constituents: Vec<PartitionIndex>,
    /// Union of the constituent sectors, sorted by label.
    pub members: Vec<NodeCoord>,
    pub representative: Option<NodeCoord>,
    pub cost: u32,
    pub mode: RouteMode,
    /// Hops saved over the constituents; zero for single sectors.
    pub saving: u32,
    /// Merged candidates need at least two non-empty constituents.
    pub eligible: bool,
}

impl CandidateSet {
    pub fn start(&self) -> PartitionIndex {
        self.constituents[0]
    }

    pub fn is_merged(&self) -> bool {
        self.constituents.len() > 1
    }

    pub fn overlaps(&self, other: &CandidateSet) -> bool {
        self.constituents.iter().any(|c| other.constituents.contains(c))
    }
}

/// `max(0, sum of constituent costs - merged cost)`.
pub fn saving(merged: &CandidateSet, parts: &[&CandidateSet]) -> Result<u32> {
    let mut union: Vec<NodeCoord> = parts.iter().flat_map(|p| p.members.iter().copied()).collect();
    union.sort();
    let mut members = merged.members.clone();
    members.sort();
    if union != members {
        return Err(Error::MemberUnionMismatch);
    }
    let separate: u32 = parts.iter().map(|p| p.cost).sum();
    Ok(separate.saturating_sub(merged.cost))
}

/// Position of the candidate for `len` sectors starting at `start` in the
/// search-set ordering produced by [`candidate_sets`].
pub(crate) fn candidate_slot(start: usize, len: usize) -> usize {
    (len - 1) * PartitionIndex::COUNT + start
}

/// The 24-element search set: 8 singles, then 8 pairs and 8 triples, each
/// group ordered by starting sector.
pub fn candidate_sets(
    mesh: &MeshConfig,
    parts: &BasicPartitions,
    src: NodeCoord,
    model: CostModel,
) -> Result<Vec<CandidateSet>> {
    let mut v: Vec<CandidateSet> = Vec::with_capacity(3 * PartitionIndex::COUNT);
    for len in 1..=3 {
        for start in 0..PartitionIndex::COUNT {
            let first = PartitionIndex(start as u8);
            let constituents: Vec<PartitionIndex> = (0..len).map(|k| first.advance(k)).collect();
            let non_empty = constituents.iter().filter(|c| !parts[c.get()].is_empty()).count();
            let mut members: Vec<NodeCoord> = Vec::new();
            if non_empty > 0 {
                members.extend(constituents.iter().flat_map(|c| parts[c.get()].iter().copied()));
                members.sort_by_key(|&d| mesh.label(d));
            }
            let pc = cost(mesh, &members, src, model)?;
            v.push(CandidateSet {
                eligible: len > 1 && non_empty >= 2,
                constituents,
                members,
                representative: pc.representative,
                cost: pc.cost,
                mode: pc.mode,
                saving: 0,
            });
        }
    }
    for i in PartitionIndex::COUNT..v.len() {
        // With fewer than two non-empty sectors the merge equals one of
        // them and saves nothing.
        if !v[i].eligible {
            continue;
        }
        let singles: Vec<&CandidateSet> = v[i].constituents.iter().map(|c| &v[c.get()]).collect();
        let s = saving(&v[i], &singles)?;
        v[i].saving = s;
    }
    Ok(v)
}

/// Output of the partitioning: the sets delivered as separate packets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinalPartition {
    pub sets: Vec<CandidateSet>,
    pub cost_model: CostModel,
    /// Number of merges the greedy loop selected.
    pub merges: usize,
}

impl FinalPartition {
    pub fn total_cost(&self) -> u32 {
        self.sets.iter().map(|s| s.cost).sum()
    }
}

fn validate_instance(dests: &[NodeCoord], src: NodeCoord) -> Result<()> {
    if dests.is_empty() {
        return Err(Error::EmptyDestinations);
    }
    if dests.contains(&src) {
        return Err(Error::SourceIsDestination(src));
    }
    Ok(())
}

pub fn dpm_partition(
    mesh: &MeshConfig,
    dests: &[NodeCoord],
    src: NodeCoord,
    model: CostModel,
) -> Result<FinalPartition> {
    validate_instance(dests, src)?;
    let parts = basic_partitions(mesh, dests, src)?;
    let v = candidate_sets(mesh, &parts, src, model)?;

    let mut live: Vec<u32> = v.iter().map(|c| if c.eligible { c.saving } else { 0 }).collect();
    let mut taken = [false; PartitionIndex::COUNT];
    let mut sets = Vec::new();
    let mut merges = 0;
    loop {
        // Merged candidates are laid out pairs-then-triples by start index,
        // so the first strict maximum honours both tie-break rules.
        let mut best: Option<usize> = None;
        for i in PartitionIndex::COUNT..v.len() {
            if live[i] > 0 && best.map_or(true, |b| live[i] > live[b]) {
                best = Some(i);
            }
        }
        let Some(q) = best else { break };
        for (i, c) in v.iter().enumerate() {
            if c.overlaps(&v[q]) {
                live[i] = 0;
            }
        }
        for c in &v[q].constituents {
            taken[c.get()] = true;
        }
        sets.push(v[q].clone());
        merges += 1;
    }
    for (i, part) in parts.iter().enumerate() {
        if !taken[i] && !part.is_empty() {
            sets.push(v[i].clone());
        }
    }
    Ok(FinalPartition {
        sets,
        cost_model: model,
        merges,
    })
}

/// Total cost of serving each non-empty sector on its own.
pub fn basic_cost(mesh: &MeshConfig, dests: &[NodeCoord], src: NodeCoord, model: CostModel) -> Result<u32> {
    let parts = basic_partitions(mesh, dests, src)?;
    parts
        .iter()
        .map(|p| cost(mesh, p, src, model).map(|c| c.cost))
        .sum()
}
