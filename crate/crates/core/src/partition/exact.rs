//! Exhaustive minimum-cost exact cover over the search set.
//!
//! Candidates are arcs of the sector circle, so an exact cover of the
//! destinations is a split of the circle into arcs of length 1..=3 (arcs
//! holding only empty sectors cost nothing and are dropped). Every split
//! corresponds to exactly one non-empty set of arc start positions, which
//! makes the search a walk over at most 255 bitmasks.

use super::{
    basic_partitions, candidate_sets, candidate_slot, validate_instance, CostModel, FinalPartition, PartitionIndex,
};
use crate::error::Result;
use crate::topology::{MeshConfig, NodeCoord};

/// Arc-start masks whose arcs are all at most three sectors long.
fn circle_splits() -> impl Iterator<Item = Vec<(usize, usize)>> {
    const N: usize = PartitionIndex::COUNT;
    (1u32..(1 << N)).filter_map(|mask| {
        let starts: Vec<usize> = (0..N).filter(|i| mask & (1 << i) != 0).collect();
        let mut arcs = Vec::with_capacity(starts.len());
        for (k, &s) in starts.iter().enumerate() {
            let next = starts[(k + 1) % starts.len()];
            let len = if starts.len() == 1 { N } else { (next + N - s) % N };
            if len > 3 {
                return None;
            }
            arcs.push((s, len));
        }
        Some(arcs)
    })
}

/// Minimum total cost and one optimal partition (first found in mask order).
pub fn exact_optimal_partition(
    mesh: &MeshConfig,
    dests: &[NodeCoord],
    src: NodeCoord,
    model: CostModel,
) -> Result<(u32, FinalPartition)> {
    validate_instance(dests, src)?;
    let parts = basic_partitions(mesh, dests, src)?;
    let v = candidate_sets(mesh, &parts, src, model)?;

    let mut best: Option<(u32, Vec<(usize, usize)>)> = None;
    for arcs in circle_splits() {
        let total: u32 = arcs.iter().map(|&(s, len)| v[candidate_slot(s, len)].cost).sum();
        if best.as_ref().map_or(true, |(b, _)| total < *b) {
            best = Some((total, arcs));
        }
    }
    let (total, arcs) = best.expect("the all-singles split always exists");
    let sets = arcs
        .into_iter()
        .map(|(s, len)| &v[candidate_slot(s, len)])
        .filter(|c| !c.members.is_empty())
        .cloned()
        .collect::<Vec<_>>();
    let merges = sets.iter().filter(|c| c.is_merged()).count();
    Ok((
        total,
        FinalPartition {
            sets,
            cost_model: model,
            merges,
        },
    ))
}
