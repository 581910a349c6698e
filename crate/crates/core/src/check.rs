//! Invariant checks run by the `check` command.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::SimConfig;
use crate::partition::{basic_cost, dpm_partition, exact_optimal_partition, FinalPartition};
use crate::routing::relations::RoutingMode;
use crate::routing::{plan, ApproachRouting, PlannerKind};
use crate::topology::cdg::{channel_dependency_graph, Verdict};
use crate::topology::{MeshConfig, NodeCoord, NodeLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, failure: Option<String>, ok: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed: failure.is_none(),
            detail: failure.unwrap_or_else(|| ok.into()),
        }
    }
}

pub fn routing_mode(cfg: &SimConfig) -> RoutingMode {
    match (cfg.all_turns, cfg.approach) {
        (true, _) => RoutingMode::AllTurns,
        (false, ApproachRouting::Xy) => RoutingMode::HamiltonianXyApproach,
        (false, ApproachRouting::Hamiltonian) => RoutingMode::Hamiltonian,
    }
}

/// A source and `k` distinct destinations drawn uniformly from the other
/// nodes.
pub fn random_instance<R: Rng>(rng: &mut R, mesh: &MeshConfig, k: usize) -> (NodeCoord, Vec<NodeCoord>) {
    let n = mesh.node_count();
    let src = rng.gen_range(0..n);
    let dests = index::sample(rng, n - 1, k)
        .into_iter()
        .map(|d| mesh.from_row_major(if d >= src { d + 1 } else { d }))
        .collect();
    (mesh.from_row_major(src), dests)
}

/// Every destination appears in exactly one set, and nothing else does.
pub fn cover_violation(dests: &[NodeCoord], fp: &FinalPartition) -> Option<String> {
    let mut got: Vec<NodeCoord> = fp.sets.iter().flat_map(|s| s.members.iter().copied()).collect();
    let mut want = dests.to_vec();
    got.sort();
    want.sort();
    if got.windows(2).any(|w| w[0] == w[1]) {
        return Some("a destination appears in two sets".into());
    }
    (got != want).then(|| format!("sets cover {got:?}, expected {want:?}"))
}

fn labeling(mesh: &MeshConfig) -> Option<String> {
    let n = mesh.node_count();
    let mut seen = vec![false; n];
    for c in mesh.nodes() {
        let l = mesh.label(c).0;
        if l >= n || std::mem::replace(&mut seen[l], true) {
            return Some(format!("label {l} of {c} is out of range or repeated"));
        }
        if mesh.coord(NodeLabel(l)) != c {
            return Some(format!("label {l} does not map back to {c}"));
        }
    }
    (1..n).find_map(|l| {
        let (a, b) = (mesh.coord(NodeLabel(l - 1)), mesh.coord(NodeLabel(l)));
        (a.manhattan(b) != 1).then(|| format!("labels {} and {l} are not adjacent", l - 1))
    })
}

/// Runs every invariant on `cfg.mesh` with `instances` random partition
/// instances per check.
pub fn run_checks(cfg: &SimConfig, instances: usize, seed: u64) -> Vec<CheckOutcome> {
    let mesh = cfg.mesh;
    let mode = routing_mode(cfg);
    let mut out = Vec::new();

    let cdg = channel_dependency_graph(&mesh, mode.relation().as_ref());
    out.push(CheckOutcome::new(
        format!("channel dependency graph acyclic ({mode:?})"),
        match cdg.verdict() {
            Verdict::Acyclic => None,
            Verdict::Cyclic { witness } => Some(format!("cycle through {} channels", witness.len())),
        },
        format!(
            "{} channels, {} dependencies",
            cdg.channel_count(),
            cdg.dependency_count()
        ),
    ));

    out.push(CheckOutcome::new(
        format!("snake labeling is a Hamiltonian bijection on {mesh}"),
        labeling(&mesh),
        format!("{} nodes", mesh.node_count()),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_k = 16.min(mesh.node_count() - 1);
    let mut cover = None;
    let mut sandwich = None;
    let mut merges = None;
    let mut coverage = None;
    let mut gap = 0u64;
    for _ in 0..instances {
        let k = rng.gen_range(1..=max_k);
        let (src, dests) = random_instance(&mut rng, &mesh, k);
        let model = cfg.cost_model;
        let result = (|| -> crate::error::Result<()> {
            let fp = dpm_partition(&mesh, &dests, src, model)?;
            let (exact, _) = exact_optimal_partition(&mesh, &dests, src, model)?;
            let basic = basic_cost(&mesh, &dests, src, model)?;
            let dpm = fp.total_cost();
            if cover.is_none() {
                cover = cover_violation(&dests, &fp).map(|e| format!("src {src}: {e}"));
            }
            if sandwich.is_none() && !(exact <= dpm && dpm <= basic) {
                sandwich = Some(format!("src {src} {dests:?}: exact {exact}, dpm {dpm}, basic {basic}"));
            }
            if merges.is_none() && fp.merges > 4 {
                merges = Some(format!("src {src} {dests:?}: {} merges", fp.merges));
            }
            gap += u64::from(dpm.saturating_sub(exact));
            for p in PlannerKind::ALL {
                let rp = plan(p, &mesh, &dests, src, cfg.plan_options())?;
                let mut got: Vec<NodeCoord> = rp.destinations().collect();
                let mut want = dests.clone();
                got.sort();
                want.sort();
                if coverage.is_none() && got != want {
                    coverage = Some(format!("{} misses destinations from {src}", p.name()));
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            cover.get_or_insert(format!("src {src} {dests:?}: {e}"));
        }
    }
    let n = instances.max(1) as f64;
    out.push(CheckOutcome::new(
        "partition covers every destination exactly once",
        cover,
        format!("{instances} instances"),
    ));
    out.push(CheckOutcome::new(
        "exact <= dpm <= basic cost",
        sandwich,
        format!("{instances} instances, mean gap {:.4} hops", gap as f64 / n),
    ));
    out.push(CheckOutcome::new(
        "at most 4 merges",
        merges,
        format!("{instances} instances"),
    ));
    out.push(CheckOutcome::new(
        "every planner reaches every destination",
        coverage,
        format!("{instances} instances x {} planners", PlannerKind::ALL.len()),
    ));
    out
}
