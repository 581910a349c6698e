//! Routing relations fed to the channel dependency checker.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use super::{all_turns_hop, hamiltonian_hop, xy_hop};
use crate::topology::cdg::RoutingRelation;
use crate::topology::{MeshConfig, NodeCoord, Subnet};

/// Label-monotone routing; VC class follows the channel's subnet.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hamiltonian;

/// Dimension-ordered routing with the VC class taken from the channel's
/// subnet, as the engine does for XY approach legs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Xy;

/// Minimal routing with every turn allowed and a single VC class.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllTurns;

/// Packets of either relation share the same channels.
#[derive(Debug, Clone, Copy, Default)]
pub struct Union<A, B>(pub A, pub B);

fn link_class(mesh: &MeshConfig, from: NodeCoord, to: NodeCoord) -> Subnet {
    if mesh.label(to) > mesh.label(from) {
        Subnet::High
    } else {
        Subnet::Low
    }
}

impl RoutingRelation for Hamiltonian {
    fn next_hops(&self, mesh: &MeshConfig, here: NodeCoord, dest: NodeCoord) -> ArrayVec<(NodeCoord, Subnet), 4> {
        let mut v = ArrayVec::new();
        if here != dest {
            v.push(hamiltonian_hop(mesh, here, dest));
        }
        v
    }
}

impl RoutingRelation for Xy {
    fn next_hops(&self, mesh: &MeshConfig, here: NodeCoord, dest: NodeCoord) -> ArrayVec<(NodeCoord, Subnet), 4> {
        let mut v = ArrayVec::new();
        if here != dest {
            let next = xy_hop(here, dest);
            v.push((next, link_class(mesh, here, next)));
        }
        v
    }
}

impl RoutingRelation for AllTurns {
    fn next_hops(&self, _mesh: &MeshConfig, here: NodeCoord, dest: NodeCoord) -> ArrayVec<(NodeCoord, Subnet), 4> {
        let mut v = ArrayVec::new();
        if here == dest {
            return v;
        }
        if dest.x > here.x {
            v.push((NodeCoord::new(here.x + 1, here.y), Subnet::High));
        }
        if dest.x < here.x {
            v.push((NodeCoord::new(here.x - 1, here.y), Subnet::High));
        }
        if dest.y > here.y {
            v.push((NodeCoord::new(here.x, here.y + 1), Subnet::High));
        }
        if dest.y < here.y {
            v.push((NodeCoord::new(here.x, here.y - 1), Subnet::High));
        }
        debug_assert!(v.iter().any(|&(n, _)| n == all_turns_hop(here, dest)));
        v
    }
}

impl<A: RoutingRelation, B: RoutingRelation> RoutingRelation for Union<A, B> {
    fn next_hops(&self, mesh: &MeshConfig, here: NodeCoord, dest: NodeCoord) -> ArrayVec<(NodeCoord, Subnet), 4> {
        let mut v = self.0.next_hops(mesh, here, dest);
        for h in self.1.next_hops(mesh, here, dest) {
            if !v.contains(&h) {
                v.push(h);
            }
        }
        v
    }
}

/// Relation selector used by configuration files and the `check` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// Every leg on the label-monotone subnets.
    #[default]
    Hamiltonian,
    /// Hamiltonian legs plus XY approach legs sharing the same channels.
    HamiltonianXyApproach,
    /// Unrestricted minimal routing on one VC class (adversarial fixture).
    AllTurns,
}

impl RoutingMode {
    pub fn relation(self) -> Box<dyn RoutingRelation> {
        match self {
            RoutingMode::Hamiltonian => Box::new(Hamiltonian),
            RoutingMode::HamiltonianXyApproach => Box::new(Union(Hamiltonian, Xy)),
            RoutingMode::AllTurns => Box::new(AllTurns),
        }
    }
}
