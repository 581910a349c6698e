//! Packet header, flit kinds and the delivery-state transitions a packet
//! goes through: copy-and-forward at chain destinations and replication at
//! a representative.

use serde::Serialize;

use crate::routing::{PlanEntry, RouteMode, RoutePlan};
use crate::topology::{MeshConfig, NodeCoord, NodeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlitKind {
    Head,
    Body,
    Tail,
}

impl FlitKind {
    /// Kind of flit `i` in a packet of `len` flits (`len >= 2`).
    pub fn at(i: usize, len: usize) -> FlitKind {
        if i == 0 {
            FlitKind::Head
        } else if i + 1 == len {
            FlitKind::Tail
        } else {
            FlitKind::Body
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketType {
    Unicast,
    Multicast,
}

/// One bit per node, indexed by label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DestBits {
    words: Vec<u64>,
}

impl DestBits {
    pub fn new(nodes: usize) -> Self {
        DestBits {
            words: vec![0; nodes.div_ceil(64)],
        }
    }

    pub fn set(&mut self, l: NodeLabel) {
        self.words[l.0 / 64] |= 1 << (l.0 % 64);
    }

    pub fn clear(&mut self, l: NodeLabel) {
        self.words[l.0 / 64] &= !(1 << (l.0 % 64));
    }

    pub fn contains(&self, l: NodeLabel) -> bool {
        self.words.get(l.0 / 64).is_some_and(|w| w & (1 << (l.0 % 64)) != 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeLabel> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            (0..64)
                .filter(move |b| w & (1 << b) != 0)
                .map(move |b| NodeLabel(i * 64 + b))
        })
    }
}

/// Header fields carried by the head flit.
///
/// Bit layout used for trace dumps: flit kind (2), packet type (1), routing
/// field (1), source and steering destination (`ceil(log2(w*h))` each), then
/// one bit per node for the multicast destinations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketHeader {
    pub packet_type: PacketType,
    pub routing_field: RouteMode,
    pub source: NodeLabel,
    /// Current steering target: the next chain destination or the
    /// representative.
    pub dest: NodeLabel,
    pub dest_bits: DestBits,
}

impl PacketHeader {
    pub fn encoded_bits(mesh: &MeshConfig) -> usize {
        let n = mesh.node_count();
        let id = usize::BITS - (n - 1).leading_zeros();
        4 + 2 * id as usize + n
    }
}

/// How a packet picks its next hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegRouting {
    Hamiltonian,
    Xy,
    /// Deadlock-prone fixture routing; always uses the high VC class.
    AllTurns,
}

/// Work left for the representative once the packet has been absorbed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replication {
    pub mode: RouteMode,
    pub high_chain: Vec<NodeCoord>,
    pub low_chain: Vec<NodeCoord>,
    pub unicast_fanout: Vec<NodeCoord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub header: PacketHeader,
    /// Node that injected this packet.
    pub origin: NodeCoord,
    /// Steering targets in visiting order; `chain[next]` is `header.dest`.
    pub chain: Vec<NodeCoord>,
    pub next: usize,
    pub routing: LegRouting,
    pub replication: Option<Replication>,
    /// Targets handed to a fresh packet at the chain end, because the leg
    /// after it runs on the other subnet.
    pub rest: Vec<NodeCoord>,
    /// Links the head has crossed since the multicast left its source.
    pub hops: u32,
}

/// Outcome of [`copy_and_forward`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyDecision {
    pub deliver_local: bool,
    pub forward: bool,
}

impl Packet {
    pub fn new(
        mesh: &MeshConfig,
        origin: NodeCoord,
        chain: Vec<NodeCoord>,
        routing: LegRouting,
        mode: RouteMode,
        replication: Option<Replication>,
        hops: u32,
    ) -> Packet {
        let mut bits = DestBits::new(mesh.node_count());
        for &d in &chain {
            bits.set(mesh.label(d));
        }
        if let Some(r) = &replication {
            for &d in r.high_chain.iter().chain(&r.low_chain).chain(&r.unicast_fanout) {
                bits.set(mesh.label(d));
            }
        }
        let packet_type = if bits.count() > 1 {
            PacketType::Multicast
        } else {
            PacketType::Unicast
        };
        Packet {
            header: PacketHeader {
                packet_type,
                routing_field: mode,
                source: mesh.label(origin),
                dest: mesh.label(chain[0]),
                dest_bits: bits,
            },
            origin,
            chain,
            next: 0,
            routing,
            replication,
            rest: Vec::new(),
            hops,
        }
    }

    pub fn with_rest(mut self, mesh: &MeshConfig, rest: Vec<NodeCoord>) -> Packet {
        for &d in &rest {
            self.header.dest_bits.set(mesh.label(d));
        }
        if self.header.dest_bits.count() > 1 {
            self.header.packet_type = PacketType::Multicast;
        }
        self.rest = rest;
        self
    }

    pub fn target(&self) -> Option<NodeCoord> {
        self.chain.get(self.next).copied()
    }
}

/// Copy point handling for a head flit at `here`: when `here` is the
/// steering target (and still marked in the bit string) a copy is delivered
/// locally, the bit is cleared and the header is retargeted to the next
/// chain destination. Nodes that are not the current target are passed
/// through unchanged, even if they are marked for a later visit.
pub fn copy_and_forward(mesh: &MeshConfig, packet: &mut Packet, here: NodeCoord) -> CopyDecision {
    let l = mesh.label(here);
    if packet.target() != Some(here) || !packet.header.dest_bits.contains(l) {
        return CopyDecision {
            deliver_local: false,
            forward: true,
        };
    }
    packet.header.dest_bits.clear(l);
    packet.next += 1;
    let forward = match packet.target() {
        Some(t) => {
            packet.header.dest = mesh.label(t);
            true
        }
        None => false,
    };
    CopyDecision {
        deliver_local: true,
        forward,
    }
}

/// Splits a visiting order at the first target whose leg runs on the other
/// subnet than the leg before it.
pub fn split_monotone(mesh: &MeshConfig, origin: NodeCoord, seq: &[NodeCoord]) -> (Vec<NodeCoord>, Vec<NodeCoord>) {
    let up = |a: NodeCoord, b: NodeCoord| mesh.label(b) > mesh.label(a);
    let Some(&first) = seq.first() else {
        return (Vec::new(), Vec::new());
    };
    let dir = up(origin, first);
    let mut cut = 1;
    while cut < seq.len() && up(seq[cut - 1], seq[cut]) == dir {
        cut += 1;
    }
    (seq[..cut].to_vec(), seq[cut..].to_vec())
}

/// Builds the packet for a visiting order starting at `origin`. Hamiltonian
/// packets keep to one subnet; the rest of the order is carried along and
/// re-injected at the chain end.
fn sequence_packet(
    mesh: &MeshConfig,
    origin: NodeCoord,
    seq: &[NodeCoord],
    routing: LegRouting,
    mode: RouteMode,
    hops: u32,
) -> Packet {
    if routing == LegRouting::AllTurns {
        return Packet::new(mesh, origin, seq.to_vec(), routing, mode, None, hops);
    }
    let (chain, rest) = split_monotone(mesh, origin, seq);
    Packet::new(mesh, origin, chain, routing, mode, None, hops).with_rest(mesh, rest)
}

/// Packets injected at the end of the chain after it absorbed `packet`.
/// For a representative: the high chain then the low chain for dual-path,
/// one unicast per remaining destination in label order for multiple
/// unicast. For a split visiting order: the packet carrying the next part.
pub fn replicate_at_representative(mesh: &MeshConfig, packet: &Packet, here: NodeCoord) -> Vec<Packet> {
    let routing = match packet.routing {
        LegRouting::AllTurns => LegRouting::AllTurns,
        _ => LegRouting::Hamiltonian,
    };
    if !packet.rest.is_empty() {
        let mode = packet.header.routing_field;
        return vec![sequence_packet(mesh, here, &packet.rest, routing, mode, packet.hops)];
    }
    let Some(rep) = &packet.replication else {
        return Vec::new();
    };
    let child = |chain: Vec<NodeCoord>| Packet::new(mesh, here, chain, routing, rep.mode, None, packet.hops);
    let mut out = Vec::new();
    match rep.mode {
        RouteMode::DualPath => {
            for chain in [&rep.high_chain, &rep.low_chain] {
                if !chain.is_empty() {
                    out.push(child(chain.clone()));
                }
            }
        }
        RouteMode::MultiUnicast => {
            let mut fan = rep.unicast_fanout.clone();
            fan.sort_by_key(|&d| mesh.label(d));
            out.extend(fan.into_iter().map(|d| child(vec![d])));
        }
    }
    out
}

/// Packets the source injects for one plan entry.
pub fn entry_packet(mesh: &MeshConfig, plan: &RoutePlan, entry: &PlanEntry, approach: LegRouting) -> Packet {
    let src = plan.source;
    let shared = |chain: Vec<NodeCoord>| {
        let routing = match approach {
            LegRouting::AllTurns => LegRouting::AllTurns,
            _ => LegRouting::Hamiltonian,
        };
        Packet::new(mesh, src, chain, routing, entry.mode, None, 0)
    };
    if let Some(r) = entry.representative {
        let replication = Replication {
            mode: entry.mode,
            high_chain: entry.high_chain.clone(),
            low_chain: entry.low_chain.clone(),
            unicast_fanout: entry.unicast_fanout.clone(),
        };
        let has_children = !(replication.high_chain.is_empty()
            && replication.low_chain.is_empty()
            && replication.unicast_fanout.is_empty());
        return Packet::new(
            mesh,
            src,
            vec![r],
            approach,
            entry.mode,
            has_children.then_some(replication),
            0,
        );
    }
    if !entry.sequence.is_empty() {
        let routing = match approach {
            LegRouting::AllTurns => LegRouting::AllTurns,
            _ => LegRouting::Hamiltonian,
        };
        return sequence_packet(mesh, src, &entry.sequence, routing, entry.mode, 0);
    }
    if !entry.high_chain.is_empty() {
        return shared(entry.high_chain.clone());
    }
    if !entry.low_chain.is_empty() {
        return shared(entry.low_chain.clone());
    }
    shared(entry.unicast_fanout.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: usize, y: usize) -> NodeCoord {
        NodeCoord::new(x, y)
    }

    #[test]
    fn flit_kinds() {
        let kinds: Vec<FlitKind> = (0..4).map(|i| FlitKind::at(i, 4)).collect();
        assert_eq!(kinds, vec![FlitKind::Head, FlitKind::Body, FlitKind::Body, FlitKind::Tail]);
        assert_eq!(FlitKind::at(1, 2), FlitKind::Tail);
    }

    #[test]
    fn header_width() {
        let m = MeshConfig::new(8, 8).unwrap();
        assert_eq!(PacketHeader::encoded_bits(&m), 4 + 12 + 64);
        let m = MeshConfig::new(3, 3).unwrap();
        assert_eq!(PacketHeader::encoded_bits(&m), 4 + 8 + 9);
    }

    #[test]
    fn dest_bits() {
        let mut b = DestBits::new(100);
        b.set(NodeLabel(3));
        b.set(NodeLabel(70));
        assert!(b.contains(NodeLabel(70)) && !b.contains(NodeLabel(4)));
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![NodeLabel(3), NodeLabel(70)]);
        b.clear(NodeLabel(3));
        b.clear(NodeLabel(70));
        assert!(b.is_empty());
    }

    #[test]
    fn copy_at_last_destination_stops() {
        let m = MeshConfig::new(4, 4).unwrap();
        let mut p = Packet::new(&m, c(0, 0), vec![c(2, 0)], LegRouting::Hamiltonian, RouteMode::DualPath, None, 0);
        assert_eq!(p.header.packet_type, PacketType::Unicast);
        let d = copy_and_forward(&m, &mut p, c(2, 0));
        assert_eq!(
            d,
            CopyDecision {
                deliver_local: true,
                forward: false
            }
        );
        assert!(p.header.dest_bits.is_empty());
    }

    #[test]
    fn copy_mid_chain_retargets() {
        let m = MeshConfig::new(4, 4).unwrap();
        let mut p = Packet::new(&m, c(0, 0), vec![c(1, 0), c(3, 0)], LegRouting::Hamiltonian, RouteMode::DualPath, None, 0);
        assert_eq!(p.header.packet_type, PacketType::Multicast);
        let d = copy_and_forward(&m, &mut p, c(1, 0));
        assert!(d.deliver_local && d.forward);
        assert_eq!(p.header.dest, NodeLabel(3));
        assert_eq!(p.header.dest_bits.count(), 1);
    }

    #[test]
    fn pass_through_leaves_header_alone() {
        let m = MeshConfig::new(4, 4).unwrap();
        let mut p = Packet::new(&m, c(0, 0), vec![c(3, 0)], LegRouting::Hamiltonian, RouteMode::DualPath, None, 0);
        let before = p.clone();
        let d = copy_and_forward(&m, &mut p, c(1, 0));
        assert!(!d.deliver_local && d.forward);
        assert_eq!(p, before);
    }

    fn absorbed(mode: RouteMode, high: Vec<NodeCoord>, low: Vec<NodeCoord>, fan: Vec<NodeCoord>) -> Packet {
        let m = MeshConfig::new(4, 4).unwrap();
        let rep = Replication {
            mode,
            high_chain: high,
            low_chain: low,
            unicast_fanout: fan,
        };
        Packet::new(&m, c(0, 3), vec![c(1, 1)], LegRouting::Hamiltonian, mode, Some(rep), 0)
    }

    #[test]
    fn replication_children() {
        let m = MeshConfig::new(4, 4).unwrap();
        let p = absorbed(RouteMode::MultiUnicast, vec![], vec![], vec![c(3, 3), c(0, 0), c(2, 2)]);
        let kids = replicate_at_representative(&m, &p, c(1, 1));
        assert_eq!(kids.len(), 3);
        let order: Vec<NodeCoord> = kids.iter().map(|k| k.chain[0]).collect();
        assert_eq!(order, vec![c(0, 0), c(2, 2), c(3, 3)]);
        assert!(kids.iter().all(|k| k.origin == c(1, 1) && k.header.packet_type == PacketType::Unicast));

        let p = absorbed(RouteMode::DualPath, vec![c(2, 2), c(3, 3)], vec![], vec![]);
        let kids = replicate_at_representative(&m, &p, c(1, 1));
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].chain, vec![c(2, 2), c(3, 3)]);

        let p = absorbed(RouteMode::DualPath, vec![c(2, 2)], vec![c(0, 0)], vec![]);
        let kids = replicate_at_representative(&m, &p, c(1, 1));
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[1].chain, vec![c(0, 0)]);
    }

    #[test]
    fn sequences_split_where_the_subnet_changes() {
        let m = MeshConfig::new(4, 4).unwrap();
        let l = |i| m.coord(NodeLabel(i));
        // 5 -> 9 -> 12 ascends, 12 -> 2 descends, 2 -> 3 ascends again.
        let seq = [l(9), l(12), l(2), l(3)];
        assert_eq!(split_monotone(&m, l(5), &seq), (vec![l(9), l(12)], vec![l(2), l(3)]));
        assert_eq!(split_monotone(&m, l(12), &seq[2..]), (vec![l(2)], vec![l(3)]));
        assert_eq!(split_monotone(&m, l(5), &[]), (vec![], vec![]));

        let p = sequence_packet(&m, l(5), &seq, LegRouting::Hamiltonian, RouteMode::DualPath, 0);
        assert_eq!(p.chain, vec![l(9), l(12)]);
        assert_eq!(p.header.dest_bits.count(), 4);
        let next = replicate_at_representative(&m, &p, l(12));
        assert_eq!(next.len(), 1);
        assert_eq!((next[0].origin, next[0].chain.clone(), next[0].rest.clone()), (l(12), vec![l(2)], vec![l(3)]));

        let p = sequence_packet(&m, l(5), &seq, LegRouting::AllTurns, RouteMode::DualPath, 0);
        assert_eq!(p.chain.len(), 4);
        assert!(p.rest.is_empty());
    }
}
