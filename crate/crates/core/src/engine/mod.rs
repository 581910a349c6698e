//! Cycle-accurate wormhole simulator.
//!
//! Each router has five input ports (four mesh neighbors and the local
//! network interface), each with `vcs_per_port` virtual channels. The low
//! indices form the high-subnet class and the rest the low-subnet class; a
//! packet always takes a VC of the class matching the channel it crosses.
//! Routers are single-stage: a flit that has sat in an input buffer for
//! `router_latency` cycles can be switched, and it lands in the downstream
//! buffer `link_latency` cycles later. Flow control is credit based.
//!
//! Every cycle runs in four phases:
//! 1. flit arrivals, credit returns and ejections scheduled for this cycle;
//! 2. new messages are planned and their packets queued at the source NI;
//! 3. route computation, VC allocation and switch traversal in every router;
//! 4. each NI injects at most one flit.
//!
//! With `h = router_latency + link_latency` and `P` flits per packet, an
//! uncontended packet covering `H` hops delivers its tail `(H + 1) * h +
//! P - 1` cycles after injection starts.

mod packet;
mod watchdog;

pub use packet::{
    copy_and_forward, entry_packet, replicate_at_representative, CopyDecision, DestBits, FlitKind, LegRouting,
    Packet, PacketHeader, PacketType, Replication,
};
pub use watchdog::{DeadlockReport, Port, VcLocation};

use std::collections::VecDeque;

use arrayvec::ArrayVec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{DeliveryRecord, EnergyCounters, RunTotals};
use crate::partition::CostModel;
use crate::routing::{
    self, all_turns_hop, hamiltonian_hop, xy_hop, ApproachRouting, PlanOptions, PlannerKind, RoutePlan,
};
use crate::topology::{Direction, MeshConfig, NodeCoord, Subnet};
use crate::workload::TraceEvent;

const LOCAL: usize = 4;
const PORTS: usize = 5;

fn default_mesh() -> MeshConfig {
    MeshConfig::new(8, 8).expect("8x8 is a valid mesh")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(with = "mesh_text")]
    pub mesh: MeshConfig,
    pub vcs_per_port: usize,
    pub vcs_high: usize,
    pub vcs_low: usize,
    pub buffer_depth: usize,
    pub packet_size: usize,
    pub planner: PlannerKind,
    pub cost_model: CostModel,
    pub approach: ApproachRouting,
    /// Replace every routing decision with unrestricted minimal routing on a
    /// single VC class. Only useful to show that the watchdog fires.
    pub all_turns: bool,
    pub router_latency: u64,
    pub link_latency: u64,
    pub watchdog_threshold: u64,
    pub warmup: u64,
    pub measure: u64,
    pub drain: u64,
    /// Messages arriving at a source whose NI already holds this many
    /// packets are dropped (and counted).
    pub source_queue_limit: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mesh: default_mesh(),
            vcs_per_port: 4,
            vcs_high: 2,
            vcs_low: 2,
            buffer_depth: 4,
            packet_size: 4,
            planner: PlannerKind::Dpm,
            cost_model: CostModel::IncludeApproachLeg,
            approach: ApproachRouting::Hamiltonian,
            all_turns: false,
            router_latency: 1,
            link_latency: 1,
            watchdog_threshold: 10_000,
            warmup: 10_000,
            measure: 100_000,
            drain: 100_000,
            source_queue_limit: 64,
            seed: 1,
        }
    }
}

pub(crate) mod mesh_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::topology::MeshConfig;

    pub fn serialize<S: Serializer>(m: &MeshConfig, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MeshConfig, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.vcs_high + self.vcs_low != self.vcs_per_port {
            return bad(format!(
                "vcs_high ({}) + vcs_low ({}) must equal vcs_per_port ({})",
                self.vcs_high, self.vcs_low, self.vcs_per_port
            ));
        }
        if self.vcs_high == 0 || self.vcs_low == 0 {
            return bad("each subnet needs at least one virtual channel".into());
        }
        if self.vcs_per_port > 16 {
            return bad(format!("at most 16 VCs per port are supported, got {}", self.vcs_per_port));
        }
        if self.buffer_depth == 0 || self.buffer_depth > u16::MAX as usize {
            return bad(format!("buffer_depth must be in 1..=65535, got {}", self.buffer_depth));
        }
        if self.packet_size < 2 {
            return bad(format!("packet_size must be at least 2 flits, got {}", self.packet_size));
        }
        if self.router_latency == 0 || self.link_latency == 0 {
            return bad("router_latency and link_latency must be at least 1 cycle".into());
        }
        if self.watchdog_threshold == 0 {
            return bad("watchdog_threshold must be positive".into());
        }
        if self.source_queue_limit == 0 {
            return bad("source_queue_limit must be positive".into());
        }
        Ok(())
    }

    pub fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            cost_model: self.cost_model,
            approach: self.approach,
        }
    }

    /// Routing used for the legs that start at a message source.
    pub fn approach_routing(&self) -> LegRouting {
        match (self.all_turns, self.approach) {
            (true, _) => LegRouting::AllTurns,
            (false, ApproachRouting::Hamiltonian) => LegRouting::Hamiltonian,
            (false, ApproachRouting::Xy) => LegRouting::Xy,
        }
    }

    pub fn hop_latency(&self) -> u64 {
        self.router_latency + self.link_latency
    }

    fn class_range(&self, class: Subnet) -> std::ops::Range<usize> {
        match (self.all_turns, class) {
            (false, Subnet::High) | (true, _) => 0..self.vcs_high,
            (false, Subnet::Low) => self.vcs_high..self.vcs_per_port,
        }
    }
}

/// Output direction and VC class for the head of `packet` at `here`.
pub fn route_compute(mesh: &MeshConfig, packet: &Packet, here: NodeCoord) -> Result<(Direction, Subnet)> {
    let Some(target) = packet.target() else {
        return Err(Error::Routing(format!("packet from {} has no target left", packet.origin)));
    };
    if target == here {
        return Err(Error::Routing(format!("route requested at the target {here} itself")));
    }
    let next = match packet.routing {
        LegRouting::Hamiltonian => hamiltonian_hop(mesh, here, target).0,
        LegRouting::Xy => xy_hop(here, target),
        LegRouting::AllTurns => all_turns_hop(here, target),
    };
    let dir = mesh
        .direction_between(here, next)
        .ok_or_else(|| Error::Routing(format!("no admissible neighbor from {here} towards {target}")))?;
    let class = match packet.routing {
        LegRouting::AllTurns => Subnet::High,
        _ => mesh.channel_subnet(here, next)?,
    };
    Ok((dir, class))
}

#[derive(Debug, Clone, Copy)]
struct Flit {
    packet: u32,
    kind: FlitKind,
    ready: u64,
}

#[derive(Debug, Clone, Copy)]
struct Route {
    local: bool,
    onward: Option<(Direction, Subnet)>,
}

#[derive(Debug, Clone)]
struct InputVc {
    buf: VecDeque<Flit>,
    route: Option<Route>,
    out_vc: Option<usize>,
    /// Local VCs only: claimed by the NI for the packet being injected.
    claimed: bool,
    last_move: u64,
}

#[derive(Debug, Clone)]
struct Router {
    coord: NodeCoord,
    neighbors: [Option<usize>; 4],
    /// `port * V + vc`, local port last.
    vcs: Vec<InputVc>,
    /// Credits per downstream VC, `direction * V + vc`.
    credits: Vec<u16>,
    /// Downstream VCs held by a packet leaving through this router.
    reserved: Vec<bool>,
    buffered: usize,
    rr: usize,
}

#[derive(Debug, Clone, Default)]
struct Ni {
    queue: VecDeque<u32>,
    /// (packet, local VC, flits sent)
    current: Option<(u32, usize, usize)>,
}

#[derive(Debug, Clone)]
struct Message {
    id: u64,
    generated: u64,
    source: NodeCoord,
    dest_count: usize,
    remaining: usize,
    measured: bool,
}

#[derive(Debug, Clone)]
struct InFlight {
    packet: Packet,
    msg: u32,
    /// Cycle the packet was queued at its NI; older packets win arbitration.
    born: u64,
    /// Copies being ejected: (copy point, head ejection cycle, hops to that
    /// point, flits ejected so far).
    heads: Vec<(NodeCoord, u64, u32, usize)>,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrive { router: u32, vc: u16, flit: Flit },
    Credit { router: u32, slot: u16, free: bool },
    Eject { router: u32, packet: u32, kind: FlitKind, hops: u32 },
}

/// A slab with stable indices and a free list.
#[derive(Debug, Clone)]
struct Slab<T> {
    items: Vec<Option<T>>,
    free: Vec<u32>,
    live: usize,
}

impl<T> Default for Slab<T> {
    fn default() -> Self {
        Slab {
            items: Vec::new(),
            free: Vec::new(),
            live: 0,
        }
    }
}

impl<T> Slab<T> {
    fn insert(&mut self, v: T) -> u32 {
        self.live += 1;
        if let Some(i) = self.free.pop() {
            self.items[i as usize] = Some(v);
            i
        } else {
            self.items.push(Some(v));
            (self.items.len() - 1) as u32
        }
    }

    fn remove(&mut self, i: u32) -> T {
        self.live -= 1;
        self.free.push(i);
        self.items[i as usize].take().expect("slab slot in use")
    }

    fn get(&self, i: u32) -> &T {
        self.items[i as usize].as_ref().expect("slab slot in use")
    }

    fn get_mut(&mut self, i: u32) -> &mut T {
        self.items[i as usize].as_mut().expect("slab slot in use")
    }
}

/// Everything a finished run hands to the statistics layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub records: Vec<DeliveryRecord>,
    pub counters: EnergyCounters,
    pub totals: RunTotals,
}

/// Live simulator state. [`simulate`] drives it over a whole workload; the
/// step-level methods exist for tests and tools.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SimConfig,
    mesh: MeshConfig,
    v: usize,
    now: u64,
    routers: Vec<Router>,
    nis: Vec<Ni>,
    packets: Slab<InFlight>,
    messages: Slab<Message>,
    wheel: Vec<Vec<Event>>,
    spare: Vec<Event>,
    next_message: u64,
    pending_measured: usize,
    records: Vec<DeliveryRecord>,
    counters: EnergyCounters,
    totals: RunTotals,
}

impl Simulator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mesh = cfg.mesh;
        let v = cfg.vcs_per_port;
        let routers = (0..mesh.node_count())
            .map(|i| {
                let coord = mesh.from_row_major(i);
                let neighbors = Direction::ALL.map(|d| mesh.neighbor(coord, d).map(|n| mesh.row_major(n)));
                Router {
                    coord,
                    neighbors,
                    vcs: vec![
                        InputVc {
                            buf: VecDeque::with_capacity(cfg.buffer_depth),
                            route: None,
                            out_vc: None,
                            claimed: false,
                            last_move: 0,
                        };
                        PORTS * v
                    ],
                    credits: vec![cfg.buffer_depth as u16; 4 * v],
                    reserved: vec![false; 4 * v],
                    buffered: 0,
                    rr: 0,
                }
            })
            .collect();
        Ok(Simulator {
            cfg: cfg.clone(),
            mesh,
            v,
            now: 0,
            routers,
            nis: vec![Ni::default(); mesh.node_count()],
            packets: Slab::default(),
            messages: Slab::default(),
            wheel: vec![Vec::new(); cfg.link_latency as usize + 1],
            spare: Vec::new(),
            next_message: 0,
            pending_measured: 0,
            records: Vec::new(),
            counters: EnergyCounters::default(),
            totals: RunTotals::default(),
        })
    }

    pub fn cycle(&self) -> u64 {
        self.now
    }

    /// Packets still inside NIs or the network.
    pub fn packets_in_flight(&self) -> usize {
        self.packets.live
    }

    /// Measured messages with deliveries outstanding.
    pub fn pending_measured(&self) -> usize {
        self.pending_measured
    }

    fn schedule(&mut self, delay: u64, e: Event) {
        let len = self.wheel.len() as u64;
        self.wheel[((self.now + delay) % len) as usize].push(e);
    }

    /// Plans `ev` and queues its packets at the source NI. Returns `false`
    /// when the message was dropped because the source queue is full.
    pub fn inject(&mut self, ev: &TraceEvent, measured: bool) -> Result<bool> {
        let mesh = self.mesh;
        let (src, dests) = ev.coords(&mesh)?;
        // Every plan has at least one entry, so a full queue drops the
        // message without planning it.
        if self.nis[mesh.row_major(src)].queue.len() >= self.cfg.source_queue_limit {
            self.count_message(measured, true);
            return Ok(false);
        }
        let plan = routing::plan(self.cfg.planner, &mesh, &dests, src, self.cfg.plan_options())?;
        self.inject_plan(&plan, ev.cycle, measured)
    }

    /// Queues the packets of an already computed plan, generated at cycle
    /// `generated`, under the same drop rule as [`inject`](Self::inject).
    pub fn inject_plan(&mut self, plan: &RoutePlan, generated: u64, measured: bool) -> Result<bool> {
        let mesh = self.mesh;
        if plan.mesh != mesh {
            return Err(Error::config(format!("plan is for {}, simulator runs {mesh}", plan.mesh)));
        }
        if plan.entries.is_empty() {
            return Err(Error::config("plan has no entries"));
        }
        let s = mesh.row_major(plan.source);
        if self.nis[s].queue.len() + plan.entries.len() > self.cfg.source_queue_limit {
            self.count_message(measured, true);
            return Ok(false);
        }
        self.count_message(measured, false);
        let dest_count = plan.destinations().count();
        let msg = self.messages.insert(Message {
            id: self.next_message,
            generated,
            source: plan.source,
            dest_count,
            remaining: dest_count,
            measured,
        });
        self.next_message += 1;
        if measured {
            self.pending_measured += 1;
        }
        let approach = self.cfg.approach_routing();
        for e in &plan.entries {
            let packet = entry_packet(&mesh, plan, e, approach);
            let id = self.packets.insert(InFlight {
                packet,
                msg,
                born: self.now,
                heads: Vec::new(),
            });
            self.nis[s].queue.push_back(id);
        }
        Ok(true)
    }

    fn count_message(&mut self, measured: bool, dropped: bool) {
        self.totals.generated_messages += 1;
        self.totals.measured_messages += u64::from(measured);
        if dropped {
            self.totals.dropped_messages += 1;
            self.totals.dropped_measured += u64::from(measured);
        }
    }

    /// Phase 1.
    fn deliver_events(&mut self) {
        let slot = (self.now % self.wheel.len() as u64) as usize;
        let mut events = std::mem::replace(&mut self.wheel[slot], std::mem::take(&mut self.spare));
        for e in events.drain(..) {
            match e {
                Event::Arrive { router, vc, flit } => {
                    let measured = self.is_measured(flit.packet);
                    let r = &mut self.routers[router as usize];
                    let ivc = &mut r.vcs[vc as usize];
                    ivc.buf.push_back(flit);
                    debug_assert!(ivc.buf.len() <= self.cfg.buffer_depth, "credit violation");
                    r.buffered += 1;
                    if measured {
                        self.counters.buffer_writes += 1;
                    }
                }
                Event::Credit { router, slot, free } => {
                    let r = &mut self.routers[router as usize];
                    r.credits[slot as usize] += 1;
                    debug_assert!(r.credits[slot as usize] as usize <= self.cfg.buffer_depth);
                    if free {
                        r.reserved[slot as usize] = false;
                    }
                }
                Event::Eject {
                    router,
                    packet,
                    kind,
                    hops,
                } => self.eject(router as usize, packet, kind, hops),
            }
        }
        self.spare = events;
    }

    fn is_measured(&self, packet: u32) -> bool {
        self.messages.get(self.packets.get(packet).msg).measured
    }

    fn eject(&mut self, router: usize, p: u32, kind: FlitKind, hops: u32) {
        let node = self.routers[router].coord;
        let (is_final, msg) = {
            let f = self.packets.get(p);
            (
                f.packet.target().is_none() && f.packet.chain.last() == Some(&node),
                f.msg,
            )
        };
        if is_final {
            self.totals.flits_retired += 1;
        }
        let size = self.cfg.packet_size;
        let f = self.packets.get_mut(p);
        if kind == FlitKind::Head {
            f.heads.push((node, self.now, hops, 1));
            return;
        }
        let i = f
            .heads
            .iter()
            .position(|h| h.0 == node)
            .expect("flit ejected ahead of its head");
        f.heads[i].3 += 1;
        match kind {
            FlitKind::Head => unreachable!(),
            FlitKind::Body => assert!(f.heads[i].3 < size, "body flit after the packet end"),
            FlitKind::Tail => {
                assert_eq!(f.heads[i].3, size, "tail ejected before the body");
                let (_, head, hops, _) = f.heads.swap_remove(i);
                let m = self.messages.get_mut(msg);
                if m.measured {
                    self.records.push(DeliveryRecord {
                        message: m.id,
                        source: m.source,
                        destination: node,
                        dest_count: m.dest_count,
                        generated: m.generated,
                        head,
                        tail: self.now,
                        hops,
                    });
                }
                m.remaining -= 1;
                if m.remaining == 0 {
                    if m.measured {
                        self.pending_measured -= 1;
                        self.totals.completed_measured += 1;
                    }
                    self.messages.remove(msg);
                }
                if is_final {
                    let done = self.packets.remove(p);
                    let children = replicate_at_representative(&self.mesh, &done.packet, node);
                    for child in children {
                        let id = self.packets.insert(InFlight {
                            packet: child,
                            msg,
                            born: self.now,
                            heads: Vec::new(),
                        });
                        self.nis[router].queue.push_back(id);
                    }
                }
            }
        }
    }

    /// Phase 3.
    fn switch_all(&mut self) -> Result<()> {
        for r in 0..self.routers.len() {
            if self.routers[r].buffered > 0 {
                self.switch_router(r)?;
            }
        }
        Ok(())
    }

    fn switch_router(&mut self, r: usize) -> Result<()> {
        let v = self.v;
        let n = PORTS * v;
        let now = self.now;
        let (rl, ll) = (self.cfg.router_latency, self.cfg.link_latency);
        let mut in_used = [false; PORTS];
        let mut out_used = [false; PORTS];
        let start = self.routers[r].rr;
        self.routers[r].rr = (start + 1) % n;
        let here = self.routers[r].coord;
        // Oldest packet first, then round robin from the rotating start.
        let mut order: ArrayVec<(u64, usize, usize), { PORTS * 16 }> = ArrayVec::new();
        for (i, vc) in self.routers[r].vcs.iter().enumerate() {
            if let Some(f) = vc.buf.front() {
                if f.ready <= now {
                    order.push((self.packets.get(f.packet).born, (i + n - start) % n, i));
                }
            }
        }
        order.sort_unstable();
        for &(_, _, i) in &order {
            let port = i / v;
            if in_used[port] {
                continue;
            }
            let front = *self.routers[r].vcs[i].buf.front().expect("non-empty above");
            if self.routers[r].vcs[i].route.is_none() {
                debug_assert_eq!(front.kind, FlitKind::Head);
                let f = self.packets.get_mut(front.packet);
                let d = copy_and_forward(&self.mesh, &mut f.packet, here);
                let onward = if d.forward {
                    Some(route_compute(&self.mesh, &f.packet, here)?)
                } else {
                    None
                };
                self.routers[r].vcs[i].route = Some(Route {
                    local: d.deliver_local,
                    onward,
                });
            }
            let route = self.routers[r].vcs[i].route.expect("route computed above");
            if route.local && out_used[LOCAL] {
                continue;
            }
            let mut out_vc = None;
            if let Some((dir, class)) = route.onward {
                let di = dir.index();
                if out_used[di] {
                    continue;
                }
                let router = &mut self.routers[r];
                let ov = match router.vcs[i].out_vc {
                    Some(ov) => ov,
                    None => {
                        let base = di * v;
                        let Some(ov) = self.cfg.class_range(class).find(|&c| !router.reserved[base + c]) else {
                            continue;
                        };
                        router.reserved[base + ov] = true;
                        router.vcs[i].out_vc = Some(ov);
                        ov
                    }
                };
                if router.credits[di * v + ov] == 0 {
                    continue;
                }
                out_vc = Some((dir, ov));
            }

            // Switch traversal.
            let measured = self.is_measured(front.packet);
            let router = &mut self.routers[r];
            let vc = &mut router.vcs[i];
            vc.buf.pop_front();
            vc.last_move = now;
            if front.kind == FlitKind::Tail {
                vc.route = None;
                vc.out_vc = None;
                vc.claimed = false;
            }
            router.buffered -= 1;
            in_used[port] = true;
            let hops = if route.local {
                self.packets.get(front.packet).packet.hops
            } else {
                0
            };
            if let Some((dir, ov)) = out_vc {
                let di = dir.index();
                debug_assert!(
                    self.cfg.all_turns
                        || self.cfg.class_range(self.mesh.channel_subnet(here, self.mesh.neighbor(here, dir).unwrap()).unwrap()).contains(&ov),
                    "VC class does not match the channel subnet"
                );
                out_used[di] = true;
                router.credits[di * v + ov] -= 1;
                let next = router.neighbors[di].expect("routes never leave the mesh");
                let slot = dir.opposite().index() * v + ov;
                self.schedule(
                    ll,
                    Event::Arrive {
                        router: next as u32,
                        vc: slot as u16,
                        flit: Flit {
                            ready: now + ll + rl,
                            ..front
                        },
                    },
                );
                if front.kind == FlitKind::Head {
                    self.packets.get_mut(front.packet).packet.hops += 1;
                }
                if measured {
                    self.counters.link_traversals += 1;
                    self.counters.crossbar_traversals += 1;
                    if front.kind == FlitKind::Head {
                        self.totals.measured_hops += 1;
                    }
                }
            }
            if route.local {
                out_used[LOCAL] = true;
                self.schedule(
                    ll,
                    Event::Eject {
                        router: r as u32,
                        packet: front.packet,
                        kind: front.kind,
                        hops,
                    },
                );
                if measured {
                    self.counters.crossbar_traversals += 1;
                }
            }
            if measured {
                self.counters.buffer_reads += 1;
            }
            if port != LOCAL {
                let up = self.routers[r].neighbors[port].expect("flits only arrive from neighbors");
                let back = Direction::ALL[port].opposite().index();
                self.schedule(
                    ll,
                    Event::Credit {
                        router: up as u32,
                        slot: (back * v + i % v) as u16,
                        free: front.kind == FlitKind::Tail,
                    },
                );
            }
        }
        Ok(())
    }

    /// Phase 4.
    fn inject_flits(&mut self) {
        let v = self.v;
        let depth = self.cfg.buffer_depth;
        let size = self.cfg.packet_size;
        for node in 0..self.nis.len() {
            if self.nis[node].current.is_none() {
                let Some(&p) = self.nis[node].queue.front() else {
                    continue;
                };
                let router = &mut self.routers[node];
                let free = (0..v).find(|&c| {
                    let vc = &router.vcs[LOCAL * v + c];
                    !vc.claimed && vc.buf.is_empty()
                });
                let Some(c) = free else { continue };
                router.vcs[LOCAL * v + c].claimed = true;
                self.nis[node].queue.pop_front();
                self.nis[node].current = Some((p, c, 0));
            }
            let (p, c, sent) = self.nis[node].current.expect("set above");
            let measured = self.is_measured(p);
            let router = &mut self.routers[node];
            let vc = &mut router.vcs[LOCAL * v + c];
            if vc.buf.len() >= depth {
                continue;
            }
            let kind = FlitKind::at(sent, size);
            vc.buf.push_back(Flit {
                packet: p,
                kind,
                ready: self.now + self.cfg.router_latency,
            });
            router.buffered += 1;
            self.totals.flits_injected += 1;
            if measured {
                self.counters.buffer_writes += 1;
            }
            self.nis[node].current = (sent + 1 < size).then_some((p, c, sent + 1));
        }
    }

    /// Runs phases 1, 3 and 4 of the current cycle (phase 2 is
    /// [`inject`](Self::inject), called by the driver in between) and
    /// advances the clock.
    pub fn finish_cycle(&mut self) -> Result<()> {
        self.switch_all()?;
        self.inject_flits();
        self.now += 1;
        Ok(())
    }

    /// Phase 1 of the current cycle.
    pub fn begin_cycle(&mut self) {
        self.deliver_events();
    }

    /// Reports the first virtual channel whose front flit has been ready but
    /// unable to move for at least the watchdog threshold.
    pub fn watchdog_scan(&self) -> std::result::Result<(), Box<DeadlockReport>> {
        let threshold = self.cfg.watchdog_threshold;
        for (r, router) in self.routers.iter().enumerate() {
            if router.buffered == 0 {
                continue;
            }
            for (i, vc) in router.vcs.iter().enumerate() {
                let Some(front) = vc.buf.front() else {
                    continue;
                };
                let since = vc.last_move.max(front.ready);
                if self.now > since && self.now - since >= threshold {
                    return Err(Box::new(self.report(r, i, self.now - since)));
                }
            }
        }
        Ok(())
    }

    fn location(&self, r: usize, i: usize) -> VcLocation {
        let vc = &self.routers[r].vcs[i];
        VcLocation {
            node: self.routers[r].coord,
            port: Port::from_index(i / self.v),
            vc: i % self.v,
            message: vc
                .buf
                .front()
                .map(|f| self.messages.get(self.packets.get(f.packet).msg).id),
        }
    }

    /// The downstream VC the front flit of `(r, i)` is waiting for.
    fn blocked_on(&self, r: usize, i: usize) -> Option<(usize, usize)> {
        let vc = &self.routers[r].vcs[i];
        vc.buf.front()?;
        let (dir, class) = vc.route?.onward?;
        let next = self.routers[r].neighbors[dir.index()]?;
        let ov = vc.out_vc.unwrap_or_else(|| self.cfg.class_range(class).start);
        Some((next, dir.opposite().index() * self.v + ov))
    }

    fn report(&self, r: usize, i: usize, stalled_for: u64) -> DeadlockReport {
        let mut seen = vec![(r, i)];
        let mut wait_for = Vec::new();
        let mut cyclic = false;
        let mut cur = (r, i);
        while let Some(next) = self.blocked_on(cur.0, cur.1) {
            wait_for.push(self.location(next.0, next.1));
            if seen.contains(&next) {
                cyclic = true;
                break;
            }
            seen.push(next);
            cur = next;
        }
        DeadlockReport {
            cycle: self.now,
            stalled_for,
            stalled: self.location(r, i),
            wait_for,
            cyclic,
        }
    }

    /// Ends a step-driven run; it counts as drained when no measured
    /// message is outstanding.
    pub fn into_outcome(self) -> SimOutcome {
        let drained = self.pending_measured == 0;
        self.finish(drained)
    }

    fn finish(mut self, drained: bool) -> SimOutcome {
        self.totals.cycles = self.now;
        self.totals.drained = drained;
        self.totals.incomplete_measured = self.pending_measured as u64;
        self.totals.packets_in_flight = self.packets.live as u64;
        self.totals.measure_cycles = self.cfg.measure;
        self.totals.nodes = self.mesh.node_count() as u64;
        SimOutcome {
            records: self.records,
            counters: self.counters,
            totals: self.totals,
        }
    }
}

/// Runs warmup, measurement and drain over `workload` (events sorted by
/// cycle). Messages generated during the measurement window are measured;
/// generation stops when the window closes and the run ends once every
/// measured message is delivered or the drain budget is spent.
pub fn simulate<I>(cfg: &SimConfig, workload: I) -> Result<SimOutcome>
where
    I: IntoIterator<Item = TraceEvent>,
{
    let mut sim = Simulator::new(cfg)?;
    let mut events = workload.into_iter().peekable();
    let gen_end = cfg.warmup + cfg.measure;
    let hard_stop = gen_end + cfg.drain;
    let scan = (cfg.watchdog_threshold / 4).max(1);
    let mut last_cycle = 0;
    loop {
        let now = sim.now;
        sim.begin_cycle();
        if now < gen_end {
            while let Some(ev) = events.next_if(|e| e.cycle <= now) {
                if ev.cycle < last_cycle {
                    return Err(Error::config(format!(
                        "workload events out of order: cycle {} after {}",
                        ev.cycle, last_cycle
                    )));
                }
                last_cycle = ev.cycle;
                sim.inject(&ev, now >= cfg.warmup)?;
            }
        }
        sim.finish_cycle()?;
        if sim.now % scan == 0 {
            sim.watchdog_scan().map_err(Error::Deadlock)?;
        }
        let generation_over = sim.now >= gen_end || (events.peek().is_none() && sim.now >= cfg.warmup);
        if generation_over && sim.pending_measured == 0 && (sim.now >= gen_end || sim.packets.live == 0) {
            return Ok(sim.finish(true));
        }
        if sim.now >= hard_stop {
            let drained = sim.pending_measured == 0;
            return Ok(sim.finish(drained));
        }
    }
}

#[cfg(test)]
mod tests;
