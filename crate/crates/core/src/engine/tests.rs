use proptest::prelude::*;

use super::*;
use crate::routing::RouteMode;
use crate::workload::{generate_synthetic, TrafficConfig};

fn c(x: usize, y: usize) -> NodeCoord {
    NodeCoord::new(x, y)
}

fn mesh(w: usize, h: usize) -> MeshConfig {
    MeshConfig::new(w, h).unwrap()
}

fn small(planner: PlannerKind) -> SimConfig {
    SimConfig {
        mesh: mesh(4, 4),
        planner,
        warmup: 0,
        measure: 1,
        drain: 1_000,
        ..SimConfig::default()
    }
}

fn event(m: &MeshConfig, cycle: u64, src: NodeCoord, dsts: &[NodeCoord]) -> TraceEvent {
    TraceEvent {
        cycle,
        src: m.label(src).0,
        dsts: dsts.iter().map(|&d| m.label(d).0).collect(),
    }
}

/// Tail cycle per destination label.
fn tails(out: &SimOutcome, m: &MeshConfig) -> Vec<(usize, u64)> {
    let mut v: Vec<_> = out.records.iter().map(|r| (m.label(r.destination).0, r.tail)).collect();
    v.sort();
    v
}

#[test]
fn no_traffic() {
    let out = simulate(&small(PlannerKind::Dpm), Vec::new()).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.counters, EnergyCounters::default());
    assert_eq!(out.totals.generated_messages, 0);
    assert!(out.totals.drained);
}

#[test]
fn unicast_golden() {
    let cfg = small(PlannerKind::Mu);
    let m = cfg.mesh;
    let out = simulate(&cfg, vec![event(&m, 0, c(0, 0), &[c(3, 0)])]).unwrap();
    assert_eq!(out.records.len(), 1);
    let r = out.records[0];
    assert_eq!((r.head, r.tail, r.hops), (8, 11, 3));
    assert_eq!(out.totals.flits_injected, 4);
    assert_eq!(out.totals.flits_retired, 4);
    assert_eq!(
        out.counters,
        EnergyCounters {
            link_traversals: 12,
            buffer_writes: 16,
            buffer_reads: 16,
            crossbar_traversals: 16,
        }
    );
}

#[test]
fn unicast_golden_shifted() {
    let cfg = small(PlannerKind::Mu);
    let m = cfg.mesh;
    let out = simulate(&cfg, vec![event(&m, 0, c(0, 0), &[c(3, 0)])]).unwrap();
    let mut late = cfg.clone();
    late.measure = 100;
    let shifted = simulate(&late, vec![event(&m, 37, c(0, 0), &[c(3, 0)])]).unwrap();
    assert_eq!(shifted.records[0].tail - 37, out.records[0].tail);
}

#[test]
fn dual_path_zero_load() {
    let cfg = small(PlannerKind::Dp);
    let m = cfg.mesh;
    let dsts = [10, 12, 0].map(|l| m.coord(crate::topology::NodeLabel(l)));
    let out = simulate(&cfg, vec![event(&m, 0, m.coord(crate::topology::NodeLabel(6)), &dsts)]).unwrap();
    assert_eq!(tails(&out, &m), [(0, 13), (10, 9), (12, 13)]);
}

#[test]
fn representative_zero_load() {
    let cfg = small(PlannerKind::Dpm);
    let m = cfg.mesh;
    let diag = [c(0, 0), c(1, 1), c(2, 2), c(3, 3)];
    let plan = routing::plan(PlannerKind::Dpm, &m, &diag, c(0, 3), cfg.plan_options()).unwrap();
    assert_eq!(plan.entries.len(), 1);
    assert_eq!(plan.entries[0].representative, Some(c(0, 0)));
    assert_eq!(plan.entries[0].mode, RouteMode::DualPath);
    let out = simulate(&cfg, vec![event(&m, 0, c(0, 3), &diag)]).unwrap();
    assert_eq!(tails(&out, &m), [(0, 11), (6, 20), (10, 24), (12, 28)]);
    let hops: Vec<u32> = {
        let mut v: Vec<_> = out.records.iter().map(|r| (m.label(r.destination).0, r.hops)).collect();
        v.sort();
        v.into_iter().map(|x| x.1).collect()
    };
    assert_eq!(hops, [3, 5, 7, 9]);
}

#[test]
fn routing_decisions() {
    let m = mesh(4, 4);
    let l = |i| m.coord(crate::topology::NodeLabel(i));
    let p = Packet::new(&m, l(0), vec![l(5)], LegRouting::Hamiltonian, RouteMode::DualPath, None, 0);
    assert_eq!(route_compute(&m, &p, l(0)).unwrap(), (Direction::East, Subnet::High));
    let p = Packet::new(&m, l(6), vec![l(0)], LegRouting::Hamiltonian, RouteMode::DualPath, None, 0);
    assert_eq!(route_compute(&m, &p, l(6)).unwrap(), (Direction::South, Subnet::Low));
    let p = Packet::new(&m, l(0), vec![l(5)], LegRouting::Xy, RouteMode::DualPath, None, 0);
    assert_eq!(route_compute(&m, &p, l(0)).unwrap(), (Direction::East, Subnet::High));
    assert!(route_compute(&m, &p, l(5)).is_err());
}

#[test]
fn config_validation() {
    let ok = SimConfig::default();
    ok.validate().unwrap();
    for bad in [
        SimConfig { vcs_high: 3, ..ok.clone() },
        SimConfig { vcs_high: 0, vcs_low: 4, ..ok.clone() },
        SimConfig { buffer_depth: 0, ..ok.clone() },
        SimConfig { packet_size: 1, ..ok.clone() },
        SimConfig { link_latency: 0, ..ok.clone() },
        SimConfig { watchdog_threshold: 0, ..ok.clone() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
        assert!(Simulator::new(&bad).is_err());
    }
}

#[test]
fn idle_watchdog_is_quiet() {
    let mut sim = Simulator::new(&small(PlannerKind::Dpm)).unwrap();
    for _ in 0..50_000 {
        sim.begin_cycle();
        sim.finish_cycle().unwrap();
    }
    assert!(sim.watchdog_scan().is_ok());
}

fn pinwheel(all_turns: bool) -> (SimConfig, Vec<TraceEvent>) {
    let cfg = SimConfig {
        mesh: mesh(3, 3),
        all_turns,
        vcs_per_port: 2,
        vcs_high: 1,
        vcs_low: 1,
        buffer_depth: 2,
        packet_size: 8,
        planner: PlannerKind::Mu,
        watchdog_threshold: 200,
        warmup: 0,
        measure: 1,
        drain: 5_000,
        ..SimConfig::default()
    };
    let m = cfg.mesh;
    let evs = [
        (c(0, 0), c(1, 1)),
        (c(1, 0), c(0, 1)),
        (c(1, 1), c(0, 0)),
        (c(0, 1), c(1, 0)),
    ]
    .iter()
    .map(|&(s, d)| event(&m, 0, s, &[d]))
    .collect();
    (cfg, evs)
}

#[test]
fn all_turns_pinwheel_deadlocks() {
    let (cfg, evs) = pinwheel(true);
    match simulate(&cfg, evs) {
        Err(Error::Deadlock(report)) => {
            assert!(report.cyclic, "{report}");
            assert!(report.stalled_for >= 200);
            assert!(report.wait_for.len() >= 4, "{report}");
        }
        other => panic!("expected a deadlock, got {other:?}"),
    }
}

#[test]
fn hamiltonian_pinwheel_completes() {
    let (cfg, evs) = pinwheel(false);
    let out = simulate(&cfg, evs).unwrap();
    assert_eq!(out.records.len(), 4);
    assert!(out.totals.drained);
}

fn random_run(planner: PlannerKind, rate: f64, seed: u64) -> SimOutcome {
    let cfg = SimConfig {
        mesh: mesh(5, 4),
        planner,
        warmup: 200,
        measure: 2_000,
        drain: 50_000,
        seed,
        ..SimConfig::default()
    };
    let traffic = TrafficConfig {
        injection_rate: rate,
        multicast_fraction: 0.5,
        dest_range: [2, 8],
    };
    let events = generate_synthetic(&traffic, &cfg.mesh, seed, cfg.warmup + cfg.measure).unwrap();
    simulate(&cfg, events).unwrap()
}

#[test]
fn flit_conservation() {
    for p in PlannerKind::ALL {
        let out = random_run(p, 0.02, 3);
        assert!(out.totals.drained, "{p:?}");
        assert_eq!(out.totals.packets_in_flight, 0, "{p:?}");
        assert_eq!(out.totals.flits_injected, out.totals.flits_retired, "{p:?}");
        assert_eq!(out.totals.incomplete_measured, 0);
        assert_eq!(
            out.totals.completed_measured + out.totals.dropped_measured,
            out.totals.measured_messages
        );
    }
}

#[test]
fn deterministic() {
    let a = random_run(PlannerKind::Dpm, 0.03, 11);
    let b = random_run(PlannerKind::Dpm, 0.03, 11);
    assert_eq!(a, b);
}

#[test]
fn source_queue_limit_drops() {
    let cfg = SimConfig {
        source_queue_limit: 2,
        ..small(PlannerKind::Mu)
    };
    let m = cfg.mesh;
    let evs: Vec<_> = (0..5).map(|_| event(&m, 0, c(0, 0), &[c(3, 3)])).collect();
    let out = simulate(&cfg, evs).unwrap();
    assert!(out.totals.dropped_messages > 0);
    assert_eq!(out.records.len() as u64, 5 - out.totals.dropped_messages);
}

#[test]
fn out_of_order_workload_is_rejected() {
    let cfg = SimConfig {
        measure: 100,
        ..small(PlannerKind::Mu)
    };
    let m = cfg.mesh;
    let evs = vec![event(&m, 5, c(0, 0), &[c(1, 0)]), event(&m, 2, c(0, 0), &[c(1, 0)])];
    assert!(matches!(simulate(&cfg, evs), Err(Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_measured_message_is_delivered(seed in 0u64..10_000, rate in 0.001f64..0.05, p in 0usize..5) {
        let planner = PlannerKind::ALL[p];
        let out = random_run(planner, rate, seed);
        prop_assert!(out.totals.drained);
        prop_assert_eq!(out.totals.flits_injected, out.totals.flits_retired);
        let h = 2;
        for r in &out.records {
            prop_assert!(r.generated <= r.head && r.head < r.tail);
            prop_assert!(r.hops >= r.source.manhattan(r.destination));
            prop_assert!(r.tail - r.generated >= (u64::from(r.hops) + 1) * h + 3);
        }
    }
}
