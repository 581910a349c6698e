//! Synthetic uniform-random traffic and line-delimited JSON traces.

use std::collections::{HashSet, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{MeshConfig, NodeCoord, NodeLabel};

/// Table of the four destination ranges used by the experiments.
pub const DEST_RANGES: [[usize; 2]; 4] = [[2, 5], [4, 8], [7, 10], [10, 16]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Messages per node per cycle.
    pub injection_rate: f64,
    pub multicast_fraction: f64,
    /// Inclusive bounds on the multicast destination count.
    pub dest_range: [usize; 2],
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            injection_rate: 0.001,
            multicast_fraction: 0.1,
            dest_range: [2, 5],
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self, mesh: &MeshConfig) -> Result<()> {
        if !(0.0..=1.0).contains(&self.injection_rate) {
            return Err(Error::config(format!("injection_rate {} outside [0, 1]", self.injection_rate)));
        }
        if !(0.0..=1.0).contains(&self.multicast_fraction) {
            return Err(Error::config(format!(
                "multicast_fraction {} outside [0, 1]",
                self.multicast_fraction
            )));
        }
        let [lo, hi] = self.dest_range;
        if lo < 1 || lo > hi {
            return Err(Error::config(format!("dest_range [{lo}, {hi}] is not a valid interval")));
        }
        if hi >= mesh.node_count() {
            return Err(Error::config(format!(
                "dest_range max {hi} must be below the node count {}",
                mesh.node_count()
            )));
        }
        Ok(())
    }
}

/// One message: a source label and its destination labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub cycle: u64,
    pub src: usize,
    pub dsts: Vec<usize>,
}

impl TraceEvent {
    pub fn validate(&self, mesh: &MeshConfig) -> Result<()> {
        self.coords(mesh).map(drop)
    }

    /// Source and destinations as coordinates, after checking bounds,
    /// distinctness and that the source is not a destination.
    pub fn coords(&self, mesh: &MeshConfig) -> Result<(NodeCoord, Vec<NodeCoord>)> {
        let src = mesh.coord_of(NodeLabel(self.src))?;
        if self.dsts.is_empty() {
            return Err(Error::EmptyDestinations);
        }
        let mut seen = HashSet::with_capacity(self.dsts.len());
        let mut out = Vec::with_capacity(self.dsts.len());
        for &d in &self.dsts {
            let c = mesh.coord_of(NodeLabel(d))?;
            if d == self.src {
                return Err(Error::SourceIsDestination(c));
            }
            if !seen.insert(d) {
                return Err(Error::DuplicateDestination(c));
            }
            out.push(c);
        }
        Ok((src, out))
    }
}

/// Lazy Bernoulli traffic stream. Each cycle every node, in label order,
/// generates a message with probability `injection_rate`.
#[derive(Debug, Clone)]
pub struct SyntheticTraffic {
    cfg: TrafficConfig,
    nodes: usize,
    horizon: u64,
    cycle: u64,
    rng: ChaCha8Rng,
    pending: VecDeque<TraceEvent>,
}

impl SyntheticTraffic {
    fn fill(&mut self) {
        while self.pending.is_empty() && self.cycle < self.horizon {
            for src in 0..self.nodes {
                if !self.rng.gen_bool(self.cfg.injection_rate) {
                    continue;
                }
                let count = if self.rng.gen_bool(self.cfg.multicast_fraction) {
                    self.rng.gen_range(self.cfg.dest_range[0]..=self.cfg.dest_range[1])
                } else {
                    1
                };
                // Sample among the other nodes, then skip over the source.
                let dsts = index::sample(&mut self.rng, self.nodes - 1, count)
                    .into_iter()
                    .map(|d| if d >= src { d + 1 } else { d })
                    .collect();
                self.pending.push_back(TraceEvent {
                    cycle: self.cycle,
                    src,
                    dsts,
                });
            }
            self.cycle += 1;
        }
    }
}

impl Iterator for SyntheticTraffic {
    type Item = TraceEvent;

    fn next(&mut self) -> Option<TraceEvent> {
        self.fill();
        self.pending.pop_front()
    }
}

/// Events in cycles `0..horizon`, reproducible per seed.
pub fn generate_synthetic(cfg: &TrafficConfig, mesh: &MeshConfig, seed: u64, horizon: u64) -> Result<SyntheticTraffic> {
    cfg.validate(mesh)?;
    Ok(SyntheticTraffic {
        cfg: *cfg,
        nodes: mesh.node_count(),
        horizon,
        cycle: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
        pending: VecDeque::new(),
    })
}

/// Parses a trace, checks every event against `mesh` and sorts by cycle
/// (stable, so same-cycle events keep file order). Blank lines are skipped.
pub fn parse_trace<R: Read>(reader: R, mesh: &MeshConfig) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(&line).map_err(|e| Error::Trace {
            line: n,
            message: e.to_string(),
        })?;
        ev.validate(mesh).map_err(|e| Error::Trace {
            line: n,
            message: e.to_string(),
        })?;
        events.push(ev);
    }
    events.sort_by_key(|e| e.cycle);
    Ok(events)
}

pub fn load_trace(path: impl AsRef<Path>, mesh: &MeshConfig) -> Result<Vec<TraceEvent>> {
    parse_trace(std::fs::File::open(path)?, mesh)
}

pub fn write_trace<W: Write>(mut w: W, events: impl IntoIterator<Item = TraceEvent>) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, &e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh8() -> MeshConfig {
        MeshConfig::new(8, 8).unwrap()
    }

    fn traffic(rate: f64, fraction: f64, range: [usize; 2]) -> TrafficConfig {
        TrafficConfig {
            injection_rate: rate,
            multicast_fraction: fraction,
            dest_range: range,
        }
    }

    #[test]
    fn zero_rate_is_empty() {
        let s = generate_synthetic(&traffic(0.0, 0.1, [2, 5]), &mesh8(), 1, 10_000).unwrap();
        assert_eq!(s.count(), 0);
    }

    #[test]
    fn forced_multicast_count() {
        let m = mesh8();
        for e in generate_synthetic(&traffic(0.05, 1.0, [3, 3]), &m, 9, 2_000).unwrap() {
            assert_eq!(e.dsts.len(), 3);
            e.validate(&m).unwrap();
        }
    }

    #[test]
    fn config_validation() {
        let m = mesh8();
        assert!(traffic(0.01, 0.1, [10, 64]).validate(&m).is_err());
        assert!(traffic(0.01, 0.1, [10, 63]).validate(&m).is_ok());
        assert!(traffic(0.01, 0.1, [0, 3]).validate(&m).is_err());
        assert!(traffic(0.01, 1.5, [2, 3]).validate(&m).is_err());
        assert!(traffic(-0.1, 0.1, [2, 3]).validate(&m).is_err());
        assert!(generate_synthetic(&traffic(0.01, 0.1, [10, 64]), &m, 0, 10).is_err());
    }

    #[test]
    fn seed_determinism() {
        let m = mesh8();
        let cfg = traffic(0.02, 0.3, [4, 8]);
        let a: Vec<_> = generate_synthetic(&cfg, &m, 42, 5_000).unwrap().collect();
        let b: Vec<_> = generate_synthetic(&cfg, &m, 42, 5_000).unwrap().collect();
        let c: Vec<_> = generate_synthetic(&cfg, &m, 43, 5_000).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0].cycle <= w[1].cycle));
    }

    #[test]
    fn stream_statistics() {
        let m = mesh8();
        let cfg = traffic(0.01, 0.1, [10, 16]);
        let events: Vec<_> = generate_synthetic(&cfg, &m, 7, 100_000).unwrap().collect();
        let node_cycles = 64.0 * 100_000.0;
        let rate = events.len() as f64 / node_cycles;
        assert!((rate - 0.01).abs() < 0.01 * 0.01, "rate {rate}");

        let multi: Vec<_> = events.iter().filter(|e| e.dsts.len() > 1).collect();
        let share = multi.len() as f64 / events.len() as f64;
        assert!((share - 0.10).abs() <= 0.01, "multicast share {share}");

        // Chi-square over the 7 counts, 6 degrees of freedom; 22.46 is the
        // 0.999 quantile.
        let mut hist = [0usize; 7];
        for e in &multi {
            hist[e.dsts.len() - 10] += 1;
        }
        let expected = multi.len() as f64 / 7.0;
        let chi2: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 22.46, "chi-square {chi2}, histogram {hist:?}");

        for e in &events {
            assert!(!e.dsts.contains(&e.src));
        }
    }

    #[test]
    fn destinations_cover_every_other_node() {
        let m = MeshConfig::new(3, 3).unwrap();
        let mut hits = [[0usize; 9]; 9];
        for e in generate_synthetic(&traffic(0.2, 0.0, [1, 1]), &m, 3, 20_000).unwrap() {
            hits[e.src][e.dsts[0]] += 1;
        }
        for (s, row) in hits.iter().enumerate() {
            for (d, &n) in row.iter().enumerate() {
                assert_eq!(n == 0, s == d, "{s}->{d}: {n}");
            }
        }
    }

    #[test]
    fn trace_parsing() {
        let m = MeshConfig::new(4, 4).unwrap();
        assert!(parse_trace("".as_bytes(), &m).unwrap().is_empty());
        let one = parse_trace(r#"{"cycle":5,"src":0,"dsts":[9,13]}"#.as_bytes(), &m).unwrap();
        assert_eq!(one, vec![TraceEvent { cycle: 5, src: 0, dsts: vec![9, 13] }]);

        let text = "{\"cycle\":9,\"src\":1,\"dsts\":[2]}\n\n{\"cycle\":3,\"src\":4,\"dsts\":[5]}\n";
        let evs = parse_trace(text.as_bytes(), &m).unwrap();
        assert_eq!(evs.iter().map(|e| e.cycle).collect::<Vec<_>>(), [3, 9]);
    }

    #[test]
    fn trace_errors_carry_line_numbers() {
        let m = MeshConfig::new(4, 4).unwrap();
        let cases = [
            "{\"cycle\":1,\"src\":0,\"dsts\":[1]}\n{\"cycle\":2,\"src\":3,\"dsts\":[3,4]}",
            "{\"cycle\":1,\"src\":0,\"dsts\":[1]}\n{\"cycle\":2,\"src\":3,\"dsts\":[16]}",
            "{\"cycle\":1,\"src\":0,\"dsts\":[1]}\n{\"cycle\":2,\"src\":3,\"dsts\":[4,4]}",
            "{\"cycle\":1,\"src\":0,\"dsts\":[1]}\n{\"cycle\":2,\"src\":3,\"dsts\":[]}",
            "{\"cycle\":1,\"src\":0,\"dsts\":[1]}\nnot json",
            "{\"cycle\":1,\"src\":0,\"dsts\":[1]}\n{\"cycle\":2,\"src\":3,\"dsts\":[4],\"size\":2}",
        ];
        for text in cases {
            match parse_trace(text.as_bytes(), &m) {
                Err(Error::Trace { line, .. }) => assert_eq!(line, 2, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn trace_round_trip() {
        let m = mesh8();
        let events: Vec<_> = generate_synthetic(&traffic(0.01, 0.5, [2, 5]), &m, 5, 1_000).unwrap().collect();
        let mut buf = Vec::new();
        write_trace(&mut buf, events.clone()).unwrap();
        assert_eq!(parse_trace(buf.as_slice(), &m).unwrap(), events);
    }
}
