//! JSON run configuration, workload resolution and single-point runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{simulate, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{check_ladder, finalize, EnergyWeights, RunMeta, StatsReport};
use crate::routing::PlannerKind;
use crate::workload::{generate_synthetic, load_trace, TraceEvent, TrafficConfig};

/// Where a run's messages come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadSpec {
    Synthetic(TrafficConfig),
    /// Line-delimited JSON trace. Relative paths are resolved against the
    /// directory of the configuration file.
    Trace(PathBuf),
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec::Synthetic(TrafficConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub workload: WorkloadSpec,
    /// Injection-rate ladder for sweeps; synthetic workloads only.
    pub rates: Vec<f64>,
    /// Planners run by `sweep`. The first one is the comparison baseline.
    pub planners: Vec<PlannerKind>,
    pub output_dir: PathBuf,
    pub energy: EnergyWeights<f64>,
    /// Saturation is declared when latency exceeds this multiple of the
    /// latency at the lowest rate.
    pub saturation_factor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sim: SimConfig::default(),
            workload: WorkloadSpec::default(),
            rates: Vec::new(),
            planners: PlannerKind::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            energy: EnergyWeights::default(),
            saturation_factor: 3.0,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads and validates a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let mut cfg = RunConfig::from_json(&std::fs::read_to_string(path)?)?;
        if let WorkloadSpec::Trace(p) = &mut cfg.workload {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field; nothing is run or written before this passes.
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        match &self.workload {
            WorkloadSpec::Synthetic(t) => t.validate(&self.sim.mesh)?,
            WorkloadSpec::Trace(_) if !self.rates.is_empty() => {
                return Err(Error::config("a rate ladder needs a synthetic workload"));
            }
            WorkloadSpec::Trace(_) => {}
        }
        if !self.rates.is_empty() {
            check_ladder(&self.rates)?;
        }
        if self.planners.is_empty() {
            return Err(Error::config("planner list is empty"));
        }
        if let Some(p) = self.planners.iter().enumerate().find(|(i, p)| self.planners[..*i].contains(p)) {
            return Err(Error::config(format!("planner {} listed twice", p.1.name())));
        }
        let w = &self.energy;
        if [w.link, w.buffer_write, w.buffer_read, w.crossbar]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::config("energy weights must be finite and non-negative"));
        }
        if !(self.saturation_factor.is_finite() && self.saturation_factor > 1.0) {
            return Err(Error::config("saturation_factor must be greater than 1"));
        }
        Ok(())
    }

    /// Hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("configuration serializes"))
    }

    fn traffic_at(&self, rate: Option<f64>) -> Option<TrafficConfig> {
        match &self.workload {
            WorkloadSpec::Synthetic(t) => Some(TrafficConfig {
                injection_rate: rate.unwrap_or(t.injection_rate),
                ..*t
            }),
            WorkloadSpec::Trace(_) => None,
        }
    }

    /// The message stream for one run, with `rate` overriding the synthetic
    /// injection rate.
    pub fn events(&self, rate: Option<f64>) -> Result<Box<dyn Iterator<Item = TraceEvent> + Send>> {
        let mesh = self.sim.mesh;
        Ok(match (&self.workload, self.traffic_at(rate)) {
            (WorkloadSpec::Synthetic(_), Some(t)) => Box::new(generate_synthetic(
                &t,
                &mesh,
                self.sim.seed,
                self.sim.warmup + self.sim.measure,
            )?),
            (WorkloadSpec::Trace(p), _) => Box::new(load_trace(p, &mesh)?.into_iter()),
            (WorkloadSpec::Synthetic(_), None) => unreachable!(),
        })
    }

    /// Identifies the message stream independently of the planner, so
    /// reports of different planners on one workload can be compared.
    pub fn workload_hash(&self, rate: Option<f64>) -> Result<String> {
        #[derive(Serialize)]
        struct Key {
            mesh: String,
            traffic: Option<TrafficConfig>,
            trace: Option<String>,
            seed: u64,
            horizon: u64,
        }
        let trace = match &self.workload {
            WorkloadSpec::Trace(p) => Some(sha256_hex(&std::fs::read(p)?)),
            WorkloadSpec::Synthetic(_) => None,
        };
        let key = Key {
            mesh: self.sim.mesh.to_string(),
            traffic: self.traffic_at(rate),
            trace,
            seed: self.sim.seed,
            horizon: self.sim.warmup + self.sim.measure,
        };
        Ok(sha256_hex(&serde_json::to_vec(&key)?))
    }

    /// Simulates one planner at one rate and folds the result into a report.
    pub fn run(&self, planner: PlannerKind, rate: Option<f64>) -> Result<StatsReport<f64>> {
        let mut sim = self.sim.clone();
        sim.planner = planner;
        let outcome = simulate(&sim, self.events(rate)?)?;
        let traffic = self.traffic_at(rate);
        let mut point = self.clone();
        point.sim = sim;
        if let WorkloadSpec::Synthetic(t) = &mut point.workload {
            *t = traffic.expect("synthetic workload");
        }
        point.rates.clear();
        Ok(finalize(
            planner,
            &outcome.records,
            &outcome.counters,
            &outcome.totals,
            &self.energy,
            traffic.map(|t| t.injection_rate),
            traffic.map(|t| t.dest_range),
            RunMeta {
                config_hash: point.hash(),
                workload_hash: self.workload_hash(rate)?,
                seed: self.sim.seed,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(text.contains("\"mesh\": \"8x8\""));
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn partial_config() {
        let cfg = RunConfig::from_json(
            r#"{"sim": {"mesh": "4x4", "planner": "mu"},
                "workload": {"synthetic": {"injection_rate": 0.01, "dest_range": [2, 3]}},
                "rates": [0.001, 0.01]}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.sim.mesh.node_count(), 16);
        assert_eq!(cfg.sim.planner, PlannerKind::Mu);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"sim": {"vcs_high": 3}}"#,
            r#"{"rates": [0.02, 0.01]}"#,
            r#"{"planners": []}"#,
            r#"{"planners": ["mu", "mu"]}"#,
            r#"{"saturation_factor": 0.5}"#,
            r#"{"energy": {"link": -1.0}}"#,
            r#"{"sim": {"mesh": "4x4"}, "workload": {"synthetic": {"dest_range": [2, 16]}}}"#,
            r#"{"workload": {"trace": "t.jsonl"}, "rates": [0.1]}"#,
        ] {
            let cfg = RunConfig::from_json(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
        assert!(RunConfig::from_json(r#"{"sim": {"bogus": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sim": {"mesh": "1x4"}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn workload_hash_ignores_planner() {
        let mut a = RunConfig::default();
        let h = a.workload_hash(Some(0.01)).unwrap();
        a.sim.planner = PlannerKind::Mu;
        assert_eq!(a.workload_hash(Some(0.01)).unwrap(), h);
        assert_ne!(a.workload_hash(Some(0.02)).unwrap(), h);
        a.sim.seed = 99;
        assert_ne!(a.workload_hash(Some(0.01)).unwrap(), h);
    }

    #[test]
    fn trace_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.jsonl"), "{\"cycle\":0,\"src\":0,\"dsts\":[5]}\n").unwrap();
        let cfg_path = dir.path().join("run.json");
        std::fs::write(&cfg_path, r#"{"sim": {"mesh": "4x4"}, "workload": {"trace": "t.jsonl"}}"#).unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.events(None).unwrap().count(), 1);
    }
}
