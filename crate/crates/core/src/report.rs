//! CSV and JSON output. Row and key order are fixed, so identical runs give
//! byte-identical files.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::metrics::{compare, Improvement, StatsReport, SweepResult};
use crate::routing::PlannerKind;
use crate::scalar::Real;

pub const CSV_HEADER: [&str; 17] = [
    "planner",
    "rate",
    "range_min",
    "range_max",
    "messages",
    "deliveries",
    "avg_delivery_latency",
    "avg_packet_latency",
    "max_delivery_latency",
    "throughput",
    "total_hops",
    "energy",
    "dropped",
    "drained",
    "seed",
    "config_hash",
    "workload_hash",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per report; missing values are empty cells.
pub fn write_csv<F: Real, W: Write>(w: W, reports: &[StatsReport<F>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in reports {
        out.write_record([
            r.planner.name().to_string(),
            opt(r.injection_rate),
            opt(r.dest_range.map(|d| d[0])),
            opt(r.dest_range.map(|d| d[1])),
            r.messages.to_string(),
            r.deliveries.to_string(),
            opt(r.avg_delivery_latency),
            opt(r.avg_packet_latency),
            opt(r.max_delivery_latency),
            r.throughput.to_string(),
            r.total_hops.to_string(),
            r.energy.to_string(),
            r.totals.dropped_measured.to_string(),
            r.totals.drained.to_string(),
            r.meta.seed.to_string(),
            r.meta.config_hash.clone(),
            r.meta.workload_hash.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Everything `sweep` writes as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary<F: Real = f64> {
    pub baseline: PlannerKind,
    pub sweeps: Vec<SweepResult<F>>,
    /// Improvement over the baseline at every rate, in ladder order.
    pub comparisons: Vec<Vec<Improvement<F>>>,
}

impl<F: Real> SweepSummary<F> {
    /// `sweeps[0]` is the baseline; every sweep must share its ladder.
    pub fn new(sweeps: Vec<SweepResult<F>>) -> Result<Self> {
        let base = &sweeps[0];
        let comparisons = (0..base.reports.len())
            .map(|i| {
                let others: Vec<_> = sweeps[1..].iter().map(|s| s.reports[i].clone()).collect();
                compare(&base.reports[i], &others)
            })
            .collect::<Result<_>>()?;
        Ok(SweepSummary {
            baseline: base.planner,
            sweeps,
            comparisons,
        })
    }
}

pub fn write_json<T: Serialize, W: Write>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{finalize, EnergyCounters, EnergyWeights, RunMeta, RunTotals};

    fn empty(planner: PlannerKind) -> StatsReport<f64> {
        finalize(
            planner,
            &[],
            &EnergyCounters::default(),
            &RunTotals::default(),
            &EnergyWeights::default(),
            Some(0.01),
            Some([2, 5]),
            RunMeta::default(),
        )
    }

    #[test]
    fn csv_shape() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[empty(PlannerKind::Mu), empty(PlannerKind::Dpm)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), CSV_HEADER.len());
        assert!(lines[1].starts_with("mu,0.01,2,5,0,0,,,,0,"));
    }

    #[test]
    fn summary_compares_against_first() {
        let sweeps = [PlannerKind::Mu, PlannerKind::Dpm]
            .map(|p| crate::metrics::sweep_from_reports(p, vec![0.01], vec![empty(p)], 3.0))
            .to_vec();
        let s = SweepSummary::new(sweeps).unwrap();
        assert_eq!(s.baseline, PlannerKind::Mu);
        assert_eq!(s.comparisons.len(), 1);
        assert!(s.comparisons[0].iter().all(|i| i.planner == PlannerKind::Dpm));
    }
}
