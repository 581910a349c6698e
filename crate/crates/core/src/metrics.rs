//! Delivery records, the activity-based energy proxy, run reports, rate
//! sweeps with saturation detection, and planner-vs-baseline comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::PlannerKind;
use crate::scalar::Real;
use crate::topology::NodeCoord;

/// One destination reached by one measured message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub message: u64,
    pub source: NodeCoord,
    pub destination: NodeCoord,
    /// Destination count of the message.
    pub dest_count: usize,
    pub generated: u64,
    pub head: u64,
    pub tail: u64,
    /// Links crossed between the source and this destination.
    pub hops: u32,
}

impl DeliveryRecord {
    pub fn latency(&self) -> u64 {
        self.tail - self.generated
    }
}

/// Flit-level activity of measured messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnergyCounters {
    pub link_traversals: u64,
    pub buffer_writes: u64,
    pub buffer_reads: u64,
    pub crossbar_traversals: u64,
}

impl EnergyCounters {
    pub fn scaled(&self, k: u64) -> EnergyCounters {
        EnergyCounters {
            link_traversals: self.link_traversals * k,
            buffer_writes: self.buffer_writes * k,
            buffer_reads: self.buffer_reads * k,
            crossbar_traversals: self.crossbar_traversals * k,
        }
    }
}

/// Energy per event, unitless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyWeights<F = f64> {
    pub link: F,
    pub buffer_write: F,
    pub buffer_read: F,
    pub crossbar: F,
}

impl<F: Real> Default for EnergyWeights<F> {
    fn default() -> Self {
        EnergyWeights {
            link: F::of(1.0),
            buffer_write: F::of(1.0),
            buffer_read: F::of(0.5),
            crossbar: F::of(0.7),
        }
    }
}

impl<F: Real> EnergyWeights<F> {
    pub fn energy(&self, c: &EnergyCounters) -> F {
        F::count(c.link_traversals) * self.link
            + F::count(c.buffer_writes) * self.buffer_write
            + F::count(c.buffer_reads) * self.buffer_read
            + F::count(c.crossbar_traversals) * self.crossbar
    }
}

/// Run-level bookkeeping from the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunTotals {
    pub generated_messages: u64,
    pub measured_messages: u64,
    pub dropped_messages: u64,
    pub dropped_measured: u64,
    pub completed_measured: u64,
    pub incomplete_measured: u64,
    pub measured_hops: u64,
    pub flits_injected: u64,
    /// Flits ejected at the last node of their packet.
    pub flits_retired: u64,
    pub packets_in_flight: u64,
    pub cycles: u64,
    pub measure_cycles: u64,
    pub nodes: u64,
    /// Every measured message was delivered before the run ended.
    pub drained: bool,
}

/// Identifies what produced a report.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub workload_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBreakdown<F = f64> {
    pub dest_count: usize,
    pub deliveries: usize,
    pub avg_latency: F,
}

/// Statistics of one run. Averages are `None` when nothing was delivered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport<F = f64> {
    pub planner: PlannerKind,
    pub injection_rate: Option<F>,
    pub dest_range: Option<[usize; 2]>,
    pub deliveries: usize,
    pub messages: usize,
    pub avg_delivery_latency: Option<F>,
    /// Per message: the last delivery.
    pub avg_packet_latency: Option<F>,
    pub max_delivery_latency: Option<u64>,
    /// Deliveries per node per measured cycle.
    pub throughput: F,
    pub total_hops: u64,
    pub energy: F,
    pub counters: EnergyCounters,
    pub by_dest_count: Vec<CountBreakdown<F>>,
    pub totals: RunTotals,
    pub meta: RunMeta,
}

impl<F: Real> StatsReport<F> {
    pub fn is_empty(&self) -> bool {
        self.deliveries == 0
    }
}

fn mean<F: Real>(sum: u64, n: usize) -> Option<F> {
    (n > 0).then(|| F::count(sum) / F::count(n as u64))
}

/// Folds the measured records into a report. Integer sums are taken first,
/// so the result does not depend on record order.
#[allow(clippy::too_many_arguments)]
pub fn finalize<F: Real>(
    planner: PlannerKind,
    records: &[DeliveryRecord],
    counters: &EnergyCounters,
    totals: &RunTotals,
    weights: &EnergyWeights<F>,
    injection_rate: Option<F>,
    dest_range: Option<[usize; 2]>,
    meta: RunMeta,
) -> StatsReport<F> {
    let sum: u64 = records.iter().map(DeliveryRecord::latency).sum();
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    let mut by_count: BTreeMap<usize, (usize, u64)> = BTreeMap::new();
    for r in records {
        let l = last.entry(r.message).or_default();
        *l = (*l).max(r.latency());
        let b = by_count.entry(r.dest_count).or_default();
        b.0 += 1;
        b.1 += r.latency();
    }
    let packet_sum: u64 = last.values().sum();
    let cells = totals.nodes * totals.measure_cycles;
    StatsReport {
        planner,
        injection_rate,
        dest_range,
        deliveries: records.len(),
        messages: last.len(),
        avg_delivery_latency: mean(sum, records.len()),
        avg_packet_latency: mean(packet_sum, last.len()),
        max_delivery_latency: records.iter().map(DeliveryRecord::latency).max(),
        throughput: if cells == 0 {
            F::zero()
        } else {
            F::count(records.len() as u64) / F::count(cells)
        },
        total_hops: totals.measured_hops,
        energy: weights.energy(counters),
        counters: *counters,
        by_dest_count: by_count
            .into_iter()
            .map(|(dest_count, (n, s))| CountBreakdown {
                dest_count,
                deliveries: n,
                avg_latency: F::count(s) / F::count(n as u64),
            })
            .collect(),
        totals: *totals,
        meta,
    }
}

/// Latency curve over an injection-rate ladder for one planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<F = f64> {
    pub planner: PlannerKind,
    pub rates: Vec<F>,
    pub reports: Vec<StatsReport<F>>,
    /// Latency at the lowest rate.
    pub zero_load: Option<F>,
    /// Index of the first saturated rate.
    pub saturation: Option<usize>,
    pub saturation_rate: Option<F>,
}

pub fn check_ladder<F: Real>(rates: &[F]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::config("injection-rate ladder is empty"));
    }
    if let Some(w) = rates.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::config(format!(
            "injection-rate ladder must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    if rates.iter().any(|r| *r < F::zero() || *r > F::one()) {
        return Err(Error::config("injection rates must lie in [0, 1]"));
    }
    Ok(())
}

/// First index whose average delivery latency exceeds `factor` times the
/// latency at index 0, or whose measured traffic did not drain.
pub fn saturation_index<F: Real>(reports: &[StatsReport<F>], factor: F) -> Option<usize> {
    let zero = reports.first()?.avg_delivery_latency?;
    reports.iter().position(|r| {
        !r.totals.drained || r.avg_delivery_latency.is_some_and(|l| l > factor * zero)
    })
}

/// Runs `point` at every rate of the ladder and locates saturation.
pub fn sweep<F, P>(planner: PlannerKind, rates: &[F], factor: F, mut point: P) -> Result<SweepResult<F>>
where
    F: Real,
    P: FnMut(F) -> Result<StatsReport<F>>,
{
    check_ladder(rates)?;
    let reports = rates.iter().map(|&r| point(r)).collect::<Result<Vec<_>>>()?;
    Ok(sweep_from_reports(planner, rates.to_vec(), reports, factor))
}

/// Assembles a sweep from reports produced elsewhere (e.g. in parallel).
pub fn sweep_from_reports<F: Real>(
    planner: PlannerKind,
    rates: Vec<F>,
    reports: Vec<StatsReport<F>>,
    factor: F,
) -> SweepResult<F> {
    let saturation = saturation_index(&reports, factor);
    SweepResult {
        planner,
        zero_load: reports.first().and_then(|r| r.avg_delivery_latency),
        saturation_rate: saturation.map(|i| rates[i]),
        saturation,
        rates,
        reports,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DeliveryLatency,
    PacketLatency,
    Energy,
    Hops,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::DeliveryLatency, Metric::PacketLatency, Metric::Energy, Metric::Hops];

    pub fn of<F: Real>(self, r: &StatsReport<F>) -> Option<F> {
        match self {
            Metric::DeliveryLatency => r.avg_delivery_latency,
            Metric::PacketLatency => r.avg_packet_latency,
            Metric::Energy => Some(r.energy),
            Metric::Hops => Some(F::count(r.total_hops)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement<F = f64> {
    pub planner: PlannerKind,
    pub baseline: PlannerKind,
    pub metric: Metric,
    /// `(baseline - candidate) / baseline`, in percent. `None` when the
    /// baseline value is missing or zero.
    pub percent: Option<F>,
}

/// Improvement of every report over `baseline` for every metric. Reports
/// must come from the same workload.
pub fn compare<F: Real>(baseline: &StatsReport<F>, reports: &[StatsReport<F>]) -> Result<Vec<Improvement<F>>> {
    let mut out = Vec::new();
    for r in reports {
        if r.meta.workload_hash != baseline.meta.workload_hash {
            return Err(Error::WorkloadMismatch {
                baseline: baseline.meta.workload_hash.clone(),
                other: r.meta.workload_hash.clone(),
            });
        }
        for m in Metric::ALL {
            let percent = match (m.of(baseline), m.of(r)) {
                (Some(b), Some(c)) if b != F::zero() => Some((b - c) / b * F::of(100.0)),
                _ => None,
            };
            out.push(Improvement {
                planner: r.planner,
                baseline: baseline.planner,
                metric: m,
                percent,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Monotone,
    NotMonotone,
}

/// `Monotone` when the values strictly increase.
pub fn trend<F: Real>(values: &[F]) -> Trend {
    if values.windows(2).all(|w| w[1] > w[0]) {
        Trend::Monotone
    } else {
        Trend::NotMonotone
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn rec(message: u64, generated: u64, tail: u64) -> DeliveryRecord {
        DeliveryRecord {
            message,
            source: NodeCoord::new(0, 0),
            destination: NodeCoord::new(1, 0),
            dest_count: 1,
            generated,
            head: tail.saturating_sub(3).max(generated),
            tail,
            hops: 1,
        }
    }

    fn totals() -> RunTotals {
        RunTotals {
            nodes: 4,
            measure_cycles: 100,
            drained: true,
            ..RunTotals::default()
        }
    }

    fn report(records: &[DeliveryRecord]) -> StatsReport<f64> {
        finalize(
            PlannerKind::Dpm,
            records,
            &EnergyCounters::default(),
            &totals(),
            &EnergyWeights::default(),
            None,
            None,
            RunMeta::default(),
        )
    }

    #[test]
    fn single_delivery() {
        let r = report(&[rec(0, 0, 10)]);
        assert_eq!(r.avg_delivery_latency, Some(10.0));
        assert_eq!(r.avg_packet_latency, Some(10.0));
        assert_eq!(r.throughput, 1.0 / 400.0);
    }

    #[test]
    fn weighted_energy() {
        let c = EnergyCounters {
            link_traversals: 100,
            buffer_writes: 50,
            buffer_reads: 50,
            crossbar_traversals: 60,
        };
        assert_eq!(EnergyWeights::<f64>::default().energy(&c), 217.0);
        assert_eq!(EnergyWeights::<f32>::default().energy(&c), 217.0);
    }

    #[test]
    fn empty_report_has_markers_not_nan() {
        let r = report(&[]);
        assert!(r.is_empty());
        assert_eq!(r.avg_delivery_latency, None);
        assert_eq!(r.avg_packet_latency, None);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"avg_delivery_latency\":null"));
        assert!(!json.contains("NaN"));
    }

    #[test]
    fn packet_latency_is_last_delivery() {
        let r = report(&[rec(0, 0, 10), rec(0, 0, 20), rec(1, 5, 11)]);
        assert_eq!(r.avg_delivery_latency, Some(12.0));
        assert_eq!(r.avg_packet_latency, Some(13.0));
        assert_eq!(r.messages, 2);
    }

    fn with_latency(l: Option<f64>, drained: bool) -> StatsReport<f64> {
        let mut r = report(&[]);
        r.avg_delivery_latency = l;
        r.totals.drained = drained;
        r
    }

    #[test]
    fn saturation_detection() {
        let flat: Vec<_> = [10.0, 11.0, 12.0, 13.0].iter().map(|&l| with_latency(Some(l), true)).collect();
        assert_eq!(saturation_index(&flat, 3.0), None);
        let knee: Vec<_> = [10.0, 12.0, 25.0, 31.0, 90.0].iter().map(|&l| with_latency(Some(l), true)).collect();
        assert_eq!(saturation_index(&knee, 3.0), Some(3));
        let stuck = vec![with_latency(Some(10.0), true), with_latency(Some(20.0), false)];
        assert_eq!(saturation_index(&stuck, 3.0), Some(1));
    }

    #[test]
    fn ladder_validation() {
        assert!(check_ladder::<f64>(&[]).is_err());
        assert!(check_ladder(&[0.01, 0.01]).is_err());
        assert!(check_ladder(&[0.02, 0.01]).is_err());
        assert!(check_ladder(&[0.001, 0.01]).is_ok());
        let s = sweep(PlannerKind::Mu, &[0.1, 0.2, 0.3], 3.0, |r| Ok(with_latency(Some(r * 100.0), true))).unwrap();
        assert_eq!(s.saturation, None);
        assert_eq!(s.zero_load, Some(10.0));
    }

    #[test]
    fn compare_reports() {
        let mut mu = report(&[rec(0, 0, 10)]);
        mu.planner = PlannerKind::Mu;
        mu.energy = 100.0;
        let mut dpm = mu.clone();
        dpm.planner = PlannerKind::Dpm;
        dpm.energy = 80.0;
        let imp = compare(&mu, &[dpm.clone()]).unwrap();
        let e = imp.iter().find(|i| i.metric == Metric::Energy).unwrap();
        assert!((e.percent.unwrap() - 20.0).abs() < 1e-12);

        for i in compare(&mu, &[mu.clone()]).unwrap() {
            assert!(i.percent.is_none() || i.percent == Some(0.0));
        }

        dpm.meta.workload_hash = "other".into();
        assert!(matches!(compare(&mu, &[dpm]), Err(Error::WorkloadMismatch { .. })));
    }

    #[test]
    fn trends() {
        assert_eq!(trend(&[7.0, 16.0, 22.0, 35.0]), Trend::Monotone);
        assert_eq!(trend(&[7.0, 16.0, 16.0, 35.0]), Trend::NotMonotone);
    }

    proptest! {
        #[test]
        fn energy_is_linear(l in 0u64..1_000_000, w in 0u64..1_000_000, r in 0u64..1_000_000, x in 0u64..1_000_000) {
            let c = EnergyCounters { link_traversals: l, buffer_writes: w, buffer_reads: r, crossbar_traversals: x };
            let wts = EnergyWeights::<f64>::default();
            prop_assert!((wts.energy(&c.scaled(2)) - 2.0 * wts.energy(&c)).abs() < 1e-6);
        }

        #[test]
        fn averages_ignore_order(lat in proptest::collection::vec((0u64..50, 0u64..500), 1..40), seed in any::<u64>()) {
            let recs: Vec<DeliveryRecord> = lat.iter().enumerate().map(|(i, &(m, l))| rec(m, i as u64, i as u64 + l)).collect();
            let mut shuffled = recs.clone();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            prop_assert_eq!(report(&recs), report(&shuffled));
        }

        #[test]
        fn packet_latency_lies_within_its_deliveries(lat in proptest::collection::vec(0u64..500, 1..20)) {
            let recs: Vec<DeliveryRecord> = lat.iter().map(|&l| rec(7, 3, 3 + l)).collect();
            let r = report(&recs);
            let p = r.avg_packet_latency.unwrap();
            prop_assert!(p >= *lat.iter().min().unwrap() as f64);
            prop_assert!(p <= *lat.iter().max().unwrap() as f64);
        }
    }
}
