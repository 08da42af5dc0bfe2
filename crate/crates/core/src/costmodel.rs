//! Event-based energy and latency accounting.
//!
//! Every simulated hardware or host action appends a [`CostEvent`] to a
//! [`CostLedger`]. Ledgers store integer multiplicities only; energies and
//! latencies are computed from [`CostConstants`] at aggregation time, so the
//! result does not depend on the order events were recorded or merged in.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::bitcore::WORD_BITS;
use crate::error::{Error, Result};

/// Per-event energy (pJ) and latency (ns) constants.
///
/// Proposal-A's two measured per-op energies (with and without sectioning)
/// are split into a per-pseudo-read precharge share and a per-conversion ADC
/// share: `op(n) = adc + precharge / n`, fitted so that `op(1)` and
/// `op(a_reference_sections)` reproduce the two measurements exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CostConstants {
    pub a_energy_sectioned_pj: f64,
    pub a_energy_unsectioned_pj: f64,
    pub a_reference_sections: u32,
    pub a_latency_ns: f64,
    pub b_xnor_energy_fj_per_bit: f64,
    pub b_xnor_latency_ns: f64,
    pub b_adder_power_mw: f64,
    pub b_adder_latency_ns: f64,
    pub baseline_read_energy_pj: f64,
    pub baseline_read_latency_ns: f64,
    pub sram_write_energy_pj: f64,
    pub sram_write_latency_ns: f64,
    pub host_instr_energy_pj: f64,
    pub host_instr_latency_ns: f64,
    /// Host instructions for one software 64-bit popcount (no popcount opcode).
    pub baseline_popcount_instrs: u32,
    pub dram_access_energy_pj: f64,
    pub dram_access_latency_ns: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        Self {
            a_energy_sectioned_pj: 0.767,
            a_energy_unsectioned_pj: 1.914,
            a_reference_sections: 4,
            a_latency_ns: 45.0,
            b_xnor_energy_fj_per_bit: 29.67,
            b_xnor_latency_ns: 1.0,
            b_adder_power_mw: 0.26,
            b_adder_latency_ns: 0.3,
            // Placeholders: 64-bit access of a 64KB 45nm bank, a ~100MHz
            // embedded core, and a 64-bit DRAM burst at ~10 pJ/bit.
            baseline_read_energy_pj: 5.5,
            baseline_read_latency_ns: 2.0,
            sram_write_energy_pj: 5.5,
            sram_write_latency_ns: 2.0,
            host_instr_energy_pj: 10.0,
            host_instr_latency_ns: 10.0,
            baseline_popcount_instrs: 12,
            dram_access_energy_pj: 640.0,
            dram_access_latency_ns: 50.0,
        }
    }
}

impl CostConstants {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("a_energy_sectioned_pj", self.a_energy_sectioned_pj),
            ("a_energy_unsectioned_pj", self.a_energy_unsectioned_pj),
            ("a_latency_ns", self.a_latency_ns),
            ("b_xnor_energy_fj_per_bit", self.b_xnor_energy_fj_per_bit),
            ("b_xnor_latency_ns", self.b_xnor_latency_ns),
            ("b_adder_power_mw", self.b_adder_power_mw),
            ("b_adder_latency_ns", self.b_adder_latency_ns),
            ("baseline_read_energy_pj", self.baseline_read_energy_pj),
            ("baseline_read_latency_ns", self.baseline_read_latency_ns),
            ("sram_write_energy_pj", self.sram_write_energy_pj),
            ("sram_write_latency_ns", self.sram_write_latency_ns),
            ("host_instr_energy_pj", self.host_instr_energy_pj),
            ("host_instr_latency_ns", self.host_instr_latency_ns),
            ("dram_access_energy_pj", self.dram_access_energy_pj),
            ("dram_access_latency_ns", self.dram_access_latency_ns),
        ];
        for (name, v) in reals {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.a_energy_sectioned_pj > self.a_energy_unsectioned_pj {
            return Err(Error::Config(
                "a_energy_sectioned_pj must not exceed a_energy_unsectioned_pj".into(),
            ));
        }
        if self.a_reference_sections < 2 {
            return Err(Error::Config("a_reference_sections must be >= 2".into()));
        }
        if self.adc_energy_pj() < 0.0 {
            return Err(Error::Config(
                "Proposal-A energies imply a negative per-conversion ADC energy".into(),
            ));
        }
        Ok(())
    }

    /// Bitline precharge share of one Proposal-A pseudo-read.
    pub fn precharge_energy_pj(&self) -> f64 {
        let n = self.a_reference_sections as f64;
        (self.a_energy_unsectioned_pj - self.a_energy_sectioned_pj) * n / (n - 1.0)
    }

    /// ADC share of one Proposal-A 64-bit conversion.
    pub fn adc_energy_pj(&self) -> f64 {
        self.a_energy_unsectioned_pj - self.precharge_energy_pj()
    }

    /// One dual-wordline read of a full row.
    pub fn dual_read_energy_pj(&self) -> f64 {
        self.b_xnor_energy_fj_per_bit * WORD_BITS as f64 / 1000.0
    }

    /// Adder power times critical-path delay (mW x ns = pJ).
    pub fn adder_energy_pj(&self) -> f64 {
        self.b_adder_power_mw * self.b_adder_latency_ns
    }

    /// Host instructions spent per 64-bit software XNOR+popcount+accumulate.
    pub fn baseline_instrs_per_mac(&self) -> u64 {
        1 + self.baseline_popcount_instrs as u64 + 1
    }

    pub fn event_energy_pj(&self, kind: EventKind) -> f64 {
        match kind {
            EventKind::PseudoReadBatch => self.precharge_energy_pj(),
            EventKind::AdcConversion => self.adc_energy_pj(),
            EventKind::DualRead => self.dual_read_energy_pj(),
            EventKind::Adder => self.adder_energy_pj(),
            EventKind::SramRead => self.baseline_read_energy_pj,
            EventKind::SramWrite => self.sram_write_energy_pj,
            EventKind::HostInstr => self.host_instr_energy_pj,
            EventKind::DramAccess => self.dram_access_energy_pj,
        }
    }

    /// Conversions within a sectioned batch run concurrently, so the batch
    /// latency sits on the pseudo-read and conversions add none.
    pub fn event_latency_ns(&self, kind: EventKind) -> f64 {
        match kind {
            EventKind::PseudoReadBatch => self.a_latency_ns,
            EventKind::AdcConversion => 0.0,
            EventKind::DualRead => self.b_xnor_latency_ns,
            EventKind::Adder => self.b_adder_latency_ns,
            EventKind::SramRead => self.baseline_read_latency_ns,
            EventKind::SramWrite => self.sram_write_latency_ns,
            EventKind::HostInstr => self.host_instr_latency_ns,
            EventKind::DramAccess => self.dram_access_latency_ns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    PseudoReadBatch,
    AdcConversion,
    DualRead,
    Adder,
    SramRead,
    SramWrite,
    HostInstr,
    DramAccess,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::PseudoReadBatch,
        EventKind::AdcConversion,
        EventKind::DualRead,
        EventKind::Adder,
        EventKind::SramRead,
        EventKind::SramWrite,
        EventKind::HostInstr,
        EventKind::DramAccess,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PseudoReadBatch => "pseudo_read_batch",
            EventKind::AdcConversion => "adc_conversion",
            EventKind::DualRead => "dual_read",
            EventKind::Adder => "adder",
            EventKind::SramRead => "sram_read",
            EventKind::SramWrite => "sram_write",
            EventKind::HostInstr => "host_instr",
            EventKind::DramAccess => "dram_access",
        }
    }

    /// Events that happen inside the compute array itself.
    pub fn is_in_array(&self) -> bool {
        matches!(
            self,
            EventKind::PseudoReadBatch
                | EventKind::AdcConversion
                | EventKind::DualRead
                | EventKind::Adder
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UndefinedCost(format!("unknown event kind `{s}`")))
    }
}

/// Hardware scheme an operation is costed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    ProposalA { sections: u32 },
    ProposalB,
    Baseline,
}

/// What is being costed: a whole 64-bit XNOR+popcount, or a single event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Conv64,
    Event(EventKind),
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "conv64" {
            Ok(OpKind::Conv64)
        } else {
            s.parse().map(OpKind::Event)
        }
    }
}

fn check_combination(kind: OpKind, mode: CostMode) -> Result<()> {
    let ok = match (kind, mode) {
        (OpKind::Conv64, CostMode::ProposalA { sections }) => sections >= 1,
        (OpKind::Conv64, _) => true,
        (OpKind::Event(e), CostMode::ProposalA { .. }) => {
            !matches!(e, EventKind::DualRead | EventKind::Adder)
        }
        (OpKind::Event(e), CostMode::ProposalB) => {
            !matches!(e, EventKind::PseudoReadBatch | EventKind::AdcConversion)
        }
        (OpKind::Event(e), CostMode::Baseline) => !e.is_in_array(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::UndefinedCost(format!("{kind:?} under {mode:?}")))
    }
}

/// Energy of one operation in pJ.
pub fn op_energy(kind: OpKind, mode: CostMode, c: &CostConstants) -> Result<f64> {
    check_combination(kind, mode)?;
    Ok(match (kind, mode) {
        (OpKind::Event(e), _) => c.event_energy_pj(e),
        (OpKind::Conv64, CostMode::ProposalA { sections }) => {
            c.adc_energy_pj() + c.precharge_energy_pj() / sections as f64
        }
        (OpKind::Conv64, CostMode::ProposalB) => c.dual_read_energy_pj() + c.adder_energy_pj(),
        (OpKind::Conv64, CostMode::Baseline) => {
            2.0 * c.baseline_read_energy_pj
                + c.baseline_instrs_per_mac() as f64 * c.host_instr_energy_pj
        }
    })
}

/// Total latency in ns of `batch_size` back-to-back operations.
pub fn op_latency(kind: OpKind, mode: CostMode, batch_size: u32, c: &CostConstants) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::UndefinedCost("batch size must be >= 1".into()));
    }
    check_combination(kind, mode)?;
    let b = batch_size as f64;
    Ok(match (kind, mode) {
        (OpKind::Event(e), _) => b * c.event_latency_ns(e),
        (OpKind::Conv64, CostMode::ProposalA { sections }) => {
            batch_size.div_ceil(sections) as f64 * c.a_latency_ns
        }
        (OpKind::Conv64, CostMode::ProposalB) => b * (c.b_xnor_latency_ns + c.b_adder_latency_ns),
        (OpKind::Conv64, CostMode::Baseline) => {
            b * (2.0 * c.baseline_read_latency_ns
                + c.baseline_instrs_per_mac() as f64 * c.host_instr_latency_ns)
        }
    })
}

/// Uncosted operation tallies kept alongside the events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// One-bit XNOR multiply-accumulates in binarized layers.
    pub binary_macs: u64,
    /// Integer multiply-accumulates in host (non-binarized) layers.
    pub host_macs: u64,
    /// 64-bit XNOR+popcount tile operations.
    pub tile_ops: u64,
}

impl OpCounts {
    fn add(&mut self, other: &OpCounts) {
        self.binary_macs += other.binary_macs;
        self.host_macs += other.host_macs;
        self.tile_ops += other.tile_ops;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostEvent {
    pub kind: EventKind,
    pub layer: usize,
    pub multiplicity: u64,
}

/// Append-only event stream, grouped by layer tag.
///
/// Repeated events of the same kind within a layer fold into one entry whose
/// multiplicity grows, which keeps full-network runs compact.
#[derive(Debug, Clone, Default)]
pub struct CostLedger {
    tags: Vec<String>,
    ops: Vec<OpCounts>,
    events: Vec<CostEvent>,
    index: HashMap<(usize, EventKind), usize>,
    current: Option<usize>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn tag_index(&mut self, tag: &str) -> usize {
        match self.tags.iter().position(|t| t == tag) {
            Some(i) => i,
            None => {
                self.tags.push(tag.to_string());
                self.ops.push(OpCounts::default());
                self.tags.len() - 1
            }
        }
    }

    /// Subsequent events are attributed to `tag`.
    pub fn begin_layer(&mut self, tag: &str) {
        let i = self.tag_index(tag);
        self.current = Some(i);
    }

    fn current_tag(&mut self) -> usize {
        match self.current {
            Some(i) => i,
            None => {
                let i = self.tag_index("untagged");
                self.current = Some(i);
                i
            }
        }
    }

    pub fn record(&mut self, kind: EventKind, multiplicity: u64) {
        if multiplicity == 0 {
            return;
        }
        let layer = self.current_tag();
        self.push(layer, kind, multiplicity);
    }

    fn push(&mut self, layer: usize, kind: EventKind, multiplicity: u64) {
        match self.index.get(&(layer, kind)) {
            Some(&i) => self.events[i].multiplicity += multiplicity,
            None => {
                self.index.insert((layer, kind), self.events.len());
                self.events.push(CostEvent {
                    kind,
                    layer,
                    multiplicity,
                });
            }
        }
    }

    pub fn count_ops(&mut self, ops: OpCounts) {
        let layer = self.current_tag();
        self.ops[layer].add(&ops);
    }

    pub fn events(&self) -> &[CostEvent] {
        &self.events
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Total multiplicity of `kind` across all layers.
    pub fn count(&self, kind: EventKind) -> u64 {
        self.events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.multiplicity)
            .sum()
    }

    /// Associative merge: multiplicities add per (layer, kind); new layers
    /// are appended in `other`'s order.
    pub fn merge(&mut self, other: &CostLedger) {
        let saved = self.current;
        for (i, tag) in other.tags.iter().enumerate() {
            let mine = self.tag_index(tag);
            self.ops[mine].add(&other.ops[i]);
        }
        for e in &other.events {
            let mine = self.tag_index(&other.tags[e.layer]);
            self.push(mine, e.kind, e.multiplicity);
        }
        self.current = saved;
    }

    pub fn report(&self, c: &CostConstants) -> LedgerReport {
        let layers = self
            .tags
            .iter()
            .map(|t| aggregate(self, t, c))
            .collect::<Vec<_>>();
        let mut total = LayerCost {
            tag: "total".into(),
            ..LayerCost::default()
        };
        for l in &layers {
            total.energy_pj += l.energy_pj;
            total.compute_energy_pj += l.compute_energy_pj;
            total.latency_ns += l.latency_ns;
            for (k, n) in &l.event_counts {
                *total.event_counts.entry(*k).or_default() += n;
            }
            total.ops.add(&l.ops);
        }
        LedgerReport { layers, total }
    }
}

/// Aggregated cost of one layer tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerCost {
    pub tag: String,
    pub energy_pj: f64,
    /// Energy of in-array events only (pseudo-reads, conversions, dual reads, adders).
    pub compute_energy_pj: f64,
    pub latency_ns: f64,
    pub event_counts: BTreeMap<EventKind, u64>,
    pub ops: OpCounts,
}

impl LayerCost {
    pub fn count(&self, kind: EventKind) -> u64 {
        self.event_counts.get(&kind).copied().unwrap_or(0)
    }
}

pub fn aggregate(ledger: &CostLedger, layer_tag: &str, c: &CostConstants) -> LayerCost {
    let mut out = LayerCost {
        tag: layer_tag.to_string(),
        ..LayerCost::default()
    };
    let Some(idx) = ledger.tags.iter().position(|t| t == layer_tag) else {
        return out;
    };
    for kind in EventKind::ALL {
        let n: u64 = ledger
            .events
            .iter()
            .filter(|e| e.layer == idx && e.kind == kind)
            .map(|e| e.multiplicity)
            .sum();
        if n == 0 {
            continue;
        }
        let energy = n as f64 * c.event_energy_pj(kind);
        out.energy_pj += energy;
        if kind.is_in_array() {
            out.compute_energy_pj += energy;
        }
        out.latency_ns += n as f64 * c.event_latency_ns(kind);
        out.event_counts.insert(kind, n);
    }
    out.ops = ledger.ops[idx];
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    pub layers: Vec<LayerCost>,
    pub total: LayerCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ratio {
    pub tag: String,
    pub energy_ratio: f64,
    pub latency_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Speedup {
    pub layers: Vec<Ratio>,
    pub total: Ratio,
}

fn ratio(baseline: f64, accel: f64) -> f64 {
    if baseline == accel {
        1.0
    } else {
        baseline / accel
    }
}

fn layer_ratio(accel: &LayerCost, base: &LayerCost) -> Ratio {
    Ratio {
        tag: accel.tag.clone(),
        energy_ratio: ratio(base.energy_pj, accel.energy_pj),
        latency_ratio: ratio(base.latency_ns, accel.latency_ns),
    }
}

/// Baseline-over-accelerated ratios; both reports must cover the same layers.
pub fn speedup(accel: &LedgerReport, baseline: &LedgerReport) -> Result<Speedup> {
    let a: Vec<&str> = accel.layers.iter().map(|l| l.tag.as_str()).collect();
    let b: Vec<&str> = baseline.layers.iter().map(|l| l.tag.as_str()).collect();
    if a != b {
        return Err(Error::LayerMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(Speedup {
        layers: accel
            .layers
            .iter()
            .zip(&baseline.layers)
            .map(|(x, y)| layer_ratio(x, y))
            .collect(),
        total: layer_ratio(&accel.total, &baseline.total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn defaults_validate() {
        CostConstants::default().validate().unwrap();
    }

    #[test]
    fn split_reproduces_both_measurements() {
        let c = CostConstants::default();
        let one = op_energy(OpKind::Conv64, CostMode::ProposalA { sections: 1 }, &c).unwrap();
        let four = op_energy(OpKind::Conv64, CostMode::ProposalA { sections: 4 }, &c).unwrap();
        assert!(close(one, 1.914, 1e-12));
        assert!(close(four, 0.767, 1e-12));
    }

    #[test]
    fn proposal_b_op_energy_and_latency() {
        let c = CostConstants::default();
        let e = op_energy(OpKind::Conv64, CostMode::ProposalB, &c).unwrap();
        assert!(close(e, 1.89888 + 0.078, 1e-12));
        assert!(close(e, 1.977, 1e-3));
        let t = op_latency(OpKind::Conv64, CostMode::ProposalB, 1, &c).unwrap();
        assert!(close(t, 1.3, 1e-12));
    }

    #[test]
    fn proposal_a_batch_latency() {
        let c = CostConstants::default();
        let mode = CostMode::ProposalA { sections: 4 };
        let t = op_latency(OpKind::Conv64, mode, 4, &c).unwrap();
        assert_eq!(t, 45.0);
        assert_eq!(t / 4.0, 11.25);
        assert!(op_latency(OpKind::Conv64, mode, 0, &c).is_err());
    }

    #[test]
    fn undefined_combinations_and_unknown_kinds() {
        let c = CostConstants::default();
        assert!(op_energy(
            OpKind::Event(EventKind::AdcConversion),
            CostMode::ProposalB,
            &c
        )
        .is_err());
        assert!(op_energy(OpKind::Event(EventKind::Adder), CostMode::Baseline, &c).is_err());
        assert!("flux_capacitor".parse::<OpKind>().is_err());
        assert_eq!("conv64".parse::<OpKind>().unwrap(), OpKind::Conv64);
        for k in EventKind::ALL {
            assert_eq!(k.name().parse::<EventKind>().unwrap(), k);
        }
    }

    #[test]
    fn empty_ledger_aggregates_to_zero() {
        let l = CostLedger::new();
        let a = aggregate(&l, "conv2", &CostConstants::default());
        assert_eq!(a.energy_pj, 0.0);
        assert_eq!(a.latency_ns, 0.0);
        assert!(a.event_counts.is_empty());
    }

    #[test]
    fn hundred_sectioned_ops() {
        let c = CostConstants::default();
        let mut l = CostLedger::new();
        l.begin_layer("conv");
        for _ in 0..25 {
            l.record(EventKind::PseudoReadBatch, 1);
            l.record(EventKind::AdcConversion, 4);
        }
        let a = aggregate(&l, "conv", &c);
        assert!(close(a.energy_pj, 76.7, 1e-12));
        assert!(close(a.latency_ns, 1125.0, 1e-12));
        assert_eq!(a.count(EventKind::AdcConversion), 100);
    }

    #[test]
    fn mixed_fixture_matches_hand_sum() {
        // Ten events with round constants; totals were summed by hand.
        let c = CostConstants {
            baseline_read_energy_pj: 5.0,
            baseline_read_latency_ns: 2.0,
            sram_write_energy_pj: 6.0,
            sram_write_latency_ns: 3.0,
            host_instr_energy_pj: 1.0,
            host_instr_latency_ns: 1.0,
            dram_access_energy_pj: 100.0,
            dram_access_latency_ns: 50.0,
            ..CostConstants::default()
        };
        let mut l = CostLedger::new();
        l.begin_layer("x");
        l.record(EventKind::SramRead, 3); // 15 pJ, 6 ns
        l.record(EventKind::SramWrite, 1); // 6 pJ, 3 ns
        l.record(EventKind::HostInstr, 2); // 2 pJ, 2 ns
        l.record(EventKind::DramAccess, 1); // 100 pJ, 50 ns
        l.record(EventKind::DualRead, 2); // 3.79776 pJ, 2 ns
        l.record(EventKind::Adder, 1); // 0.078 pJ, 0.3 ns
        let a = aggregate(&l, "x", &c);
        assert!(close(a.energy_pj, 126.87576, 1e-12));
        assert!(close(a.latency_ns, 63.3, 1e-12));
        assert!(close(a.compute_energy_pj, 3.87576, 1e-12));
    }

    #[test]
    fn merge_is_order_independent() {
        let c = CostConstants::default();
        let mut x = CostLedger::new();
        x.begin_layer("a");
        x.record(EventKind::HostInstr, 5);
        x.begin_layer("b");
        x.record(EventKind::DualRead, 2);
        let mut y = CostLedger::new();
        y.begin_layer("a");
        y.record(EventKind::DualRead, 7);
        y.record(EventKind::HostInstr, 1);

        let mut xy = x.clone();
        xy.merge(&y);
        let mut yx = y.clone();
        yx.merge(&x);
        for tag in ["a", "b"] {
            assert_eq!(aggregate(&xy, tag, &c), aggregate(&yx, tag, &c));
        }
        assert_eq!(xy.count(EventKind::HostInstr), 6);
    }

    #[test]
    fn multiplicity_is_linear() {
        let c = CostConstants::default();
        let mut once = CostLedger::new();
        once.begin_layer("l");
        once.record(EventKind::SramRead, 10);
        let mut many = CostLedger::new();
        many.begin_layer("l");
        for _ in 0..10 {
            many.record(EventKind::SramRead, 1);
        }
        assert_eq!(aggregate(&once, "l", &c), aggregate(&many, "l", &c));
        assert_eq!(many.events().len(), 1);
    }

    #[test]
    fn speedup_ratios() {
        let c = CostConstants::default();
        let mut l = CostLedger::new();
        l.begin_layer("a");
        l.record(EventKind::HostInstr, 3);
        let r = l.report(&c);
        let same = speedup(&r, &r).unwrap();
        assert_eq!(same.total.energy_ratio, 1.0);
        assert_eq!(same.total.latency_ratio, 1.0);

        let mut d = CostLedger::new();
        d.begin_layer("a");
        d.record(EventKind::HostInstr, 6);
        let twice = speedup(&r, &d.report(&c)).unwrap();
        assert_eq!(twice.layers[0].energy_ratio, 2.0);
        assert_eq!(twice.total.latency_ratio, 2.0);

        let mut other = CostLedger::new();
        other.begin_layer("b");
        other.record(EventKind::HostInstr, 1);
        assert!(speedup(&r, &other.report(&c)).is_err());
    }

    #[test]
    fn validate_rejects_bad_constants() {
        let c = CostConstants {
            a_energy_sectioned_pj: 3.0,
            ..CostConstants::default()
        };
        assert!(c.validate().is_err());
        let c = CostConstants {
            host_instr_energy_pj: -1.0,
            ..CostConstants::default()
        };
        assert!(c.validate().is_err());
    }
}
