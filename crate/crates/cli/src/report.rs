//! Report assembly and rendering. Every number comes from a ledger
//! aggregate or the evaluation's integer tallies.

use std::fmt::Write as _;

use serde::Serialize;

use xcelram_core::bnn::{Evaluation, Moments, NetworkSpec};
use xcelram_core::costmodel::{speedup, CostConstants, EventKind, LayerCost, LedgerReport};

use crate::config::RunConfig;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub engine: String,
    pub network: String,
    pub sections: u32,
    pub sigma: f64,
    pub seed: u64,
    pub images: usize,
    pub trials: u32,
    pub inferences: u64,
    pub labeled: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
    pub accuracy_per_trial: Vec<Option<f64>>,
    pub popcount_error: ErrorReport,
    pub binary_mac_fraction: f64,
    pub layers: Vec<LayerReport>,
    pub total: LayerReport,
    pub per_inference: PerInference,
    pub baseline: Option<BaselineReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub count: u64,
    pub mean: f64,
    pub std: f64,
    pub by_conversions: Vec<ErrorBucket>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBucket {
    pub conversions: usize,
    pub count: u64,
    pub mean: f64,
    pub std: f64,
    /// `sigma * sqrt(conversions)`, the independent-draw prediction.
    pub predicted_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub index: Option<usize>,
    pub name: String,
    pub kind: Option<String>,
    pub energy_pj: f64,
    pub compute_energy_pj: f64,
    pub latency_ns: f64,
    pub binary_macs: u64,
    pub host_macs: u64,
    pub tile_ops: u64,
    pub events: Vec<EventCount>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventCount {
    pub event: &'static str,
    pub count: u64,
    pub energy_pj: f64,
    pub latency_ns: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerInference {
    pub energy_pj: f64,
    pub latency_ns: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub energy_pj: f64,
    pub latency_ns: f64,
    pub energy_ratio: f64,
    pub latency_ratio: f64,
    pub layers: Vec<LayerRatio>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerRatio {
    pub name: String,
    pub baseline_energy_pj: f64,
    pub baseline_latency_ns: f64,
    pub energy_ratio: f64,
    pub latency_ratio: f64,
}

fn moments(m: &Moments) -> (u64, f64, f64) {
    (m.count, m.mean(), m.std())
}

fn layer_report(
    l: &LayerCost,
    spec: Option<(usize, &NetworkSpec)>,
    c: &CostConstants,
) -> LayerReport {
    let events = l
        .event_counts
        .iter()
        .map(|(&k, &n)| EventCount {
            event: k.name(),
            count: n,
            energy_pj: n as f64 * c.event_energy_pj(k),
            latency_ns: n as f64 * c.event_latency_ns(k),
        })
        .collect();
    LayerReport {
        index: spec.map(|(i, _)| i),
        name: l.tag.clone(),
        kind: spec.map(|(i, s)| s.layers[i].kind.name().to_string()),
        energy_pj: l.energy_pj,
        compute_energy_pj: l.compute_energy_pj,
        latency_ns: l.latency_ns,
        binary_macs: l.ops.binary_macs,
        host_macs: l.ops.host_macs,
        tile_ops: l.ops.tile_ops,
        events,
    }
}

fn cost_layers(report: &LedgerReport, spec: &NetworkSpec, c: &CostConstants) -> Vec<LayerReport> {
    report
        .layers
        .iter()
        .map(|l| {
            let idx = spec.layers.iter().position(|s| s.name == l.tag);
            layer_report(l, idx.map(|i| (i, spec)), c)
        })
        .collect()
}

pub fn build(
    cfg: &RunConfig,
    spec: &NetworkSpec,
    labels: &[Option<usize>],
    eval: &Evaluation,
    baseline: Option<&Evaluation>,
) -> anyhow::Result<Report> {
    let c = &cfg.costs;
    let ledger = eval.ledger.report(c);
    let inferences = eval.inferences();
    let overall = eval.errors.overall();
    let (count, mean, std) = moments(&overall);
    let by_conversions = eval
        .errors
        .by_conversions()
        .iter()
        .map(|(&m, s)| {
            let (count, mean, std) = moments(s);
            ErrorBucket {
                conversions: m,
                count,
                mean,
                std,
                predicted_std: if cfg.engine == xcelram_core::bnn::EngineKind::ProposalA {
                    cfg.sigma * (m as f64).sqrt()
                } else {
                    0.0
                },
            }
        })
        .collect();
    let accuracy_per_trial = match eval.accuracy() {
        None => vec![None; eval.trials as usize],
        Some(_) => eval
            .predictions
            .iter()
            .map(|p| {
                let (mut labeled, mut correct) = (0u64, 0u64);
                for (i, &class) in p.iter().enumerate() {
                    if let Some(l) = labels.get(i).copied().flatten() {
                        labeled += 1;
                        correct += (l == class) as u64;
                    }
                }
                (labeled > 0).then(|| correct as f64 / labeled as f64)
            })
            .collect(),
    };
    let ops = ledger.total.ops;
    let all_macs = ops.binary_macs + ops.host_macs;
    let baseline = match baseline {
        None => None,
        Some(b) => {
            let base = b.ledger.report(c);
            let s = speedup(&ledger, &base)?;
            Some(BaselineReport {
                energy_pj: base.total.energy_pj,
                latency_ns: base.total.latency_ns,
                energy_ratio: s.total.energy_ratio,
                latency_ratio: s.total.latency_ratio,
                layers: s
                    .layers
                    .iter()
                    .zip(&base.layers)
                    .map(|(r, bl)| LayerRatio {
                        name: r.tag.clone(),
                        baseline_energy_pj: bl.energy_pj,
                        baseline_latency_ns: bl.latency_ns,
                        energy_ratio: r.energy_ratio,
                        latency_ratio: r.latency_ratio,
                    })
                    .collect(),
            })
        }
    };
    Ok(Report {
        schema: SCHEMA,
        engine: cfg.engine.name().into(),
        network: spec.name.clone(),
        sections: cfg.geometry.sections,
        sigma: cfg.sigma,
        seed: cfg.seed,
        images: labels.len(),
        trials: eval.trials,
        inferences,
        labeled: eval.labeled,
        correct: eval.correct,
        accuracy: eval.accuracy(),
        accuracy_per_trial,
        popcount_error: ErrorReport {
            count,
            mean,
            std,
            by_conversions,
        },
        binary_mac_fraction: if all_macs == 0 {
            0.0
        } else {
            ops.binary_macs as f64 / all_macs as f64
        },
        layers: cost_layers(&ledger, spec, c),
        total: layer_report(&ledger.total, None, c),
        per_inference: PerInference {
            energy_pj: ledger.total.energy_pj / inferences as f64,
            latency_ns: ledger.total.latency_ns / inferences as f64,
        },
        baseline,
    })
}

pub fn to_json(r: &Report) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

pub const CSV_HEADER: &str =
    "index,layer,kind,energy_pj,compute_energy_pj,latency_ns,binary_macs,host_macs,tile_ops";

pub fn to_csv(r: &Report) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for l in r.layers.iter().chain(std::iter::once(&r.total)) {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            l.index.map(|i| i.to_string()).unwrap_or_default(),
            l.name,
            l.kind.as_deref().unwrap_or(""),
            l.energy_pj,
            l.compute_energy_pj,
            l.latency_ns,
            l.binary_macs,
            l.host_macs,
            l.tile_ops
        )
        .unwrap();
    }
    s
}

pub fn to_table(r: &Report) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "engine {}  network {}  sections {}  sigma {}  seed {}",
        r.engine, r.network, r.sections, r.sigma, r.seed
    )
    .unwrap();
    writeln!(
        s,
        "{:<12} {:<10} {:>16} {:>16} {:>14} {:>12}",
        "layer", "kind", "energy_pj", "latency_ns", "binary_macs", "host_macs"
    )
    .unwrap();
    for l in r.layers.iter().chain(std::iter::once(&r.total)) {
        writeln!(
            s,
            "{:<12} {:<10} {:>16.3} {:>16.3} {:>14} {:>12}",
            l.name,
            l.kind.as_deref().unwrap_or(""),
            l.energy_pj,
            l.latency_ns,
            l.binary_macs,
            l.host_macs
        )
        .unwrap();
    }
    writeln!(
        s,
        "inferences {}  per inference: {:.3} pJ, {:.3} ns",
        r.inferences, r.per_inference.energy_pj, r.per_inference.latency_ns
    )
    .unwrap();
    match r.accuracy {
        Some(a) => writeln!(s, "accuracy {:.4} ({}/{})", a, r.correct, r.labeled).unwrap(),
        None => writeln!(s, "accuracy n/a (no labels)").unwrap(),
    }
    writeln!(
        s,
        "popcount error: mean {:.4}  std {:.4}  over {} elements",
        r.popcount_error.mean, r.popcount_error.std, r.popcount_error.count
    )
    .unwrap();
    writeln!(s, "binary MAC fraction {:.6}", r.binary_mac_fraction).unwrap();
    if let Some(b) = &r.baseline {
        writeln!(
            s,
            "vs baseline: energy x{:.3}  latency x{:.3}",
            b.energy_ratio, b.latency_ratio
        )
        .unwrap();
    }
    s
}

/// Per-layer event breakdown behind every energy and latency figure.
pub fn explain(r: &Report, c: &CostConstants) -> String {
    let mut s = String::new();
    for l in r.layers.iter().chain(std::iter::once(&r.total)) {
        writeln!(s, "[{}]", l.name).unwrap();
        for e in &l.events {
            let kind: EventKind = e.event.parse().expect("known event");
            writeln!(
                s,
                "  {:<18} {:>14} x {:>10.5} pJ = {:>18.3} pJ   x {:>6.2} ns = {:>18.3} ns",
                e.event,
                e.count,
                c.event_energy_pj(kind),
                e.energy_pj,
                c.event_latency_ns(kind),
                e.latency_ns
            )
            .unwrap();
        }
        writeln!(
            s,
            "  {:<18} {:>14}   {:>10}    {:>18.3} pJ   {:>8}    {:>18.3} ns",
            "sum", "", "", l.energy_pj, "", l.latency_ns
        )
        .unwrap();
    }
    s
}
