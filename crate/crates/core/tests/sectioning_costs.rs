//! Section-count economics measured end to end through layer execution.

use xcelram_core::bnn::{toy, EngineConfig, EngineKind, Executor, Network, NetworkSpec};
use xcelram_core::costmodel::{CostConstants, EventKind};

const TOY: &str = include_str!("../../../configs/toy.net");

fn run(sections: u32) -> Executor {
    let spec = NetworkSpec::parse(TOY).unwrap();
    let net = Network::random(spec, 5).unwrap();
    let config = EngineConfig::new(EngineKind::ProposalA).with_sections(sections);
    let mut exec = Executor::new(config).unwrap();
    for i in 0..3 {
        let image = toy::random_image(net.spec().input, 4, i);
        xcelram_core::bnn::infer(&net, &image, &mut exec).unwrap();
    }
    exec
}

#[test]
fn four_sections_quarter_the_pseudo_reads() {
    let c = CostConstants::default();
    let one = run(1);
    let four = run(4);
    let (l1, l4) = (one.ledger(), four.ledger());
    assert_eq!(
        l1.count(EventKind::PseudoReadBatch),
        4 * l4.count(EventKind::PseudoReadBatch)
    );
    assert_eq!(
        l1.count(EventKind::AdcConversion),
        l4.count(EventKind::AdcConversion)
    );
    let (r1, r4) = (l1.report(&c), l4.report(&c));
    let ratio = r1.total.compute_energy_pj / r4.total.compute_energy_pj;
    let want = c.a_energy_unsectioned_pj / c.a_energy_sectioned_pj;
    assert!((ratio / want - 1.0).abs() < 1e-3, "{ratio} vs {want}");
    for (a, b) in r1.layers.iter().zip(&r4.layers) {
        assert_eq!(a.ops, b.ops);
        if a.compute_energy_pj > 0.0 {
            assert!((a.compute_energy_pj / b.compute_energy_pj / want - 1.0).abs() < 1e-3);
        }
    }
}

#[test]
fn section_count_does_not_change_results() {
    let spec = NetworkSpec::parse(TOY).unwrap();
    let net = Network::random(spec, 8).unwrap();
    let image = toy::random_image(net.spec().input, 4, 0);
    let classes: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&n| {
            let c = EngineConfig::new(EngineKind::ProposalA)
                .with_sections(n)
                .with_sigma(0.0);
            xcelram_core::bnn::infer(&net, &image, &mut Executor::new(c).unwrap()).unwrap()
        })
        .collect();
    assert!(classes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn ledger_merge_matches_single_run() {
    let a = run(4);
    let b = run(4);
    let mut merged = a.ledger().clone();
    merged.merge(b.ledger());
    for k in EventKind::ALL {
        assert_eq!(merged.count(k), 2 * a.ledger().count(k));
    }
}
