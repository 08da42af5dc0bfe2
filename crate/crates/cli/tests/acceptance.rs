//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use xcelram_core::bitcore::{xnor_popcount_oracle, BinaryVector, BitWord};
use xcelram_core::bnn::lower::tile_vector;
use xcelram_core::bnn::{
    forward, BinaryMap, EngineConfig, EngineKind, Executor, FeatureMap, LayerKind, LayerSpec,
    LayerWeights, Moments, Network, NetworkSpec, Shape, TileLayout,
};
use xcelram_core::costmodel::{op_energy, op_latency, CostConstants, CostMode, OpKind};
use xcelram_core::proposal_a::{self, AdcModel, SlLevel, DEFAULT_SIGMA_COUNTS};
use xcelram_core::proposal_b::{self, AdderTree};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn word(rng: &mut ChaCha8Rng) -> BitWord {
    BitWord::full(rng.random())
}

fn oracle64(a: &BitWord, k: &BitWord) -> u32 {
    let a = BinaryVector::from_raw_words(&[a.bits()], 64).unwrap();
    let k = BinaryVector::from_raw_words(&[k.bits()], 64).unwrap();
    xnor_popcount_oracle(&a, &k).unwrap()
}

fn vector(rng: &mut ChaCha8Rng, n: usize) -> BinaryVector {
    BinaryVector::from_bools(&(0..n).map(|_| rng.random()).collect::<Vec<_>>()).unwrap()
}

fn c1_proposal_b_exact() -> Outcome {
    let tree = AdderTree::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let mismatches = (0..n)
        .filter(|_| {
            let (a, k) = (word(&mut rng), word(&mut rng));
            proposal_b::convolve64_exact(&tree, &a, &k).unwrap() != oracle64(&a, &k)
        })
        .count();
    ensure(
        mismatches == 0,
        format!("{n} random pairs, {mismatches} mismatches"),
    )
}

fn c2_adc_round_trip() -> Outcome {
    let mut model = AdcModel::dual64(0.0, 2).unwrap();
    let bad: Vec<u32> = (0..=32)
        .filter(|&p| model.convert(&SlLevel::new(p, 32).unwrap()).unwrap() != p)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let mismatches = (0..n)
        .filter(|_| {
            let (a, k) = (word(&mut rng), word(&mut rng));
            proposal_a::convolve64(&a, &k, &mut model).unwrap() != oracle64(&a, &k)
        })
        .count();
    ensure(
        bad.is_empty() && mismatches == 0,
        format!("p in 0..=32 failing: {bad:?}; {n} convolve64 pairs, {mismatches} mismatches"),
    )
}

fn std_of(errors: impl Iterator<Item = i64>) -> f64 {
    let mut m = Moments::default();
    errors.for_each(|e| m.push(e));
    m.std()
}

fn c3_noise_statistics() -> Outcome {
    let sigma = DEFAULT_SIGMA_COUNTS;
    let mut model = AdcModel::dual64(sigma, 3).unwrap();
    let trials = 10_000;
    let stds: Vec<f64> = (0..=32u32)
        .map(|p| {
            let level = SlLevel::new(p, 32).unwrap();
            std_of((0..trials).map(|_| model.convert(&level).unwrap() as i64 - p as i64))
        })
        .collect();
    // Interior cases see two-sided noise; p = 0 and p = 32 sit on the rails
    // of the decodable range, so clamping leaves only one-sided error.
    let interior = &stds[1..32];
    let lo = interior.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = interior.iter().cloned().fold(0.0, f64::max);
    let mean = interior.iter().sum::<f64>() / interior.len() as f64;
    let in_band = |s: f64| (0.37..=0.50).contains(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let full = std_of((0..trials).map(|_| {
        let (a, k) = (word(&mut rng), word(&mut rng));
        proposal_a::convolve64(&a, &k, &mut model).unwrap() as i64 - oracle64(&a, &k) as i64
    }));
    let target = sigma * 2f64.sqrt();
    let rel = (full - target).abs() / target;
    ensure(
        interior.iter().all(|&s| in_band(s)) && in_band(mean) && rel < 0.15,
        format!(
            "half-row std over p = 1..31: min {lo:.4} max {hi:.4} mean {mean:.4} \
             (rails p = 0: {:.4}, p = 32: {:.4}); full-word std {full:.4} vs {target:.4} ({:.1}%)",
            stds[0],
            stds[32],
            rel * 100.0
        ),
    )
}

fn c4_distributivity() -> Outcome {
    let tree = AdderTree::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.random_range(65..=1024);
        let (a, k) = (vector(&mut rng, n), vector(&mut rng, n));
        let whole = xnor_popcount_oracle(&a, &k).unwrap();
        // Arbitrary row splits.
        let mut cuts: Vec<usize> = (0..rng.random_range(1..8))
            .map(|_| rng.random_range(1..n))
            .collect();
        cuts.extend([0, n]);
        cuts.sort_unstable();
        cuts.dedup();
        let split: u32 = cuts
            .windows(2)
            .map(|w| {
                xnor_popcount_oracle(&a.slice(w[0], w[1]).unwrap(), &k.slice(w[0], w[1]).unwrap())
                    .unwrap()
            })
            .sum();
        // 64-bit tiles through the adder tree, minus the padding correction.
        let layout = TileLayout::new(n).unwrap();
        let tiled: u32 = tile_vector(&a)
            .iter()
            .zip(tile_vector(&k).iter())
            .map(|(x, y)| proposal_b::convolve64_exact(&tree, x, y).unwrap())
            .sum::<u32>()
            - layout.correction;
        bad += (split != whole || tiled != whole) as usize;
    }
    ensure(
        bad == 0,
        format!("200 vectors of length 65..=1024, {bad} mismatches"),
    )
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn xcelram(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_xcelram"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("spawn xcelram");
    assert!(
        out.status.success(),
        "xcelram {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_json(args: &[&str]) -> Value {
    let mut a = vec!["run", "--format", "json"];
    a.extend_from_slice(args);
    serde_json::from_slice(&xcelram(&a).stdout).expect("json report")
}

fn event(layer: &Value, name: &str) -> u64 {
    layer["events"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["event"] == name)
        .map_or(0, |e| e["count"].as_u64().unwrap())
}

fn c5_sectioning() -> Outcome {
    let common = [
        "--network",
        "configs/toy.net",
        "--engine",
        "proposal_a",
        "--seed",
        "5",
    ];
    let one = run_json(&[&common[..], &["--sections", "1"]].concat());
    let four = run_json(&[&common[..], &["--sections", "4"]].concat());
    let (p1, p4) = (
        event(&one["total"], "pseudo_read_batch"),
        event(&four["total"], "pseudo_read_batch"),
    );
    let ratio = one["total"]["compute_energy_pj"].as_f64().unwrap()
        / four["total"]["compute_energy_pj"].as_f64().unwrap();
    let want = 2.496;
    let rel = (ratio - want).abs() / want;
    ensure(
        p4 > 0 && p1 == 4 * p4 && rel <= 1e-3,
        format!(
            "pseudo-reads {p1} vs {p4}; compute energy ratio {ratio:.5} vs {want} ({:.3}%)",
            rel * 100.0
        ),
    )
}

fn c6_cost_arithmetic() -> Outcome {
    let c = CostConstants::default();
    let e = op_energy(OpKind::Conv64, CostMode::ProposalB, &c).unwrap();
    let t = op_latency(OpKind::Conv64, CostMode::ProposalB, 1, &c).unwrap();
    let batch = op_latency(OpKind::Conv64, CostMode::ProposalA { sections: 4 }, 4, &c).unwrap();
    let rel = (e - 1.977).abs() / 1.977;
    ensure(
        rel <= 1e-3 && (t - 1.3).abs() < 1e-9 && (batch - 45.0).abs() < 1e-9,
        format!(
            "Proposal-B op {e:.5} pJ ({:.3}%), {t} ns; Proposal-A batch of 4 {batch} ns",
            rel * 100.0
        ),
    )
}

/// Dense ±1 reference in `[c][y][x]` order.
fn dense(m: &FeatureMap) -> Vec<i64> {
    let s = m.shape();
    let b = m.to_binary();
    let mut v = Vec::new();
    for c in 0..s.channels {
        for y in 0..s.height {
            for x in 0..s.width {
                v.push(if b.get(c, y, x) { 1 } else { -1 });
            }
        }
    }
    v
}

fn reference(layer: &LayerSpec, w: &LayerWeights, s: Shape, x: &[i64]) -> Vec<i64> {
    let LayerWeights::Binary {
        kernels,
        thresholds,
    } = w
    else {
        unreachable!()
    };
    let (c_n, h, wd) = (s.channels as i64, s.height as i64, s.width as i64);
    let at = |c: i64, y: i64, xx: i64| {
        if y < 0 || xx < 0 || y >= h || xx >= wd {
            -1
        } else {
            x[((c * h + y) * wd + xx) as usize]
        }
    };
    let n = layer.kernel_size() as i64;
    let thr = thresholds.as_ref().or(layer.thresholds.as_ref());
    let fire = |o: usize, dot: i64| match thr {
        Some(t) => (dot + n) / 2 > t[o],
        None => dot > 0,
    };
    let sign = |b: bool| if b { 1 } else { -1 };
    match layer.kind {
        LayerKind::Fc => {
            let mut flat = Vec::new();
            for y in 0..h {
                for xx in 0..wd {
                    for c in 0..c_n {
                        flat.push(at(c, y, xx));
                    }
                }
            }
            kernels
                .iter()
                .enumerate()
                .map(|(o, k)| {
                    let dot: i64 = flat
                        .iter()
                        .enumerate()
                        .map(|(i, &a)| a * sign(k.bit(i)))
                        .sum();
                    sign(fire(o, dot))
                })
                .collect()
        }
        LayerKind::Conv => {
            let (k, st, p) = (layer.k as i64, layer.stride as i64, layer.padding as i64);
            let (oh, ow) = ((h + 2 * p - k) / st + 1, (wd + 2 * p - k) / st + 1);
            let mut out = Vec::new();
            for (o, kern) in kernels.iter().enumerate() {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut dot = 0;
                        for ky in 0..k {
                            for kx in 0..k {
                                for c in 0..c_n {
                                    let i = ((ky * k + kx) * c_n + c) as usize;
                                    dot += at(c, oy * st + ky - p, ox * st + kx - p)
                                        * sign(kern.bit(i));
                                }
                            }
                        }
                        out.push(sign(fire(o, dot)));
                    }
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

fn random_map(rng: &mut ChaCha8Rng, s: Shape) -> FeatureMap {
    let bits: Vec<bool> = (0..s.len()).map(|_| rng.random()).collect();
    FeatureMap::Binary(BinaryMap::from_bits(s, &bits).unwrap())
}

fn c7_bnn_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let layers = 60;
    let mut bad = 0;
    for _ in 0..layers {
        let (layer, s) = if rng.random_bool(0.3) {
            let s = Shape::new(
                rng.random_range(1..=16),
                rng.random_range(1..=3),
                rng.random_range(1..=3),
            );
            (
                LayerSpec::fc("fc", s.len() as u32, rng.random_range(1..=24)),
                s,
            )
        } else {
            let k = rng.random_range(1..=3);
            let s = Shape::new(
                rng.random_range(1..=40),
                rng.random_range(k..=6),
                rng.random_range(k..=6),
            );
            let l = LayerSpec::conv("conv", k, s.channels, rng.random_range(1..=12))
                .with_padding(rng.random_range(0..k))
                .with_stride(rng.random_range(1..=2));
            (l, s)
        };
        let n = layer.kernel_size();
        let w = LayerWeights::Binary {
            kernels: (0..layer.out_channels)
                .map(|_| vector(&mut rng, n))
                .collect(),
            thresholds: rng.random_bool(0.3).then(|| {
                (0..layer.out_channels)
                    .map(|_| rng.random_range(0..=n as i64))
                    .collect()
            }),
        };
        let input = random_map(&mut rng, s);
        let mut exec = Executor::new(EngineConfig::new(EngineKind::Oracle)).unwrap();
        let got = exec.run_layer(&layer, &input, &w).unwrap();
        bad += (dense(&got) != reference(&layer, &w, s, &dense(&input))) as usize;
    }
    let spec = NetworkSpec {
        name: "three".into(),
        input: Shape::new(6, 6, 6),
        classes: 24,
        layers: vec![
            LayerSpec::conv("c1", 3, 6, 12).with_padding(1),
            LayerSpec::conv("c2", 3, 12, 16)
                .with_padding(1)
                .with_stride(2),
            LayerSpec::fc("f1", 16 * 3 * 3, 24),
        ],
    };
    let shapes = spec.shapes().unwrap();
    let net = Network::random(spec, 77).unwrap();
    let mut net_bad = 0;
    for _ in 0..5 {
        let image = random_map(&mut rng, net.spec().input);
        let mut exec = Executor::new(EngineConfig::new(EngineKind::Oracle)).unwrap();
        let maps = forward(&net, &image, &mut exec).unwrap();
        let mut x = dense(&image);
        for (((l, w), s), got) in net.layers().zip(&shapes).zip(&maps) {
            x = reference(l, w, *s, &x);
            net_bad += (dense(got) != x) as usize;
        }
    }
    ensure(
        bad == 0 && net_bad == 0,
        format!("{layers} random layers: {bad} differ; 3-layer network x5 inputs: {net_bad} layer outputs differ"),
    )
}

fn c8_noise_propagation() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [64usize, 256, 1152] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let layer = LayerSpec::fc("fc", n as u32, 64);
        let w = LayerWeights::Binary {
            kernels: (0..64).map(|_| vector(&mut rng, n)).collect(),
            thresholds: None,
        };
        let config = EngineConfig::new(EngineKind::ProposalA).with_seed(8);
        let mut exec = Executor::new(config).unwrap();
        while exec.errors().overall().count < 10_000 {
            let input = random_map(&mut rng, Shape::new(n as u32, 1, 1));
            exec.run_layer(&layer, &input, &w).unwrap();
        }
        for (&m, e) in exec.errors().by_conversions() {
            let predicted = DEFAULT_SIGMA_COUNTS * (m as f64).sqrt();
            let rel = (e.std() - predicted).abs() / predicted;
            ok &= rel < 0.15 && m == n.div_ceil(32);
            lines.push(format!(
                "M={m}: {:.4} vs {predicted:.4} ({:.1}%, {} samples)",
                e.std(),
                rel * 100.0,
                e.count
            ));
        }
    }
    ensure(ok, lines.join("; "))
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c9_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let toy = tmp.path().join("toy");
    let toy_s = toy.to_str().unwrap();
    xcelram(&[
        "gen-toy-data",
        "--network",
        "configs/toy.net",
        "--out",
        toy_s,
        "--images",
        "16",
    ]);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let (net, weights, data) = (
        toy.join("network.net"),
        toy.join("weights"),
        toy.join("data"),
    );
    let args = [
        "run",
        "--network",
        net.to_str().unwrap(),
        "--weights",
        weights.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--engine",
        "proposal_a",
        "--sigma",
        "0.8",
        "--seed",
        "99",
        "--trials",
        "3",
        "--baseline",
        "--explain",
        "--out",
        out_s,
    ];
    xcelram(&args);
    let first = read_dir_files(&out);
    xcelram(&args);
    let second = read_dir_files(&out);
    let mut parallel = args.to_vec();
    parallel.extend(["--jobs", "4"]);
    xcelram(&parallel);
    let third = read_dir_files(&out);
    let same_json = first
        .iter()
        .zip(&third)
        .all(|(a, b)| a.0 == "effective_config.ini" || a == b);
    let names: Vec<&str> = first.iter().map(|f| f.0.as_str()).collect();
    ensure(
        first.len() >= 3 && first == second && same_json,
        format!(
            "files {names:?}: repeat run identical {}, --jobs 4 identical {same_json}",
            first == second
        ),
    )
}

fn c10_binary_fraction() -> Outcome {
    let r = run_json(&[
        "--network",
        "configs/cifar10_bnn.net",
        "--engine",
        "baseline",
    ]);
    let (mut binary, mut host) = (0u64, 0u64);
    for l in r["layers"].as_array().unwrap() {
        let kind: LayerKind = l["kind"].as_str().unwrap().parse().unwrap();
        let macs = l["binary_macs"].as_u64().unwrap() + l["host_macs"].as_u64().unwrap();
        if kind.binarized() {
            binary += macs;
        } else {
            host += macs;
        }
    }
    let frac = binary as f64 / (binary + host) as f64;
    let reported = r["binary_mac_fraction"].as_f64().unwrap();
    ensure(
        frac >= 0.99 && (frac - reported).abs() < 1e-12,
        format!(
            "{binary} binarized / {} total MACs = {frac:.6}",
            binary + host
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 oracle exactness (Proposal-B)", c1_proposal_b_exact),
        (
            "2 noise-free ADC round trip (Proposal-A)",
            c2_adc_round_trip,
        ),
        ("3 noise statistics", c3_noise_statistics),
        ("4 distributivity", c4_distributivity),
        ("5 sectioning economics", c5_sectioning),
        ("6 cost arithmetic", c6_cost_arithmetic),
        ("7 end-to-end BNN equivalence", c7_bnn_equivalence),
        ("8 noise propagation", c8_noise_propagation),
        ("9 determinism", c9_determinism),
        ("10 binary compute fraction", c10_binary_fraction),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {name}: {detail} [{:.1}s]",
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/10 passed in {:.1}s",
        10 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
