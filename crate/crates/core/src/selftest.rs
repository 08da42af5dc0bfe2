//! Embedded consistency checks run by `xcelram selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitcore::{xnor_popcount_oracle, BinaryVector, BitWord};
use crate::error::Result;
use crate::proposal_a::{self, AdcModel, SlLevel};
use crate::proposal_b::{self, AdderTree};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const CASES: usize = 2000;

fn check(name: &'static str, f: impl FnOnce() -> Result<Option<String>>) -> Check {
    match f() {
        Ok(None) => Check {
            name,
            passed: true,
            detail: String::new(),
        },
        Ok(Some(detail)) => Check {
            name,
            passed: false,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Noise-free stage 1 + stage 2 + decode returns every pullup count.
fn adc_round_trip() -> Result<Option<String>> {
    for active in [32u32, 64] {
        for p in 0..=active {
            let level = SlLevel::new(p, active)?;
            let sc = proposal_a::adc_stage1(&level);
            let count = proposal_a::ideal_count(&level, sc);
            let back = proposal_a::adc_decode(sc, count, active)?;
            if back != p {
                return Ok(Some(format!(
                    "A = {active}, p = {p}: {sc} count {count} decodes to {back}"
                )));
            }
        }
    }
    Ok(None)
}

fn random_word(rng: &mut ChaCha8Rng) -> BitWord {
    BitWord::full(rng.random())
}

fn proposal_b_matches_oracle() -> Result<Option<String>> {
    let tree = AdderTree::new(64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xb);
    for _ in 0..CASES {
        let (a, k) = (random_word(&mut rng), random_word(&mut rng));
        let got = proposal_b::convolve64_exact(&tree, &a, &k)?;
        let want = oracle(&a, &k)?;
        if got != want {
            return Ok(Some(format!(
                "{:#x} vs {:#x}: {got} != {want}",
                a.bits(),
                k.bits()
            )));
        }
    }
    Ok(None)
}

fn proposal_a_noise_free_matches_oracle() -> Result<Option<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa);
    let mut model = AdcModel::dual64(0.0, 1)?;
    for _ in 0..CASES {
        let (a, k) = (random_word(&mut rng), random_word(&mut rng));
        let got = proposal_a::convolve64(&a, &k, &mut model)?;
        let want = oracle(&a, &k)?;
        if got != want {
            return Ok(Some(format!(
                "{:#x} vs {:#x}: {got} != {want}",
                a.bits(),
                k.bits()
            )));
        }
    }
    Ok(None)
}

fn oracle(a: &BitWord, k: &BitWord) -> Result<u32> {
    let a = BinaryVector::from_raw_words(&[a.bits()], 64)?;
    let k = BinaryVector::from_raw_words(&[k.bits()], 64)?;
    xnor_popcount_oracle(&a, &k)
}

pub fn run() -> SelftestReport {
    SelftestReport {
        checks: vec![
            check("adc_round_trip", adc_round_trip),
            check("proposal_b_vs_oracle", proposal_b_matches_oracle),
            check(
                "proposal_a_sigma0_vs_oracle",
                proposal_a_noise_free_matches_oracle,
            ),
        ],
    }
}
