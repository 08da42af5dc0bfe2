//! Behavioral simulator of compute-in-SRAM banks that run binarized neural
//! networks with in-array XNOR+popcount.
//!
//! Two array schemes are modelled: [`proposal_a`] (charge sharing on the
//! source line read by a noisy two-stage ADC) and [`proposal_b`] (dual
//! wordline bitwise XNOR and a digital adder tree). [`costmodel`] turns the
//! events both generate into energy and latency, alongside a conventional
//! SRAM baseline.

pub mod array_model;
pub mod bitcore;
pub mod bnn;
pub mod costmodel;
pub mod error;
pub mod proposal_a;
pub mod proposal_b;
pub mod selftest;
pub mod tensor;

pub use error::{Error, Result};

/// Deterministically combines seed components (SplitMix64 finalizer).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}
