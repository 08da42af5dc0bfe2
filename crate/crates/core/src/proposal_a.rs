//! Charge-sharing XNOR on the source line, dual read-wordline readout and
//! the two-stage ADC with Gaussian count noise.
//!
//! The source-line voltage after charge sharing is modelled as equally spaced
//! levels `pullups / active_cells` in units of VDD. Stage 1 compares it with
//! VDD/4, VDD/2 and 3VDD/4 to pick one of four subclasses; stage 2 pumps
//! charge one level per cycle toward the subclass reference and counts the
//! cycles. With 32 active cells the subclasses are
//!
//! | subclass | voltage      | pull-ups | reference | pump | nominal counts |
//! |----------|--------------|----------|-----------|------|----------------|
//! | SC1      | [0, 1/4)     | 0..=7    | 8         | in   | 1..=8          |
//! | SC2      | [1/4, 1/2)   | 8..=15   | 16        | in   | 1..=8          |
//! | SC3      | [1/2, 3/4]   | 16..=24  | 16        | out  | 0..=8          |
//! | SC4      | (3/4, 1]     | 25..=32  | 24        | out  | 1..=8          |
//!
//! Counter noise can push the count past its nominal range; any count that
//! still decodes into `[0, active_cells]` is accepted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::bitcore::BitWord;
use crate::error::{Error, Result};

/// Average standard deviation of the stage-2 count under process variation.
pub const DEFAULT_SIGMA_COUNTS: f64 = 0.4359;

/// Readout scheme for one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Two half-row phases (RWL1a then RWL1b), each over `columns / 2` cells.
    Dual,
    /// Whole row at once. Half the sense margin, so twice the count noise.
    Single,
}

impl Readout {
    pub fn name(&self) -> &'static str {
        match self {
            Readout::Dual => "dual",
            Readout::Single => "single",
        }
    }
}

impl std::str::FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(Readout::Dual),
            "single" => Ok(Readout::Single),
            other => Err(Error::Config(format!("unknown readout `{other}`"))),
        }
    }
}

/// Charge-shared source-line state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlLevel {
    pullups: u32,
    active_cells: u32,
}

impl SlLevel {
    pub fn new(pullups: u32, active_cells: u32) -> Result<Self> {
        if active_cells == 0 || pullups > active_cells {
            return Err(Error::OutOfRange {
                value: pullups as i64,
                max: active_cells as i64,
            });
        }
        Ok(Self {
            pullups,
            active_cells,
        })
    }

    pub fn pullups(&self) -> u32 {
        self.pullups
    }

    pub fn active_cells(&self) -> u32 {
        self.active_cells
    }

    /// Voltage in units of VDD.
    pub fn normalized_voltage(&self) -> f64 {
        self.pullups as f64 / self.active_cells as f64
    }
}

/// Stage-1 result, SC1..SC4 as index 0..3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubClass(u8);

impl SubClass {
    pub const SC1: SubClass = SubClass(0);
    pub const SC2: SubClass = SubClass(1);
    pub const SC3: SubClass = SubClass(2);
    pub const SC4: SubClass = SubClass(3);

    pub fn new(index: u8) -> Result<Self> {
        if index > 3 {
            return Err(Error::OutOfRange {
                value: index as i64,
                max: 3,
            });
        }
        Ok(SubClass(index))
    }

    pub fn index(&self) -> usize {
        self.0 as usize
    }

    /// Stage 2 pumps charge in (toward a higher reference) for SC1/SC2.
    pub fn pumps_in(&self) -> bool {
        self.0 < 2
    }

    /// Counting reference in pull-up levels.
    pub fn reference_level(&self, active_cells: u32) -> i32 {
        let q = (active_cells / 4) as i32;
        match self.0 {
            0 => q,
            1 | 2 => 2 * q,
            _ => 3 * q,
        }
    }
}

impl std::fmt::Display for SubClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SC{}", self.0 + 1)
    }
}

/// XNOR on the source line: each matching cell pulls the line up.
pub fn xnor_on_sl(activation_half: &BitWord, kernel_half: &BitWord) -> Result<SlLevel> {
    let pullups = activation_half.xnor(kernel_half)?.popcount();
    SlLevel::new(pullups, activation_half.width())
}

/// Stage 1: SC1 = [0, 1/4), SC2 = [1/4, 1/2), SC3 = [1/2, 3/4], SC4 = (3/4, 1].
pub fn adc_stage1(level: &SlLevel) -> SubClass {
    let v = level.normalized_voltage();
    if v < 0.25 {
        SubClass::SC1
    } else if v < 0.5 {
        SubClass::SC2
    } else if v <= 0.75 {
        SubClass::SC3
    } else {
        SubClass::SC4
    }
}

/// Noise-free stage-2 count: cycles to reach the subclass reference.
pub fn ideal_count(level: &SlLevel, sc: SubClass) -> i32 {
    let r = sc.reference_level(level.active_cells);
    let p = level.pullups as i32;
    if sc.pumps_in() {
        r - p
    } else {
        p - r
    }
}

/// Counts produced without noise for `sc`.
pub fn nominal_counts(sc: SubClass, active_cells: u32) -> std::ops::RangeInclusive<i32> {
    let q = (active_cells / 4) as i32;
    if sc == SubClass::SC3 {
        0..=q
    } else {
        1..=q
    }
}

/// Counts accepted by the decoder: those mapping into `[0, active_cells]`.
pub fn legal_counts(sc: SubClass, active_cells: u32) -> std::ops::RangeInclusive<i32> {
    let r = sc.reference_level(active_cells);
    let a = active_cells as i32;
    if sc.pumps_in() {
        (r - a)..=r
    } else {
        (-r)..=(a - r)
    }
}

/// Variance of `round(s * Z)` for standard normal `Z`.
fn rounded_gaussian_variance(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    // E[K^2] = sum_k (2k - 1) P(|K| >= k), P(|K| >= k) = erfc((k - 1/2) / (s sqrt 2)).
    let mut var = 0.0;
    for k in 1..10_000 {
        let tail = erfc((k as f64 - 0.5) / (s * std::f64::consts::SQRT_2));
        var += (2 * k - 1) as f64 * tail;
        if tail < 1e-18 {
            break;
        }
    }
    var
}

/// Pre-rounding Gaussian scale whose rounded draws have standard deviation
/// `target` counts.
pub fn calibrated_noise_scale(target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let goal = target * target;
    let (mut lo, mut hi) = (0.0f64, target + 1.0);
    while rounded_gaussian_variance(hi) < goal {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rounded_gaussian_variance(mid) < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-stage ADC with its own seeded noise stream.
///
/// `sigma_counts` is the standard deviation of the integer stage-2 count in
/// dual-RWL mode. Single-RWL mode doubles it.
#[derive(Debug, Clone)]
pub struct AdcModel {
    sigma_counts: f64,
    seed: u64,
    readout: Readout,
    columns: u32,
    scale: f64,
    rng: ChaCha8Rng,
}

impl AdcModel {
    pub fn new(sigma_counts: f64, seed: u64, readout: Readout, columns: u32) -> Result<Self> {
        if !sigma_counts.is_finite() || sigma_counts < 0.0 {
            return Err(Error::Config(format!(
                "sigma must be finite and >= 0, got {sigma_counts}"
            )));
        }
        let cells = match readout {
            Readout::Dual => columns / 2,
            Readout::Single => columns,
        };
        if columns == 0 || columns > 64 || cells % 4 != 0 {
            return Err(Error::InvalidGeometry(format!(
                "{columns} columns give {cells} active cells; the ADC needs a multiple of 4"
            )));
        }
        let effective = match readout {
            Readout::Dual => sigma_counts,
            Readout::Single => 2.0 * sigma_counts,
        };
        Ok(Self {
            sigma_counts,
            seed,
            readout,
            columns,
            scale: calibrated_noise_scale(effective),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// 64 columns, dual readout.
    pub fn dual64(sigma_counts: f64, seed: u64) -> Result<Self> {
        Self::new(sigma_counts, seed, Readout::Dual, 64)
    }

    pub fn sigma_counts(&self) -> f64 {
        self.sigma_counts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn columns(&self) -> u32 {
        self.columns
    }

    pub fn active_cells(&self) -> u32 {
        match self.readout {
            Readout::Dual => self.columns / 2,
            Readout::Single => self.columns,
        }
    }

    /// Standard deviation of the count noise actually applied.
    pub fn effective_sigma(&self) -> f64 {
        match self.readout {
            Readout::Dual => self.sigma_counts,
            Readout::Single => 2.0 * self.sigma_counts,
        }
    }

    /// Rewinds the noise stream to a fresh seed.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn draw_error(&mut self) -> i32 {
        if self.scale == 0.0 {
            return 0;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        (self.scale * z).round() as i32
    }

    /// Stage 2: noisy cycle count, clamped to the decodable range.
    pub fn stage2(&mut self, level: &SlLevel, sc: SubClass) -> Result<i32> {
        if adc_stage1(level) != sc {
            return Err(Error::SubclassMismatch {
                subclass: sc.index(),
                pullups: level.pullups,
            });
        }
        let legal = legal_counts(sc, level.active_cells);
        let noisy = ideal_count(level, sc) + self.draw_error();
        Ok(noisy.clamp(*legal.start(), *legal.end()))
    }

    /// Inverse of the (subclass, ideal count) encoding.
    pub fn decode(&self, sc: SubClass, count: i32) -> Result<u32> {
        adc_decode(sc, count, self.active_cells())
    }

    /// One conversion of a source-line level.
    pub fn convert(&mut self, level: &SlLevel) -> Result<u32> {
        let sc = adc_stage1(level);
        let count = self.stage2(level, sc)?;
        self.decode(sc, count)
    }
}

pub fn adc_stage2(level: &SlLevel, sc: SubClass, model: &mut AdcModel) -> Result<i32> {
    model.stage2(level, sc)
}

pub fn adc_decode(sc: SubClass, count: i32, active_cells: u32) -> Result<u32> {
    if !legal_counts(sc, active_cells).contains(&count) {
        return Err(Error::IllegalCount {
            subclass: sc.index(),
            count,
        });
    }
    let r = sc.reference_level(active_cells);
    let p = if sc.pumps_in() { r - count } else { r + count };
    #[cfg(feature = "fault-inject")]
    let p = if sc == SubClass::SC2 && count == 3 {
        p + 1
    } else {
        p
    };
    Ok(p as u32)
}

/// Full-row XNOR+popcount. Under dual readout the low half (RWL1a) and the
/// high half (RWL1b) are converted separately with independent noise draws.
pub fn convolve64(activation: &BitWord, kernel: &BitWord, model: &mut AdcModel) -> Result<u32> {
    convolve_row(activation, kernel, activation.width(), model)
}

/// Like [`convolve64`] but only the first `live_bits` columns carry data;
/// the rest hold matched padding. A half-row phase with no live columns is
/// skipped and contributes its known all-matched count without a conversion.
pub fn convolve_row(
    activation: &BitWord,
    kernel: &BitWord,
    live_bits: u32,
    model: &mut AdcModel,
) -> Result<u32> {
    if activation.width() != kernel.width() {
        return Err(Error::WidthMismatch {
            left: activation.width() as usize,
            right: kernel.width() as usize,
        });
    }
    if activation.width() != model.columns {
        return Err(Error::WidthMismatch {
            left: activation.width() as usize,
            right: model.columns as usize,
        });
    }
    let total = match model.readout {
        Readout::Single => {
            let level = xnor_on_sl(activation, kernel)?;
            model.convert(&level)?
        }
        Readout::Dual => {
            let (a_lo, a_hi) = activation.split_halves()?;
            let (k_lo, k_hi) = kernel.split_halves()?;
            let half = a_lo.width();
            let mut sum = 0;
            for (i, (a, k)) in [(a_lo, k_lo), (a_hi, k_hi)].into_iter().enumerate() {
                let level = xnor_on_sl(&a, &k)?;
                if live_bits <= i as u32 * half {
                    sum += level.pullups();
                } else {
                    sum += model.convert(&level)?;
                }
            }
            sum
        }
    };
    Ok(total.min(activation.width()))
}

/// Number of noisy conversions [`convolve_row`] performs for `live_bits`.
pub fn conversions_for(live_bits: u32, model: &AdcModel) -> u32 {
    match model.readout {
        Readout::Single => 1,
        Readout::Dual => live_bits.div_ceil(model.columns / 2).clamp(1, 2),
    }
}
