//! Subarray geometry, row storage, the pseudo-read step and sectioned
//! dispatch.
//!
//! A bank holds `subarrays_per_bank` subarrays of kernel rows, each split by
//! bitline switches into `sections` of `rows_per_section` rows. Activation
//! rows live in a separate unsectioned region of `activation_rows` rows whose
//! pseudo-read charges the bitlines shared by every section.

use crate::bitcore::{BitWord, WORD_BITS};
use crate::costmodel::{CostLedger, EventKind};
use crate::error::{Error, Result};
use crate::proposal_a::{self, AdcModel, Readout};
use crate::proposal_b::{self, AdderTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayGeometry {
    pub columns: u32,
    pub rows_per_section: u32,
    pub sections: u32,
    pub subarrays_per_bank: u32,
    pub activation_rows: u32,
    pub dual_rwl: bool,
}

impl Default for ArrayGeometry {
    /// 64KB bank of 64 subarrays, each 4 sections of 32 x 64-bit rows.
    fn default() -> Self {
        Self {
            columns: 64,
            rows_per_section: 32,
            sections: 4,
            subarrays_per_bank: 64,
            activation_rows: 32,
            dual_rwl: true,
        }
    }
}

impl ArrayGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.columns == 0 || self.columns > WORD_BITS {
            return bad(format!("columns must be in 1..=64, got {}", self.columns));
        }
        if self.dual_rwl && !self.columns.is_multiple_of(2) {
            return bad(format!(
                "dual RWL needs an even column count, got {}",
                self.columns
            ));
        }
        if self.sections == 0 || self.rows_per_section == 0 {
            return bad("sections and rows_per_section must be >= 1".into());
        }
        if self.subarrays_per_bank == 0 || self.activation_rows == 0 {
            return bad("subarrays_per_bank and activation_rows must be >= 1".into());
        }
        Ok(())
    }

    pub fn readout(&self) -> Readout {
        if self.dual_rwl {
            Readout::Dual
        } else {
            Readout::Single
        }
    }

    pub fn rows_per_subarray(&self) -> u32 {
        self.sections * self.rows_per_section
    }

    pub fn kernel_rows(&self) -> usize {
        self.subarrays_per_bank as usize * self.rows_per_subarray() as usize
    }

    /// Placement of tile `tile` of kernel `kernel` when every kernel spans
    /// `tiles` rows: kernels go round-robin across sections, and each
    /// section fills its rows sequentially, spilling into later subarrays.
    /// Kernels `g*n .. g*n+n` therefore share row and subarray for a tile.
    pub fn place_kernel(&self, kernel: usize, tile: usize, tiles: usize) -> Result<KernelAddress> {
        let n = self.sections as usize;
        let linear = (kernel / n) * tiles + tile;
        let rows = self.rows_per_section as usize;
        let addr = KernelAddress {
            subarray: (linear / rows) as u32,
            section: (kernel % n) as u32,
            row: (linear % rows) as u32,
        };
        self.check_kernel(&addr)?;
        Ok(addr)
    }

    /// Number of kernels of `tiles` rows each that fit in one bank load,
    /// rounded down to a whole number of section groups.
    pub fn kernel_capacity(&self, tiles: usize) -> usize {
        let per_section = self.subarrays_per_bank as usize * self.rows_per_section as usize;
        (per_section / tiles.max(1)) * self.sections as usize
    }

    fn check_kernel(&self, a: &KernelAddress) -> Result<()> {
        if a.subarray >= self.subarrays_per_bank
            || a.section >= self.sections
            || a.row >= self.rows_per_section
        {
            return Err(Error::InvalidAddress(format!(
                "{a:?} outside {} subarrays x {} sections x {} rows",
                self.subarrays_per_bank, self.sections, self.rows_per_section
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelAddress {
    pub subarray: u32,
    pub section: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActivationAddress(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowAddress {
    Activation(ActivationAddress),
    Kernel(KernelAddress),
}

/// Bits latched on the read bitlines by a pseudo-read. Consumed by the
/// sectioned dispatch that uses it.
#[derive(Debug)]
pub struct LineState {
    activation: BitWord,
    valid: bool,
}

impl LineState {
    pub fn activation(&self) -> &BitWord {
        &self.activation
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    /// Bitlines are precharged again; the latched data is gone.
    pub fn precharge(&mut self) {
        self.valid = false;
    }
}

#[derive(Debug, Clone)]
pub struct SectionedBank {
    geometry: ArrayGeometry,
    activations: Vec<Option<BitWord>>,
    kernels: Vec<Option<BitWord>>,
}

impl SectionedBank {
    pub fn new(geometry: ArrayGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(Self {
            geometry,
            activations: vec![None; geometry.activation_rows as usize],
            kernels: vec![None; geometry.kernel_rows()],
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    fn kernel_slot(&self, a: &KernelAddress) -> Result<usize> {
        self.geometry.check_kernel(a)?;
        let g = &self.geometry;
        Ok((a.subarray * g.rows_per_subarray() + a.section * g.rows_per_section + a.row) as usize)
    }

    fn activation_slot(&self, a: &ActivationAddress) -> Result<usize> {
        if a.0 >= self.geometry.activation_rows {
            return Err(Error::InvalidAddress(format!(
                "activation row {} outside {} rows",
                a.0, self.geometry.activation_rows
            )));
        }
        Ok(a.0 as usize)
    }

    fn slot_mut(&mut self, addr: RowAddress) -> Result<&mut Option<BitWord>> {
        match addr {
            RowAddress::Activation(a) => {
                let i = self.activation_slot(&a)?;
                Ok(&mut self.activations[i])
            }
            RowAddress::Kernel(k) => {
                let i = self.kernel_slot(&k)?;
                Ok(&mut self.kernels[i])
            }
        }
    }

    fn stored(&self, addr: RowAddress) -> Result<BitWord> {
        let slot = match addr {
            RowAddress::Activation(a) => self.activations[self.activation_slot(&a)?],
            RowAddress::Kernel(k) => self.kernels[self.kernel_slot(&k)?],
        };
        slot.ok_or_else(|| Error::UnwrittenRow(format!("{addr:?}")))
    }

    pub fn write_row(
        &mut self,
        addr: RowAddress,
        word: BitWord,
        ledger: &mut CostLedger,
    ) -> Result<()> {
        if word.width() != self.geometry.columns {
            return Err(Error::WidthMismatch {
                left: word.width() as usize,
                right: self.geometry.columns as usize,
            });
        }
        *self.slot_mut(addr)? = Some(word);
        ledger.record(EventKind::SramWrite, 1);
        Ok(())
    }

    /// Conventional read through the sense amplifiers.
    pub fn read_row(&self, addr: RowAddress, ledger: &mut CostLedger) -> Result<BitWord> {
        let w = self.stored(addr)?;
        ledger.record(EventKind::SramRead, 1);
        Ok(w)
    }

    /// Precharge and discharge the bitlines through an activation row
    /// without firing the sense amplifiers.
    pub fn pseudo_read(
        &self,
        addr: ActivationAddress,
        ledger: &mut CostLedger,
    ) -> Result<LineState> {
        let activation = self.stored(RowAddress::Activation(addr))?;
        ledger.record(EventKind::PseudoReadBatch, 1);
        Ok(LineState {
            activation,
            valid: true,
        })
    }

    /// Dual-wordline read of an activation row and a kernel row followed by
    /// the bit-tree adder.
    pub fn dual_row_popcount(
        &self,
        activation: ActivationAddress,
        kernel: KernelAddress,
        tree: &AdderTree,
        ledger: &mut CostLedger,
    ) -> Result<u32> {
        let a = self.stored(RowAddress::Activation(activation))?;
        let k = self.stored(RowAddress::Kernel(kernel))?;
        let p = proposal_b::convolve64_exact(tree, &a, &k)?;
        ledger.record(EventKind::DualRead, 1);
        ledger.record(EventKind::Adder, 1);
        Ok(p)
    }

    /// Convolves the latched line against one kernel row per section at
    /// once. The line is consumed: one pseudo-read serves all results.
    pub fn sectioned_convolve(
        &self,
        mut line: LineState,
        kernel_rows: &[KernelAddress],
        live_bits: u32,
        engine: &mut dyn PopcountEngine,
        ledger: &mut CostLedger,
    ) -> Result<Vec<u32>> {
        if !line.valid {
            return Err(Error::InvalidLine);
        }
        if !engine.sectionable() {
            return Err(Error::Config(format!(
                "{} engine does not support sectioned dispatch",
                engine.name()
            )));
        }
        if kernel_rows.is_empty() || kernel_rows.len() > self.geometry.sections as usize {
            return Err(Error::InvalidAddress(format!(
                "{} kernel rows for {} sections",
                kernel_rows.len(),
                self.geometry.sections
            )));
        }
        let mut seen = vec![false; self.geometry.sections as usize];
        let mut out = Vec::with_capacity(kernel_rows.len());
        for addr in kernel_rows {
            let k = self.stored(RowAddress::Kernel(*addr))?;
            let s = addr.section as usize;
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidAddress(format!(
                    "section {s} addressed twice in one dispatch"
                )));
            }
            out.push(engine.row_popcount(s, &line.activation, &k, live_bits)?);
        }
        line.precharge();
        ledger.record(EventKind::AdcConversion, out.len() as u64);
        Ok(out)
    }
}

/// Per-row popcount unit attached to a section.
pub trait PopcountEngine {
    fn name(&self) -> &'static str;

    /// Whether one pseudo-read may be shared across sections.
    fn sectionable(&self) -> bool;

    /// XNOR+popcount of one row; only the first `live_bits` columns carry
    /// data, the rest are matched padding.
    fn row_popcount(
        &mut self,
        section: usize,
        activation: &BitWord,
        kernel: &BitWord,
        live_bits: u32,
    ) -> Result<u32>;
}

/// Ideal popcount with no conversion error.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactEngine;

impl PopcountEngine for ExactEngine {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn sectionable(&self) -> bool {
        true
    }

    fn row_popcount(&mut self, _: usize, a: &BitWord, k: &BitWord, _: u32) -> Result<u32> {
        Ok(a.xnor(k)?.popcount())
    }
}

/// Charge-sharing engine with one ADC (and noise stream) per section.
#[derive(Debug, Clone)]
pub struct ProposalAEngine {
    adcs: Vec<AdcModel>,
}

impl ProposalAEngine {
    pub fn new(geometry: &ArrayGeometry, sigma: f64, seed: u64) -> Result<Self> {
        geometry.validate()?;
        let adcs = (0..geometry.sections)
            .map(|s| {
                AdcModel::new(
                    sigma,
                    section_seed(seed, s),
                    geometry.readout(),
                    geometry.columns,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { adcs })
    }

    pub fn adc(&self, section: usize) -> &AdcModel {
        &self.adcs[section]
    }

    pub fn reseed(&mut self, seed: u64) {
        for (s, adc) in self.adcs.iter_mut().enumerate() {
            adc.reseed(section_seed(seed, s as u32));
        }
    }
}

fn section_seed(seed: u64, section: u32) -> u64 {
    crate::mix_seed(&[seed, section as u64])
}

impl PopcountEngine for ProposalAEngine {
    fn name(&self) -> &'static str {
        "proposal_a"
    }

    fn sectionable(&self) -> bool {
        true
    }

    fn row_popcount(
        &mut self,
        section: usize,
        a: &BitWord,
        k: &BitWord,
        live_bits: u32,
    ) -> Result<u32> {
        let adc = self
            .adcs
            .get_mut(section)
            .ok_or_else(|| Error::InvalidAddress(format!("no ADC for section {section}")))?;
        proposal_a::convolve_row(a, k, live_bits, adc)
    }
}

/// Digital adder-tree engine. Not sectionable.
#[derive(Debug, Clone)]
pub struct ProposalBEngine {
    tree: AdderTree,
}

impl ProposalBEngine {
    pub fn new(columns: u32) -> Result<Self> {
        Ok(Self {
            tree: AdderTree::new(columns)?,
        })
    }

    pub fn tree(&self) -> &AdderTree {
        &self.tree
    }
}

impl PopcountEngine for ProposalBEngine {
    fn name(&self) -> &'static str {
        "proposal_b"
    }

    fn sectionable(&self) -> bool {
        false
    }

    fn row_popcount(&mut self, _: usize, a: &BitWord, k: &BitWord, _: u32) -> Result<u32> {
        proposal_b::convolve64_exact(&self.tree, a, k)
    }
}

/// Sum of per-row partial popcounts of a kernel spanning several rows.
pub fn large_kernel_popcount(partials: &[u32], columns: u32) -> Result<u32> {
    partials.iter().try_fold(0u32, |acc, &p| {
        if p > columns {
            Err(Error::OutOfRange {
                value: p as i64,
                max: columns as i64,
            })
        } else {
            Ok(acc + p)
        }
    })
}

/// `true` iff the popcount is strictly greater than half the kernel size.
pub fn threshold_activation(total_popcount: u32, kernel_size: u32) -> Result<bool> {
    if total_popcount > kernel_size {
        return Err(Error::OutOfRange {
            value: total_popcount as i64,
            max: kernel_size as i64,
        });
    }
    Ok(2 * total_popcount as u64 > kernel_size as u64)
}
