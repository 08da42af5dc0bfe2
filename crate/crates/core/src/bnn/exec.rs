//! Layer execution on a bank under one engine, with cost events recorded
//! into a [`CostLedger`] tagged by layer name.
//!
//! Binarized layers run in kernel chunks sized to one bank load. Each
//! kernel row is fetched from DRAM and written once per chunk; each output
//! pixel writes its receptive-field tiles into the activation row one at a
//! time. Under Proposal-A (and the ideal oracle) one pseudo-read of a tile
//! serves the kernels of `n` output channels placed in the `n` sections;
//! under Proposal-B each kernel row is a separate dual-wordline read. The
//! baseline reads both words and runs XNOR and a software popcount on the
//! host. Accumulation and thresholding always run on the host.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::array_model::{
    threshold_activation, ActivationAddress, ArrayGeometry, ExactEngine, KernelAddress,
    PopcountEngine, ProposalAEngine, RowAddress, SectionedBank,
};
use crate::bitcore::{BitWord, WORD_BITS};
use crate::bnn::feature::{BinaryMap, FeatureMap, IntMap};
use crate::bnn::lower::{receptive_field_tiles, tile_vector, TileLayout};
use crate::bnn::network::{LayerKind, LayerSpec, Shape};
use crate::bnn::weights::LayerWeights;
use crate::costmodel::{CostLedger, CostMode, EventKind, OpCounts};
use crate::error::{Error, Result};
use crate::proposal_a::{Readout, DEFAULT_SIGMA_COUNTS};
use crate::proposal_b::AdderTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    ProposalA,
    ProposalB,
    Oracle,
    Baseline,
}

impl EngineKind {
    pub const ALL: [EngineKind; 4] = [
        EngineKind::ProposalA,
        EngineKind::ProposalB,
        EngineKind::Oracle,
        EngineKind::Baseline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::ProposalA => "proposal_a",
            EngineKind::ProposalB => "proposal_b",
            EngineKind::Oracle => "oracle",
            EngineKind::Baseline => "baseline",
        }
    }

    /// Cost mode used for op-level figures. The oracle is an ideal ADC on
    /// the Proposal-A datapath and is costed the same way.
    pub fn cost_mode(&self, sections: u32) -> CostMode {
        match self {
            EngineKind::ProposalA | EngineKind::Oracle => CostMode::ProposalA { sections },
            EngineKind::ProposalB => CostMode::ProposalB,
            EngineKind::Baseline => CostMode::Baseline,
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EngineKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown engine '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub kind: EngineKind,
    pub geometry: ArrayGeometry,
    pub sigma: f64,
    pub seed: u64,
    /// Host instructions the baseline spends per 64-bit binary MAC.
    pub baseline_instrs_per_mac: u64,
}

impl EngineConfig {
    pub fn new(kind: EngineKind) -> Self {
        Self {
            kind,
            geometry: ArrayGeometry::default(),
            sigma: DEFAULT_SIGMA_COUNTS,
            seed: 0,
            baseline_instrs_per_mac: crate::costmodel::CostConstants::default()
                .baseline_instrs_per_mac(),
        }
    }

    pub fn with_sections(mut self, sections: u32) -> Self {
        self.geometry.sections = sections;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == EngineKind::Baseline {
            return Ok(());
        }
        self.geometry.validate()?;
        if self.kind == EngineKind::ProposalB && self.geometry.sections > 1 {
            return Err(Error::Config(format!(
                "proposal_b does not support sectioned dispatch (sections = {})",
                self.geometry.sections
            )));
        }
        if self.kind == EngineKind::ProposalA && !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Integer moments of a stream of errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Moments {
    pub count: u64,
    pub sum: i64,
    pub sum_sq: u64,
}

impl Moments {
    pub fn push(&mut self, e: i64) {
        self.count += 1;
        self.sum += e;
        self.sum_sq += e.unsigned_abs().pow(2);
    }

    pub fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.mean();
        (self.sum_sq as f64 / n - m * m).max(0.0).sqrt()
    }
}

/// Popcount error (engine total minus exact total) per binarized output
/// element, keyed by the number of noisy conversions `M` behind it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorStats {
    by_conversions: BTreeMap<usize, Moments>,
}

impl ErrorStats {
    pub fn record(&mut self, conversions: usize, error: i64) {
        self.by_conversions
            .entry(conversions)
            .or_default()
            .push(error);
    }

    pub fn merge(&mut self, other: &ErrorStats) {
        for (m, s) in &other.by_conversions {
            self.by_conversions.entry(*m).or_default().merge(s);
        }
    }

    pub fn by_conversions(&self) -> &BTreeMap<usize, Moments> {
        &self.by_conversions
    }

    pub fn overall(&self) -> Moments {
        let mut all = Moments::default();
        for s in self.by_conversions.values() {
            all.merge(s);
        }
        all
    }
}

enum Backend {
    Sectioned {
        bank: SectionedBank,
        engine: SectionEngine,
    },
    Digital {
        bank: SectionedBank,
        tree: AdderTree,
    },
    Host,
}

enum SectionEngine {
    Exact(ExactEngine),
    Noisy(Box<ProposalAEngine>),
}

impl SectionEngine {
    fn as_dyn(&mut self) -> &mut dyn PopcountEngine {
        match self {
            SectionEngine::Exact(e) => e,
            SectionEngine::Noisy(e) => e.as_mut(),
        }
    }
}

/// One worker's bank, engine, noise stream and ledger.
pub struct Executor {
    config: EngineConfig,
    backend: Backend,
    ledger: CostLedger,
    errors: ErrorStats,
}

const ACTIVATION_ROW: ActivationAddress = ActivationAddress(0);

impl Executor {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let backend = match config.kind {
            EngineKind::Baseline => Backend::Host,
            EngineKind::ProposalB => Backend::Digital {
                bank: SectionedBank::new(config.geometry)?,
                tree: AdderTree::new(config.geometry.columns)?,
            },
            EngineKind::Oracle => Backend::Sectioned {
                bank: SectionedBank::new(config.geometry)?,
                engine: SectionEngine::Exact(ExactEngine),
            },
            EngineKind::ProposalA => Backend::Sectioned {
                bank: SectionedBank::new(config.geometry)?,
                engine: SectionEngine::Noisy(Box::new(ProposalAEngine::new(
                    &config.geometry,
                    config.sigma,
                    config.seed,
                )?)),
            },
        };
        Ok(Self {
            config,
            backend,
            ledger: CostLedger::new(),
            errors: ErrorStats::default(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn errors(&self) -> &ErrorStats {
        &self.errors
    }

    pub fn into_parts(self) -> (CostLedger, ErrorStats) {
        (self.ledger, self.errors)
    }

    pub fn reseed(&mut self, seed: u64) {
        self.config.seed = seed;
        if let Backend::Sectioned {
            engine: SectionEngine::Noisy(e),
            ..
        } = &mut self.backend
        {
            e.reseed(seed);
        }
    }

    /// Runs one layer of any kind, tagging its events with the layer name.
    pub fn run_layer(
        &mut self,
        layer: &LayerSpec,
        input: &FeatureMap,
        weights: &LayerWeights,
    ) -> Result<FeatureMap> {
        weights.check(layer)?;
        layer.output_shape(input.shape())?;
        match layer.kind {
            LayerKind::Conv => self.conv_forward(layer, input, weights),
            LayerKind::Fc => self.fc_forward(layer, input, weights),
            LayerKind::Pool => self.pool_forward(layer, input),
            LayerKind::HostConv | LayerKind::HostFc => self.host_forward(layer, input, weights),
        }
    }

    pub fn conv_forward(
        &mut self,
        layer: &LayerSpec,
        input: &FeatureMap,
        weights: &LayerWeights,
    ) -> Result<FeatureMap> {
        if layer.kind != LayerKind::Conv {
            return Err(Error::LayerMismatch(format!(
                "{} is not a conv layer",
                layer.name
            )));
        }
        let out_shape = layer.output_shape(input.shape())?;
        let input = input.to_binary();
        let mut tiles = Vec::new();
        for oy in 0..out_shape.height {
            for ox in 0..out_shape.width {
                tiles.extend(receptive_field_tiles(&input, layer, oy, ox));
            }
        }
        let bits = self.binary_layer(layer, &tiles, out_shape.positions(), weights)?;
        Ok(FeatureMap::Binary(BinaryMap::from_bits(out_shape, &bits)?))
    }

    pub fn fc_forward(
        &mut self,
        layer: &LayerSpec,
        input: &FeatureMap,
        weights: &LayerWeights,
    ) -> Result<FeatureMap> {
        if layer.kind != LayerKind::Fc {
            return Err(Error::LayerMismatch(format!(
                "{} is not an fc layer",
                layer.name
            )));
        }
        let out_shape = layer.output_shape(input.shape())?;
        let tiles = tile_vector(&input.to_binary().flatten());
        let bits = self.binary_layer(layer, &tiles, 1, weights)?;
        Ok(FeatureMap::Binary(BinaryMap::from_bits(out_shape, &bits)?))
    }

    /// 2x2 stride-2 max-pool, which on ±1 is the OR of the window.
    pub fn pool_forward(&mut self, layer: &LayerSpec, input: &FeatureMap) -> Result<FeatureMap> {
        let FeatureMap::Binary(input) = input else {
            return Err(Error::LayerMismatch(format!(
                "{}: pooling needs a binarized map",
                layer.name
            )));
        };
        let out_shape = layer.output_shape(input.shape())?;
        self.ledger.begin_layer(&layer.name);
        let mut out = BinaryMap::zeros(out_shape);
        for y in 0..out_shape.height {
            for x in 0..out_shape.width {
                for c in 0..out_shape.channels {
                    let v = (0..4).any(|i| input.get(c, 2 * y + i / 2, 2 * x + i % 2));
                    out.set(c, y, x, v);
                }
            }
        }
        let words = (out_shape.positions() * input.channel_words()) as u64;
        self.ledger.record(EventKind::SramRead, 4 * words);
        self.ledger.record(EventKind::HostInstr, 3 * words);
        self.ledger.record(EventKind::SramWrite, words);
        Ok(FeatureMap::Binary(out))
    }

    /// Non-binarized layer in 32-bit host arithmetic. Binary inputs read as
    /// ±1 and padding is 0.
    pub fn host_forward(
        &mut self,
        layer: &LayerSpec,
        input: &FeatureMap,
        weights: &LayerWeights,
    ) -> Result<FeatureMap> {
        let LayerWeights::Int(w) = weights else {
            return Err(Error::LayerMismatch(format!(
                "{} has no integer weights",
                layer.name
            )));
        };
        let out_shape = layer.output_shape(input.shape())?;
        let input = input.to_int();
        let n = layer.kernel_size();
        let o_count = layer.out_channels as usize;
        let mut out = Vec::with_capacity(out_shape.len());
        let mut rf = vec![0i32; n];
        for oy in 0..out_shape.height {
            for ox in 0..out_shape.width {
                match layer.kind {
                    LayerKind::HostFc => rf.copy_from_slice(input.values()),
                    _ => gather_int(&input, layer, oy, ox, &mut rf),
                }
                for o in 0..o_count {
                    let dot: i64 = w[o * n..(o + 1) * n]
                        .iter()
                        .zip(&rf)
                        .map(|(&a, &b)| a as i64 * b as i64)
                        .sum();
                    out.push(i32::try_from(dot).map_err(|_| {
                        Error::Network(format!("{}: accumulator overflows i32", layer.name))
                    })?);
                }
            }
        }
        let macs = (out_shape.positions() * o_count * n) as u64;
        let weight_words = (o_count * n).div_ceil(2) as u64;
        let l = &mut self.ledger;
        l.begin_layer(&layer.name);
        l.record(EventKind::DramAccess, weight_words);
        l.record(EventKind::SramWrite, weight_words + out.len() as u64);
        l.record(EventKind::SramRead, 2 * macs);
        l.record(EventKind::HostInstr, 2 * macs);
        l.count_ops(OpCounts {
            host_macs: macs,
            ..OpCounts::default()
        });
        Ok(FeatureMap::Int(IntMap::new(out_shape, out)?))
    }

    /// Shared body of conv and fc: `tiles` holds `positions` receptive fields
    /// of `T` padded tiles each. Returns output bits position-major.
    fn binary_layer(
        &mut self,
        layer: &LayerSpec,
        tiles: &[BitWord],
        positions: usize,
        weights: &LayerWeights,
    ) -> Result<Vec<bool>> {
        let LayerWeights::Binary { kernels, .. } = weights else {
            return Err(Error::LayerMismatch(format!(
                "{} has no binary kernels",
                layer.name
            )));
        };
        let thresholds = weights.thresholds(layer);
        let layout = TileLayout::new(layer.kernel_size())?;
        let t_count = layout.tiles();
        debug_assert_eq!(tiles.len(), positions * t_count);
        let kernel_tiles: Vec<BitWord> = kernels.iter().flat_map(tile_vector).collect();
        let o_count = kernels.len();
        let geometry = self.config.geometry;
        let conversions = conversions_per_element(&layout, &geometry);
        let job = BinaryJob {
            layout: &layout,
            act: tiles,
            kern: &kernel_tiles,
            positions,
            outputs: o_count,
        };

        let Executor {
            backend,
            ledger,
            errors,
            config,
        } = self;
        ledger.begin_layer(&layer.name);
        ledger.count_ops(OpCounts {
            binary_macs: (positions * o_count * layout.kernel_size) as u64,
            host_macs: 0,
            tile_ops: (positions * o_count * t_count) as u64,
        });
        let track = matches!(config.kind, EngineKind::ProposalA | EngineKind::Oracle);
        let mut totals = vec![0u32; positions * o_count];
        match backend {
            Backend::Sectioned { bank, engine } => {
                job.run_in_bank(bank, ledger, &mut totals, |bank, ledger, t, rows, acc| {
                    let line = bank.pseudo_read(ACTIVATION_ROW, ledger)?;
                    let res = bank.sectioned_convolve(
                        line,
                        rows,
                        layout.live_bits[t],
                        engine.as_dyn(),
                        ledger,
                    )?;
                    for (a, r) in acc.iter_mut().zip(res) {
                        *a += r;
                    }
                    // One issue, then one accumulate per result.
                    Ok(1 + rows.len() as u64)
                })?;
            }
            Backend::Digital { bank, tree } => {
                job.run_in_bank(bank, ledger, &mut totals, |bank, ledger, _, rows, acc| {
                    for (a, row) in acc.iter_mut().zip(rows) {
                        *a += bank.dual_row_popcount(ACTIVATION_ROW, *row, tree, ledger)?;
                    }
                    Ok(2 * rows.len() as u64)
                })?;
            }
            Backend::Host => {
                job.run_on_host(ledger, &mut totals, config.baseline_instrs_per_mac);
            }
        }

        let mut bits = Vec::with_capacity(totals.len());
        for (i, &raw) in totals.iter().enumerate() {
            let (pos, o) = (i / o_count, i % o_count);
            if track {
                let exact = job.exact(pos, o);
                errors.record(conversions, raw as i64 - exact as i64);
            }
            let total = raw
                .saturating_sub(layout.correction)
                .min(layout.kernel_size as u32);
            bits.push(decide(total, layout.kernel_size, thresholds.map(|t| t[o]))?);
        }
        ledger.record(EventKind::HostInstr, totals.len() as u64);
        ledger.record(
            EventKind::SramWrite,
            (positions * o_count.div_ceil(WORD_BITS as usize)) as u64,
        );
        Ok(bits)
    }
}

/// Strict threshold on the corrected popcount; the default is the
/// half-kernel rule.
fn decide(total: u32, kernel_size: usize, threshold: Option<i64>) -> Result<bool> {
    match threshold {
        Some(t) => Ok(total as i64 > t),
        None => threshold_activation(total, kernel_size as u32),
    }
}

fn conversions_per_element(layout: &TileLayout, g: &ArrayGeometry) -> usize {
    match g.readout() {
        Readout::Single => layout.tiles(),
        Readout::Dual => layout
            .live_bits
            .iter()
            .map(|&b| b.div_ceil(g.columns / 2) as usize)
            .sum(),
    }
}

fn gather_int(input: &IntMap, layer: &LayerSpec, oy: u32, ox: u32, rf: &mut [i32]) {
    let s: Shape = input.shape();
    let c = s.channels as usize;
    let mut i = 0;
    for ky in 0..layer.k {
        for kx in 0..layer.k {
            let iy = (oy * layer.stride + ky) as i64 - layer.padding as i64;
            let ix = (ox * layer.stride + kx) as i64 - layer.padding as i64;
            if iy < 0 || ix < 0 || iy >= s.height as i64 || ix >= s.width as i64 {
                rf[i..i + c].fill(0);
            } else {
                let base = s.index(0, iy as u32, ix as u32);
                rf[i..i + c].copy_from_slice(&input.values()[base..base + c]);
            }
            i += c;
        }
    }
}

struct BinaryJob<'a> {
    layout: &'a TileLayout,
    act: &'a [BitWord],
    kern: &'a [BitWord],
    positions: usize,
    outputs: usize,
}

impl BinaryJob<'_> {
    fn tiles(&self) -> usize {
        self.layout.tiles()
    }

    fn act_tile(&self, pos: usize, t: usize) -> BitWord {
        self.act[pos * self.tiles() + t]
    }

    fn kern_tile(&self, o: usize, t: usize) -> BitWord {
        self.kern[o * self.tiles() + t]
    }

    fn tile_popcount(&self, pos: usize, o: usize, t: usize) -> u32 {
        (!(self.act_tile(pos, t).bits() ^ self.kern_tile(o, t).bits())).count_ones()
    }

    /// Padded exact sum for output `o` at `pos`.
    fn exact(&self, pos: usize, o: usize) -> u32 {
        (0..self.tiles())
            .map(|t| self.tile_popcount(pos, o, t))
            .sum()
    }

    /// Loads kernels chunk by chunk and, per pixel and tile, hands groups of
    /// up to `sections` co-resident rows to `dispatch`, which returns the
    /// host instructions it issued.
    fn run_in_bank<F>(
        &self,
        bank: &mut SectionedBank,
        ledger: &mut CostLedger,
        totals: &mut [u32],
        mut dispatch: F,
    ) -> Result<()>
    where
        F: FnMut(
            &SectionedBank,
            &mut CostLedger,
            usize,
            &[KernelAddress],
            &mut [u32],
        ) -> Result<u64>,
    {
        let g = *bank.geometry();
        let t_count = self.tiles();
        let capacity = g.kernel_capacity(t_count);
        if capacity == 0 {
            return Err(Error::Config(format!(
                "a {t_count}-row kernel does not fit in a {}-row section",
                g.subarrays_per_bank * g.rows_per_section
            )));
        }
        let group = g.sections as usize;
        let mut host = 0u64;
        let mut acc = Vec::with_capacity(capacity);
        for start in (0..self.outputs).step_by(capacity) {
            let len = capacity.min(self.outputs - start);
            let mut addrs = Vec::with_capacity(len * t_count);
            for j in 0..len {
                for t in 0..t_count {
                    let a = g.place_kernel(j, t, t_count)?;
                    bank.write_row(RowAddress::Kernel(a), self.kern_tile(start + j, t), ledger)?;
                    addrs.push(a);
                }
            }
            ledger.record(EventKind::DramAccess, (len * t_count) as u64);
            let mut rows = Vec::with_capacity(group);
            for pos in 0..self.positions {
                acc.clear();
                acc.resize(len, 0);
                for t in 0..t_count {
                    bank.write_row(
                        RowAddress::Activation(ACTIVATION_ROW),
                        self.act_tile(pos, t),
                        ledger,
                    )?;
                    for g0 in (0..len).step_by(group) {
                        let g1 = (g0 + group).min(len);
                        rows.clear();
                        rows.extend((g0..g1).map(|j| addrs[j * t_count + t]));
                        host += dispatch(&*bank, ledger, t, &rows, &mut acc[g0..g1])?;
                    }
                }
                let base = pos * self.outputs + start;
                totals[base..base + len].copy_from_slice(&acc);
            }
        }
        ledger.record(EventKind::HostInstr, host);
        Ok(())
    }

    /// Conventional path: two SRAM reads and a software XNOR+popcount per
    /// 64-bit MAC.
    fn run_on_host(&self, ledger: &mut CostLedger, totals: &mut [u32], instrs_per_mac: u64) {
        let t_count = self.tiles();
        let kernel_rows = (self.outputs * t_count) as u64;
        ledger.record(EventKind::DramAccess, kernel_rows);
        ledger.record(
            EventKind::SramWrite,
            kernel_rows + (self.positions * t_count) as u64,
        );
        for pos in 0..self.positions {
            for o in 0..self.outputs {
                totals[pos * self.outputs + o] = self.exact(pos, o);
            }
        }
        let macs = (self.positions * self.outputs * t_count) as u64;
        ledger.record(EventKind::SramRead, 2 * macs);
        ledger.record(EventKind::HostInstr, instrs_per_mac * macs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::BinaryVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_binary(rng: &mut ChaCha8Rng, s: Shape) -> FeatureMap {
        let bits: Vec<bool> = (0..s.len()).map(|_| rng.random()).collect();
        FeatureMap::Binary(BinaryMap::from_bits(s, &bits).unwrap())
    }

    fn random_kernels(rng: &mut ChaCha8Rng, o: usize, n: usize) -> LayerWeights {
        LayerWeights::Binary {
            kernels: (0..o)
                .map(|_| {
                    let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
                    BinaryVector::from_bools(&bits).unwrap()
                })
                .collect(),
            thresholds: None,
        }
    }

    fn small_geometry(sections: u32) -> ArrayGeometry {
        ArrayGeometry {
            sections,
            subarrays_per_bank: 2,
            rows_per_section: 4,
            ..ArrayGeometry::default()
        }
    }

    fn exec(kind: EngineKind, sections: u32) -> Executor {
        let mut c = EngineConfig::new(kind).with_sigma(0.0);
        c.geometry = small_geometry(sections);
        Executor::new(c).unwrap()
    }

    #[test]
    fn all_ones_without_padding_fires_everywhere() {
        let s = Shape::new(4, 5, 5);
        let ones = FeatureMap::Binary(BinaryMap::from_bits(s, &vec![true; s.len()]).unwrap());
        let layer = LayerSpec::conv("c", 3, 4, 6);
        let w = LayerWeights::Binary {
            kernels: vec![BinaryVector::from_bools(&[true; 36]).unwrap(); 6],
            thresholds: None,
        };
        for kind in EngineKind::ALL {
            let sections = if kind == EngineKind::ProposalB { 1 } else { 4 };
            let out = exec(kind, sections).run_layer(&layer, &ones, &w).unwrap();
            assert_eq!(out.shape(), Shape::new(6, 3, 3));
            assert!(out.to_binary().to_bits().iter().all(|&b| b), "{kind}");
        }
    }

    #[test]
    fn engines_agree_at_zero_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = Shape::new(9, 6, 6);
        let input = random_binary(&mut rng, s);
        // 81-bit kernels over 2 tiles; with n = 1 the 9 outputs span 3 chunks.
        let layer = LayerSpec::conv("c", 3, 9, 9).with_padding(1);
        let w = random_kernels(&mut rng, 9, 81);
        let reference = exec(EngineKind::Baseline, 1)
            .run_layer(&layer, &input, &w)
            .unwrap();
        for (kind, n) in [
            (EngineKind::Oracle, 4),
            (EngineKind::ProposalA, 4),
            (EngineKind::ProposalA, 1),
            (EngineKind::ProposalB, 1),
        ] {
            let mut e = exec(kind, n);
            assert_eq!(
                e.run_layer(&layer, &input, &w).unwrap(),
                reference,
                "{kind} n={n}"
            );
            if kind == EngineKind::ProposalA {
                assert_eq!(e.errors().overall().sum_sq, 0);
                assert_eq!(
                    e.errors()
                        .by_conversions()
                        .keys()
                        .copied()
                        .collect::<Vec<_>>(),
                    [3]
                );
            }
        }
    }

    #[test]
    fn sectioning_divides_pseudo_reads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_binary(&mut rng, Shape::new(128, 1, 1));
        let layer = LayerSpec::fc("f", 128, 8);
        let w = random_kernels(&mut rng, 8, 128);
        let mut reads = Vec::new();
        for n in [1, 2, 4] {
            let mut e = exec(EngineKind::ProposalA, n);
            e.run_layer(&layer, &input, &w).unwrap();
            reads.push(e.ledger().count(EventKind::PseudoReadBatch));
            assert_eq!(e.ledger().count(EventKind::AdcConversion), 16);
        }
        assert_eq!(reads, [16, 8, 4]);
    }

    #[test]
    fn proposal_b_rejects_sections() {
        let c = EngineConfig::new(EngineKind::ProposalB).with_sections(4);
        assert!(matches!(Executor::new(c), Err(Error::Config(_))));
        assert!(Executor::new(EngineConfig::new(EngineKind::Baseline).with_sections(4)).is_ok());
    }

    #[test]
    fn oversized_kernel_is_a_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_binary(&mut rng, Shape::new(640, 1, 1));
        let layer = LayerSpec::fc("f", 640, 1);
        let w = random_kernels(&mut rng, 1, 640);
        // 10 tiles against 2 x 4 rows per section.
        assert!(matches!(
            exec(EngineKind::Oracle, 4).run_layer(&layer, &input, &w),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn threshold_override_is_strict() {
        let input = FeatureMap::Binary(
            BinaryMap::from_bits(Shape::new(4, 1, 1), &[true, true, false, false]).unwrap(),
        );
        let mut layer = LayerSpec::fc("f", 4, 3);
        layer.thresholds = Some(vec![1, 2, 3]);
        let k = BinaryVector::from_bools(&[true; 4]).unwrap();
        let w = LayerWeights::Binary {
            kernels: vec![k; 3],
            thresholds: None,
        };
        // popcount 2 against thresholds 1, 2, 3.
        let out = exec(EngineKind::Oracle, 4)
            .run_layer(&layer, &input, &w)
            .unwrap();
        assert_eq!(out.to_binary().to_bits(), [true, false, false]);
        layer.thresholds = None;
        let out = exec(EngineKind::Oracle, 4)
            .run_layer(&layer, &input, &w)
            .unwrap();
        assert_eq!(out.to_binary().to_bits(), [false; 3]);
    }

    #[test]
    fn pool_is_window_or() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Shape::new(3, 4, 6);
        let input = random_binary(&mut rng, s);
        let out = exec(EngineKind::Oracle, 4)
            .pool_forward(&LayerSpec::pool("p", 3), &input)
            .unwrap()
            .to_binary();
        let FeatureMap::Binary(m) = &input else {
            unreachable!()
        };
        for c in 0..3 {
            for y in 0..2 {
                for x in 0..3 {
                    let mut want = false;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            want |= m.get(c, 2 * y + dy, 2 * x + dx);
                        }
                    }
                    assert_eq!(out.get(c, y, x), want);
                }
            }
        }
        let zeros = FeatureMap::Binary(BinaryMap::zeros(s));
        let out = exec(EngineKind::Oracle, 4)
            .pool_forward(&LayerSpec::pool("p", 3), &zeros)
            .unwrap();
        assert!(out.to_binary().to_bits().iter().all(|&b| !b));
        let odd = FeatureMap::Binary(BinaryMap::zeros(Shape::new(3, 3, 4)));
        assert!(exec(EngineKind::Oracle, 4)
            .pool_forward(&LayerSpec::pool("p", 3), &odd)
            .is_err());
    }

    #[test]
    fn host_conv_matches_direct_sum() {
        let s = Shape::new(2, 3, 3);
        let input = FeatureMap::Int(IntMap::new(s, (0..18).collect()).unwrap());
        let layer = LayerSpec::conv("h", 3, 2, 1)
            .with_kind(LayerKind::HostConv)
            .with_padding(1);
        let w = LayerWeights::Int(vec![1; 18]);
        let out = exec(EngineKind::Oracle, 4)
            .run_layer(&layer, &input, &w)
            .unwrap();
        let FeatureMap::Int(m) = out else { panic!() };
        // Centre sees everything: 0 + 1 + ... + 17.
        assert_eq!(m.get(0, 1, 1), 153);
        // Corner (0, 0) sees pixels (0,0), (0,1), (1,0), (1,1).
        let want: i32 = [0, 1, 3, 4].iter().map(|p| 2 * p * 2 + 1).sum();
        assert_eq!(m.get(0, 0, 0), want);
    }
}
