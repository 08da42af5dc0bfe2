//! Run configuration: a sectioned `key = value` file plus flag overrides.
//!
//! Every key has a default; the effective configuration written next to a
//! report lists all of them and parses back to the same [`RunConfig`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ini::Ini;

use xcelram_core::array_model::ArrayGeometry;
use xcelram_core::bnn::{EngineConfig, EngineKind};
use xcelram_core::costmodel::CostConstants;
use xcelram_core::proposal_a::DEFAULT_SIGMA_COUNTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl Format {
    pub fn name(&self) -> &'static str {
        match self {
            Format::Table => "table",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table" => Format::Table,
            "csv" => Format::Csv,
            "json" => Format::Json,
            _ => bail!("unknown format '{s}' (table | csv | json)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: EngineKind,
    pub network: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub trials: u32,
    pub jobs: usize,
    pub baseline: bool,
    pub geometry: ArrayGeometry,
    pub sigma: f64,
    pub seed: u64,
    pub costs: CostConstants,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            engine: EngineKind::ProposalA,
            network: None,
            weights: None,
            data: None,
            out: None,
            format: Format::Table,
            trials: 1,
            jobs: 1,
            baseline: false,
            geometry: ArrayGeometry::default(),
            sigma: DEFAULT_SIGMA_COUNTS,
            seed: 0,
            costs: CostConstants::default(),
        }
    }
}

/// Accessors for one numeric or boolean field of the configuration.
struct Field {
    section: &'static str,
    key: &'static str,
    get: fn(&RunConfig) -> String,
    set: fn(&mut RunConfig, &str) -> Result<()>,
}

fn parse<T: FromStr>(v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| anyhow::anyhow!("{e}"))
}

fn path_opt(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

macro_rules! field {
    ($section:literal, $key:literal, $($path:ident).+) => {
        Field {
            section: $section,
            key: $key,
            get: |c| c.$($path).+.to_string(),
            set: |c, v| {
                c.$($path).+ = parse(v)?;
                Ok(())
            },
        }
    };
}

const FIELDS: &[Field] = &[
    Field {
        section: "run",
        key: "engine",
        get: |c| c.engine.name().to_string(),
        set: |c, v| {
            c.engine = v.trim().parse()?;
            Ok(())
        },
    },
    Field {
        section: "run",
        key: "network",
        get: |c| show_path(&c.network),
        set: |c, v| {
            c.network = path_opt(v);
            Ok(())
        },
    },
    Field {
        section: "run",
        key: "weights",
        get: |c| show_path(&c.weights),
        set: |c, v| {
            c.weights = path_opt(v);
            Ok(())
        },
    },
    Field {
        section: "run",
        key: "data",
        get: |c| show_path(&c.data),
        set: |c, v| {
            c.data = path_opt(v);
            Ok(())
        },
    },
    Field {
        section: "run",
        key: "out",
        get: |c| show_path(&c.out),
        set: |c, v| {
            c.out = path_opt(v);
            Ok(())
        },
    },
    Field {
        section: "run",
        key: "format",
        get: |c| c.format.name().to_string(),
        set: |c, v| {
            c.format = v.trim().parse()?;
            Ok(())
        },
    },
    field!("run", "trials", trials),
    field!("run", "jobs", jobs),
    field!("run", "baseline", baseline),
    field!("geometry", "columns", geometry.columns),
    field!("geometry", "rows_per_section", geometry.rows_per_section),
    field!("geometry", "sections", geometry.sections),
    field!(
        "geometry",
        "subarrays_per_bank",
        geometry.subarrays_per_bank
    ),
    field!("geometry", "activation_rows", geometry.activation_rows),
    field!("geometry", "dual_rwl", geometry.dual_rwl),
    field!("adc", "sigma", sigma),
    field!("adc", "seed", seed),
    field!(
        "costs",
        "a_energy_sectioned_pj",
        costs.a_energy_sectioned_pj
    ),
    field!(
        "costs",
        "a_energy_unsectioned_pj",
        costs.a_energy_unsectioned_pj
    ),
    field!("costs", "a_reference_sections", costs.a_reference_sections),
    field!("costs", "a_latency_ns", costs.a_latency_ns),
    field!(
        "costs",
        "b_xnor_energy_fj_per_bit",
        costs.b_xnor_energy_fj_per_bit
    ),
    field!("costs", "b_xnor_latency_ns", costs.b_xnor_latency_ns),
    field!("costs", "b_adder_power_mw", costs.b_adder_power_mw),
    field!("costs", "b_adder_latency_ns", costs.b_adder_latency_ns),
    field!(
        "costs",
        "baseline_read_energy_pj",
        costs.baseline_read_energy_pj
    ),
    field!(
        "costs",
        "baseline_read_latency_ns",
        costs.baseline_read_latency_ns
    ),
    field!("costs", "sram_write_energy_pj", costs.sram_write_energy_pj),
    field!(
        "costs",
        "sram_write_latency_ns",
        costs.sram_write_latency_ns
    ),
    field!("costs", "host_instr_energy_pj", costs.host_instr_energy_pj),
    field!(
        "costs",
        "host_instr_latency_ns",
        costs.host_instr_latency_ns
    ),
    field!(
        "costs",
        "baseline_popcount_instrs",
        costs.baseline_popcount_instrs
    ),
    field!(
        "costs",
        "dram_access_energy_pj",
        costs.dram_access_energy_pj
    ),
    field!(
        "costs",
        "dram_access_latency_ns",
        costs.dram_access_latency_ns
    ),
];

const SECTIONS: [&str; 4] = ["run", "geometry", "adc", "costs"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).context("malformed config")?;
        let mut c = RunConfig::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    bail!("key '{k}' outside any section");
                }
                continue;
            };
            if !SECTIONS.contains(&section) {
                bail!("unknown section [{section}]");
            }
            for (key, value) in props.iter() {
                let f = FIELDS
                    .iter()
                    .find(|f| f.section == section && f.key == key)
                    .with_context(|| format!("unknown key '{key}' in [{section}]"))?;
                (f.set)(&mut c, value)
                    .with_context(|| format!("bad value '{value}' for {section}.{key}"))?;
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Every key with its effective value.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        for section in SECTIONS {
            if !s.is_empty() {
                s.push('\n');
            }
            writeln!(s, "[{section}]").unwrap();
            for f in FIELDS.iter().filter(|f| f.section == section) {
                writeln!(s, "{} = {}", f.key, (f.get)(self)).unwrap();
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be >= 1");
        }
        if self.jobs == 0 {
            bail!("jobs must be >= 1");
        }
        self.costs.validate()?;
        self.engine_config().validate()?;
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        self.engine_config_for(self.engine)
    }

    pub fn engine_config_for(&self, kind: EngineKind) -> EngineConfig {
        EngineConfig {
            kind,
            geometry: self.geometry,
            sigma: self.sigma,
            seed: self.seed,
            baseline_instrs_per_mac: self.costs.baseline_instrs_per_mac(),
        }
    }
}

/// Documentation of every key, in file order: `(section, key, default)`.
pub fn key_reference() -> Vec<(&'static str, &'static str, String)> {
    let d = RunConfig::default();
    FIELDS
        .iter()
        .map(|f| (f.section, f.key, (f.get)(&d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_ini()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn edited_config_round_trips() {
        let mut c = RunConfig {
            engine: EngineKind::ProposalB,
            ..RunConfig::default()
        };
        c.geometry.sections = 1;
        c.sigma = 0.1 + 0.2;
        c.seed = u64::MAX;
        c.network = Some("nets/a b.net".into());
        c.costs.dram_access_energy_pj = 1e-7;
        c.format = Format::Json;
        let back = RunConfig::parse(&c.to_ini()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::parse("[adc]\nsigma = 0\n[geometry]\nsections = 2\n").unwrap();
        assert_eq!(c.sigma, 0.0);
        assert_eq!(c.geometry.sections, 2);
        assert_eq!(c.costs, CostConstants::default());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::parse("[adc]\nsgima = 1\n").is_err());
        assert!(RunConfig::parse("[misc]\na = 1\n").is_err());
        assert!(RunConfig::parse("[run]\nengine = proposal_c\n").is_err());
        assert!(RunConfig::parse("[geometry]\nsections = -1\n").is_err());
        let c = RunConfig::parse("[run]\nengine = proposal_b\n").unwrap();
        assert!(c.validate().is_err(), "proposal_b with 4 sections");
        let c = RunConfig::parse("[run]\nengine = baseline\n[geometry]\ncolumns = 0\n").unwrap();
        assert!(c.validate().is_ok(), "baseline ignores geometry");
    }
}
