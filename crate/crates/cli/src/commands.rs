//! Subcommand bodies. Setup problems (config, network, weights, data) are
//! validation failures; anything failing once inference starts is a runtime
//! failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;

use xcelram_core::bnn::{self, toy, EngineKind, Evaluation, Network, NetworkSpec, Sample};
use xcelram_core::costmodel::EventKind;
use xcelram_core::{mix_seed, selftest};

use crate::config::{Format, RunConfig};
use crate::report::{self, Report};
use crate::Failure;

/// Flags shared by `run` and `sweep`; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file (sectioned key = value)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// proposal_a | proposal_b | oracle | baseline
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub sections: Option<u32>,
    /// Std of the stage-2 count, in counts
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Network description file
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Weights directory; random weights from the seed if absent
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Dataset directory with labels.csv; one synthetic image if absent
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also run the conventional baseline and report ratios
    #[arg(long)]
    pub baseline: bool,
    /// Output directory for report files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// table | csv | json
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub trials: Option<u32>,
    /// Dump the per-layer event breakdown
    #[arg(long)]
    pub explain: bool,
}

const WEIGHT_SEED_TAG: u64 = 0x7765_6967_6874;
const IMAGE_SEED_TAG: u64 = 0x0069_6d61_6765;

pub fn resolve_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let v = |e: anyhow::Error| Failure::Validation(e);
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p).map_err(v)?,
        None => RunConfig::default(),
    };
    if let Some(e) = &args.engine {
        c.engine = e.parse().map_err(|e: xcelram_core::Error| v(e.into()))?;
    }
    if let Some(n) = args.sections {
        c.geometry.sections = n;
    }
    if let Some(s) = args.sigma {
        c.sigma = s;
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(p) = &args.network {
        c.network = Some(p.clone());
    }
    if let Some(p) = &args.weights {
        c.weights = Some(p.clone());
    }
    if let Some(p) = &args.data {
        c.data = Some(p.clone());
    }
    if let Some(p) = &args.out {
        c.out = Some(p.clone());
    }
    if let Some(f) = &args.format {
        c.format = f.parse().map_err(v)?;
    }
    if let Some(j) = args.jobs {
        c.jobs = j;
    }
    if let Some(t) = args.trials {
        c.trials = t;
    }
    c.baseline |= args.baseline;
    c.validate().map_err(v)?;
    Ok(c)
}

pub struct Workload {
    pub net: Network,
    pub samples: Vec<Sample>,
}

impl Workload {
    pub fn labels(&self) -> Vec<Option<usize>> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

pub fn load_workload(c: &RunConfig) -> Result<Workload, Failure> {
    let inner = || -> anyhow::Result<Workload> {
        let path = c
            .network
            .as_ref()
            .ok_or_else(|| anyhow!("no network given"))?;
        let spec = NetworkSpec::load(path)?;
        let net = match &c.weights {
            Some(dir) => Network::load(spec, dir)?,
            None => Network::random(spec, mix_seed(&[c.seed, WEIGHT_SEED_TAG]))?,
        };
        let samples = match &c.data {
            Some(dir) => bnn::load_dataset(dir)?,
            None => vec![Sample {
                name: "synthetic".into(),
                image: toy::random_image(net.spec().input, 8, mix_seed(&[c.seed, IMAGE_SEED_TAG])),
                label: None,
            }],
        };
        for s in &samples {
            if s.image.shape() != net.spec().input {
                return Err(anyhow!(
                    "image {} is {} but {} takes {}",
                    s.name,
                    s.image.shape(),
                    net.spec().name,
                    net.spec().input
                ));
            }
            if let Some(l) = s.label {
                if l >= net.spec().classes as usize {
                    return Err(anyhow!("image {} has label {l} out of range", s.name));
                }
            }
        }
        Ok(Workload { net, samples })
    };
    inner().map_err(Failure::Validation)
}

fn evaluate(c: &RunConfig, w: &Workload, kind: EngineKind) -> Result<Evaluation, Failure> {
    bnn::evaluate(
        &w.net,
        &w.samples,
        &c.engine_config_for(kind),
        c.trials,
        c.jobs,
    )
    .map_err(|e| Failure::Runtime(e.into()))
}

pub struct RunOutput {
    pub report: Report,
    pub stdout: String,
}

pub fn run_report(c: &RunConfig, w: &Workload) -> Result<Report, Failure> {
    let eval = evaluate(c, w, c.engine)?;
    let base = if c.baseline {
        Some(evaluate(c, w, EngineKind::Baseline)?)
    } else {
        None
    };
    report::build(c, w.net.spec(), &w.labels(), &eval, base.as_ref()).map_err(Failure::Runtime)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), text)
        .with_context(|| format!("cannot write {}", dir.join(name).display()))
        .map_err(Failure::Runtime)
}

fn prepare_out(c: &RunConfig) -> Result<Option<&Path>, Failure> {
    match &c.out {
        None => Ok(None),
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))
                .map_err(Failure::Runtime)?;
            write(dir, "effective_config.ini", &c.to_ini())?;
            Ok(Some(dir))
        }
    }
}

/// `run`: report files in `out` and the rendered report for stdout.
pub fn cmd_run(c: &RunConfig, explain: bool) -> Result<RunOutput, Failure> {
    let w = load_workload(c)?;
    let out = prepare_out(c)?;
    let r = run_report(c, &w)?;
    let json = report::to_json(&r);
    let csv = report::to_csv(&r);
    let explained = explain.then(|| report::explain(&r, &c.costs));
    if let Some(dir) = out {
        write(dir, "report.json", &json)?;
        write(dir, "report.csv", &csv)?;
        if let Some(e) = &explained {
            write(dir, "explain.txt", e)?;
        }
    }
    let mut stdout = match c.format {
        Format::Json => json,
        Format::Csv => csv,
        Format::Table => report::to_table(&r),
    };
    if let Some(e) = explained {
        stdout.push('\n');
        stdout += &e;
    }
    Ok(RunOutput { report: r, stdout })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Sigma,
    Sections,
}

impl std::str::FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "sigma" => Ok(SweepParam::Sigma),
            "sections" => Ok(SweepParam::Sections),
            _ => Err(anyhow!("unknown sweep parameter '{s}' (sigma | sections)")),
        }
    }
}

pub const SWEEP_HEADER: &str = "param,value,accuracy,popcount_error_mean,popcount_error_std,\
energy_pj,latency_ns,pseudo_reads,adc_conversions,dual_reads";

/// `sweep`: one CSV row per value, each a full `run` with that override.
pub fn cmd_sweep(c: &RunConfig, param: &str, values: &[String]) -> Result<String, Failure> {
    let v = Failure::Validation;
    let param: SweepParam = param.parse().map_err(v)?;
    let values: Vec<&str> = values
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if values.is_empty() {
        return Err(v(anyhow!("no sweep values given")));
    }
    match (param, c.engine) {
        (SweepParam::Sigma, EngineKind::ProposalA) => {}
        (SweepParam::Sections, EngineKind::ProposalA | EngineKind::Oracle) => {}
        (p, e) => return Err(v(anyhow!("cannot sweep {p:?} under the {e} engine"))),
    }
    let mut configs = Vec::new();
    for value in &values {
        let mut cv = c.clone();
        match param {
            SweepParam::Sigma => {
                cv.sigma = value
                    .parse()
                    .map_err(|_| v(anyhow!("bad sigma '{value}'")))?
            }
            SweepParam::Sections => {
                cv.geometry.sections = value
                    .parse()
                    .map_err(|_| v(anyhow!("bad section count '{value}'")))?
            }
        }
        cv.baseline = false;
        cv.validate().map_err(v)?;
        configs.push(cv);
    }
    let w = load_workload(c)?;
    let out = prepare_out(c)?;
    let name = match param {
        SweepParam::Sigma => "sigma",
        SweepParam::Sections => "sections",
    };
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for (value, cv) in values.iter().zip(&configs) {
        let r = run_report(cv, &w)?;
        let count = |k: EventKind| {
            r.total
                .events
                .iter()
                .find(|e| e.event == k.name())
                .map_or(0, |e| e.count)
        };
        writeln!(
            csv,
            "{name},{value},{},{},{},{},{},{},{},{}",
            r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            r.popcount_error.mean,
            r.popcount_error.std,
            r.total.energy_pj,
            r.total.latency_ns,
            count(EventKind::PseudoReadBatch),
            count(EventKind::AdcConversion),
            count(EventKind::DualRead)
        )
        .unwrap();
    }
    if let Some(dir) = out {
        write(dir, "sweep.csv", &csv)?;
    }
    Ok(csv)
}

/// `selftest`: one line per check.
pub fn cmd_selftest() -> Result<String, Failure> {
    let r = selftest::run();
    let mut s = String::new();
    for c in &r.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(s, "{status} {}", c.name).unwrap();
        if !c.passed {
            writeln!(s, "     {}", c.detail).unwrap();
        }
    }
    if r.passed() {
        Ok(s)
    } else {
        Err(Failure::Selftest(s))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Network description file
    #[arg(long)]
    pub network: PathBuf,
    /// Output directory; receives network.net, weights/ and data/
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub images: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// `gen-toy-data`: random weights and teacher-labelled images.
pub fn cmd_gen_toy_data(a: &GenArgs) -> Result<String, Failure> {
    let spec = NetworkSpec::load(&a.network).map_err(|e| Failure::Validation(e.into()))?;
    if a.images == 0 {
        return Err(Failure::Validation(anyhow!("--images must be >= 1")));
    }
    let rt = |e: xcelram_core::Error| Failure::Runtime(e.into());
    let net = Network::random(spec, mix_seed(&[a.seed, WEIGHT_SEED_TAG])).map_err(rt)?;
    let data =
        toy::teacher_dataset(&net, a.images, mix_seed(&[a.seed, IMAGE_SEED_TAG])).map_err(rt)?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("cannot create {}", a.out.display()))
        .map_err(Failure::Runtime)?;
    write(&a.out, "network.net", &net.spec().to_text())?;
    net.save(&a.out.join("weights")).map_err(rt)?;
    bnn::save_dataset(&a.out.join("data"), &data).map_err(rt)?;
    Ok(format!(
        "wrote {} images and weights for {} to {}\n",
        data.len(),
        net.spec().name,
        a.out.display()
    ))
}
