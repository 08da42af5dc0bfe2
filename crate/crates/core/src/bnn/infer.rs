//! Whole-network inference and dataset evaluation.

use std::path::Path;

use rayon::prelude::*;

use crate::bnn::exec::{EngineConfig, ErrorStats, Executor};
use crate::bnn::feature::FeatureMap;
use crate::bnn::weights::Network;
use crate::costmodel::CostLedger;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inference {
    pub class: usize,
    pub logits: Vec<i64>,
}

/// Feature maps after every layer, in order.
pub fn forward(net: &Network, image: &FeatureMap, exec: &mut Executor) -> Result<Vec<FeatureMap>> {
    if image.shape() != net.spec().input {
        return Err(Error::Shape(format!(
            "image is {} but the network takes {}",
            image.shape(),
            net.spec().input
        )));
    }
    let mut maps: Vec<FeatureMap> = Vec::with_capacity(net.spec().layers.len());
    for (layer, weights) in net.layers() {
        let input = maps.last().unwrap_or(image);
        let out = exec.run_layer(layer, input, weights)?;
        maps.push(out);
    }
    Ok(maps)
}

/// Argmax of the final map, lowest index on ties. Binary final maps read
/// as ±1 logits.
pub fn infer(net: &Network, image: &FeatureMap, exec: &mut Executor) -> Result<Inference> {
    let last = forward(net, image, exec)?
        .pop()
        .expect("validated network has layers");
    let logits: Vec<i64> = last.to_int().values().iter().map(|&v| v as i64).collect();
    let class = argmax(&logits);
    Ok(Inference { class, logits })
}

pub fn argmax(v: &[i64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub name: String,
    pub image: FeatureMap,
    pub label: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub trials: u32,
    /// `predictions[trial][image]`.
    pub predictions: Vec<Vec<usize>>,
    pub correct: u64,
    pub labeled: u64,
    pub errors: ErrorStats,
    /// Events of every inference, merged in (trial, image) order.
    pub ledger: CostLedger,
}

impl Evaluation {
    pub fn inferences(&self) -> u64 {
        self.predictions.iter().map(|p| p.len() as u64).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.labeled > 0).then(|| self.correct as f64 / self.labeled as f64)
    }
}

/// Noise seed of one inference; independent of worker scheduling.
pub fn inference_seed(seed: u64, trial: u32, image: usize) -> u64 {
    crate::mix_seed(&[seed, trial as u64, image as u64])
}

/// Runs every image `trials` times. Each inference gets a fresh executor
/// seeded by [`inference_seed`], so results do not depend on `jobs`.
pub fn evaluate(
    net: &Network,
    data: &[Sample],
    config: &EngineConfig,
    trials: u32,
    jobs: usize,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    config.validate()?;
    let work: Vec<(u32, usize)> = (0..trials)
        .flat_map(|t| (0..data.len()).map(move |i| (t, i)))
        .collect();
    let run = |&(trial, i): &(u32, usize)| -> Result<(usize, CostLedger, ErrorStats)> {
        let mut c = config.clone();
        c.seed = inference_seed(config.seed, trial, i);
        let mut exec = Executor::new(c)?;
        let r = infer(net, &data[i].image, &mut exec)?;
        let (ledger, errors) = exec.into_parts();
        Ok((r.class, ledger, errors))
    };
    let results: Vec<Result<_>> = if jobs <= 1 {
        work.iter().map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| work.par_iter().map(run).collect())
    };

    let mut eval = Evaluation {
        trials,
        predictions: vec![Vec::with_capacity(data.len()); trials as usize],
        correct: 0,
        labeled: 0,
        errors: ErrorStats::default(),
        ledger: CostLedger::new(),
    };
    for (&(trial, i), r) in work.iter().zip(results) {
        let (class, ledger, errors) = r?;
        eval.predictions[trial as usize].push(class);
        if let Some(label) = data[i].label {
            eval.labeled += 1;
            eval.correct += (label == class) as u64;
        }
        eval.ledger.merge(&ledger);
        eval.errors.merge(&errors);
    }
    Ok(eval)
}

pub const LABELS_FILE: &str = "labels.csv";

/// Reads `labels.csv` (`file,label` with a header row; an empty label means
/// unlabeled) and the XRT1 images it names.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let path = dir.join(LABELS_FILE);
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (Some(file), label) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Config(format!("{}: empty record", path.display())));
        };
        let label = match label.map(str::trim) {
            None | Some("") => None,
            Some(l) => Some(
                l.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{}: bad label '{l}'", path.display())))?,
            ),
        };
        let image = FeatureMap::from_tensor(&Tensor::read(&dir.join(file))?)?;
        out.push(Sample {
            name: file.to_string(),
            image,
            label,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(out)
}

pub fn save_dataset(dir: &Path, data: &[Sample]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(LABELS_FILE);
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(["file", "label"]).map_err(csv_err)?;
    for s in data {
        s.image.to_tensor().write(&dir.join(&s.name))?;
        let label = s.label.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([s.name.as_str(), label.as_str()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
