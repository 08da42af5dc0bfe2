//! Layer parameters and their on-disk form.
//!
//! A weights directory holds `<layer>.xrt` per weighted layer and optionally
//! `<layer>.thr.xrt` with per-channel thresholds (`i32`, dims `[O]`).
//! Binarized kernels are binary with dims `[O, k, k, I]` (conv) or `[O, N]`
//! (fc), one row per output channel in receptive-field order. Host layers
//! store `i32` weights with the same dims.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitcore::BinaryVector;
use crate::bnn::network::{LayerKind, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{Tensor, TensorData};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerWeights {
    Binary {
        kernels: Vec<BinaryVector>,
        thresholds: Option<Vec<i64>>,
    },
    /// Row-major `O x N`.
    Int(Vec<i32>),
    None,
}

impl LayerWeights {
    pub fn check(&self, layer: &LayerSpec) -> Result<()> {
        let (o, n) = (layer.out_channels as usize, layer.kernel_size());
        let bad = |m: String| Err(Error::Network(format!("layer {}: {m}", layer.name)));
        match (layer.kind, self) {
            (LayerKind::Pool, LayerWeights::None) => Ok(()),
            (
                LayerKind::Conv | LayerKind::Fc,
                LayerWeights::Binary {
                    kernels,
                    thresholds,
                },
            ) => {
                if kernels.len() != o || kernels.iter().any(|k| k.len() != n) {
                    return bad(format!("needs {o} binary kernels of {n} bits"));
                }
                if thresholds.as_ref().is_some_and(|t| t.len() != o) {
                    return bad(format!("needs {o} thresholds"));
                }
                Ok(())
            }
            (LayerKind::HostConv | LayerKind::HostFc, LayerWeights::Int(w)) => {
                if w.len() != o * n {
                    return bad(format!("needs {} integer weights, got {}", o * n, w.len()));
                }
                Ok(())
            }
            _ => bad("weights do not match the layer kind".into()),
        }
    }

    /// Per-channel thresholds in effect: file override, then config override.
    pub fn thresholds<'a>(&'a self, layer: &'a LayerSpec) -> Option<&'a [i64]> {
        match self {
            LayerWeights::Binary {
                thresholds: Some(t),
                ..
            } => Some(t),
            _ => layer.thresholds.as_deref(),
        }
    }

    fn dims(layer: &LayerSpec) -> Vec<u32> {
        match layer.kind {
            LayerKind::Conv | LayerKind::HostConv => {
                vec![layer.out_channels, layer.k, layer.k, layer.in_channels]
            }
            _ => vec![layer.out_channels, layer.kernel_size() as u32],
        }
    }
}

/// A network with its parameters, validated against each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    spec: NetworkSpec,
    weights: Vec<LayerWeights>,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: Vec<LayerWeights>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.layers.len() {
            return Err(Error::Network(format!(
                "{} weight sets for {} layers",
                weights.len(),
                spec.layers.len()
            )));
        }
        for (l, w) in spec.layers.iter().zip(&weights) {
            w.check(l)?;
        }
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[LayerWeights] {
        &self.weights
    }

    pub fn layers(&self) -> impl Iterator<Item = (&LayerSpec, &LayerWeights)> {
        self.spec.layers.iter().zip(&self.weights)
    }

    /// Random ±1 kernels and small host weights in `-2..=2`.
    pub fn random(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = spec
            .layers
            .iter()
            .map(|l| random_layer(l, &mut rng))
            .collect::<Result<_>>()?;
        Self::new(spec, weights)
    }

    pub fn load(spec: NetworkSpec, dir: &Path) -> Result<Self> {
        let mut weights = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            weights.push(load_layer(l, dir)?);
        }
        Self::new(spec, weights)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (l, w) in self.layers() {
            let dims = LayerWeights::dims(l);
            let path = dir.join(format!("{}.xrt", l.name));
            match w {
                LayerWeights::None => continue,
                LayerWeights::Int(v) => Tensor::int(dims, v.clone())?.write(&path)?,
                LayerWeights::Binary {
                    kernels,
                    thresholds,
                } => {
                    Tensor::binary(dims, kernels.clone())?.write(&path)?;
                    if let Some(t) = thresholds {
                        let t = t
                            .iter()
                            .map(|&v| {
                                i32::try_from(v).map_err(|_| {
                                    Error::Tensor(format!("threshold {v} exceeds i32"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Tensor::int(vec![l.out_channels], t)?
                            .write(&dir.join(format!("{}.thr.xrt", l.name)))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn random_layer(l: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<LayerWeights> {
    let (o, n) = (l.out_channels as usize, l.kernel_size());
    Ok(match l.kind {
        LayerKind::Pool => LayerWeights::None,
        LayerKind::Conv | LayerKind::Fc => LayerWeights::Binary {
            kernels: (0..o)
                .map(|_| {
                    let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
                    BinaryVector::from_bools(&bits)
                })
                .collect::<Result<_>>()?,
            thresholds: None,
        },
        LayerKind::HostConv | LayerKind::HostFc => {
            LayerWeights::Int((0..o * n).map(|_| rng.random_range(-2..=2)).collect())
        }
    })
}

fn load_layer(l: &LayerSpec, dir: &Path) -> Result<LayerWeights> {
    if l.kind == LayerKind::Pool {
        return Ok(LayerWeights::None);
    }
    let path = dir.join(format!("{}.xrt", l.name));
    let t = Tensor::read(&path)?;
    let (o, n) = (l.out_channels as usize, l.kernel_size());
    let dims = t.dims();
    let rest: usize = dims[1..].iter().map(|&d| d as usize).product();
    if dims.len() < 2 || dims[0] as usize != o || rest != n {
        return Err(Error::Tensor(format!(
            "{}: dims {dims:?} do not hold {o} x {n} weights",
            path.display()
        )));
    }
    let w = match (l.binarized(), t.into_data()) {
        (true, TensorData::Binary(kernels)) => {
            let thr = dir.join(format!("{}.thr.xrt", l.name));
            let thresholds = if thr.exists() {
                match Tensor::read(&thr)?.into_data() {
                    TensorData::Int(v) => Some(v.into_iter().map(i64::from).collect()),
                    TensorData::Binary(_) => {
                        return Err(Error::Tensor(format!(
                            "{}: thresholds must be i32",
                            thr.display()
                        )))
                    }
                }
            } else {
                None
            };
            LayerWeights::Binary {
                kernels,
                thresholds,
            }
        }
        (false, TensorData::Int(v)) => LayerWeights::Int(v),
        _ => {
            return Err(Error::Tensor(format!(
                "{}: wrong dtype for a {} layer",
                path.display(),
                l.kind.name()
            )))
        }
    };
    w.check(l)?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::network::Shape;

    fn spec() -> NetworkSpec {
        NetworkSpec {
            name: "t".into(),
            input: Shape::new(2, 4, 4),
            classes: 3,
            layers: vec![
                LayerSpec::conv("c1", 3, 2, 4)
                    .with_kind(LayerKind::HostConv)
                    .with_padding(1),
                LayerSpec::conv("c2", 3, 4, 8).with_padding(1),
                LayerSpec::pool("p", 8),
                LayerSpec::fc("f1", 32, 3).with_kind(LayerKind::HostFc),
            ],
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join(format!("xcelram-w-{}", std::process::id()));
        let mut net = Network::random(spec(), 5).unwrap();
        net.weights[1] = match net.weights[1].clone() {
            LayerWeights::Binary { kernels, .. } => LayerWeights::Binary {
                kernels,
                thresholds: Some(vec![1, 2, 3, 4, 5, 6, 7, 8]),
            },
            w => w,
        };
        net.save(&dir).unwrap();
        let back = Network::load(spec(), &dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_mismatched_weights() {
        let net = Network::random(spec(), 1).unwrap();
        let mut w = net.weights().to_vec();
        w.swap(0, 1);
        assert!(Network::new(spec(), w).is_err());
        assert!(Network::new(spec(), net.weights()[..3].to_vec()).is_err());
    }
}
