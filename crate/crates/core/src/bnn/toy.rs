//! Synthetic images and teacher-labelled toy datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnn::exec::{EngineConfig, EngineKind, Executor};
use crate::bnn::feature::{FeatureMap, IntMap};
use crate::bnn::infer::{infer, Sample};
use crate::bnn::network::Shape;
use crate::bnn::weights::Network;
use crate::error::Result;

/// Integer image with values uniform in `-range..=range`.
pub fn random_image(shape: Shape, range: i32, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..shape.len())
        .map(|_| rng.random_range(-range..=range))
        .collect();
    FeatureMap::Int(IntMap::new(shape, values).expect("length matches shape"))
}

/// `count` random images labelled by the exact engine, so the noise-free
/// accuracy of `net` on them is 1.
pub fn teacher_dataset(net: &Network, count: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut exec = Executor::new(EngineConfig::new(EngineKind::Oracle))?;
    (0..count)
        .map(|i| {
            let image = random_image(net.spec().input, 8, crate::mix_seed(&[seed, i as u64]));
            let label = infer(net, &image, &mut exec)?.class;
            Ok(Sample {
                name: format!("img{i:05}.xrt"),
                image,
                label: Some(label),
            })
        })
        .collect()
}
