//! Binarized network topology, lowering onto the bank, and inference.

pub mod exec;
pub mod feature;
pub mod infer;
pub mod lower;
pub mod network;
pub mod toy;
pub mod weights;

pub use exec::{EngineConfig, EngineKind, ErrorStats, Executor, Moments};
pub use feature::{BinaryMap, FeatureMap, IntMap};
pub use infer::{
    argmax, evaluate, forward, infer, inference_seed, load_dataset, save_dataset, Evaluation,
    Inference, Sample,
};
pub use lower::{lower_output_element, receptive_field, TileLayout, TilePlan};
pub use network::{LayerKind, LayerSpec, NetworkSpec, Shape};
pub use weights::{LayerWeights, Network};
