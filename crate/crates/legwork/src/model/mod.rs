//! The sequence model: a small causal transformer over interleaved
//! return-to-go / observation / action tokens with two output heads, a
//! categorical skill-transition head and a diagonal-Gaussian action head,
//! plus the tensor and reverse-mode tape machinery it runs on.

pub mod adam;
pub mod checkpoint;
pub mod featurize;
pub mod gradcheck;
pub mod net;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use featurize::{Batch, Featurizer, Normalizer};
pub use net::{ForwardOut, ModelConfig, ModelParams};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
