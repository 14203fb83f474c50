//! Minimal CPU neural backend: matrices, reverse-mode autograd, Transformer
//! layers, Adam, and a word-piece vocabulary.

pub mod checkpoint;
pub mod graph;
pub mod layers;
pub mod matrix;
pub mod optim;
pub mod train;
pub mod transformer;
pub mod vocab;

pub use checkpoint::{load_params, save_params};
pub use graph::{Grads, Graph, ParamId, ParamStore, Var};
pub use matrix::Matrix;
pub use optim::{clip_grad_norm, Adam, LinearSchedule};
pub use train::{train_loop, TrainSpec};
pub use transformer::{BackboneConfig, EncoderClassifierArch, EncoderClassifierModel, Seq2SeqArch, Seq2SeqModel};
pub use vocab::Vocab;
