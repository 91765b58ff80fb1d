//! Discrete-time LIF simulation and surrogate-gradient training.

pub mod checkpoint;
pub mod network;
pub mod neuron;
pub mod train;

pub use network::{GradBuffers, InitParams, InputEncoding, Network, ParamBlock, SpikeFn, Trace};
pub use neuron::{lif_step, surrogate_grad, NeuronParams};
pub use train::{evaluate, train, EvalStats, TrainConfig, TrainReport};
