//! Numerical machinery for the policy networks: tensors, a reverse-mode
//! computation graph, the LSTM cell, seeded sampling, Xavier initialization,
//! gradient clipping and Adam.
//!
//! Everything is 64-bit floating point. Graph values are row-major matrices
//! whose rows are independent samples, so a whole batch of episodes shares one
//! graph; a single episode is just a one-row batch.

mod check;
mod graph;
mod init;
mod kernels;
mod lstm;
pub(crate) mod math;
mod optim;
mod params;
mod sample;
mod tensor;

pub use check::{finite_difference_check, FdEntry, FdOptions, FdReport};
pub use graph::{Graph, GraphError, Inputs, Var};
pub use init::xavier_init;
pub use lstm::{lstm_cell, LstmCell, LstmState};
pub use optim::{adam_step, clip_gradients, AdamState, ClipMode, OptimError};
pub use params::{Gradients, ParamId, ParamSet};
pub use sample::{
    argmax, sample_categorical, stream_rng, uniform01, uniform_index, SampleError, Stream,
    StreamRng,
};
pub use tensor::{Tensor, TensorError};
