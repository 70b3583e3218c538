//! Numeric substrate: dense matrices, reverse-mode differentiation for small
//! feed-forward graphs, loss criteria, optimizers, and a finite-difference
//! gradient checker.
//!
//! All training arithmetic is `f64`. Forward computations are deterministic
//! functions of inputs and parameters; randomness enters only through seeded
//! initialization, batching, and dropout masks.

mod ffn;
mod gradcheck;
mod matrix;
mod optim;
mod tape;

pub use ffn::{Dense, FeedForward};
pub use gradcheck::grad_check;
pub use matrix::{param, Matrix, ParamRef, Parameter};
pub use optim::{create_optimizer, optimizer_names, Optimizer, OptimizerConfig};
pub use tape::{cosine, Activation, LossKind, NodeId, Tape};
