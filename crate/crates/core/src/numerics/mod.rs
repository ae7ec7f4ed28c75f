//! Dense linear algebra, reverse-mode differentiation and seeded randomness.

pub mod graph;
pub mod matrix;
pub mod rng;

pub use graph::{grad_check, DiffGraph, Gradients, NodeId, Op};
pub use matrix::{layer_norm_rows, matmul, matmul_nt, matmul_tn, softmax_rows, Mask, Matrix, MASK_FILL};
pub use rng::RngState;
