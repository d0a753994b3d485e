//! Numerical checks around Gaussian waves on the d-regular tree and almost
//! eigenvectors of random d-regular graphs.

pub mod eigenlab;
pub mod entropy;
pub mod error;
pub mod frame;
pub mod graph;
pub mod lift;
pub mod linalg;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod tree_ball;
pub mod wave;

pub use error::{Error, Result};
