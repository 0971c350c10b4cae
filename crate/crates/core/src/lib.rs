//! Synchronous majority dynamics on odd-degree trees.
//!
//! Every vertex adopts the majority opinion of its neighbours at each step.
//! On graphs where every degree is odd the process is well defined and
//! eventually alternates with period at most two. This crate simulates the
//! process, computes the exact worst-case stabilisation time of a tree with
//! a witness, decides several notions of per-vertex stability, and estimates
//! the associated probabilities.

pub mod claims;
pub mod dynamics;
pub mod error;
pub mod gen;
pub mod io;
pub mod lanes;
pub mod opinion;
pub mod probe;
pub mod stability;
pub mod tree;
pub mod worstcase;

pub use dynamics::{stabilise, stabilise_tree, step, Kernel, StabilisationResult, Trajectory};
pub use error::{Error, Result};
pub use opinion::OpinionVector;
pub use tree::{classify, perfect_tree_size, Graph, RootedTree, VertexClass};
