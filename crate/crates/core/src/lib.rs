//! Resilient selection, splitting, sorting and k-d trees in the faulty-RAM model.
//!
//! [`sim`] provides the machine: a word array an adversary may corrupt
//! between any two accesses, a small reliable store, and oracles that see
//! ground truth. The algorithm modules run on top of it.

pub mod deterministic_select;
pub mod error;
pub mod harness;
pub mod kd_tree;
pub mod primitives;
pub mod quicksort;
pub mod randomized_select;
pub mod recursion_stack;
pub mod sandbox;
pub mod sim;

pub use error::{FramError, Result};
