//! Grammar-driven synthesis of balanced intent/slot hate-speech datasets.

pub mod bench;
pub mod client;
pub mod dataset;
pub mod demo;
pub mod error;
pub mod eval;
pub mod grammar;
pub mod instance;
pub mod lexicon;
pub mod planner;
pub mod realize;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
