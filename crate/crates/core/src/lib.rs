//! pH prediction for drinking-water quality records with a one-hidden-layer
//! perceptron trained by Levenberg-Marquardt.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
