//! Heterogeneous spatial-spectral graph network for pansharpening.
//!
//! A PAN image and a co-registered, upsampled LR-MS image are cut into
//! overlapping patches. Each PAN patch and each LR-MS band patch becomes a
//! node of an attributed multiplex heterogeneous graph with three typed,
//! cosine-weighted relations. The graph is decomposed into basic
//! relationship patterns, aggregated locally and globally by linear graph
//! convolutions, and decoded into a residual over the upsampled LR-MS.
//!
//! Modules follow the pipeline order: [`imaging`], [`graph`], [`patterns`],
//! [`aggregation`], [`training`], [`metrics`]. [`bench`] times the
//! quadratic-cost stages.

pub mod aggregation;
pub mod bench;
pub mod config;
pub mod error;
pub mod graph;
pub mod imaging;
pub mod metrics;
pub mod patterns;
pub mod sparse;
pub mod training;

pub use config::{Ablation, Precision, TrainConfig};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/imaging.md")]
    mod imaging {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/patterns.md")]
    mod patterns {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
