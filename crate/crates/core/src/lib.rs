//! Edge-aware GAN oversampling for class-imbalanced heterogeneous graphs.
//!
//! The pipeline: a [`dataio`] generator plants a two-type review graph;
//! [`trainer`] fits the generator triple (noise MLP, subgraph mixer, edge
//! droppers) against per-edge-type discriminators inside sampled one-hop
//! subgraphs, steering edge thresholds with [`threshold`]; [`augment`] grows
//! the minority class to a target ratio (with oversampling and SMOTE
//! baselines); [`evalsuite`] trains the downstream classifier and reports
//! ranking and threshold metrics.

pub mod augment;
pub mod dataio;
pub mod error;
pub mod evalsuite;
pub mod flashgan;
pub mod hetgraph;
pub mod neural;
pub mod threshold;
pub mod trainer;

pub use error::{Error, Result};
pub use hetgraph::{HeteroGraph, Schema, Split, Subgraph};
