//! Engagement modelling for threaded discussions: user embeddings from
//! co-occurrence, a clustered user manifold, a curvature-based engagement
//! network with two baselines, and the evaluation tooling around them.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod guvec;
pub mod io;
pub mod logreg;
pub mod manifold;
pub mod math;
pub mod metrics;
pub mod model;
pub mod newton;
pub mod optim;
pub mod pipeline;
pub mod synth;
pub mod textfeat;

pub use error::{Error, Result};
