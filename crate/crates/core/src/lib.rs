//! Short-term transit demand forecasting with a multi-feature graph
//! convolutional recurrent network.
//!
//! Areal descriptors (land use, points of interest, ...) are turned into
//! learned area-similarity graphs by a sentinel attention; together with a
//! distance-based proximity graph and the identity they drive a graph
//! convolutional GRU over closeness, period and trend windows, whose outputs
//! are mixed by a per-area weighted fusion.

pub mod data;
pub mod error;
pub mod experiment;
pub mod graphs;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
