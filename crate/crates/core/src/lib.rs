//! Alignment metrics between language-model embedding spaces and perceptual
//! color space.
//!
//! The crate reads color–description pairs and description embeddings,
//! scores and slices the corpus, and measures how well each slice's
//! embedding geometry lines up with CIELAB using a linear probe,
//! representational similarity analysis and Gromov-Wasserstein optimal
//! transport. A separate comparatives module builds and scores a
//! masked-comparative probe.

pub mod alignment;
pub mod cli;
pub mod colorspace;
pub mod comparatives;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod scoring;
pub mod text;

pub use error::{Error, Result};
