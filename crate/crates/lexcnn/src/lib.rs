//! Lexicon-integrated convolutional sentiment classifiers.
//!
//! The library builds sentence classifiers that combine pre-trained word
//! embeddings with *lexicon embeddings*: per-word vectors of sentiment
//! scores concatenated across multiple lexicon sources. Three integration
//! strategies are supported on top of a single-layer convolutional
//! baseline, each optionally extended with an embedding attention vector
//! that summarizes the whole document in an embedding space:
//!
//! * `base` — convolution over the word-embedding matrix only
//! * `nc`   — naive concatenation: lexicon scores appended to each word vector
//! * `mc`   — multichannel: lexicon vectors as a second channel, convolved
//!   jointly with the word channel
//! * `sc`   — separate convolution stacks for word and lexicon matrices
//!
//! Everything is computed in 64-bit floats with hand-written backward
//! passes, a seeded deterministic training loop, and plain-text file
//! formats, so experiments are reproducible bit for bit.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod model;
pub mod provenance;
pub mod report;
pub mod rng;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::Rng;
