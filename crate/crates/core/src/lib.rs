//! Autoencoder-based codebook design for code-domain NOMA.
//!
//! The crate trains multi-user (one encoder per user, split inputs) and
//! single-user (genie, joint input) autoencoders over an AWGN channel and
//! evaluates the resulting codebooks with Monte Carlo simulation, an
//! exhaustive minimum-distance detector and a pairwise union bound.
//!
//! Modules, bottom up:
//!
//! - [`nn`]: dense networks, reverse-mode gradients, SGD
//! - [`system`]: dimensions, resource mapping, bit-label conventions
//! - [`modem`]: encoders, power normalization, superposition, AWGN, decoder
//! - [`loss`] and [`train`]: loss functions and the two-step schedule
//! - [`eval`]: BER simulation, detection, bounds, baselines, metrics
//! - [`codebook_io`] and [`config`]: file formats

pub mod codebook_io;
pub mod config;
pub mod error;
pub mod eval;
pub mod loss;
pub mod modem;
pub mod nn;
pub mod rng;
pub mod system;
pub mod textfmt;
pub mod train;

pub use error::{Error, Result};
pub use modem::{
    Codebook, Codeword, CodewordTable, EncoderStack, MuEncoder, OneHotInput, SuEncoder,
    SuperposedConstellation,
};
pub use nn::{Activation, DenseNetwork, GradientSet, NetworkSpec};
pub use rng::RngStream;
pub use system::{MappingMatrix, PnlLevel, SystemConfig};
