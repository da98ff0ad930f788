//! Learning functions over strings with weighted finite automata.
//!
//! The crate estimates Hankel matrices from string samples and recovers
//! automata from them along two routes: classical spectral learning
//! (truncated SVD factorization plus pseudo-inverse regression) producing a
//! linear [`Wfa`], and a two-phase neural pipeline (autoencoder factorization
//! of the Hankel matrix, then per-symbol transition regression) producing a
//! [`NlWfa`] whose transition and termination maps may be nonlinear.
//!
//! Supporting pieces: a SPICE-format corpus loader, a probabilistic Dyck
//! sampler with an exact inside-probability oracle, and Pautomac-score /
//! word-error-rate evaluation.

pub mod corpus;
pub mod dyck;
pub mod eval;
pub mod hankel;
pub mod iofmt;
pub mod linwfa;
pub mod neural;
pub mod nlwfa;

pub use corpus::{Alphabet, SampleSet, Word};
pub use eval::{EvalReport, PredictiveModel};
pub use hankel::{Basis, HankelBlocks};
pub use linwfa::{Factorization, Wfa};
pub use neural::{Activation, Mlp, TrainConfig};
pub use nlwfa::{LearnConfig, LearnOutput, NlWfa, Variant};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("empty sample set")]
    EmptySamples,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("degenerate model: every output is below the probability clamp")]
    DegenerateModel,
}

pub type Result<T> = std::result::Result<T, Error>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

/// Derives an independent child seed from a master seed and a stream tag.
///
/// One splitmix64 step over `master ^ tag`. Used wherever several seeded
/// components (per-symbol networks, sweep cells) must not share a stream,
/// so that parallel execution cannot change results.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
