//! Multi-prover interactive proofs for graph 3-colorability.
//!
//! Three single-round protocols are implemented: an unmasked two-prover
//! protocol ([`Protocol::Std2`]), a two-prover protocol where colors are
//! committed over F3 ([`Protocol::Loc2`]), and a three-prover variant with a
//! consistency prover ([`Protocol::Qnl3`]). Alongside the protocol engine the
//! crate provides exact question distributions, a classical game-value
//! solver for cheating provers, a zero-knowledge simulator with exact view
//! comparison, a relativistic timing calculator and a TCP runner.

pub mod adversary;
pub mod commit;
pub mod dist;
pub mod engine;
pub mod error;
pub mod graph;
pub mod netrunner;
pub mod timing;
pub mod zk;

pub use commit::{NonzeroTrit, ProverSecret, Trit};
pub use dist::{Epsilon, Pmf, Question, Rational};
pub use engine::{Answer, HonestProver, Protocol, Prover, Query, Transcript, Verdict, VerdictReason};
pub use error::{FieldError, GraphError, NetError, ProtocolError};
pub use graph::{Coloring, Edge, EdgeRelation, Graph, Vertex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every seeded computation in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`, for parallel workers.
pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
