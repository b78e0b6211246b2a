//! Temporal, author-conditioned LSTM language models.
//!
//! Documents carry an author and a year. A model conditions its decoder on
//! a latent vector for that author at that year; in the full variant the
//! vectors form a trajectory `h_{a,t} = h_{a,t-1} + f(h_{a,t-1}, h_a)`
//! that can be rolled past the last training year.
//!
//! The usual path: read a [`corpus`], cut a [`splits`] assignment, [`train::fit`],
//! then [`eval::evaluate`], [`analysis`] or [`generate`]. The `book/`
//! directory has a walkthrough.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod generate;
pub mod io;
pub mod model;
pub mod numeric;
pub mod splits;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    pub mod quickstart {}
    #[doc = include_str!("../../../book/src/corpora.md")]
    pub mod corpora {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    pub mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
