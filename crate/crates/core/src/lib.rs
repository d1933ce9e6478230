//! Simulation of two-element warm-standby systems whose work, repair and
//! switching times have general, state-dependent hazards with atoms.
//!
//! - [`hazard`]: lifetimes given by a hazard rate, atoms and a support bound.
//! - [`kernel`]: the two-element process, its trajectories and availability.
//! - [`envelope`]: the envelope conditions a to d.
//! - [`coupling`]: coupled pairs, coupling-time tails and rate fits.
//! - [`oracles`]: exact Markov-chain results and other reference checks.
//! - [`config`] and [`cli`]: the JSON experiment format and the `warmsim` binary.
//!
//! The `book/` directory holds a longer guide; its code blocks run as doctests.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod coupling;
pub(crate) mod engine;
pub mod envelope;
pub mod error;
pub mod hazard;
pub mod kernel;
pub mod oracles;
pub mod quadrature;
pub mod rng;
mod solve;

pub use error::{Error, Result};

#[cfg(doctest)]
mod booktest {
    macro_rules! booktest {
        ($i:ident) => {
            #[doc = include_str!(concat!("../../../book/src/", stringify!($i), ".md"))]
            mod $i {}
        };
    }
    booktest!(introduction);
    booktest!(lifetimes);
    booktest!(model);
    booktest!(availability);
    booktest!(envelopes);
    booktest!(coupling);
    booktest!(reproducibility);
    booktest!(configuration);
}
