//! Magic (mana) of qutrit many-body states: Wigner functions, Potts-chain
//! ground states via DMRG, MERA gate counting, and mean-field theory.

pub mod error;
pub mod experiments;
pub mod hull;
pub mod lanczos;
pub mod meanfield;
pub mod mera;
pub mod monotone;
pub mod mps;
pub mod potts;
pub mod qudit;
pub mod random;
pub mod selftest;
pub mod wigner;

pub use error::{Error, Result};
