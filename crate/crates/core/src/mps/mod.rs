//! Matrix product states, two-site DMRG, and reduced density matrices.

pub mod cache;
pub mod dmrg;
pub mod mpo;
pub mod rdm;
pub mod state;
pub mod wigner;

pub use cache::{CacheEntry, CacheKey, GroundStateCache, CACHE_ENV};
pub use dmrg::{dmrg, mpo_expectation, DmrgConfig, DmrgResult};
pub use mpo::{Mpo, MpoTensor};
pub use rdm::{rdm, sliding_pair_rdms, symmetrize_rdm, Interval, SubsystemSpec};
pub use state::{svd_truncate, MpsState, SiteTensor};
pub use wigner::{connected_mana, wigner_of_mps_rdm, wigner_tensor_train};
