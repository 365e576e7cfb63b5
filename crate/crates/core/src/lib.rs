#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ac;
pub mod conic;
pub mod duals;
pub mod error;
pub mod hermitian;
pub mod linalg;
pub mod network;
pub mod reference;
pub mod sdp;
pub mod socp;
pub mod pricing;

pub use duals::Multipliers;
pub use error::{Error, Result};
pub use hermitian::{HermitianMatrix, Rank1Decomposition, SymmetricEmbedding};
pub use network::{Bus, GeneratorCost, Line, NetworkCase, Violation};
