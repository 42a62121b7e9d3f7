#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod linalg;
pub mod noise;
pub mod probes;
pub mod quadrature;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};

/// Hex SHA-256 digest, the content hash recorded in artifacts.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
