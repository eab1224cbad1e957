//! Exact linear algebra over `Z` and `Z/M`.

use num_bigint::BigInt;

pub mod int;
pub mod res;

pub use int::{hermite_normal_form, inverse_unimodular, rank, smith_normal_form, solve_int, IntMatrix, Lattice, Snf};
pub use res::{howell_form, kernel_mod, log_modulus, reduce_i128, solve_mod, Howell, ResMatrix};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LinError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("modulus mismatch: {0} vs {1}")]
    Modulus(u64, u64),
}

/// Reduces an integer matrix modulo `modulus`.
pub fn reduce_matrix(m: &IntMatrix, modulus: u64) -> ResMatrix {
    let mut out = ResMatrix::zeros(modulus, m.rows(), m.cols());
    for (&(i, j), v) in m.entries() {
        out.set(i, j, reduce_big(v, modulus));
    }
    out
}

pub fn reduce_big(v: &BigInt, modulus: u64) -> u64 {
    let r = v % BigInt::from(modulus);
    let r = if r < BigInt::from(0) { r + BigInt::from(modulus) } else { r };
    u64::try_from(r).expect("residue fits in u64")
}

pub fn reduce_vec(v: &[BigInt], modulus: u64) -> Vec<u64> {
    v.iter().map(|x| reduce_big(x, modulus)).collect()
}

/// Smallest non-negative integer representatives of residues.
pub fn lift_vec(v: &[u64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}
