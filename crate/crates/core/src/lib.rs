//! Partition lattices, classical and free cumulants, and clustering
//! experiments on finite periodic spin chains.

// BLAS/LAPACK symbols come from the system OpenBLAS
extern crate openblas_src;

pub mod cumulant;
pub mod harness;
pub mod numeric;
pub mod partition;
pub mod runner;
mod schema;
pub mod sim;

pub use num_complex::Complex64 as C64;
