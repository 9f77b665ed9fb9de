//! Exact diagonalization of periodic spin chains.

mod basis;
mod cache;
mod ensemble;
pub mod linalg;
mod model;
mod operator;
mod space;

use thiserror::Error;

pub use basis::EigenBasis;
pub use ensemble::{ChainMoments, GibbsEnsemble, InvariantReport, DEFAULT_CACHE_BYTES};
pub use linalg::{CMat, CVecs};
pub use model::{build_hamiltonian, pauli, pauli_string, ChainModel, Decay, Hamiltonian, Term, TermOps, TRUNCATION};
pub use operator::{commutator_norm, LocalOperator, ObservableSpec};
pub use space::{Space, MAX_DIM};

use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("Hilbert space of L={l} sites with d={d} exceeds the dimension cap {cap}")]
    DimensionCap { l: usize, d: usize, cap: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("Hamiltonian is not Hermitian (max |H - H^dagger| = {defect:e})")]
    NonHermitian { defect: f64 },
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("invalid model file: {}", .0.join("; "))]
    Parse(Vec<String>),
}

/// Thermal state `e^{-beta H} / Z`.
pub fn gibbs_state(hamiltonian: Hamiltonian, beta: f64) -> Result<GibbsEnsemble, SimError> {
    GibbsEnsemble::new(hamiltonian, beta)
}

/// Heisenberg evolution `e^{iHt} A e^{-iHt}` under the ensemble's Hamiltonian.
pub fn evolve(a: &LocalOperator, t: f64, ensemble: &GibbsEnsemble) -> Result<LocalOperator, SimError> {
    a.evolve(t, ensemble.basis())
}

/// Normalized-partial-trace localization onto the `nu`-neighbourhood of the
/// original support.
pub fn localize(a: &LocalOperator, nu: usize) -> Result<LocalOperator, SimError> {
    a.localize(nu)
}

/// Cyclic shift by `x` sites.
pub fn translate(a: &LocalOperator, x: i64) -> Result<LocalOperator, SimError> {
    a.translate(x)
}

/// `omega(A)`.
pub fn expectation(ensemble: &GibbsEnsemble, a: &LocalOperator) -> Result<C64, SimError> {
    ensemble.expectation(a)
}

/// Moment provider evaluating the ensemble on products of `operands`.
pub fn moment_provider(ensemble: &GibbsEnsemble, operands: Vec<LocalOperator>) -> Result<ChainMoments<'_>, SimError> {
    ensemble.moment_provider(operands)
}
