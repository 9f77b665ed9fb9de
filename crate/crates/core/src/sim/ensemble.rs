//! Gibbs states and moments of ordered operator products.
//!
//! Moments of unevolved operators are taken against the reduced density
//! matrix on the union of their supports. Once any operand is time-evolved
//! the computation moves to the eigenbasis: with a single evolved operand
//! `X(t)` the moment `Tr(rho L X(t) R)` equals
//! `sum_ab e^{i(E_a - E_b)t} X_ab (R rho L)_ba`, so the matrix `R rho L` and
//! the entrywise product with `X` are cached and every further time costs a
//! single matrix-vector product.

use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use super::basis::EigenBasis;
use super::cache::ByteLru;
use super::linalg::{CMat, CVecs};
use super::model::Hamiltonian;
use super::operator::{LocalOperator, OpKey};
use super::space::Space;
use super::SimError;
use crate::cumulant::{CumulantError, MomentProvider};
use crate::C64;

/// Supports up to this many sites use reduced density matrices.
const RDM_SITES: usize = 8;

/// Default memory for cached eigenbasis matrices, split between rotated
/// operators, environments and their entrywise products.
pub const DEFAULT_CACHE_BYTES: usize = 2 << 30;

const MEMO_LIMIT: usize = 1 << 20;

type EnvKey = (Vec<OpKey>, Vec<OpKey>);

pub struct GibbsEnsemble {
    hamiltonian: Arc<Hamiltonian>,
    beta: f64,
    basis: Arc<EigenBasis>,
    weights: Vec<f64>,
    rho: OnceLock<Arc<CMat>>,
    rdms: Mutex<HashMap<Vec<usize>, Arc<CMat>>>,
    envs: ByteLru<EnvKey, CMat>,
    pairs: ByteLru<(OpKey, EnvKey), CMat>,
    memo: Mutex<HashMap<Vec<OpKey>, C64>>,
}

impl std::fmt::Debug for GibbsEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GibbsEnsemble").field("dim", &self.space().dim()).field("beta", &self.beta).finish()
    }
}

impl GibbsEnsemble {
    pub fn new(hamiltonian: Hamiltonian, beta: f64) -> Result<Self, SimError> {
        Self::with_cache_budget(hamiltonian, beta, DEFAULT_CACHE_BYTES)
    }

    pub fn with_cache_budget(hamiltonian: Hamiltonian, beta: f64, cache_bytes: usize) -> Result<Self, SimError> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(SimError::InvalidModel(format!("beta must be finite and >= 0, got {beta}")));
        }
        let basis = EigenBasis::new(&hamiltonian, cache_bytes / 10 * 4)?;
        let e0 = basis.energies().first().copied().unwrap_or(0.0);
        // shift by the ground energy so the largest exponent is 0
        let raw: Vec<f64> = basis.energies().iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = raw.iter().sum();
        if !(z.is_finite() && z > 0.0) {
            return Err(SimError::Eigensolver(format!("partition function {z} is not positive")));
        }
        let weights = raw.into_iter().map(|w| w / z).collect();
        Ok(GibbsEnsemble {
            hamiltonian: Arc::new(hamiltonian),
            beta,
            basis,
            weights,
            rho: OnceLock::new(),
            rdms: Mutex::new(HashMap::new()),
            envs: ByteLru::new(cache_bytes / 10 * 3),
            pairs: ByteLru::new(cache_bytes / 10 * 3),
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn space(&self) -> &Space {
        self.basis.space()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn energies(&self) -> &[f64] {
        self.basis.energies()
    }

    /// Boltzmann weights of the eigenstates (sum to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Operator norm of the Hamiltonian.
    pub fn hamiltonian_norm(&self) -> f64 {
        let e = self.energies();
        match (e.first(), e.last()) {
            (Some(lo), Some(hi)) => lo.abs().max(hi.abs()),
            _ => 0.0,
        }
    }

    /// Density matrix in the computational basis.
    pub fn density_matrix(&self) -> Arc<CMat> {
        Arc::clone(self.rho.get_or_init(|| {
            let dim = self.space().dim();
            if self.beta == 0.0 {
                let mut id = CMat::identity(dim);
                id.scale(1.0 / dim as f64);
                return Arc::new(id);
            }
            let u = self.basis.vectors();
            Arc::new(u.scale_cols(&self.weights).matmul_adjoint(u))
        }))
    }

    /// Reduced density matrix on `sites` (ascending), cached.
    pub fn reduced_density(&self, sites: &[usize]) -> Arc<CMat> {
        if let Some(r) = self.rdms.lock().expect("rdm cache poisoned").get(sites) {
            return Arc::clone(r);
        }
        let d = self.space().local_dim();
        let reduced = if self.beta == 0.0 {
            let k = d.pow(sites.len() as u32);
            let mut id = CMat::identity(k);
            id.scale(1.0 / k as f64);
            id
        } else {
            self.space().partial_trace(&self.density_matrix(), sites)
        };
        let reduced = Arc::new(reduced);
        self.rdms.lock().expect("rdm cache poisoned").insert(sites.to_vec(), Arc::clone(&reduced));
        reduced
    }

    /// `omega(A)`.
    pub fn expectation(&self, op: &LocalOperator) -> Result<C64, SimError> {
        self.moment(&[op])
    }

    /// `omega(A_1 A_2 ... A_k)`.
    pub fn moment(&self, ops: &[&LocalOperator]) -> Result<C64, SimError> {
        for op in ops {
            if op.space() != self.space() {
                return Err(SimError::DimensionMismatch { expected: self.space().dim(), found: op.space().dim() });
            }
        }
        if ops.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        let key: Vec<OpKey> = ops.iter().map(|o| o.key().clone()).collect();
        if let Some(v) = self.memo.lock().expect("memo poisoned").get(&key) {
            return Ok(*v);
        }
        let value = self.compute_moment(ops)?;
        let mut memo = self.memo.lock().expect("memo poisoned");
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(key, value);
        Ok(value)
    }

    fn compute_moment(&self, ops: &[&LocalOperator]) -> Result<C64, SimError> {
        let mut parts: Vec<(Cow<'_, LocalOperator>, f64)> = Vec::with_capacity(ops.len());
        for op in ops {
            match op.evolved_parts() {
                None => parts.push((Cow::Borrowed(*op), 0.0)),
                Some((local, t, basis)) if basis.id() == self.basis.id() => parts.push((Cow::Borrowed(local), t)),
                Some(_) => {
                    let dense = LocalOperator::from_full(self.space(), op.materialize()?)?;
                    parts.push((Cow::Owned(dense), 0.0));
                }
            }
        }
        if parts.iter().all(|(_, t)| *t == 0.0) {
            let locals: Vec<&LocalOperator> = parts.iter().map(|(o, _)| o.as_ref()).collect();
            return self.local_moment(&locals);
        }
        let keys: Vec<OpKey> = ops.iter().map(|o| o.key().clone()).collect();
        self.eigen_moment(&parts, &keys)
    }

    fn local_moment(&self, ops: &[&LocalOperator]) -> Result<C64, SimError> {
        let mut union: Vec<usize> = ops.iter().flat_map(|o| o.support()).collect();
        union.sort_unstable();
        union.dedup();
        if union.len() <= RDM_SITES {
            let rho = self.reduced_density(&union);
            let mut product: Option<CMat> = None;
            for op in ops {
                let lifted = op.lift(&union)?;
                product = Some(match product {
                    None => lifted,
                    Some(p) => p.matmul(&lifted),
                });
            }
            let product = product.expect("at least one operand");
            return Ok(rho.trace_product(&product));
        }
        // Tr(A_1 ... A_k rho), applying operators right to left onto rho
        let mut acc = (*self.density_matrix()).clone();
        for op in ops.iter().rev() {
            let (sites, matrix) = op.local_parts().expect("unevolved operand");
            acc = if sites.len() == self.space().sites() {
                matrix.matmul(&acc)
            } else {
                self.space().apply_local_rows(sites, matrix, &acc)
            };
        }
        Ok(acc.trace())
    }

    fn eigen_moment(&self, parts: &[(Cow<'_, LocalOperator>, f64)], keys: &[OpKey]) -> Result<C64, SimError> {
        let pivot = parts.iter().position(|(_, t)| *t != 0.0).expect("an evolved operand");
        if parts.len() == 1 {
            // the phases cancel on the diagonal
            let rotated = self.basis.transform(&parts[0].0)?;
            return Ok(super::linalg::weighted_diag(&rotated, &self.weights));
        }
        let pair = self.pair_matrix(parts, keys, pivot)?;
        Ok(self.contract(&pair, &[parts[pivot].1])[0])
    }

    /// `X ∘ (R rho L)^T` for the evolved operand `X` at `pivot`, where `L`
    /// and `R` are the operands before and after it.
    fn pair_matrix(
        &self,
        parts: &[(Cow<'_, LocalOperator>, f64)],
        keys: &[OpKey],
        pivot: usize,
    ) -> Result<Arc<CMat>, SimError> {
        let rotated: Vec<Arc<CMat>> =
            parts.iter().map(|(op, _)| self.basis.transform(op)).collect::<Result<_, _>>()?;
        let env_key: EnvKey = (keys[pivot + 1..].to_vec(), keys[..pivot].to_vec());
        let env = self.envs.get_or_try_insert(&env_key, CMat::bytes, || -> Result<CMat, SimError> {
            let factor = |i: usize| -> Cow<'_, CMat> {
                let t = parts[i].1;
                if t == 0.0 {
                    Cow::Borrowed(rotated[i].as_ref())
                } else {
                    Cow::Owned(rotated[i].conjugate_phases(&self.basis.phases(t)))
                }
            };
            let mut acc: Option<CMat> = None;
            for i in pivot + 1..parts.len() {
                let f = factor(i);
                acc = Some(match acc {
                    None => f.into_owned(),
                    Some(a) => a.matmul(&f),
                });
            }
            let mut acc = match acc {
                None => diagonal(&self.weights),
                Some(a) => a.scale_cols(&self.weights),
            };
            for i in 0..pivot {
                acc = acc.matmul(&factor(i));
            }
            Ok(acc)
        })?;
        let pair_key = (parts[pivot].0.key().clone(), env_key);
        self.pairs.get_or_try_insert(&pair_key, CMat::bytes, || Ok::<_, SimError>(rotated[pivot].hadamard_transposed(&env)))
    }

    /// `sum_ab e^{iE_a t} P_ab e^{-iE_b t}` for every time, in one pass over `P`.
    fn contract(&self, pair: &CMat, times: &[f64]) -> Vec<C64> {
        let dim = self.weights.len();
        let mut v = CVecs::zeros(dim, times.len());
        let mut phases = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let ph = self.basis.phases(t);
            for (i, z) in ph.iter().enumerate() {
                v.re[[i, j]] = z.re;
                v.im[[i, j]] = -z.im;
            }
            phases.push(ph);
        }
        let w = pair.apply(&v);
        phases
            .iter()
            .enumerate()
            .map(|(j, ph)| ph.iter().enumerate().map(|(i, z)| z * C64::new(w.re[[i, j]], w.im[[i, j]])).sum())
            .collect()
    }

    /// Computes `omega(A_1 ... A_p(t) ... A_k)` for every `t` in `times`
    /// together, where only the operand at `pivot` is evolved, and keeps the
    /// results for later calls to [`GibbsEnsemble::moment`].
    pub fn prefetch_moments(&self, ops: &[&LocalOperator], pivot: usize, times: &[f64]) -> Result<(), SimError> {
        if ops.len() < 2 || pivot >= ops.len() || ops.iter().any(|o| !o.is_local() || o.space() != self.space()) {
            return Ok(());
        }
        let mut keys: Vec<OpKey> = ops.iter().map(|o| o.key().clone()).collect();
        let mut pending = Vec::new();
        {
            let memo = self.memo.lock().expect("memo poisoned");
            for &t in times {
                if t == 0.0 {
                    continue;
                }
                keys[pivot] = ops[pivot].evolve(t, &self.basis)?.key().clone();
                if !memo.contains_key(&keys) {
                    pending.push((t, keys.clone()));
                }
            }
        }
        if pending.is_empty() {
            return Ok(());
        }
        let parts: Vec<(Cow<'_, LocalOperator>, f64)> = ops
            .iter()
            .enumerate()
            .map(|(i, o)| (Cow::Borrowed(*o), if i == pivot { pending[0].0 } else { 0.0 }))
            .collect();
        let pair = self.pair_matrix(&parts, &pending[0].1, pivot)?;
        let ts: Vec<f64> = pending.iter().map(|(t, _)| *t).collect();
        let values = self.contract(&pair, &ts);
        let mut memo = self.memo.lock().expect("memo poisoned");
        if memo.len() + values.len() > MEMO_LIMIT {
            memo.clear();
        }
        for ((_, key), value) in pending.into_iter().zip(values) {
            memo.insert(key, value);
        }
        Ok(())
    }

    pub fn moment_provider(&self, operands: Vec<LocalOperator>) -> Result<ChainMoments<'_>, SimError> {
        for op in &operands {
            if op.space() != self.space() {
                return Err(SimError::DimensionMismatch { expected: self.space().dim(), found: op.space().dim() });
            }
        }
        Ok(ChainMoments { ensemble: self, operands })
    }

    /// Numerical checks of the state and of the model's symmetries.
    pub fn check_invariants(&self) -> Result<InvariantReport, SimError> {
        let rho = self.density_matrix();
        let h = self.hamiltonian.matrix();
        let trace = rho.trace();
        let rho_hermiticity = rho.hermiticity_defect();
        let min_weight = self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        let comm = rho.matmul(h).sub(&h.matmul(&rho));
        // Frobenius norm bounds the operator norm from above
        let stationarity = comm.to_complex().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let h_norm = self.hamiltonian_norm();
        let hermiticity = h.hermiticity_defect();

        let mut translation_spread: f64 = 0.0;
        let mut time_spread: f64 = 0.0;
        if self.space().local_dim() == 2 {
            for letter in ["X", "Y", "Z"] {
                let a0 = LocalOperator::parse(self.space(), &format!("{letter}@0"))?;
                let e0 = self.expectation(&a0)?;
                if self.hamiltonian.is_translation_invariant() {
                    for x in 1..self.space().sites() as i64 {
                        let ex = self.expectation(&a0.translate(x)?)?;
                        translation_spread = translation_spread.max((ex - e0).norm());
                    }
                }
                for t in [0.5, 1.7] {
                    let et = self.expectation(&a0.evolve(t, &self.basis)?)?;
                    time_spread = time_spread.max((et - e0).norm());
                }
            }
        }
        let passed = (trace - 1.0).norm() <= 1e-10
            && rho_hermiticity <= 1e-12
            && min_weight >= 0.0
            && hermiticity <= super::model::HERMITIAN_TOL
            && stationarity <= 1e-10 * h_norm.max(1.0)
            && translation_spread <= 1e-10
            && time_spread <= 1e-8;
        Ok(InvariantReport {
            dim: self.space().dim(),
            beta: self.beta,
            hamiltonian_norm: h_norm,
            hermiticity_defect: hermiticity,
            trace_re: trace.re,
            trace_im: trace.im,
            rho_hermiticity_defect: rho_hermiticity,
            min_weight,
            stationarity,
            translation_spread,
            time_spread,
            passed,
        })
    }
}

fn diagonal(w: &[f64]) -> CMat {
    let n = w.len();
    let mut m = ndarray::Array2::<f64>::zeros((n, n));
    for (i, &x) in w.iter().enumerate() {
        m[[i, i]] = x;
    }
    CMat::from_real(m)
}

/// Outcome of [`GibbsEnsemble::check_invariants`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub dim: usize,
    pub beta: f64,
    pub hamiltonian_norm: f64,
    /// `max |H - H^†|`.
    pub hermiticity_defect: f64,
    pub trace_re: f64,
    pub trace_im: f64,
    pub rho_hermiticity_defect: f64,
    /// Smallest eigenvalue of the density matrix.
    pub min_weight: f64,
    /// Frobenius norm of `[rho, H]`.
    pub stationarity: f64,
    /// Largest change of a one-site expectation under translation.
    pub translation_spread: f64,
    /// Largest change of a one-site expectation under time evolution.
    pub time_spread: f64,
    pub passed: bool,
}

/// The ensemble seen through an ordered list of operands.
pub struct ChainMoments<'a> {
    ensemble: &'a GibbsEnsemble,
    operands: Vec<LocalOperator>,
}

impl ChainMoments<'_> {
    pub fn operands(&self) -> &[LocalOperator] {
        &self.operands
    }
}

impl MomentProvider for ChainMoments<'_> {
    fn arity(&self) -> usize {
        self.operands.len()
    }

    fn moment(&self, indices: &[usize]) -> Result<C64, CumulantError> {
        let ops: Vec<&LocalOperator> = indices
            .iter()
            .map(|&i| {
                self.operands.get(i).ok_or(CumulantError::IndexOutOfRange { index: i, arity: self.operands.len() })
            })
            .collect::<Result<_, _>>()?;
        self.ensemble.moment(&ops).map_err(|e| CumulantError::Provider(e.to_string()))
    }
}
