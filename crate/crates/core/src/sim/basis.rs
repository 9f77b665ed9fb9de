//! Eigenbasis of a Hamiltonian, shared by every operator evolved with it.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::cache::ByteLru;
use super::linalg::{eigh, CMat, CVecs};
use super::model::Hamiltonian;
use super::operator::{phases, LocalOperator, OpKey};
use super::space::Space;
use super::SimError;
use crate::C64;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub struct EigenBasis {
    id: u64,
    space: Space,
    energies: Vec<f64>,
    vectors: CMat,
    translation_invariant: bool,
    transforms: ByteLru<OpKey, CMat>,
}

impl std::fmt::Debug for EigenBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EigenBasis").field("id", &self.id).field("dim", &self.energies.len()).finish()
    }
}

impl EigenBasis {
    /// Diagonalizes `h`; `cache_bytes` bounds the memory kept for operators
    /// already rotated into the eigenbasis.
    pub fn new(h: &Hamiltonian, cache_bytes: usize) -> Result<Arc<Self>, SimError> {
        let (energies, vectors) = eigh(h.matrix(), true)?;
        Ok(Arc::new(EigenBasis {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            space: h.space().clone(),
            energies,
            vectors,
            translation_invariant: h.is_translation_invariant(),
            transforms: ByteLru::new(cache_bytes),
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// Ascending eigenvalues.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Unitary whose columns are the eigenvectors.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    /// `U^† A U` for an unevolved operator, cached.
    pub fn transform(&self, op: &LocalOperator) -> Result<Arc<CMat>, SimError> {
        let (sites, matrix) = op
            .local_parts()
            .ok_or_else(|| SimError::InvalidOperator("only unevolved operators can be rotated".into()))?;
        if op.space() != &self.space {
            return Err(SimError::DimensionMismatch { expected: self.space.dim(), found: op.space().dim() });
        }
        self.transforms.get_or_try_insert(op.key(), CMat::bytes, || {
            let au = if sites.len() == self.space.sites() {
                matrix.matmul(&self.vectors)
            } else {
                self.space.apply_local_rows(sites, matrix, &self.vectors)
            };
            Ok(self.vectors.adjoint_matmul(&au))
        })
    }

    /// Whether `U^† A U` is already cached for this operator.
    pub(crate) fn has_transform(&self, op: &LocalOperator) -> bool {
        self.transforms.get(op.key()).is_some()
    }

    pub fn phases(&self, t: f64) -> Vec<C64> {
        phases(&self.energies, t)
    }

    /// `A(t) = U e^{iEt} (U^† A U) e^{-iEt} U^†` as a full matrix.
    pub(crate) fn evolved_matrix(&self, local: &LocalOperator, t: f64) -> Result<CMat, SimError> {
        let rotated = self.transform(local)?.conjugate_phases(&self.phases(t));
        Ok(self.vectors.matmul(&rotated).matmul_adjoint(&self.vectors))
    }

    /// `A(t) v` without forming `A(t)`.
    pub(crate) fn apply_evolved(&self, local: &LocalOperator, t: f64, v: &CVecs) -> Result<CVecs, SimError> {
        let rotated = self.transform(local)?;
        let ph = self.phases(t);
        let conj: Vec<C64> = ph.iter().map(|z| z.conj()).collect();
        let mut w = self.vectors.adjoint_apply(v);
        w.scale_rows(&conj);
        let mut w = rotated.apply(&w);
        w.scale_rows(&ph);
        Ok(self.vectors.apply(&w))
    }
}
