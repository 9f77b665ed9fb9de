//! Observables on the chain.
//!
//! A [`LocalOperator`] is stored on its support only: a `d^k x d^k` matrix on
//! `k` sites. Heisenberg-evolved operators keep the local operator they came
//! from together with the time and the eigenbasis of the evolving
//! Hamiltonian, and are expanded to the full space only on demand.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::basis::EigenBasis;
use super::linalg::{lanczos_spectral_radius, CMat, CVecs};
use super::model::{canonical_order, pauli_string};
use super::space::Space;
use super::SimError;
use crate::C64;

/// Tolerance deciding whether a tensor factor acts as the identity.
const TRIVIAL_FACTOR_TOL: f64 = 1e-13;

/// Operators on at most this many sites are compared and normed densely.
const SMALL_SITES: usize = 10;

/// Identity of an operator for caching: sites plus exact matrix content.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum OpKey {
    Local { sites: Vec<usize>, content: Vec<u64> },
    Evolved { local: Box<OpKey>, time: u64, basis: u64 },
}

fn content_key(m: &CMat) -> Vec<u64> {
    let entries = m.re().len();
    let bits = m.re().iter().chain(m.im().into_iter().flat_map(|x| x.iter())).map(|v| v.to_bits());
    if entries <= 4096 {
        let mut out: Vec<u64> = bits.collect();
        out.push(m.is_real() as u64);
        out
    } else {
        let mut h = Sha256::new();
        for b in bits {
            h.update(b.to_le_bytes());
        }
        h.update([m.is_real() as u8]);
        let digest = h.finalize();
        let mut out: Vec<u64> =
            digest.chunks(8).map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        out.push(entries as u64);
        out
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Local { sites: Vec<usize>, matrix: Arc<CMat> },
    Evolved { local: Arc<LocalOperator>, time: f64, basis: Arc<EigenBasis> },
}

#[derive(Clone)]
pub struct LocalOperator {
    space: Space,
    kind: Kind,
    key: OpKey,
    norm: OnceLock<f64>,
}

impl fmt::Debug for LocalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Local { sites, matrix } => {
                f.debug_struct("LocalOperator").field("sites", sites).field("dim", &matrix.rows()).finish()
            }
            Kind::Evolved { local, time, .. } => {
                f.debug_struct("LocalOperator").field("evolved", local).field("time", time).finish()
            }
        }
    }
}

impl LocalOperator {
    /// Operator acting as `matrix` on `sites` (factors in the listed order).
    /// Sites on which it acts trivially are dropped from the support.
    pub fn new(space: &Space, sites: &[usize], matrix: CMat) -> Result<Self, SimError> {
        let d = space.local_dim();
        let expected = d.checked_pow(sites.len() as u32).unwrap_or(usize::MAX);
        if matrix.rows() != expected || matrix.cols() != expected {
            return Err(SimError::DimensionMismatch { expected, found: matrix.rows() });
        }
        if let Some(&s) = sites.iter().find(|&&s| s >= space.sites()) {
            return Err(SimError::InvalidOperator(format!("site {s} outside the chain of {} sites", space.sites())));
        }
        let mut uniq = sites.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != sites.len() {
            return Err(SimError::InvalidOperator(format!("repeated site in {sites:?}")));
        }
        if matrix.to_complex().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SimError::InvalidOperator("matrix has non-finite entries".into()));
        }
        let (sites, matrix) = canonical_order(sites, &matrix, d);
        let (sites, matrix) = trim_support(sites, matrix, d);
        Ok(Self::local_unchecked(space, sites, matrix))
    }

    fn local_unchecked(space: &Space, sites: Vec<usize>, matrix: CMat) -> Self {
        let key = OpKey::Local { sites: sites.clone(), content: content_key(&matrix) };
        LocalOperator { space: space.clone(), kind: Kind::Local { sites, matrix: Arc::new(matrix) }, key, norm: OnceLock::new() }
    }

    /// Pauli string whose first letter sits at `site` (wrapping around).
    pub fn pauli(space: &Space, ops: &str, site: i64) -> Result<Self, SimError> {
        if space.local_dim() != 2 {
            return Err(SimError::InvalidOperator("Pauli operators need d = 2".into()));
        }
        let n = ops.chars().count();
        if n > space.sites() {
            return Err(SimError::InvalidOperator(format!("{ops:?} is longer than the chain")));
        }
        let sites: Vec<usize> = (0..n as i64).map(|k| space.wrap(site + k)).collect();
        Self::new(space, &sites, pauli_string(ops)?)
    }

    /// Parses `LETTERS@SITE` (e.g. `Z@0`, `ZZ@-1`); the site defaults to 0.
    pub fn parse(space: &Space, spec: &str) -> Result<Self, SimError> {
        let ObservableSpec { ops, site } = spec.parse()?;
        Self::pauli(space, &ops, site)
    }

    pub fn identity(space: &Space) -> Self {
        Self::local_unchecked(space, Vec::new(), CMat::identity(1))
    }

    /// Dense operator on the whole chain.
    pub fn from_full(space: &Space, matrix: CMat) -> Result<Self, SimError> {
        if matrix.rows() != space.dim() || matrix.cols() != space.dim() {
            return Err(SimError::DimensionMismatch { expected: space.dim(), found: matrix.rows() });
        }
        Ok(Self::local_unchecked(space, (0..space.sites()).collect(), matrix))
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub(crate) fn key(&self) -> &OpKey {
        &self.key
    }

    pub fn is_local(&self) -> bool {
        matches!(self.kind, Kind::Local { .. })
    }

    /// Sites on which the operator acts non-trivially. Exactly evolved
    /// operators are treated as supported everywhere.
    pub fn support(&self) -> Vec<usize> {
        match &self.kind {
            Kind::Local { sites, .. } => sites.clone(),
            Kind::Evolved { .. } => (0..self.space.sites()).collect(),
        }
    }

    /// Support of the operator before any time evolution.
    pub fn origin_support(&self) -> Vec<usize> {
        match &self.kind {
            Kind::Local { sites, .. } => sites.clone(),
            Kind::Evolved { local, .. } => local.origin_support(),
        }
    }

    /// Evolution time (0 for unevolved operators).
    pub fn time(&self) -> f64 {
        match &self.kind {
            Kind::Local { .. } => 0.0,
            Kind::Evolved { time, .. } => *time,
        }
    }

    /// The local matrix and its sites, for unevolved operators.
    pub fn local_parts(&self) -> Option<(&[usize], &CMat)> {
        match &self.kind {
            Kind::Local { sites, matrix } => Some((sites, matrix)),
            Kind::Evolved { .. } => None,
        }
    }

    pub(crate) fn evolved_parts(&self) -> Option<(&LocalOperator, f64, &Arc<EigenBasis>)> {
        match &self.kind {
            Kind::Local { .. } => None,
            Kind::Evolved { local, time, basis } => Some((local, *time, basis)),
        }
    }

    /// Operator norm (largest singular value), computed once.
    pub fn norm(&self) -> Result<f64, SimError> {
        if let Some(&n) = self.norm.get() {
            return Ok(n);
        }
        let n = match &self.kind {
            Kind::Local { matrix, .. } => matrix.spectral_norm()?,
            Kind::Evolved { local, .. } => local.norm()?,
        };
        Ok(*self.norm.get_or_init(|| n))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        match &self.kind {
            Kind::Local { matrix, .. } => matrix.hermiticity_defect() <= tol,
            Kind::Evolved { local, .. } => local.is_hermitian(tol),
        }
    }

    /// Shift by `x` sites along the ring.
    pub fn translate(&self, x: i64) -> Result<Self, SimError> {
        let shift = self.space.wrap(x);
        if shift == 0 {
            return Ok(self.clone());
        }
        match &self.kind {
            Kind::Local { sites, matrix } => {
                let moved: Vec<usize> = sites.iter().map(|&s| (s + shift) % self.space.sites()).collect();
                let (sites, matrix) = canonical_order(&moved, matrix, self.space.local_dim());
                let out = Self::local_unchecked(&self.space, sites, matrix);
                if let Some(&n) = self.norm.get() {
                    let _ = out.norm.set(n);
                }
                Ok(out)
            }
            Kind::Evolved { local, time, basis } if basis.is_translation_invariant() => {
                Ok(Self::evolved(Arc::new(local.translate(x)?), *time, Arc::clone(basis)))
            }
            Kind::Evolved { .. } => {
                // evolution does not commute with the shift here: go dense
                let dense = self.materialize()?;
                let map = self.space.translation_map(x);
                Self::from_full(&self.space, self.space.permute_full(&dense, &map))
            }
        }
    }

    fn evolved(local: Arc<LocalOperator>, time: f64, basis: Arc<EigenBasis>) -> Self {
        let key = OpKey::Evolved { local: Box::new(local.key.clone()), time: time.to_bits(), basis: basis.id() };
        let norm = OnceLock::new();
        if let Some(&n) = local.norm.get() {
            let _ = norm.set(n);
        }
        LocalOperator { space: local.space.clone(), kind: Kind::Evolved { local, time, basis }, key, norm }
    }

    /// `e^{iHt} A e^{-iHt}` with `H` diagonalized by `basis`.
    pub fn evolve(&self, t: f64, basis: &Arc<EigenBasis>) -> Result<Self, SimError> {
        if !t.is_finite() {
            return Err(SimError::InvalidOperator(format!("evolution time {t} is not finite")));
        }
        if basis.space() != &self.space {
            return Err(SimError::DimensionMismatch { expected: self.space.dim(), found: basis.space().dim() });
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        match &self.kind {
            Kind::Local { .. } => Ok(Self::evolved(Arc::new(self.clone()), t, Arc::clone(basis))),
            Kind::Evolved { local, time, basis: own } if own.id() == basis.id() => {
                let total = time + t;
                if total == 0.0 {
                    Ok((**local).clone())
                } else {
                    Ok(Self::evolved(Arc::clone(local), total, Arc::clone(basis)))
                }
            }
            Kind::Evolved { .. } => {
                let dense = Self::from_full(&self.space, self.materialize()?)?;
                Ok(Self::evolved(Arc::new(dense), t, Arc::clone(basis)))
            }
        }
    }

    /// Full `d^L x d^L` matrix.
    pub fn materialize(&self) -> Result<CMat, SimError> {
        match &self.kind {
            Kind::Local { sites, matrix } => Ok(self.space.embed(sites, matrix)),
            Kind::Evolved { local, time, basis } => basis.evolved_matrix(local, *time),
        }
    }

    /// Action on a block of full-space vectors.
    pub fn apply(&self, v: &CVecs) -> Result<CVecs, SimError> {
        if v.rows() != self.space.dim() {
            return Err(SimError::DimensionMismatch { expected: self.space.dim(), found: v.rows() });
        }
        match &self.kind {
            Kind::Local { sites, matrix } => Ok(self.space.apply_local_vecs(sites, matrix, v)),
            Kind::Evolved { local, time, basis } => basis.apply_evolved(local, *time, v),
        }
    }

    /// Conditional expectation onto the sites within distance `nu` of the
    /// original support: normalized partial trace over the rest, tensored
    /// with the identity there.
    pub fn localize(&self, nu: usize) -> Result<Self, SimError> {
        let space = &self.space;
        let origin = self.origin_support();
        let mut region: Vec<usize> = (0..space.sites())
            .filter(|&s| origin.iter().any(|&o| space.site_distance(s, o) <= nu))
            .collect();
        region.sort_unstable();
        if self.is_local() && origin.iter().all(|s| region.contains(s)) {
            return Ok(self.clone());
        }
        let dense = self.materialize()?;
        if region.len() == space.sites() {
            return Self::from_full(space, dense);
        }
        let traced_out = space.sites() - region.len();
        let mut reduced = space.partial_trace(&dense, &region);
        reduced.scale(1.0 / (space.local_dim() as f64).powi(traced_out as i32));
        Self::new(space, &region, reduced)
    }

    /// Dense matrix of this operator on `sites`, a superset of its support.
    pub(crate) fn lift(&self, sites: &[usize]) -> Result<CMat, SimError> {
        let (own, matrix) = self
            .local_parts()
            .ok_or_else(|| SimError::InvalidOperator("cannot lift an evolved operator".into()))?;
        let positions: Vec<usize> = own
            .iter()
            .map(|s| sites.iter().position(|t| t == s))
            .collect::<Option<_>>()
            .ok_or_else(|| SimError::InvalidOperator(format!("support {own:?} not inside {sites:?}")))?;
        let sub = Space::subsystem(sites.len(), self.space.local_dim());
        Ok(sub.embed(&positions, matrix))
    }
}

impl PartialEq for LocalOperator {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.key == other.key
    }
}

/// Drops tensor factors that act as the identity.
fn trim_support(sites: Vec<usize>, matrix: CMat, d: usize) -> (Vec<usize>, CMat) {
    let mut sites = sites;
    let mut matrix = matrix;
    let mut pos = 0;
    while pos < sites.len() {
        let k = sites.len();
        let sub = Space::subsystem(k, d);
        let keep: Vec<usize> = (0..k).filter(|&p| p != pos).collect();
        let mut reduced = sub.partial_trace(&matrix, &keep);
        reduced.scale(1.0 / d as f64);
        let rebuilt = sub.embed(&keep, &reduced);
        let scale = matrix.max_abs().max(1.0);
        if rebuilt.max_abs_diff(&matrix) <= TRIVIAL_FACTOR_TOL * scale {
            sites.remove(pos);
            matrix = reduced;
        } else {
            pos += 1;
        }
    }
    (sites, matrix)
}

/// A parsed observable specification `LETTERS@SITE`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservableSpec {
    pub ops: String,
    pub site: i64,
}

impl FromStr for ObservableSpec {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (ops, site) = match s.split_once('@') {
            Some((ops, site)) => {
                let site = site
                    .trim()
                    .parse::<i64>()
                    .map_err(|_| SimError::InvalidOperator(format!("bad site in observable {s:?}")))?;
                (ops.trim(), site)
            }
            None => (s, 0),
        };
        if ops.is_empty() || !ops.chars().all(|c| "IXYZ".contains(c.to_ascii_uppercase())) {
            return Err(SimError::InvalidOperator(format!(
                "observable {s:?} must be Pauli letters (I, X, Y, Z) optionally followed by @site"
            )));
        }
        Ok(ObservableSpec { ops: ops.to_ascii_uppercase(), site })
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.ops, self.site)
    }
}

/// Largest singular value of `AB - BA`.
pub fn commutator_norm(a: &LocalOperator, b: &LocalOperator) -> Result<f64, SimError> {
    if a.space != b.space {
        return Err(SimError::DimensionMismatch { expected: a.space.dim(), found: b.space.dim() });
    }
    if let (Some((sa, ma)), Some((sb, mb))) = (a.local_parts(), b.local_parts()) {
        if sa.iter().all(|s| !sb.contains(s)) {
            return Ok(0.0);
        }
        let mut union: Vec<usize> = sa.iter().chain(sb).copied().collect();
        union.sort_unstable();
        union.dedup();
        if union.len() <= SMALL_SITES {
            let sub = Space::subsystem(union.len(), a.space.local_dim());
            let pos = |sites: &[usize]| -> Vec<usize> {
                sites.iter().map(|s| union.iter().position(|u| u == s).expect("in union")).collect()
            };
            let la = sub.embed(&pos(sa), ma);
            let lb = sub.embed(&pos(sb), mb);
            return la.matmul(&lb).sub(&lb.matmul(&la)).spectral_norm();
        }
    }
    commutator_norm_iterative(a, b)
}

/// Matrix-free route: Lanczos on `i[A, B]` (Hermitian inputs) or on
/// `[A, B]^† [A, B]`. When an operand is time-evolved the iteration runs in
/// the eigenbasis of its Hamiltonian, where evolution is a diagonal phase.
pub(crate) fn commutator_norm_iterative(a: &LocalOperator, b: &LocalOperator) -> Result<f64, SimError> {
    let floor = LANCZOS_FLOOR * a.norm()? * b.norm()?;
    let hermitian = a.is_hermitian(1e-12) && b.is_hermitian(1e-12);
    if hermitian {
        if let Some(basis) = shared_basis(a, b) {
            // rotating an unevolved operand costs as much as a few hundred
            // products, so it is only worth it when the rotation is cached
            let rotated = |o: &LocalOperator| o.evolved_parts().is_some() || basis.has_transform(o);
            if rotated(a) && rotated(b) {
                let fa = Framed::new(a, &basis)?;
                let fb = Framed::new(b, &basis)?;
                return hermitian_commutator_norm(a.space.dim(), floor, |v| Ok(fa.apply(v)), |v| Ok(fb.apply(v)));
            }
        }
        return hermitian_commutator_norm(a.space.dim(), floor, |v| a.apply(v), |v| b.apply(v));
    }
    let comm = |v: &CVecs| -> Result<CVecs, SimError> {
        let mut ab = a.apply(&b.apply(v)?)?;
        let ba = b.apply(&a.apply(v)?)?;
        ab.axpy(-1.0, &ba);
        Ok(ab)
    };
    let top = lanczos_spectral_radius(
        |v| {
            let c = comm(v)?;
            // (AB - BA)^† = B^† A^† - A^† B^†, applied through adjoints of the parts
            adjoint_commutator(a, b, &c)
        },
        lanczos_start(a.space.dim()),
        LANCZOS_MAX_ITER,
        LANCZOS_TOL,
        floor * floor,
    )?;
    Ok(top.sqrt())
}

const LANCZOS_MAX_ITER: usize = 300;
const LANCZOS_TOL: f64 = 1e-8;
/// Absolute accuracy, relative to `|A| |B|`, below which a norm is resolved.
const LANCZOS_FLOOR: f64 = 1e-12;

/// Spectral radius of the Hermitian operator `i[A, B]`.
fn hermitian_commutator_norm(
    dim: usize,
    floor: f64,
    apply_a: impl Fn(&CVecs) -> Result<CVecs, SimError>,
    apply_b: impl Fn(&CVecs) -> Result<CVecs, SimError>,
) -> Result<f64, SimError> {
    lanczos_spectral_radius(
        |v| {
            let mut c = apply_a(&apply_b(v)?)?;
            c.axpy(-1.0, &apply_b(&apply_a(v)?)?);
            Ok(CVecs { re: -&c.im, im: c.re })
        },
        lanczos_start(dim),
        LANCZOS_MAX_ITER,
        LANCZOS_TOL,
        floor,
    )
}

/// The eigenbasis shared by the evolved operands, if any operand is evolved
/// and all evolved ones agree.
fn shared_basis(a: &LocalOperator, b: &LocalOperator) -> Option<Arc<EigenBasis>> {
    let bases: Vec<&Arc<EigenBasis>> = [a, b].iter().filter_map(|o| o.evolved_parts().map(|p| p.2)).collect();
    let first = *bases.first()?;
    bases.iter().all(|x| x.id() == first.id()).then(|| Arc::clone(first))
}

/// An operator written in an eigenbasis: `e^{iEt} (U^† A U) e^{-iEt}`.
struct Framed {
    rotated: Arc<CMat>,
    phases: Option<Vec<C64>>,
}

impl Framed {
    fn new(op: &LocalOperator, basis: &EigenBasis) -> Result<Self, SimError> {
        let (local, t) = match op.evolved_parts() {
            Some((local, t, _)) => (local, t),
            None => (op, 0.0),
        };
        let rotated = basis.transform(local)?;
        let phases = (t != 0.0).then(|| basis.phases(t));
        Ok(Framed { rotated, phases })
    }

    fn apply(&self, v: &CVecs) -> CVecs {
        match &self.phases {
            None => self.rotated.apply(v),
            Some(ph) => {
                let conj: Vec<C64> = ph.iter().map(|z| z.conj()).collect();
                let mut w = v.clone();
                w.scale_rows(&conj);
                let mut w = self.rotated.apply(&w);
                w.scale_rows(ph);
                w
            }
        }
    }
}

fn adjoint_commutator(a: &LocalOperator, b: &LocalOperator, v: &CVecs) -> Result<CVecs, SimError> {
    let ad = adjoint_of(a)?;
    let bd = adjoint_of(b)?;
    let mut x = bd.apply(&ad.apply(v)?)?;
    let y = ad.apply(&bd.apply(v)?)?;
    x.axpy(-1.0, &y);
    Ok(x)
}

fn adjoint_of(a: &LocalOperator) -> Result<LocalOperator, SimError> {
    match &a.kind {
        Kind::Local { sites, matrix } => Ok(LocalOperator::local_unchecked(&a.space, sites.clone(), matrix.adjoint())),
        Kind::Evolved { local, time, basis } => {
            Ok(LocalOperator::evolved(Arc::new(adjoint_of(local)?), *time, Arc::clone(basis)))
        }
    }
}

/// Fixed pseudo-random start vector so that results are reproducible.
fn lanczos_start(dim: usize) -> CVecs {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut v = CVecs::zeros(dim, 1);
    for i in 0..dim {
        v.re[[i, 0]] = rng.gen_range(-1.0..1.0);
        v.im[[i, 0]] = rng.gen_range(-1.0..1.0);
    }
    v
}

/// `e^{i E t}` for each energy.
pub(crate) fn phases(energies: &[f64], t: f64) -> Vec<C64> {
    energies.iter().map(|&e| C64::from_polar(1.0, e * t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::model::pauli;

    fn space(l: usize) -> Space {
        Space::new(l, 2).unwrap()
    }

    #[test]
    fn support_is_trimmed() {
        let s = space(5);
        let a = LocalOperator::parse(&s, "ZIX@1").unwrap();
        assert_eq!(a.support(), vec![1, 3]);
        let id = LocalOperator::parse(&s, "II@2").unwrap();
        assert!(id.support().is_empty());
        assert_eq!(id, LocalOperator::identity(&s));
        // a product written in reverse site order is the same operator
        let zx = pauli('Z').unwrap().kron(&pauli('X').unwrap());
        let xz = pauli('X').unwrap().kron(&pauli('Z').unwrap());
        assert_eq!(LocalOperator::new(&s, &[1, 3], zx).unwrap(), LocalOperator::new(&s, &[3, 1], xz).unwrap());
    }

    #[test]
    fn wrapping_strings_and_translation() {
        let s = space(4);
        let a = LocalOperator::parse(&s, "ZX@3").unwrap();
        assert_eq!(a.support(), vec![0, 3]);
        let b = LocalOperator::parse(&s, "ZX@-1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.translate(4).unwrap(), a);
        assert_eq!(a.translate(0).unwrap(), a);
        assert_eq!(a.translate(1).unwrap().translate(-1).unwrap(), a);
        assert_eq!(a.translate(1).unwrap(), LocalOperator::parse(&s, "ZX@0").unwrap());
        let dense = a.translate(2).unwrap().materialize().unwrap();
        let map = s.translation_map(2);
        assert!(dense.max_abs_diff(&s.permute_full(&a.materialize().unwrap(), &map)) < 1e-15);
    }

    #[test]
    fn observable_specs() {
        assert_eq!("zz@-2".parse::<ObservableSpec>().unwrap(), ObservableSpec { ops: "ZZ".into(), site: -2 });
        assert_eq!("X".parse::<ObservableSpec>().unwrap().site, 0);
        assert!("Q@1".parse::<ObservableSpec>().is_err());
        assert!("Z@x".parse::<ObservableSpec>().is_err());
    }

    #[test]
    fn commutator_norms_of_local_operators() {
        let s = space(4);
        let x = LocalOperator::parse(&s, "X@1").unwrap();
        let y = LocalOperator::parse(&s, "Y@1").unwrap();
        assert!((commutator_norm(&x, &y).unwrap() - 2.0).abs() < 1e-14);
        let z3 = LocalOperator::parse(&s, "Z@3").unwrap();
        assert_eq!(commutator_norm(&x, &z3).unwrap(), 0.0);
        let xx = LocalOperator::parse(&s, "XX@0").unwrap();
        let zz = LocalOperator::parse(&s, "ZZ@1").unwrap();
        // X0 X1 and Z1 Z2 anticommute: [A, B] = 2AB, a unitary times 2
        assert!((commutator_norm(&xx, &zz).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn iterative_route_agrees_with_dense() {
        let s = space(6);
        let cases = [("XZ@0", "Y@1"), ("ZZ@2", "X@3"), ("XY@4", "YY@5")];
        for (sa, sb) in cases {
            let a = LocalOperator::parse(&s, sa).unwrap();
            let b = LocalOperator::parse(&s, sb).unwrap();
            let exact = commutator_norm(&a, &b).unwrap();
            let iterative = commutator_norm_iterative(&a, &b).unwrap();
            assert!((exact - iterative).abs() < 1e-10, "{sa},{sb}: {exact} vs {iterative}");
        }
        // a non-Hermitian pair goes through the Gram operator
        let raise = CMat::from_real(ndarray::arr2(&[[0.0, 1.0], [0.0, 0.0]]));
        let a = LocalOperator::new(&s, &[2], raise).unwrap();
        let b = LocalOperator::parse(&s, "Z@2").unwrap();
        let exact = commutator_norm(&a, &b).unwrap();
        assert!((exact - 2.0).abs() < 1e-14);
        assert!((commutator_norm_iterative(&a, &b).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn norms_cached_and_correct() {
        let s = space(3);
        let a = LocalOperator::new(&s, &[0], CMat::from_real(ndarray::arr2(&[[2.0, 0.0], [0.0, -0.5]]))).unwrap();
        assert!((a.norm().unwrap() - 2.0).abs() < 1e-15);
        assert!(a.is_hermitian(0.0));
        let shifted = a.translate(1).unwrap();
        assert!((shifted.norm().unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn localize_is_exact_for_local_operators() {
        let s = space(5);
        let a = LocalOperator::parse(&s, "ZX@1").unwrap();
        for nu in 0..3 {
            assert_eq!(a.localize(nu).unwrap(), a);
        }
        // a full-space matrix is treated as supported everywhere
        let full = LocalOperator::from_full(&s, LocalOperator::parse(&s, "ZXZ@0").unwrap().materialize().unwrap()).unwrap();
        let loc = full.localize(1).unwrap();
        assert_eq!(loc.support().len(), 5);
        assert!(loc.materialize().unwrap().max_abs_diff(&full.materialize().unwrap()) < 1e-15);
    }

    #[test]
    fn construction_errors() {
        let s = space(3);
        assert!(LocalOperator::new(&s, &[0, 0], CMat::identity(4)).is_err());
        assert!(LocalOperator::new(&s, &[5], CMat::identity(2)).is_err());
        assert!(matches!(
            LocalOperator::new(&s, &[0, 1], CMat::identity(2)),
            Err(SimError::DimensionMismatch { .. })
        ));
    }
}
