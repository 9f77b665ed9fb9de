//! Classical and free cumulants of an abstract moment functional.
//!
//! Operands are addressed by index; the engine only ever asks a
//! [`MomentProvider`] for moments of strictly increasing index tuples, which
//! keeps each block of a partition in the order of its operands.
//!
//! Each kind has two independent routes. The classical cumulant is either
//! the direct sum over P(k) weighted by the full-lattice Möbius function, or
//! the moment-cumulant relation solved recursively on the block holding the
//! first operand. The free cumulant is either the Möbius sum over NC(k), or
//! the same recursion restricted to non-crossing completions (the remainder
//! splits into runs that are partitioned independently).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{
    family, full_mask, mask_elements, mobius_full_classical, mobius_nc, runs_within, FamilyKind,
    Partition, PartitionError, MAX_ALL, MAX_NONCROSSING,
};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CumulantError {
    #[error("tuple of length {len} exceeds the cap {max} for {kind} cumulants")]
    TooLong { kind: CumulantKind, len: usize, max: usize },
    #[error("empty index tuple")]
    Empty,
    #[error("index tuple {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("operand index {index} out of range (arity {arity})")]
    IndexOutOfRange { index: usize, arity: usize },
    #[error("no moment available for operands {0:?}")]
    MissingMoment(Vec<usize>),
    #[error("cumulant table has no entry for operands {0:?}")]
    MissingEntry(Vec<usize>),
    #[error("table holds {found} cumulants, expected {expected}")]
    KindMismatch { expected: CumulantKind, found: CumulantKind },
    #[error("partition of {partition} elements does not match a tuple of length {len}")]
    PartitionLength { partition: usize, len: usize },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("moment provider failed: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CumulantKind {
    Classical,
    Free,
}

impl CumulantKind {
    pub fn family_kind(self) -> FamilyKind {
        match self {
            CumulantKind::Classical => FamilyKind::All,
            CumulantKind::Free => FamilyKind::NonCrossing,
        }
    }

    pub fn max_len(self) -> usize {
        match self {
            CumulantKind::Classical => MAX_ALL,
            CumulantKind::Free => MAX_NONCROSSING,
        }
    }
}

impl fmt::Display for CumulantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CumulantKind::Classical => "classical",
            CumulantKind::Free => "free",
        })
    }
}

impl std::str::FromStr for CumulantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(CumulantKind::Classical),
            "free" => Ok(CumulantKind::Free),
            other => Err(format!("unknown cumulant kind {other:?} (expected classical|free)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassicalPath {
    /// Sum over every partition with weight `(-1)^(|pi|-1) (|pi|-1)!`.
    Direct,
    #[default]
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FreePath {
    /// Sum over NC(k) weighted by the NC Möbius function against `1_k`.
    Mobius,
    #[default]
    Recursive,
}

/// A state evaluated on ordered products of indexed operands.
pub trait MomentProvider: Sync {
    /// Number of addressable operands; valid indices are `0..arity()`.
    fn arity(&self) -> usize;

    /// `omega(A_{i_1} ... A_{i_k})` for strictly increasing `indices`.
    fn moment(&self, indices: &[usize]) -> Result<C64, CumulantError>;
}

impl<P: MomentProvider + ?Sized> MomentProvider for &P {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn moment(&self, indices: &[usize]) -> Result<C64, CumulantError> {
        (**self).moment(indices)
    }
}

/// Moments stored explicitly, keyed by 0-based index tuples.
#[derive(Debug, Clone, Default)]
pub struct TableMoments {
    arity: usize,
    values: HashMap<Vec<usize>, C64>,
}

impl TableMoments {
    pub fn new(arity: usize) -> Self {
        TableMoments { arity, values: HashMap::new() }
    }

    pub fn insert(&mut self, indices: Vec<usize>, value: C64) {
        if let Some(&m) = indices.iter().max() {
            self.arity = self.arity.max(m + 1);
        }
        self.values.insert(indices, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &C64)> {
        self.values.iter()
    }
}

impl MomentProvider for TableMoments {
    fn arity(&self) -> usize {
        self.arity
    }

    fn moment(&self, indices: &[usize]) -> Result<C64, CumulantError> {
        self.values
            .get(indices)
            .copied()
            .ok_or_else(|| CumulantError::MissingMoment(indices.to_vec()))
    }
}

/// Memoizing wrapper; safe to share between threads.
pub struct CachedMoments<P> {
    inner: P,
    cache: Mutex<HashMap<Vec<usize>, C64>>,
}

impl<P: MomentProvider> CachedMoments<P> {
    pub fn new(inner: P) -> Self {
        CachedMoments { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: MomentProvider> MomentProvider for CachedMoments<P> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn moment(&self, indices: &[usize]) -> Result<C64, CumulantError> {
        if let Some(v) = self.cache.lock().expect("moment cache poisoned").get(indices) {
            return Ok(*v);
        }
        let v = self.inner.moment(indices)?;
        self.cache.lock().expect("moment cache poisoned").insert(indices.to_vec(), v);
        Ok(v)
    }
}

/// Checks a user tuple against the provider and the enumeration cap.
fn validate(
    provider: &(impl MomentProvider + ?Sized),
    indices: &[usize],
    kind: CumulantKind,
) -> Result<(), CumulantError> {
    if indices.is_empty() {
        return Err(CumulantError::Empty);
    }
    if indices.len() > kind.max_len() {
        return Err(CumulantError::TooLong { kind, len: indices.len(), max: kind.max_len() });
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CumulantError::NotIncreasing(indices.to_vec()));
    }
    let arity = provider.arity();
    if let Some(&index) = indices.iter().find(|&&i| i >= arity) {
        return Err(CumulantError::IndexOutOfRange { index, arity });
    }
    Ok(())
}

/// Per-call evaluation state over subsets (bitmasks of tuple positions).
struct Evaluator<'a, P: ?Sized> {
    provider: &'a P,
    indices: &'a [usize],
    moments: Vec<Option<C64>>,
    cumulants: Vec<Option<C64>>,
}

impl<'a, P: MomentProvider + ?Sized> Evaluator<'a, P> {
    fn new(provider: &'a P, indices: &'a [usize]) -> Self {
        let size = 1usize << indices.len();
        Evaluator { provider, indices, moments: vec![None; size], cumulants: vec![None; size] }
    }

    fn operands(&self, mask: u16) -> Vec<usize> {
        mask_elements(mask).map(|p| self.indices[p]).collect()
    }

    fn moment(&mut self, mask: u16) -> Result<C64, CumulantError> {
        if let Some(v) = self.moments[mask as usize] {
            return Ok(v);
        }
        let v = self.provider.moment(&self.operands(mask))?;
        self.moments[mask as usize] = Some(v);
        Ok(v)
    }

    /// Product of block moments of a partition of the positions in `0..k`.
    fn moment_product(&mut self, blocks: &[u16]) -> Result<C64, CumulantError> {
        let mut acc = C64::new(1.0, 0.0);
        for &b in blocks {
            acc *= self.moment(b)?;
        }
        Ok(acc)
    }

    /// `c(S) = omega(S) - sum_{V ∋ min S, V != S} c(V) omega(S \ V)`.
    fn classical(&mut self, set: u16) -> Result<C64, CumulantError> {
        if let Some(v) = self.cumulants[set as usize] {
            return Ok(v);
        }
        let first = set & set.wrapping_neg();
        let rest = set ^ first;
        let mut value = self.moment(set)?;
        // proper submasks of `rest` give the blocks V != S holding min S
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            let block = first | sub;
            let c = self.classical(block)?;
            value -= c * self.moment(set & !block)?;
        }
        self.cumulants[set as usize] = Some(value);
        Ok(value)
    }

    /// Same recursion, but the complement of the first block must split into
    /// runs of `set` that are partitioned independently.
    fn free(&mut self, set: u16) -> Result<C64, CumulantError> {
        if let Some(v) = self.cumulants[set as usize] {
            return Ok(v);
        }
        let first = set & set.wrapping_neg();
        let rest = set ^ first;
        let mut value = self.moment(set)?;
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            let block = first | sub;
            let mut term = self.free(block)?;
            for run in runs_within(set, set & !block) {
                term *= self.moment(run)?;
            }
            value -= term;
        }
        self.cumulants[set as usize] = Some(value);
        Ok(value)
    }
}

/// Classical (joint) cumulant `c_k(A_{i_1}, ..., A_{i_k})`.
pub fn classical_cumulant(
    provider: &(impl MomentProvider + ?Sized),
    indices: &[usize],
    path: ClassicalPath,
) -> Result<C64, CumulantError> {
    validate(provider, indices, CumulantKind::Classical)?;
    let k = indices.len();
    let mut eval = Evaluator::new(provider, indices);
    match path {
        ClassicalPath::Recursive => eval.classical(full_mask(k)),
        ClassicalPath::Direct => {
            let mut total = C64::new(0.0, 0.0);
            for pi in family(FamilyKind::All, k)?.iter() {
                let weight = mobius_full_classical(pi) as f64;
                total += eval.moment_product(pi.masks())? * weight;
            }
            Ok(total)
        }
    }
}

/// Free cumulant `kappa_k(A_{i_1}, ..., A_{i_k})`.
pub fn free_cumulant(
    provider: &(impl MomentProvider + ?Sized),
    indices: &[usize],
    path: FreePath,
) -> Result<C64, CumulantError> {
    validate(provider, indices, CumulantKind::Free)?;
    let k = indices.len();
    let mut eval = Evaluator::new(provider, indices);
    match path {
        FreePath::Recursive => eval.free(full_mask(k)),
        FreePath::Mobius => {
            let top = Partition::one_block(k)?;
            let mut total = C64::new(0.0, 0.0);
            for sigma in family(FamilyKind::NonCrossing, k)?.iter() {
                let weight = mobius_nc(sigma, &top)? as f64;
                total += eval.moment_product(sigma.masks())? * weight;
            }
            Ok(total)
        }
    }
}

/// Cumulant of either kind along its default (recursive) route.
pub fn cumulant(
    kind: CumulantKind,
    provider: &(impl MomentProvider + ?Sized),
    indices: &[usize],
) -> Result<C64, CumulantError> {
    match kind {
        CumulantKind::Classical => classical_cumulant(provider, indices, ClassicalPath::Recursive),
        CumulantKind::Free => free_cumulant(provider, indices, FreePath::Recursive),
    }
}

/// `c_pi` / `kappa_pi`: product of block cumulants, each block keeping the
/// order of its operands.
pub fn multiplicative_extension(
    kind: CumulantKind,
    provider: &(impl MomentProvider + ?Sized),
    partition: &Partition,
    indices: &[usize],
) -> Result<C64, CumulantError> {
    if partition.n() != indices.len() {
        return Err(CumulantError::PartitionLength { partition: partition.n(), len: indices.len() });
    }
    if kind == CumulantKind::Free && !partition.is_noncrossing() {
        return Err(PartitionError::Crossing(partition.clone()).into());
    }
    validate(provider, indices, kind)?;
    let mut acc = C64::new(1.0, 0.0);
    for block in partition.block_positions() {
        let operands: Vec<usize> = block.iter().map(|&p| indices[p]).collect();
        acc *= cumulant(kind, provider, &operands)?;
    }
    Ok(acc)
}

/// Cumulants of one kind for a set of index tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantTable {
    kind: CumulantKind,
    values: BTreeMap<Vec<usize>, C64>,
}

impl CumulantTable {
    pub fn new(kind: CumulantKind) -> Self {
        CumulantTable { kind, values: BTreeMap::new() }
    }

    /// Every strictly increasing tuple over `0..arity` up to length `max_len`.
    pub fn from_provider(
        provider: &(impl MomentProvider + ?Sized),
        kind: CumulantKind,
        max_len: usize,
    ) -> Result<Self, CumulantError> {
        let cached = CachedMoments::new(provider);
        let mut table = CumulantTable::new(kind);
        for tuple in increasing_tuples(provider.arity(), max_len) {
            let value = cumulant(kind, &cached, &tuple)?;
            table.values.insert(tuple, value);
        }
        Ok(table)
    }

    pub fn kind(&self) -> CumulantKind {
        self.kind
    }

    pub fn get(&self, indices: &[usize]) -> Option<C64> {
        self.values.get(indices).copied()
    }

    pub fn insert(&mut self, indices: Vec<usize>, value: C64) {
        self.values.insert(indices, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &C64)> {
        self.values.iter()
    }
}

/// Inverse transform: `omega(S) = sum_pi prod_{V in pi} table[S|V]` over P(k)
/// for classical tables and NC(k) for free ones.
pub fn cumulants_to_moments(table: &CumulantTable, indices: &[usize]) -> Result<C64, CumulantError> {
    let kind = table.kind;
    if indices.is_empty() {
        return Err(CumulantError::Empty);
    }
    if indices.len() > kind.max_len() {
        return Err(CumulantError::TooLong { kind, len: indices.len(), max: kind.max_len() });
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CumulantError::NotIncreasing(indices.to_vec()));
    }
    let mut total = C64::new(0.0, 0.0);
    for pi in family(kind.family_kind(), indices.len())?.iter() {
        let mut term = C64::new(1.0, 0.0);
        for block in pi.block_positions() {
            let operands: Vec<usize> = block.iter().map(|&p| indices[p]).collect();
            term *= table.get(&operands).ok_or(CumulantError::MissingEntry(operands))?;
        }
        total += term;
    }
    Ok(total)
}

/// All strictly increasing tuples over `0..arity` of length `1..=max_len`,
/// shorter tuples first, lexicographic within a length.
pub fn increasing_tuples(arity: usize, max_len: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, arity: usize, len: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == len {
            out.push(acc.clone());
            return;
        }
        for i in start..arity {
            acc.push(i);
            extend(i + 1, arity, len, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    for len in 1..=max_len.min(arity) {
        extend(0, arity, len, &mut Vec::new(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::close;

    /// One variable seen through `k` indices: omega of any tuple of length
    /// `j` is the j-th moment.
    fn single_variable(moments: &[f64]) -> TableMoments {
        let k = moments.len();
        let mut t = TableMoments::new(k);
        for tuple in increasing_tuples(k, k) {
            t.insert(tuple.clone(), C64::new(moments[tuple.len() - 1], 0.0));
        }
        t
    }

    /// Factorizing state: each index carries its own scalar mean.
    fn product_state(means: &[C64]) -> TableMoments {
        let mut t = TableMoments::new(means.len());
        for tuple in increasing_tuples(means.len(), means.len()) {
            t.insert(tuple.clone(), tuple.iter().map(|&i| means[i]).product());
        }
        t
    }

    #[test]
    fn second_cumulant_is_covariance() {
        let mut t = TableMoments::new(2);
        t.insert(vec![0], C64::new(0.3, 0.1));
        t.insert(vec![1], C64::new(-0.5, 0.2));
        t.insert(vec![0, 1], C64::new(0.7, -0.4));
        let expect = C64::new(0.7, -0.4) - C64::new(0.3, 0.1) * C64::new(-0.5, 0.2);
        for path in [ClassicalPath::Direct, ClassicalPath::Recursive] {
            assert!(close(classical_cumulant(&t, &[0, 1], path).unwrap(), expect, 1e-14));
        }
        for path in [FreePath::Mobius, FreePath::Recursive] {
            assert!(close(free_cumulant(&t, &[0, 1], path).unwrap(), expect, 1e-14));
        }
    }

    #[test]
    fn first_cumulants_are_means() {
        let t = product_state(&[C64::new(0.25, -1.0)]);
        assert_eq!(cumulant(CumulantKind::Classical, &t, &[0]).unwrap(), C64::new(0.25, -1.0));
        assert_eq!(cumulant(CumulantKind::Free, &t, &[0]).unwrap(), C64::new(0.25, -1.0));
    }

    #[test]
    fn product_state_kills_higher_classical_cumulants() {
        let means: Vec<C64> = (0..5).map(|i| C64::new(0.3 + 0.1 * i as f64, -0.2 * i as f64)).collect();
        let t = product_state(&means);
        for k in 2..=5 {
            let idx: Vec<usize> = (0..k).collect();
            for path in [ClassicalPath::Direct, ClassicalPath::Recursive] {
                let c = classical_cumulant(&t, &idx, path).unwrap();
                assert!(c.norm() < 1e-12, "k={k} c={c}");
            }
        }
    }

    // m = (0, 1, 0, 2). Expanding over the 15 partitions of {1,2,3,4}: only
    // partitions without singletons survive, i.e. 1_4 (weight 1, moment 2)
    // and the three pairings (weight -1, moment 1 each): c_4 = 2 - 3 = -1.
    // NC(4) drops the crossing pairing and the NC Möbius weight of a
    // pairing against 1_4 is -1, so kappa_4 = 2 - 2 = 0.
    #[test]
    fn fourth_cumulants_split_between_kinds() {
        let t = single_variable(&[0.0, 1.0, 0.0, 2.0]);
        let idx = [0, 1, 2, 3];
        for path in [ClassicalPath::Direct, ClassicalPath::Recursive] {
            assert!(close(classical_cumulant(&t, &idx, path).unwrap(), C64::new(-1.0, 0.0), 1e-14));
        }
        for path in [FreePath::Mobius, FreePath::Recursive] {
            assert!(close(free_cumulant(&t, &idx, path).unwrap(), C64::new(0.0, 0.0), 1e-14));
        }
    }

    #[test]
    fn deterministic_variable_has_no_fluctuation() {
        let t = single_variable(&[1.0, 1.0, 1.0]);
        assert_eq!(free_cumulant(&t, &[0], FreePath::Recursive).unwrap(), C64::new(1.0, 0.0));
        assert!(free_cumulant(&t, &[0, 1], FreePath::Recursive).unwrap().norm() < 1e-15);
        assert!(free_cumulant(&t, &[0, 1, 2], FreePath::Mobius).unwrap().norm() < 1e-15);
    }

    #[test]
    fn multiplicative_extension_cases() {
        let t = single_variable(&[0.0, 1.0, 0.0, 2.0]);
        let idx = [0, 1, 2, 3];
        let pairs: Partition = "{1,2}{3,4}".parse().unwrap();
        for kind in [CumulantKind::Classical, CumulantKind::Free] {
            let v = multiplicative_extension(kind, &t, &pairs, &idx).unwrap();
            assert!(close(v, C64::new(1.0, 0.0), 1e-14));
        }
        let top = Partition::one_block(4).unwrap();
        let v = multiplicative_extension(CumulantKind::Classical, &t, &top, &idx).unwrap();
        assert!(close(v, C64::new(-1.0, 0.0), 1e-14));

        let means = [C64::new(0.5, 0.0), C64::new(2.0, 1.0), C64::new(-1.0, 0.5)];
        let prod = product_state(&means);
        let bottom = Partition::singletons(3).unwrap();
        let v = multiplicative_extension(CumulantKind::Free, &prod, &bottom, &[0, 1, 2]).unwrap();
        assert!(close(v, means.iter().product(), 1e-14));
    }

    #[test]
    fn crossing_partition_rejected_for_free_extension() {
        let t = single_variable(&[0.0, 1.0, 0.0, 2.0]);
        let crossing: Partition = "{1,3}{2,4}".parse().unwrap();
        let err = multiplicative_extension(CumulantKind::Free, &t, &crossing, &[0, 1, 2, 3]);
        assert!(matches!(err, Err(CumulantError::Partition(PartitionError::Crossing(_)))));
        assert!(multiplicative_extension(CumulantKind::Classical, &t, &crossing, &[0, 1, 2, 3]).is_ok());
    }

    #[test]
    fn semicircle_fourth_moment_counts_nc_pairings() {
        let mut table = CumulantTable::new(CumulantKind::Free);
        for tuple in increasing_tuples(4, 4) {
            let v = if tuple.len() == 2 { 1.0 } else { 0.0 };
            table.insert(tuple, C64::new(v, 0.0));
        }
        let m4 = cumulants_to_moments(&table, &[0, 1, 2, 3]).unwrap();
        assert!(close(m4, C64::new(2.0, 0.0), 1e-15));
        let mut classical = table.clone();
        classical.kind = CumulantKind::Classical;
        let m4 = cumulants_to_moments(&classical, &[0, 1, 2, 3]).unwrap();
        assert!(close(m4, C64::new(3.0, 0.0), 1e-15));
    }

    #[test]
    fn first_moment_back_from_table() {
        let mut table = CumulantTable::new(CumulantKind::Classical);
        table.insert(vec![0], C64::new(0.4, 0.9));
        assert_eq!(cumulants_to_moments(&table, &[0]).unwrap(), C64::new(0.4, 0.9));
    }

    #[test]
    fn incomplete_table_reports_missing_entry() {
        let mut table = CumulantTable::new(CumulantKind::Free);
        table.insert(vec![0], C64::new(1.0, 0.0));
        table.insert(vec![0, 1], C64::new(1.0, 0.0));
        assert_eq!(cumulants_to_moments(&table, &[0, 1]), Err(CumulantError::MissingEntry(vec![1])));
    }

    #[test]
    fn argument_validation() {
        let t = single_variable(&[0.0; 13]);
        let long: Vec<usize> = (0..13).collect();
        assert!(matches!(
            classical_cumulant(&t, &long, ClassicalPath::Recursive),
            Err(CumulantError::TooLong { len: 13, max: 12, .. })
        ));
        assert!(matches!(
            cumulant(CumulantKind::Free, &t, &[2, 1]),
            Err(CumulantError::NotIncreasing(_))
        ));
        assert!(matches!(
            cumulant(CumulantKind::Free, &t, &[0, 13]),
            Err(CumulantError::IndexOutOfRange { index: 13, arity: 13 })
        ));
        assert_eq!(cumulant(CumulantKind::Free, &t, &[]), Err(CumulantError::Empty));
        let sparse = TableMoments::new(2);
        assert!(matches!(cumulant(CumulantKind::Classical, &sparse, &[0, 1]), Err(CumulantError::MissingMoment(_))));
    }

    #[test]
    fn tuples_enumeration() {
        let t = increasing_tuples(3, 2);
        assert_eq!(t, vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(increasing_tuples(7, 7).len(), 127);
    }
}
