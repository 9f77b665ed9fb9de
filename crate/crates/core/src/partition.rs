//! Set partitions of `{1..n}` and the non-crossing sublattice.
//!
//! A [`Partition`] stores each block as a bitmask over the ground set (bit
//! `i` stands for element `i + 1`). Blocks are kept sorted by least element,
//! so two partitions are equal exactly when their canonical forms are equal.
//!
//! Both enumerators recurse on the block that contains the smallest element.
//! For all partitions the rest of the ground set is partitioned freely; for
//! non-crossing partitions the rest splits into maximal runs of consecutive
//! elements, and each run is partitioned independently.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest ground set accepted by [`enumerate_partitions`] (Bell(12) = 4 213 597).
pub const MAX_ALL: usize = 12;
/// Largest ground set accepted by [`enumerate_noncrossing`].
pub const MAX_NONCROSSING: usize = 14;

/// Below this size the enumeration is not worth spreading over threads.
const PARALLEL_THRESHOLD: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("ground-set size {n} outside the supported range 1..={max}")]
    Size { n: usize, max: usize },
    #[error("invalid partition: {0}")]
    Invalid(String),
    #[error("ground-set sizes differ ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("{0} is not a refinement of {1}")]
    NotComparable(Partition, Partition),
    #[error("partition {0} is crossing")]
    Crossing(Partition),
}

/// A partition of `{1..n}` in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    blocks: Vec<u16>,
}

impl Partition {
    /// Builds a partition from 1-based blocks, in any order.
    pub fn new(n: usize, blocks: &[Vec<usize>]) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_NONCROSSING {
            return Err(PartitionError::Size { n, max: MAX_NONCROSSING });
        }
        let mut masks = Vec::with_capacity(blocks.len());
        for block in blocks {
            if block.is_empty() {
                return Err(PartitionError::Invalid("empty block".into()));
            }
            let mut mask = 0u16;
            for &e in block {
                if e == 0 || e > n {
                    return Err(PartitionError::Invalid(format!("element {e} outside 1..={n}")));
                }
                let bit = 1u16 << (e - 1);
                if mask & bit != 0 {
                    return Err(PartitionError::Invalid(format!("element {e} repeated in a block")));
                }
                mask |= bit;
            }
            masks.push(mask);
        }
        Self::from_masks(n, masks)
    }

    /// Builds a partition from block bitmasks, validating disjointness and cover.
    pub fn from_masks(n: usize, mut masks: Vec<u16>) -> Result<Self, PartitionError> {
        if n == 0 || n > MAX_NONCROSSING {
            return Err(PartitionError::Size { n, max: MAX_NONCROSSING });
        }
        let full = full_mask(n);
        let mut seen = 0u16;
        for &m in &masks {
            if m == 0 {
                return Err(PartitionError::Invalid("empty block".into()));
            }
            if m & !full != 0 {
                return Err(PartitionError::Invalid(format!("block outside 1..={n}")));
            }
            if seen & m != 0 {
                return Err(PartitionError::Invalid("blocks overlap".into()));
            }
            seen |= m;
        }
        if seen != full {
            return Err(PartitionError::Invalid(format!("blocks do not cover 1..={n}")));
        }
        masks.sort_by_key(|m| m.trailing_zeros());
        Ok(Partition { n, blocks: masks })
    }

    /// The partition into `n` singletons (the bottom element).
    pub fn singletons(n: usize) -> Result<Self, PartitionError> {
        Self::from_masks(n, (0..n).map(|i| 1u16 << i).collect())
    }

    /// The one-block partition `1_n` (the top element).
    pub fn one_block(n: usize) -> Result<Self, PartitionError> {
        Self::from_masks(n, vec![full_mask(n)])
    }

    /// Ground-set size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Blocks as bitmasks, ordered by least element.
    pub fn masks(&self) -> &[u16] {
        &self.blocks
    }

    /// Blocks as sorted 1-based element lists.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|&m| mask_elements(m).map(|i| i + 1).collect()).collect()
    }

    /// Blocks as sorted 0-based positions, the form the cumulant engine uses.
    pub fn block_positions(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.blocks.iter().map(|&m| mask_elements(m).collect())
    }

    /// True when every block of `self` sits inside a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        self.n == other.n
            && self.blocks.iter().all(|&b| other.blocks.iter().any(|&c| b & !c == 0))
    }

    /// No two blocks interleave as `a < b < c < d` with `a, c` in one block
    /// and `b, d` in the other.
    pub fn is_noncrossing(&self) -> bool {
        for (i, &a) in self.blocks.iter().enumerate() {
            for &b in &self.blocks[i + 1..] {
                if blocks_cross(a, b) {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            let items: Vec<String> = block.iter().map(|e| e.to_string()).collect();
            write!(f, "{{{}}}", items.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

impl FromStr for Partition {
    type Err = PartitionError;

    /// Parses the `{1,3}{2,4}` form; the ground set is `1..=max element`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut blocks = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let body = rest
                .strip_prefix('{')
                .ok_or_else(|| PartitionError::Invalid(format!("expected '{{' in {s:?}")))?;
            let end = body
                .find('}')
                .ok_or_else(|| PartitionError::Invalid(format!("unclosed block in {s:?}")))?;
            let block = body[..end]
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| PartitionError::Invalid(format!("bad element {t:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            blocks.push(block);
            rest = body[end + 1..].trim_start();
        }
        let n = blocks.iter().flatten().copied().max().unwrap_or(0);
        Partition::new(n, &blocks)
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    All,
    NonCrossing,
}

/// Every partition of `{1..n}` of a given kind, each exactly once.
#[derive(Debug, Clone)]
pub struct PartitionFamily {
    n: usize,
    kind: FamilyKind,
    members: Vec<Partition>,
}

impl PartitionFamily {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn members(&self) -> &[Partition] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Partition> {
        self.members.iter()
    }
}

impl<'a> IntoIterator for &'a PartitionFamily {
    type Item = &'a Partition;
    type IntoIter = std::slice::Iter<'a, Partition>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// All partitions of `{1..n}`, built by choosing the block that holds 1 and
/// partitioning what is left.
pub fn enumerate_partitions(n: usize) -> Result<PartitionFamily, PartitionError> {
    check_size(n, MAX_ALL)?;
    let full = full_mask(n);
    let first = 1u16;
    let rest = full & !first;
    let choices = subsets_desc(rest);
    let expand = |sub: &u16| {
        let mut out = Vec::new();
        let mut acc = vec![first | sub];
        all_partitions_of(rest & !sub, &mut acc, &mut out);
        out
    };
    let nested: Vec<Vec<Vec<u16>>> = if n >= PARALLEL_THRESHOLD {
        choices.par_iter().map(expand).collect()
    } else {
        choices.iter().map(expand).collect()
    };
    let members = nested
        .into_iter()
        .flatten()
        .map(|blocks| Partition { n, blocks })
        .collect();
    Ok(PartitionFamily { n, kind: FamilyKind::All, members })
}

/// All non-crossing partitions of `{1..n}`.
pub fn enumerate_noncrossing(n: usize) -> Result<PartitionFamily, PartitionError> {
    check_size(n, MAX_NONCROSSING)?;
    let mut out = Vec::new();
    let mut acc = Vec::new();
    noncrossing_of(&mut vec![full_mask(n)], &mut acc, &mut out);
    let members = out
        .into_iter()
        .map(|mut blocks| {
            blocks.sort_by_key(|m| m.trailing_zeros());
            Partition { n, blocks }
        })
        .collect();
    Ok(PartitionFamily { n, kind: FamilyKind::NonCrossing, members })
}

/// Shared, lazily built families. The cumulant engine asks for the same
/// small families over and over.
pub fn family(kind: FamilyKind, n: usize) -> Result<Arc<PartitionFamily>, PartitionError> {
    type Families = HashMap<(FamilyKind, usize), Arc<PartitionFamily>>;
    static CACHE: OnceLock<Mutex<Families>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().expect("family cache poisoned").get(&(kind, n)) {
        return Ok(f.clone());
    }
    let built = Arc::new(match kind {
        FamilyKind::All => enumerate_partitions(n)?,
        FamilyKind::NonCrossing => enumerate_noncrossing(n)?,
    });
    let mut guard = cache.lock().expect("family cache poisoned");
    Ok(guard.entry((kind, n)).or_insert(built).clone())
}

pub fn is_noncrossing(p: &Partition) -> bool {
    p.is_noncrossing()
}

/// Möbius function of the full partition lattice between `p` and `1_n`:
/// `(-1)^(|p|-1) (|p|-1)!`.
pub fn mobius_full_classical(p: &Partition) -> i64 {
    let k = p.len() as i64;
    let factorial: i64 = (1..k).product();
    if (k - 1) % 2 == 0 {
        factorial
    } else {
        -factorial
    }
}

/// Möbius function of NC(n) on the interval `[sigma, pi]`.
///
/// Computed by inverting the zeta function on the interval, so that
/// `sum_{sigma <= tau <= pi} mu(tau, pi) = [sigma == pi]` holds by
/// construction. Results are memoized on the canonical forms.
pub fn mobius_nc(sigma: &Partition, pi: &Partition) -> Result<i64, PartitionError> {
    if sigma.n != pi.n {
        return Err(PartitionError::SizeMismatch(sigma.n, pi.n));
    }
    for p in [sigma, pi] {
        if !p.is_noncrossing() {
            return Err(PartitionError::Crossing(p.clone()));
        }
    }
    if !sigma.refines(pi) {
        return Err(PartitionError::NotComparable(sigma.clone(), pi.clone()));
    }
    if sigma == pi {
        return Ok(1);
    }
    let members = family(FamilyKind::NonCrossing, pi.n)?;
    let interval: Vec<&Partition> =
        members.iter().filter(|t| sigma.refines(t) && t.refines(pi)).collect();
    Ok(mobius_nc_in(sigma, pi, &interval))
}

type MobiusMemo = Mutex<HashMap<(Partition, Partition), i64>>;

fn mobius_nc_in(sigma: &Partition, pi: &Partition, interval: &[&Partition]) -> i64 {
    static MEMO: OnceLock<MobiusMemo> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    if sigma == pi {
        return 1;
    }
    let key = (sigma.clone(), pi.clone());
    if let Some(&v) = memo.lock().expect("mobius memo poisoned").get(&key) {
        return v;
    }
    let above: i64 = interval
        .iter()
        .filter(|t| **t != sigma && sigma.refines(t))
        .map(|t| mobius_nc_in(t, pi, interval))
        .sum();
    let value = -above;
    memo.lock().expect("mobius memo poisoned").insert(key, value);
    value
}

pub(crate) fn full_mask(n: usize) -> u16 {
    if n >= 16 {
        u16::MAX
    } else {
        ((1u32 << n) - 1) as u16
    }
}

/// 0-based positions of the set bits, in increasing order.
pub(crate) fn mask_elements(mask: u16) -> impl Iterator<Item = usize> {
    (0..16).filter(move |i| mask & (1 << i) != 0)
}

/// Maximal runs of `rest` that are consecutive inside the ordered set `within`.
pub(crate) fn runs_within(within: u16, rest: u16) -> Vec<u16> {
    let mut runs = Vec::new();
    let mut current = 0u16;
    for i in mask_elements(within) {
        let bit = 1u16 << i;
        if rest & bit != 0 {
            current |= bit;
        } else if current != 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current != 0 {
        runs.push(current);
    }
    runs
}

fn check_size(n: usize, max: usize) -> Result<(), PartitionError> {
    if n == 0 || n > max {
        Err(PartitionError::Size { n, max })
    } else {
        Ok(())
    }
}

/// All submasks of `set`, from `set` itself down to 0.
fn subsets_desc(set: u16) -> Vec<u16> {
    let mut out = Vec::with_capacity(1 << set.count_ones());
    let mut sub = set;
    loop {
        out.push(sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & set;
    }
    out
}

fn all_partitions_of(set: u16, acc: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if set == 0 {
        out.push(acc.clone());
        return;
    }
    let first = set & set.wrapping_neg();
    let rest = set ^ first;
    for sub in subsets_desc(rest) {
        acc.push(first | sub);
        all_partitions_of(rest & !sub, acc, out);
        acc.pop();
    }
}

fn noncrossing_of(pending: &mut Vec<u16>, acc: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    let Some(set) = pending.pop() else {
        out.push(acc.clone());
        return;
    };
    let first = set & set.wrapping_neg();
    let rest = set ^ first;
    for sub in subsets_desc(rest) {
        let block = first | sub;
        let runs = runs_within(set, set & !block);
        let depth = pending.len();
        pending.extend(runs.iter().rev());
        acc.push(block);
        noncrossing_of(pending, acc, out);
        acc.pop();
        pending.truncate(depth);
    }
    pending.push(set);
}

/// Two disjoint blocks cross when some element of `b` lies strictly inside a
/// gap between consecutive elements of `a` while another element of `b`
/// lies outside that gap.
fn blocks_cross(a: u16, b: u16) -> bool {
    let elems: Vec<usize> = mask_elements(a).collect();
    for w in elems.windows(2) {
        let gap = full_mask(w[1]) & !full_mask(w[0] + 1);
        let inside = b & gap;
        if inside != 0 && inside != b {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn p(s: &str) -> Partition {
        s.parse().unwrap()
    }

    /// Independent generator: restricted-growth strings a_1 = 0,
    /// a_{i+1} <= 1 + max(a_1..a_i).
    fn rgs_partitions(n: usize) -> Vec<Partition> {
        fn go(n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == n {
                out.push(prefix.clone());
                return;
            }
            let next = prefix.iter().copied().max().map_or(0, |m| m + 1);
            for label in 0..=next {
                prefix.push(label);
                go(n, prefix, out);
                prefix.pop();
            }
        }
        let mut strings = Vec::new();
        go(n, &mut vec![], &mut strings);
        strings
            .into_iter()
            .map(|s| {
                let k = s.iter().max().unwrap() + 1;
                let blocks: Vec<Vec<usize>> = (0..k)
                    .map(|b| (0..n).filter(|&i| s[i] == b).map(|i| i + 1).collect())
                    .collect();
                Partition::new(n, &blocks).unwrap()
            })
            .collect()
    }

    fn catalan(n: usize) -> usize {
        let mut c = vec![1usize];
        for k in 0..n {
            c.push((0..=k).map(|i| c[i] * c[k - i]).sum());
        }
        c[n]
    }

    #[test]
    fn display_round_trip() {
        let q = p("{2,4}{1,3}");
        assert_eq!(q.to_string(), "{1,3}{2,4}");
        assert_eq!(q, p("{1,3}{2,4}"));
        assert_eq!(q.n(), 4);
    }

    #[test]
    fn construction_rejects_bad_blocks() {
        assert!(Partition::new(3, &[vec![1, 2]]).is_err());
        assert!(Partition::new(3, &[vec![1, 2], vec![2, 3]]).is_err());
        assert!(Partition::new(3, &[vec![1, 4], vec![2, 3]]).is_err());
        assert!(Partition::new(0, &[]).is_err());
    }

    #[test]
    fn small_families() {
        let one = enumerate_partitions(1).unwrap();
        assert_eq!(one.members(), &[p("{1}")]);
        assert_eq!(enumerate_partitions(3).unwrap().len(), 5);
        assert_eq!(enumerate_partitions(4).unwrap().len(), 15);
        assert_eq!(enumerate_noncrossing(1).unwrap().len(), 1);
        assert_eq!(enumerate_noncrossing(4).unwrap().len(), 14);
    }

    #[test]
    fn size_errors() {
        assert!(matches!(enumerate_partitions(0), Err(PartitionError::Size { .. })));
        assert!(matches!(enumerate_partitions(13), Err(PartitionError::Size { .. })));
        assert!(matches!(enumerate_noncrossing(15), Err(PartitionError::Size { .. })));
    }

    #[test]
    fn bell_numbers_match_restricted_growth_oracle() {
        for n in 1..=10 {
            let fam = enumerate_partitions(n).unwrap();
            let oracle = rgs_partitions(n);
            assert_eq!(fam.len(), oracle.len(), "n = {n}");
            if n <= 7 {
                let a: HashSet<_> = fam.iter().cloned().collect();
                let b: HashSet<_> = oracle.into_iter().collect();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn catalan_counts_and_no_duplicates() {
        for n in 1..=12 {
            let fam = enumerate_noncrossing(n).unwrap();
            assert_eq!(fam.len(), catalan(n), "n = {n}");
            let unique: HashSet<_> = fam.iter().collect();
            assert_eq!(unique.len(), fam.len());
        }
    }

    #[test]
    fn noncrossing_is_the_filtered_full_family() {
        for n in 1..=8 {
            let nc: HashSet<_> = enumerate_noncrossing(n).unwrap().iter().cloned().collect();
            let filtered: HashSet<_> = enumerate_partitions(n)
                .unwrap()
                .iter()
                .filter(|q| q.is_noncrossing())
                .cloned()
                .collect();
            assert_eq!(nc, filtered, "n = {n}");
        }
    }

    #[test]
    fn families_coincide_up_to_three() {
        for n in 1..=3 {
            let all: HashSet<_> = enumerate_partitions(n).unwrap().iter().cloned().collect();
            let nc: HashSet<_> = enumerate_noncrossing(n).unwrap().iter().cloned().collect();
            assert_eq!(all, nc);
        }
    }

    #[test]
    fn nc4_misses_only_the_crossing_pairing() {
        let all: HashSet<_> = enumerate_partitions(4).unwrap().iter().cloned().collect();
        let nc: HashSet<_> = enumerate_noncrossing(4).unwrap().iter().cloned().collect();
        let missing: Vec<_> = all.difference(&nc).collect();
        assert_eq!(missing, vec![&p("{1,3}{2,4}")]);
    }

    #[test]
    fn crossing_decision() {
        assert!(!p("{1,3}{2,4}").is_noncrossing());
        assert!(p("{1,2}{3,4}").is_noncrossing());
        assert!(p("{1,4}{2,3}").is_noncrossing());
        assert!(!p("{1,3,5}{2,6}{4}").is_noncrossing());
        assert!(p("{1,5}{2,3,4}{6}").is_noncrossing());
        for n in 1..=14 {
            assert!(Partition::singletons(n).unwrap().is_noncrossing());
        }
    }

    #[test]
    fn classical_mobius_values() {
        assert_eq!(mobius_full_classical(&p("{1,2,3}")), 1);
        assert_eq!(mobius_full_classical(&p("{1}{2,3}")), -1);
        assert_eq!(mobius_full_classical(&p("{1}{2}{3}")), 2);
        assert_eq!(mobius_full_classical(&p("{1}{2}{3}{4}")), -6);
    }

    #[test]
    fn nc_mobius_values() {
        let q = p("{1,2}{3}");
        assert_eq!(mobius_nc(&q, &q).unwrap(), 1);
        let bottom2 = Partition::singletons(2).unwrap();
        let top2 = Partition::one_block(2).unwrap();
        assert_eq!(mobius_nc(&bottom2, &top2).unwrap(), -1);
        let bottom4 = Partition::singletons(4).unwrap();
        let top4 = Partition::one_block(4).unwrap();
        assert_eq!(mobius_nc(&bottom4, &top4).unwrap(), -5);
    }

    /// Brute-force solution of the delta recursion on NC(4), independent of
    /// the memoized implementation.
    #[test]
    fn nc4_bottom_to_top_by_linear_solve() {
        let fam = enumerate_noncrossing(4).unwrap();
        let top = Partition::one_block(4).unwrap();
        let mut order: Vec<&Partition> = fam.iter().collect();
        order.sort_by_key(|q| q.len());
        let mut mu: HashMap<&Partition, i64> = HashMap::new();
        for s in &order {
            let v = if **s == top {
                1
            } else {
                -order.iter().filter(|t| *t != s && s.refines(t)).map(|t| mu[*t]).sum::<i64>()
            };
            mu.insert(s, v);
        }
        assert_eq!(mu[&Partition::singletons(4).unwrap()], -5);
        for s in &order {
            assert_eq!(mobius_nc(s, &top).unwrap(), mu[*s]);
        }
    }

    #[test]
    fn nc_mobius_errors() {
        let crossing = p("{1,3}{2,4}");
        let top = Partition::one_block(4).unwrap();
        assert!(matches!(mobius_nc(&crossing, &top), Err(PartitionError::Crossing(_))));
        let a = p("{1,2}{3}{4}");
        let b = p("{1}{2,3}{4}");
        assert!(matches!(mobius_nc(&a, &b), Err(PartitionError::NotComparable(..))));
        assert!(matches!(
            mobius_nc(&Partition::singletons(3).unwrap(), &top),
            Err(PartitionError::SizeMismatch(3, 4))
        ));
    }

    #[test]
    fn nc_mobius_inverts_zeta_on_every_interval() {
        for n in 1..=6 {
            let fam = enumerate_noncrossing(n).unwrap();
            for s in fam.iter() {
                for pi in fam.iter().filter(|pi| s.refines(pi)) {
                    let total: i64 = fam
                        .iter()
                        .filter(|t| s.refines(t) && t.refines(pi))
                        .map(|t| mobius_nc(t, pi).unwrap())
                        .sum();
                    assert_eq!(total, i64::from(s == pi), "sigma={s} pi={pi}");
                }
            }
        }
    }

    #[test]
    fn runs_split_on_gaps() {
        assert_eq!(runs_within(0b11111, 0b11010), vec![0b00010, 0b11000]);
        assert_eq!(runs_within(0b10101, 0b10100), vec![0b10100]);
    }
}
