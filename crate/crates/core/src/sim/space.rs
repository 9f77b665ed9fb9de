//! Tensor-product state space of a periodic chain.
//!
//! Basis states are integers whose base-`d` digits are the site values, with
//! site 0 as the most significant digit. Operators supported on a site list
//! act on the digits at those sites, first listed site most significant.

use ndarray::Array2;

use super::linalg::{CMat, CVecs};
use super::SimError;

/// Largest Hilbert-space dimension the dense backend accepts.
pub const MAX_DIM: usize = 16384;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Space {
    l: usize,
    d: usize,
    dim: usize,
    // weight of each site's digit: d^(L-1-s)
    place: Vec<usize>,
}

impl Space {
    pub fn new(l: usize, d: usize) -> Result<Self, SimError> {
        if l < 2 {
            return Err(SimError::InvalidModel(format!("chain length L={l} must be at least 2")));
        }
        if d < 2 {
            return Err(SimError::InvalidModel(format!("local dimension d={d} must be at least 2")));
        }
        let dim = (0..l)
            .try_fold(1usize, |acc, _| acc.checked_mul(d).filter(|&v| v <= MAX_DIM))
            .ok_or(SimError::DimensionCap { l, d, cap: MAX_DIM })?;
        let place = (0..l).map(|s| d.pow((l - 1 - s) as u32)).collect();
        Ok(Space { l, d, dim, place })
    }

    /// State space of `k` sites of dimension `d`, without the chain-length
    /// restriction; used for operators living on a handful of sites.
    pub(crate) fn subsystem(k: usize, d: usize) -> Self {
        let place = (0..k).map(|s| d.pow((k - 1 - s) as u32)).collect();
        Space { l: k, d, dim: d.pow(k as u32), place }
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn digit(&self, state: usize, site: usize) -> usize {
        (state / self.place[site]) % self.d
    }

    /// Index of the digits of `state` on `sites`, read as a base-d number.
    pub fn local_index(&self, state: usize, sites: &[usize]) -> usize {
        sites.iter().fold(0, |acc, &s| acc * self.d + self.digit(state, s))
    }

    /// `state` with its digits on `sites` replaced by those of `local`.
    pub fn with_local(&self, state: usize, sites: &[usize], local: usize) -> usize {
        let mut out = state;
        let mut rest = local;
        for &s in sites.iter().rev() {
            let new = rest % self.d;
            rest /= self.d;
            out = out - self.digit(out, s) * self.place[s] + new * self.place[s];
        }
        out
    }

    /// Wraps a signed site index onto the ring.
    pub fn wrap(&self, site: i64) -> usize {
        site.rem_euclid(self.l as i64) as usize
    }

    /// Periodic distance between two sites.
    pub fn site_distance(&self, a: usize, b: usize) -> usize {
        let diff = a.abs_diff(b) % self.l;
        diff.min(self.l - diff)
    }

    /// Periodic distance between two non-empty site sets.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> Option<usize> {
        a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).map(|(x, y)| self.site_distance(x, y)).min()
    }

    /// Image of every basis state under the shift moving site `s` to `s + x`.
    pub fn translation_map(&self, x: i64) -> Vec<usize> {
        let shift = self.wrap(x);
        (0..self.dim)
            .map(|b| (0..self.l).fold(0, |acc, s| acc + self.digit(b, s) * self.place[(s + shift) % self.l]))
            .collect()
    }

    /// `A M` where `A` acts as `local` on `sites` and `M` has `dim` rows.
    pub fn apply_local_rows(&self, sites: &[usize], local: &CMat, m: &CMat) -> CMat {
        let complex = !local.is_real() || !m.is_real();
        let cols = m.cols();
        let mut re = Array2::<f64>::zeros((self.dim, cols));
        let mut im = complex.then(|| Array2::<f64>::zeros((self.dim, cols)));
        let k = local.rows();
        for b in 0..self.dim {
            let r = self.local_index(b, sites);
            for c in 0..k {
                let a = local.get(r, c);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let src = self.with_local(b, sites, c);
                re.row_mut(b).scaled_add(a.re, &m.re().row(src));
                if let Some(mi) = m.im() {
                    re.row_mut(b).scaled_add(-a.im, &mi.row(src));
                }
                if let Some(out_im) = im.as_mut() {
                    out_im.row_mut(b).scaled_add(a.im, &m.re().row(src));
                    if let Some(mi) = m.im() {
                        out_im.row_mut(b).scaled_add(a.re, &mi.row(src));
                    }
                }
            }
        }
        CMat::from_parts(re, im)
    }

    /// Same product on a block of complex vectors.
    pub fn apply_local_vecs(&self, sites: &[usize], local: &CMat, v: &CVecs) -> CVecs {
        let mut out = CVecs::zeros(self.dim, v.re.ncols());
        let k = local.rows();
        for b in 0..self.dim {
            let r = self.local_index(b, sites);
            for c in 0..k {
                let a = local.get(r, c);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let src = self.with_local(b, sites, c);
                out.re.row_mut(b).scaled_add(a.re, &v.re.row(src));
                out.re.row_mut(b).scaled_add(-a.im, &v.im.row(src));
                out.im.row_mut(b).scaled_add(a.im, &v.re.row(src));
                out.im.row_mut(b).scaled_add(a.re, &v.im.row(src));
            }
        }
        out
    }

    /// Dense `dim x dim` matrix of an operator acting as `local` on `sites`.
    pub fn embed(&self, sites: &[usize], local: &CMat) -> CMat {
        let k = local.rows();
        let complex = !local.is_real();
        let mut re = Array2::<f64>::zeros((self.dim, self.dim));
        let mut im = complex.then(|| Array2::<f64>::zeros((self.dim, self.dim)));
        for b in 0..self.dim {
            let r = self.local_index(b, sites);
            for c in 0..k {
                let a = local.get(r, c);
                let src = self.with_local(b, sites, c);
                re[[b, src]] += a.re;
                if let Some(m) = im.as_mut() {
                    m[[b, src]] += a.im;
                }
            }
        }
        CMat::from_parts(re, im)
    }

    /// `Tr_{complement of sites}(m)` for a full-space matrix `m`, with the
    /// remaining factors ordered as `sites`.
    pub fn partial_trace(&self, m: &CMat, sites: &[usize]) -> CMat {
        let k = self.d.pow(sites.len() as u32);
        let complex = !m.is_real();
        let mut re = Array2::<f64>::zeros((k, k));
        let mut im = complex.then(|| Array2::<f64>::zeros((k, k)));
        for base in (0..self.dim).filter(|&b| sites.iter().all(|&s| self.digit(b, s) == 0)) {
            let rows: Vec<usize> = (0..k).map(|i| self.with_local(base, sites, i)).collect();
            for (i, &bi) in rows.iter().enumerate() {
                for (j, &bj) in rows.iter().enumerate() {
                    re[[i, j]] += m.re()[[bi, bj]];
                    if let (Some(out), Some(mi)) = (im.as_mut(), m.im()) {
                        out[[i, j]] += mi[[bi, bj]];
                    }
                }
            }
        }
        CMat::from_parts(re, im)
    }

    /// `T M T^†` for a full-space matrix, with `map` from [`Space::translation_map`].
    pub fn permute_full(&self, m: &CMat, map: &[usize]) -> CMat {
        let permute = |src: &Array2<f64>| {
            let mut out = Array2::<f64>::zeros(src.raw_dim());
            for (b, &tb) in map.iter().enumerate() {
                for (c, &tc) in map.iter().enumerate() {
                    out[[tb, tc]] = src[[b, c]];
                }
            }
            out
        };
        CMat::from_parts(permute(m.re()), m.im().map(permute))
    }
}
