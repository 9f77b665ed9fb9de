//! Dense linear algebra on matrices that are real whenever possible.
//!
//! Most spin-chain Hamiltonians built from X and Z are real symmetric; in
//! that case every eigenbasis quantity stays real and products run as single
//! real GEMMs. A [`CMat`] therefore stores the real part and an optional
//! imaginary part.

use std::os::raw::{c_char, c_int};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder, Zip};

use crate::C64;

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    re: Array2<f64>,
    im: Option<Array2<f64>>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { re: Array2::zeros((rows, cols)), im: None }
    }

    pub fn identity(n: usize) -> Self {
        CMat { re: Array2::eye(n), im: None }
    }

    pub fn from_real(re: Array2<f64>) -> Self {
        CMat { re, im: None }
    }

    /// Drops the imaginary part when it is exactly zero.
    pub fn from_parts(re: Array2<f64>, im: Option<Array2<f64>>) -> Self {
        let im = im.filter(|m| m.iter().any(|&v| v != 0.0));
        CMat { re, im }
    }

    pub fn from_complex(m: &Array2<C64>) -> Self {
        let re = m.mapv(|z| z.re);
        let im = m.mapv(|z| z.im);
        CMat::from_parts(re, Some(im))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let full = Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j));
        CMat::from_complex(&full)
    }

    pub fn to_complex(&self) -> Array2<C64> {
        match &self.im {
            None => self.re.mapv(|r| C64::new(r, 0.0)),
            Some(im) => Zip::from(&self.re).and(im).map_collect(|&r, &i| C64::new(r, i)),
        }
    }

    pub fn re(&self) -> &Array2<f64> {
        &self.re
    }

    pub fn im(&self) -> Option<&Array2<f64>> {
        self.im.as_ref()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    pub fn cols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        C64::new(self.re[[i, j]], self.im.as_ref().map_or(0.0, |m| m[[i, j]]))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat {
            re: self.re.t().as_standard_layout().into_owned(),
            im: self.im.as_ref().map(|m| m.t().mapv(|v| -v)),
        }
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        let re = self.re.dot(&other.re);
        match (&self.im, &other.im) {
            (None, None) => CMat { re, im: None },
            (Some(ai), None) => CMat { re, im: Some(ai.dot(&other.re)) },
            (None, Some(bi)) => CMat { re, im: Some(self.re.dot(bi)) },
            (Some(ai), Some(bi)) => {
                let mut re = re;
                re -= &ai.dot(bi);
                let mut im = self.re.dot(bi);
                im += &ai.dot(&other.re);
                CMat::from_parts(re, Some(im))
            }
        }
    }

    /// `self^† other` without materializing the adjoint.
    pub fn adjoint_matmul(&self, other: &CMat) -> CMat {
        let at = self.re.t();
        let mut re = at.dot(&other.re);
        let mut im = other.im.as_ref().map(|bi| at.dot(bi));
        if let Some(ai) = &self.im {
            let ait = ai.t();
            let im = im.get_or_insert_with(|| Array2::zeros(re.raw_dim()));
            *im -= &ait.dot(&other.re);
            if let Some(bi) = &other.im {
                re += &ait.dot(bi);
            }
        }
        CMat::from_parts(re, im)
    }

    /// `self other^†` without materializing the adjoint.
    pub fn matmul_adjoint(&self, other: &CMat) -> CMat {
        let bt = other.re.t();
        let mut re = self.re.dot(&bt);
        let mut im = self.im.as_ref().map(|ai| ai.dot(&bt));
        if let Some(bi) = &other.im {
            let bit = bi.t();
            let im = im.get_or_insert_with(|| Array2::zeros(re.raw_dim()));
            *im -= &self.re.dot(&bit);
            if let Some(ai) = &self.im {
                re += &ai.dot(&bit);
            }
        }
        CMat::from_parts(re, im)
    }

    /// `self^† v` for a block of vectors.
    pub fn adjoint_apply(&self, v: &CVecs) -> CVecs {
        let at = self.re.t();
        let mut re = at.dot(&v.re);
        let mut im = at.dot(&v.im);
        if let Some(mi) = &self.im {
            let mt = mi.t();
            re += &mt.dot(&v.im);
            im -= &mt.dot(&v.re);
        }
        CVecs { re, im }
    }

    /// `self diag(w)`.
    pub fn scale_cols(&self, w: &[f64]) -> CMat {
        let wv = ndarray::ArrayView1::from(w);
        CMat { re: &self.re * &wv, im: self.im.as_ref().map(|m| m * &wv) }
    }

    /// `diag(phase) self diag(conj(phase))`.
    pub fn conjugate_phases(&self, phase: &[C64]) -> CMat {
        let n = self.rows();
        let mut re = Array2::<f64>::zeros((n, n));
        let mut im = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j) * phase[i] * phase[j].conj();
                re[[i, j]] = z.re;
                im[[i, j]] = z.im;
            }
        }
        CMat::from_parts(re, Some(im))
    }

    /// Entrywise `self ∘ other^T`, i.e. `G_ab = self_ab other_ba`.
    pub fn hadamard_transposed(&self, other: &CMat) -> CMat {
        let ot = other.re.t();
        let mut re = &self.re * &ot;
        let mut im: Option<Array2<f64>> = None;
        if let Some(oi) = &other.im {
            im = Some(&self.re * &oi.t());
        }
        if let Some(si) = &self.im {
            let cross = si * &ot;
            match im.as_mut() {
                Some(m) => *m += &cross,
                None => im = Some(cross),
            }
            if let Some(oi) = &other.im {
                re -= &(si * &oi.t());
            }
        }
        CMat::from_parts(re, im)
    }

    /// Bytes held by the matrix data.
    pub fn bytes(&self) -> usize {
        let n = self.re.len() * std::mem::size_of::<f64>();
        if self.im.is_some() {
            2 * n
        } else {
            n
        }
    }

    pub fn add_scaled(&mut self, other: &CMat, s: C64) {
        if s.im != 0.0 || other.im.is_some() {
            let im = self.im.get_or_insert_with(|| Array2::zeros(self.re.raw_dim()));
            im.scaled_add(s.im, &other.re);
            if let Some(oi) = &other.im {
                im.scaled_add(s.re, oi);
                self.re.scaled_add(-s.im, oi);
            }
        }
        self.re.scaled_add(s.re, &other.re);
    }

    pub fn scale(&mut self, s: f64) {
        self.re *= s;
        if let Some(im) = &mut self.im {
            *im *= s;
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(-1.0, 0.0));
        out
    }

    pub fn trace(&self) -> C64 {
        let re = self.re.diag().sum();
        let im = self.im.as_ref().map_or(0.0, |m| m.diag().sum());
        C64::new(re, im)
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &CMat) -> C64 {
        let n = self.rows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..self.cols() {
                acc += self.get(i, k) * other.get(k, i);
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        match &self.im {
            None => self.re.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Some(im) => Zip::from(&self.re).and(im).fold(0.0f64, |m, &r, &i| m.max(r.hypot(i))),
        }
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.sub(other).max_abs()
    }

    /// `max_ij |M_ij - conj(M_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = (&self.re - &self.re.t()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(im) = &self.im {
            let s = im + &im.t();
            worst = worst.max(s.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        worst
    }

    /// Product with a block of complex column vectors.
    pub fn apply(&self, v: &CVecs) -> CVecs {
        // real and imaginary parts side by side: one pass over each matrix part
        let c = v.re.ncols();
        let stacked = ndarray::concatenate(Axis(1), &[v.re.view(), v.im.view()]).expect("same row count");
        let real_part = self.re.dot(&stacked);
        let mut re = real_part.slice(s![.., ..c]).to_owned();
        let mut im = real_part.slice(s![.., c..]).to_owned();
        if let Some(mi) = &self.im {
            let imag_part = mi.dot(&stacked);
            re -= &imag_part.slice(s![.., c..]);
            im += &imag_part.slice(s![.., ..c]);
        }
        CVecs { re, im }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMat) -> CMat {
        let (r1, c1) = (self.rows(), self.cols());
        let (r2, c2) = (other.rows(), other.cols());
        CMat::from_fn(r1 * r2, c1 * c2, |i, j| {
            self.get(i / r2, j / c2) * other.get(i % r2, j % c2)
        })
    }

    /// Entrywise map applied to both parts through complex values.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> CMat {
        CMat::from_complex(&self.to_complex().mapv(f))
    }

    /// Largest singular value of a small matrix, via the eigenvalues of `M^† M`.
    pub fn spectral_norm(&self) -> Result<f64, SimError> {
        if self.rows() == 0 || self.cols() == 0 {
            return Ok(0.0);
        }
        let gram = self.adjoint().matmul(self);
        let (vals, _) = eigh(&gram, false)?;
        Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }
}

/// A block of complex column vectors stored as separate real and imaginary
/// parts so that real matrices act with a single GEMM per part.
#[derive(Debug, Clone, PartialEq)]
pub struct CVecs {
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

impl CVecs {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CVecs { re: Array2::zeros((rows, cols)), im: Array2::zeros((rows, cols)) }
    }

    pub fn from_column(v: &Array1<C64>) -> Self {
        let n = v.len();
        CVecs {
            re: v.mapv(|z| z.re).into_shape_with_order((n, 1)).expect("column shape"),
            im: v.mapv(|z| z.im).into_shape_with_order((n, 1)).expect("column shape"),
        }
    }

    pub fn column(&self, j: usize) -> Array1<C64> {
        Zip::from(self.re.column(j)).and(self.im.column(j)).map_collect(|&r, &i| C64::new(r, i))
    }

    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    /// Multiplies row `i` of every column by `phase[i]`.
    pub fn scale_rows(&mut self, phase: &[C64]) {
        for (i, p) in phase.iter().enumerate() {
            let mut r = self.re.row_mut(i);
            let mut m = self.im.row_mut(i);
            for (x, y) in r.iter_mut().zip(m.iter_mut()) {
                let z = C64::new(*x, *y) * p;
                *x = z.re;
                *y = z.im;
            }
        }
    }

    pub fn axpy(&mut self, s: f64, other: &CVecs) {
        self.re.scaled_add(s, &other.re);
        self.im.scaled_add(s, &other.im);
    }
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and, when
/// requested, the unitary whose columns are the eigenvectors.
pub fn eigh(m: &CMat, vectors: bool) -> Result<(Vec<f64>, CMat), SimError> {
    let n = m.rows();
    if n != m.cols() {
        return Err(SimError::DimensionMismatch { expected: n, found: m.cols() });
    }
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    match &m.im {
        None => dsyevd(m.re.view(), vectors),
        Some(_) => zheevd(&m.to_complex(), vectors),
    }
}

fn lapack_n(n: usize) -> Result<c_int, SimError> {
    c_int::try_from(n).map_err(|_| SimError::Eigensolver(format!("dimension {n} too large for LAPACK")))
}

fn dsyevd(a: ArrayView2<'_, f64>, vectors: bool) -> Result<(Vec<f64>, CMat), SimError> {
    let n = a.nrows();
    let nn = lapack_n(n)?;
    // column-major copy; the lower triangle is what LAPACK reads
    let mut buf: Vec<f64> = a.t().iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let mut info: c_int = 0;
    let mut work_q = [0.0f64; 1];
    let mut iwork_q: [c_int; 1] = [0];
    // SAFETY: all pointers reference live buffers of the sizes LAPACK expects;
    // the first call is a workspace query.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work_q.as_mut_ptr(), &-1, iwork_q.as_mut_ptr(), &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(SimError::Eigensolver(format!("dsyevd workspace query failed (info={info})")));
    }
    let lwork = work_q[0] as c_int;
    let liwork = iwork_q[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork: Vec<c_int> = vec![0; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(SimError::Eigensolver(format!("dsyevd failed to converge (info={info})")));
    }
    let u = if vectors {
        Array2::from_shape_vec((n, n).f(), buf).expect("eigenvector buffer").as_standard_layout().into_owned()
    } else {
        Array2::zeros((0, 0))
    };
    Ok((w, CMat::from_real(u)))
}

fn zheevd(a: &Array2<C64>, vectors: bool) -> Result<(Vec<f64>, CMat), SimError> {
    let n = a.nrows();
    let nn = lapack_n(n)?;
    let mut buf: Vec<C64> = a.t().iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let mut info: c_int = 0;
    let mut work_q = [C64::new(0.0, 0.0); 1];
    let mut rwork_q = [0.0f64; 1];
    let mut iwork_q: [c_int; 1] = [0];
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to LAPACK's
    // double complex; buffers are sized per the workspace query.
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr().cast(), &nn, w.as_mut_ptr(),
            work_q.as_mut_ptr().cast(), &-1, rwork_q.as_mut_ptr(), &-1,
            iwork_q.as_mut_ptr(), &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(SimError::Eigensolver(format!("zheevd workspace query failed (info={info})")));
    }
    let lwork = work_q[0].re as c_int;
    let lrwork = rwork_q[0] as c_int;
    let liwork = iwork_q[0];
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork: Vec<c_int> = vec![0; liwork.max(1) as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr().cast(), &nn, w.as_mut_ptr(),
            work.as_mut_ptr().cast(), &lwork, rwork.as_mut_ptr(), &lrwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(SimError::Eigensolver(format!("zheevd failed to converge (info={info})")));
    }
    let u = if vectors {
        let full = Array2::from_shape_vec((n, n).f(), buf).expect("eigenvector buffer");
        CMat::from_complex(&full)
    } else {
        CMat::zeros(0, 0)
    };
    Ok((w, u))
}

/// Extreme eigenvalues `(min, max)` of a Hermitian operator given only by
/// its action on single vectors, by Lanczos with full reorthogonalization.
/// Stops once both extreme Ritz pairs have residual at most `tol` times the
/// spectral scale.
pub fn lanczos_extremes(
    apply: impl Fn(&CVecs) -> Result<CVecs, SimError>,
    start: CVecs,
    max_iter: usize,
    tol: f64,
) -> Result<(f64, f64), SimError> {
    lanczos(apply, start, max_iter, |lo, hi, r_lo, r_hi| {
        let scale = lo.abs().max(hi.abs());
        r_lo <= tol * scale && r_hi <= tol * scale
    })
}

/// Largest `|eigenvalue|` of a Hermitian operator. Only the dominant end of
/// the spectrum has to converge, to `tol` relative or `floor` absolute; the
/// other end only has to be known not to overtake it.
pub fn lanczos_spectral_radius(
    apply: impl Fn(&CVecs) -> Result<CVecs, SimError>,
    start: CVecs,
    max_iter: usize,
    tol: f64,
    floor: f64,
) -> Result<f64, SimError> {
    let (lo, hi) = lanczos(apply, start, max_iter, |lo, hi, r_lo, r_hi| {
        let ((top, r_top), (other, r_other)) =
            if hi.abs() >= lo.abs() { ((hi.abs(), r_hi), (lo.abs(), r_lo)) } else { ((lo.abs(), r_lo), (hi.abs(), r_hi)) };
        let slack = tol * top + floor;
        r_top <= slack && (r_other <= slack || other + r_other < top)
    })?;
    Ok(lo.abs().max(hi.abs()))
}

fn lanczos(
    apply: impl Fn(&CVecs) -> Result<CVecs, SimError>,
    start: CVecs,
    max_iter: usize,
    converged: impl Fn(f64, f64, f64, f64) -> bool,
) -> Result<(f64, f64), SimError> {
    let n = start.rows();
    let norm0 = norm_sqr(&start).sqrt();
    if norm0 == 0.0 {
        return Err(SimError::Eigensolver("Lanczos start vector is zero".into()));
    }
    let mut q = start;
    q.re /= norm0;
    q.im /= norm0;
    let mut basis: Vec<CVecs> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let steps = max_iter.min(n).max(1);
    for j in 0..steps {
        let mut w = apply(&q)?;
        let a = inner(&q, &w).re;
        w.axpy(-a, &q);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            w.axpy(-b, prev);
        }
        // two passes of classical Gram-Schmidt against every earlier vector
        for _ in 0..2 {
            for v in basis.iter().chain(std::iter::once(&q)) {
                let c = inner(v, &w);
                w.re.scaled_add(-c.re, &v.re);
                w.re.scaled_add(c.im, &v.im);
                w.im.scaled_add(-c.re, &v.im);
                w.im.scaled_add(-c.im, &v.re);
            }
        }
        alpha.push(a);
        let b = norm_sqr(&w).sqrt();
        let (lo, hi, tail_lo, tail_hi) = tridiagonal_extremes(&alpha, &beta)?;
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        // residual norms of the two extreme Ritz pairs bound their errors
        if converged(lo, hi, b * tail_lo.abs(), b * tail_hi.abs()) || b <= 1e-13 * scale || j + 1 == steps {
            return Ok((lo, hi));
        }
        beta.push(b);
        w.re /= b;
        w.im /= b;
        basis.push(std::mem::replace(&mut q, w));
    }
    Err(SimError::Eigensolver("Lanczos made no progress".into()))
}

/// Extreme eigenvalues of the Lanczos matrix and the last components of
/// their eigenvectors.
fn tridiagonal_extremes(alpha: &[f64], beta: &[f64]) -> Result<(f64, f64, f64, f64), SimError> {
    let m = alpha.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alpha[i];
        if i + 1 < m {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (vals, vecs) = dsyevd(t.view(), true)?;
    Ok((vals[0], vals[m - 1], vecs.get(m - 1, 0).re, vecs.get(m - 1, m - 1).re))
}

/// `sum_i |v_i|^2` over all columns.
pub fn norm_sqr(v: &CVecs) -> f64 {
    v.re.iter().chain(v.im.iter()).map(|x| x * x).sum()
}

/// `<a, b>` for single-column blocks.
pub fn inner(a: &CVecs, b: &CVecs) -> C64 {
    let rr = (&a.re * &b.re).sum() + (&a.im * &b.im).sum();
    let ri = (&a.re * &b.im).sum() - (&a.im * &b.re).sum();
    C64::new(rr, ri)
}

/// `sum_i w_i M_ii`.
pub fn weighted_diag(m: &CMat, w: &[f64]) -> C64 {
    let re: f64 = m.re.diag().iter().zip(w).map(|(a, b)| a * b).sum();
    let im: f64 = m.im.as_ref().map_or(0.0, |x| x.diag().iter().zip(w).map(|(a, b)| a * b).sum());
    C64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermitian(n: usize, seed: u64) -> CMat {
        let f = |i: usize, j: usize| ((i * 31 + j * 17 + seed as usize) % 23) as f64 / 23.0 - 0.5;
        CMat::from_fn(n, n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            let re = f(a, b);
            let im = if i == j { 0.0 } else if i < j { f(b, a) } else { -f(b, a) };
            C64::new(re, im)
        })
    }

    fn reconstruct(vals: &[f64], u: &CMat) -> CMat {
        let n = vals.len();
        let d = CMat::from_fn(n, n, |i, j| if i == j { C64::new(vals[i], 0.0) } else { C64::new(0.0, 0.0) });
        u.matmul(&d).matmul(&u.adjoint())
    }

    #[test]
    fn real_symmetric_eigensystem_reconstructs() {
        let m = CMat::from_real(hermitian(7, 3).re().clone());
        let (vals, u) = eigh(&m, true).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(u.is_real());
        assert!(reconstruct(&vals, &u).max_abs_diff(&m) < 1e-12);
        assert!(u.adjoint().matmul(&u).max_abs_diff(&CMat::identity(7)) < 1e-12);
    }

    #[test]
    fn complex_hermitian_eigensystem_reconstructs() {
        let m = hermitian(9, 5);
        assert!(!m.is_real());
        assert!(m.hermiticity_defect() < 1e-15);
        let (vals, u) = eigh(&m, true).unwrap();
        assert!(reconstruct(&vals, &u).max_abs_diff(&m) < 1e-12);
        let (only, _) = eigh(&m, false).unwrap();
        for (a, b) in vals.iter().zip(&only) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn products_match_complex_arithmetic() {
        let a = hermitian(5, 1);
        let b = CMat::from_real(hermitian(5, 2).re().clone());
        let direct = a.to_complex().dot(&b.to_complex());
        assert!(a.matmul(&b).max_abs_diff(&CMat::from_complex(&direct)) < 1e-14);
        assert!((a.matmul(&b).trace() - a.trace_product(&b)).norm() < 1e-13);
        let v = Array1::from_shape_fn(5, |i| C64::new(i as f64, 1.0 - i as f64));
        let av = a.apply(&CVecs::from_column(&v)).column(0);
        let expect = a.to_complex().dot(&v);
        assert!((&av - &expect).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn lanczos_finds_both_ends() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| i as f64 * 0.25 - 3.0).collect();
        let m = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else if i.abs_diff(j) == 1 {
                C64::new(0.0, if i < j { 0.1 } else { -0.1 })
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let (vals, _) = eigh(&m, false).unwrap();
        let start = CVecs::from_column(&Array1::from_shape_fn(n, |i| C64::new(1.0, 0.01 * i as f64)));
        let (lo, hi) = lanczos_extremes(|v| Ok(m.apply(v)), start, 100, 1e-13).unwrap();
        assert!((lo - vals[0]).abs() < 1e-10 && (hi - vals[n - 1]).abs() < 1e-10);
    }

    #[test]
    fn helper_products() {
        let a = hermitian(6, 7);
        let b = hermitian(6, 9);
        assert!(a.adjoint_matmul(&b).max_abs_diff(&a.adjoint().matmul(&b)) < 1e-14);
        assert!(a.matmul_adjoint(&b).max_abs_diff(&a.matmul(&b.adjoint())) < 1e-14);
        let v = CVecs::from_column(&Array1::from_shape_fn(6, |i| C64::new(0.5 - i as f64, 0.2)));
        let lhs = a.adjoint_apply(&v);
        let rhs = a.adjoint().apply(&v);
        assert!((&lhs.re - &rhs.re).iter().chain((&lhs.im - &rhs.im).iter()).all(|x| x.abs() < 1e-14));
        let g = a.hadamard_transposed(&b);
        assert!((g.get(1, 4) - a.get(1, 4) * b.get(4, 1)).norm() < 1e-15);
        let ph: Vec<C64> = (0..6).map(|i| C64::from_polar(1.0, 0.3 * i as f64)).collect();
        let c = a.conjugate_phases(&ph);
        assert!((c.get(2, 5) - ph[2] * a.get(2, 5) * ph[5].conj()).norm() < 1e-15);
    }

    #[test]
    fn pauli_norms() {
        let x = CMat::from_real(ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]));
        let y = CMat::from_parts(Array2::zeros((2, 2)), Some(ndarray::arr2(&[[0.0, -1.0], [1.0, 0.0]])));
        let comm = x.matmul(&y).sub(&y.matmul(&x));
        assert!((comm.spectral_norm().unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(x.kron(&CMat::identity(2)).rows(), 4);
    }
}
