//! Small dense complex linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works on Hermitian matrices of modest size (a few tens of
//! rows at most), so clarity wins over blocking or in-place tricks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const LN2: f64 = std::f64::consts::LN_2;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Real part of `v^H Q v`; the imaginary part is round-off for Hermitian `Q`.
pub fn quad_form(q: &CMat, v: &CVec) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..q.ncols() {
        let mut col = C64::new(0.0, 0.0);
        for i in 0..q.nrows() {
            col += v[i].conj() * q[(i, j)];
        }
        acc += col * v[j];
    }
    acc.re
}

/// Full complex value of `v^H Q v`, used to audit the imaginary residue.
pub fn quad_form_complex(q: &CMat, v: &CVec) -> C64 {
    (v.adjoint() * q * v)[(0, 0)]
}

pub fn hermitize(q: &CMat) -> CMat {
    (q + q.adjoint()) * C64::new(0.5, 0.0)
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn trace_re(q: &CMat) -> f64 {
    (0..q.nrows().min(q.ncols())).map(|i| q[(i, i)].re).sum()
}

/// `Re Tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::identity(n, n) * C64::new(s, 0.0)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest `|Q - Q^H|` entry.
pub fn hermitian_deviation(q: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..q.nrows() {
        for j in 0..q.ncols() {
            worst = worst.max((q[(i, j)] - q[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
pub fn eigh(q: &CMat) -> (Vec<f64>, CMat) {
    let n = q.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(q));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eig(q: &CMat) -> f64 {
    if q.nrows() == 0 {
        return 0.0;
    }
    eigh(q).0[0]
}

pub fn max_eig(q: &CMat) -> f64 {
    if q.nrows() == 0 {
        return 0.0;
    }
    *eigh(q).0.last().unwrap()
}

/// Spectral norm of a Hermitian matrix.
pub fn spectral_norm_herm(q: &CMat) -> f64 {
    let (d, _) = eigh(q);
    d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `V diag(d) V^H`.
pub fn from_eig(values: &[f64], vectors: &CMat) -> CMat {
    let n = vectors.nrows();
    let mut out = CMat::zeros(n, n);
    for (k, &d) in values.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += (v * v.adjoint()) * C64::new(d, 0.0);
    }
    out
}

/// Lower Cholesky factor of a Hermitian positive definite matrix, reading the
/// lower triangle. Returns `None` when a pivot is not strictly positive.
///
/// Written out by hand because a complex square root never fails, so a generic
/// factorization can silently accept an indefinite matrix.
pub fn cholesky_hpd(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = c(d, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// `ln det` from a lower Cholesky factor.
pub fn ln_det_from_chol(l: &CMat) -> f64 {
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

/// Inverse from a lower Cholesky factor: `(L L^H)^{-1} = L^{-H} L^{-1}`.
pub fn inverse_from_chol(l: &CMat) -> CMat {
    let n = l.nrows();
    let mut linv = CMat::zeros(n, n);
    for col in 0..n {
        linv[(col, col)] = c(1.0, 0.0) / l[(col, col)];
        for i in col + 1..n {
            let mut s = c(0.0, 0.0);
            for k in col..i {
                s -= l[(i, k)] * linv[(k, col)];
            }
            linv[(i, col)] = s / l[(i, i)];
        }
    }
    hermitize(&(linv.adjoint() * &linv))
}

/// `ln det` of a Hermitian positive definite matrix, `None` if it is not.
pub fn ln_det_hpd(m: &CMat) -> Option<f64> {
    cholesky_hpd(&hermitize(m)).map(|l| ln_det_from_chol(&l))
}

pub fn inverse_hpd(m: &CMat) -> Option<CMat> {
    cholesky_hpd(&hermitize(m)).map(|l| inverse_from_chol(&l))
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = radius}`.
///
/// Uses the active-set fixed point: repeatedly compute the threshold from the
/// surviving coordinates and drop those that fall below it. Terminates in at
/// most `len` rounds.
pub fn simplex_projection(v: &[f64], radius: f64) -> Vec<f64> {
    let mut active: Vec<bool> = vec![true; v.len()];
    let mut theta;
    loop {
        let (sum, count) = v
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
        theta = (sum - radius) / count as f64;
        let mut changed = false;
        for (x, a) in v.iter().zip(active.iter_mut()) {
            if *a && *x <= theta {
                *a = false;
                changed = true;
            }
        }
        if !changed || !active.iter().any(|&a| a) {
            break;
        }
    }
    if !active.iter().any(|&a| a) {
        // Only reachable through round-off when all entries tie; fall back to
        // the barycentre.
        return vec![radius / v.len() as f64; v.len()];
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projection onto `{x >= 0, sum x <= cap}`.
pub fn capped_simplex_projection(v: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        clipped
    } else {
        simplex_projection(v, cap)
    }
}

/// Projection of a Hermitian matrix onto `{W ⪰ 0, Tr W <= cap}` (Frobenius norm).
pub fn project_psd_trace(w: &CMat, cap: f64) -> CMat {
    let (d, v) = eigh(w);
    let projected = capped_simplex_projection(&d, cap);
    from_eig(&projected, &v)
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_cn_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| sample_cn(rng)))
}

/// Random Hermitian PSD matrix `G G^H` with `G` an `n x rank` complex Gaussian.
pub fn sample_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let g = CMat::from_fn(n, rank, |_, _| sample_cn(rng));
    &g * g.adjoint()
}
