//! A small conic modelling layer and interior-point solver.
//!
//! Problems have the form
//!
//! ```text
//! maximize   Σ_k w_k ln(a_k(x)) + c(x)
//! subject to G_j(x) ⪰ 0  (Hermitian, affine in x)
//!            s_l(x) >= 0 (real affine)
//! ```
//!
//! over a real vector `x` that packs scalar, Hermitian-matrix and complex-vector
//! variables. Complex Hermitian LMIs are handled natively. The logarithms are
//! kept in the objective and treated exactly by the barrier method, so the
//! returned objective is the true value at a strictly feasible point.

mod audit;
mod solver;

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::{CMat, CVec, C64};

pub use audit::{audit, dump, AuditReport};
pub use solver::{solve, ConicSolution, KktReport, SolveOptions, SolveStatus};

/// Real affine form `constant + Σ coef · x[idx]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(v: ScalarVar) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(v.0, 1.0)],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.constant *= s;
        for t in &mut self.terms {
            t.1 *= s;
        }
        self
    }

    /// Sums coefficients of repeated indices and drops exact zeros.
    pub(crate) fn merged(&self) -> Vec<(usize, f64)> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, c) in &self.terms {
            *map.entry(*i).or_default() += c;
        }
        map.into_iter().filter(|(_, c)| *c != 0.0).collect()
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.constant += rhs.constant;
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + rhs.scaled(-1.0)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, s: f64) -> Affine {
        self.scaled(s)
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(mut self, c: f64) -> Affine {
        self.constant += c;
        self
    }
}

/// Complex affine form with complex coefficients on real variables; used for
/// matrix entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CAffine {
    pub constant: C64,
    pub terms: Vec<(usize, C64)>,
}

impl CAffine {
    pub fn constant(c: C64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn from_real(a: &Affine) -> Self {
        Self {
            constant: C64::new(a.constant, 0.0),
            terms: a.terms.iter().map(|(i, c)| (*i, C64::new(*c, 0.0))).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            constant: self.constant.conj(),
            terms: self.terms.iter().map(|(i, c)| (*i, c.conj())).collect(),
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            constant: self.constant * s,
            terms: self.terms.iter().map(|(i, c)| (*i, c * s)).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        self.constant + self.terms.iter().map(|(i, c)| c * x[*i]).sum::<C64>()
    }

    /// `Re(z · self)` as a real affine form.
    pub fn re_times(&self, z: C64) -> Affine {
        Affine {
            constant: (self.constant * z).re,
            terms: self.terms.iter().map(|(i, c)| (*i, (c * z).re)).collect(),
        }
    }

    fn add_assign(&mut self, other: &CAffine) {
        self.constant += other.constant;
        self.terms.extend(other.terms.iter().copied());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar(pub(crate) usize);

/// `n x n` Hermitian variable: `n` real diagonal entries followed by the real
/// and imaginary parts of the strict upper triangle in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermVar {
    offset: usize,
    n: usize,
}

impl HermVar {
    pub fn dim(&self) -> usize {
        self.n
    }

    fn real_len(n: usize) -> usize {
        n * n
    }

    fn off_index(&self, i: usize, j: usize) -> usize {
        // Position of (i, j), i < j, in row-major strict upper order.
        let before: usize = (0..i).map(|r| self.n - r - 1).sum();
        self.offset + self.n + 2 * (before + (j - i - 1))
    }

    /// Entry `(i, j)` as a complex affine form.
    pub fn entry(&self, i: usize, j: usize) -> CAffine {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => CAffine {
                constant: C64::new(0.0, 0.0),
                terms: vec![(self.offset + i, C64::new(1.0, 0.0))],
            },
            Less => {
                let k = self.off_index(i, j);
                CAffine {
                    constant: C64::new(0.0, 0.0),
                    terms: vec![(k, C64::new(1.0, 0.0)), (k + 1, C64::new(0.0, 1.0))],
                }
            }
            Greater => self.entry(j, i).conj(),
        }
    }

    pub fn trace(&self) -> Affine {
        Affine {
            constant: 0.0,
            terms: (0..self.n).map(|i| (self.offset + i, 1.0)).collect(),
        }
    }

    /// `Re Tr(X C)` for a constant matrix `C`.
    pub fn inner(&self, c: &CMat) -> Affine {
        let mut out = Affine::default();
        for i in 0..self.n {
            for j in 0..self.n {
                let z = c[(j, i)];
                if z != C64::new(0.0, 0.0) {
                    out = out + self.entry(i, j).re_times(z);
                }
            }
        }
        out
    }

    /// `v^H X v`.
    pub fn quad(&self, v: &CVec) -> Affine {
        self.inner(&(v * v.adjoint()))
    }
}

/// Complex vector variable stored as interleaved real/imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VecVar {
    offset: usize,
    n: usize,
}

impl VecVar {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn entry(&self, k: usize) -> CAffine {
        CAffine {
            constant: C64::new(0.0, 0.0),
            terms: vec![
                (self.offset + 2 * k, C64::new(1.0, 0.0)),
                (self.offset + 2 * k + 1, C64::new(0.0, 1.0)),
            ],
        }
    }

    /// `Re(v^H ξ)`.
    pub fn re_inner(&self, xi: &CVec) -> Affine {
        let mut out = Affine::default();
        for k in 0..self.n {
            out = out + self.entry(k).conj().re_times(xi[k]);
        }
        out
    }
}

/// Hermitian matrix whose entries are affine in the variables. Only the upper
/// triangle is stored; the lower triangle is its conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    dim: usize,
    entries: BTreeMap<(usize, usize), CAffine>,
}

impl MatExpr {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `e` at `(i, j)` and its conjugate at `(j, i)`.
    pub fn add_entry(&mut self, i: usize, j: usize, e: &CAffine) {
        assert!(
            i < self.dim && j < self.dim,
            "entry ({i}, {j}) outside a {0}x{0} block",
            self.dim
        );
        let (key, val) = if i <= j {
            ((i, j), e.clone())
        } else {
            ((j, i), e.conj())
        };
        let val = if key.0 == key.1 {
            // Diagonal entries of a Hermitian matrix are real.
            CAffine::from_real(&val.re_times(C64::new(1.0, 0.0)))
        } else {
            val
        };
        self.entries.entry(key).or_default().add_assign(&val);
    }

    /// Adds a constant Hermitian block on the diagonal starting at `r0`.
    pub fn add_hermitian_const(&mut self, r0: usize, m: &CMat) {
        for a in 0..m.nrows() {
            for b in a..m.ncols() {
                self.add_entry(r0 + a, r0 + b, &CAffine::constant(m[(a, b)]));
            }
        }
    }

    /// Adds a constant block at `(r0, c0)` lying strictly above the diagonal
    /// (its mirror image is implied).
    pub fn add_offdiag_const(&mut self, r0: usize, c0: usize, m: &CMat) {
        assert!(r0 + m.nrows() <= c0, "off-diagonal block must lie above the diagonal");
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                self.add_entry(r0 + a, c0 + b, &CAffine::constant(m[(a, b)]));
            }
        }
    }

    /// Adds `scale · X` on the diagonal starting at `r0`.
    pub fn add_herm_var(&mut self, r0: usize, x: &HermVar, scale: f64) {
        for a in 0..x.n {
            for b in a..x.n {
                self.add_entry(r0 + a, r0 + b, &x.entry(a, b).scaled(C64::new(scale, 0.0)));
            }
        }
    }

    /// Adds `scale · X` as an off-diagonal block at `(r0, c0)` above the diagonal.
    pub fn add_herm_var_offdiag(&mut self, r0: usize, c0: usize, x: &HermVar, scale: f64) {
        assert!(r0 + x.n <= c0, "off-diagonal block must lie above the diagonal");
        for a in 0..x.n {
            for b in 0..x.n {
                self.add_entry(r0 + a, c0 + b, &x.entry(a, b).scaled(C64::new(scale, 0.0)));
            }
        }
    }

    /// Places `scale · v` in column `col`, rows `r0..r0+len`, above the diagonal.
    pub fn add_vec_column(&mut self, r0: usize, col: usize, v: &VecVar, scale: f64) {
        assert!(r0 + v.n <= col, "vector column must lie above the diagonal");
        for k in 0..v.n {
            self.add_entry(r0 + k, col, &v.entry(k).scaled(C64::new(scale, 0.0)));
        }
    }

    /// Places a constant vector in column `col`, rows `r0..`, above the diagonal.
    pub fn add_const_column(&mut self, r0: usize, col: usize, v: &CVec) {
        assert!(r0 + v.len() <= col, "vector column must lie above the diagonal");
        for k in 0..v.len() {
            self.add_entry(r0 + k, col, &CAffine::constant(v[k]));
        }
    }

    /// Adds `a · I_n` on the diagonal starting at `r0`.
    pub fn add_diag_affine(&mut self, r0: usize, n: usize, a: &Affine) {
        let e = CAffine::from_real(a);
        for k in 0..n {
            self.add_entry(r0 + k, r0 + k, &e);
        }
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (&(i, j), e) in &self.entries {
            let v = e.eval(x);
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v.conj();
            }
        }
        m
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &CAffine)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Free,
    Nonneg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmiSense {
    /// Expression ⪰ 0.
    Psd,
    /// Expression ⪯ 0.
    Nsd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Scalar(ScalarVar),
    Hermitian(HermVar),
    Vector(VecVar),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiConstraint {
    pub name: String,
    pub expr: MatExpr,
    pub sense: LmiSense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarConstraint {
    pub name: String,
    /// Required to be nonnegative.
    pub expr: Affine,
}

/// A maximization problem built incrementally.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProblem {
    n_real: usize,
    pub(crate) decls: Vec<VarDecl>,
    pub(crate) lmis: Vec<LmiConstraint>,
    pub(crate) ineqs: Vec<ScalarConstraint>,
    pub(crate) log_terms: Vec<(f64, Affine)>,
    pub(crate) linear: Affine,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of real scalar unknowns.
    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn scalar(&mut self, name: &str, sign: Sign) -> ScalarVar {
        let v = ScalarVar(self.n_real);
        self.n_real += 1;
        self.decls.push(VarDecl {
            name: name.into(),
            kind: VarKind::Scalar(v),
        });
        if sign == Sign::Nonneg {
            self.add_ge(&format!("{name} >= 0"), Affine::var(v));
        }
        v
    }

    pub fn hermitian(&mut self, name: &str, n: usize, psd: bool) -> HermVar {
        let v = HermVar { offset: self.n_real, n };
        self.n_real += HermVar::real_len(n);
        self.decls.push(VarDecl {
            name: name.into(),
            kind: VarKind::Hermitian(v),
        });
        if psd {
            let mut e = MatExpr::zeros(n);
            e.add_herm_var(0, &v, 1.0);
            self.add_lmi(&format!("{name} psd"), e, LmiSense::Psd);
        }
        v
    }

    pub fn cvector(&mut self, name: &str, n: usize) -> VecVar {
        let v = VecVar { offset: self.n_real, n };
        self.n_real += 2 * n;
        self.decls.push(VarDecl {
            name: name.into(),
            kind: VarKind::Vector(v),
        });
        v
    }

    pub fn add_lmi(&mut self, name: &str, expr: MatExpr, sense: LmiSense) {
        self.lmis.push(LmiConstraint {
            name: name.into(),
            expr,
            sense,
        });
    }

    /// `expr >= 0`.
    pub fn add_ge(&mut self, name: &str, expr: Affine) {
        self.ineqs.push(ScalarConstraint {
            name: name.into(),
            expr,
        });
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, name: &str, lhs: Affine, rhs: Affine) {
        self.add_ge(name, rhs - lhs);
    }

    /// Adds `weight · ln(arg)` to the objective; `weight` must be positive.
    pub fn add_log(&mut self, weight: f64, arg: Affine) {
        assert!(weight > 0.0, "log weights must be positive");
        self.log_terms.push((weight, arg));
    }

    pub fn add_linear(&mut self, a: Affine) {
        let cur = std::mem::take(&mut self.linear);
        self.linear = cur + a;
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let logs: f64 = self.log_terms.iter().map(|(w, a)| w * a.eval(x).ln()).sum();
        logs + self.linear.eval(x)
    }

    pub fn lmis(&self) -> &[LmiConstraint] {
        &self.lmis
    }

    pub fn scalar_constraints(&self) -> &[ScalarConstraint] {
        &self.ineqs
    }

    pub fn set_scalar(&self, x: &mut [f64], v: ScalarVar, value: f64) {
        x[v.0] = value;
    }

    pub fn set_hermitian(&self, x: &mut [f64], v: HermVar, m: &CMat) {
        for i in 0..v.n {
            x[v.offset + i] = m[(i, i)].re;
            for j in i + 1..v.n {
                let k = v.off_index(i, j);
                let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
                x[k] = z.re;
                x[k + 1] = z.im;
            }
        }
    }

    pub fn set_vector(&self, x: &mut [f64], v: VecVar, val: &CVec) {
        for k in 0..v.n {
            x[v.offset + 2 * k] = val[k].re;
            x[v.offset + 2 * k + 1] = val[k].im;
        }
    }
}

/// Reads variable values out of a packed real vector.
pub trait Assignment {
    fn values(&self) -> &[f64];

    fn scalar(&self, v: ScalarVar) -> f64 {
        self.values()[v.0]
    }

    fn hermitian(&self, v: HermVar) -> CMat {
        let mut m = CMat::zeros(v.n, v.n);
        for i in 0..v.n {
            for j in 0..v.n {
                m[(i, j)] = v.entry(i, j).eval(self.values());
            }
        }
        m
    }

    fn vector(&self, v: VecVar) -> CVec {
        CVec::from_iterator(v.n, (0..v.n).map(|k| v.entry(k).eval(self.values())))
    }
}

impl Assignment for Vec<f64> {
    fn values(&self) -> &[f64] {
        self
    }
}
