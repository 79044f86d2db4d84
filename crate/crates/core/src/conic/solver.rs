//! Primal log-barrier path following with damped Newton centering.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{Assignment, ConicProblem, LmiSense};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop once the barrier gap bound `m / t` falls below
    /// `gap_tol · max(1, |objective|)`.
    pub gap_tol: f64,
    /// Newton-decrement threshold ending a centering phase.
    pub newton_tol: f64,
    pub t0: f64,
    /// Barrier-weight growth per outer iteration.
    pub mu: f64,
    pub max_newton: usize,
    /// Optional starting point; used directly when strictly feasible,
    /// otherwise as the centre of the phase-one search.
    pub start: Option<Vec<f64>>,
    /// Half-width of the box around the start that bounds the phase-one search.
    pub phase1_radius: f64,
    /// Optional `|x_i| <= bound` safeguard keeping the central path bounded
    /// when the feasible set has flat recession directions.
    pub box_bound: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            newton_tol: 1e-10,
            t0: 1.0,
            mu: 12.0,
            max_newton: 3000,
            start: None,
            phase1_radius: 1e4,
            box_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Largest constraint violation at the returned point (0 when strictly feasible).
    pub primal: f64,
    /// Norm of the Lagrangian gradient with barrier-implied multipliers.
    pub dual: f64,
    /// Total complementarity `Σ Tr(Z_j G_j) + Σ y_l s_l = m / t`.
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt: KktReport,
    pub newton_steps: usize,
    /// Phase-one optimum when infeasibility was declared: the smallest uniform
    /// shift that makes every constraint hold. Positive means infeasible.
    pub infeasibility: Option<f64>,
}

impl Assignment for ConicSolution {
    fn values(&self) -> &[f64] {
        &self.x
    }
}

/// LMI in the form `G0 + Σ x_v F_v ⪰ 0` with sparse `F_v`.
struct CompiledLmi {
    g0: CMat,
    vars: Vec<usize>,
    entries: Vec<Vec<(usize, usize, C64)>>,
}

struct Compiled {
    n: usize,
    lmis: Vec<CompiledLmi>,
    ineqs: Vec<(Vec<(usize, f64)>, f64)>,
    logs: Vec<(f64, Vec<(usize, f64)>, f64)>,
    linear: Vec<f64>,
    linear_const: f64,
    /// Barrier parameter: total LMI dimension plus scalar inequalities.
    m: f64,
}

fn compile(p: &ConicProblem, box_bound: Option<f64>) -> Compiled {
    use std::collections::BTreeMap;
    let n = p.n_real();
    let mut lmis = Vec::new();
    let mut m = 0.0;
    for l in &p.lmis {
        let dim = l.expr.dim();
        let sign = match l.sense {
            LmiSense::Psd => 1.0,
            LmiSense::Nsd => -1.0,
        };
        let mut g0 = CMat::zeros(dim, dim);
        let mut per_var: BTreeMap<usize, BTreeMap<(usize, usize), C64>> = BTreeMap::new();
        for (&(i, j), e) in l.expr.entries() {
            g0[(i, j)] += e.constant * sign;
            if i != j {
                g0[(j, i)] += e.constant.conj() * sign;
            }
            for (v, c) in &e.terms {
                let slot = per_var.entry(*v).or_default();
                *slot.entry((i, j)).or_default() += c * sign;
                if i != j {
                    *slot.entry((j, i)).or_default() += c.conj() * sign;
                }
            }
        }
        let mut vars = Vec::new();
        let mut entries = Vec::new();
        for (v, es) in per_var {
            let list: Vec<(usize, usize, C64)> = es
                .into_iter()
                .filter(|(_, c)| c.norm() != 0.0)
                .map(|((i, j), c)| (i, j, c))
                .collect();
            if !list.is_empty() {
                vars.push(v);
                entries.push(list);
            }
        }
        m += dim as f64;
        lmis.push(CompiledLmi { g0, vars, entries });
    }
    let mut ineqs: Vec<(Vec<(usize, f64)>, f64)> = p.ineqs.iter().map(|s| (s.expr.merged(), s.expr.constant)).collect();
    if let Some(r) = box_bound {
        for i in 0..n {
            ineqs.push((vec![(i, -1.0)], r));
            ineqs.push((vec![(i, 1.0)], r));
        }
    }
    m += ineqs.len() as f64;
    let logs = p.log_terms.iter().map(|(w, a)| (*w, a.merged(), a.constant)).collect();
    let mut linear = vec![0.0; n];
    for (i, c) in p.linear.merged() {
        linear[i] += c;
    }
    Compiled {
        n,
        lmis,
        ineqs,
        logs,
        linear,
        linear_const: p.linear.constant,
        m,
    }
}

fn affine(terms: &[(usize, f64)], c: f64, x: &[f64]) -> f64 {
    c + terms.iter().map(|(i, a)| a * x[*i]).sum::<f64>()
}

impl CompiledLmi {
    fn matrix(&self, x: &[f64]) -> CMat {
        let mut g = self.g0.clone();
        for (v, es) in self.vars.iter().zip(&self.entries) {
            let xv = x[*v];
            if xv != 0.0 {
                for &(i, j, c) in es {
                    g[(i, j)] += c * xv;
                }
            }
        }
        g
    }
}

fn ln_det_pd(g: &CMat) -> Option<(f64, CMat)> {
    let l = linalg::cholesky_hpd(g)?;
    Some((linalg::ln_det_from_chol(&l), l))
}

impl Compiled {
    fn objective(&self, x: &[f64]) -> f64 {
        let logs: f64 = self.logs.iter().map(|(w, t, c)| w * affine(t, *c, x).ln()).sum();
        logs + self.linear_const + self.linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Barrier function `-t f(x) - Σ ln det G_j - Σ ln s_l`, `None` outside the domain.
    fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut phi = 0.0;
        for (w, terms, c) in &self.logs {
            let a = affine(terms, *c, x);
            if !(a > 0.0) {
                return None;
            }
            phi -= t * w * a.ln();
        }
        phi -= t * (self.linear_const + self.linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
        for (terms, c) in &self.ineqs {
            let s = affine(terms, *c, x);
            if !(s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        for l in &self.lmis {
            let (ld, _) = ln_det_pd(&l.matrix(x))?;
            phi -= ld;
        }
        phi.is_finite().then_some(phi)
    }

    /// Gradient and Hessian of the barrier function.
    fn derivatives(&self, x: &[f64], t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        let mut g = DVector::from_iterator(n, self.linear.iter().map(|c| -t * c));
        let mut h = DMatrix::zeros(n, n);
        for (w, terms, c) in &self.logs {
            let a = affine(terms, *c, x);
            if !(a > 0.0) {
                return None;
            }
            for &(i, ai) in terms {
                g[i] -= t * w * ai / a;
                for &(k, ak) in terms {
                    h[(i, k)] += t * w * ai * ak / (a * a);
                }
            }
        }
        for (terms, c) in &self.ineqs {
            let s = affine(terms, *c, x);
            if !(s > 0.0) {
                return None;
            }
            for &(i, ai) in terms {
                g[i] -= ai / s;
                for &(k, ak) in terms {
                    h[(i, k)] += ai * ak / (s * s);
                }
            }
        }
        for l in &self.lmis {
            let (_, chol) = ln_det_pd(&l.matrix(x))?;
            let ginv = linalg::inverse_from_chol(&chol);
            for (p, (vp, ep)) in l.vars.iter().zip(&l.entries).enumerate() {
                let mut tr = C64::new(0.0, 0.0);
                for &(a, b, c) in ep {
                    tr += c * ginv[(b, a)];
                }
                g[*vp] -= tr.re;
                for (vq, eq) in l.vars.iter().zip(&l.entries).skip(p) {
                    let mut acc = C64::new(0.0, 0.0);
                    for &(a, b, c) in ep {
                        for &(r, s, d) in eq {
                            acc += c * d * ginv[(b, r)] * ginv[(s, a)];
                        }
                    }
                    h[(*vp, *vq)] += acc.re;
                    if vp != vq {
                        h[(*vq, *vp)] += acc.re;
                    }
                }
            }
        }
        Some((g, h))
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (terms, c) in &self.ineqs {
            worst = worst.max(-affine(terms, *c, x));
        }
        for (_, terms, c) in &self.logs {
            worst = worst.max(-affine(terms, *c, x));
        }
        for l in &self.lmis {
            worst = worst.max(-linalg::min_eig(&l.matrix(x)));
        }
        worst
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        if reg > 0.0 {
            for i in 0..hr.nrows() {
                hr[(i, i)] += reg;
            }
        }
        if let Some(ch) = Cholesky::new(hr) {
            let dx = ch.solve(&(-g));
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

struct PathResult {
    x: Vec<f64>,
    t: f64,
    grad_norm: f64,
    newton: usize,
    converged: bool,
}

/// Barrier method from a strictly feasible `x`. `stop` is checked after each
/// centering and ends the run early when it returns true.
fn path_follow(
    c: &Compiled,
    mut x: Vec<f64>,
    opts: &SolveOptions,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<PathResult> {
    let mut t = opts.t0;
    let mut newton = 0usize;
    let mut grad_norm;
    loop {
        // Centering.
        loop {
            let Some((g, h)) = c.derivatives(&x, t) else {
                return Err(Error::Conic("iterate left the barrier domain".into()));
            };
            grad_norm = g.norm();
            let Some(dx) = newton_direction(&g, &h) else {
                break;
            };
            let slope = g.dot(&dx);
            if -slope / 2.0 <= opts.newton_tol || newton >= opts.max_newton {
                break;
            }
            newton += 1;
            let phi = c
                .value(&x, t)
                .ok_or_else(|| Error::Conic("barrier undefined at iterate".into()))?;
            let mut step = 1.0;
            let mut moved = false;
            // Below this predicted decrease the barrier value is rounding
            // noise and centering has gone as far as it can.
            let noise = 1e-14 * phi.abs().max(1.0);
            while step > 1e-16 && -step * slope > noise {
                let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(pc) = c.value(&cand, t) {
                    if pc <= phi + 0.25 * step * slope {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            if x.iter().any(|v| v.abs() > 1e14) {
                return Err(Error::Conic("iterates diverge; problem looks unbounded".into()));
            }
        }
        if stop(&x) {
            return Ok(PathResult {
                x,
                t,
                grad_norm,
                newton,
                converged: true,
            });
        }
        let f = c.objective(&x);
        if c.m / t < opts.gap_tol * f.abs().max(1.0) {
            return Ok(PathResult {
                x,
                t,
                grad_norm,
                newton,
                converged: true,
            });
        }
        if newton >= opts.max_newton {
            return Ok(PathResult {
                x,
                t,
                grad_norm,
                newton,
                converged: false,
            });
        }
        t *= opts.mu;
    }
}

fn strictly_feasible(c: &Compiled, x: &[f64]) -> bool {
    c.value(x, 1.0).is_some()
}

/// Phase one: minimize a uniform shift `s` such that every constraint of the
/// shifted problem holds, inside a box around `x0`. Returns the point and the
/// shift reached.
fn phase_one(c: &Compiled, x0: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, f64, usize)> {
    let n = c.n;
    let s_idx = n;
    let mut lmis = Vec::with_capacity(c.lmis.len());
    let mut s0: f64 = 0.0;
    for l in &c.lmis {
        let dim = l.g0.nrows();
        let mut vars = l.vars.clone();
        let mut entries = l.entries.clone();
        vars.push(s_idx);
        entries.push((0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect());
        s0 = s0.max(-linalg::min_eig(&l.matrix(x0)));
        lmis.push(CompiledLmi {
            g0: l.g0.clone(),
            vars,
            entries,
        });
    }
    let mut ineqs = Vec::new();
    for (terms, cst) in c
        .ineqs
        .iter()
        .map(|(t, c)| (t, c))
        .chain(c.logs.iter().map(|(_, t, c)| (t, c)))
    {
        let mut t = terms.clone();
        t.push((s_idx, 1.0));
        s0 = s0.max(-affine(terms, *cst, x0));
        ineqs.push((t, *cst));
    }
    let r = opts.phase1_radius * x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, xi) in x0.iter().enumerate() {
        ineqs.push((vec![(i, -1.0)], r + xi));
        ineqs.push((vec![(i, 1.0)], r - xi));
    }
    let mut linear = vec![0.0; n + 1];
    linear[s_idx] = -1.0;
    let aux = Compiled {
        n: n + 1,
        m: lmis.iter().map(|l: &CompiledLmi| l.g0.nrows() as f64).sum::<f64>() + ineqs.len() as f64,
        lmis,
        ineqs,
        logs: Vec::new(),
        linear,
        linear_const: 0.0,
    };
    let mut start = x0.to_vec();
    start.push(s0 + 1.0);
    let margin = 1e-7;
    let mut popts = opts.clone();
    popts.gap_tol = 1e-10;
    let res = path_follow(&aux, start, &popts, &|z| z[s_idx] < -margin)?;
    let s = res.x[s_idx];
    let mut x = res.x;
    x.truncate(n);
    Ok((x, s, res.newton))
}

pub fn solve(p: &ConicProblem, opts: &SolveOptions) -> Result<ConicSolution> {
    let c = compile(p, opts.box_bound);
    let x0 = opts.start.clone().unwrap_or_else(|| vec![0.0; c.n]);
    if x0.len() != c.n {
        return Err(Error::Conic(format!(
            "start has {} entries, problem has {}",
            x0.len(),
            c.n
        )));
    }
    let mut newton = 0;
    let start = if strictly_feasible(&c, &x0) {
        x0
    } else {
        let (x, s, steps) = phase_one(&c, &x0, opts)?;
        newton += steps;
        if !(s < 0.0) || !strictly_feasible(&c, &x) {
            return Ok(ConicSolution {
                objective: c.objective(&x),
                kkt: KktReport {
                    primal: c.max_violation(&x),
                    ..KktReport::default()
                },
                x,
                status: SolveStatus::Infeasible,
                newton_steps: newton,
                infeasibility: Some(s),
            });
        }
        x
    };
    let res = path_follow(&c, start, opts, &|_| false)?;
    newton += res.newton;
    Ok(ConicSolution {
        objective: c.objective(&res.x),
        kkt: KktReport {
            primal: c.max_violation(&res.x),
            dual: res.grad_norm / res.t,
            complementarity: c.m / res.t,
        },
        x: res.x,
        status: if res.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIter
        },
        newton_steps: newton,
        infeasibility: None,
    })
}
