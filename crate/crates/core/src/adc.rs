//! Alternating difference-of-convex (ADC) ascent on the reduced problem.
//!
//! With the other block frozen, the objective as a function of one block is
//! `ln(1 + ĥ^H W ĥ)` (the rate the block delivers to its peer, concave) plus
//! the own-receiver rate minus Eve's rate (both convex in `W`). Linearizing the
//! convex part gives the surrogate `ln(1 + ĥ^H W ĥ) - Tr(M W) + const`, whose
//! maximizer over `{W ⪰ 0, Tr W <= P}` is rank one and available in closed
//! form up to a scalar dual multiplier found by bisection.
//!
//! Everything inside this module works in nats; rates leaving it are in bits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, hermitize, outer, quad_form, re_trace_product, CMat, CVec, C64, LN2};
use crate::reduction::{ReducedCovariancePair, ReducedProblem};

/// Below this value of the incoming signal power the normalized symbols
/// `ĥ_si`, `σ̂²` are undefined and the unnormalized gradient is used instead.
const INCOMING_FLOOR: f64 = 1e-12;
/// Relative threshold on the projection residual deciding `ĥ ∈ range(M)`.
const RANGE_TOL: f64 = 1e-9;
/// Eigenvalues below this fraction of the largest are treated as zero.
const EIG_RANK_TOL: f64 = 1e-10;
const MAX_BISECTION_STEPS: usize = 200;

/// Which node's covariance block is being updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Borrowed view of the reduced problem from the perspective of one node.
pub(crate) struct SideView<'a> {
    pub target: &'a CVec,
    pub si: &'a CVec,
    pub eve: &'a CVec,
    pub incoming: &'a CVec,
    pub peer_si: &'a CVec,
    pub other_eve: &'a CVec,
    pub w_own: &'a CMat,
    pub w_other: &'a CMat,
    pub sigma_own: f64,
    pub zeta_own: f64,
    pub sigma_peer: f64,
    pub zeta_peer: f64,
    pub sigma_e: f64,
    pub budget: f64,
}

impl<'a> SideView<'a> {
    pub fn new(side: Side, w: &'a ReducedCovariancePair, rp: &'a ReducedProblem) -> Self {
        let p = &rp.params;
        match side {
            Side::A => Self {
                target: &rp.ht_ab,
                si: &rp.ht_aa,
                eve: &rp.ht_ae,
                incoming: &rp.ht_ba,
                peer_si: &rp.ht_bb,
                other_eve: &rp.ht_be,
                w_own: &w.w_a,
                w_other: &w.w_b,
                sigma_own: p.sigma_a2,
                zeta_own: p.zeta_a,
                sigma_peer: p.sigma_b2,
                zeta_peer: p.zeta_b,
                sigma_e: p.sigma_e2,
                budget: p.p_a,
            },
            Side::B => Self {
                target: &rp.ht_ba,
                si: &rp.ht_bb,
                eve: &rp.ht_be,
                incoming: &rp.ht_ab,
                peer_si: &rp.ht_aa,
                other_eve: &rp.ht_ae,
                w_own: &w.w_b,
                w_other: &w.w_a,
                sigma_own: p.sigma_b2,
                zeta_own: p.zeta_b,
                sigma_peer: p.sigma_a2,
                zeta_peer: p.zeta_a,
                sigma_e: p.sigma_e2,
                budget: p.p_b,
            },
        }
    }

    /// Incoming signal power at this node's receiver.
    pub fn incoming_power(&self) -> f64 {
        quad_form(self.w_other, self.incoming).max(0.0)
    }

    /// Target channel normalized by the peer's interference-plus-noise.
    pub fn hhat(&self) -> CVec {
        let c_peer = self.sigma_peer + self.zeta_peer * quad_form(self.w_other, self.peer_si).max(0.0);
        self.target / C64::new(c_peer.sqrt(), 0.0)
    }

    /// Own-receiver rate (nats) at a candidate own block.
    pub fn own_rate(&self, w_own: &CMat) -> f64 {
        let x = quad_form(w_own, self.si).max(0.0);
        (self.incoming_power() / (self.sigma_own + self.zeta_own * x)).ln_1p()
    }

    /// Negative gradient of the own-receiver rate at the anchor block.
    /// Returns the term together with the normalized symbols when defined.
    pub fn si_term(&self) -> (CMat, Option<(CVec, f64)>) {
        let y = self.incoming_power();
        let x = quad_form(self.w_own, self.si).max(0.0);
        if y >= INCOMING_FLOOR {
            let hsi = self.si * C64::new((self.zeta_own / y).sqrt(), 0.0);
            let s2 = self.sigma_own / y;
            let g = quad_form(self.w_own, &hsi).max(0.0);
            let m = outer(&hsi) * C64::new(1.0 / ((1.0 + s2 + g) * (s2 + g)), 0.0);
            (m, Some((hsi, s2)))
        } else {
            let denom = (self.sigma_own + self.zeta_own * x + y) * (self.sigma_own + self.zeta_own * x);
            (outer(self.si) * C64::new(self.zeta_own * y / denom, 0.0), None)
        }
    }
}

/// Data of one rank-one subproblem
/// `max ln(1 + ĥ^H W ĥ) - Tr(M W)  s.t.  Tr W <= P, W ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemData {
    /// Effective target channel `ĥ`.
    pub hhat: CVec,
    pub m_mat: CMat,
    pub p_budget: f64,
    /// Normalized self-interference channel; `None` on the fallback path.
    pub hhat_si: Option<CVec>,
    /// Normalized Eve channel.
    pub hhat_eve: CVec,
    /// Normalized own-receiver noise; `None` on the fallback path.
    pub sigma_hat2: Option<f64>,
    /// True when the incoming signal vanished and the unnormalized gradient was used.
    pub fallback: bool,
    /// Constant (nats) such that the surrogate of the full objective is
    /// `ln(1 + ĥ^H W ĥ) - Tr(M W) + offset`.
    pub offset: f64,
}

impl SubproblemData {
    /// Bare subproblem without surrogate bookkeeping.
    pub fn from_parts(hhat: CVec, m_mat: CMat, p_budget: f64) -> Result<Self> {
        let n = hhat.len();
        crate::error::check_len("M rows", n, m_mat.nrows())?;
        crate::error::check_len("M cols", n, m_mat.ncols())?;
        if !(p_budget > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "budget must be positive, got {p_budget}"
            )));
        }
        Ok(Self {
            hhat_eve: CVec::zeros(n),
            hhat,
            m_mat: hermitize(&m_mat),
            p_budget,
            hhat_si: None,
            sigma_hat2: None,
            fallback: false,
            offset: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.hhat.len()
    }

    /// Subproblem objective in nats.
    pub fn objective(&self, w: &CMat) -> f64 {
        quad_form(w, &self.hhat).max(0.0).ln_1p() - re_trace_product(&self.m_mat, w)
    }

    /// Surrogate of the full objective (bits).
    pub fn surrogate_bits(&self, w: &CMat) -> f64 {
        (self.objective(w) + self.offset) / LN2
    }
}

pub(crate) fn build_subproblem(side: Side, w: &ReducedCovariancePair, rp: &ReducedProblem) -> Result<SubproblemData> {
    rp.check_pair(w)?;
    let v = SideView::new(side, w, rp);
    let hhat = v.hhat();
    let z_other = quad_form(v.w_other, v.other_eve).max(0.0);
    let hhat_eve = v.eve / C64::new((v.sigma_e + z_other).sqrt(), 0.0);
    let (si_m, hats) = v.si_term();
    let eve_gain = quad_form(v.w_own, &hhat_eve).max(0.0);
    let m_mat = hermitize(&(si_m + outer(&hhat_eve) * C64::new(1.0 / (1.0 + eve_gain), 0.0)));

    let eve_rate = ((quad_form(v.w_own, v.eve).max(0.0) + z_other) / v.sigma_e).ln_1p();
    let offset = v.own_rate(v.w_own) - eve_rate + re_trace_product(&m_mat, v.w_own);
    let fallback = hats.is_none();
    let (hhat_si, sigma_hat2) = match hats {
        Some((h, s)) => (Some(h), Some(s)),
        None => (None, None),
    };
    Ok(SubproblemData {
        hhat,
        m_mat,
        p_budget: v.budget,
        hhat_si,
        hhat_eve,
        sigma_hat2,
        fallback,
        offset,
    })
}

/// Subproblem for Alice's block at the anchor `(W_a^k, W_b^k)`.
pub fn build_subproblem_a(w: &ReducedCovariancePair, rp: &ReducedProblem) -> Result<SubproblemData> {
    build_subproblem(Side::A, w, rp)
}

/// Subproblem for Bob's block at the anchor `(W_a^k, W_b^k)`.
pub fn build_subproblem_b(w: &ReducedCovariancePair, rp: &ReducedProblem) -> Result<SubproblemData> {
    build_subproblem(Side::B, w, rp)
}

/// Whether `ĥ` has a component outside `range(M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubproblemCase {
    /// Full power is optimal; the multiplier is strictly positive.
    OutOfRange,
    /// The multiplier may vanish, leaving power unused.
    InRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneSolution {
    pub w_star: CMat,
    pub lambda_star: f64,
    pub kappa: f64,
    pub case_tag: SubproblemCase,
    /// Range basis `F` of `M` (in-range case only).
    pub f_mat: Option<CMat>,
    /// Nonzero eigenvalues of `M` matching the columns of `f_mat`.
    pub sigma_mat: Option<Vec<f64>>,
    /// Solution in range coordinates, `W⋆ = F X⋆ F^H`.
    pub x_star: Option<CMat>,
    /// Subproblem objective at `w_star` (nats).
    pub objective: f64,
    pub bisection_steps: usize,
}

/// Eigen-decomposition of `M` with `ĥ` expressed in the eigenbasis.
struct Spectrum {
    d: Vec<f64>,
    v: CMat,
    c: Vec<C64>,
    range: Vec<usize>,
}

impl Spectrum {
    fn new(sp: &SubproblemData) -> Self {
        let (d, v) = linalg::eigh(&sp.m_mat);
        let d: Vec<f64> = d.into_iter().map(|x| x.max(0.0)).collect();
        let c_vec = v.adjoint() * &sp.hhat;
        let top = d.last().copied().unwrap_or(0.0);
        let range = (0..d.len())
            .filter(|&k| top > 0.0 && d[k] > EIG_RANK_TOL * top)
            .collect();
        Self {
            d,
            v,
            c: c_vec.iter().copied().collect(),
            range,
        }
    }

    fn all(&self) -> Vec<usize> {
        (0..self.d.len()).collect()
    }

    fn out_of_range_residual(&self) -> f64 {
        (0..self.d.len())
            .filter(|k| !self.range.contains(k))
            .map(|k| self.c[k].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `(s, t) = (Σ|c|²/(d+λ), Σ|c|²/(d+λ)²)` over the given eigen-indices.
    fn s_t(&self, lambda: f64, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(s, t), &k| {
            let den = self.d[k] + lambda;
            let w = self.c[k].norm_sqr();
            (s + w / den, t + w / (den * den))
        })
    }

    fn kappa(&self, lambda: f64, idx: &[usize]) -> f64 {
        let (s, _) = self.s_t(lambda, idx);
        if s <= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / s) / s
        }
    }

    fn trace(&self, lambda: f64, idx: &[usize]) -> f64 {
        let (_, t) = self.s_t(lambda, idx);
        self.kappa(lambda, idx) * t
    }

    /// Coefficients of `(M + λI)^{-1} ĥ` in the eigenbasis restricted to `idx`.
    fn direction(&self, lambda: f64, idx: &[usize]) -> CVec {
        CVec::from_iterator(idx.len(), idx.iter().map(|&k| self.c[k] / (self.d[k] + lambda)))
    }

    fn columns(&self, idx: &[usize]) -> CMat {
        let cols: Vec<CVec> = idx.iter().map(|&k| self.v.column(k).into_owned()).collect();
        if cols.is_empty() {
            CMat::zeros(self.v.nrows(), 0)
        } else {
            CMat::from_columns(&cols)
        }
    }
}

fn classify(spec: &Spectrum, hhat: &CVec) -> SubproblemCase {
    if spec.out_of_range_residual() > RANGE_TOL * linalg::vec_norm(hhat) {
        SubproblemCase::OutOfRange
    } else {
        SubproblemCase::InRange
    }
}

/// Bisection on a nonincreasing `trace(λ)` over `(lo, hi)` for `trace(λ) = p`.
fn bisect_trace(trace: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, p: f64) -> Result<(f64, usize)> {
    let t_hi = trace(hi);
    if t_hi > p * (1.0 + 1e-8) {
        return Err(Error::Bisection(format!(
            "trace at upper bracket {hi:e} is {t_hi:e}, above budget {p:e}"
        )));
    }
    let mut best = (hi, (t_hi - p).abs());
    for step in 1..=MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let tr = trace(mid);
        let gap = (tr - p).abs();
        if gap < best.1 || (gap == best.1 && mid < best.0) {
            best = (mid, gap);
        }
        if gap < 1e-12 * p {
            return Ok((mid, step));
        }
        if tr > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 < 1e-8 * p {
        Ok((best.0, MAX_BISECTION_STEPS))
    } else {
        Err(Error::Bisection(format!(
            "no multiplier within tolerance after {MAX_BISECTION_STEPS} steps (best gap {:e} at lambda {:e})",
            best.1, best.0
        )))
    }
}

struct Bisected {
    lambda: f64,
    w: CMat,
    kappa: f64,
    x: Option<CMat>,
    f: Option<CMat>,
    sigma: Option<Vec<f64>>,
    steps: usize,
}

fn bisect_with_spectrum(spec: &Spectrum, sp: &SubproblemData, case: SubproblemCase) -> Result<Bisected> {
    let p = sp.p_budget;
    match case {
        SubproblemCase::OutOfRange => {
            let idx = spec.all();
            let h2 = linalg::vec_norm(&sp.hhat).powi(2);
            let (lambda, steps) = bisect_trace(|l| spec.trace(l, &idx), 0.0, h2, p)?;
            let kappa = spec.kappa(lambda, &idx);
            let v = &spec.v * spec.direction(lambda, &idx);
            Ok(Bisected {
                lambda,
                w: outer(&v) * C64::new(kappa, 0.0),
                kappa,
                x: None,
                f: None,
                sigma: None,
                steps,
            })
        }
        SubproblemCase::InRange => {
            let idx = spec.range.clone();
            let f = spec.columns(&idx);
            let sigma: Vec<f64> = idx.iter().map(|&k| spec.d[k]).collect();
            let (lambda, steps) = if spec.trace(0.0, &idx) <= p {
                (0.0, 0)
            } else {
                let hi: f64 = idx.iter().map(|&k| spec.c[k].norm_sqr()).sum();
                bisect_trace(|l| spec.trace(l, &idx), 0.0, hi, p)?
            };
            let kappa = spec.kappa(lambda, &idx);
            let xv = spec.direction(lambda, &idx);
            let x = outer(&xv) * C64::new(kappa, 0.0);
            let w = &f * &x * f.adjoint();
            Ok(Bisected {
                lambda,
                w,
                kappa,
                x: Some(x),
                f: Some(f),
                sigma: Some(sigma),
                steps,
            })
        }
    }
}

/// Finds the dual multiplier of the power constraint for the given case and
/// returns it with the corresponding primal solution.
pub fn bisect_lambda(sp: &SubproblemData, case: SubproblemCase) -> Result<(f64, CMat)> {
    let spec = Spectrum::new(sp);
    let b = bisect_with_spectrum(&spec, sp, case)?;
    Ok((b.lambda, b.w))
}

/// Power `Tr W(λ)` of the candidate solution at multiplier `λ` (exposed for
/// diagnostics and the bracketing checks).
pub fn trace_at(sp: &SubproblemData, case: SubproblemCase, lambda: f64) -> f64 {
    let spec = Spectrum::new(sp);
    let idx = match case {
        SubproblemCase::OutOfRange => spec.all(),
        SubproblemCase::InRange => spec.range.clone(),
    };
    spec.trace(lambda, &idx)
}

/// Which case a subproblem falls in.
pub fn subproblem_case(sp: &SubproblemData) -> SubproblemCase {
    classify(&Spectrum::new(sp), &sp.hhat)
}

/// Global maximizer of the rank-one subproblem.
pub fn solve_dc_subproblem(sp: &SubproblemData) -> Result<RankOneSolution> {
    let n = sp.dim();
    if linalg::vec_norm(&sp.hhat) == 0.0 {
        // Nothing to gain from transmitting; any power only costs `Tr(M W)`.
        let w = CMat::zeros(n, n);
        return Ok(RankOneSolution {
            objective: sp.objective(&w),
            w_star: w,
            lambda_star: 0.0,
            kappa: 0.0,
            case_tag: SubproblemCase::InRange,
            f_mat: None,
            sigma_mat: None,
            x_star: None,
            bisection_steps: 0,
        });
    }
    let spec = Spectrum::new(sp);
    let case = classify(&spec, &sp.hhat);
    let b = bisect_with_spectrum(&spec, sp, case)?;
    let w_star = hermitize(&b.w);
    Ok(RankOneSolution {
        objective: sp.objective(&w_star),
        w_star,
        lambda_star: b.lambda,
        kappa: b.kappa,
        case_tag: case,
        f_mat: b.f,
        sigma_mat: b.sigma,
        x_star: b.x,
        bisection_steps: b.steps,
    })
}

/// Optimality-condition residuals of a subproblem solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖Z W‖_F` with `Z = M + λI - ĥĥ^H/(1 + ĥ^H W ĥ)`.
    pub stationarity: f64,
    /// Trace excess and negative eigenvalues of `W`.
    pub primal: f64,
    /// Negative part of the smallest eigenvalue of `Z`, plus a negative `λ`.
    pub dual: f64,
    /// `|λ (Tr W - P)| + |Tr(Z W)|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

pub fn kkt_audit(sp: &SubproblemData, w: &CMat, lambda: f64) -> KktResiduals {
    let n = sp.dim();
    let g = quad_form(w, &sp.hhat).max(0.0);
    let z = &sp.m_mat + linalg::scaled_identity(n, lambda) - outer(&sp.hhat) * C64::new(1.0 / (1.0 + g), 0.0);
    let z = hermitize(&z);
    let tr = linalg::trace_re(w);
    KktResiduals {
        stationarity: linalg::frobenius(&(&z * w)),
        primal: (tr - sp.p_budget).max(0.0) + (-linalg::min_eig(w)).max(0.0),
        dual: (-linalg::min_eig(&z)).max(0.0) + (-lambda).max(0.0),
        complementarity: (lambda * (tr - sp.p_budget)).abs() + re_trace_product(&z, w).abs(),
    }
}

/// Second-largest over largest eigenvalue of a PSD matrix (0 for `W = 0`).
pub fn rank_one_ratio(w: &CMat) -> f64 {
    let (d, _) = linalg::eigh(w);
    let top = d.last().copied().unwrap_or(0.0);
    if top <= 0.0 || d.len() < 2 {
        return 0.0;
    }
    d[d.len() - 2].max(0.0) / top
}

/// Isotropic full-power starting point `W_i = (P_i / r_i) I`.
pub fn default_init(rp: &ReducedProblem) -> ReducedCovariancePair {
    let p = &rp.params;
    ReducedCovariancePair {
        w_a: linalg::scaled_identity(rp.r_a(), p.p_a / rp.r_a() as f64),
        w_b: linalg::scaled_identity(rp.r_b(), p.p_b / rp.r_b() as f64),
    }
}

/// Gradient (nats) of the full objective with respect to one block.
pub(crate) fn block_gradient(sp: &SubproblemData, w_own: &CMat) -> CMat {
    let g = quad_form(w_own, &sp.hhat).max(0.0);
    outer(&sp.hhat) * C64::new(1.0 / (1.0 + g), 0.0) - &sp.m_mat
}

/// Projected-gradient residual `max_i ‖W_i - Π(W_i + ∇_i F)‖_F` of the reduced
/// problem, with `Π` the projection onto `{W ⪰ 0, Tr W <= P_i}`.
pub fn stationarity_residual(rp: &ReducedProblem, w: &ReducedCovariancePair) -> Result<f64> {
    let mut worst = 0.0f64;
    for side in [Side::A, Side::B] {
        let sp = build_subproblem(side, w, rp)?;
        let own = match side {
            Side::A => &w.w_a,
            Side::B => &w.w_b,
        };
        let step = own + block_gradient(&sp, own);
        let proj = linalg::project_psd_trace(&hermitize(&step), sp.p_budget);
        worst = worst.max(linalg::frobenius(&(own - proj)));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcTraceRow {
    pub iter: usize,
    /// Unclamped `R_a + R_b - R_e` (bits).
    pub objective: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub r_e: f64,
    /// Surrogate values (bits) at the accepted block updates of this iteration.
    pub surrogate_a: Option<f64>,
    pub surrogate_b: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdcTrace {
    /// Row 0 is the initial point.
    pub rows: Vec<AdcTraceRow>,
    pub converged: bool,
    /// Projected-gradient residual at the returned point.
    pub stationarity: f64,
    /// Number of block updates that took the unnormalized fallback path.
    pub fallback_updates: usize,
    /// Number of block updates whose candidate was rejected for lowering the objective.
    pub rejected_updates: usize,
    /// Case fired by each block update, in order.
    pub cases: Vec<SubproblemCase>,
}

impl AdcTrace {
    /// Outer iterations performed (excluding the initial row).
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].objective >= w[0].objective - slack)
    }

    /// CSV with header `iter,objective,R_a,R_b,R_e`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,objective,R_a,R_b,R_e\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.iter, r.objective, r.r_a, r.r_b, r.r_e);
        }
        out
    }
}

/// Stopping thresholds of the alternating solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcOptions {
    /// Minimum objective gain (bits) over one outer iteration to keep going.
    pub tol: f64,
    pub max_iter: usize,
    /// Projected-gradient residual required in addition to a small gain.
    pub stationarity_tol: f64,
}

impl Default for AdcOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            stationarity_tol: 1e-4,
        }
    }
}

fn trace_row(rp: &ReducedProblem, w: &ReducedCovariancePair, iter: usize) -> Result<AdcTraceRow> {
    let r = rp.rates(w)?;
    Ok(AdcTraceRow {
        iter,
        objective: r.secrecy(),
        r_a: r.r_a,
        r_b: r.r_b,
        r_e: r.r_e,
        surrogate_a: None,
        surrogate_b: None,
    })
}

fn check_feasible(rp: &ReducedProblem, w: &ReducedCovariancePair) -> Result<()> {
    rp.check_pair(w)?;
    for (name, m, budget) in [("w_a", &w.w_a, rp.params.p_a), ("w_b", &w.w_b, rp.params.p_b)] {
        let top = linalg::max_eig(m).max(0.0);
        if linalg::min_eig(m) < -1e-9 * top.max(1e-300) {
            return Err(Error::InvalidParameter(format!("initial {name} is not PSD")));
        }
        if linalg::trace_re(m) > budget * (1.0 + 1e-8) {
            return Err(Error::InvalidParameter(format!("initial {name} exceeds its budget")));
        }
    }
    Ok(())
}

/// Block update routine shared by the single- and multi-Eve solvers: returns
/// the candidate block and the surrogate value it attains.
pub(crate) type BlockUpdate<'a> =
    dyn FnMut(Side, &ReducedCovariancePair) -> Result<(CMat, f64, Option<SubproblemCase>, bool)> + 'a;

/// Alternating loop driving a block-update routine, with monotone acceptance.
pub(crate) fn alternate(
    init: &ReducedCovariancePair,
    objective: &dyn Fn(&ReducedCovariancePair) -> Result<AdcTraceRow>,
    update: &mut BlockUpdate<'_>,
    stationarity: &dyn Fn(&ReducedCovariancePair) -> Result<f64>,
    opts: AdcOptions,
) -> Result<(ReducedCovariancePair, AdcTrace)> {
    let mut w = ReducedCovariancePair::new(init.w_a.clone(), init.w_b.clone());
    let mut trace = AdcTrace::default();
    let mut current = objective(&w)?;
    trace.rows.push(current.clone());
    for iter in 1..=opts.max_iter {
        let start = current.objective;
        let mut surrogates = [None, None];
        for (slot, side) in [Side::A, Side::B].into_iter().enumerate() {
            let (cand, surrogate, case, fallback) = update(side, &w)?;
            if let Some(case) = case {
                trace.cases.push(case);
            }
            if fallback {
                trace.fallback_updates += 1;
            }
            let mut next = w.clone();
            match side {
                Side::A => next.w_a = cand,
                Side::B => next.w_b = cand,
            }
            let row = objective(&next)?;
            if row.objective >= current.objective {
                w = next;
                current = row;
                surrogates[slot] = Some(surrogate);
            } else {
                trace.rejected_updates += 1;
            }
        }
        let mut row = current.clone();
        row.iter = iter;
        row.surrogate_a = surrogates[0];
        row.surrogate_b = surrogates[1];
        trace.rows.push(row);
        if current.objective - start < opts.tol {
            let res = stationarity(&w)?;
            if res < opts.stationarity_tol {
                trace.converged = true;
                trace.stationarity = res;
                return Ok((w, trace));
            }
        }
    }
    trace.stationarity = stationarity(&w)?;
    Ok((w, trace))
}

/// Alternating DC ascent from a feasible `init`. Stops once an outer iteration
/// gains less than `tol` bits and the projected-gradient residual is below
/// `1e-4`, or after `max_iter` iterations.
pub fn adc_solve(
    rp: &ReducedProblem,
    init: &ReducedCovariancePair,
    tol: f64,
    max_iter: usize,
) -> Result<(ReducedCovariancePair, AdcTrace)> {
    adc_solve_with(
        rp,
        init,
        AdcOptions {
            tol,
            max_iter,
            ..AdcOptions::default()
        },
    )
}

pub fn adc_solve_with(
    rp: &ReducedProblem,
    init: &ReducedCovariancePair,
    opts: AdcOptions,
) -> Result<(ReducedCovariancePair, AdcTrace)> {
    check_feasible(rp, init)?;
    let objective = |w: &ReducedCovariancePair| trace_row(rp, w, 0);
    let mut update = |side: Side, w: &ReducedCovariancePair| {
        let sp = build_subproblem(side, w, rp)?;
        let sol = solve_dc_subproblem(&sp)?;
        let s = sp.surrogate_bits(&sol.w_star);
        Ok((sol.w_star, s, Some(sol.case_tag), sp.fallback))
    };
    let stationarity = |w: &ReducedCovariancePair| stationarity_residual(rp, w);
    alternate(init, &objective, &mut update, &stationarity, opts)
}
