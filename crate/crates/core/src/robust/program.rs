//! The safe LMI restriction, its solution by successive linearization, and
//! independent checks of the points it returns.
//!
//! Variables are kept after the change of variables that makes the coupling
//! between the S-procedure multiplier and `(Q, nu_e)` linear. When a radius is
//! zero the matching dual block loses all of its cost except through its
//! off-diagonal part, so the diagonal sub-blocks are eliminated and only
//! `lambda_i` (or `B_i`) is kept as a free variable.

use serde::{Deserialize, Serialize};

use super::{
    build_ambiguity, linearize_phi2, robust_objective, AmbiguityConstants, MomentModel, Phi2Linearization,
    RobustAnchor, RobustVariables,
};
use crate::adc::{adc_solve, default_init};
use crate::conic::{
    self, Affine, Assignment, CAffine, ConicProblem, ConicSolution, HermVar, LmiSense, MatExpr, ScalarVar, Sign,
    SolveOptions, SolveStatus, VecVar,
};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitize, outer, CMat, CVec, C64, LN2};
use crate::model::{eve_energy, ChannelSet, CovariancePair, SystemParams};
use crate::reduction::{lift, reduce};

enum MeanBlock {
    /// `Gamma_i` as a full PSD variable; `lambda_i` is its last column.
    Full(HermVar),
    /// Radius zero: only `lambda_i` survives.
    Free(VecVar),
}

struct SecondBlock {
    b: HermVar,
    /// `(A_i, C_i)` when the radius is positive.
    outer: Option<(HermVar, HermVar)>,
}

/// Strict-positivity margin on the S-procedure multiplier. Without Eve energy
/// the constraints give `(1 - epsilon) mu <= sigma_e^2 nu_e`, so the supremum
/// sits at `mu = 0` where the change of variables breaks down; the floor
/// costs at most `log2(1 + MU_FLOOR / sigma_e^2)` bits.
const MU_FLOOR: f64 = 1e-8;

struct Program {
    base: ConicProblem,
    n: usize,
    q: [HermVar; 2],
    mean: [MeanBlock; 2],
    second: [SecondBlock; 2],
    alpha: ScalarVar,
    mu: ScalarVar,
    nu: ScalarVar,
}

const SIDE_NAMES: [&str; 2] = ["a", "b"];

impl Program {
    fn lambda_entry(&self, side: usize, k: usize) -> CAffine {
        match &self.mean[side] {
            MeanBlock::Full(g) => g.entry(k, self.n),
            MeanBlock::Free(v) => v.entry(k),
        }
    }

    fn build(p: &SystemParams, mm: &MomentModel, amb: &AmbiguityConstants) -> Self {
        let n = p.n_tx;
        let mut pr = ConicProblem::new();
        let q = [pr.hermitian("Q_a", n, true), pr.hermitian("Q_b", n, true)];
        pr.add_le("power a", q[0].trace(), Affine::constant(p.p_a));
        pr.add_le("power b", q[1].trace(), Affine::constant(p.p_b));
        let alpha = pr.scalar("alpha", Sign::Free);
        let mu = pr.scalar("mu", Sign::Free);
        pr.add_ge("mu floor", Affine::var(mu) - Affine::constant(MU_FLOOR));
        let nu = pr.scalar("nu_e", Sign::Nonneg);
        let mut spent = Affine::var(alpha);
        let mut mean = Vec::with_capacity(2);
        let mut second = Vec::with_capacity(2);
        for side in 0..2 {
            let s = SIDE_NAMES[side];
            let (tau1, tau2) = mm.taus(side);
            let (xi, om) = mm.side(side);
            if tau1 > 0.0 {
                let g = pr.hermitian(&format!("Gamma_{s}"), n + 1, true);
                spent = spent + g.inner(amb.psi(side));
                mean.push(MeanBlock::Full(g));
            } else {
                let v = pr.cvector(&format!("lambda_{s}"), n);
                spent = spent + v.re_inner(xi) * -2.0;
                mean.push(MeanBlock::Free(v));
            }
            let b = pr.hermitian(&format!("B_{s}"), n, false);
            spent = spent + b.inner(om) * -2.0;
            let outer = if tau2 > 0.0 {
                let a = pr.hermitian(&format!("A_{s}"), n, false);
                let c = pr.hermitian(&format!("C_{s}"), n, false);
                let mut e = MatExpr::zeros(2 * n);
                e.add_herm_var(0, &a, 1.0);
                e.add_herm_var_offdiag(0, n, &b, 1.0);
                e.add_herm_var(n, &c, 1.0);
                pr.add_lmi(&format!("Phi_{s} psd"), e, LmiSense::Psd);
                spent = spent + (a.trace() + c.trace()) * tau2;
                Some((a, c))
            } else {
                None
            };
            second.push(SecondBlock { b, outer });
        }
        pr.add_le("outage budget", spent, Affine::var(mu) * mm.epsilon);
        let mean: [MeanBlock; 2] = mean.try_into().unwrap_or_else(|_| unreachable!());
        let second: [SecondBlock; 2] = second.try_into().unwrap_or_else(|_| unreachable!());
        let mut prog = Self {
            base: pr,
            n,
            q,
            mean,
            second,
            alpha,
            mu,
            nu,
        };
        for coupled in [false, true] {
            let mut e = MatExpr::zeros(2 * n + 1);
            for side in 0..2 {
                e.add_herm_var(side * n, &prog.second[side].b, 2.0);
                if coupled {
                    e.add_herm_var(side * n, &prog.q[side], 1.0);
                }
                for k in 0..n {
                    e.add_entry(side * n + k, 2 * n, &prog.lambda_entry(side, k));
                }
            }
            let corner = if coupled {
                Affine::var(mu) - Affine::var(alpha) - Affine::var(nu) * p.sigma_e2
            } else {
                -Affine::var(alpha)
            };
            e.add_entry(2 * n, 2 * n, &CAffine::from_real(&corner));
            let name = if coupled { "coupled block" } else { "homogeneous block" };
            prog.base.add_lmi(name, e, LmiSense::Nsd);
        }
        prog
    }

    /// The convex subproblem at an anchor: `phi1 - linearized phi2` in nats.
    fn at_anchor(&self, lin: &Phi2Linearization, ch: &ChannelSet, p: &SystemParams) -> ConicProblem {
        let mut pr = self.base.clone();
        let [qa, qb] = self.q;
        pr.add_log(1.0, qa.quad(&ch.h_aa) * p.zeta_a + qb.quad(&ch.h_ba) + p.sigma_a2);
        pr.add_log(1.0, qb.quad(&ch.h_bb) * p.zeta_b + qa.quad(&ch.h_ab) + p.sigma_b2);
        let at = &lin.anchor;
        let constant = lin.value
            - linalg::re_trace_product(&lin.grad_q_a, &at.q_a)
            - linalg::re_trace_product(&lin.grad_q_b, &at.q_b)
            - lin.grad_nu * at.nu_e;
        let linear = Affine::constant(constant)
            + qa.inner(&lin.grad_q_a)
            + qb.inner(&lin.grad_q_b)
            + Affine::var(self.nu) * lin.grad_nu;
        pr.add_linear(linear * -LN2);
        pr
    }

    /// A strictly feasible point built from scaled identities: `Q_i` at half
    /// power, `B_i` below `-Q_i / 2`, `lambda_i = 0`, and `mu`, `nu_e` large
    /// enough to give every scalar constraint slack.
    fn analytic_start(&self, p: &SystemParams, mm: &MomentModel) -> Vec<f64> {
        let n = self.n;
        let pr = &self.base;
        let mut x = vec![0.0; pr.n_real()];
        let budgets = [p.p_a, p.p_b];
        for side in 0..2 {
            pr.set_hermitian(
                &mut x,
                self.q[side],
                &linalg::scaled_identity(n, budgets[side] / (2.0 * n as f64)),
            );
        }
        let b = p.p_a.max(p.p_b) / (4.0 * n as f64) + 1.0;
        let alpha = 1.0;
        let mut cost = 0.0;
        for side in 0..2 {
            let (tau1, tau2) = mm.taus(side);
            let (_, om) = mm.side(side);
            if let MeanBlock::Full(g) = &self.mean[side] {
                pr.set_hermitian(&mut x, *g, &linalg::identity(n + 1));
                cost += tau1 * (n + 1) as f64;
            }
            let blk = &self.second[side];
            pr.set_hermitian(&mut x, blk.b, &linalg::scaled_identity(n, -b));
            cost += 2.0 * b * linalg::trace_re(om);
            if let Some((a, c)) = blk.outer {
                let d = linalg::scaled_identity(n, b + 1.0);
                pr.set_hermitian(&mut x, a, &d);
                pr.set_hermitian(&mut x, c, &d);
                cost += tau2 * 2.0 * n as f64 * (b + 1.0);
            }
        }
        let mu = 2.0 * (cost + alpha) / mm.epsilon;
        pr.set_scalar(&mut x, self.alpha, alpha);
        pr.set_scalar(&mut x, self.mu, mu);
        pr.set_scalar(&mut x, self.nu, (mu - alpha) / p.sigma_e2 + 1.0);
        x
    }

    fn variables(&self, x: &impl Assignment) -> RobustVariables {
        let n = self.n;
        let mut gamma = Vec::with_capacity(2);
        let mut phi = Vec::with_capacity(2);
        for side in 0..2 {
            gamma.push(match &self.mean[side] {
                MeanBlock::Full(g) => x.hermitian(*g),
                MeanBlock::Free(v) => rank_one_mean_block(&x.vector(*v)),
            });
            let blk = &self.second[side];
            let b = x.hermitian(blk.b);
            let (a, c) = match blk.outer {
                Some((a, c)) => (x.hermitian(a), x.hermitian(c)),
                None => {
                    let abs = matrix_abs(&b);
                    (abs.clone(), abs)
                }
            };
            let mut m = CMat::zeros(2 * n, 2 * n);
            m.view_mut((0, 0), (n, n)).copy_from(&a);
            m.view_mut((0, n), (n, n)).copy_from(&b);
            m.view_mut((n, 0), (n, n)).copy_from(&b);
            m.view_mut((n, n), (n, n)).copy_from(&c);
            phi.push(hermitize(&m));
        }
        let alpha = x.scalar(self.alpha);
        RobustVariables {
            q_a: hermitize(&x.hermitian(self.q[0])),
            q_b: hermitize(&x.hermitian(self.q[1])),
            nu_e: x.scalar(self.nu),
            mu: x.scalar(self.mu),
            alpha_a: alpha / 2.0,
            alpha_b: alpha / 2.0,
            gamma_blk_a: gamma[0].clone(),
            gamma_blk_b: gamma[1].clone(),
            phi_blk_a: phi[0].clone(),
            phi_blk_b: phi[1].clone(),
        }
    }
}

/// PSD completion `w w^H`, `w = [lambda / sqrt(t); sqrt(t)]`, of an eliminated
/// mean block. Its diagonal carries no cost when the mean radius is zero.
fn rank_one_mean_block(lambda: &CVec) -> CMat {
    let n = lambda.len();
    let t = lambda.norm().max(1.0);
    let mut w = CVec::zeros(n + 1);
    for k in 0..n {
        w[k] = lambda[k] / C64::new(t.sqrt(), 0.0);
    }
    w[n] = C64::new(t.sqrt(), 0.0);
    outer(&w)
}

/// `|B| = V |D| V^H`; `[[|B|, B], [B, |B|]]` is PSD for Hermitian `B`.
fn matrix_abs(b: &CMat) -> CMat {
    let (d, v) = linalg::eigh(b);
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    hermitize(&linalg::from_eig(&abs, &v))
}

/// The box safeguard is needed when some `B_i` has a cost-free recession
/// direction: zero second-moment radius and a singular second moment.
fn box_radius(p: &SystemParams, mm: &MomentModel) -> Option<f64> {
    let singular = (0..2).any(|side| {
        let (_, om) = mm.side(side);
        let (_, tau2) = mm.taus(side);
        tau2 == 0.0 && linalg::min_eig(om) <= 1e-12 * linalg::spectral_norm_herm(om).max(1.0)
    });
    singular.then(|| {
        let om = linalg::spectral_norm_herm(&mm.omega_a).max(linalg::spectral_norm_herm(&mm.omega_b));
        let pmax = p.p_a.max(p.p_b);
        1e3 * (1.0 + pmax * (1.0 + om) / (mm.epsilon * p.sigma_e2))
    })
}

fn infeasible(mm: &MomentModel, detail: String) -> Error {
    Error::RobustInfeasible {
        epsilon: mm.epsilon,
        tau1: mm.max_tau1(),
        tau2: mm.max_tau2(),
        detail,
    }
}

impl Program {
    fn solve_at(
        &self,
        anchor: &RobustAnchor,
        ch: &ChannelSet,
        p: &SystemParams,
        mm: &MomentModel,
        opts: &SolveOptions,
    ) -> Result<(RobustVariables, ConicSolution)> {
        let lin = linearize_phi2(anchor, ch, p);
        let pr = self.at_anchor(&lin, ch, p);
        let mut so = opts.clone();
        if so.start.is_none() {
            so.start = Some(self.analytic_start(p, mm));
        }
        if so.box_bound.is_none() {
            so.box_bound = box_radius(p, mm);
        }
        let sol = conic::solve(&pr, &so)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                return Err(infeasible(
                    mm,
                    format!("no strictly feasible point (shift {:?})", sol.infeasibility),
                ))
            }
            SolveStatus::MaxIter => {
                return Err(Error::Conic(format!(
                    "robust subproblem did not converge within {} Newton steps",
                    sol.newton_steps
                )))
            }
        }
        Ok((self.variables(&sol), sol))
    }
}

/// One convex subproblem: maximizes `phi1` minus the linearization of `phi2`
/// at `anchor` subject to every constraint of the safe restriction.
pub fn solve_robust_subproblem(
    anchor: &RobustAnchor,
    ch: &ChannelSet,
    p: &SystemParams,
    mm: &MomentModel,
) -> Result<RobustVariables> {
    p.validate()?;
    ch.validate(p)?;
    mm.validate(p.n_tx)?;
    let prog = Program::build(p, mm, &build_ambiguity(mm));
    let (vars, _) = prog.solve_at(anchor, ch, p, mm, &SolveOptions::default())?;
    checked(vars, p, mm)
}

fn checked(vars: RobustVariables, p: &SystemParams, mm: &MomentModel) -> Result<RobustVariables> {
    let vars = mu_positivity_guard(&vars, mm)?;
    let audit = constraint_audit(&vars, p, mm);
    if !audit.passes() {
        return Err(Error::Consistency(format!(
            "robust solution fails the constraint audit: {audit:?}"
        )));
    }
    Ok(vars)
}

/// Anchor of the first linearization: the perfect-CSI design computed with
/// Eve's channels replaced by their mean estimates, and the Eve SNR it gives.
pub fn cold_start(ch: &ChannelSet, p: &SystemParams, mm: &MomentModel) -> Result<RobustAnchor> {
    let pair = nonrobust_design(ch, p, mm)?.0;
    let nu_e = eve_energy(&pair, &mm.xi_a, &mm.xi_b) / p.sigma_e2;
    Ok(RobustAnchor {
        q_a: pair.q_a,
        q_b: pair.q_b,
        nu_e,
    })
}

/// Perfect-CSI alternating DC design that treats the mean estimates as the
/// true Eve channels, with the secrecy rate it claims for itself (bits).
pub fn nonrobust_design(ch: &ChannelSet, p: &SystemParams, mm: &MomentModel) -> Result<(CovariancePair, f64)> {
    let nominal = ch.with_eve(mm.xi_a.clone(), mm.xi_b.clone());
    let rp = reduce(&nominal, p)?;
    let (w, _) = adc_solve(&rp, &default_init(&rp), 1e-6, 100)?;
    let pair = lift(&w, &rp)?;
    let r_s = crate::model::rates(&pair, &nominal, p)?.sum_secrecy_rate();
    Ok((pair, r_s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustOptions {
    /// Stop once an outer iteration gains less than this many bits.
    pub tol: f64,
    pub max_iter: usize,
    pub solve: SolveOptions,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 50,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustResult {
    pub variables: RobustVariables,
    /// Certified secrecy rate `R_a + R_b - log2(1 + nu_e)` in bits/s/Hz.
    pub r_s: f64,
    /// Certified rate after each accepted outer iteration.
    pub dc_trace: Vec<f64>,
    pub converged: bool,
    pub audit: ConstraintAudit,
    pub prechange: PrechangeCheck,
    pub newton_steps: usize,
}

impl RobustResult {
    pub fn design(&self) -> super::Design {
        super::Design {
            pair: self.variables.pair(),
            r_s: self.r_s,
        }
    }
}

/// Successive linearization of the safe restriction from the cold start.
pub fn robust_dc_solve(
    ch: &ChannelSet,
    p: &SystemParams,
    mm: &MomentModel,
    tol: f64,
    max_iter: usize,
) -> Result<RobustResult> {
    robust_dc_solve_with(
        ch,
        p,
        mm,
        None,
        &RobustOptions {
            tol,
            max_iter,
            ..RobustOptions::default()
        },
    )
}

/// As [`robust_dc_solve`] with an optional explicit first anchor. An outer
/// iteration whose certified rate falls below the previous one (possible only
/// through solver round-off) ends the loop without being accepted.
pub fn robust_dc_solve_with(
    ch: &ChannelSet,
    p: &SystemParams,
    mm: &MomentModel,
    anchor: Option<RobustAnchor>,
    opts: &RobustOptions,
) -> Result<RobustResult> {
    p.validate()?;
    ch.validate(p)?;
    mm.validate(p.n_tx)?;
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let prog = Program::build(p, mm, &build_ambiguity(mm));
    let mut anchor = match anchor {
        Some(a) => a,
        None => cold_start(ch, p, mm)?,
    };
    let mut best: Option<RobustVariables> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut steps = 0;
    for _ in 0..opts.max_iter {
        let (vars, sol) = prog.solve_at(&anchor, ch, p, mm, &opts.solve)?;
        steps += sol.newton_steps;
        let vars = checked(vars, p, mm)?;
        let value = robust_objective(&vars.q_a, &vars.q_b, vars.nu_e, ch, p);
        if let Some(&prev) = trace.last() {
            if value < prev {
                converged = true;
                break;
            }
        }
        let gain = trace.last().map(|prev| value - prev);
        trace.push(value);
        anchor = RobustAnchor {
            q_a: vars.q_a.clone(),
            q_b: vars.q_b.clone(),
            nu_e: vars.nu_e,
        };
        best = Some(vars);
        if gain.is_some_and(|g| g < opts.tol) {
            converged = true;
            break;
        }
    }
    let variables = best.ok_or_else(|| Error::Consistency("no accepted robust iterate".into()))?;
    let audit = constraint_audit(&variables, p, mm);
    let prechange = prechange_check(&variables, p, mm);
    Ok(RobustResult {
        r_s: *trace.last().unwrap_or(&f64::NAN),
        dc_trace: trace,
        converged,
        audit,
        prechange,
        newton_steps: steps,
        variables,
    })
}

/// Rechecks that the S-procedure multiplier is strictly positive.
///
/// Writing `kappa = alpha - Σ_i (2 Re(lambda_i^H xi_i) + 2 Re Tr(B_i Omega_i))`,
/// the budget forces `kappa <= epsilon mu`, while a vanishing multiplier would
/// force `kappa >= mu`; so `kappa <= epsilon mu` with `epsilon < 1` rules it
/// out. When the constant pairing matrices are PSD this reduces to
/// `alpha_a + alpha_b <= epsilon mu`.
pub fn mu_positivity_guard(vars: &RobustVariables, mm: &MomentModel) -> Result<RobustVariables> {
    if !(vars.mu >= 1e-10) {
        return Err(Error::Consistency(format!(
            "S-procedure multiplier not positive: mu = {}",
            vars.mu
        )));
    }
    let kappa = nominal_dual_value(vars, mm);
    if kappa > mm.epsilon * vars.mu + 1e-8 * vars.mu.max(1.0) {
        return Err(Error::Consistency(format!(
            "dual value at the nominal moments {kappa} exceeds epsilon * mu = {}",
            mm.epsilon * vars.mu
        )));
    }
    Ok(vars.clone())
}

fn nominal_dual_value(vars: &RobustVariables, mm: &MomentModel) -> f64 {
    let mut kappa = vars.alpha();
    for side in 0..2 {
        let (xi, om) = mm.side(side);
        kappa -= 2.0 * vars.lambda(side).dotc(xi).re;
        kappa -= 2.0 * linalg::re_trace_product(&vars.b(side), om);
    }
    kappa
}

/// Constraint residuals recomputed from the variable values alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    /// Largest eigenvalue of `[[2B, lambda], [lambda^H, -alpha]]` (must be <= 0).
    pub homogeneous_max_eig: f64,
    /// Largest eigenvalue of `[[2B + Q, lambda], [lambda^H, mu - alpha - sigma_e^2 nu_e]]`.
    pub coupled_max_eig: f64,
    /// Smallest eigenvalue over `Q_a, Q_b, Gamma_a, Gamma_b, Phi_a, Phi_b`.
    pub psd_min_eig: f64,
    /// `epsilon mu - Σ Tr(Gamma Psi + Phi Xi) - alpha` (must be >= 0).
    pub budget_slack: f64,
    /// `min_i P_i - Tr Q_i`.
    pub power_slack: f64,
    pub mu: f64,
    pub nu_e: f64,
}

impl ConstraintAudit {
    pub fn passes(&self) -> bool {
        self.homogeneous_max_eig <= 1e-7
            && self.coupled_max_eig <= 1e-7
            && self.psd_min_eig >= -1e-9
            && self.budget_slack >= -1e-6 * self.mu.max(1.0)
            && self.power_slack >= -1e-9
            && self.mu >= 1e-10
            && self.nu_e >= -1e-12
    }
}

fn block_matrix(vars: &RobustVariables, with_q: bool, corner: f64, scale: f64) -> CMat {
    let n = vars.n();
    let mut m = CMat::zeros(2 * n + 1, 2 * n + 1);
    for side in 0..2 {
        let mut d = vars.b(side) * C64::new(2.0 * scale, 0.0);
        if with_q {
            d += vars.q(side);
        }
        m.view_mut((side * n, side * n), (n, n)).copy_from(&d);
        let lam = vars.lambda(side) * C64::new(scale, 0.0);
        for k in 0..n {
            m[(side * n + k, 2 * n)] = lam[k];
            m[(2 * n, side * n + k)] = lam[k].conj();
        }
    }
    m[(2 * n, 2 * n)] = C64::new(corner, 0.0);
    hermitize(&m)
}

fn dual_cost(vars: &RobustVariables, amb: &AmbiguityConstants, scale: f64) -> f64 {
    (0..2)
        .map(|s| {
            scale
                * (linalg::re_trace_product(vars.gamma_blk(s), amb.psi(s))
                    + linalg::re_trace_product(vars.phi_blk(s), amb.xi_mat(s)))
        })
        .sum()
}

pub fn constraint_audit(vars: &RobustVariables, p: &SystemParams, mm: &MomentModel) -> ConstraintAudit {
    let amb = build_ambiguity(mm);
    let alpha = vars.alpha();
    let homogeneous = block_matrix(vars, false, -alpha, 1.0);
    let coupled = block_matrix(vars, true, vars.mu - alpha - p.sigma_e2 * vars.nu_e, 1.0);
    let psd_min_eig = [
        &vars.q_a,
        &vars.q_b,
        &vars.gamma_blk_a,
        &vars.gamma_blk_b,
        &vars.phi_blk_a,
        &vars.phi_blk_b,
    ]
    .iter()
    .map(|m| linalg::min_eig(m))
    .fold(f64::INFINITY, f64::min);
    ConstraintAudit {
        homogeneous_max_eig: linalg::max_eig(&homogeneous),
        coupled_max_eig: linalg::max_eig(&coupled),
        psd_min_eig,
        budget_slack: mm.epsilon * vars.mu - dual_cost(vars, &amb, 1.0) - alpha,
        power_slack: (p.p_a - linalg::trace_re(&vars.q_a)).min(p.p_b - linalg::trace_re(&vars.q_b)),
        mu: vars.mu,
        nu_e: vars.nu_e,
    }
}

/// The same point mapped back to the variables before the change of
/// variables (`mu_bar = 1 / mu`, every dual block divided by `mu`), with the
/// constraints written in their original form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrechangeCheck {
    pub homogeneous_max_eig: f64,
    /// Largest eigenvalue of
    /// `[[2B_bar, lambda_bar], [lambda_bar^H, 1 - alpha_bar]] + mu_bar diag(Q, -sigma_e^2 nu_e)`.
    pub coupled_max_eig: f64,
    /// `Σ Tr(Gamma_bar Psi + Phi_bar Xi) + alpha_bar`, required `<= epsilon`.
    pub budget: f64,
    /// Largest mismatch between these residuals rescaled by `mu` and the
    /// residuals of the changed form. Zero up to round-off when both forms
    /// describe the same set.
    pub discrepancy: f64,
}

pub fn prechange_check(vars: &RobustVariables, p: &SystemParams, mm: &MomentModel) -> PrechangeCheck {
    let amb = build_ambiguity(mm);
    let mu_bar = 1.0 / vars.mu;
    let alpha_bar = vars.alpha() * mu_bar;
    let homogeneous = block_matrix(vars, false, -alpha_bar, mu_bar);
    let mut coupled = block_matrix(vars, false, 1.0 - alpha_bar, mu_bar);
    let n = vars.n();
    for side in 0..2 {
        let mut blk = coupled.view((side * n, side * n), (n, n)).into_owned();
        blk += vars.q(side) * C64::new(mu_bar, 0.0);
        coupled.view_mut((side * n, side * n), (n, n)).copy_from(&blk);
    }
    coupled[(2 * n, 2 * n)] -= C64::new(mu_bar * p.sigma_e2 * vars.nu_e, 0.0);
    let budget = dual_cost(vars, &amb, mu_bar) + alpha_bar;
    let post = constraint_audit(vars, p, mm);
    let pre_h = linalg::max_eig(&homogeneous);
    let pre_c = linalg::max_eig(&coupled);
    let discrepancy = [
        (pre_h * vars.mu - post.homogeneous_max_eig).abs(),
        (pre_c * vars.mu - post.coupled_max_eig).abs(),
        ((mm.epsilon - budget) * vars.mu - post.budget_slack).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    PrechangeCheck {
        homogeneous_max_eig: pre_h,
        coupled_max_eig: pre_c,
        budget,
        discrepancy,
    }
}
