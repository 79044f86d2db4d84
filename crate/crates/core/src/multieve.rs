//! Several multi-antenna eavesdroppers.
//!
//! The block update now maximizes the smallest per-Eve surrogate. Writing the
//! minimum over Eves as a minimum over convex weights `γ` on the simplex and
//! exchanging min and max turns the update into the convex dual problem
//! `min_γ g(γ)`, where each evaluation of `g` is a single-Eve rank-one
//! subproblem with the weighted matrix `Σ γ_i M_i`.

use serde::{Deserialize, Serialize};

use crate::adc::{self, AdcOptions, AdcTrace, AdcTraceRow, RankOneSolution, Side, SideView, SubproblemData};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, hermitize, quad_form, re_trace_product, CMat, CVec, C64, LN2};
use crate::model::{ChannelSet, CovariancePair, SystemParams};
use crate::reduction::{orthonormal_basis, ReducedCovariancePair, ReducedProblem};

/// One eavesdropper with `L` receive antennas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveChannel {
    /// `N x L` channel from Alice.
    #[serde(with = "crate::serde_complex::matrix")]
    pub h_ae: CMat,
    /// `N x L` channel from Bob.
    #[serde(with = "crate::serde_complex::matrix")]
    pub h_be: CMat,
    pub sigma_e2: f64,
}

impl EveChannel {
    pub fn antennas(&self) -> usize {
        self.h_ae.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvePopulation {
    pub eves: Vec<EveChannel>,
}

impl EvePopulation {
    /// The single-antenna Eve of a [`ChannelSet`] as a one-member population.
    pub fn single(ch: &ChannelSet, sigma_e2: f64) -> Self {
        Self {
            eves: vec![EveChannel {
                h_ae: CMat::from_columns(std::slice::from_ref(&ch.h_ae)),
                h_be: CMat::from_columns(std::slice::from_ref(&ch.h_be)),
                sigma_e2,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.eves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eves.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.eves.is_empty() {
            return Err(Error::InvalidParameter("eve population is empty".into()));
        }
        for e in &self.eves {
            check_len("eve channel rows", n, e.h_ae.nrows())?;
            check_len("eve channel rows", n, e.h_be.nrows())?;
            check_len("eve antenna count", e.h_ae.ncols(), e.h_be.ncols())?;
            if e.antennas() == 0 {
                return Err(Error::InvalidParameter("eve with no antennas".into()));
            }
            if !(e.sigma_e2 > 0.0) {
                return Err(Error::InvalidParameter("eve noise power must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `ln det(I + σ^{-2}(H_a^H Q_a H_a + H_b^H Q_b H_b))` in nats.
fn ln_det_rate(q_a: &CMat, q_b: &CMat, h_a: &CMat, h_b: &CMat, sigma2: f64) -> f64 {
    let l = h_a.ncols();
    let g = h_a.adjoint() * q_a * h_a + h_b.adjoint() * q_b * h_b;
    let m = linalg::identity(l) + g * C64::new(1.0 / sigma2, 0.0);
    linalg::ln_det_hpd(&m).unwrap_or_else(|| {
        // Only reachable if the covariances were not PSD; fall back to the
        // eigenvalue form, clipping at zero.
        linalg::eigh(&m).0.iter().map(|d| d.max(1e-300).ln()).sum()
    })
}

/// Rate (bits) of the `i`th Eve, a log-det over its receive antennas.
pub fn rate_eve_i(pair: &CovariancePair, eve: &EveChannel, p: &SystemParams) -> Result<f64> {
    check_len("q_a dimension", p.n_tx, pair.q_a.nrows())?;
    check_len("q_b dimension", p.n_tx, pair.q_b.nrows())?;
    check_len("eve channel rows", p.n_tx, eve.h_ae.nrows())?;
    check_len("eve channel rows", p.n_tx, eve.h_be.nrows())?;
    Ok(ln_det_rate(&pair.q_a, &pair.q_b, &eve.h_ae, &eve.h_be, eve.sigma_e2).max(0.0) / LN2)
}

/// One Eve in reduced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEve {
    pub ht_ae: CMat,
    pub ht_be: CMat,
    pub sigma_e2: f64,
}

/// Reduced problem with an Eve population. `base` carries the legitimate
/// channels; its own Eve vectors are zero and unused.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiEveProblem {
    pub base: ReducedProblem,
    pub eves: Vec<ReducedEve>,
}

/// Reduces onto the span of the legitimate channels and every Eve column. The
/// single-Eve fields of `ch` are ignored.
pub fn reduce_multieve(ch: &ChannelSet, eves: &EvePopulation, p: &SystemParams) -> Result<MultiEveProblem> {
    p.validate()?;
    eves.validate(p.n_tx)?;
    for (what, v) in [
        ("h_ab length", &ch.h_ab),
        ("h_aa length", &ch.h_aa),
        ("h_ba length", &ch.h_ba),
        ("h_bb length", &ch.h_bb),
    ] {
        check_len(what, p.n_tx, v.len())?;
    }
    let cols = |target: &CVec, si: &CVec, pick: fn(&EveChannel) -> &CMat| {
        let mut out = vec![target.clone(), si.clone()];
        for e in &eves.eves {
            let h = pick(e);
            out.extend((0..h.ncols()).map(|j| h.column(j).into_owned()));
        }
        out
    };
    let u_a = orthonormal_basis(&cols(&ch.h_ab, &ch.h_aa, |e| &e.h_ae))?;
    let u_b = orthonormal_basis(&cols(&ch.h_ba, &ch.h_bb, |e| &e.h_be))?;
    let (ad_a, ad_b) = (u_a.adjoint(), u_b.adjoint());
    let base = ReducedProblem {
        ht_ab: &ad_a * &ch.h_ab,
        ht_aa: &ad_a * &ch.h_aa,
        ht_ae: CVec::zeros(u_a.ncols()),
        ht_ba: &ad_b * &ch.h_ba,
        ht_bb: &ad_b * &ch.h_bb,
        ht_be: CVec::zeros(u_b.ncols()),
        u_a,
        u_b,
        params: *p,
    };
    let eves = eves
        .eves
        .iter()
        .map(|e| ReducedEve {
            ht_ae: &ad_a * &e.h_ae,
            ht_be: &ad_b * &e.h_be,
            sigma_e2: e.sigma_e2,
        })
        .collect();
    Ok(MultiEveProblem { base, eves })
}

impl MultiEveProblem {
    /// Per-Eve rates (nats) at a reduced point.
    fn eve_rates_nats(&self, w: &ReducedCovariancePair) -> Vec<f64> {
        self.eves
            .iter()
            .map(|e| ln_det_rate(&w.w_a, &w.w_b, &e.ht_ae, &e.ht_be, e.sigma_e2).max(0.0))
            .collect()
    }

    /// `(R_a, R_b, max_i R_ei)` in bits and the objective `min_i (R_a + R_b - R_ei)`.
    pub fn rates(&self, w: &ReducedCovariancePair) -> Result<(f64, f64, f64, f64)> {
        let legit = self.base.rates(w)?;
        let worst = self.eve_rates_nats(w).into_iter().fold(0.0, f64::max) / LN2;
        Ok((legit.r_a, legit.r_b, worst, legit.r_a + legit.r_b - worst))
    }

    pub fn objective(&self, w: &ReducedCovariancePair) -> Result<f64> {
        Ok(self.rates(w)?.3)
    }

    /// Per-Eve objectives `R_a + R_b - R_ei` (bits).
    pub fn per_eve_objectives(&self, w: &ReducedCovariancePair) -> Result<Vec<f64>> {
        let legit = self.base.rates(w)?;
        Ok(self
            .eve_rates_nats(w)
            .into_iter()
            .map(|r| legit.r_a + legit.r_b - r / LN2)
            .collect())
    }
}

/// Negative gradient of `-R_ei` w.r.t. the updated block plus the shared
/// self-interference term (nats), i.e. `-∇(R_own - R_ei)`.
pub fn build_m_i(side: Side, w: &ReducedCovariancePair, mp: &MultiEveProblem, eve: usize) -> Result<CMat> {
    mp.base.check_pair(w)?;
    let e = mp
        .eves
        .get(eve)
        .ok_or_else(|| Error::InvalidParameter(format!("no eve with index {eve}")))?;
    let (si_term, _) = SideView::new(side, w, &mp.base).si_term();
    Ok(hermitize(&(si_term + eve_term(side, w, e))))
}

fn eve_term(side: Side, w: &ReducedCovariancePair, e: &ReducedEve) -> CMat {
    let l = e.ht_ae.ncols();
    let inner = linalg::scaled_identity(l, e.sigma_e2)
        + e.ht_ae.adjoint() * &w.w_a * &e.ht_ae
        + e.ht_be.adjoint() * &w.w_b * &e.ht_be;
    let inv = linalg::inverse_hpd(&inner).expect("noise floor keeps the inner matrix positive definite");
    let h = match side {
        Side::A => &e.ht_ae,
        Side::B => &e.ht_be,
    };
    h * inv * h.adjoint()
}

/// Everything the dual problem over `γ` needs for one block update.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiEveContext {
    pub hhat: CVec,
    pub m_list: Vec<CMat>,
    /// Per-Eve constants `d_i` (nats) of the surrogates
    /// `ln(1 + ĥ^H W ĥ) - Tr(M_i W) + d_i`. All zeros gives the bare form
    /// `max_W ln(1 + ĥ^H W ĥ) - Tr(Σ γ_i M_i W)`.
    pub offsets: Vec<f64>,
    pub p_budget: f64,
}

impl MultiEveContext {
    pub fn new(hhat: CVec, m_list: Vec<CMat>, offsets: Vec<f64>, p_budget: f64) -> Result<Self> {
        if m_list.is_empty() {
            return Err(Error::InvalidParameter("no eavesdropper matrices".into()));
        }
        check_len("offset count", m_list.len(), offsets.len())?;
        for m in &m_list {
            check_len("M_i dimension", hhat.len(), m.nrows())?;
        }
        Ok(Self {
            hhat,
            m_list,
            offsets,
            p_budget,
        })
    }

    /// Context for updating one block at the anchor `w`.
    pub fn at(side: Side, w: &ReducedCovariancePair, mp: &MultiEveProblem) -> Result<Self> {
        mp.base.check_pair(w)?;
        let view = SideView::new(side, w, &mp.base);
        let hhat = view.hhat();
        let own_rate = view.own_rate(view.w_own);
        let eve_rates = mp.eve_rates_nats(w);
        let mut m_list = Vec::with_capacity(mp.eves.len());
        let mut offsets = Vec::with_capacity(mp.eves.len());
        for (i, r_e) in eve_rates.iter().enumerate() {
            let m = build_m_i(side, w, mp, i)?;
            offsets.push(own_rate - r_e + re_trace_product(&m, view.w_own));
            m_list.push(m);
        }
        Self::new(hhat, m_list, offsets, view.budget)
    }

    pub fn eves(&self) -> usize {
        self.m_list.len()
    }

    fn weighted_m(&self, gamma: &[f64]) -> CMat {
        let n = self.hhat.len();
        let mut m = CMat::zeros(n, n);
        for (g, mi) in gamma.iter().zip(&self.m_list) {
            m += mi * C64::new(*g, 0.0);
        }
        hermitize(&m)
    }

    /// Per-Eve surrogate values (nats) at a candidate block.
    pub fn surrogates(&self, w: &CMat) -> Vec<f64> {
        let gain = quad_form(w, &self.hhat).max(0.0).ln_1p();
        self.m_list
            .iter()
            .zip(&self.offsets)
            .map(|(m, d)| gain - re_trace_product(m, w) + d)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights {
    pub gamma: Vec<f64>,
}

impl SimplexWeights {
    pub fn uniform(len: usize) -> Self {
        Self {
            gamma: vec![1.0 / len as f64; len],
        }
    }
}

/// Euclidean projection onto the unit simplex.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::InvalidParameter("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite entry in simplex projection".into()));
    }
    Ok(SimplexWeights {
        gamma: linalg::simplex_projection(v, 1.0),
    })
}

/// Dual function `g(γ)` (nats), its gradient and the inner maximizer.
pub fn g_and_grad(gamma: &SimplexWeights, ctx: &MultiEveContext) -> Result<(f64, Vec<f64>, RankOneSolution)> {
    check_len("gamma length", ctx.eves(), gamma.gamma.len())?;
    let sp = SubproblemData::from_parts(ctx.hhat.clone(), ctx.weighted_m(&gamma.gamma), ctx.p_budget)?;
    let sol = adc::solve_dc_subproblem(&sp)?;
    let shift: f64 = gamma.gamma.iter().zip(&ctx.offsets).map(|(g, d)| g * d).sum();
    let grad = ctx
        .m_list
        .iter()
        .zip(&ctx.offsets)
        .map(|(m, d)| d - re_trace_product(m, &sol.w_star))
        .collect();
    Ok((sol.objective + shift, grad, sol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiEveSolution {
    pub gamma: SimplexWeights,
    pub solution: RankOneSolution,
    /// `g(γ⋆)` in nats.
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the projected-gradient test passed;
    /// the best iterate is returned regardless.
    pub converged: bool,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Projected gradient descent with Armijo backtracking on `g(γ)`, starting
/// from uniform weights.
pub fn solve_multieve_subproblem(ctx: &MultiEveContext, tol: f64, max_iter: usize) -> Result<MultiEveSolution> {
    const ARMIJO: f64 = 1e-4;
    const SHRINK: f64 = 0.5;
    const MAX_BACKTRACK: usize = 60;

    let mut gamma = SimplexWeights::uniform(ctx.eves());
    let (mut g, mut grad, mut sol) = g_and_grad(&gamma, ctx)?;
    let mut best = (gamma.clone(), g, sol.clone());
    for iter in 0..max_iter {
        let full: Vec<f64> = gamma.gamma.iter().zip(&grad).map(|(x, d)| x - d).collect();
        if norm_diff(&gamma.gamma, &project_simplex(&full)?.gamma) < tol {
            return Ok(MultiEveSolution {
                gamma,
                solution: sol,
                value: g,
                iterations: iter,
                converged: true,
            });
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial: Vec<f64> = gamma.gamma.iter().zip(&grad).map(|(x, d)| x - step * d).collect();
            let cand = project_simplex(&trial)?;
            let decrease: f64 = grad
                .iter()
                .zip(cand.gamma.iter().zip(&gamma.gamma))
                .map(|(d, (c, x))| d * (c - x))
                .sum();
            let (gc, gradc, solc) = g_and_grad(&cand, ctx)?;
            if gc <= g + ARMIJO * decrease {
                accepted = Some((cand, gc, gradc, solc));
                break;
            }
            step *= SHRINK;
        }
        let Some((cand, gc, gradc, solc)) = accepted else {
            // No descent along the projected arc at machine precision.
            return Ok(MultiEveSolution {
                gamma: best.0,
                solution: best.2,
                value: best.1,
                iterations: iter,
                converged: true,
            });
        };
        gamma = cand;
        g = gc;
        grad = gradc;
        sol = solc;
        if g < best.1 {
            best = (gamma.clone(), g, sol.clone());
        }
    }
    Ok(MultiEveSolution {
        gamma: best.0,
        solution: best.2,
        value: best.1,
        iterations: max_iter,
        converged: false,
    })
}

/// Fixed-point residual of the block map, used as the stationarity test of
/// the max-min objective (which is not differentiable where Eves tie).
fn fixed_point_residual(mp: &MultiEveProblem, w: &ReducedCovariancePair, tol: f64, max_iter: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for side in [Side::A, Side::B] {
        let ctx = MultiEveContext::at(side, w, mp)?;
        let sol = solve_multieve_subproblem(&ctx, tol, max_iter)?;
        let own = match side {
            Side::A => &w.w_a,
            Side::B => &w.w_b,
        };
        // Only a gain in the surrogate minimum indicates a non-stationary point.
        let at_own = ctx.surrogates(own).into_iter().fold(f64::INFINITY, f64::min);
        let at_new = ctx
            .surrogates(&sol.solution.w_star)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if at_new > at_own + 1e-12 {
            worst = worst.max(linalg::frobenius(&(own - &sol.solution.w_star)));
        }
    }
    Ok(worst)
}

/// Statistics of the inner simplex solves collected by [`multieve_adc_solve`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiEveStats {
    pub inner_unconverged: usize,
    pub last_gamma: Vec<SimplexWeights>,
}

/// Alternating ascent of `min_i (R_a + R_b - R_ei)`; each block update solves
/// the simplex-weighted dual problem. Candidates that do not improve the true
/// objective are rejected, so the trace is monotone.
pub fn multieve_adc_solve(
    mp: &MultiEveProblem,
    init: &ReducedCovariancePair,
    opts: AdcOptions,
) -> Result<(ReducedCovariancePair, AdcTrace, MultiEveStats)> {
    const INNER_TOL: f64 = 1e-10;
    const INNER_MAX: usize = 500;
    mp.base.check_pair(init)?;
    let mut stats = MultiEveStats::default();
    let objective = |w: &ReducedCovariancePair| -> Result<AdcTraceRow> {
        let (r_a, r_b, r_e, obj) = mp.rates(w)?;
        Ok(AdcTraceRow {
            iter: 0,
            objective: obj,
            r_a,
            r_b,
            r_e,
            surrogate_a: None,
            surrogate_b: None,
        })
    };
    let mut update = |side: Side, w: &ReducedCovariancePair| {
        let ctx = MultiEveContext::at(side, w, mp)?;
        let sol = solve_multieve_subproblem(&ctx, INNER_TOL, INNER_MAX)?;
        if !sol.converged {
            stats.inner_unconverged += 1;
        }
        let surrogate = ctx
            .surrogates(&sol.solution.w_star)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            / LN2;
        stats.last_gamma.push(sol.gamma.clone());
        Ok((sol.solution.w_star, surrogate, Some(sol.solution.case_tag), false))
    };
    let stationarity = |w: &ReducedCovariancePair| fixed_point_residual(mp, w, INNER_TOL, INNER_MAX);
    let (w, trace) = adc::alternate(init, &objective, &mut update, &stationarity, opts)?;
    Ok((w, trace, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adc::{adc_solve, build_subproblem_a, default_init, solve_dc_subproblem};
    use crate::linalg::{c, frobenius, sample_cn, sample_psd};
    use crate::model::{rate_eve, sample_channels};
    use crate::reduction::{lift, reduce};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize) -> SystemParams {
        SystemParams::symmetric(n, 5.0, 0.01)
    }

    fn random_eve(rng: &mut ChaCha8Rng, n: usize, l: usize, scale: f64) -> EveChannel {
        EveChannel {
            h_ae: CMat::from_fn(n, l, |_, _| sample_cn(rng) * scale),
            h_be: CMat::from_fn(n, l, |_, _| sample_cn(rng) * scale),
            sigma_e2: 1.0,
        }
    }

    #[test]
    fn eve_rate_trivial_and_single_antenna_cases() {
        let p = params(3);
        let ch = sample_channels(1, &p);
        let pop = EvePopulation::single(&ch, 1.0);
        assert_eq!(rate_eve_i(&CovariancePair::zeros(3), &pop.eves[0], &p).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pair = CovariancePair::new(sample_psd(&mut rng, 3, 2), sample_psd(&mut rng, 3, 1));
        let a = rate_eve_i(&pair, &pop.eves[0], &p).unwrap();
        let b = rate_eve(&pair, &ch, &p).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn eve_rate_matches_eigenvalue_oracle() {
        let p = params(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eve = random_eve(&mut rng, 4, 3, 1.0);
        let pair = CovariancePair::new(sample_psd(&mut rng, 4, 2), sample_psd(&mut rng, 4, 4));
        let g = eve.h_ae.adjoint() * &pair.q_a * &eve.h_ae + eve.h_be.adjoint() * &pair.q_b * &eve.h_be;
        let (d, _) = linalg::eigh(&g);
        let expected: f64 = d.iter().map(|x| (1.0 + x / eve.sigma_e2).log2()).sum();
        assert!((rate_eve_i(&pair, &eve, &p).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn single_eve_m_matches_adc() {
        let p = params(4);
        let ch = sample_channels(5, &p);
        let rp = reduce(&ch, &p).unwrap();
        let mp = reduce_multieve(&ch, &EvePopulation::single(&ch, p.sigma_e2), &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = ReducedCovariancePair::new(sample_psd(&mut rng, 3, 2), sample_psd(&mut rng, 3, 3));
        let sp = build_subproblem_a(&w, &rp).unwrap();
        let m1 = build_m_i(Side::A, &w, &mp, 0).unwrap();
        // Same bases because the spanning columns are the same, in the same order.
        assert!(frobenius(&(m1 - &sp.m_mat)) < 1e-12);
        let ctx = MultiEveContext::at(Side::A, &w, &mp).unwrap();
        assert!((ctx.offsets[0] - sp.offset).abs() < 1e-12);
    }

    #[test]
    fn zero_eve_leaves_only_si_term() {
        let p = params(3);
        let ch = sample_channels(6, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pop = EvePopulation {
            eves: vec![random_eve(&mut rng, 3, 2, 1.0)],
        };
        pop.eves[0].h_ae.fill(c(0.0, 0.0));
        let mp = reduce_multieve(&ch, &pop, &p).unwrap();
        let w = default_init(&mp.base);
        let (si, _) = SideView::new(Side::A, &w, &mp.base).si_term();
        assert!(frobenius(&(build_m_i(Side::A, &w, &mp, 0).unwrap() - si)) < 1e-14);
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_simplex(&[1.0, 0.0, 0.0]).unwrap().gamma, vec![1.0, 0.0, 0.0]);
        assert_eq!(project_simplex(&[1.0, 1.0]).unwrap().gamma, vec![0.5, 0.5]);
        assert!(project_simplex(&[]).is_err());
    }

    fn two_eve_context(seed: u64) -> MultiEveContext {
        let p = params(3);
        let ch = sample_channels(seed, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let pop = EvePopulation {
            eves: vec![random_eve(&mut rng, 3, 1, 1.0), random_eve(&mut rng, 3, 2, 0.7)],
        };
        let mp = reduce_multieve(&ch, &pop, &p).unwrap();
        MultiEveContext::at(Side::A, &default_init(&mp.base), &mp).unwrap()
    }

    #[test]
    fn vertex_value_is_that_eves_subproblem() {
        let ctx = two_eve_context(1);
        for i in 0..2 {
            let mut gamma = vec![0.0; 2];
            gamma[i] = 1.0;
            let (g, _, _) = g_and_grad(&SimplexWeights { gamma }, &ctx).unwrap();
            let sp = SubproblemData::from_parts(ctx.hhat.clone(), ctx.m_list[i].clone(), ctx.p_budget).unwrap();
            let direct = solve_dc_subproblem(&sp).unwrap().objective + ctx.offsets[i];
            assert!((g - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn g_is_midpoint_convex_with_consistent_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..5 {
            let ctx = two_eve_context(seed);
            for _ in 0..10 {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                let ga = g_and_grad(
                    &SimplexWeights {
                        gamma: vec![a, 1.0 - a],
                    },
                    &ctx,
                )
                .unwrap()
                .0;
                let gb = g_and_grad(
                    &SimplexWeights {
                        gamma: vec![b, 1.0 - b],
                    },
                    &ctx,
                )
                .unwrap()
                .0;
                let m = 0.5 * (a + b);
                let gm = g_and_grad(
                    &SimplexWeights {
                        gamma: vec![m, 1.0 - m],
                    },
                    &ctx,
                )
                .unwrap()
                .0;
                assert!(gm <= 0.5 * (ga + gb) + 1e-8);
            }
            let x = 0.3;
            let (_, grad, _) = g_and_grad(
                &SimplexWeights {
                    gamma: vec![x, 1.0 - x],
                },
                &ctx,
            )
            .unwrap();
            let h = 1e-6;
            let gp = g_and_grad(
                &SimplexWeights {
                    gamma: vec![x + h, 1.0 - x - h],
                },
                &ctx,
            )
            .unwrap()
            .0;
            let gm = g_and_grad(
                &SimplexWeights {
                    gamma: vec![x - h, 1.0 - x + h],
                },
                &ctx,
            )
            .unwrap()
            .0;
            let fd = (gp - gm) / (2.0 * h);
            assert!((fd - (grad[0] - grad[1])).abs() < 1e-4);
        }
    }

    #[test]
    fn minimax_equality_at_solution() {
        for seed in 0..8 {
            let ctx = two_eve_context(seed);
            let sol = solve_multieve_subproblem(&ctx, 1e-10, 500).unwrap();
            let min_sur = ctx
                .surrogates(&sol.solution.w_star)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(
                (min_sur - sol.value).abs() < 1e-4,
                "seed {seed}: {min_sur} vs {}",
                sol.value
            );
            let s: f64 = sol.gamma.gamma.iter().sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_eves_give_flat_dual() {
        let p = params(3);
        let ch = sample_channels(9, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_eve(&mut rng, 3, 1, 1.0);
        let mp = reduce_multieve(
            &ch,
            &EvePopulation {
                eves: vec![e.clone(), e.clone()],
            },
            &p,
        )
        .unwrap();
        let single = reduce_multieve(&ch, &EvePopulation { eves: vec![e] }, &p).unwrap();
        let w = default_init(&mp.base);
        let ctx = MultiEveContext::at(Side::A, &w, &mp).unwrap();
        let ctx1 = MultiEveContext::at(Side::A, &default_init(&single.base), &single).unwrap();
        let v1 = solve_multieve_subproblem(&ctx1, 1e-10, 100).unwrap().value;
        for x in [0.0, 0.25, 0.8, 1.0] {
            let g = g_and_grad(
                &SimplexWeights {
                    gamma: vec![x, 1.0 - x],
                },
                &ctx,
            )
            .unwrap()
            .0;
            assert!((g - v1).abs() < 1e-9);
        }
    }

    #[test]
    fn dominated_eve_gets_no_weight() {
        let p = params(3);
        let ch = sample_channels(10, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let weak = random_eve(&mut rng, 3, 1, 1.0);
        let strong = EveChannel {
            h_ae: &weak.h_ae * c(10.0, 0.0),
            h_be: &weak.h_be * c(10.0, 0.0),
            sigma_e2: 1.0,
        };
        let mp = reduce_multieve(
            &ch,
            &EvePopulation {
                eves: vec![weak, strong],
            },
            &p,
        )
        .unwrap();
        let ctx = MultiEveContext::at(Side::A, &default_init(&mp.base), &mp).unwrap();
        let sol = solve_multieve_subproblem(&ctx, 1e-10, 500).unwrap();
        assert!(sol.gamma.gamma[1] > 0.99, "{:?}", sol.gamma);
    }

    #[test]
    fn single_eve_adc_matches_plain_adc() {
        let p = params(4);
        let ch = sample_channels(11, &p);
        let rp = reduce(&ch, &p).unwrap();
        let mp = reduce_multieve(&ch, &EvePopulation::single(&ch, p.sigma_e2), &p).unwrap();
        let (w1, t1) = adc_solve(&rp, &default_init(&rp), 1e-6, 100).unwrap();
        let (w2, t2, _) = multieve_adc_solve(&mp, &default_init(&mp.base), AdcOptions::default()).unwrap();
        let n = t1.rows.len().min(t2.rows.len());
        for k in 0..n {
            assert!((t1.rows[k].objective - t2.rows[k].objective).abs() < 1e-8);
        }
        let q1 = lift(&w1, &rp).unwrap();
        let q2 = lift(&w2, &mp.base).unwrap();
        assert!(frobenius(&(q1.q_a - q2.q_a)) < 1e-5);
    }

    #[test]
    fn three_eve_trace_is_monotone() {
        let p = params(4);
        for seed in 0..5 {
            let ch = sample_channels(seed, &p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
            let pop = EvePopulation {
                eves: (0..3).map(|i| random_eve(&mut rng, 4, 1 + i % 2, 0.8)).collect(),
            };
            let mp = reduce_multieve(&ch, &pop, &p).unwrap();
            let (_, trace, _) = multieve_adc_solve(&mp, &default_init(&mp.base), AdcOptions::default()).unwrap();
            assert!(trace.is_monotone(1e-9));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_lands_on_simplex(v in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
                let g = project_simplex(&v).unwrap().gamma;
                prop_assert!(g.iter().all(|x| *x >= 0.0));
                prop_assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                // Idempotent.
                let again = project_simplex(&g).unwrap().gamma;
                prop_assert!(norm_diff(&g, &again) < 1e-12);
            }
        }
    }
}
