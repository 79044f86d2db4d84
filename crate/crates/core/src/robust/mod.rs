//! Secrecy design when only moment estimates of Eve's channels are known.
//!
//! Eve's channels are random with a mean and second moment known up to given
//! radii. The design maximizes a certified secrecy rate `r_s` such that the
//! secrecy outage probability stays below `epsilon` for every distribution
//! consistent with the moments. The chance constraint is replaced by a
//! duality-based LMI restriction ([`program`]) whose every feasible point is
//! safe, and the resulting difference-of-concave objective is handled by
//! successive linearization.

mod program;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, hermitize, outer, quad_form, CMat, CVec, C64, LN2};
use crate::model::{ChannelSet, SystemParams};

pub use program::{
    cold_start, constraint_audit, mu_positivity_guard, nonrobust_design, prechange_check, robust_dc_solve,
    robust_dc_solve_with, solve_robust_subproblem, ConstraintAudit, PrechangeCheck, RobustOptions, RobustResult,
};
pub use sampling::{
    histogram, histogram_csv, outage_csv, outage_rate, sample_ambiguous_eve, sample_families, secrecy_samples,
    verify_outage, Design, EveDraw, EveFamily, FamilyDraws, HistogramBin, OutageReport,
};

/// Moment estimates of Eve's channels and the radii bounding their error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentModel {
    #[serde(with = "crate::serde_complex::vector")]
    pub xi_a: CVec,
    #[serde(with = "crate::serde_complex::vector")]
    pub xi_b: CVec,
    #[serde(with = "crate::serde_complex::matrix")]
    pub omega_a: CMat,
    #[serde(with = "crate::serde_complex::matrix")]
    pub omega_b: CMat,
    /// Radius on the mean (Euclidean norm).
    pub tau_1a: f64,
    pub tau_1b: f64,
    /// Radius on the second moment (spectral norm).
    pub tau_2a: f64,
    pub tau_2b: f64,
    /// Outage threshold.
    pub epsilon: f64,
}

impl MomentModel {
    /// Identical estimates for both links: `xi = s (1 + j) 1_N` and
    /// `Omega = xi xi^H + rho I`.
    pub fn isotropic(n: usize, xi_scale: f64, rho: f64, tau1: f64, tau2: f64, epsilon: f64) -> Self {
        let xi = CVec::from_element(n, C64::new(xi_scale, xi_scale));
        let omega = outer(&xi) + linalg::scaled_identity(n, rho);
        Self {
            xi_a: xi.clone(),
            xi_b: xi,
            omega_a: omega.clone(),
            omega_b: omega,
            tau_1a: tau1,
            tau_1b: tau1,
            tau_2a: tau2,
            tau_2b: tau2,
            epsilon,
        }
    }

    pub fn n(&self) -> usize {
        self.xi_a.len()
    }

    /// Same estimates with both radius pairs replaced.
    pub fn with_radii(&self, tau1: f64, tau2: f64) -> Self {
        Self {
            tau_1a: tau1,
            tau_1b: tau1,
            tau_2a: tau2,
            tau_2b: tau2,
            ..self.clone()
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn max_tau1(&self) -> f64 {
        self.tau_1a.max(self.tau_1b)
    }

    pub fn max_tau2(&self) -> f64 {
        self.tau_2a.max(self.tau_2b)
    }

    /// `Omega_i - xi_i xi_i^H`, the covariance implied by the estimates.
    pub fn covariance(&self, side: usize) -> CMat {
        let (xi, om) = self.side(side);
        hermitize(&(om - outer(xi)))
    }

    pub(crate) fn side(&self, side: usize) -> (&CVec, &CMat) {
        if side == 0 {
            (&self.xi_a, &self.omega_a)
        } else {
            (&self.xi_b, &self.omega_b)
        }
    }

    pub(crate) fn taus(&self, side: usize) -> (f64, f64) {
        if side == 0 {
            (self.tau_1a, self.tau_2a)
        } else {
            (self.tau_1b, self.tau_2b)
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for side in 0..2 {
            let (xi, om) = self.side(side);
            check_len("moment mean length", n, xi.len())?;
            check_len("second moment rows", n, om.nrows())?;
            check_len("second moment cols", n, om.ncols())?;
            if linalg::hermitian_deviation(om) > 1e-9 * linalg::frobenius(om).max(1.0) {
                return Err(Error::InvalidParameter(
                    "second moment estimate is not Hermitian".into(),
                ));
            }
            let floor = linalg::min_eig(&self.covariance(side));
            if floor < -1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "second moment does not dominate the mean outer product (min eigenvalue {floor})"
                )));
            }
        }
        for (name, t) in [
            ("tau_1a", self.tau_1a),
            ("tau_1b", self.tau_1b),
            ("tau_2a", self.tau_2a),
            ("tau_2b", self.tau_2b),
        ] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {t}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// A distribution's moments at the edge of the ambiguity set: the mean is
    /// pushed outward along `xi` by up to `tau1` and the second moment grows by
    /// the remaining spectral-norm budget as extra isotropic variance. The
    /// returned model has zero radii and describes the shifted distribution.
    pub fn perturbed(&self) -> Self {
        let mut out = self.clone();
        for side in 0..2 {
            let (xi, om) = self.side(side);
            let (tau1, tau2) = self.taus(side);
            let norm = xi.norm();
            let dir = if norm > 0.0 {
                xi / C64::new(norm, 0.0)
            } else {
                let mut e = CVec::zeros(xi.len());
                e[0] = C64::new(1.0, 0.0);
                e
            };
            // Keep the rank-one change of the mean outer product inside tau2.
            let shift = tau1.min((norm * norm + tau2).sqrt() - norm).max(0.0);
            let xi_new = xi + dir * C64::new(shift, 0.0);
            let d = outer(&xi_new) - outer(xi);
            let delta = (tau2 - linalg::spectral_norm_herm(&d)).max(0.0);
            let om_new = hermitize(&(om + d + linalg::scaled_identity(xi.len(), delta)));
            if side == 0 {
                out.xi_a = xi_new;
                out.omega_a = om_new;
            } else {
                out.xi_b = xi_new;
                out.omega_b = om_new;
            }
        }
        out.with_radii(0.0, 0.0)
    }
}

/// Constant matrices pairing the dual blocks with the moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityConstants {
    /// `[[tau1 I, -xi], [-xi^H, tau1]]`, size `N+1`.
    pub psi_a: CMat,
    pub psi_b: CMat,
    /// `[[tau2 I, -Omega], [-Omega, tau2 I]]`, size `2N`.
    pub xi_mat_a: CMat,
    pub xi_mat_b: CMat,
}

impl AmbiguityConstants {
    pub fn psi(&self, side: usize) -> &CMat {
        if side == 0 {
            &self.psi_a
        } else {
            &self.psi_b
        }
    }

    pub fn xi_mat(&self, side: usize) -> &CMat {
        if side == 0 {
            &self.xi_mat_a
        } else {
            &self.xi_mat_b
        }
    }
}

pub fn build_ambiguity(mm: &MomentModel) -> AmbiguityConstants {
    let n = mm.n();
    let build = |side: usize| {
        let (xi, om) = mm.side(side);
        let (t1, t2) = mm.taus(side);
        let mut psi = CMat::zeros(n + 1, n + 1);
        for k in 0..n {
            psi[(k, k)] = C64::new(t1, 0.0);
            psi[(k, n)] = -xi[k];
            psi[(n, k)] = -xi[k].conj();
        }
        psi[(n, n)] = C64::new(t1, 0.0);
        let mut big = CMat::zeros(2 * n, 2 * n);
        for k in 0..n {
            big[(k, k)] = C64::new(t2, 0.0);
            big[(n + k, n + k)] = C64::new(t2, 0.0);
        }
        let om = hermitize(om);
        big.view_mut((0, n), (n, n)).copy_from(&(-&om));
        big.view_mut((n, 0), (n, n)).copy_from(&(-&om));
        (psi, big)
    };
    let (psi_a, xi_mat_a) = build(0);
    let (psi_b, xi_mat_b) = build(1);
    AmbiguityConstants {
        psi_a,
        psi_b,
        xi_mat_a,
        xi_mat_b,
    }
}

/// Variables of the safe restriction. `alpha_a` and `alpha_b` only ever
/// appear through their sum; the solver splits it evenly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustVariables {
    #[serde(with = "crate::serde_complex::matrix")]
    pub q_a: CMat,
    #[serde(with = "crate::serde_complex::matrix")]
    pub q_b: CMat,
    /// Eve SNR slack: the certified rate is `R_a + R_b - log2(1 + nu_e)`.
    pub nu_e: f64,
    pub mu: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    /// `[[S, lambda], [lambda^H, theta]]`, size `N+1`.
    #[serde(with = "crate::serde_complex::matrix")]
    pub gamma_blk_a: CMat,
    #[serde(with = "crate::serde_complex::matrix")]
    pub gamma_blk_b: CMat,
    /// `[[A, B], [B, C]]`, size `2N`.
    #[serde(with = "crate::serde_complex::matrix")]
    pub phi_blk_a: CMat,
    #[serde(with = "crate::serde_complex::matrix")]
    pub phi_blk_b: CMat,
}

impl RobustVariables {
    pub fn n(&self) -> usize {
        self.q_a.nrows()
    }

    pub fn gamma_blk(&self, side: usize) -> &CMat {
        if side == 0 {
            &self.gamma_blk_a
        } else {
            &self.gamma_blk_b
        }
    }

    pub fn phi_blk(&self, side: usize) -> &CMat {
        if side == 0 {
            &self.phi_blk_a
        } else {
            &self.phi_blk_b
        }
    }

    pub fn q(&self, side: usize) -> &CMat {
        if side == 0 {
            &self.q_a
        } else {
            &self.q_b
        }
    }

    /// Last column of the mean block without its corner entry.
    pub fn lambda(&self, side: usize) -> CVec {
        let n = self.n();
        self.gamma_blk(side).view((0, n), (n, 1)).column(0).into_owned()
    }

    /// Upper-right block of the second-moment block.
    pub fn b(&self, side: usize) -> CMat {
        let n = self.n();
        self.phi_blk(side).view((0, n), (n, n)).into_owned()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_a + self.alpha_b
    }

    pub fn pair(&self) -> crate::model::CovariancePair {
        crate::model::CovariancePair::new(self.q_a.clone(), self.q_b.clone())
    }
}

/// Point around which the convex part of the objective is linearized.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustAnchor {
    pub q_a: CMat,
    pub q_b: CMat,
    pub nu_e: f64,
}

struct LogArgs {
    num_a: f64,
    num_b: f64,
    si_a: f64,
    si_b: f64,
}

fn log_args(q_a: &CMat, q_b: &CMat, ch: &ChannelSet, p: &SystemParams) -> LogArgs {
    let si_a = p.sigma_a2 + p.zeta_a * quad_form(q_a, &ch.h_aa).max(0.0);
    let si_b = p.sigma_b2 + p.zeta_b * quad_form(q_b, &ch.h_bb).max(0.0);
    LogArgs {
        num_a: si_a + quad_form(q_b, &ch.h_ba).max(0.0),
        num_b: si_b + quad_form(q_a, &ch.h_ab).max(0.0),
        si_a,
        si_b,
    }
}

/// Concave part of the objective in bits: the log of each receiver's total
/// received power.
pub fn phi1(q_a: &CMat, q_b: &CMat, ch: &ChannelSet, p: &SystemParams) -> f64 {
    let a = log_args(q_a, q_b, ch, p);
    (a.num_a.ln() + a.num_b.ln()) / LN2
}

/// Convex part of the objective in bits: Eve's slack term plus the log of each
/// receiver's interference-plus-noise power.
pub fn phi2(q_a: &CMat, q_b: &CMat, nu_e: f64, ch: &ChannelSet, p: &SystemParams) -> f64 {
    let a = log_args(q_a, q_b, ch, p);
    (nu_e.ln_1p() + a.si_a.ln() + a.si_b.ln()) / LN2
}

/// `R_a + R_b - log2(1 + nu_e)`, the certified rate at a feasible point.
pub fn robust_objective(q_a: &CMat, q_b: &CMat, nu_e: f64, ch: &ChannelSet, p: &SystemParams) -> f64 {
    phi1(q_a, q_b, ch, p) - phi2(q_a, q_b, nu_e, ch, p)
}

/// First-order expansion of `phi2` (bits) at an anchor:
/// `value + Re Tr(grad_q_a (Q_a - Q_a^k)) + Re Tr(grad_q_b (Q_b - Q_b^k)) + grad_nu (nu - nu^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phi2Linearization {
    pub anchor: RobustAnchor,
    pub value: f64,
    pub grad_q_a: CMat,
    pub grad_q_b: CMat,
    pub grad_nu: f64,
}

impl Phi2Linearization {
    pub fn eval(&self, q_a: &CMat, q_b: &CMat, nu_e: f64) -> f64 {
        self.value
            + linalg::re_trace_product(&self.grad_q_a, &(q_a - &self.anchor.q_a))
            + linalg::re_trace_product(&self.grad_q_b, &(q_b - &self.anchor.q_b))
            + self.grad_nu * (nu_e - self.anchor.nu_e)
    }
}

pub fn linearize_phi2(at: &RobustAnchor, ch: &ChannelSet, p: &SystemParams) -> Phi2Linearization {
    let a = log_args(&at.q_a, &at.q_b, ch, p);
    let scale = |h: &CVec, c: f64| outer(h) * C64::new(c / LN2, 0.0);
    Phi2Linearization {
        anchor: at.clone(),
        value: phi2(&at.q_a, &at.q_b, at.nu_e, ch, p),
        grad_q_a: scale(&ch.h_aa, p.zeta_a / a.si_a),
        grad_q_b: scale(&ch.h_bb, p.zeta_b / a.si_b),
        grad_nu: 1.0 / ((1.0 + at.nu_e) * LN2),
    }
}
