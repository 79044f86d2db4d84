//! Reference schemes the full-duplex design is compared against.

use crate::adc::{solve_dc_subproblem, SubproblemData};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitize, outer, quad_form, CMat, CVec, C64};
use crate::model::{self, ChannelSet, CovariancePair, SystemParams};

/// Orthonormal basis (N x (N-1)) of the complement of `h`, or the identity
/// when `h` vanishes.
fn null_space_basis(h: &CVec) -> CMat {
    let n = h.len();
    let norm2 = h.norm_squared();
    if norm2 == 0.0 {
        return linalg::identity(n);
    }
    let proj = linalg::identity(n) - outer(h) * C64::new(1.0 / norm2, 0.0);
    let (_, v) = linalg::eigh(&proj);
    v.columns(1, n - 1).into_owned()
}

/// Unit vector maximizing `v^H A v / v^H B v` for Hermitian `A` and positive
/// definite `B`, with the attained ratio.
pub(crate) fn top_generalized_eigvec(a: &CMat, b: &CMat) -> Result<(CVec, f64)> {
    let l = linalg::cholesky_hpd(b)
        .ok_or_else(|| Error::Consistency("generalized eigenproblem: B not positive definite".into()))?;
    let l_inv = l
        .clone()
        .solve_lower_triangular(&linalg::identity(b.nrows()))
        .ok_or_else(|| Error::Consistency("singular Cholesky factor".into()))?;
    let c = hermitize(&(&l_inv * a * l_inv.adjoint()));
    let (d, u) = linalg::eigh(&c);
    let top = d.len() - 1;
    let v = l_inv.adjoint() * u.column(top);
    let v = &v / C64::new(v.norm(), 0.0);
    Ok((v, d[top]))
}

/// Best covariance in `range(basis)` for the wiretap link
/// `log(1 + h^H Q h / s_h) - log(1 + (e^H Q e + z) / s_e)` at full power, or
/// zero when no direction earns a positive rate.
fn misose_in_subspace(basis: &CMat, h: &CVec, s_h: f64, e: &CVec, s_e: f64, z: f64, power: f64) -> Result<CMat> {
    let r = basis.ncols();
    let ht = basis.adjoint() * h;
    let et = basis.adjoint() * e;
    let eye = linalg::identity(r);
    let a = &eye + outer(&ht) * C64::new(power / s_h, 0.0);
    let b = &eye + outer(&et) * C64::new(power / (s_e + z), 0.0);
    let (v, ratio) = top_generalized_eigvec(&a, &b)?;
    if ratio <= 1.0 {
        return Ok(CMat::zeros(basis.nrows(), basis.nrows()));
    }
    let x = basis * v;
    Ok(outer(&x) * C64::new(power, 0.0))
}

/// Full duplex with each node's transmission confined to the null space of
/// its own self-interference channel, so the rates do not depend on `zeta`.
/// The two wiretap subproblems couple only through Eve's interference and are
/// solved exactly in turn (generalized eigenvector at full power) until the
/// secrecy rate stops improving. Returns the covariances and the clamped rate.
pub fn baseline_fd_zf(ch: &ChannelSet, p: &SystemParams) -> Result<(CovariancePair, f64)> {
    p.validate()?;
    ch.validate(p)?;
    if p.n_tx < 2 {
        return Err(Error::InvalidParameter(
            "zero-forcing needs at least two antennas".into(),
        ));
    }
    let basis_a = null_space_basis(&ch.h_aa);
    let basis_b = null_space_basis(&ch.h_bb);
    let secrecy = |pair: &CovariancePair| -> Result<f64> { Ok(model::rates(pair, ch, p)?.secrecy()) };
    let mut pair = CovariancePair::zeros(p.n_tx);
    let mut value = secrecy(&pair)?;
    for _ in 0..200 {
        let start = value;
        let z_b = quad_form(&pair.q_b, &ch.h_be).max(0.0);
        let q_a = misose_in_subspace(&basis_a, &ch.h_ab, p.sigma_b2, &ch.h_ae, p.sigma_e2, z_b, p.p_a)?;
        let cand = CovariancePair::new(q_a, pair.q_b.clone());
        let v = secrecy(&cand)?;
        if v >= value {
            pair = cand;
            value = v;
        }
        let z_a = quad_form(&pair.q_a, &ch.h_ae).max(0.0);
        let q_b = misose_in_subspace(&basis_b, &ch.h_ba, p.sigma_a2, &ch.h_be, p.sigma_e2, z_a, p.p_b)?;
        let cand = CovariancePair::new(pair.q_a.clone(), q_b);
        let v = secrecy(&cand)?;
        if v >= value {
            pair = cand;
            value = v;
        }
        if value - start < 1e-10 {
            break;
        }
    }
    Ok((pair, value.max(0.0)))
}

/// Per-slot rates of the half-duplex scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfDuplexRates {
    /// `[R_ab - R_e,a]^+` in the Alice-to-Bob slot.
    pub slot_ab: f64,
    /// `[R_ba - R_e,b]^+` in the Bob-to-Alice slot.
    pub slot_ba: f64,
}

impl HalfDuplexRates {
    /// Each slot occupies half the time.
    pub fn sum_secrecy_rate(&self) -> f64 {
        0.5 * (self.slot_ab + self.slot_ba)
    }
}

/// One slot: DC iterations of the rank-one subproblem with `M` built from the
/// Eve channel alone. Returns the covariance and the clamped slot rate (bits).
fn half_duplex_slot(h: &CVec, s_h: f64, e: &CVec, s_e: f64, power: f64) -> Result<(CMat, f64)> {
    let n = h.len();
    let hhat = h / C64::new(s_h.sqrt(), 0.0);
    let ehat = e / C64::new(s_e.sqrt(), 0.0);
    let rate = |q: &CMat| (quad_form(q, &hhat).max(0.0).ln_1p() - quad_form(q, &ehat).max(0.0).ln_1p()) / linalg::LN2;
    let mut q = linalg::scaled_identity(n, power / n as f64);
    let mut value = rate(&q);
    for _ in 0..500 {
        let gain = quad_form(&q, &ehat).max(0.0);
        let m = outer(&ehat) * C64::new(1.0 / (1.0 + gain), 0.0);
        let sol = solve_dc_subproblem(&SubproblemData::from_parts(hhat.clone(), m, power)?)?;
        let v = rate(&sol.w_star);
        if v < value {
            break;
        }
        let done = v - value < 1e-12;
        q = sol.w_star;
        value = v;
        if done {
            break;
        }
    }
    Ok((q, value.max(0.0)))
}

/// Half duplex in two orthogonal slots (Alice to Bob, then Bob to Alice)
/// without self-interference, with Eve decoding each slot separately.
pub fn baseline_hd(ch: &ChannelSet, p: &SystemParams) -> Result<HalfDuplexRates> {
    p.validate()?;
    ch.validate(p)?;
    let (_, slot_ab) = half_duplex_slot(&ch.h_ab, p.sigma_b2, &ch.h_ae, p.sigma_e2, p.p_a)?;
    let (_, slot_ba) = half_duplex_slot(&ch.h_ba, p.sigma_a2, &ch.h_be, p.sigma_e2, p.p_b)?;
    Ok(HalfDuplexRates { slot_ab, slot_ba })
}

/// Full-duplex alternating DC design from the isotropic start, with its
/// clamped sum secrecy rate.
pub fn fd_dc(ch: &ChannelSet, p: &SystemParams) -> Result<(CovariancePair, f64)> {
    let rp = crate::reduction::reduce(ch, p)?;
    let (w, _) = crate::adc::adc_solve(&rp, &crate::adc::default_init(&rp), 1e-6, 100)?;
    let pair = crate::reduction::lift(&w, &rp)?;
    let r = model::sum_secrecy_rate(&pair, ch, p)?;
    Ok((pair, r))
}
