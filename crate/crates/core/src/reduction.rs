//! Dimension reduction of the covariance design.
//!
//! Every rate depends on `Q_a` only through quadratic forms in `h_ab`, `h_aa`
//! and `h_ae`, so `Q_a` can be restricted to `U_a W_a U_a^H` where `U_a` is an
//! orthonormal basis of their span (likewise for Bob). The reduced blocks are
//! at most 3x3 regardless of the antenna count.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, CMat, CVec, C64, LN2};
use crate::model::{ChannelSet, CovariancePair, LinkRates, SystemParams};

/// Orthonormal basis of the span of `columns` by modified Gram-Schmidt with one
/// re-orthogonalization pass.
///
/// A column whose residual norm falls below `1e-9` times the largest input
/// column norm is treated as linearly dependent and dropped.
pub fn orthonormal_basis(columns: &[CVec]) -> Result<CMat> {
    let Some(first) = columns.first() else {
        return Err(Error::InvalidParameter("no columns to orthonormalize".into()));
    };
    let n = first.len();
    for col in columns {
        check_len("basis column length", n, col.len())?;
    }
    let max_norm = columns.iter().map(linalg::vec_norm).fold(0.0, f64::max);
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Err(Error::DegenerateChannelSet);
    }
    let mut basis: Vec<CVec> = Vec::new();
    for col in columns {
        let mut r = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dotc(&r);
                r -= q * proj;
            }
        }
        let norm = linalg::vec_norm(&r);
        if norm > 1e-9 * max_norm {
            basis.push(r / C64::new(norm, 0.0));
        }
    }
    Ok(CMat::from_columns(&basis))
}

/// Reduced covariance blocks `W_a` (`r_a x r_a`) and `W_b` (`r_b x r_b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedCovariancePair {
    #[serde(with = "crate::serde_complex::matrix")]
    pub w_a: CMat,
    #[serde(with = "crate::serde_complex::matrix")]
    pub w_b: CMat,
}

impl ReducedCovariancePair {
    pub fn new(w_a: CMat, w_b: CMat) -> Self {
        Self {
            w_a: linalg::hermitize(&w_a),
            w_b: linalg::hermitize(&w_b),
        }
    }
}

/// Channels expressed in the reduced bases, together with the bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub u_a: CMat,
    pub u_b: CMat,
    pub ht_ab: CVec,
    pub ht_aa: CVec,
    pub ht_ae: CVec,
    pub ht_ba: CVec,
    pub ht_bb: CVec,
    pub ht_be: CVec,
    pub params: SystemParams,
}

pub fn reduce(ch: &ChannelSet, p: &SystemParams) -> Result<ReducedProblem> {
    p.validate()?;
    ch.validate(p)?;
    let u_a = orthonormal_basis(&[ch.h_ab.clone(), ch.h_aa.clone(), ch.h_ae.clone()])?;
    let u_b = orthonormal_basis(&[ch.h_ba.clone(), ch.h_bb.clone(), ch.h_be.clone()])?;
    let ad_a = u_a.adjoint();
    let ad_b = u_b.adjoint();
    Ok(ReducedProblem {
        ht_ab: &ad_a * &ch.h_ab,
        ht_aa: &ad_a * &ch.h_aa,
        ht_ae: &ad_a * &ch.h_ae,
        ht_ba: &ad_b * &ch.h_ba,
        ht_bb: &ad_b * &ch.h_bb,
        ht_be: &ad_b * &ch.h_be,
        u_a,
        u_b,
        params: *p,
    })
}

/// `Q_i = U_i W_i U_i^H`.
pub fn lift(w: &ReducedCovariancePair, rp: &ReducedProblem) -> Result<CovariancePair> {
    rp.check_pair(w)?;
    let q_a = &rp.u_a * &w.w_a * rp.u_a.adjoint();
    let q_b = &rp.u_b * &w.w_b * rp.u_b.adjoint();
    Ok(CovariancePair::new(q_a, q_b))
}

impl ReducedProblem {
    pub fn r_a(&self) -> usize {
        self.u_a.ncols()
    }

    pub fn r_b(&self) -> usize {
        self.u_b.ncols()
    }

    pub(crate) fn check_pair(&self, w: &ReducedCovariancePair) -> Result<()> {
        check_len("w_a rows", self.r_a(), w.w_a.nrows())?;
        check_len("w_a cols", self.r_a(), w.w_a.ncols())?;
        check_len("w_b rows", self.r_b(), w.w_b.nrows())?;
        check_len("w_b cols", self.r_b(), w.w_b.ncols())?;
        Ok(())
    }

    /// Per-node rates (bits) evaluated directly on the reduced channels.
    pub fn rates(&self, w: &ReducedCovariancePair) -> Result<LinkRates> {
        self.check_pair(w)?;
        let p = &self.params;
        let qf = |m: &CMat, v: &CVec| linalg::quad_form(m, v).max(0.0);
        let sinr_a = qf(&w.w_b, &self.ht_ba) / (p.sigma_a2 + p.zeta_a * qf(&w.w_a, &self.ht_aa));
        let sinr_b = qf(&w.w_a, &self.ht_ab) / (p.sigma_b2 + p.zeta_b * qf(&w.w_b, &self.ht_bb));
        let eve = (qf(&w.w_a, &self.ht_ae) + qf(&w.w_b, &self.ht_be)) / p.sigma_e2;
        Ok(LinkRates {
            r_a: sinr_a.ln_1p() / LN2,
            r_b: sinr_b.ln_1p() / LN2,
            r_e: eve.ln_1p() / LN2,
        })
    }

    /// Unclamped `R_a + R_b - R_e` in bits. This is the quantity the alternating
    /// solver ascends; the clamp only matters when it is negative.
    pub fn objective(&self, w: &ReducedCovariancePair) -> Result<f64> {
        Ok(self.rates(w)?.secrecy())
    }
}
