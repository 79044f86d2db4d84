//! Full-duplex bidirectional wiretap system: parameters, channels, transmit
//! covariances and the rate expressions evaluated on them.
//!
//! Alice and Bob each have `N` transmit antennas and one receive antenna; a
//! single-antenna Eve listens to both directions. All rates returned by the
//! public functions are in bits/s/Hz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, hermitize, quad_form, CMat, CVec, LN2};

/// Converts a dB power figure to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Transmit antennas per legitimate node.
    pub n_tx: usize,
    pub sigma_a2: f64,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
    /// Residual self-interference factors, strictly inside (0, 1).
    pub zeta_a: f64,
    pub zeta_b: f64,
    /// Power budgets (linear scale).
    pub p_a: f64,
    pub p_b: f64,
}

impl SystemParams {
    /// Unit noise everywhere, a common SI factor and a common budget given in dB.
    pub fn symmetric(n_tx: usize, p_db: f64, zeta: f64) -> Self {
        let p = db_to_linear(p_db);
        Self {
            n_tx,
            sigma_a2: 1.0,
            sigma_b2: 1.0,
            sigma_e2: 1.0,
            zeta_a: zeta,
            zeta_b: zeta,
            p_a: p,
            p_b: p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::InvalidParameter("n_tx must be at least 1".into()));
        }
        for (name, v) in [
            ("sigma_a2", self.sigma_a2),
            ("sigma_b2", self.sigma_b2),
            ("sigma_e2", self.sigma_e2),
            ("p_a", self.p_a),
            ("p_b", self.p_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("zeta_a", self.zeta_a), ("zeta_b", self.zeta_b)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// The six channel vectors of the system, `h_xy` meaning "from x to y".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    #[serde(with = "crate::serde_complex::vector")]
    pub h_ab: CVec,
    #[serde(with = "crate::serde_complex::vector")]
    pub h_ae: CVec,
    #[serde(with = "crate::serde_complex::vector")]
    pub h_aa: CVec,
    #[serde(with = "crate::serde_complex::vector")]
    pub h_ba: CVec,
    #[serde(with = "crate::serde_complex::vector")]
    pub h_be: CVec,
    #[serde(with = "crate::serde_complex::vector")]
    pub h_bb: CVec,
}

impl ChannelSet {
    /// I.i.d. `CN(0, 1)` entries drawn in the order `h_ab, h_ae, h_aa, h_ba, h_be, h_bb`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        Self {
            h_ab: linalg::sample_cn_vec(rng, n),
            h_ae: linalg::sample_cn_vec(rng, n),
            h_aa: linalg::sample_cn_vec(rng, n),
            h_ba: linalg::sample_cn_vec(rng, n),
            h_be: linalg::sample_cn_vec(rng, n),
            h_bb: linalg::sample_cn_vec(rng, n),
        }
    }

    pub fn n(&self) -> usize {
        self.h_ab.len()
    }

    /// Copy with Eve's channels replaced.
    pub fn with_eve(&self, h_ae: CVec, h_be: CVec) -> Self {
        Self {
            h_ae,
            h_be,
            ..self.clone()
        }
    }

    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        for (what, v) in [
            ("h_ab length", &self.h_ab),
            ("h_ae length", &self.h_ae),
            ("h_aa length", &self.h_aa),
            ("h_ba length", &self.h_ba),
            ("h_be length", &self.h_be),
            ("h_bb length", &self.h_bb),
        ] {
            check_len(what, p.n_tx, v.len())?;
        }
        Ok(())
    }
}

/// Draws a channel set from a seeded ChaCha stream.
pub fn sample_channels(rng_seed: u64, p: &SystemParams) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    ChannelSet::sample(&mut rng, p.n_tx)
}

/// Transmit covariances `(Q_a, Q_b)`, stored symmetrized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariancePair {
    #[serde(with = "crate::serde_complex::matrix")]
    pub q_a: CMat,
    #[serde(with = "crate::serde_complex::matrix")]
    pub q_b: CMat,
}

impl CovariancePair {
    pub fn new(q_a: CMat, q_b: CMat) -> Self {
        Self {
            q_a: hermitize(&q_a),
            q_b: hermitize(&q_b),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q_a: CMat::zeros(n, n),
            q_b: CMat::zeros(n, n),
        }
    }

    /// Checks Hermitian symmetry, positive semidefiniteness and the budgets.
    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        for (name, q, budget) in [("q_a", &self.q_a, p.p_a), ("q_b", &self.q_b, p.p_b)] {
            check_len("covariance rows", p.n_tx, q.nrows())?;
            check_len("covariance cols", p.n_tx, q.ncols())?;
            if linalg::hermitian_deviation(q) > 1e-10 {
                return Err(Error::InvalidParameter(format!("{name} is not Hermitian")));
            }
            let (d, _) = linalg::eigh(q);
            let top = d.last().copied().unwrap_or(0.0).max(0.0);
            if d[0] < -1e-9 * top.max(f64::MIN_POSITIVE) && d[0] < -1e-300 {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not PSD (min eigenvalue {})",
                    d[0]
                )));
            }
            if linalg::trace_re(q) > budget * (1.0 + 1e-8) {
                return Err(Error::InvalidParameter(format!(
                    "{name} exceeds its power budget ({} > {budget})",
                    linalg::trace_re(q)
                )));
            }
        }
        Ok(())
    }
}

/// Per-node rates in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRates {
    pub r_a: f64,
    pub r_b: f64,
    pub r_e: f64,
}

impl LinkRates {
    /// `R_a + R_b - R_e` without the `[.]^+` clamp.
    pub fn secrecy(&self) -> f64 {
        self.r_a + self.r_b - self.r_e
    }

    pub fn sum_secrecy_rate(&self) -> f64 {
        self.secrecy().max(0.0)
    }
}

fn check_dims(pair: &CovariancePair, ch: &ChannelSet) -> Result<()> {
    let n = ch.n();
    for v in [&ch.h_ae, &ch.h_aa, &ch.h_ba, &ch.h_be, &ch.h_bb] {
        check_len("channel length", n, v.len())?;
    }
    check_len("q_a dimension", n, pair.q_a.nrows())?;
    check_len("q_a dimension", n, pair.q_a.ncols())?;
    check_len("q_b dimension", n, pair.q_b.nrows())?;
    check_len("q_b dimension", n, pair.q_b.ncols())?;
    Ok(())
}

pub fn sinr_a(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<f64> {
    check_dims(pair, ch)?;
    let q_a = hermitize(&pair.q_a);
    let q_b = hermitize(&pair.q_b);
    let signal = quad_form(&q_b, &ch.h_ba).max(0.0);
    let si = quad_form(&q_a, &ch.h_aa).max(0.0);
    Ok(signal / (p.sigma_a2 + p.zeta_a * si))
}

pub fn sinr_b(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<f64> {
    check_dims(pair, ch)?;
    let q_a = hermitize(&pair.q_a);
    let q_b = hermitize(&pair.q_b);
    let signal = quad_form(&q_a, &ch.h_ab).max(0.0);
    let si = quad_form(&q_b, &ch.h_bb).max(0.0);
    Ok(signal / (p.sigma_b2 + p.zeta_b * si))
}

pub fn rate_a(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<f64> {
    Ok(sinr_a(pair, ch, p)?.ln_1p() / LN2)
}

pub fn rate_b(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<f64> {
    Ok(sinr_b(pair, ch, p)?.ln_1p() / LN2)
}

/// Sum rate of the two-user MAC seen by Eve.
pub fn rate_eve(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<f64> {
    check_dims(pair, ch)?;
    let leak = eve_energy(pair, &ch.h_ae, &ch.h_be);
    Ok((leak / p.sigma_e2).ln_1p() / LN2)
}

/// `h_ae^H Q_a h_ae + h_be^H Q_b h_be`, the power Eve collects.
pub fn eve_energy(pair: &CovariancePair, h_ae: &CVec, h_be: &CVec) -> f64 {
    quad_form(&pair.q_a, h_ae).max(0.0) + quad_form(&pair.q_b, h_be).max(0.0)
}

pub fn rates(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<LinkRates> {
    Ok(LinkRates {
        r_a: rate_a(pair, ch, p)?,
        r_b: rate_b(pair, ch, p)?,
        r_e: rate_eve(pair, ch, p)?,
    })
}

/// `[R_a + R_b - R_e]^+` in bits/s/Hz.
pub fn sum_secrecy_rate(pair: &CovariancePair, ch: &ChannelSet, p: &SystemParams) -> Result<f64> {
    Ok(rates(pair, ch, p)?.sum_secrecy_rate())
}
