//! Eve channel draws that match given moments, and empirical outage checks.
//!
//! Every family draws `xi + L w` where `L L^H = Omega - xi xi^H` and `w` has
//! i.i.d. zero-mean, unit-variance, circular complex entries, so all four
//! share the mean `xi` and second moment `Omega` exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MomentModel;
use crate::error::{Error, Result};
use crate::linalg::{self, sample_cn, CMat, CVec, C64, LN2};
use crate::model::{self, eve_energy, ChannelSet, CovariancePair, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EveFamily {
    Gaussian,
    /// Entries uniform on `{1, -1, j, -j}`.
    Binary,
    /// Entries uniform on a centred square in the complex plane.
    Uniform,
    /// Real and imaginary parts i.i.d. Laplace.
    Laplace,
}

impl EveFamily {
    pub const ALL: [EveFamily; 4] = [
        EveFamily::Gaussian,
        EveFamily::Binary,
        EveFamily::Uniform,
        EveFamily::Laplace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EveFamily::Gaussian => "gaussian",
            EveFamily::Binary => "binary",
            EveFamily::Uniform => "uniform",
            EveFamily::Laplace => "laplace",
        }
    }

    fn stream(self) -> u64 {
        match self {
            EveFamily::Gaussian => 1,
            EveFamily::Binary => 2,
            EveFamily::Uniform => 3,
            EveFamily::Laplace => 4,
        }
    }

    /// One zero-mean entry with `E|w|^2 = 1`.
    fn unit_entry<R: Rng + ?Sized>(self, rng: &mut R) -> C64 {
        match self {
            EveFamily::Gaussian => sample_cn(rng),
            EveFamily::Binary => match rng.random_range(0..4u8) {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(-1.0, 0.0),
                2 => C64::new(0.0, 1.0),
                _ => C64::new(0.0, -1.0),
            },
            EveFamily::Uniform => {
                // Each part has variance a^2 / 3 = 1/2.
                let a = 1.5f64.sqrt();
                C64::new(rng.random_range(-a..a), rng.random_range(-a..a))
            }
            EveFamily::Laplace => C64::new(laplace(rng, 0.5), laplace(rng, 0.5)),
        }
    }
}

/// Laplace draw with scale `b` (variance `2 b^2`) by inverting the CDF.
fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    let u: f64 = rng.random_range(-0.5..0.5);
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

impl FromStr for EveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EveFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown distribution family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveDraw {
    pub h_ae: CVec,
    pub h_be: CVec,
}

/// Draws per family, in [`EveFamily::ALL`] order.
pub type FamilyDraws = Vec<(EveFamily, Vec<EveDraw>)>;

/// Factor `L` with `L L^H = Omega - xi xi^H`, from the eigen-decomposition so
/// singular covariances are allowed.
fn moment_factor(xi: &CVec, omega: &CMat) -> Result<CMat> {
    let cov = linalg::hermitize(&(omega - linalg::outer(xi)));
    let (d, v) = linalg::eigh(&cov);
    let scale = d.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if d.first().is_some_and(|&m| m < -1e-9 * scale) {
        return Err(Error::InvalidParameter(format!(
            "second moment does not dominate the mean outer product (min eigenvalue {})",
            d[0]
        )));
    }
    let mut l = v;
    for (k, &dk) in d.iter().enumerate() {
        let s = C64::new(dk.max(0.0).sqrt(), 0.0);
        for i in 0..l.nrows() {
            l[(i, k)] *= s;
        }
    }
    Ok(l)
}

/// `count` i.i.d. draws of `(h_ae, h_be)` from one family matching the
/// moments in `mm`. The stream depends only on `rng_seed` and the family.
pub fn sample_ambiguous_eve(mm: &MomentModel, family: EveFamily, rng_seed: u64, count: usize) -> Result<Vec<EveDraw>> {
    let n = mm.n();
    let l_a = moment_factor(&mm.xi_a, &mm.omega_a)?;
    let l_b = moment_factor(&mm.xi_b, &mm.omega_b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(family.stream());
    let draw = |xi: &CVec, l: &CMat, rng: &mut ChaCha8Rng| {
        let w = CVec::from_iterator(n, (0..n).map(|_| family.unit_entry(rng)));
        xi + l * w
    };
    Ok((0..count)
        .map(|_| {
            let h_ae = draw(&mm.xi_a, &l_a, &mut rng);
            let h_be = draw(&mm.xi_b, &l_b, &mut rng);
            EveDraw { h_ae, h_be }
        })
        .collect())
}

/// Draws for all four families, sampled in parallel.
pub fn sample_families(mm: &MomentModel, rng_seed: u64, count: usize) -> Result<FamilyDraws> {
    EveFamily::ALL
        .par_iter()
        .map(|&f| Ok((f, sample_ambiguous_eve(mm, f, rng_seed, count)?)))
        .collect()
}

/// Transmit design with the secrecy rate it certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub pair: CovariancePair,
    pub r_s: f64,
}

/// Unclamped `R_a + R_b - R_e` (bits) for each draw of Eve's channels.
pub fn secrecy_samples(
    pair: &CovariancePair,
    ch: &ChannelSet,
    p: &SystemParams,
    draws: &[EveDraw],
) -> Result<Vec<f64>> {
    let legit = model::rate_a(pair, ch, p)? + model::rate_b(pair, ch, p)?;
    Ok(draws
        .par_iter()
        .map(|d| legit - (eve_energy(pair, &d.h_ae, &d.h_be) / p.sigma_e2).ln_1p() / LN2)
        .collect())
}

/// Fraction of samples whose clamped secrecy rate `[s]^+` falls below `r_s`.
pub fn outage_rate(samples: &[f64], r_s: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.iter().filter(|&&s| s.max(0.0) < r_s).count();
    hits as f64 / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub family: EveFamily,
    pub draw_count: usize,
    pub outage_rate: f64,
    pub r_s: f64,
}

pub fn verify_outage(
    design: &Design,
    ch: &ChannelSet,
    p: &SystemParams,
    draws: &FamilyDraws,
) -> Result<Vec<OutageReport>> {
    draws
        .iter()
        .map(|(family, d)| {
            let s = secrecy_samples(&design.pair, ch, p, d)?;
            Ok(OutageReport {
                family: *family,
                draw_count: d.len(),
                outage_rate: outage_rate(&s, design.r_s),
                r_s: design.r_s,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

/// Equal-width histogram over the range of the samples widened to include
/// `r_s`, so the threshold always falls inside the plotted support.
pub fn histogram(samples: &[f64], bins: usize, r_s: f64) -> Vec<HistogramBin> {
    if samples.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = samples.iter().copied().fold(r_s, f64::min);
    let hi = samples.iter().copied().fold(r_s, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let k = (((s - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_left: lo + k as f64 * width,
            bin_right: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}

/// `family,draw_count,outage_rate,r_s`.
pub fn outage_csv(reports: &[OutageReport]) -> String {
    let mut out = String::from("family,draw_count,outage_rate,r_s\n");
    for r in reports {
        let _ = writeln!(out, "{},{},{},{}", r.family.name(), r.draw_count, r.outage_rate, r.r_s);
    }
    out
}

/// `family,bin_left,bin_right,count`.
pub fn histogram_csv(rows: &[(EveFamily, Vec<HistogramBin>)]) -> String {
    let mut out = String::from("family,bin_left,bin_right,count\n");
    for (family, bins) in rows {
        for b in bins {
            let _ = writeln!(out, "{},{},{},{}", family.name(), b.bin_left, b.bin_right, b.count);
        }
    }
    out
}
