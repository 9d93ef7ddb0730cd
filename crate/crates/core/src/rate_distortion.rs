//! Binary-source information measures and the admissible rate region of the
//! lossy-forward relay link.
//!
//! A user's link triple `(R0, R1, R2)` (bits per source symbol on the S-R,
//! S-D and R-D links) is admissible for Hamming distortion `D` when there are
//! crossover probabilities `ρ1, ρ2` with
//!
//! ```text
//! R0 >= 1 - Hb(ρ1)
//! R2 >= 1 - Hb(ρ2)
//! R1 >= Hb(ρ1 * ρ2 * D) - Hb(D)
//! ```
//!
//! where `*` is binary convolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_TOL: f64 = 1e-12;
const INV_MAX_ITER: usize = 60;

/// Acceptable distortion and link rate-scaling factors for one user.
///
/// `kappa[i]` multiplies `log2(1 + γ_i)` to give the rate on link `i`
/// (0 = S-R, 1 = S-D, 2 = R-D).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionSpec {
    pub d: f64,
    #[serde(default = "unit_kappa")]
    pub kappa: [f64; 3],
}

fn unit_kappa() -> [f64; 3] {
    [1.0; 3]
}

impl DistortionSpec {
    pub fn new(d: f64) -> Result<Self> {
        let s = DistortionSpec { d, kappa: [1.0; 3] };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.d) {
            return Err(Error::invalid("distortion.d", format!("{} not in [0, 0.5]", self.d)));
        }
        if self.kappa.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::invalid("distortion.kappa", "factors must be positive"));
        }
        Ok(())
    }

    /// SNR at which link `i` becomes lossless, `2^{1/κ_i} - 1`.
    pub fn lossless_snr(&self, i: usize) -> f64 {
        (1.0 / self.kappa[i]).exp2() - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTriple {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverPair {
    pub rho1: f64,
    pub rho2: f64,
}

fn check_prob(what: &'static str, p: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&p) {
        return Err(Error::Domain { what, value: p });
    }
    Ok(())
}

#[inline]
fn hb(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[inline]
fn hb_inv(h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..INV_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hb(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < INV_TOL {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[inline]
fn conv(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_prob("probability", p, 1.0)?;
    Ok(hb(p))
}

/// Inverse of the binary entropy on its lower branch `[0, 0.5]`, by bisection.
pub fn binary_entropy_inv(h: f64) -> Result<f64> {
    check_prob("entropy", h, 1.0)?;
    Ok(hb_inv(h))
}

/// Crossover probability of two cascaded binary symmetric channels.
pub fn binary_convolution(a: f64, b: f64) -> Result<f64> {
    check_prob("probability", a, 1.0)?;
    check_prob("probability", b, 1.0)?;
    Ok(conv(a, b))
}

/// Crossover probability a link of rate `κ·log2(1 + γ)` supports.
pub fn crossover_from_snr(gamma: f64, kappa: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain {
            what: "SNR",
            value: gamma,
        });
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain {
            what: "kappa",
            value: kappa,
        });
    }
    Ok(phi(gamma, kappa))
}

#[inline]
pub(crate) fn phi(gamma: f64, kappa: f64) -> f64 {
    let rate = kappa * gamma.ln_1p() / std::f64::consts::LN_2;
    if rate >= 1.0 {
        0.0
    } else {
        hb_inv(1.0 - rate)
    }
}

/// S-D link SNR below which the user is in outage, given the crossovers of
/// the relay path.
pub fn outage_threshold_snr(rho: CrossoverPair, spec: &DistortionSpec) -> Result<f64> {
    check_prob("rho1", rho.rho1, 0.5)?;
    check_prob("rho2", rho.rho2, 0.5)?;
    spec.validate()?;
    Ok(threshold(rho.rho1, rho.rho2, spec.d, hb(spec.d), spec.kappa[1]))
}

#[inline]
pub(crate) fn threshold(rho1: f64, rho2: f64, d: f64, hb_d: f64, kappa1: f64) -> f64 {
    let excess = hb(conv(conv(rho1, rho2), d)) - hb_d;
    if excess <= 0.0 {
        0.0
    } else {
        (excess / kappa1).exp2() - 1.0
    }
}

/// Whether `rates` lets the destination reconstruct within distortion `D`.
///
/// The smallest crossovers the S-R and R-D rates allow are optimal since
/// `Hb(x * y * D)` is nondecreasing in `x` and `y` on `[0, 0.5]`.
pub fn in_admissible_region(rates: RateTriple, spec: &DistortionSpec) -> bool {
    let rho1 = hb_inv((1.0 - rates.r0).max(0.0));
    let rho2 = hb_inv((1.0 - rates.r2).max(0.0));
    let need = hb(conv(conv(rho1, rho2), spec.d)) - hb(spec.d);
    rates.r1 >= need
}
