//! Per-user outage probability of the lossy-forward relay link.
//!
//! The user is in outage when the instantaneous rate triple leaves the
//! admissible region. Conditioning on the S-R and R-D SNRs, that happens
//! exactly when the S-D SNR falls below `T(φ(γ0), φ(γ2))`, so
//!
//! ```text
//! P_out = 1 - Q0·Q2 - Q0·I2 - Q2·I0 - I02
//! ```
//!
//! with `Qi = Q(m, m·ci/γ̄i)` the probability that link `i` is lossless
//! (`ci = 2^{1/κi} - 1`) and `I2`, `I0`, `I02` the integrals of
//! `Q(m, m·T/γ̄1)` against the fading densities below the lossless points.
//! The four terms correspond to partitioning `(γ0, γ2)` by whether each
//! relay link is lossless.
//!
//! [`outage_monte_carlo`] samples the fading directly and tests region
//! membership, sharing nothing with the quadrature path except the entropy
//! primitives.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    check_shape, link_budget, AirGroundParams, GroundModel, LinkBudget, NodeLayout, RadioConfig, SnrSampler,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Partition, QuadratureConfig};
use crate::rate_distortion::{in_admissible_region, phi, threshold, DistortionSpec, RateTriple};
use crate::special::{ln_gamma, lower_gamma_ratio, upper_gamma_ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    /// The closed form with a `+2·Q0·Q2` leading term instead of `-Q0·Q2`.
    PrintedClosedForm,
    CaseDecomposition,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub value: f64,
    /// Binomial standard error; zero for deterministic quadrature.
    pub std_error: f64,
    /// Accumulated quadrature error estimate; zero for Monte Carlo.
    pub error_bound: f64,
    pub method: Method,
}

/// Contributions of the four `(ρ1, ρ2)` cases, ordered
/// `[ρ1=0 ρ2=0, ρ1=0 ρ2>0, ρ1>0 ρ2=0, ρ1>0 ρ2>0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseBreakdown {
    /// Probability mass of each case, ignoring the S-D link.
    pub probabilities: [f64; 4],
    /// Outage probability contributed by each case.
    pub contributions: [f64; 4],
    pub error_bound: f64,
}

impl CaseBreakdown {
    pub fn total(&self) -> f64 {
        self.contributions.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub samples: u64,
    pub seed: u64,
    /// Number of independent substreams the sample budget is split across.
    /// The estimate depends on this value, not on the thread count.
    pub workers: u32,
}

impl MonteCarloConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        MonteCarloConfig {
            samples,
            seed,
            workers: 8,
        }
    }
}

/// Gamma(m, mean) density with its normalizer hoisted out of the integrand.
#[derive(Clone, Copy)]
struct Density {
    ln_norm: f64,
    shape_m1: f64,
    int_power: Option<i32>,
    rate: f64,
}

impl Density {
    fn new(m: f64, mean: f64) -> Self {
        let rate = m / mean;
        let shape_m1 = m - 1.0;
        Density {
            ln_norm: m * rate.ln() - ln_gamma(m),
            shape_m1,
            int_power: (shape_m1.fract() == 0.0 && (0.0..64.0).contains(&shape_m1)).then_some(shape_m1 as i32),
            rate,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self.int_power {
            Some(k) => x.powi(k) * (self.ln_norm - self.rate * x).exp(),
            None => (self.ln_norm + self.shape_m1 * x.ln() - self.rate * x).exp(),
        }
    }
}

/// Everything shared by the quadrature routes for one user.
struct Setup {
    m: f64,
    g0: f64,
    g1: f64,
    g2: f64,
    d: f64,
    hb_d: f64,
    kappa: [f64; 3],
    c0: f64,
    c2: f64,
    pdf0: Density,
    pdf2: Density,
    q0: f64,
    q2: f64,
    p0: f64,
    p2: f64,
}

impl Setup {
    fn new(budget: &LinkBudget, spec: &DistortionSpec, m: f64) -> Result<Self> {
        budget.validate()?;
        spec.validate()?;
        check_shape(m)?;
        let c0 = spec.lossless_snr(0);
        let c2 = spec.lossless_snr(2);
        Ok(Setup {
            m,
            g0: budget.g0,
            g1: budget.g1,
            g2: budget.g2,
            d: spec.d,
            hb_d: crate::rate_distortion::binary_entropy(spec.d)?,
            kappa: spec.kappa,
            c0,
            c2,
            pdf0: Density::new(m, budget.g0),
            pdf2: Density::new(m, budget.g2),
            q0: upper_gamma_ratio(m, m * c0 / budget.g0)?,
            q2: upper_gamma_ratio(m, m * c2 / budget.g2)?,
            p0: lower_gamma_ratio(m, m * c0 / budget.g0)?,
            p2: lower_gamma_ratio(m, m * c2 / budget.g2)?,
        })
    }

    /// Probability the S-D link supports the given relay crossovers.
    #[inline]
    fn direct_ok(&self, rho1: f64, rho2: f64) -> f64 {
        let t = threshold(rho1, rho2, self.d, self.hb_d, self.kappa[1]);
        upper_gamma_ratio(self.m, self.m * t / self.g1).unwrap_or(0.0)
    }

    #[inline]
    fn direct_fails(&self, rho1: f64, rho2: f64) -> f64 {
        let t = threshold(rho1, rho2, self.d, self.hb_d, self.kappa[1]);
        lower_gamma_ratio(self.m, self.m * t / self.g1).unwrap_or(1.0)
    }

    fn breaks(&self, c: f64, mean: f64, quad: &QuadratureConfig) -> Vec<f64> {
        // toward c, where φ has unbounded slope, plus the density's scale
        let levels = if quad.abs_tol >= 1e-7 { 1 } else { 3 };
        let mut b: Vec<f64> = (1..=levels).map(|k| c * (1.0 - 0.25f64.powi(k))).collect();
        let scale = mean / self.m;
        for mult in [1.0, 4.0, 16.0] {
            if scale * mult < 0.5 * c {
                b.push(scale * mult);
            }
        }
        b.sort_by(f64::total_cmp);
        b
    }

    /// Density and φ tabulated on the fixed nodes of `[0, c]`.
    fn tabulate(&self, pdf: &Density, mean: f64, c: f64, kappa: f64, quad: &QuadratureConfig) -> Table {
        let breaks = self.breaks(c, mean, quad);
        let part = Partition::new(0.0, c, &breaks);
        let (w, rho) = part.nodes().iter().map(|&g| (pdf.eval(g), phi(g, kappa))).unzip();
        Table {
            part,
            breaks,
            pdf: *pdf,
            kappa,
            c,
            w,
            rho,
        }
    }

    /// ∫_0^c p(γ) h(φ(γ)) dγ
    fn single<H: Fn(f64) -> f64>(&self, t: &Table, h: H, quad: &QuadratureConfig) -> Result<(f64, f64)> {
        let values: Vec<f64> =
            t.w.iter()
                .zip(&t.rho)
                .map(|(w, r)| if *w == 0.0 { 0.0 } else { w * h(*r) })
                .collect();
        let (value, err) = t.part.apply(&values);
        if err <= within(quad, value) {
            return Ok((value, err));
        }
        let r = integrate_with_breaks(|g| t.pdf.eval(g) * h(phi(g, t.kappa)), 0.0, t.c, &t.breaks, quad)?;
        Ok((r.value, r.error))
    }

    /// ∫_0^{c0} ∫_0^{c2} p(γ0) p(γ2) h(φ(γ0), φ(γ2)) dγ2 dγ0.
    ///
    /// Both levels first run on the tabulated partitions; a level falls back
    /// to adaptive refinement (with φ memoized by node) only when the fixed
    /// rule misses its tolerance.
    fn double<H: Fn(f64, f64) -> f64>(
        &self,
        t0: &Table,
        t2: &Table,
        h: H,
        quad: &QuadratureConfig,
    ) -> Result<(f64, f64)> {
        let inner_cfg = quad.tightened(0.1);
        let mut values = vec![0.0; t2.w.len()];
        let mut memo: HashMap<u64, (f64, f64)> = HashMap::new();
        let mut inner_err = 0.0f64;

        let mut inner = |rho1: f64| -> Result<f64> {
            for ((v, w), r) in values.iter_mut().zip(&t2.w).zip(&t2.rho) {
                *v = if *w == 0.0 { 0.0 } else { w * h(rho1, *r) };
            }
            let (value, err) = t2.part.apply(&values);
            if err <= within(&inner_cfg, value) {
                inner_err = inner_err.max(err);
                return Ok(value);
            }
            let r = integrate_with_breaks(
                |g2| {
                    let (w, r) = *memo
                        .entry(g2.to_bits())
                        .or_insert_with(|| (t2.pdf.eval(g2), phi(g2, t2.kappa)));
                    w * h(rho1, r)
                },
                0.0,
                t2.c,
                &t2.breaks,
                &inner_cfg,
            )?;
            inner_err = inner_err.max(r.error);
            Ok(r.value)
        };

        let mut outer_values = Vec::with_capacity(t0.w.len());
        for (w, r) in t0.w.iter().zip(&t0.rho) {
            outer_values.push(if *w == 0.0 { 0.0 } else { w * inner(*r)? });
        }
        let (value, err) = t0.part.apply(&outer_values);
        if err <= within(quad, value) {
            return Ok((value, err + inner_err * self.p0));
        }

        let mut failure: Option<Error> = None;
        let outer = integrate_with_breaks(
            |g0| {
                let w0 = t0.pdf.eval(g0);
                if w0 == 0.0 || failure.is_some() {
                    return 0.0;
                }
                match inner(phi(g0, t0.kappa)) {
                    Ok(v) => w0 * v,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            0.0,
            t0.c,
            &t0.breaks,
            quad,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        // the inner error is weighted by at most the S-R mass below c0
        Ok((outer.value, outer.error + inner_err * self.p0))
    }
}

/// Tabulated integrand factors for one relay link.
struct Table {
    part: Partition,
    breaks: Vec<f64>,
    pdf: Density,
    kappa: f64,
    c: f64,
    w: Vec<f64>,
    rho: Vec<f64>,
}

fn within(quad: &QuadratureConfig, value: f64) -> f64 {
    quad.abs_tol.max(quad.rel_tol * value.abs())
}

fn finish(value: f64, error: f64, quad: &QuadratureConfig, method: Method) -> Result<OutageEstimate> {
    let slack = error.max(quad.abs_tol);
    if value < -slack || value > 1.0 + slack || !value.is_finite() {
        return Err(Error::OutOfRange { value, error: slack });
    }
    Ok(OutageEstimate {
        value: value.clamp(0.0, 1.0),
        std_error: 0.0,
        error_bound: error,
        method,
    })
}

struct Integrals {
    i0: f64,
    i2: f64,
    i02: f64,
    error: f64,
}

fn closed_form_integrals(s: &Setup, quad: &QuadratureConfig) -> Result<Integrals> {
    quad.validate()?;
    let t0 = s.tabulate(&s.pdf0, s.g0, s.c0, s.kappa[0], quad);
    let t2 = s.tabulate(&s.pdf2, s.g2, s.c2, s.kappa[2], quad);
    let (i2, e2) = s.single(&t2, |rho2| s.direct_ok(0.0, rho2), quad)?;
    let (i0, e0) = s.single(&t0, |rho1| s.direct_ok(rho1, 0.0), quad)?;
    let (i02, e02) = s.double(&t0, &t2, |r1, r2| s.direct_ok(r1, r2), quad)?;
    Ok(Integrals {
        i0,
        i2,
        i02,
        error: s.q0 * e2 + s.q2 * e0 + e02,
    })
}

/// Outage probability by quadrature of the partition-derived closed form.
pub fn outage_closed_form(
    budget: &LinkBudget,
    spec: &DistortionSpec,
    m: f64,
    quad: &QuadratureConfig,
) -> Result<OutageEstimate> {
    let s = Setup::new(budget, spec, m)?;
    let it = closed_form_integrals(&s, quad)?;
    let value = 1.0 - s.q0 * s.q2 - s.q0 * it.i2 - s.q2 * it.i0 - it.i02;
    finish(value, it.error, quad, Method::ClosedForm)
}

/// The closed form with the `1 + 2·Q0·Q2` leading terms, for comparison.
/// Not a probability in general, so the result is not range-checked.
pub fn outage_closed_form_printed(
    budget: &LinkBudget,
    spec: &DistortionSpec,
    m: f64,
    quad: &QuadratureConfig,
) -> Result<OutageEstimate> {
    let s = Setup::new(budget, spec, m)?;
    let it = closed_form_integrals(&s, quad)?;
    Ok(OutageEstimate {
        value: 1.0 + 2.0 * s.q0 * s.q2 - s.q0 * it.i2 - s.q2 * it.i0 - it.i02,
        std_error: 0.0,
        error_bound: it.error,
        method: Method::PrintedClosedForm,
    })
}

/// The four case contributions, each integrated directly as the probability
/// that the S-D link fails within that case.
pub fn outage_case_decomposition(
    budget: &LinkBudget,
    spec: &DistortionSpec,
    m: f64,
    quad: &QuadratureConfig,
) -> Result<CaseBreakdown> {
    quad.validate()?;
    let s = Setup::new(budget, spec, m)?;
    let probabilities = [s.q0 * s.q2, s.q0 * s.p2, s.p0 * s.q2, s.p0 * s.p2];

    let both_lossless = s.direct_fails(0.0, 0.0) * probabilities[0];
    let t0 = s.tabulate(&s.pdf0, s.g0, s.c0, s.kappa[0], quad);
    let t2 = s.tabulate(&s.pdf2, s.g2, s.c2, s.kappa[2], quad);
    let (b, eb) = s.single(&t2, |rho2| s.direct_fails(0.0, rho2), quad)?;
    let (c, ec) = s.single(&t0, |rho1| s.direct_fails(rho1, 0.0), quad)?;
    let (d, ed) = s.double(&t0, &t2, |r1, r2| s.direct_fails(r1, r2), quad)?;

    Ok(CaseBreakdown {
        probabilities,
        contributions: [both_lossless, s.q0 * b, s.q2 * c, d],
        error_bound: s.q0 * eb + s.q2 * ec + ed,
    })
}

/// Fraction of sampled fading triples whose rates leave the admissible
/// region.
pub fn outage_monte_carlo(
    budget: &LinkBudget,
    spec: &DistortionSpec,
    m: f64,
    mc: &MonteCarloConfig,
) -> Result<OutageEstimate> {
    budget.validate()?;
    spec.validate()?;
    if mc.samples == 0 || mc.workers == 0 {
        return Err(Error::invalid("monte_carlo", "samples and workers must be positive"));
    }
    let s0 = SnrSampler::new(budget.g0, m)?;
    let s1 = SnrSampler::new(budget.g1, m)?;
    let s2 = SnrSampler::new(budget.g2, m)?;
    let k = spec.kappa;
    let workers = mc.workers as u64;

    let failures: u64 = (0..workers)
        .into_par_iter()
        .map(|w| {
            let n = mc.samples / workers + u64::from(w < mc.samples % workers);
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(w);
            let mut count = 0u64;
            for _ in 0..n {
                let rates = RateTriple {
                    r0: k[0] * s0.sample(&mut rng).ln_1p() / std::f64::consts::LN_2,
                    r1: k[1] * s1.sample(&mut rng).ln_1p() / std::f64::consts::LN_2,
                    r2: k[2] * s2.sample(&mut rng).ln_1p() / std::f64::consts::LN_2,
                };
                if !in_admissible_region(rates, spec) {
                    count += 1;
                }
            }
            count
        })
        .sum();

    let n = mc.samples as f64;
    let p = failures as f64 / n;
    Ok(OutageEstimate {
        value: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        error_bound: 0.0,
        method: Method::MonteCarlo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutage {
    pub per_user: Vec<OutageEstimate>,
    pub sum: f64,
}

/// Closed-form outage for every user of `layout`.
pub fn system_outage(
    layout: &NodeLayout,
    radio: &RadioConfig,
    a2g: &AirGroundParams,
    ground: GroundModel,
    specs: &[DistortionSpec],
    m: f64,
    quad: &QuadratureConfig,
) -> Result<SystemOutage> {
    layout.validate()?;
    if specs.len() != layout.num_users() {
        return Err(Error::invalid(
            "distortion",
            format!("{} specs for {} users", specs.len(), layout.num_users()),
        ));
    }
    let per_user = specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let budget = link_budget(layout, radio, a2g, ground, k)?;
            outage_closed_form(&budget, spec, m, quad)
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = per_user.iter().map(|e| e.value).sum();
    Ok(SystemOutage { per_user, sum })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn no_distortion_requirement_means_no_outage() {
        let spec = DistortionSpec::new(0.5).unwrap();
        for b in [
            LinkBudget::new(0.3, 0.01, 2.0).unwrap(),
            LinkBudget::new(5.0, 0.2, 0.05).unwrap(),
        ] {
            let cf = outage_closed_form(&b, &spec, 2.0, &quad()).unwrap();
            assert!(cf.value <= 1e-8, "{}", cf.value);
            let mc = outage_monte_carlo(&b, &spec, 2.0, &MonteCarloConfig::new(20_000, 3)).unwrap();
            assert_eq!(mc.value, 0.0);
        }
    }

    #[test]
    fn lossless_relays_remove_outage() {
        let spec = DistortionSpec::new(0.1).unwrap();
        let b = LinkBudget::new(1e9, 0.1, 1e9).unwrap();
        let cf = outage_closed_form(&b, &spec, 2.0, &quad()).unwrap();
        assert!(cf.value < 1e-9, "{}", cf.value);
    }

    #[test]
    fn strong_direct_link_removes_outage() {
        let spec = DistortionSpec::new(0.1).unwrap();
        let b = LinkBudget::new(0.5, 1e8, 0.5).unwrap();
        let cf = outage_closed_form(&b, &spec, 2.0, &quad()).unwrap();
        assert!(cf.value < 1e-6);
        let mc = outage_monte_carlo(&b, &spec, 2.0, &MonteCarloConfig::new(10_000, 1)).unwrap();
        assert_eq!(mc.value, 0.0);
    }

    #[test]
    fn case_probabilities_partition() {
        let b = LinkBudget::new(0.7, 0.2, 3.1).unwrap();
        let spec = DistortionSpec::new(0.2).unwrap();
        let cases = outage_case_decomposition(&b, &spec, 2.0, &quad()).unwrap();
        assert!((cases.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(cases.contributions[0], 0.0);
        let cf = outage_closed_form(&b, &spec, 2.0, &quad()).unwrap();
        assert!((cases.total() - cf.value).abs() < 1e-7);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let b = LinkBudget::new(0.7, 0.2, 3.1).unwrap();
        let spec = DistortionSpec::new(0.2).unwrap();
        let mc = MonteCarloConfig::new(50_001, 11);
        let a = outage_monte_carlo(&b, &spec, 2.0, &mc).unwrap();
        let c = outage_monte_carlo(&b, &spec, 2.0, &mc).unwrap();
        assert_eq!(a, c);
        let other = outage_monte_carlo(&b, &spec, 2.0, &MonteCarloConfig { seed: 12, ..mc }).unwrap();
        assert_ne!(a.value, other.value);
    }

    #[test]
    fn printed_form_differs_by_three_q0q2() {
        let b = LinkBudget::new(0.7, 0.2, 3.1).unwrap();
        let spec = DistortionSpec::new(0.2).unwrap();
        let s = Setup::new(&b, &spec, 2.0).unwrap();
        let cf = outage_closed_form(&b, &spec, 2.0, &quad()).unwrap();
        let printed = outage_closed_form_printed(&b, &spec, 2.0, &quad()).unwrap();
        assert!((printed.value - cf.value - 3.0 * s.q0 * s.q2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = LinkBudget {
            g0: -1.0,
            g1: 1.0,
            g2: 1.0,
        };
        let spec = DistortionSpec::new(0.1).unwrap();
        assert!(outage_closed_form(&b, &spec, 2.0, &quad()).is_err());
        let good = LinkBudget::new(1.0, 1.0, 1.0).unwrap();
        assert!(outage_closed_form(&good, &spec, 0.3, &quad()).is_err());
        assert!(outage_monte_carlo(&good, &spec, 2.0, &MonteCarloConfig::new(0, 1)).is_err());
    }
}
