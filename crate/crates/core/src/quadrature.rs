//! Globally adaptive Gauss-Kronrod (10/21 point) integration.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// QUADPACK qk21 abscissae and weights.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    /// Looser settings used inside the training loop.
    pub fn relaxed() -> Self {
        QuadratureConfig {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            max_subdivisions: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::invalid("quadrature", "tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("quadrature.max_subdivisions", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn tightened(&self, factor: f64) -> Self {
        QuadratureConfig {
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One application of the 21-point Kronrod rule with its embedded 10-point
/// Gauss estimate. Returns (kronrod, |kronrod - gauss|).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over `[a, b]` starting from the partition given by
/// `breakpoints` (sorted, strictly inside `(a, b)`), bisecting the segment
/// with the largest error estimate until the tolerance is met.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut edges = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);

    let mut evaluations = 0;
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in edges.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }

    let tol = |value: f64| cfg.abs_tol.max(cfg.rel_tol * value.abs());
    let mut splits = 0;
    while total_err > tol(total) && splits < cfg.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        splits += 1;
    }

    // re-sum to shed drift from the incremental updates
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    if error > tol(value) {
        return Err(Error::NotConverged {
            achieved: error,
            requested: tol(value),
        });
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// A fixed composite Gauss-Kronrod rule whose nodes are known up front, so
/// callers can evaluate expensive factors of the integrand once and reuse
/// them across many integrals over the same interval.
#[derive(Debug, Clone)]
pub struct Partition {
    halves: Vec<f64>,
    nodes: Vec<f64>,
}

impl Partition {
    pub fn new(a: f64, b: f64, breakpoints: &[f64]) -> Self {
        let mut edges = vec![a];
        edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        edges.push(b);
        let mut halves = Vec::with_capacity(edges.len() - 1);
        let mut nodes = Vec::with_capacity(21 * (edges.len() - 1));
        for w in edges.windows(2) {
            let center = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            halves.push(half);
            nodes.push(center);
            for x in &XGK[..10] {
                nodes.push(center - half * x);
                nodes.push(center + half * x);
            }
        }
        Partition { halves, nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Composite (value, error estimate) from integrand values at [`Self::nodes`].
    pub fn apply(&self, values: &[f64]) -> (f64, f64) {
        debug_assert_eq!(values.len(), self.nodes.len());
        let (mut total, mut err) = (0.0, 0.0);
        for (half, v) in self.halves.iter().zip(values.chunks_exact(21)) {
            let mut kronrod = v[0] * WGK[10];
            let mut gauss = 0.0;
            for j in 0..10 {
                let pair = v[1 + 2 * j] + v[2 + 2 * j];
                kronrod += WGK[j] * pair;
                if j % 2 == 1 {
                    gauss += WG[j / 2] * pair;
                }
            }
            total += kronrod * half;
            err += ((kronrod - gauss) * half).abs();
        }
        (total, err)
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    integrate_with_breaks(f, a, b, &[], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - (256.0 / 8.0 - 8.0)).abs() < 1e-13);
        assert_eq!(r.evaluations, 21);
    }

    #[test]
    fn sqrt_singularity() {
        let r = integrate(|x| x.sqrt(), 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn log_endpoint_singularity() {
        // ∫0^1 ln x dx = -1
        let r = integrate(|x| x.ln(), 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn breakpoints_do_not_change_result() {
        let f = |x: f64| (-x).exp() * x.cos();
        let cfg = QuadratureConfig::default();
        let a = integrate(f, 0.0, 3.0, &cfg).unwrap().value;
        let b = integrate_with_breaks(f, 0.0, 3.0, &[0.5, 2.9, 2.99], &cfg)
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_adaptive_first_pass() {
        let f = |x: f64| (-x).exp() * (3.0 * x).sin();
        let p = Partition::new(0.0, 2.0, &[0.5, 1.5]);
        let vals: Vec<f64> = p.nodes().iter().map(|&x| f(x)).collect();
        let (v, e) = p.apply(&vals);
        let loose = QuadratureConfig {
            abs_tol: 1.0,
            rel_tol: 1.0,
            max_subdivisions: 1,
        };
        let r = integrate_with_breaks(f, 0.0, 2.0, &[0.5, 1.5], &loose).unwrap();
        assert!((v - r.value).abs() < 1e-15);
        assert!((e - r.error).abs() < 1e-15);
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_subdivisions: 2,
        };
        let err = integrate(|x| (1.0 / x).sin(), 1e-3, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
    }
}
