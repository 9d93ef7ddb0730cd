//! Tanh-squashed diagonal Gaussian policy.
//!
//! The policy network maps a state to `2 * dim` outputs: the mean of the
//! pre-squash Gaussian followed by its log standard deviation.

use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - tanh(u)^2)` without cancellation for large |u|.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Reparameterized draw for a batch, plus everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct Squashed {
    pub eps: Array2<f64>,
    pub log_std_raw: Array2<f64>,
    pub std: Array2<f64>,
    pub u: Array2<f64>,
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Push `eps` through the head outputs `out = [mu | log_std]`.
pub fn squash(out: ArrayView2<f64>, eps: &Array2<f64>) -> Squashed {
    let dim = out.ncols() / 2;
    assert_eq!(eps.ncols(), dim, "noise width must match action dim");
    let mu = out.slice(s![.., ..dim]);
    let log_std_raw = out.slice(s![.., dim..]).to_owned();
    let log_std = log_std_raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    let std = log_std.mapv(f64::exp);
    let u = &mu + &(&std * eps);
    let action = u.mapv(f64::tanh);
    let mut log_prob = Array1::zeros(out.nrows());
    for i in 0..out.nrows() {
        let mut lp = 0.0;
        for j in 0..dim {
            lp += -0.5 * eps[[i, j]] * eps[[i, j]] - log_std[[i, j]] - HALF_LN_2PI - log_one_minus_tanh_sq(u[[i, j]]);
        }
        log_prob[i] = lp;
    }
    Squashed {
        eps: eps.clone(),
        log_std_raw,
        std,
        u,
        action,
        log_prob,
    }
}

/// Chain `dJ/d(action)` and `dJ/d(log_prob)` back to `dJ/d(head outputs)`.
pub fn squash_backward(sq: &Squashed, d_action: &Array2<f64>, d_log_prob: &Array1<f64>) -> Array2<f64> {
    let (n, dim) = sq.u.dim();
    let mut d_out = Array2::zeros((n, 2 * dim));
    for i in 0..n {
        for j in 0..dim {
            let a = sq.action[[i, j]];
            let du = d_action[[i, j]] * (1.0 - a * a) + d_log_prob[i] * 2.0 * sq.u[[i, j]].tanh();
            d_out[[i, j]] = du;
            let raw = sq.log_std_raw[[i, j]];
            d_out[[i, dim + j]] = if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                du * sq.std[[i, j]] * sq.eps[[i, j]] - d_log_prob[i]
            } else {
                0.0
            };
        }
    }
    d_out
}

/// Mean action `tanh(mu)`.
pub fn deterministic(out: ArrayView2<f64>) -> Array2<f64> {
    let dim = out.ncols() / 2;
    let mut a = out.slice(s![.., ..dim]).to_owned();
    Zip::from(&mut a).for_each(|v| *v = v.tanh());
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use lfrelay_core::quadrature::{integrate, QuadratureConfig};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny_std_gives_tanh_mean() {
        let out = array![[0.7, -1.3, -40.0, -25.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sq = squash(out.view(), &standard_normal(&mut rng, 1, 2));
        assert!((sq.action[[0, 0]] - 0.7f64.tanh()).abs() < 1e-7);
        assert!((sq.action[[0, 1]] - (-1.3f64).tanh()).abs() < 1e-7);
    }

    #[test]
    fn actions_strictly_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let out = Array2::from_shape_fn(
            (2000, 4),
            |(i, j)| if j < 2 { (i as f64 - 1000.0) * 0.002 } else { 0.5 },
        );
        let sq = squash(out.view(), &standard_normal(&mut rng, 2000, 2));
        assert!(sq.action.iter().all(|a| a.abs() < 1.0));
        assert!(sq.log_prob.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn stable_log_correction() {
        for u in [-30.0, -3.0, -0.1, 0.0, 0.4, 5.0, 25.0] {
            let naive = (1.0 - f64::tanh(u).powi(2)).ln();
            let stable = log_one_minus_tanh_sq(u);
            if naive.is_finite() && u.abs() < 10.0 {
                assert!((naive - stable).abs() < 1e-10, "u={u}");
            }
            assert!(stable.is_finite());
        }
    }

    #[test]
    fn monte_carlo_entropy_matches_quadrature() {
        let (mu, log_std) = ([0.3, -0.6], [-0.5, 0.2]);
        // per dimension: H = 0.5 ln(2 pi e s^2) + E[ln(1 - tanh(u)^2)], u ~ N(mu, s^2)
        let mut analytic = 0.0;
        for j in 0..2 {
            let s: f64 = f64::exp(log_std[j]);
            let m = mu[j];
            let pdf = |u: f64| (-0.5 * ((u - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            let e = integrate(
                |u| pdf(u) * log_one_minus_tanh_sq(u),
                m - 12.0 * s,
                m + 12.0 * s,
                &QuadratureConfig::default(),
            )
            .unwrap()
            .value;
            analytic += 0.5 + HALF_LN_2PI + log_std[j] + e;
        }
        let n = 100_000;
        let out = Array2::from_shape_fn((n, 4), |(_, j)| if j < 2 { mu[j] } else { log_std[j - 2] });
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sq = squash(out.view(), &standard_normal(&mut rng, n, 2));
        let mc = -sq.log_prob.mean().unwrap();
        assert!(((mc - analytic) / analytic).abs() < 0.01, "mc {mc} analytic {analytic}");
    }

    #[test]
    fn clamped_log_std_has_no_gradient() {
        let out = array![[0.1, 0.2, 5.0, -30.0]];
        let eps = array![[0.3, -0.4]];
        let sq = squash(out.view(), &eps);
        let d = squash_backward(&sq, &array![[1.0, 1.0]], &array![1.0]);
        assert_eq!(d[[0, 2]], 0.0);
        assert_eq!(d[[0, 3]], 0.0);
        assert!(d[[0, 0]] != 0.0);
    }
}
