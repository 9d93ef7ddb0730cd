use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::mlp::{Grads, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn corrections(&self, t: u64) -> (f64, f64) {
        let t = t as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }
}

/// Adam state for every parameter of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Mlp,
    v: Mlp,
}

impl Adam {
    pub fn new(config: AdamConfig, net: &Mlp) -> Self {
        let zero = Mlp::zeros(&net.sizes()).expect("sizes of a valid net");
        Adam {
            config,
            t: 0,
            m: zero.clone(),
            v: zero,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, g: &Grads) {
        self.t += 1;
        let c = self.config;
        let (bc1, bc2) = c.corrections(self.t);
        let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            *p -= c.lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
        };
        for (((p, m), v), g) in net
            .layers
            .iter_mut()
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
            .zip(&g.layers)
        {
            Zip::from(&mut p.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(|p, m, v, &g| upd(p, m, v, g));
            Zip::from(&mut p.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(|p, m, v, &g| upd(p, m, v, g));
        }
    }
}

/// Adam on a single scalar (the log-temperature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarAdam {
    pub config: AdamConfig,
    t: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(config: AdamConfig) -> Self {
        ScalarAdam {
            config,
            t: 0,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn step(&mut self, p: &mut f64, g: f64) {
        self.t += 1;
        let c = self.config;
        let (bc1, bc2) = c.corrections(self.t);
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * g;
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * g * g;
        *p -= c.lr * (self.m / bc1) / ((self.v / bc2).sqrt() + c.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // bias-corrected first step is lr * sign(g) (up to eps)
        let mut opt = ScalarAdam::new(AdamConfig::with_lr(0.01));
        let mut p = 1.0;
        opt.step(&mut p, 3.0);
        assert!((p - 0.99).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut opt = ScalarAdam::new(AdamConfig::with_lr(0.05));
        let mut p = 4.0;
        for _ in 0..2000 {
            let g = 2.0 * (p - 1.5);
            opt.step(&mut p, g);
        }
        assert!((p - 1.5).abs() < 1e-3);
    }

    #[test]
    fn network_step_matches_scalar_step() {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        net.layers[0].w[[0, 0]] = 2.0;
        let mut g = Grads::zeros_like(&net);
        g.layers[0].w[[0, 0]] = -0.5;
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &net);
        let mut s = ScalarAdam::new(AdamConfig::with_lr(0.1));
        let mut p = 2.0;
        for _ in 0..3 {
            opt.step(&mut net, &g);
            s.step(&mut p, -0.5);
        }
        assert_eq!(net.layers[0].w[[0, 0]], p);
        assert_eq!(net.layers[0].b[0], 0.0);
        assert_eq!(opt.steps(), 3);
    }
}
