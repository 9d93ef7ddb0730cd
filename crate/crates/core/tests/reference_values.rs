//! Outage values computed independently with mpmath (22 digits, direct
//! integration of the outage event), frozen here.

use lfrelay_core::{
    outage_case_decomposition, outage_closed_form, outage_monte_carlo, DistortionSpec, LinkBudget, MonteCarloConfig,
    QuadratureConfig,
};

// (g0, g1, g2, m, d, kappa, outage)
type Case = (f64, f64, f64, f64, f64, [f64; 3], f64);

const CASES: [Case; 4] = [
    (2.0, 0.5, 3.0, 2.0, 0.1, [1.0, 1.0, 1.0], 0.038_246_020_070_372_86),
    (0.8, 0.2, 1.5, 1.0, 0.2, [1.0, 1.0, 1.0], 0.352_611_991_802_998_2),
    (5.0, 1.0, 0.3, 3.0, 0.05, [1.0, 1.0, 1.0], 0.102_223_150_059_855_1),
    (1.2, 0.7, 1.2, 2.0, 0.3, [0.8, 1.0, 1.25], 0.004_158_664_271_353_974),
];

fn setup(c: &Case) -> (LinkBudget, DistortionSpec) {
    let b = LinkBudget::new(c.0, c.1, c.2).unwrap();
    let s = DistortionSpec { d: c.4, kappa: c.5 };
    s.validate().unwrap();
    (b, s)
}

#[test]
fn closed_form_matches_reference() {
    let quad = QuadratureConfig::default();
    for c in &CASES {
        let (b, s) = setup(c);
        let got = outage_closed_form(&b, &s, c.3, &quad).unwrap();
        assert!((got.value - c.6).abs() < 1e-8, "{c:?}: {}", got.value);
        assert!(got.error_bound < 1e-7);
    }
}

#[test]
fn cases_match_reference() {
    let quad = QuadratureConfig::default();
    for c in &CASES {
        let (b, s) = setup(c);
        let got = outage_case_decomposition(&b, &s, c.3, &quad).unwrap().total();
        assert!((got - c.6).abs() < 1e-8, "{c:?}: {got}");
    }
}

#[test]
fn relaxed_quadrature_is_close() {
    for c in &CASES {
        let (b, s) = setup(c);
        let got = outage_closed_form(&b, &s, c.3, &QuadratureConfig::relaxed()).unwrap();
        assert!((got.value - c.6).abs() < 1e-5, "{c:?}: {}", got.value);
    }
}

#[test]
fn monte_carlo_brackets_reference() {
    for (i, c) in CASES.iter().enumerate() {
        let (b, s) = setup(c);
        let mc = outage_monte_carlo(&b, &s, c.3, &MonteCarloConfig::new(400_000, 77 + i as u64)).unwrap();
        assert!(
            (mc.value - c.6).abs() < 4.5 * mc.std_error.max(1e-6),
            "{c:?}: {} ± {}",
            mc.value,
            mc.std_error
        );
    }
}

#[test]
fn monte_carlo_is_reproducible_and_worker_scoped() {
    let (b, s) = setup(&CASES[0]);
    let run = |workers| {
        let mut cfg = MonteCarloConfig::new(50_000, 5);
        cfg.workers = workers;
        outage_monte_carlo(&b, &s, 2.0, &cfg).unwrap().value
    };
    assert_eq!(run(4), run(4));
    assert_eq!(run(1), run(1));
}
