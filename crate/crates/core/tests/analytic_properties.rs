use proptest::prelude::*;
use r0kit::analytic::{r0_age_diffusion, r0_quadratic_beta};
use r0kit::model::{ModelSpec, RateFunction};

fn age(beta: RateFunction, mu: f64, d: f64) -> f64 {
    r0_age_diffusion(&ModelSpec::age_diffusion(beta, mu, d)).unwrap()
}

fn quadratic() -> RateFunction {
    RateFunction::PowerExp { c: 1.0, n: 2.0, r: 1.0 }
}

#[test]
fn small_diffusion_recovers_the_classical_value() {
    let e = std::f64::consts::E;
    // ∫β e^(−a) da for each family.
    let cases = [
        (RateFunction::Constant(2.0), 2.0),
        (quadratic(), 0.25),
        (
            RateFunction::Step {
                threshold: 1.0,
                level: e,
            },
            1.0,
        ),
    ];
    for (beta, classical) in cases {
        let r = age(beta.clone(), 1.0, 1e-8);
        assert!((r - classical).abs() <= 1e-5, "{beta}: {r} vs {classical}");
    }
}

#[test]
fn large_diffusion_decays_like_inverse_sqrt() {
    let ds: Vec<f64> = (0..=24).map(|i| 10f64.powf(2.0 + 0.25 * i as f64)).collect();
    let rs: Vec<f64> = ds.iter().map(|&d| age(quadratic(), 1.0, d)).collect();
    assert!(rs.windows(2).all(|w| w[1] < w[0]));
    // R₀√D → ∫β/√μ = 2 from below.
    let scaled: Vec<f64> = ds.iter().zip(&rs).map(|(d, r)| r * d.sqrt()).collect();
    assert!(scaled.windows(2).all(|w| w[1] > w[0]), "{scaled:?}");
    assert!(scaled[24] <= 2.0 && scaled[24] > 1.99, "{}", scaled[24]);
}

#[test]
fn quadratic_optimum_is_stationary() {
    for mu in [0.75, 1.0, 2.0] {
        let d = 4.0 * mu - 2.0;
        let h = 1e-5;
        let slope = (r0_quadratic_beta(1.0, mu, d + h) - r0_quadratic_beta(1.0, mu, d - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-6, "mu={mu}: {slope:e}");
    }
}

proptest! {
    #[test]
    fn quadrature_matches_the_quadratic_closed_form(mu in 0.1f64..5.0, d in 0.01f64..50.0, b0 in 0.1f64..10.0) {
        let r = age(RateFunction::PowerExp { c: b0, n: 2.0, r: 1.0 }, mu, d);
        let closed = r0_quadratic_beta(b0, mu, d);
        prop_assert!((r - closed).abs() <= 1e-10 * closed.max(1.0), "{} vs {}", r, closed);
    }
}
