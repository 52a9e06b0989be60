//! Closed-form reproduction numbers for the explicitly solvable models.

use crate::error::{Error, Result};
use crate::greens::{lambda_pair, mortality_exponent};
use crate::model::{ModelSpec, RateFunction};
use crate::quad::{self, QuadOptions};

/// Below this diffusion coefficient the age model uses its D = 0 form.
pub const CLASSICAL_CROSSOVER: f64 = 1e-8;

/// Search interval for [`optimal_diffusion`].
pub const D_SEARCH: (f64, f64) = (1e-6, 1e6);

/// `(prefactor, rate)` with `R₀ᴰ = prefactor · ∫β(a) e^(rate·a) da`.
fn age_kernel(mu: f64, d: f64) -> Result<(f64, f64)> {
    if d < CLASSICAL_CROSSOVER {
        return Ok((1.0, -mu));
    }
    let lp = lambda_pair(mu, d)?;
    Ok((2.0 / (1.0 + lp.sqrt_disc), lp.lambda2))
}

fn is_age_model(m: &ModelSpec) -> bool {
    matches!(m.gamma, RateFunction::Constant(g) if g == 1.0)
        && m.constant_mu().is_some()
        && m.x0 == 0.0
        && m.x_min == 0.0
        && m.is_semi_infinite()
        && m.birth_sample_point.is_none()
}

/// `R₀ᴰ = (2/(1+√(1+4Dμ))) ∫β(a) e^(λ₂a) da` for the age model (γ ≡ 1,
/// constant μ); `∫β(a) e^(−μa) da` when D = 0.
pub fn r0_age_diffusion(m: &ModelSpec) -> Result<f64> {
    if !is_age_model(m) {
        return Err(Error::Unsupported(
            "closed form needs γ ≡ 1, constant μ and births at 0 on [0, ∞)".into(),
        ));
    }
    let mu = m.constant_mu().unwrap_or(f64::NAN);
    let (pre, rate) = age_kernel(mu, m.diffusion)?;
    let value = match &m.beta {
        RateFunction::Constant(c) => c / mu,
        RateFunction::ProportionalToMu(f) => *f,
        RateFunction::Step { threshold, level } => level / mu * (rate * threshold).exp(),
        RateFunction::PowerExp { c, n, r } => pre * c * libm::tgamma(n + 1.0) / (r - rate).powf(n + 1.0),
        beta @ RateFunction::Tabulated(t) => {
            let opts = QuadOptions::with_abs_tol(1e-12);
            let f = |a: f64| beta.evaluate(a).unwrap_or(f64::NAN) * (rate * a).exp();
            let mut pts = vec![0.0];
            pts.extend(t.xs().iter().copied().filter(|&x| x > 0.0));
            let last = *pts.last().unwrap_or(&0.0);
            let body = quad::integrate_pieces(f, &pts, opts)?.value;
            let tail = quad::integrate_to_infinity(f, last, opts)?.value;
            pre * (body + tail)
        }
    };
    Ok(m.birth_multiplicity * value)
}

/// `R₀ᴰ` for `β(a) = β₀a²e^(−a)`: `32β₀D³/((2D + √(1+4μD) − 1)³(1 + √(1+4μD)))`.
///
/// Evaluated as `4β₀/((1 − λ₂)³(1 + √(1+4μD)))`, which has no cancellation
/// as D → 0.
pub fn r0_quadratic_beta(beta0: f64, mu: f64, d: f64) -> f64 {
    let (s, lambda2) = if d < CLASSICAL_CROSSOVER {
        (1.0, -mu)
    } else {
        match lambda_pair(mu, d) {
            Ok(lp) => (lp.sqrt_disc, lp.lambda2),
            Err(_) => return f64::NAN,
        }
    };
    4.0 * beta0 / ((1.0 - lambda2).powi(3) * (1.0 + s))
}

/// `R₀ᴰ` for `β = β₀𝟙[1,∞)`: `(β₀/μ) e^((1 − √(1+4μD))/2D)`, `(β₀/μ)e^(−μ)` at D = 0.
pub fn r0_step_beta(beta0: f64, mu: f64, d: f64) -> f64 {
    if d < CLASSICAL_CROSSOVER {
        return beta0 / mu * (-mu).exp();
    }
    match lambda_pair(mu, d) {
        Ok(lp) => beta0 / mu * lp.lambda2.exp(),
        Err(_) => f64::NAN,
    }
}

/// `R₀ = m ∫ (β/γ)(x) e^(−∫ₓ₀ˣ μ/γ) dx` for a transport model (D = 0).
pub fn r0_size_closed(m: &ModelSpec) -> Result<f64> {
    if m.diffusion != 0.0 || m.birth_sample_point.is_some() {
        return Err(Error::Unsupported(
            "transport formula needs D = 0 and an integral birth law".into(),
        ));
    }
    let x0 = m.x0;
    let survival_to_end = if m.is_semi_infinite() {
        0.0
    } else {
        (-mortality_exponent(m, x0, m.x_max)?).exp()
    };
    if let RateFunction::ProportionalToMu(f) = m.beta {
        return Ok(m.birth_multiplicity * f * (1.0 - survival_to_end));
    }
    if let (Some(_), Some(mu), Some(b)) = (m.gamma.constant_value(), m.constant_mu(), m.beta.constant_value()) {
        return Ok(m.birth_multiplicity * b / mu * (1.0 - survival_to_end));
    }

    let end = if m.is_semi_infinite() {
        x0 + m.decay_length(40.0)
    } else {
        m.x_max
    };
    let mut pts = vec![x0];
    for r in [&m.gamma, &m.mu, &m.beta] {
        pts.extend(r.kinks().into_iter().filter(|&x| x > x0 && x < end));
    }
    pts.push(end);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut panels = Vec::new();
    for w in pts.windows(2) {
        let pieces = ((w[1] - w[0]).ceil() as usize).max(1);
        for j in 0..pieces {
            let a = w[0] + (w[1] - w[0]) * j as f64 / pieces as f64;
            let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / pieces as f64;
            panels.push((a, b));
        }
    }

    let rate = |x: f64| m.mu_at(x) / m.gamma_at(x);
    let inner = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        max_intervals: 200,
    };
    let outer = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 500,
    };
    let mut exponent = 0.0;
    let mut total = 0.0;
    for (a, b) in panels {
        let e0 = exponent;
        let f = |x: f64| {
            let e = quad::integrate(rate, a, x, inner).map(|r| r.value).unwrap_or(f64::NAN);
            m.beta_at(x) / m.gamma_at(x) * (-(e0 + e)).exp()
        };
        total += quad::integrate(f, a, b, outer)?.value;
        exponent += quad::integrate(rate, a, b, inner)?.value;
    }
    Ok(m.birth_multiplicity * total)
}

/// Division at the sample point p: `R₀ = m e^(−∫ₓ₀ᵖ μ/γ)`.
pub fn r0_cell_point_mass(m: &ModelSpec) -> Result<f64> {
    let p = m
        .birth_sample_point
        .ok_or_else(|| Error::Unsupported("model has no birth sample point".into()))?;
    Ok(m.birth_multiplicity * (-mortality_exponent(m, m.x0, p)?).exp())
}

/// Reproduction number of the cell model with daughters distributed by φ.
#[derive(Debug, Clone, PartialEq)]
pub struct CellR0 {
    pub value: f64,
    /// `∫|φ(x) − φ(x_min + x_max − x)| dx`
    pub asymmetry: f64,
    pub warning: Option<String>,
}

/// `R₀ = m ∫ e^(−∫ₛᵖ μ/γ) φ(s) ds` for the cell model.
pub fn r0_cell_distributed(m: &ModelSpec, phi: &dyn Fn(f64) -> f64) -> Result<CellR0> {
    let p = m
        .birth_sample_point
        .ok_or_else(|| Error::Unsupported("model has no birth sample point".into()))?;
    let (lo, hi) = (m.x_min, m.x_max);
    if !hi.is_finite() {
        return Err(Error::Unsupported("cell model needs a bounded domain".into()));
    }
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_intervals: 2000,
    };
    let mid = 0.5 * (lo + hi);
    let asymmetry = quad::integrate_pieces(|x| (phi(x) - phi(lo + hi - x)).abs(), &[lo, mid, hi], opts)?.value;
    let survival = |s: f64| (-mortality_exponent(m, s, p).unwrap_or(f64::NAN)).exp();
    let value =
        m.birth_multiplicity * quad::integrate_pieces(|s| survival(s) * phi(s), &[lo, mid, p.min(hi)], opts)?.value;
    let warning = (asymmetry > 1e-8).then(|| {
        format!("offspring density is not symmetric about {mid} (asymmetry {asymmetry:.3e}); division does not conserve mass")
    });
    Ok(CellR0 {
        value,
        asymmetry,
        warning,
    })
}

/// Closed-form R₀ for whichever solvable case the model falls into.
pub fn r0_analytic(m: &ModelSpec) -> Result<f64> {
    if let RateFunction::ProportionalToMu(f) = m.beta {
        // ∫ μ M⁻¹δ = 1 when no mass leaves the domain.
        if m.birth_sample_point.is_none() && (m.diffusion > 0.0 || m.is_semi_infinite()) {
            return Ok(m.birth_multiplicity * f);
        }
    }
    if is_age_model(m) {
        return r0_age_diffusion(m);
    }
    if m.diffusion == 0.0 {
        return if m.birth_sample_point.is_some() {
            r0_cell_point_mass(m)
        } else {
            r0_size_closed(m)
        };
    }
    Err(Error::Unsupported(
        "no closed form for diffusion with non-constant coefficients".into(),
    ))
}

/// Where the maximum of `D ↦ R₀ᴰ` sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Maximiser {
    Interior(f64),
    /// Maximum at an end of the search interval (monotone objective).
    Boundary(f64),
    /// The objective does not depend on D.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalDiffusion {
    pub d_star: Maximiser,
    pub r0_star: f64,
}

/// Maximises `R₀ᴰ` over `D ∈ [1e−6, 1e6]`: a log-spaced scan, then golden
/// section in log D until the bracket is narrower than `1e−8` in D.
pub fn optimal_diffusion(beta: &RateFunction, mu: f64) -> Result<OptimalDiffusion> {
    let base = ModelSpec::age_diffusion(beta.clone(), mu, 1.0);
    let f = |d: f64| {
        let mut m = base.clone();
        m.diffusion = d;
        r0_age_diffusion(&m)
    };
    let (lo, hi) = (D_SEARCH.0.log10(), D_SEARCH.1.log10());
    let n = 241;
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let ys = xs.iter().map(|&x| f(10f64.powf(x))).collect::<Result<Vec<f64>>>()?;
    let (imax, ymax) =
        ys.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, y)| if y > acc.1 { (i, y) } else { acc },
        );
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    if ymax - ymin <= 1e-12 * ymax.abs() {
        return Ok(OptimalDiffusion {
            d_star: Maximiser::Flat,
            r0_star: ymax,
        });
    }
    if imax == 0 || imax == n - 1 {
        return Ok(OptimalDiffusion {
            d_star: Maximiser::Boundary(10f64.powf(xs[imax])),
            r0_star: ymax,
        });
    }

    let g = |x: f64| f(10f64.powf(x)).unwrap_or(f64::NEG_INFINITY);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (xs[imax - 1], xs[imax + 1]);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..300 {
        if 10f64.powf(b) - 10f64.powf(a) < 1e-8 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    let d_star = 10f64.powf(x);
    Ok(OptimalDiffusion {
        d_star: Maximiser::Interior(d_star),
        r0_star: g(x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn age(beta: RateFunction, d: f64) -> ModelSpec {
        ModelSpec::age_diffusion(beta, 1.0, d)
    }

    #[test]
    fn constant_fertility_ignores_diffusion() {
        for d in [0.0, 1e-9, 0.1, 7.0, 1e6] {
            assert_eq!(r0_age_diffusion(&age(RateFunction::Constant(2.0), d)).unwrap(), 2.0);
        }
    }

    #[test]
    fn quadratic_fertility_values() {
        assert!((r0_quadratic_beta(1.0, 1.0, 2.0) - 8.0 / 27.0).abs() < 1e-15);
        assert!((r0_quadratic_beta(1.0, 1.0, 0.0) - 0.25).abs() < 1e-15);
        assert!((r0_quadratic_beta(1.0, 1.0, 1e-7) - 0.25).abs() < 1e-6);
        let far = r0_quadratic_beta(1.0, 1.0, 1e6);
        assert!(far < 1e-2 && far < r0_quadratic_beta(1.0, 1.0, 1e5));
    }

    #[test]
    fn quadratic_matches_textbook_form() {
        let cases: [(f64, f64, f64); 3] = [(1.0, 1.0, 2.0), (2.5, 0.3, 0.7), (0.4, 3.0, 11.0)];
        for (b, mu, d) in cases {
            let s: f64 = (1.0 + 4.0 * mu * d).sqrt();
            let direct = 32.0 * b * d * d * d / ((2.0 * d + s - 1.0).powi(3) * (1.0 + s));
            assert!((r0_quadratic_beta(b, mu, d) - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn power_exp_family_matches_quadratic_closed_form() {
        for d in [0.01, 0.5, 2.0, 30.0] {
            let m = age(RateFunction::PowerExp { c: 1.0, n: 2.0, r: 1.0 }, d);
            let v = r0_age_diffusion(&m).unwrap();
            assert!((v - r0_quadratic_beta(1.0, 1.0, d)).abs() < 1e-10);
        }
    }

    #[test]
    fn step_fertility_values() {
        let e = std::f64::consts::E;
        assert!((r0_step_beta(1.0, 1.0, 2.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((r0_step_beta(1.0, 1.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(r0_step_beta(e, 1.0, 0.0), 1.0);
        let m = age(
            RateFunction::Step {
                threshold: 1.0,
                level: 1.0,
            },
            2.0,
        );
        assert!((r0_age_diffusion(&m).unwrap() - r0_step_beta(1.0, 1.0, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn tabulated_fertility_by_quadrature() {
        // β = a on [0, 10], constant beyond: compare against the PowerExp-free
        // integral ∫₀¹⁰ a e^{λa} da + 10 e^{10λ}/|λ|.
        let t = crate::model::Table::new(vec![(0.0, 0.0), (10.0, 10.0)], true).unwrap();
        let m = age(RateFunction::Tabulated(t), 2.0);
        let lp = lambda_pair(1.0, 2.0).unwrap();
        let l = lp.lambda2;
        let body = ((10.0 * l).exp() * (10.0 * l - 1.0) + 1.0) / (l * l);
        let tail = 10.0 * (10.0 * l).exp() / -l;
        let expected = 2.0 / (1.0 + lp.sqrt_disc) * (body + tail);
        assert!((r0_age_diffusion(&m).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn transport_formula() {
        let c = |v| RateFunction::Constant(v);
        let m = ModelSpec::size_structured(c(2.0), c(0.5), c(3.0), 0.0);
        assert_eq!(r0_size_closed(&m).unwrap(), 6.0);
        let zero = ModelSpec::size_structured(c(2.0), c(0.5), c(0.0), 0.0);
        assert_eq!(r0_size_closed(&zero).unwrap(), 0.0);
        let prop = ModelSpec::size_structured(
            RateFunction::PowerExp { c: 1.0, n: 1.0, r: 0.1 },
            c(1.0),
            RateFunction::ProportionalToMu(1.7),
            0.0,
        );
        assert_eq!(r0_size_closed(&prop).unwrap(), 1.7);
    }

    #[test]
    fn transport_quadrature_against_exact_integral() {
        // γ = 1, μ = 1 + x, β = 1: R₀ = ∫ e^{−x − x²/2} dx = √(π/2) e^{1/2} erfc(1/√2)
        let t = crate::model::Table::new(vec![(0.0, 1.0), (100.0, 101.0)], true).unwrap();
        let m = ModelSpec::size_structured(
            RateFunction::Constant(1.0),
            RateFunction::Tabulated(t),
            RateFunction::Constant(1.0),
            0.0,
        );
        let exact = (std::f64::consts::PI / 2.0).sqrt() * 0.5f64.exp() * libm::erfc(1.0 / 2f64.sqrt());
        assert!((r0_size_closed(&m).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn cell_model_values() {
        let c = |v| RateFunction::Constant(v);
        let m = ModelSpec::cell_division(c(1.0), c(1.0));
        assert!((r0_cell_point_mass(&m).unwrap() - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        let uniform = r0_cell_distributed(&m, &|_| 1.0).unwrap();
        assert!((uniform.value - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(uniform.warning.is_none());
        let immortal = ModelSpec::cell_division(c(1.0), c(1e-300));
        assert!((r0_cell_distributed(&immortal, &|s| 6.0 * s * (1.0 - s)).unwrap().value - 2.0).abs() < 1e-12);
        let skew = r0_cell_distributed(&m, &|s| 2.0 * s).unwrap();
        assert!(skew.warning.is_some());
    }

    #[test]
    fn optimal_diffusion_cases() {
        let q = optimal_diffusion(&RateFunction::PowerExp { c: 1.0, n: 2.0, r: 1.0 }, 1.0).unwrap();
        match q.d_star {
            Maximiser::Interior(d) => assert!((d - 2.0).abs() < 1e-5, "{d}"),
            other => panic!("{other:?}"),
        }
        assert!((q.r0_star - 8.0 / 27.0).abs() < 1e-12);
        let flat = optimal_diffusion(&RateFunction::Constant(3.0), 1.0).unwrap();
        assert_eq!(flat.d_star, Maximiser::Flat);
        let step = optimal_diffusion(
            &RateFunction::Step {
                threshold: 1.0,
                level: 1.0,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(step.d_star, Maximiser::Boundary(1e6));
    }

    #[test]
    fn unsupported_models_are_reported() {
        let mut m = age(RateFunction::Constant(1.0), 1.0);
        m.gamma = RateFunction::Constant(2.0);
        assert!(matches!(r0_age_diffusion(&m), Err(Error::Unsupported(_))));
        assert!(matches!(r0_analytic(&m), Err(Error::Unsupported(_))));
    }
}
