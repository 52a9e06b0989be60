//! Time-domain kernels of the no-birth age–diffusion semigroup
//! `∂ₜv + ∂ₐv + μv = D∂ₐₐv`, `v(0,t) = D∂ₐv(0,t)`.
//!
//! With `v = e^(a/2D − (μ + 1/4D)t) u` the problem becomes the heat equation
//! with the Robin condition `u(0,t) = 2D∂ₐu(0,t)`, whose Green's function is
//! [`g_x30`]. Every evaluation goes through the scaled complementary error
//! function `erfcx(z) = e^(z²)erfc(z)` with the exponents merged beforehand,
//! so no factor like `e^(t/4D)` or `e^(a/D)` is ever formed on its own.

use std::f64::consts::PI;

use errorfunctions::RealErrorFunctions;

use crate::error::{Error, Result};
use crate::greens::lambda_pair;
use crate::model::{ModelSpec, RateFunction};
use crate::quad::{self, QuadOptions};

fn erfcx(z: f64) -> f64 {
    RealErrorFunctions::erfcx(z)
}

/// Green's function of `uₜ = D uₐₐ` on `(0, ∞)` with `u(0) = 2D uₐ(0)`.
pub fn g_x30(a: f64, s: f64, t: f64, d: f64) -> f64 {
    let four_dt = 4.0 * d * t;
    let gauss = 1.0 / (2.0 * (PI * d * t).sqrt());
    let near = (-(a - s).powi(2) / four_dt).exp();
    let image = (-(a + s).powi(2) / four_dt).exp();
    let z = (a + s + t) / (2.0 * (d * t).sqrt());
    gauss * (near + image) - image * erfcx(z) / (2.0 * d)
}

/// Kernel of the no-birth semigroup: `(T(t)v)(a) = ∫ G₀(a,s,t) v(s) ds`.
pub fn g0(a: f64, s: f64, t: f64, mu: f64, d: f64) -> f64 {
    let four_dt = 4.0 * d * t;
    let gauss = 1.0 / (2.0 * (PI * d * t).sqrt());
    let e1 = -(a - s - t).powi(2) / four_dt;
    let e2 = -(a + s - t).powi(2) / four_dt - s / d;
    let z = (a + s + t) / (2.0 * (d * t).sqrt());
    let v = (-mu * t).exp() * (e1.exp() * gauss + e2.exp() * (gauss - erfcx(z) / (2.0 * d)));
    v.max(0.0)
}

/// Time-integration horizon `max(10a, 50/μ)`; beyond it the integrand is
/// below `e^(−50)` of its peak.
pub fn time_horizon(a: f64, mu: f64) -> f64 {
    (10.0 * a).max(50.0 / mu)
}

/// `∫₀^T f(t) dt` through `t = u²`, which removes the `t^(−1/2)` endpoint
/// behaviour of heat kernels.
fn integrate_in_time<F: Fn(f64) -> f64>(f: F, horizon: f64, peak: f64, opts: QuadOptions) -> Result<f64> {
    let top = horizon.sqrt();
    let mut pts = vec![0.0];
    let p = peak.sqrt();
    if p > 0.0 && p < top {
        pts.push(p);
    }
    pts.push(top);
    Ok(quad::integrate_pieces(|u| 2.0 * u * f(u * u), &pts, opts)?.value)
}

/// Both sides of `∫₀^∞ e^(−μτ) e^(−(a−τ)²/4Dτ)/√(πDτ) dτ = 2e^(λ₂a)/√(1+4Dμ)`.
pub fn integral_identity_check(a: f64, mu: f64, d: f64) -> Result<(f64, f64)> {
    let lp = lambda_pair(mu, d)?;
    let integrand = |tau: f64| {
        if tau <= 0.0 {
            return 0.0;
        }
        (-mu * tau - (a - tau).powi(2) / (4.0 * d * tau)).exp() / (PI * d * tau).sqrt()
    };
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    let lhs = integrate_in_time(integrand, time_horizon(a, mu), a, opts)?;
    let rhs = 2.0 * (lp.lambda2 * a).exp() / lp.sqrt_disc;
    Ok((lhs, rhs))
}

/// `∫₀^∞ G₀(a,0,t) dt` in closed form:
/// `2e^(λ₂a)/√(1+4Dμ) − (e^(λ₂a)/2μD)(1 − 1/√(1+4μD))`.
pub fn time_integrated_kernel(a: f64, mu: f64, d: f64) -> f64 {
    let Ok(lp) = lambda_pair(mu, d) else {
        return f64::NAN;
    };
    let s = lp.sqrt_disc;
    let decay = (lp.lambda2 * a).exp();
    // (1 − 1/S)/(2μD) = 2/(S(1 + S)) since S² − 1 = 4μD.
    2.0 * decay / s - decay * 2.0 / (s * (1.0 + s))
}

/// `∫₀^∞ G₀(a,s,t) dt` by adaptive quadrature.
pub fn time_integral_g0(a: f64, s: f64, mu: f64, d: f64, abs_tol: f64) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol,
        rel_tol: 1e-12,
        max_intervals: 2000,
    };
    integrate_in_time(
        |t| if t <= 0.0 { 0.0 } else { g0(a, s, t, mu, d) },
        time_horizon(a + s, mu),
        (a - s).abs(),
        opts,
    )
}

/// Which member of the approximating sequence to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Finite(u32),
    Limit,
}

fn age_parameters(m: &ModelSpec) -> Result<(f64, f64)> {
    let gamma_one = matches!(m.gamma, RateFunction::Constant(g) if g == 1.0);
    match m.constant_mu() {
        Some(mu) if m.diffusion > 0.0 && gamma_one && m.x0 == 0.0 && m.x_min == 0.0 => Ok((mu, m.diffusion)),
        _ => Err(Error::Unsupported(
            "time-domain route needs the age model: γ ≡ 1, constant μ, D > 0, births at 0".into(),
        )),
    }
}

/// Upper end of the age integral: β(a)e^(λ₂a) < 1e−14 beyond it.
fn age_horizon(m: &ModelSpec, lambda2: f64) -> f64 {
    let (_, beta_max) = m.rate_bounds(&m.beta);
    if !(beta_max > 0.0) {
        return 0.0;
    }
    ((beta_max / 1e-14).ln() / lambda2.abs()).max(1.0)
}

/// R₀ through the semigroup: `∫β(a) ∫₀^∞ (T(t)φ)(a) dt da` with φ = k𝟙[0,1/k],
/// or with the point mass at 0 for [`KChoice::Limit`].
pub fn r0_time_domain(m: &ModelSpec, k: KChoice) -> Result<f64> {
    let (mu, d) = age_parameters(m)?;
    let lp = lambda_pair(mu, d)?;
    let top = age_horizon(m, lp.lambda2);
    if top == 0.0 {
        return Ok(0.0);
    }
    let mut pts = vec![0.0];
    pts.extend(m.beta.kinks().into_iter().filter(|&x| x > 0.0 && x < top));
    if let KChoice::Finite(k) = k {
        let w = 1.0 / k as f64;
        if w < top {
            pts.push(w);
        }
    }
    pts.push(top);
    pts.sort_by(f64::total_cmp);

    let outer = QuadOptions {
        abs_tol: 1e-9,
        rel_tol: 1e-10,
        max_intervals: 400,
    };
    let kernel = |a: f64| -> f64 {
        match k {
            KChoice::Limit => time_integral_g0(a, 0.0, mu, d, 1e-12).unwrap_or(f64::NAN),
            KChoice::Finite(k) => {
                let w = 1.0 / k as f64;
                let mut spts = vec![0.0];
                if a > 0.0 && a < w {
                    spts.push(a);
                }
                spts.push(w);
                quad::integrate_pieces(
                    |s| time_integral_g0(a, s, mu, d, 1e-11).unwrap_or(f64::NAN),
                    &spts,
                    QuadOptions {
                        abs_tol: 1e-11,
                        rel_tol: 1e-10,
                        max_intervals: 50,
                    },
                )
                .map(|r| r.value * k as f64)
                .unwrap_or(f64::NAN)
            }
        }
    };
    let r = quad::integrate_pieces(|a| m.birth_multiplicity * m.beta_at(a) * kernel(a), &pts, outer)?;
    Ok(r.value)
}
