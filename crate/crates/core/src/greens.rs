//! Closed-form Green's functions of the mortality/transition operator
//! `M u = (γu − D u′)′ + μu` for the two solvable cases: pure transport
//! (D = 0) and the physiological-age model (γ ≡ 1, constant μ, D > 0) with
//! the homogeneous Robin condition `u(0) = D u′(0)`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, RateFunction};
use crate::quad::{self, QuadOptions};

/// Fault injection for the validation harness: flips the sign of λ₂.
#[doc(hidden)]
pub mod mutation {
    use super::*;

    static FLIP_LAMBDA2: AtomicBool = AtomicBool::new(false);

    pub fn set_flip_lambda2(on: bool) {
        FLIP_LAMBDA2.store(on, Ordering::SeqCst);
    }

    pub(crate) fn flip_lambda2() -> bool {
        FLIP_LAMBDA2.load(Ordering::Relaxed)
    }
}

/// Roots of the characteristic polynomial `Dλ² − λ − μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPair {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `√(1 + 4Dμ)`
    pub sqrt_disc: f64,
}

/// λ₁ = (1 + √(1+4Dμ))/(2D) > 0 and λ₂ = (1 − √(1+4Dμ))/(2D) < 0.
///
/// λ₂ is evaluated as `−2μ/(1 + √(1+4Dμ))`, which avoids the cancellation of
/// the textbook form when `Dμ` is small.
pub fn lambda_pair(mu: f64, d: f64) -> Result<LambdaPair> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "no characteristic roots for D = {d}; the pure-transport case has no λ pair"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mortality must be positive, got {mu}")));
    }
    let sqrt_disc = (1.0 + 4.0 * d * mu).sqrt();
    let lambda1 = (1.0 + sqrt_disc) / (2.0 * d);
    let mut lambda2 = -2.0 * mu / (1.0 + sqrt_disc);
    if mutation::flip_lambda2() {
        lambda2 = -lambda2;
    }
    Ok(LambdaPair {
        lambda1,
        lambda2,
        sqrt_disc,
    })
}

/// `∫ₛˣ μ/γ`, exact for constant rates, adaptive Gauss–Kronrod otherwise.
pub fn mortality_exponent(m: &ModelSpec, s: f64, x: f64) -> Result<f64> {
    if x <= s {
        return Ok(0.0);
    }
    if let (Some(g), Some(mu)) = (m.gamma.constant_value(), m.mu.constant_value()) {
        return Ok(mu * (x - s) / g);
    }
    let mut pts = vec![s];
    let mut kinks: Vec<f64> = m.gamma.kinks();
    kinks.extend(m.mu.kinks());
    kinks.sort_by(f64::total_cmp);
    pts.extend(kinks.into_iter().filter(|&k| k > s && k < x));
    pts.push(x);
    let r = quad::integrate_pieces(|y| m.mu_at(y) / m.gamma_at(y), &pts, QuadOptions::with_abs_tol(1e-10))?;
    Ok(r.value)
}

/// Green's function of the transport operator (D = 0):
/// `G(x, s) = e^(−∫ₛˣ μ/γ) / γ(x)` for `x ≥ s`, 0 otherwise.
pub fn greens_size(x: f64, s: f64, m: &ModelSpec) -> Result<f64> {
    if m.diffusion != 0.0 {
        return Err(Error::Unsupported("transport Green's function requires D = 0".into()));
    }
    if x < s {
        return Ok(0.0);
    }
    Ok((-mortality_exponent(m, s, x)?).exp() / m.gamma_at(x))
}

/// Green's function of `v′ + μv − Dv″` on `(0, ∞)` with `v(0) = D v′(0)`.
///
/// On the diagonal the `e^(λ₂(a−s))` branch is taken once (H(0) = 1 for the
/// `a − s` factor, 0 for the `s − a` factor).
pub fn greens_age_diffusion(a: f64, s: f64, mu: f64, d: f64) -> f64 {
    let Ok(lp) = lambda_pair(mu, d) else {
        return f64::NAN;
    };
    let LambdaPair {
        lambda1: l1,
        lambda2: l2,
        sqrt_disc,
    } = lp;
    let branch = if s > a {
        (l1 * (a - s)).exp()
    } else {
        (l2 * (a - s)).exp()
    };
    (branch - (l2 / l1) * (l2 * a - l1 * s).exp()) / sqrt_disc
}

/// Limit of `M⁻¹φₖ` for the age model: `(1 − λ₂/λ₁) e^(λ₂a) / √(1+4μD)`.
pub fn psi_infinity_age(a: f64, mu: f64, d: f64) -> f64 {
    match lambda_pair(mu, d) {
        Ok(lp) => (1.0 - lp.lambda2 / lp.lambda1) * (lp.lambda2 * a).exp() / lp.sqrt_disc,
        Err(_) => f64::NAN,
    }
}

/// `F(x) = (1 − e^(−x))/x`, `F(0) = 1`.
pub fn softened_exp(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // Σ (−x)ⁿ/(n+1)!, six terms.
        1.0 - x / 2.0 + x * x / 6.0 - x.powi(3) / 24.0 + x.powi(4) / 120.0 - x.powi(5) / 720.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(M⁻¹(k·𝟙[0,1/k]))(a)` for the age model, in closed form.
pub fn minv_indicator(a: f64, k: u32, mu: f64, d: f64) -> f64 {
    let Ok(lp) = lambda_pair(mu, d) else {
        return f64::NAN;
    };
    let (l1, l2) = (lp.lambda1, lp.lambda2);
    let kf = k as f64;
    let w = 1.0 / kf;
    let tail = (softened_exp(l2 / kf) - (l2 / l1) * softened_exp(l1 / kf)) * (l2 * a).exp();
    let near = if (0.0..=w).contains(&a) {
        (1.0 - a * kf) * (softened_exp(l1 * (w - a)) - softened_exp(l2 * (w - a)))
    } else {
        0.0
    };
    (near + tail) / lp.sqrt_disc
}

/// The k-dependent coefficient `F(λ₂/k) − (λ₂/λ₁) F(λ₁/k)` of the tail of
/// [`minv_indicator`].
pub fn indicator_tail_coefficient(k: f64, mu: f64, d: f64) -> f64 {
    match lambda_pair(mu, d) {
        Ok(lp) => softened_exp(lp.lambda2 / k) - (lp.lambda2 / lp.lambda1) * softened_exp(lp.lambda1 / k),
        Err(_) => f64::NAN,
    }
}

/// `a ↦ G(a, x₀)` for the closed-form cases.
pub type LimitDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// ψ∞ = G(·, x₀) for a transport model (D = 0) or the age–diffusion model
/// (γ ≡ 1, constant μ, D > 0, births at the left end).
pub fn greens_limit_density(m: &ModelSpec) -> Result<LimitDensity> {
    if m.diffusion == 0.0 {
        let model = m.clone();
        return Ok(Arc::new(move |x| greens_size(x, model.x0, &model).unwrap_or(f64::NAN)));
    }
    let gamma_one = matches!(m.gamma, RateFunction::Constant(g) if g == 1.0);
    match (m.constant_mu(), gamma_one && m.x0 == m.x_min) {
        (Some(mu), true) => {
            let (d, x0) = (m.diffusion, m.x0);
            // Fail early on an invalid pair.
            lambda_pair(mu, d)?;
            Ok(Arc::new(
                move |a| {
                    if a < x0 {
                        0.0
                    } else {
                        psi_infinity_age(a - x0, mu, d)
                    }
                },
            ))
        }
        _ => Err(Error::Unsupported(
            "no closed-form Green's function for this model; use the discrete route".into(),
        )),
    }
}
