//! Model specification: domain, vital rates, diffusion and the birth law.

mod file;
mod mollifier;
mod rate;

use std::fmt;

pub use file::{load_model, parse_model};
pub use mollifier::{mollifier_eval, MollifierFamily, MollifierKind};
pub use rate::{RateFunction, Table};

use crate::error::{Error, Result};

/// Points sampled by [`validate_model`] besides the family-specific checks.
const VALIDATION_SAMPLES: usize = 1024;

/// A linear structured population model with a concentrated birth state.
///
/// The domain is `[x_min, x_max]`; newborns appear at `x0`, which is either
/// the left end (`x0 == x_min`) or an interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub x_min: f64,
    pub x0: f64,
    pub x_max: f64,
    pub gamma: RateFunction,
    pub mu: RateFunction,
    pub beta: RateFunction,
    pub diffusion: f64,
    pub birth_multiplicity: f64,
    /// When set, births are `multiplicity · γ(p) · u(p)` instead of `∫ β u`.
    pub birth_sample_point: Option<f64>,
}

impl ModelSpec {
    /// Physiological-age model: γ ≡ 1, constant mortality, diffusion `d`.
    pub fn age_diffusion(beta: RateFunction, mu: f64, d: f64) -> Self {
        Self {
            x_min: 0.0,
            x0: 0.0,
            x_max: f64::INFINITY,
            gamma: RateFunction::Constant(1.0),
            mu: RateFunction::Constant(mu),
            beta,
            diffusion: d,
            birth_multiplicity: 1.0,
            birth_sample_point: None,
        }
    }

    /// Size-structured model on `[x0, ∞)` with optional diffusion.
    pub fn size_structured(gamma: RateFunction, mu: RateFunction, beta: RateFunction, d: f64) -> Self {
        Self {
            x_min: 0.0,
            x0: 0.0,
            x_max: f64::INFINITY,
            gamma,
            mu,
            beta,
            diffusion: d,
            birth_multiplicity: 1.0,
            birth_sample_point: None,
        }
    }

    /// Cell population on `(0, 1)`: division at size 1 into two cells born at 1/2.
    pub fn cell_division(gamma: RateFunction, mu: RateFunction) -> Self {
        Self {
            x_min: 0.0,
            x0: 0.5,
            x_max: 1.0,
            gamma,
            mu,
            beta: RateFunction::Constant(0.0),
            diffusion: 0.0,
            birth_multiplicity: 2.0,
            birth_sample_point: Some(1.0),
        }
    }

    pub fn with_beta(mut self, beta: RateFunction) -> Self {
        self.beta = beta;
        self
    }

    pub fn gamma_at(&self, x: f64) -> f64 {
        self.gamma.evaluate_with(x, &self.mu).unwrap_or(f64::NAN)
    }

    pub fn mu_at(&self, x: f64) -> f64 {
        self.mu.evaluate(x).unwrap_or(f64::NAN)
    }

    /// β(x), resolving `ProportionalToMu` against this model's mortality.
    pub fn beta_at(&self, x: f64) -> f64 {
        self.beta.evaluate_with(x, &self.mu).unwrap_or(f64::NAN)
    }

    /// Mortality if it is constant.
    pub fn constant_mu(&self) -> Option<f64> {
        self.mu.constant_value()
    }

    pub fn is_semi_infinite(&self) -> bool {
        self.x_max.is_infinite()
    }

    /// `(inf, sup)` of a rate over the model domain.
    pub fn rate_bounds(&self, rate: &RateFunction) -> (f64, f64) {
        match rate {
            RateFunction::ProportionalToMu(f) => {
                let (lo, hi) = self.rate_bounds(&self.mu);
                if *f >= 0.0 {
                    (f * lo, f * hi)
                } else {
                    (f * hi, f * lo)
                }
            }
            r => r.bounds(self.x_min, self.x_max).unwrap_or((f64::NAN, f64::NAN)),
        }
    }

    /// Length beyond which the no-birth Green's kernel has decayed by `e^(−decays)`:
    /// `max(decays/|λ₂|, decays·γ_max/μ_min)` with λ₂ taken at `γ_max` and `μ_min`.
    pub fn decay_length(&self, decays: f64) -> f64 {
        let (_, gamma_max) = self.rate_bounds(&self.gamma);
        let (mu_min, _) = self.rate_bounds(&self.mu);
        let transport = decays * gamma_max / mu_min;
        if self.diffusion > 0.0 {
            // |λ₂| of Dλ² − γλ − μ = 0, smallest over the rate ranges.
            let disc = (gamma_max * gamma_max + 4.0 * self.diffusion * mu_min).sqrt();
            let lambda2 = 2.0 * mu_min / (gamma_max + disc);
            transport.max(decays / lambda2)
        } else {
            transport
        }
    }

    /// Right end of the computational domain: `x_max` or, for a semi-infinite
    /// domain, `x0 + decay_length(12)`.
    pub fn truncation(&self) -> f64 {
        if self.is_semi_infinite() {
            self.x0 + self.decay_length(12.0)
        } else {
            self.x_max
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "domain=[{}, {}] x0={} gamma={} mu={} beta={} D={} multiplicity={}",
            self.x_min, self.x_max, self.x0, self.gamma, self.mu, self.beta, self.diffusion, self.birth_multiplicity
        )?;
        if let Some(p) = self.birth_sample_point {
            write!(f, " sample_point={p}")?;
        }
        Ok(())
    }
}

/// One failed assumption of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks the standing assumptions on a model; an empty list means valid.
pub fn validate_model(m: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();

    if !m.x_min.is_finite() || !m.x0.is_finite() || m.x_max.is_nan() {
        out.push(Violation::new("domain", "x_min and x0 must be finite"));
    }
    if !(m.x0 < m.x_max) {
        out.push(Violation::new("domain", "birth state x0 must be below x_max"));
    }
    if !(m.x_min <= m.x0) {
        out.push(Violation::new("domain", "birth state x0 must not be below x_min"));
    }
    if !(m.diffusion >= 0.0 && m.diffusion.is_finite()) {
        out.push(Violation::new(
            "diffusion",
            "diffusion coefficient must be finite and nonnegative",
        ));
    }
    if !(m.birth_multiplicity > 0.0 && m.birth_multiplicity.is_finite()) {
        out.push(Violation::new("birth", "birth multiplicity must be positive"));
    }
    if let Some(p) = m.birth_sample_point {
        if !(p >= m.x_min && p <= m.x_max && p.is_finite()) {
            out.push(Violation::new("birth", "sample point outside the domain"));
        }
    }
    if !out.is_empty() {
        return out;
    }

    for (name, rate) in [("gamma", &m.gamma), ("mu", &m.mu)] {
        if matches!(rate, RateFunction::ProportionalToMu(_)) {
            out.push(Violation::new(name, "only fertility may be proportional to mortality"));
        }
    }
    if !out.is_empty() {
        return out;
    }

    for (name, rate) in [("gamma", &m.gamma), ("mu", &m.mu), ("beta", &m.beta)] {
        if let RateFunction::Tabulated(t) = rate {
            let (lo, hi) = t.range();
            if !t.extrapolates() && (lo > m.x_min || hi < m.x_max) {
                out.push(Violation::new(
                    name,
                    "table does not cover the domain and extrapolation is off",
                ));
            }
        }
    }

    let (gamma_min, gamma_max) = m.rate_bounds(&m.gamma);
    if !(gamma_min > 0.0) {
        out.push(Violation::new(
            "gamma",
            "growth rate not bounded below by positive constant",
        ));
    }
    if !gamma_max.is_finite() {
        out.push(Violation::new("gamma", "growth rate unbounded"));
    }
    let (mu_min, mu_max) = m.rate_bounds(&m.mu);
    if !(mu_min > 0.0) {
        out.push(Violation::new("mu", "mortality not bounded below by positive constant"));
    }
    if !mu_max.is_finite() {
        out.push(Violation::new("mu", "mortality unbounded"));
    }
    let (beta_min, beta_max) = m.rate_bounds(&m.beta);
    if !(beta_min >= 0.0) {
        out.push(Violation::new("beta", "fertility negative"));
    }
    if !beta_max.is_finite() {
        out.push(Violation::new("beta", "fertility unbounded"));
    }

    // Dense sampling catches non-finite values the closed-form bounds miss.
    let hi = if m.x_max.is_finite() { m.x_max } else { m.x_min + 100.0 };
    let mut xs: Vec<f64> = (0..VALIDATION_SAMPLES)
        .map(|i| m.x_min + (hi - m.x_min) * i as f64 / (VALIDATION_SAMPLES - 1) as f64)
        .collect();
    for r in [&m.gamma, &m.mu, &m.beta] {
        xs.extend(r.kinks().into_iter().filter(|&x| x >= m.x_min && x <= m.x_max));
    }
    type Check<'a> = (&'static str, &'a dyn Fn(f64) -> f64, bool);
    let checks: [Check; 3] = [
        ("gamma", &|x| m.gamma_at(x), true),
        ("mu", &|x| m.mu_at(x), true),
        ("beta", &|x| m.beta_at(x), false),
    ];
    for (name, f, strictly_positive) in checks {
        if out.iter().any(|v| v.field == name) {
            continue;
        }
        if let Some(&x) = xs.iter().find(|&&x| {
            let v = f(x);
            !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0)
        }) {
            out.push(Violation::new(name, format!("invalid value {} at x = {x}", f(x))));
        }
    }
    out
}

/// Returns the model if valid, or every violation as one error.
pub fn ensure_valid(m: &ModelSpec) -> Result<()> {
    let v = validate_model(m);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(v.iter().map(|v| v.to_string()).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelSpec {
        ModelSpec::size_structured(
            RateFunction::Constant(1.0),
            RateFunction::Constant(1.0),
            RateFunction::Constant(2.0),
            0.0,
        )
    }

    #[test]
    fn valid_constant_model() {
        assert!(validate_model(&base()).is_empty());
    }

    #[test]
    fn zero_mortality_is_rejected() {
        let mut m = base();
        m.mu = RateFunction::Constant(0.0);
        let v = validate_model(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "mortality not bounded below by positive constant");
    }

    #[test]
    fn negative_fertility_is_rejected() {
        let m = base().with_beta(RateFunction::Constant(-1.0));
        let v = validate_model(&m);
        assert!(v.iter().any(|v| v.message == "fertility negative"), "{v:?}");
    }

    #[test]
    fn growth_decaying_to_zero_is_rejected() {
        let mut m = base();
        m.gamma = RateFunction::PowerExp { c: 1.0, n: 0.0, r: 1.0 };
        assert!(validate_model(&m)
            .iter()
            .any(|v| v.message.starts_with("growth rate not bounded below")));
    }

    #[test]
    fn domain_order_is_checked() {
        let mut m = base();
        m.x0 = 2.0;
        m.x_max = 1.0;
        assert!(!validate_model(&m).is_empty());
    }

    #[test]
    fn validation_is_idempotent() {
        let m = base().with_beta(RateFunction::Constant(-1.0));
        let before = m.clone();
        assert_eq!(validate_model(&m), validate_model(&m));
        assert_eq!(m, before);
    }

    #[test]
    fn step_mortality_that_vanishes_is_rejected() {
        let mut m = base();
        m.mu = RateFunction::Step {
            threshold: 1.0,
            level: 1.0,
        };
        assert!(!validate_model(&m).is_empty());
    }

    #[test]
    fn truncation_rule() {
        // Age model μ = 1, D = 2: λ₂ = −1/2, so 12/|λ₂| = 24.
        let m = ModelSpec::age_diffusion(RateFunction::Constant(2.0), 1.0, 2.0);
        assert!((m.truncation() - 24.0).abs() < 1e-12);
        // Pure transport γ = 1, μ = 1: 12 γ/μ.
        assert!((base().truncation() - 12.0).abs() < 1e-12);
    }
}
