//! Offspring densities φₖ that concentrate at the birth state x₀ as k grows.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MollifierKind {
    /// `k · 𝟙[x₀, x₀ + 1/k]`
    UniformIndicator,
    /// `aₖ · w(x) · e^(−k|x − x₀|)`, where `w` vanishes at the domain ends:
    /// `(x − ℓ)(r − x)` on a bounded domain `[ℓ, r]`, `(x − ℓ)` on `[ℓ, ∞)`.
    SmoothBump,
    /// Hat of half-width `1/k` centred at x₀, cut to the domain and renormalised.
    Triangular,
}

impl MollifierKind {
    pub fn cli_name(self) -> &'static str {
        match self {
            MollifierKind::UniformIndicator => "uniform",
            MollifierKind::SmoothBump => "bump",
            MollifierKind::Triangular => "triangular",
        }
    }
}

impl fmt::Display for MollifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for MollifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MollifierKind::UniformIndicator),
            "bump" => Ok(MollifierKind::SmoothBump),
            "triangular" => Ok(MollifierKind::Triangular),
            other => Err(Error::Domain(format!("unknown mollifier family '{other}'"))),
        }
    }
}

/// A concentrating family on the domain `[left, right]` (`right` may be `+∞`).
#[derive(Debug)]
pub struct MollifierFamily {
    kind: MollifierKind,
    x0: f64,
    left: f64,
    right: f64,
    bump_norms: RwLock<HashMap<u32, f64>>,
}

impl Clone for MollifierFamily {
    fn clone(&self) -> Self {
        let cache = self.bump_norms.read().map(|m| m.clone()).unwrap_or_default();
        Self {
            kind: self.kind,
            x0: self.x0,
            left: self.left,
            right: self.right,
            bump_norms: RwLock::new(cache),
        }
    }
}

impl MollifierFamily {
    pub fn new(kind: MollifierKind, x0: f64, left: f64, right: f64) -> Result<Self> {
        if !(left <= x0 && x0 < right) || !left.is_finite() {
            return Err(Error::Domain(format!(
                "concentration point {x0} must lie in [{left}, {right})"
            )));
        }
        Ok(Self {
            kind,
            x0,
            left,
            right,
            bump_norms: RwLock::new(HashMap::new()),
        })
    }

    /// Family concentrating at the model's birth state on its domain.
    pub fn for_model(kind: MollifierKind, m: &super::ModelSpec) -> Result<Self> {
        Self::new(kind, m.x0, m.x_min, m.x_max)
    }

    pub fn kind(&self) -> MollifierKind {
        self.kind
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Points where φₖ fails to be smooth.
    pub fn kinks(&self, k: u32) -> Vec<f64> {
        let w = 1.0 / k as f64;
        [self.x0 - w, self.x0, self.x0 + w]
            .into_iter()
            .filter(|&x| x >= self.left && x <= self.right)
            .collect()
    }

    /// Smallest interval outside which φₖ vanishes (or is below e⁻⁸⁰ of its
    /// peak for the bump).
    pub fn support(&self, k: u32) -> (f64, f64) {
        let w = match self.kind {
            MollifierKind::SmoothBump => 80.0 / k as f64,
            _ => 1.0 / k as f64,
        };
        let lo = match self.kind {
            MollifierKind::UniformIndicator => self.x0,
            _ => (self.x0 - w).max(self.left),
        };
        (lo, (self.x0 + w).min(self.right))
    }

    fn bump_weight(&self, x: f64) -> f64 {
        if self.right.is_finite() {
            (x - self.left) * (self.right - x)
        } else {
            x - self.left
        }
    }

    fn bump_unnormalised(&self, k: u32, x: f64) -> f64 {
        if x < self.left || x > self.right {
            return 0.0;
        }
        self.bump_weight(x).max(0.0) * (-(k as f64) * (x - self.x0).abs()).exp()
    }

    /// Normalisation aₖ of the bump, computed by quadrature once per k.
    pub fn bump_normalisation(&self, k: u32) -> f64 {
        if let Some(a) = self.bump_norms.read().ok().and_then(|m| m.get(&k).copied()) {
            return a;
        }
        let (lo, hi) = self.support(k);
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-14,
            max_intervals: 4000,
        };
        let mass = quad::integrate_pieces(|x| self.bump_unnormalised(k, x), &[lo, self.x0, hi], opts)
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
        let a = 1.0 / mass;
        if let Ok(mut m) = self.bump_norms.write() {
            m.insert(k, a);
        }
        a
    }

    fn triangle_mass(&self, k: u32) -> f64 {
        // ∫ k(1 − k|t|) dt over the part of [−1/k, 1/k] inside the domain.
        let kf = k as f64;
        let anti = |t: f64| kf * t - kf * kf * t * t.abs() / 2.0;
        let t0 = (self.left - self.x0).max(-1.0 / kf);
        let t1 = (self.right - self.x0).min(1.0 / kf);
        anti(t1) - anti(t0)
    }

    fn indicator_width(&self, k: u32) -> f64 {
        (self.x0 + 1.0 / k as f64).min(self.right) - self.x0
    }

    /// φₖ(x).
    pub fn eval(&self, k: u32, x: f64) -> f64 {
        if x < self.left || x > self.right {
            return 0.0;
        }
        let kf = k as f64;
        match self.kind {
            MollifierKind::UniformIndicator => {
                let w = self.indicator_width(k);
                if x >= self.x0 && x <= self.x0 + w {
                    1.0 / w
                } else {
                    0.0
                }
            }
            MollifierKind::SmoothBump => self.bump_normalisation(k) * self.bump_unnormalised(k, x),
            MollifierKind::Triangular => {
                let hat = kf * (1.0 - kf * (x - self.x0).abs());
                if hat > 0.0 {
                    hat / self.triangle_mass(k)
                } else {
                    0.0
                }
            }
        }
    }

    /// Mean of φₖ over `[a, b]`.
    pub fn cell_average(&self, k: u32, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support(k);
        let (a2, b2) = (a.max(lo), b.min(hi));
        if b2 <= a2 {
            return 0.0;
        }
        let kinks = self.kinks(k);
        quad::gauss_legendre_split(|x| self.eval(k, x), a2, b2, &kinks) / (b - a)
    }
}

/// φₖ(x) for the given family.
pub fn mollifier_eval(fam: &MollifierFamily, k: u32, x: f64) -> f64 {
    fam.eval(k, x)
}
