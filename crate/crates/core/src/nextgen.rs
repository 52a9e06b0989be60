//! Rank-one next-generation operators `BₖM⁻¹` with `Bₖu = (Lu)φₖ`, their
//! spectral radii `R₀,ₖ = LM⁻¹φₖ`, and the limit `R₀ = lim R₀,ₖ`.

use std::fmt;

use rayon::prelude::*;

use crate::discrete::{assemble_operator, sample_weights, DiscreteOperator, Field, Grid};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, MollifierFamily, RateFunction};

/// Default k-schedule: 8, 16, …, 256.
pub const DEFAULT_SCHEDULE: [u32; 6] = [8, 16, 32, 64, 128, 256];

/// A positive linear functional on densities.
#[derive(Debug, Clone, PartialEq)]
pub enum BirthFunctional {
    /// `Lu = scale · ∫β u`; `mu` resolves a fertility proportional to mortality.
    IntegralBeta {
        beta: RateFunction,
        mu: RateFunction,
        scale: f64,
    },
    /// `Lu = scale · u(point)`.
    PointSample { point: f64, scale: f64 },
}

impl BirthFunctional {
    pub fn from_model(m: &ModelSpec) -> Self {
        match m.birth_sample_point {
            Some(p) => BirthFunctional::PointSample {
                point: p,
                scale: m.birth_multiplicity * m.gamma_at(p),
            },
            None => BirthFunctional::IntegralBeta {
                beta: m.beta.clone(),
                mu: m.mu.clone(),
                scale: m.birth_multiplicity,
            },
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            BirthFunctional::IntegralBeta { scale, .. } | BirthFunctional::PointSample { scale, .. } => *scale *= c,
        }
        out
    }

    /// Sparse weights `wᵢ` with `Lu ≈ Σ wᵢ uᵢ` for cell averages `uᵢ`.
    pub fn weights(&self, g: &Grid) -> Vec<(usize, f64)> {
        match self {
            BirthFunctional::IntegralBeta { beta, mu, scale } => {
                let h = g.spacing();
                let mut kinks = beta.kinks();
                kinks.extend(mu.kinks());
                g.cell_averages(|x| beta.evaluate_with(x, mu).unwrap_or(f64::NAN), &kinks)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, b)| *b != 0.0)
                    .map(|(i, b)| (i, scale * h * b))
                    .collect()
            }
            BirthFunctional::PointSample { point, scale } => {
                sample_weights(g, *point).iter().map(|&(i, w)| (i, scale * w)).collect()
            }
        }
    }

    pub fn apply(&self, u: &Field) -> f64 {
        apply_weights(&self.weights(&u.grid), &u.values)
    }
}

pub fn apply_weights(w: &[(usize, f64)], u: &[f64]) -> f64 {
    w.iter().map(|&(i, c)| c * u[i]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    GreenLimit,
    FiniteKSequence,
    TimeDomain,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Analytic => "analytic",
            Method::GreenLimit => "green-limit",
            Method::FiniteKSequence => "finite-k",
            Method::TimeDomain => "time-domain",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct R0Report {
    pub value: f64,
    pub method: Method,
    pub k_sequence: Option<Vec<(u32, f64)>>,
    pub extrapolation_error_estimate: Option<f64>,
    pub grid_n: Option<usize>,
    /// Non-fatal diagnostics.
    pub flags: Vec<String>,
}

impl R0Report {
    pub fn simple(value: f64, method: Method) -> Self {
        Self {
            value,
            method,
            k_sequence: None,
            extrapolation_error_estimate: None,
            grid_n: None,
            flags: Vec::new(),
        }
    }
}

fn check_resolution(g: &Grid, k: u32) -> Result<()> {
    let limit = 1.0 / (4.0 * k as f64);
    if g.spacing() > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse {
            spacing: g.spacing(),
            limit,
            k,
        });
    }
    Ok(())
}

/// Cell averages of φₖ, rescaled to unit discrete mass.
pub fn mollifier_field(fam: &MollifierFamily, k: u32, g: &Grid) -> Field {
    let mut f = Field::zeros(g);
    let (lo, hi) = fam.support(k);
    for i in g.cell_of(lo)..=g.cell_of(hi) {
        f.values[i] = fam.cell_average(k, g.face(i), g.face(i + 1));
    }
    let mass = f.mass();
    if mass > 0.0 {
        for v in f.values.iter_mut() {
            *v /= mass;
        }
    }
    f
}

fn rank_one_with(op: &DiscreteOperator, w: &[(usize, f64)], fam: &MollifierFamily, k: u32) -> Result<f64> {
    let phi = mollifier_field(fam, k, op.grid());
    let psi = op.solve(&phi.values)?;
    Ok(apply_weights(w, &psi))
}

/// `R₀,ₖ = L M⁻¹ φₖ`, the spectral radius of the rank-one operator `BₖM⁻¹`.
pub fn r0_rank_one(m: &ModelSpec, fam: &MollifierFamily, k: u32, g: &Grid) -> Result<f64> {
    check_resolution(g, k)?;
    let op = assemble_operator(m, g)?;
    let w = BirthFunctional::from_model(m).weights(g);
    rank_one_with(&op, &w, fam, k)
}

/// Outcome of extrapolating a sequence `R₀,ₖ` to `k → ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    pub error_estimate: Option<f64>,
    pub fitted_order: Option<f64>,
    pub flags: Vec<String>,
}

/// Richardson extrapolation in `1/k` assuming a first-order error, with the
/// order fitted from the last three terms.
pub fn richardson(ks: &[u32], rs: &[f64]) -> Extrapolation {
    let n = rs.len();
    let mut flags = Vec::new();
    if n == 0 {
        return Extrapolation {
            value: f64::NAN,
            error_estimate: None,
            fitted_order: None,
            flags: vec!["empty sequence".into()],
        };
    }
    let last = rs[n - 1];
    if n == 1 {
        flags.push("single k: no extrapolation".into());
        return Extrapolation {
            value: last,
            error_estimate: None,
            fitted_order: None,
            flags,
        };
    }
    let step = |j: usize| {
        let (h0, h1) = (1.0 / ks[j - 1] as f64, 1.0 / ks[j] as f64);
        (h0 * rs[j] - h1 * rs[j - 1]) / (h0 - h1)
    };
    let noise = 1e-13 * last.abs().max(1e-300);
    // Smallest error an estimate may claim: a few roundoffs of the solve.
    let floor = 16.0 * f64::EPSILON * last.abs();
    if n == 2 {
        let e = step(1);
        return Extrapolation {
            value: e,
            error_estimate: Some((e - last).abs().max(floor)),
            fitted_order: None,
            flags,
        };
    }
    let d1 = rs[n - 2] - rs[n - 3];
    let d2 = rs[n - 1] - rs[n - 2];
    if d1.abs() <= noise && d2.abs() <= noise {
        return Extrapolation {
            value: last,
            error_estimate: Some(d1.abs().max(d2.abs()).max(floor)),
            fitted_order: None,
            flags,
        };
    }
    if d1 * d2 < 0.0 {
        flags.push("non-monotone sequence".into());
    }
    let q = ks[n - 2] as f64 / ks[n - 3] as f64;
    let p = (d1.abs() / d2.abs()).ln() / q.ln();
    if !p.is_finite() || (p - 1.0).abs() > 0.5 {
        flags.push(format!("fitted order {p:.3} far from 1: raw last value reported"));
        return Extrapolation {
            value: last,
            error_estimate: Some(d2.abs().max(floor)),
            fitted_order: Some(p),
            flags,
        };
    }
    let e_last = step(n - 1);
    let e_prev = step(n - 2);
    Extrapolation {
        value: e_last,
        error_estimate: Some((e_last - e_prev).abs().max(floor)),
        fitted_order: Some(p),
        flags,
    }
}

/// `R₀ = lim R₀,ₖ` from the k-schedule by Richardson extrapolation.
pub fn r0_limit(m: &ModelSpec, fam: &MollifierFamily, k_schedule: &[u32], g: &Grid) -> Result<R0Report> {
    if k_schedule.is_empty() || k_schedule.windows(2).any(|w| w[1] <= w[0]) || k_schedule[0] == 0 {
        return Err(Error::Domain(
            "k-schedule must be a nonempty increasing list of positive integers".into(),
        ));
    }
    check_resolution(g, *k_schedule.last().unwrap_or(&1))?;
    let op = assemble_operator(m, g)?;
    let w = BirthFunctional::from_model(m).weights(g);
    let values = k_schedule
        .par_iter()
        .map(|&k| rank_one_with(&op, &w, fam, k))
        .collect::<Result<Vec<f64>>>()?;
    let ex = richardson(k_schedule, &values);
    Ok(R0Report {
        value: ex.value,
        method: Method::GreenLimit,
        k_sequence: Some(k_schedule.iter().copied().zip(values).collect()),
        extrapolation_error_estimate: ex.error_estimate,
        grid_n: Some(g.n_cells()),
        flags: ex.flags,
    })
}

/// Spectral radius of the finite-rank next-generation operator
/// `u ↦ Σᵢ (Lᵢ M⁻¹u) φᵢ`, through the matrix `Kᵢⱼ = Lᵢ(M⁻¹φⱼ)`.
pub fn r0_finite_rank(m: &ModelSpec, functionals: &[BirthFunctional], densities: &[Field], g: &Grid) -> Result<f64> {
    let r = functionals.len();
    if r == 0 || densities.len() != r {
        return Err(Error::Domain(format!(
            "need matching nonempty lists, got {r} functionals and {} densities",
            densities.len()
        )));
    }
    let op = assemble_operator(m, g)?;
    let weights: Vec<Vec<(usize, f64)>> = functionals.iter().map(|f| f.weights(g)).collect();
    let mut kmat = vec![vec![0.0; r]; r];
    for (j, phi) in densities.iter().enumerate() {
        if phi.grid != *g {
            return Err(Error::Domain("density lives on a different grid".into()));
        }
        let col = op.solve(&phi.values)?;
        for i in 0..r {
            kmat[i][j] = apply_weights(&weights[i], &col);
        }
    }
    spectral_radius(&kmat)
}

/// Perron root of a nonnegative matrix by power iteration on `K + τI`.
pub fn spectral_radius(k: &[Vec<f64>]) -> Result<f64> {
    let r = k.len();
    if r == 1 {
        return Ok(k[0][0].abs());
    }
    // The shift makes the iteration aperiodic without moving the Perron vector.
    let tau = k.iter().flatten().map(|v| v.abs()).sum::<f64>() / r as f64;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0 / r as f64; r];
    let mut rho = f64::NAN;
    let mut change = f64::INFINITY;
    for _ in 0..10_000 {
        let y: Vec<f64> = (0..r)
            .map(|i| tau * x[i] + (0..r).map(|j| k[i][j] * x[j]).sum::<f64>())
            .collect();
        let total: f64 = y.iter().sum();
        let next = total / x.iter().sum::<f64>();
        x = y.iter().map(|v| v / total).collect();
        change = (next - rho).abs();
        rho = next;
        if change <= 1e-12 * rho.abs() {
            return Ok((rho - tau).max(0.0));
        }
    }
    Err(Error::NoConvergence {
        iterations: 10_000,
        change,
    })
}

/// Upper bound `‖LM⁻¹‖ ‖φₖ‖₁` on `R₀,ₖ`: the largest birth output of a
/// unit-mass single-cell density, through one transposed solve.
pub fn r0_upper_bound(m: &ModelSpec, fam: &MollifierFamily, k: u32, g: &Grid) -> Result<f64> {
    check_resolution(g, k)?;
    let op = assemble_operator(m, g)?;
    let mut w = vec![0.0; g.n_cells()];
    for (i, c) in BirthFunctional::from_model(m).weights(g) {
        w[i] += c;
    }
    let z = op.solve_transposed(&w)?;
    let worst = z.iter().fold(0.0f64, |a, &v| a.max(v));
    Ok(worst / g.spacing() * mollifier_field(fam, k, g).l1_norm())
}
