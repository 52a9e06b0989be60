//! Time stepping of `u′ = −Mu + (Lu)φₖ` on the finite-volume grid.

use crate::discrete::{assemble_operator, DiscreteOperator, Field, Grid};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, MollifierFamily};
use crate::nextgen::{apply_weights, mollifier_field, r0_rank_one, BirthFunctional};

/// Mass may grow at most like `e^(GROWTH_GUARD · t)` before a run is aborted.
pub const GROWTH_GUARD: f64 = 10.0;

/// Half-width of the band around criticality where signs are not compared.
pub const CRITICAL_BAND: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub field: Field,
    pub time: f64,
    /// `(t, ∫u)` after every step, starting with the initial state.
    pub mass_history: Vec<(f64, f64)>,
}

impl EvolutionState {
    pub fn new(field: Field) -> Self {
        let mass = field.mass();
        Self {
            field,
            time: 0.0,
            mass_history: vec![(0.0, mass)],
        }
    }

    pub fn mass(&self) -> f64 {
        self.field.mass()
    }
}

/// Terms of the discrete balance law for one step, each already multiplied by dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub mass_change: f64,
    pub outflow: f64,
    pub mortality: f64,
    pub births: f64,
}

impl LedgerEntry {
    /// `mass_change − (births − outflow − mortality)`
    pub fn imbalance(&self) -> f64 {
        self.mass_change - (self.births - self.outflow - self.mortality)
    }
}

/// A fixed-step integrator for one model, mollifier and k.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: DiscreteOperator,
    weights: Vec<(usize, f64)>,
    phi: Vec<f64>,
    dt: f64,
    scheme: Scheme,
}

impl Stepper {
    /// Rejects `dt` unless `dt ‖LM⁻¹‖ < 1`.
    pub fn new(m: &ModelSpec, fam: &MollifierFamily, k: u32, g: &Grid, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let op = assemble_operator(m, g)?;
        let weights = BirthFunctional::from_model(m).weights(g);
        let phi = mollifier_field(fam, k, g).values;
        let mut w = vec![0.0; g.n_cells()];
        for &(i, c) in &weights {
            w[i] += c;
        }
        let norm = if weights.iter().all(|&(_, c)| c == 0.0) {
            0.0
        } else {
            op.solve_transposed(&w)?.iter().fold(0.0f64, |a, v| a.max(v.abs())) / g.spacing()
        };
        if dt * norm >= 1.0 {
            return Err(Error::Instability(format!(
                "dt·‖LM⁻¹‖ = {:.3} ≥ 1; reduce the time step",
                dt * norm
            )));
        }
        Ok(Self {
            op,
            weights,
            phi,
            dt,
            scheme,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    /// Advances one step and returns the balance terms of that step.
    pub fn step(&self, state: EvolutionState) -> Result<(EvolutionState, LedgerEntry)> {
        let u = &state.field.values;
        let g = state.field.grid;
        let h = g.spacing();
        let dt = self.dt;
        let births = apply_weights(&self.weights, u);
        let next = match self.scheme {
            Scheme::ImplicitEuler => {
                let rhs: Vec<f64> = u.iter().zip(&self.phi).map(|(v, p)| v + dt * births * p).collect();
                self.op.solve_affine(1.0, dt, &rhs)?
            }
            Scheme::CrankNicolson => {
                let au = self.op.apply(u);
                let rhs: Vec<f64> = (0..u.len())
                    .map(|i| u[i] - 0.5 * dt * au[i] + dt * births * self.phi[i])
                    .collect();
                self.op.solve_affine(1.0, 0.5 * dt, &rhs)?
            }
        };

        // Loss terms are evaluated where the scheme evaluates Mu.
        let loss_state: Vec<f64> = match self.scheme {
            Scheme::ImplicitEuler => next.clone(),
            Scheme::CrankNicolson => next.iter().zip(u).map(|(a, b)| 0.5 * (a + b)).collect(),
        };
        let mu = self.op.mortality();
        let ledger = LedgerEntry {
            mass_change: h * next.iter().zip(u).map(|(a, b)| a - b).sum::<f64>(),
            outflow: dt * self.op.boundary_outflow(&loss_state),
            mortality: dt * h * loss_state.iter().zip(mu).map(|(v, m)| v * m).sum::<f64>(),
            births: dt * births * h * self.phi.iter().sum::<f64>(),
        };

        let time = state.time + dt;
        let field = Field::from_values(&g, next)?;
        let mass = field.mass();
        let start = state.mass_history.first().map(|p| p.1).unwrap_or(mass);
        if !mass.is_finite() || (start > 0.0 && mass > start * (GROWTH_GUARD * time).exp()) {
            return Err(Error::Instability(format!("mass {mass:.3e} at t = {time}")));
        }
        let mut mass_history = state.mass_history;
        mass_history.push((time, mass));
        Ok((
            EvolutionState {
                field,
                time,
                mass_history,
            },
            ledger,
        ))
    }

    /// Runs `steps` steps.
    pub fn run(&self, state: EvolutionState, steps: usize) -> Result<EvolutionState> {
        let mut s = state;
        for _ in 0..steps {
            s = self.step(s)?.0;
        }
        Ok(s)
    }
}

/// One implicit Euler step of the model with births `(Lu)φₖ`.
pub fn step(m: &ModelSpec, fam: &MollifierFamily, k: u32, state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    let g = state.field.grid;
    Ok(Stepper::new(m, fam, k, &g, dt, Scheme::ImplicitEuler)?
        .step(state.clone())?
        .0)
}

/// Default horizon `50/μ_min`.
pub fn default_horizon(m: &ModelSpec) -> f64 {
    50.0 / m.rate_bounds(&m.mu).0
}

/// Dominant growth exponent: the least-squares slope of `log ∫u` over the
/// final third of `[0, T]`, starting from `u = φₖ`.
pub fn malthus_estimate(
    m: &ModelSpec,
    fam: &MollifierFamily,
    k: u32,
    g: &Grid,
    t_end: Option<f64>,
    dt: f64,
) -> Result<f64> {
    let t_end = t_end.unwrap_or_else(|| default_horizon(m));
    let stepper = Stepper::new(m, fam, k, g, dt, Scheme::ImplicitEuler)?;
    let steps = (t_end / dt).round().max(3.0) as usize;
    let mut state = EvolutionState::new(mollifier_field(fam, k, g));
    let mut log_mass = 0.0;
    let mut samples = Vec::new();
    for i in 1..=steps {
        let (mut next, _) = stepper.step(state)?;
        let mass = next.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::DegenerateFit(format!(
                "total mass {mass:.3e} at t = {:.4}",
                next.time
            )));
        }
        log_mass += mass.ln();
        for v in next.field.values.iter_mut() {
            *v /= mass;
        }
        // Renormalised: the guard compares growth over a single step.
        next.mass_history.clear();
        next.mass_history.push((0.0, 1.0));
        next.time = 0.0;
        state = next;
        if 3 * i >= 2 * steps {
            samples.push((i as f64 * dt, log_mass));
        }
    }
    least_squares_slope(&samples)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Result<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two samples".into()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all samples at one time".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignReport {
    pub r0_k: f64,
    pub malthus: f64,
    pub consistent: bool,
}

/// Compares the sign of `R₀,ₖ − 1` with the sign of the growth exponent.
pub fn sign_consistency(m: &ModelSpec, fam: &MollifierFamily, k: u32, g: &Grid, dt: f64) -> Result<SignReport> {
    let r0_k = r0_rank_one(m, fam, k, g)?;
    let malthus = malthus_estimate(m, fam, k, g, None, dt)?;
    let excess = r0_k - 1.0;
    let critical = excess.abs() < CRITICAL_BAND && malthus.abs() < CRITICAL_BAND;
    let same_side = (excess > 0.0 && malthus > 0.0) || (excess < 0.0 && malthus < 0.0);
    Ok(SignReport {
        r0_k,
        malthus,
        consistent: critical || same_side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MollifierKind, RateFunction};

    fn closed_box(mu: f64, beta: f64) -> (ModelSpec, MollifierFamily, Grid) {
        let mut m = ModelSpec::size_structured(
            RateFunction::Constant(1.0),
            RateFunction::Constant(mu),
            RateFunction::Constant(beta),
            0.5,
        );
        m.x_max = 8.0;
        let fam = MollifierFamily::for_model(MollifierKind::UniformIndicator, &m).unwrap();
        let g = Grid::new(0.0, 8.0, 512).unwrap();
        (m, fam, g)
    }

    #[test]
    fn mass_is_conserved_without_births_or_deaths() {
        let (m, fam, g) = closed_box(0.0, 0.0);
        let stepper = Stepper::new(&m, &fam, 8, &g, 1e-2, Scheme::ImplicitEuler).unwrap();
        let init = Field::from_fn(&g, |x| (-(x - 2.0).powi(2)).exp(), &[]);
        let m0 = init.mass();
        let s = stepper.run(EvolutionState::new(init), 1000).unwrap();
        assert!(((s.mass() - m0) / m0).abs() < 1e-12);
        assert!(s.field.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn implicit_euler_mass_follows_discrete_decay() {
        let (m, fam, g) = closed_box(1.0, 0.0);
        let dt = 1e-2;
        let stepper = Stepper::new(&m, &fam, 8, &g, dt, Scheme::ImplicitEuler).unwrap();
        let s = stepper
            .run(EvolutionState::new(mollifier_field(&fam, 8, &g)), 100)
            .unwrap();
        let expected = (1.0 + dt).powi(-100);
        assert!((s.mass() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crank_nicolson_tracks_exponential_decay() {
        let (m, fam, g) = closed_box(1.0, 0.0);
        let stepper = Stepper::new(&m, &fam, 8, &g, 1e-4, Scheme::CrankNicolson).unwrap();
        let s = stepper
            .run(EvolutionState::new(mollifier_field(&fam, 8, &g)), 10_000)
            .unwrap();
        assert!((s.mass() / (-1.0f64).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ledger_balances() {
        let (m, fam, g) = closed_box(0.7, 1.3);
        for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
            let stepper = Stepper::new(&m, &fam, 16, &g, 5e-3, scheme).unwrap();
            let mut s = EvolutionState::new(Field::from_fn(&g, |x| 1.0 + x.sin().abs(), &[]));
            for _ in 0..50 {
                let (next, ledger) = stepper.step(s).unwrap();
                assert!(ledger.imbalance().abs() <= 1e-12 * next.mass());
                s = next;
            }
        }
    }

    #[test]
    fn large_time_step_is_refused() {
        let (m, fam, g) = closed_box(1.0, 2.0);
        assert!(matches!(
            Stepper::new(&m, &fam, 8, &g, 1.0, Scheme::ImplicitEuler),
            Err(Error::Instability(_))
        ));
    }

    #[test]
    fn growth_sign_follows_fertility() {
        let (m, fam, g) = closed_box(1.0, 2.0);
        assert!(malthus_estimate(&m, &fam, 8, &g, Some(20.0), 1e-2).unwrap() > 0.0);
        let (m, fam, g) = closed_box(1.0, 0.5);
        assert!(malthus_estimate(&m, &fam, 8, &g, Some(20.0), 1e-2).unwrap() < 0.0);
        let (m, fam, g) = closed_box(1.0, 0.0);
        let r = sign_consistency(&m, &fam, 8, &g, 1e-2).unwrap();
        assert_eq!(r.r0_k, 0.0);
        assert!(r.malthus < 0.0 && r.consistent);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.25 * i as f64)).collect();
        assert!((least_squares_slope(&pts).unwrap() + 0.25).abs() < 1e-14);
        assert!(least_squares_slope(&pts[..1]).is_err());
    }
}
