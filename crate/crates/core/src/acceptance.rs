//! Cross-route validation suite: one row per acceptance criterion, each with
//! its measured values and pinned tolerances.

use std::fmt;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::analytic::{
    optimal_diffusion, r0_age_diffusion, r0_cell_point_mass, r0_quadratic_beta, r0_step_beta, Maximiser,
};
use crate::discrete::{assemble_interior_jump, assemble_operator, leading_eigenvalue, solve_inverse, Field, Grid};
use crate::error::{Error, Result};
use crate::greens::{minv_indicator, psi_infinity_age};
use crate::heatkernel::{integral_identity_check, r0_time_domain, time_integrated_kernel, KChoice};
use crate::model::{ModelSpec, MollifierFamily, MollifierKind, RateFunction, Table};
use crate::nextgen::{r0_limit, r0_rank_one, R0Report, DEFAULT_SCHEDULE};
use crate::semigroup::{sign_consistency, EvolutionState, Scheme, Stepper, CRITICAL_BAND};

pub const DEFAULT_SEED: u64 = 20_240_601;

const ROUTE_TOL: f64 = 1e-3;
const ROUTE_SECONDS: f64 = 5.0;
const QUADRATIC_EXACT_TOL: f64 = 1e-12;
const QUADRATIC_ROUTE_TOL: f64 = 1e-4;
const OPTIMUM_TOL: f64 = 1e-5;
const STEP_LIMIT_TOL: f64 = 1e-3;
const IDENTITY_TOL: f64 = 1e-6;
const KERNEL_TOL: f64 = 1e-12;
const TIME_ROUTE_TOL: f64 = 1e-6;
const FAMILY_ABS_TOL: f64 = 5e-4;
const ORDER_TARGET: f64 = -1.0;
const ORDER_TOL: f64 = 0.3;
const THRESHOLD_REL_TOL: f64 = 0.01;
const PROPORTIONAL_TOL: f64 = 1e-3;
const ORACLE_L1_TOL: f64 = 1e-3;
const DRIFT_TOL: f64 = 1e-12;

const GRID_N: usize = 4096;
const FINE_GRID_N: usize = 8192;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub group: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub measured: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<13} {} | {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.group,
            self.title,
            self.measured,
            self.seconds
        )
    }
}

type Check = fn(u64) -> Result<(bool, String)>;

struct Criterion {
    id: u32,
    group: &'static str,
    title: &'static str,
    check: Check,
}

const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        group: "constant",
        title: "constant fertility is independent of D on every route",
        check: constant_fertility,
    },
    Criterion {
        id: 2,
        group: "quadratic",
        title: "quadratic-exponential fertility and its optimal D",
        check: quadratic_fertility,
    },
    Criterion {
        id: 3,
        group: "step",
        title: "step fertility increases with D between its limits",
        check: step_fertility,
    },
    Criterion {
        id: 4,
        group: "appendix",
        title: "time-integral identity for the heat kernel",
        check: integral_identity,
    },
    Criterion {
        id: 5,
        group: "appendix",
        title: "time-domain route equals the Green's-function route",
        check: route_equivalence,
    },
    Criterion {
        id: 6,
        group: "sequence",
        title: "limit does not depend on the mollifier family",
        check: sequence_independence,
    },
    Criterion {
        id: 7,
        group: "order",
        title: "first-order convergence in 1/k",
        check: convergence_order,
    },
    Criterion {
        id: 8,
        group: "cell",
        title: "cell division threshold from the flux-jump operator",
        check: cell_model,
    },
    Criterion {
        id: 9,
        group: "proportional",
        title: "proportional vital rates give R0 = beta/mu",
        check: proportional_rates,
    },
    Criterion {
        id: 10,
        group: "sign",
        title: "sign of R0 - 1 matches the growth exponent",
        check: sign_matrix,
    },
    Criterion {
        id: 11,
        group: "oracle",
        title: "discrete inverse matches the closed-form image",
        check: oracle_equivalence,
    },
    Criterion {
        id: 12,
        group: "conservation",
        title: "mass conservation without births and deaths",
        check: conservation,
    },
];

/// `(id, group, title)` of every criterion.
pub fn criteria() -> Vec<(u32, &'static str, &'static str)> {
    CRITERIA.iter().map(|c| (c.id, c.group, c.title)).collect()
}

fn matches_filter(c: &Criterion, filter: Option<&str>) -> bool {
    match filter {
        None | Some("") | Some("all") => true,
        Some(f) => f.split(',').any(|t| {
            let t = t.trim();
            t == c.group || t.parse::<u32>().is_ok_and(|id| id == c.id)
        }),
    }
}

/// Runs one criterion by id.
pub fn run_criterion(id: u32, seed: u64) -> Option<CriterionResult> {
    CRITERIA.iter().find(|c| c.id == id).map(|c| evaluate(c, seed))
}

/// Runs every criterion selected by `filter` (a group name or id, comma separated).
pub fn run(filter: Option<&str>, seed: u64) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| matches_filter(c, filter))
        .map(|c| evaluate(c, seed))
        .collect()
}

fn evaluate(c: &Criterion, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let (passed, measured) = match (c.check)(seed) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id: c.id,
        group: c.group,
        title: c.title,
        passed,
        measured,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn uniform(m: &ModelSpec) -> Result<MollifierFamily> {
    MollifierFamily::for_model(MollifierKind::UniformIndicator, m)
}

fn green_limit(m: &ModelSpec, kind: MollifierKind, n: usize) -> Result<R0Report> {
    let g = Grid::for_model(m, n, 256)?;
    let fam = MollifierFamily::for_model(kind, m)?;
    r0_limit(m, &fam, &DEFAULT_SCHEDULE, &g)
}

fn constant_fertility(_: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut out = Vec::new();
    for d in [0.1, 1.0, 10.0] {
        let m = ModelSpec::age_diffusion(RateFunction::Constant(2.0), 1.0, d);
        let a = r0_age_diffusion(&m)?;
        let t0 = Instant::now();
        let gl = green_limit(&m, MollifierKind::UniformIndicator, GRID_N)?.value;
        let t_gl = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let td = r0_time_domain(&m, KChoice::Limit)?;
        let t_td = t1.elapsed().as_secs_f64();
        ok &= a == 2.0
            && (gl - 2.0).abs() <= ROUTE_TOL
            && (td - 2.0).abs() <= ROUTE_TOL
            && t_gl <= ROUTE_SECONDS
            && t_td <= ROUTE_SECONDS;
        out.push(format!(
            "D={d}: analytic={a} green={gl:.9} time={td:.9} ({t_gl:.2}s/{t_td:.2}s)"
        ));
    }
    Ok((ok, out.join("; ")))
}

fn quadratic_fertility(_: u64) -> Result<(bool, String)> {
    let exact = 8.0 / 27.0;
    let closed = r0_quadratic_beta(1.0, 1.0, 2.0);
    let m = ModelSpec::age_diffusion(RateFunction::PowerExp { c: 1.0, n: 2.0, r: 1.0 }, 1.0, 2.0);
    let gl = green_limit(&m, MollifierKind::UniformIndicator, GRID_N)?.value;
    let opt = optimal_diffusion(&m.beta, 1.0)?;
    let small_d = r0_quadratic_beta(1.0, 1.0, 1e-7);
    let d_ok = matches!(opt.d_star, Maximiser::Interior(d) if (d - 2.0).abs() <= OPTIMUM_TOL);
    let ok = (closed - exact).abs() <= QUADRATIC_EXACT_TOL
        && (gl - exact).abs() <= QUADRATIC_ROUTE_TOL
        && d_ok
        && (opt.r0_star - exact).abs() <= OPTIMUM_TOL
        && (small_d - 0.25).abs() <= OPTIMUM_TOL;
    Ok((
        ok,
        format!(
            "closed={closed:.15} green={gl:.9} D*={:?} R0*={:.12} D->0: {small_d:.9}",
            opt.d_star, opt.r0_star
        ),
    ))
}

fn step_fertility(_: u64) -> Result<(bool, String)> {
    let e = std::f64::consts::E;
    let beta = RateFunction::Step {
        threshold: 1.0,
        level: e,
    };
    let ds: Vec<f64> = (0..20).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 19.0)).collect();
    let values = ds
        .iter()
        .map(|&d| r0_age_diffusion(&ModelSpec::age_diffusion(beta.clone(), 1.0, d)))
        .collect::<Result<Vec<f64>>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let at_zero = r0_step_beta(e, 1.0, 0.0);
    let far = r0_step_beta(e, 1.0, 1e6);
    let ok = increasing && at_zero == 1.0 && (far - e).abs() <= STEP_LIMIT_TOL;
    Ok((
        ok,
        format!(
            "increasing={increasing} ({:.6}..{:.6}) D=0: {at_zero} D=1e6: {far:.9} (|diff|={:.3e})",
            values[0],
            values[19],
            (far - e).abs()
        ),
    ))
}

fn integral_identity(_: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for a in [0.0, 1.0, 3.0] {
        for mu in [0.5, 1.0, 2.0] {
            for d in [0.25, 1.0, 4.0] {
                let (lhs, rhs) = integral_identity_check(a, mu, d)?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok((
        worst <= IDENTITY_TOL,
        format!("max |lhs - rhs| = {worst:.3e} over 27 cases"),
    ))
}

fn route_equivalence(seed: u64) -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut kernel_gap: f64 = 0.0;
    for _ in 0..100 {
        let a = rng.gen_range(0.0..20.0);
        let mu = rng.gen_range(0.1..5.0);
        let d = rng.gen_range(0.05..20.0);
        kernel_gap = kernel_gap.max((time_integrated_kernel(a, mu, d) - psi_infinity_age(a, mu, d)).abs());
    }
    let betas = [
        RateFunction::Constant(2.0),
        RateFunction::PowerExp { c: 1.0, n: 2.0, r: 1.0 },
        RateFunction::Step {
            threshold: 1.0,
            level: 1.0,
        },
    ];
    let params = [(1.0, 2.0), (0.5, 0.25), (2.0, 4.0)];
    let cases: Vec<(RateFunction, f64, f64)> = betas
        .iter()
        .flat_map(|b| params.iter().map(move |&(mu, d)| (b.clone(), mu, d)))
        .collect();
    let gaps = cases
        .par_iter()
        .map(|(b, mu, d)| {
            let m = ModelSpec::age_diffusion(b.clone(), *mu, *d);
            Ok((r0_time_domain(&m, KChoice::Limit)? - r0_age_diffusion(&m)?).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let route_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok((
        kernel_gap <= KERNEL_TOL && route_gap <= TIME_ROUTE_TOL,
        format!("kernel gap {kernel_gap:.3e} (100 points), route gap {route_gap:.3e} (9 models)"),
    ))
}

fn sequence_independence(_: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut out = Vec::new();
    for (name, beta) in [
        ("constant", RateFunction::Constant(2.0)),
        ("quadratic", RateFunction::PowerExp { c: 1.0, n: 2.0, r: 1.0 }),
    ] {
        let m = ModelSpec::age_diffusion(beta, 1.0, 2.0);
        let u = green_limit(&m, MollifierKind::UniformIndicator, GRID_N)?;
        let t = green_limit(&m, MollifierKind::Triangular, GRID_N)?;
        let gap = (u.value - t.value).abs();
        let combined = u.extrapolation_error_estimate.unwrap_or(0.0) + t.extrapolation_error_estimate.unwrap_or(0.0);
        ok &= gap <= combined && gap <= FAMILY_ABS_TOL;
        out.push(format!(
            "{name}: uniform={:.10} triangular={:.10} gap={gap:.2e} combined estimate={combined:.2e}",
            u.value, t.value
        ));
    }
    Ok((ok, out.join("; ")))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn convergence_order(_: u64) -> Result<(bool, String)> {
    let m = ModelSpec::age_diffusion(RateFunction::Constant(2.0), 1.0, 2.0);
    let exact = r0_age_diffusion(&m)?;
    let g = Grid::for_model(&m, FINE_GRID_N, 256)?;
    let fam = uniform(&m)?;
    let ks: Vec<f64> = DEFAULT_SCHEDULE.iter().map(|&k| k as f64).collect();
    let errors = DEFAULT_SCHEDULE
        .iter()
        .map(|&k| Ok((r0_rank_one(&m, &fam, k, &g)? - exact).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let listing = errors.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(",");
    if errors.contains(&0.0) {
        return Ok((false, format!("slope undefined: errors at roundoff level [{listing}]")));
    }
    let slope = log_log_slope(&ks, &errors);
    Ok((
        (slope - ORDER_TARGET).abs() <= ORDER_TOL,
        format!("slope {slope:.3} from errors [{listing}]"),
    ))
}

fn cell_model(_: u64) -> Result<(bool, String)> {
    let m = ModelSpec::cell_division(RateFunction::Constant(1.0), RateFunction::Constant(1.0));
    let r0 = r0_cell_point_mass(&m)?;
    let g = Grid::new(0.0, 1.0, 2048)?;
    let op = assemble_interior_jump(&m, &g, 0.5)?;
    let growth = |c: f64| leading_eigenvalue(&op.with_jump_scale(c), 0.0);
    let (lo_c, hi_c) = (0.5 / 1.213061, 2.0 / 1.213061);
    let (lo_l, hi_l) = (growth(lo_c)?, growth(hi_c)?);
    let (mut a, mut b) = (lo_c, hi_c);
    while b - a > 1e-10 * b {
        let c = 0.5 * (a + b);
        match growth(c) {
            Ok(l) if l < 0.0 => a = c,
            Ok(_) => b = c,
            // Zero is an eigenvalue: c is the threshold itself.
            Err(Error::Singular { .. }) => {
                (a, b) = (c, c);
            }
            Err(e) => return Err(e),
        }
    }
    let c_star = 0.5 * (a + b);
    let analytic_c = 1.0 / r0;
    let rel = (c_star - analytic_c).abs() / analytic_c;
    let ok = (r0 - 1.213061).abs() <= 1e-6 && lo_l < 0.0 && hi_l > 0.0 && rel <= THRESHOLD_REL_TOL;
    Ok((
        ok,
        format!(
            "R0={r0:.9} growth({lo_c:.4})={lo_l:.4} growth({hi_c:.4})={hi_l:.4} threshold c={c_star:.6} vs {analytic_c:.6} (rel {rel:.2e})"
        ),
    ))
}

fn random_mortality() -> RateFunction {
    RateFunction::Tabulated(
        Table::new(vec![(0.0, 1.0), (3.0, 2.0), (6.0, 1.5)], true).unwrap_or_else(|_| unreachable!()),
    )
}

fn proportional_rates(seed: u64) -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut cases = Vec::new();
    for f in [0.5, 1.0, 3.0] {
        for _ in 0..3 {
            cases.push((f, rng.gen_range(0.5..3.0), rng.gen_range(0.0..3.0)));
        }
    }
    let results = cases
        .par_iter()
        .map(|&(f, gamma, d)| {
            let m = ModelSpec::size_structured(
                RateFunction::Constant(gamma),
                random_mortality(),
                RateFunction::ProportionalToMu(f),
                d,
            );
            Ok((f, green_limit(&m, MollifierKind::UniformIndicator, GRID_N)?.value))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let worst = results.iter().map(|(f, v)| (f - v).abs()).fold(0.0, f64::max);
    Ok((
        worst <= PROPORTIONAL_TOL,
        format!("max |R0 - factor| = {worst:.3e} over 9 draws"),
    ))
}

fn sign_matrix(_: u64) -> Result<(bool, String)> {
    let mut cases = Vec::new();
    for f in [0.5, 1.0, 2.0] {
        for model in 0..2 {
            for k in [16u32, 64] {
                cases.push((f, model, k));
            }
        }
    }
    let rows = cases
        .par_iter()
        .map(|&(f, model, k)| {
            let m = if model == 0 {
                ModelSpec::age_diffusion(RateFunction::Constant(f), 1.0, 2.0)
            } else {
                ModelSpec::size_structured(
                    RateFunction::Constant(1.0),
                    random_mortality(),
                    RateFunction::ProportionalToMu(f),
                    0.5,
                )
            };
            let g = Grid::for_model(&m, 2048, k)?;
            let fam = uniform(&m)?;
            let r = sign_consistency(&m, &fam, k, &g, 1e-2)?;
            Ok((f, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let all_consistent = rows.iter().all(|(_, r)| r.consistent);
    let critical = rows
        .iter()
        .filter(|(f, _)| *f == 1.0)
        .map(|(_, r)| r.malthus.abs())
        .fold(0.0, f64::max);
    let summary = rows
        .iter()
        .map(|(_, r)| format!("{:.3}/{:+.2e}", r.r0_k, r.malthus))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((
        all_consistent && critical < CRITICAL_BAND,
        format!("critical |malthus|={critical:.2e}; R0k/malthus: {summary}"),
    ))
}

fn oracle_equivalence(_: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (mu, d) in [(1.0, 2.0), (2.0, 1.0)] {
        let m = ModelSpec::age_diffusion(RateFunction::Constant(1.0), mu, d);
        // Faces on multiples of 1/128 with exactly 8192 cells covering the truncation.
        let j = (FINE_GRID_N as f64 / (128.0 * m.truncation())).floor().max(1.0);
        let g = Grid::new(0.0, FINE_GRID_N as f64 / (128.0 * j), FINE_GRID_N)?;
        let op = assemble_operator(&m, &g)?;
        for k in [8u32, 32, 128] {
            let w = 1.0 / k as f64;
            let rhs = Field::from_fn(&g, |x| if x <= w { k as f64 } else { 0.0 }, &[w]);
            let u = solve_inverse(&op, &rhs)?;
            worst = worst.max(u.l1_distance_to(|a| minv_indicator(a, k, mu, d)));
        }
    }
    Ok((worst < ORACLE_L1_TOL, format!("max L1 error {worst:.3e} over 6 cases")))
}

fn conservation(_: u64) -> Result<(bool, String)> {
    let mut m = ModelSpec::size_structured(
        RateFunction::Constant(1.0),
        RateFunction::Constant(0.0),
        RateFunction::Constant(0.0),
        0.5,
    );
    m.x_max = 10.0;
    let g = Grid::new(0.0, 10.0, 1024)?;
    let fam = uniform(&m)?;
    let stepper = Stepper::new(&m, &fam, 8, &g, 1e-3, Scheme::ImplicitEuler)?;
    let init = Field::from_fn(&g, |x| (-(x - 3.0).powi(2)).exp(), &[]);
    let m0 = init.mass();
    let end = stepper.run(EvolutionState::new(init), 1000)?;
    let drift = ((end.mass() - m0) / m0).abs();
    Ok((
        drift < DRIFT_TOL,
        format!("relative drift {drift:.3e} after 1000 steps"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_groups_and_ids() {
        let pick = |f: &str| {
            CRITERIA
                .iter()
                .filter(|c| matches_filter(c, Some(f)))
                .map(|c| c.id)
                .collect::<Vec<_>>()
        };
        assert_eq!(pick("appendix"), vec![4, 5]);
        assert_eq!(pick("1,12"), vec![1, 12]);
        assert_eq!(pick("all").len(), 12);
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 / x).collect();
        assert!((log_log_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }
}
