use proptest::prelude::*;
use r0kit::analytic::r0_analytic;
use r0kit::discrete::Grid;
use r0kit::model::{ModelSpec, MollifierFamily, MollifierKind, RateFunction, Table};
use r0kit::nextgen::{
    mollifier_field, r0_finite_rank, r0_limit, r0_rank_one, r0_upper_bound, spectral_radius, BirthFunctional,
    DEFAULT_SCHEDULE,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn quadratic(c: f64) -> ModelSpec {
    ModelSpec::age_diffusion(RateFunction::PowerExp { c, n: 2.0, r: 1.0 }, 1.0, 2.0)
}

#[test]
fn scaling_the_fertility_scales_every_r0() {
    let base = quadratic(1.0);
    let fam = MollifierFamily::for_model(MollifierKind::UniformIndicator, &base).unwrap();
    let g = Grid::for_model(&base, 1024, 256).unwrap();
    let phi = mollifier_field(&fam, 16, &g);
    for c in [0.3, 2.0, 17.5] {
        let scaled = quadratic(c);
        let a = r0_rank_one(&base, &fam, 16, &g).unwrap();
        let b = r0_rank_one(&scaled, &fam, 16, &g).unwrap();
        assert!(rel(b, c * a) < 1e-12, "rank one, c={c}");
        let a = r0_limit(&base, &fam, &DEFAULT_SCHEDULE, &g).unwrap().value;
        let b = r0_limit(&scaled, &fam, &DEFAULT_SCHEDULE, &g).unwrap().value;
        assert!(rel(b, c * a) < 1e-12, "limit, c={c}");
        let fs = [BirthFunctional::from_model(&base)];
        let fs_scaled = [BirthFunctional::from_model(&base).scaled(c)];
        let a = r0_finite_rank(&base, &fs, std::slice::from_ref(&phi), &g).unwrap();
        let b = r0_finite_rank(&base, &fs_scaled, std::slice::from_ref(&phi), &g).unwrap();
        assert!(rel(b, c * a) < 1e-12, "finite rank, c={c}");
    }
}

fn acceptance_models() -> Vec<ModelSpec> {
    let mortality = RateFunction::Tabulated(Table::new(vec![(0.0, 1.0), (3.0, 2.0), (6.0, 1.5)], true).unwrap());
    vec![
        ModelSpec::age_diffusion(RateFunction::Constant(2.0), 1.0, 1.0),
        quadratic(1.0),
        ModelSpec::age_diffusion(
            RateFunction::Step {
                threshold: 1.0,
                level: std::f64::consts::E,
            },
            1.0,
            1.0,
        ),
        ModelSpec::size_structured(
            RateFunction::Constant(1.5),
            mortality,
            RateFunction::ProportionalToMu(2.0),
            0.7,
        ),
    ]
}

#[test]
fn limit_is_independent_of_the_family() {
    for m in acceptance_models() {
        let g = Grid::for_model(&m, 4096, 256).unwrap();
        let run = |kind| {
            let fam = MollifierFamily::for_model(kind, &m).unwrap();
            r0_limit(&m, &fam, &DEFAULT_SCHEDULE, &g).unwrap()
        };
        let u = run(MollifierKind::UniformIndicator);
        let b = run(MollifierKind::SmoothBump);
        let budget = u.extrapolation_error_estimate.unwrap() + b.extrapolation_error_estimate.unwrap();
        assert!(
            (u.value - b.value).abs() <= budget,
            "{m}: {} vs {} (budget {budget:e})",
            u.value,
            b.value
        );
        if let Ok(exact) = r0_analytic(&m) {
            assert!((u.value - exact).abs() < 1e-4, "{m}: {} vs {exact}", u.value);
        }
    }
}

#[test]
fn finite_rank_with_one_density_sums_the_functionals() {
    let m = quadratic(1.0);
    let fam = MollifierFamily::for_model(MollifierKind::Triangular, &m).unwrap();
    let g = Grid::for_model(&m, 1024, 32).unwrap();
    let phi = mollifier_field(&fam, 32, &g);
    let l1 = BirthFunctional::from_model(&m);
    let l2 = BirthFunctional::IntegralBeta {
        beta: RateFunction::Step {
            threshold: 2.0,
            level: 0.5,
        },
        mu: m.mu.clone(),
        scale: 1.0,
    };
    let a1 = r0_finite_rank(&m, std::slice::from_ref(&l1), std::slice::from_ref(&phi), &g).unwrap();
    let a2 = r0_finite_rank(&m, std::slice::from_ref(&l2), std::slice::from_ref(&phi), &g).unwrap();
    let both = r0_finite_rank(&m, &[l1, l2], &[phi.clone(), phi], &g).unwrap();
    assert!(rel(both, a1 + a2) < 1e-10, "{both} vs {}", a1 + a2);
}

#[test]
fn finite_rank_with_separate_cohorts_is_block_structured() {
    // Pure transport: the older cohort never reaches the early window, so
    // K = [[a, 0], [b, c]].
    let m = ModelSpec::size_structured(
        RateFunction::Constant(1.0),
        RateFunction::Constant(1.0),
        RateFunction::Constant(0.0),
        0.0,
    );
    let g = Grid::new(0.0, 30.0, 3000).unwrap();
    let early = BirthFunctional::IntegralBeta {
        beta: RateFunction::Tabulated(
            Table::new(vec![(0.0, 1.0), (5.0, 1.0), (5.01, 0.0), (40.0, 0.0)], true).unwrap(),
        ),
        mu: m.mu.clone(),
        scale: 1.0,
    };
    let late = BirthFunctional::IntegralBeta {
        beta: RateFunction::Step {
            threshold: 10.0,
            level: 3.0,
        },
        mu: m.mu.clone(),
        scale: 1.0,
    };
    let young = r0kit::discrete::Field::cell_indicator(&g, 0.05);
    let old = r0kit::discrete::Field::cell_indicator(&g, 12.0);
    let k = r0_finite_rank(&m, &[early.clone(), late.clone()], &[young.clone(), old.clone()], &g).unwrap();
    let a = r0_finite_rank(&m, std::slice::from_ref(&early), std::slice::from_ref(&young), &g).unwrap();
    let c = r0_finite_rank(&m, std::slice::from_ref(&late), std::slice::from_ref(&old), &g).unwrap();
    assert!(rel(k, a.max(c)) < 1e-9, "{k} vs max({a}, {c})");
}

#[test]
fn upper_bound_dominates_along_the_schedule() {
    for m in acceptance_models() {
        let fam = MollifierFamily::for_model(MollifierKind::UniformIndicator, &m).unwrap();
        let g = Grid::for_model(&m, 1024, 64).unwrap();
        for k in [8, 64] {
            let r = r0_rank_one(&m, &fam, k, &g).unwrap();
            let ub = r0_upper_bound(&m, &fam, k, &g).unwrap();
            assert!(r <= ub * (1.0 + 1e-12), "{m} k={k}: {r} > {ub}");
        }
    }
}

proptest! {
    #[test]
    fn spectral_radius_of_two_by_two(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0, d in 0.0f64..5.0) {
        let tr = a + d;
        let det = a * d - b * c;
        let exact = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
        let rho = spectral_radius(&[vec![a, b], vec![c, d]]).unwrap();
        prop_assert!((rho - exact).abs() <= 1e-9 * exact.max(1.0));
    }
}
