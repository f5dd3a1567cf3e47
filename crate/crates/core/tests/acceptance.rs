//! Acceptance gate. Every criterion prints one PASS/FAIL line and asserts.
//!
//! Run with `cargo test -p srk-core --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{draw_family, eff05, eff_ii, eff_x};
use srk_core::convergence::{strong_order_estimate, DEFAULT_PATHS, DEFAULT_STEP_COUNTS};
use srk_core::families::FamilyId;
use srk_core::solver::{path_rng, simulate_path, ExactReference, SolverConfig};
use srk_core::stability::{
    a_stability_probe, closed_form_gain, ms_gain, region_grid, response_polynomial,
    ClosedFormScheme, ProbeSampler, TestPoint,
};
use srk_core::tableau::{order_residuals, StrongOrder};
use srk_core::FamilySpec;

fn report(criterion: u32, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} | {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_order_conditions_over_random_draws() {
    let start = Instant::now();
    let mut worst_residual: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    let mut failures = Vec::new();
    for (idx, family) in FamilyId::CLASSES.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + idx as u64);
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 100 {
            attempts += 1;
            assert!(attempts < 100_000, "{family}: too few admissible draws");
            let Some((spec, t)) = draw_family(family, &mut rng) else {
                continue;
            };
            accepted += 1;
            let rep = order_residuals(&t, family.order()).unwrap();
            worst_residual = worst_residual.max(rep.max_residual);
            if rep.max_residual > 1e-12 {
                failures.push(format!(
                    "{family} residual {:.2e} at {:?}",
                    rep.max_residual, spec.params
                ));
            }
            if family.order() == StrongOrder::One {
                let lambda = rep.lambda.unwrap();
                let expected = family.lambda().unwrap();
                worst_lambda = worst_lambda.max((lambda - expected).abs());
                if (lambda - expected).abs() > 1e-8 {
                    failures.push(format!("{family} lambda {lambda}"));
                }
                let b2_zero = t.b2().amax() == 0.0;
                let lambda_one = (lambda - 1.0).abs() <= 1e-8;
                if b2_zero != lambda_one {
                    failures.push(format!(
                        "{family} dichotomy broken: B2 zero {b2_zero}, lambda {lambda}"
                    ));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs < 10.0;
    report(
        1,
        ok,
        &format!(
            "13 classes x 100 draws, max residual {worst_residual:.2e}, max |lambda - target| {worst_lambda:.2e}, {secs:.2}s {}",
            failures.first().map_or("", |s| s.as_str())
        ),
    );
}

fn closed_form_cases() -> Vec<(ClosedFormScheme, FamilySpec)> {
    use ClosedFormScheme::*;
    vec![
        (Eff05Diag, eff05(0.0, 0.0)),
        (Eff05Diag, eff05(0.5, 0.0)),
        (Eff05Diag, eff05(1.0, 0.0)),
        (Eff05Diag, eff05(2.0, 0.0)),
        (Eff05General, eff05(0.0, 0.5)),
        (Eff05General, eff05(1.0, 0.3)),
        (Eff05General, eff05(0.25, -0.5)),
        (EffIIDiag, eff_ii(0.25, 0.25, 1.0, 1.0)),
        (EffIIDiag, eff_ii(1.0, 1.0, 1.0, -0.5)),
        (EffIIDiag, eff_ii(3.0, 3.0, 1.0, 2.0)),
        (EffIIExpl1, eff_ii(0.0, 0.0, 1.5, 1.0)),
        (EffIIExpl1, eff_ii(0.0, 1.0, 2.0, -2.0)),
        (EffIIExpl1, eff_ii(0.0, 0.5, 1.0, 0.5)),
        (EffXExpl1, eff_x(0.0, 0.5, 1.5, 0.3, 0.7)),
        (EffXExpl1, eff_x(0.0, 1.0, 2.0, -1.0, 1.0)),
        (EffXExpl1, eff_x(0.0, 0.2, 1.0, 0.9, -2.0)),
    ]
}

#[test]
fn criterion_2_closed_form_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let complex_points: Vec<TestPoint> = (0..100)
        .map(|_| {
            TestPoint::new(
                Complex64::new(rng.random_range(-10.0..0.0), rng.random_range(-10.0..10.0)),
                Complex64::from_polar(
                    rng.random_range(0.0..20f64.sqrt()),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ),
            )
        })
        .collect();
    let mut points: Vec<TestPoint> = Vec::with_capacity(2600);
    for i in 0..50 {
        for j in 0..50 {
            points.push(TestPoint::real(
                -10.0 + 10.0 * i as f64 / 50.0,
                20.0 * j as f64 / 49.0,
            ));
        }
    }
    points.extend(complex_points);

    let mut worst: f64 = 0.0;
    let mut where_worst = String::new();
    let cases = closed_form_cases();
    for (scheme, spec) in &cases {
        let t = spec.build().unwrap();
        for &pt in &points {
            let generic = ms_gain(&t, pt)
                .unwrap_or_else(|e| panic!("{scheme} {:?} {pt:?}: {e}", spec.params));
            let closed = closed_form_gain(*scheme, spec, pt).unwrap();
            let rel = (generic - closed).abs() / closed.abs().max(1.0);
            if rel > worst {
                worst = rel;
                where_worst = format!("{scheme} {:?} at {pt:?}", spec.params);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        worst <= 1e-10 && secs < 10.0,
        &format!(
            "5 closed forms, {} parameter sets x {} points, max relative deviation {worst:.2e} ({where_worst}), {secs:.2}s",
            cases.len(),
            points.len()
        ),
    );
}

#[test]
fn criterion_3_a_stability_boundaries() {
    let start = Instant::now();
    let sampler = ProbeSampler::default();
    let mut failures: Vec<String> = Vec::new();
    let expect = |failures: &mut Vec<String>, label: String, spec: FamilySpec, pass: bool| {
        let r = a_stability_probe(&spec.build().unwrap(), &sampler).unwrap();
        if r.passed() != pass {
            failures.push(format!(
                "{label}: expected pass={pass}, max gain {:.6}",
                r.max_gain
            ));
        }
        r
    };

    for a1 in [0.0, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0] {
        expect(
            &mut failures,
            format!("EFF_05 a1={a1}"),
            eff05(a1, 0.0),
            true,
        );
    }
    let r = expect(
        &mut failures,
        "EFF_05 a1=-1".into(),
        eff05(-1.0, 0.0),
        false,
    );
    let mut eff05_detail = String::new();
    if let Some(c) = r.counterexample {
        let pt = c.point.point();
        let in_interval = pt.hhat.im == 0.0 && pt.hhat.re > -3f64.sqrt() && pt.hhat.re < -1.0;
        if !in_interval || c.gain < 1.0 || c.gain.is_nan() {
            failures.push(format!(
                "EFF_05 a1=-1 counterexample at {pt:?} gain {}",
                c.gain
            ));
        }
        eff05_detail = format!(
            "a1=-1 counterexample hhat={:.4} gain={:.4}",
            pt.hhat.re, c.gain
        );
    }
    let known = ms_gain(
        &eff05(-1.0, 0.0).build().unwrap(),
        TestPoint::real(-1.2, 2.4),
    )
    .unwrap();
    if (known - 12.6033).abs() > 1e-4 {
        failures.push(format!("EFF_05 a1=-1 gain at (-1.2, sqrt 2.4) is {known}"));
    }

    for (name, make) in [
        (
            "EFF_II",
            Box::new(|a: f64, a3: f64| eff_ii(a, a, a3, 1.0))
                as Box<dyn Fn(f64, f64) -> FamilySpec>,
        ),
        (
            "EFF_X",
            Box::new(|a: f64, a3: f64| eff_x(a, a, a3, 0.0, 1.0)),
        ),
    ] {
        expect(
            &mut failures,
            format!("{name} a=0.25"),
            make(0.25, 1.0),
            true,
        );
        expect(
            &mut failures,
            format!("{name} a=0.2"),
            make(0.2, 1.0),
            false,
        );
        expect(
            &mut failures,
            format!("{name} a=1/256"),
            make(1.0 / 256.0, 1.0),
            false,
        );
    }
    for a2 in [0.0, 0.5, 1.0, 2.0] {
        expect(
            &mut failures,
            format!("EFF_II expl a2={a2}"),
            eff_ii(0.0, a2, 1.5, 1.0),
            true,
        );
        expect(
            &mut failures,
            format!("EFF_X expl a2={a2}"),
            eff_x(0.0, a2, 1.5, -a2, 1.0),
            true,
        );
    }
    expect(
        &mut failures,
        "EFF_II expl a2=0 a3=1".into(),
        eff_ii(0.0, 0.0, 1.0, 1.0),
        false,
    );
    expect(
        &mut failures,
        "EFF_X expl a2=0 a3=1".into(),
        eff_x(0.0, 0.0, 1.0, 0.0, 1.0),
        false,
    );

    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        failures.is_empty() && secs < 60.0,
        &format!(
            "24 probes ({} samples each), {eff05_detail}, gain at (-1.2, sqrt 2.4) = {known:.4}, {secs:.1}s {}",
            sampler.real_points().len() + sampler.complex_points().len(),
            failures.join("; ")
        ),
    );
}

#[test]
fn criterion_4_exact_region_coincidence() {
    let spec = eff05(0.0, 0.5);
    let t = spec.build().unwrap();
    let mut checked = 0usize;
    let mut boundary = 0usize;
    let mut mismatches = Vec::new();
    let mut worst: f64 = 0.0;
    let mut check = |pt: TestPoint, gain: f64| {
        let closed = closed_form_gain(ClosedFormScheme::Eff05General, &spec, pt).unwrap();
        worst = worst.max((gain - closed).abs() / closed.max(1.0));
        let s = 2.0 * pt.hhat.re + pt.k.norm_sqr();
        let scale = 2.0 * pt.hhat.re.abs() + pt.k.norm_sqr();
        if s.abs() <= 1e-12 * scale.max(1.0) {
            // boundary points carry no stability claim; the gain is 1 there
            boundary += 1;
            if (gain - 1.0).abs() > 1e-12 {
                mismatches.push(format!("boundary {pt:?} gain {gain}"));
            }
            return;
        }
        checked += 1;
        if (gain < 1.0) != (s < 0.0) {
            mismatches.push(format!("{pt:?} gain {gain}"));
        }
    };

    let grid = region_grid(&t, (-8.0, 0.0), (0.0, 16.0), (400, 400)).unwrap();
    for (h, ksq, g, stable) in grid.points() {
        assert_eq!(stable, g < 1.0);
        check(TestPoint::real(h, ksq), g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20_000 {
        let pt = TestPoint::new(
            Complex64::new(rng.random_range(-10.0..2.0), rng.random_range(-10.0..10.0)),
            Complex64::from_polar(
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            ),
        );
        check(pt, ms_gain(&t, pt).unwrap());
    }
    report(
        4,
        mismatches.is_empty() && worst <= 1e-12,
        &format!(
            "{checked} classified points ({boundary} boundary points excluded), {} mismatches, max gain deviation {worst:.2e} {}",
            mismatches.len(),
            mismatches.first().map_or("", |s| s.as_str())
        ),
    );
}

#[test]
fn criterion_5_strong_convergence() {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let gbm = ExactReference::Gbm {
        lambda: -1.0,
        mu: 0.5,
        x0: 1.0,
    };
    let sdae = ExactReference::ReducedSdae {
        lambda: -1.0,
        mu: 0.5,
        c: 0.5,
        x0: 1.0,
    };
    let schemes = [
        ("EFF_05(0,0)", eff05(0.0, 0.0), (0.4, 0.65)),
        ("EFF_II(1,1,1,1)", eff_ii(1.0, 1.0, 1.0, 1.0), (0.85, 1.15)),
        (
            "EFF_X(1,1,1,0,1)",
            eff_x(1.0, 1.0, 1.0, 0.0, 1.0),
            (0.85, 1.15),
        ),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (problem, reference) in [("GBM", gbm), ("SDAE", sdae)] {
        for (name, spec, (lo, hi)) in &schemes {
            let t = spec.build().unwrap();
            let study = strong_order_estimate(
                &reference,
                &t,
                1.0,
                &DEFAULT_STEP_COUNTS,
                DEFAULT_PATHS,
                20240917,
                &cfg,
            )
            .unwrap();
            let in_band = study.slope >= *lo && study.slope <= *hi;
            let residual_ok = study.max_constraint_residual <= 1e-7;
            ok &= in_band && residual_ok;
            lines.push(format!(
                "{problem} {name} slope {:.3} in [{lo}, {hi}]: {in_band}, constraint residual {:.1e}",
                study.slope, study.max_constraint_residual
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        ok && secs < 300.0,
        &format!("{}; {secs:.1}s", lines.join("; ")),
    );
}

#[test]
fn criterion_6_cost_accounting() {
    let problem = ExactReference::Gbm {
        lambda: -1.0,
        mu: 0.5,
        x0: 1.0,
    }
    .problem(0.0, 1.0)
    .unwrap();
    let cfg = SolverConfig::default();
    let run = |spec: FamilySpec| {
        let t = spec.build().unwrap();
        simulate_path(&problem, &t, 100, &mut path_rng(6, 0), &cfg).unwrap()
    };
    let mut failures = Vec::new();

    let tr = run(eff05(0.0, 0.0));
    let s = tr.totals();
    if (s.f_evals, s.g_evals) != (100, 100) {
        failures.push(format!("EFF_05(0,0): f {} g {}", s.f_evals, s.g_evals));
    }
    // with a2 != 0 the first step also evaluates the drift at y0
    let tr = run(eff05(0.0, 0.5));
    let first = tr.stage_stats[0];
    let later_ok = tr.stage_stats[1..]
        .iter()
        .all(|s| s.f_evals == 1 && s.g_evals == 1);
    if (first.f_evals, first.g_evals) != (2, 1) || !later_ok {
        failures.push("EFF_05(0,0.5) per-step counts".to_string());
    }

    let tr = run(eff_ii(1.0, 1.0, 1.0, 1.0));
    let s = tr.totals();
    if (s.f_evals, s.g_evals, s.lu_factorizations) != (300, 200, 100) {
        failures.push(format!(
            "EFF_II: f {} g {} lu {}",
            s.f_evals, s.g_evals, s.lu_factorizations
        ));
    }
    if !tr
        .stage_stats
        .iter()
        .all(|s| (s.f_evals, s.g_evals, s.lu_factorizations) == (3, 2, 1))
    {
        failures.push("EFF_II per-step counts".to_string());
    }

    for spec in [
        eff05(1.0, 0.0),
        eff_x(1.0, 1.0, 1.0, 0.0, 1.0),
        eff_ii(0.5, 0.5, 0.5, 2.0),
    ] {
        let tr = run(spec.clone());
        if !tr.stage_stats.iter().all(|s| s.lu_factorizations == 1) {
            failures.push(format!(
                "{} {:?}: not one LU per step",
                spec.family, spec.params
            ));
        }
    }
    report(
        6,
        failures.is_empty(),
        &format!(
            "EFF_05(0,0) 100 f / 100 g over 100 steps, EFF_II 300 f / 200 g / 100 LU {}",
            failures.join("; ")
        ),
    );
}

#[test]
fn criterion_7_response_polynomial_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points: Vec<TestPoint> = (0..200)
        .map(|_| {
            TestPoint::new(
                Complex64::new(rng.random_range(-10.0..0.0), rng.random_range(-5.0..5.0)),
                Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    let mut failures = Vec::new();
    let mut tableaus = Vec::new();
    for family in FamilyId::CLASSES
        .into_iter()
        .chain([FamilyId::EffII, FamilyId::EffX])
    {
        if family.order() != StrongOrder::One {
            continue;
        }
        tableaus.push((family, family.default_spec().build().unwrap()));
        let mut frng = ChaCha8Rng::seed_from_u64(70 + family as u64);
        let mut n = 0;
        while n < 20 {
            if let Some((_, t)) = draw_family(family, &mut frng) {
                tableaus.push((family, t));
                n += 1;
            }
        }
    }
    let mut evaluated = 0usize;
    for (family, t) in &tableaus {
        assert_eq!(t.stages(), 3);
        let b2_zero = t.b2().amax() == 0.0;
        for &pt in &points {
            let Ok(p) = response_polynomial(t, pt) else {
                continue;
            };
            evaluated += 1;
            if p.degree() > 4 {
                failures.push(format!("{family} degree {}", p.degree()));
            }
            let scale = p
                .coeffs()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max)
                .max(1.0);
            if b2_zero && (p.coeff(3).norm() > 1e-14 * scale || p.coeff(4).norm() > 1e-14 * scale) {
                failures.push(format!("{family} Sigma3/4 nonzero with B2 = 0"));
            }
        }
    }
    let mut worst_b: f64 = 0.0;
    for &(a, a3) in &[(1.0, 1.0), (0.25, 1.0), (0.0, 1.5), (0.7, 2.0)] {
        let a1 = if a3 == 1.0 { a } else { 0.0 };
        for &pt in points.iter().take(50) {
            let reference = ms_gain(&eff_ii(a1, a, a3, 1.0).build().unwrap(), pt).unwrap();
            for b in [-2.0, -1.0, -0.5, 0.5, 2.0] {
                let g = ms_gain(&eff_ii(a1, a, a3, b).build().unwrap(), pt).unwrap();
                worst_b = worst_b.max((g - reference).abs() / reference.max(1.0));
            }
        }
    }
    if worst_b > 1e-12 {
        failures.push(format!("EFF_II gain varies with b by {worst_b:.2e}"));
    }
    report(
        7,
        failures.is_empty(),
        &format!(
            "{} tableaus, {evaluated} responses, degree <= 4, EFF_II b-variation {worst_b:.1e} {}",
            tableaus.len(),
            failures.first().map_or("", |s| s.as_str())
        ),
    );
}
