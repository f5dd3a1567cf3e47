mod common;

use common::{eff05, eff_ii};
use srk_core::convergence::{strong_order_estimate, ConvergenceError};
use srk_core::solver::{ExactReference, SolverConfig};

const GBM: ExactReference = ExactReference::Gbm {
    lambda: -1.0,
    mu: 0.5,
    x0: 1.0,
};

#[test]
fn deterministic_problem_converges_at_first_order() {
    let r = ExactReference::Gbm {
        lambda: -1.0,
        mu: 0.0,
        x0: 1.0,
    };
    let t = eff05(0.0, 0.0).build().unwrap();
    let study = strong_order_estimate(
        &r,
        &t,
        1.0,
        &[16, 32, 64, 128, 256, 512],
        4,
        1,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!((0.9..=1.1).contains(&study.slope), "slope {}", study.slope);
    // all paths coincide without noise
    let single = strong_order_estimate(
        &r,
        &t,
        1.0,
        &[16, 32, 64, 128, 256, 512],
        1,
        1,
        &SolverConfig::default(),
    )
    .unwrap();
    for (a, b) in study.errors.iter().zip(&single.errors) {
        assert!((a - b).abs() <= 1e-15 * b);
    }
}

#[test]
fn errors_shrink_with_the_step() {
    let cfg = SolverConfig::default();
    for spec in [eff05(0.0, 0.0), eff_ii(1.0, 1.0, 1.0, 1.0)] {
        let t = spec.build().unwrap();
        let study =
            strong_order_estimate(&GBM, &t, 1.0, &[8, 16, 32, 64, 128], 300, 42, &cfg).unwrap();
        for w in study.errors.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{:?}: {:?}", spec.params, study.errors);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let t = eff_ii(1.0, 1.0, 1.0, 1.0).build().unwrap();
    let cfg = SolverConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| strong_order_estimate(&GBM, &t, 1.0, &[4, 8, 16, 32], 64, 7, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(4);
    let bits = |v: &[f64]| v.iter().map(|e| e.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.errors), bits(&b.errors));
    assert_eq!(a.slope.to_bits(), b.slope.to_bits());
    let c = strong_order_estimate(&GBM, &t, 1.0, &[4, 8, 16, 32], 64, 8, &cfg).unwrap();
    assert_ne!(a.errors, c.errors);
}

#[test]
fn sdae_study_tracks_the_constraint() {
    let r = ExactReference::ReducedSdae {
        lambda: -1.0,
        mu: 0.5,
        c: 0.5,
        x0: 1.0,
    };
    let t = eff_ii(1.0, 1.0, 1.0, 1.0).build().unwrap();
    let study =
        strong_order_estimate(&r, &t, 1.0, &[4, 8, 16], 50, 3, &SolverConfig::default()).unwrap();
    assert!(study.max_constraint_residual <= 1e-9);
    assert!(study.errors.iter().all(|e| e.is_finite() && *e > 0.0));
}

#[test]
fn exports() {
    let t = eff05(0.0, 0.0).build().unwrap();
    let study =
        strong_order_estimate(&GBM, &t, 2.0, &[4, 8, 16], 10, 5, &SolverConfig::default()).unwrap();
    assert_eq!(study.h_list, vec![0.5, 0.25, 0.125]);
    let mut buf = Vec::new();
    study.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,rms_error");
    assert!(lines[1].starts_with("0.5,"));
    assert_eq!(lines.len(), 4);
    let mut buf = Vec::new();
    study.write_summary_json(&mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["n_paths"], 10);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["slope"].as_f64().unwrap(), study.slope);
}

#[test]
fn bad_horizon() {
    let t = eff05(0.0, 0.0).build().unwrap();
    let r = strong_order_estimate(&GBM, &t, 0.0, &[4, 8, 16], 10, 5, &SolverConfig::default());
    assert!(matches!(r, Err(ConvergenceError::BadHorizon(_))));
}
