use std::sync::atomic::{AtomicUsize, Ordering};

use amopt_optim::localvar::{minimize, write_probes, LvParams};
use amopt_optim::{Bounds, EvalError, VarKind};
use proptest::prelude::*;

type Eval = Result<f64, EvalError>;

fn params(kinds: Vec<VarKind>, tau0: Vec<f64>, tau_min: Vec<f64>) -> LvParams {
    LvParams {
        kinds,
        tau0,
        tau_min,
        max_iterations: 10_000,
        jobs: 1,
    }
}

#[test]
fn monotone_objective_ends_in_corner() {
    // same shape as the wall problem: larger dt and more layers are better
    let b = Bounds::new(vec![0.005, 30.0], vec![0.01, 50.0]).unwrap();
    let p = params(
        vec![VarKind::Continuous, VarKind::Integer],
        vec![0.001, 4.0],
        vec![2e-4, 1.0],
    );
    let calls = AtomicUsize::new(0);
    let f = |y: &[f64]| -> Eval {
        calls.fetch_add(1, Ordering::Relaxed);
        Ok(1.0 - 10.0 * y[0] - 0.001 * y[1])
    };
    let out = minimize(f, &b, &p, &[0.0075, 40.0]).unwrap();
    assert_eq!(out.y, vec![0.01, 50.0]);
    assert_eq!(out.evaluations, calls.load(Ordering::Relaxed));
    assert!(out.evaluations <= 60, "{}", out.evaluations);
    assert!(out.tau[0] <= 2e-4 && out.tau[1] <= 1.0);
}

#[test]
fn probes_skip_clamped_duplicates() {
    let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
    let p = params(vec![VarKind::Continuous], vec![0.5], vec![0.1]);
    let out = minimize(|y: &[f64]| -> Eval { Ok(-y[0]) }, &b, &p, &[1.0]).unwrap();
    // only the lower probe exists at the upper bound
    let first: Vec<_> = out.probes.iter().filter(|q| q.iteration == 1).collect();
    assert_eq!(first.len(), 1);
    assert_eq!(first[0].point, vec![0.5]);
}

#[test]
fn ties_go_to_lowest_probe_index() {
    let b = Bounds::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
    let p = params(vec![VarKind::Continuous; 2], vec![1.0, 1.0], vec![0.6, 0.6]);
    let f = |y: &[f64]| -> Eval { Ok(-(y[0].abs() + y[1].abs()).min(1.0)) };
    let out = minimize(f, &b, &p, &[0.0, 0.0]).unwrap();
    let moved = out.probes.iter().find(|q| q.accepted).unwrap();
    assert_eq!(moved.point, vec![-1.0, 0.0]);
}

#[test]
fn failed_probes_are_logged_and_skipped() {
    let b = Bounds::new(vec![0.0], vec![10.0]).unwrap();
    let p = params(vec![VarKind::Integer], vec![2.0], vec![1.0]);
    let f = |y: &[f64]| -> Eval {
        if y[0] == 7.0 {
            Err("no convergence".into())
        } else {
            Ok((y[0] - 7.0).powi(2))
        }
    };
    let out = minimize(f, &b, &p, &[5.0]).unwrap();
    assert!(out.probes.iter().any(|q| q.point == vec![7.0] && q.f.is_none()));
    assert_eq!(out.y, vec![5.0]);
    let mut buf = Vec::new();
    write_probes(&out.probes, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iteration,y0,f,accepted\n"));
    assert!(text.contains(",7,,false"));
}

#[test]
fn concurrent_probes_match_sequential() {
    let b = Bounds::new(vec![-3.0, -3.0, 0.0], vec![3.0, 3.0, 20.0]).unwrap();
    let mut p = params(
        vec![VarKind::Continuous, VarKind::Continuous, VarKind::Integer],
        vec![1.0, 1.0, 5.0],
        vec![1e-3, 1e-3, 1.0],
    );
    let f = |y: &[f64]| -> Eval { Ok((y[0] - 0.3).powi(2) + (y[1] + 1.1).powi(2) + (y[2] - 13.0).powi(2)) };
    let seq = minimize(f, &b, &p, &[0.0, 0.0, 0.0]).unwrap();
    p.jobs = 4;
    let par = minimize(f, &b, &p, &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn bad_problems_rejected() {
    let b = Bounds::new(vec![0.0], vec![10.0]).unwrap();
    let f = |_: &[f64]| -> Eval { Ok(0.0) };
    let ok = params(vec![VarKind::Integer], vec![2.0], vec![1.0]);
    assert!(minimize(f, &b, &ok, &[11.0]).is_err());
    assert!(minimize(f, &b, &ok, &[2.5]).is_err());
    let p = params(vec![VarKind::Integer], vec![1.5], vec![1.0]);
    assert!(minimize(f, &b, &p, &[2.0]).is_err());
    let p = params(vec![VarKind::Continuous], vec![0.1], vec![0.2]);
    assert!(minimize(f, &b, &p, &[2.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_minimum_within_final_step(
        c0 in -3.0f64..3.0, c1 in -3.0f64..3.0,
        y0 in -4.0f64..4.0, y1 in -4.0f64..4.0,
    ) {
        let b = Bounds::new(vec![-4.0, -4.0], vec![4.0, 4.0]).unwrap();
        let p = params(vec![VarKind::Continuous; 2], vec![1.0, 0.7], vec![1e-3, 1e-3]);
        let f = move |y: &[f64]| -> Eval { Ok((y[0] - c0).powi(2) + (y[1] - c1).powi(2)) };
        let out = minimize(f, &b, &p, &[y0, y1]).unwrap();
        prop_assert!((out.y[0] - c0).abs().max((out.y[1] - c1).abs()) <= 1e-3);
    }

    #[test]
    fn feasible_integer_and_strictly_improving(
        c0 in -8.0f64..8.0, c1 in -30.0f64..30.0, y0 in -5.0f64..5.0, n0 in -20i32..20,
    ) {
        let b = Bounds::new(vec![-5.0, -20.0], vec![5.0, 20.0]).unwrap();
        let p = params(vec![VarKind::Continuous, VarKind::Integer], vec![2.0, 7.0], vec![0.01, 1.0]);
        let f = move |y: &[f64]| -> Eval { Ok((y[0] - c0).powi(2) + 0.1 * (y[1] - c1).powi(2)) };
        let out = minimize(f, &b, &p, &[y0, n0 as f64]).unwrap();
        let mut last = f(&[y0, n0 as f64]).unwrap();
        for q in &out.probes {
            prop_assert!(b.contains(&q.point));
            prop_assert_eq!(q.point[1].fract(), 0.0);
            if q.accepted {
                prop_assert!(q.f.unwrap() < last);
                last = q.f.unwrap();
            }
        }
        prop_assert_eq!(out.tau[1].fract(), 0.0);
        prop_assert_eq!(out.f, last);
    }
}
