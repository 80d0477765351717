use amopt_optim::gradient::{minimize, write_log, GdParams, GdStatus};
use amopt_optim::{Bounds, EvalError};
use proptest::prelude::*;

type Eval = Result<(f64, Vec<f64>), EvalError>;

fn quad(c: f64) -> impl FnMut(&[f64]) -> Eval {
    move |y: &[f64]| Ok(((y[0] - c).powi(2), vec![2.0 * (y[0] - c)]))
}

fn box1() -> Bounds {
    Bounds::new(vec![30.0], vec![55.0]).unwrap()
}

#[test]
fn minimum_beyond_upper_bound_stops_on_bound() {
    let out = minimize(quad(60.0), &box1(), &GdParams::default(), &[40.0]).unwrap();
    assert_eq!(out.y, vec![55.0]);
    assert_eq!(out.status, GdStatus::Converged);
}

#[test]
fn interior_minimum_found() {
    let out = minimize(quad(42.0), &box1(), &GdParams::default(), &[40.0]).unwrap();
    assert!((out.y[0] - 42.0).abs() < 1e-3, "{:?}", out.y);
    assert!(out.log.len() <= 50);
    assert!(matches!(out.status, GdStatus::Converged | GdStatus::ZeroGradient));
}

#[test]
fn off_grid_minimum_found_by_backtracking() {
    let out = minimize(quad(42.3), &box1(), &GdParams::default(), &[40.0]).unwrap();
    assert!((out.y[0] - 42.3).abs() < 1e-3, "{:?}", out.y);
    assert_eq!(out.status, GdStatus::Converged);
}

#[test]
fn zero_gradient_returns_start() {
    let out = minimize(quad(40.0), &box1(), &GdParams::default(), &[40.0]).unwrap();
    assert_eq!(out.status, GdStatus::ZeroGradient);
    assert_eq!(out.y, vec![40.0]);
    assert_eq!(out.evaluations, 1);
}

#[test]
fn infeasible_start_and_bad_params_rejected() {
    assert!(minimize(quad(42.0), &box1(), &GdParams::default(), &[20.0]).is_err());
    let p = GdParams {
        rho: 1.0,
        ..GdParams::default()
    };
    assert!(minimize(quad(42.0), &box1(), &p, &[40.0]).is_err());
    assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
}

#[test]
fn evaluator_failure_keeps_partial_log() {
    let mut calls = 0;
    let f = move |y: &[f64]| -> Eval {
        calls += 1;
        if calls > 3 {
            return Err("solver diverged".into());
        }
        Ok(((y[0] - 60.0).powi(2), vec![2.0 * (y[0] - 60.0)]))
    };
    let out = minimize(f, &box1(), &GdParams::default(), &[40.0]).unwrap();
    assert!(matches!(out.status, GdStatus::Aborted(ref m) if m.contains("diverged")));
    assert_eq!(out.log.len(), 3);
    assert_eq!(out.y, vec![42.0]);
}

#[test]
fn log_writes_one_row_per_iterate() {
    let out = minimize(quad(42.0), &box1(), &GdParams::default(), &[40.0]).unwrap();
    let mut buf = Vec::new();
    write_log(&out.log, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("k,y0,f,grad_norm,alpha\n"));
    assert_eq!(text.lines().count(), out.log.len() + 1);
}

#[test]
fn nonsmooth_objective_stalls() {
    // a descent direction that never decreases
    let f = |y: &[f64]| -> Eval { Ok((1.0 + y[0].abs().sqrt(), vec![-1.0])) };
    let b = Bounds::new(vec![-10.0], vec![10.0]).unwrap();
    let p = GdParams {
        step_tol: 1e-30,
        ..GdParams::default()
    };
    let out = minimize(f, &b, &p, &[0.0]).unwrap();
    assert_eq!(out.status, GdStatus::Stalled);
    assert_eq!(out.y, vec![0.0]);
}

proptest! {
    #[test]
    fn iterates_descend_and_stay_feasible(
        c0 in -5.0f64..15.0, c1 in -5.0f64..15.0,
        y0 in 0.0f64..10.0, y1 in 0.0f64..10.0,
        w in 0.1f64..10.0,
    ) {
        let b = Bounds::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap();
        let f = move |y: &[f64]| -> Eval {
            let d = [y[0] - c0, y[1] - c1];
            Ok((d[0] * d[0] + w * d[1] * d[1], vec![2.0 * d[0], 2.0 * w * d[1]]))
        };
        let out = minimize(f, &b, &GdParams::default(), &[y0, y1]).unwrap();
        for pair in out.log.windows(2) {
            prop_assert!(pair[1].f <= pair[0].f);
        }
        for r in &out.log {
            prop_assert!(b.contains(&r.y));
        }
    }

    #[test]
    fn path_invariant_under_gradient_rescaling(
        c in 30.0f64..70.0, s in 1e-6f64..1e6, y0 in 30.0f64..55.0,
    ) {
        // f and s*f share the Armijo decisions, so the iterates coincide
        let run = |k: f64| {
            let f = move |y: &[f64]| -> Eval {
                Ok((k * (y[0] - c).powi(2), vec![2.0 * k * (y[0] - c)]))
            };
            minimize(f, &box1(), &GdParams::default(), &[y0]).unwrap()
        };
        let (a, b) = (run(1.0), run(s));
        prop_assert_eq!(a.log.len(), b.log.len());
        for (ra, rb) in a.log.iter().zip(&b.log) {
            prop_assert!((ra.y[0] - rb.y[0]).abs() <= 1e-9 * ra.y[0].abs());
        }
    }
}
