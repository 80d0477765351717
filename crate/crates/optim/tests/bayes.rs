use amopt_optim::bayes::gp::{dedup_latest, kernel};
use amopt_optim::bayes::{
    expected_improvement, optimize, propose_next, surrogate_grid, write_grid, write_history, AcqParams, BoParams,
    GpOptions, GpSurrogate, Posterior,
};
use amopt_optim::{Bounds, EvalError, VarKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

fn unit_box(d: usize) -> Bounds {
    Bounds::new(vec![0.0; d], vec![1.0; d]).unwrap()
}

fn random_samples(n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let v = f(&y);
            (y, v)
        })
        .collect()
}

fn bumpy(y: &[f64]) -> f64 {
    (3.0 * y[0]).sin() + (y[1] - 0.4).powi(2) + 0.3 * (5.0 * y[0] * y[1]).cos()
}

#[test]
fn expected_improvement_at_zero_z_matches_monte_carlo() {
    let (best, xi, sigma) = (0.7, 0.01, 0.8);
    let post = Posterior {
        mean: best + xi,
        variance: sigma * sigma,
    };
    let ei = expected_improvement(post, best, xi);
    assert!((ei - sigma * 0.398_942_280_401_432_7).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = Normal::new(post.mean, sigma).unwrap();
    let draws = 1_000_000;
    let mc: f64 = (0..draws)
        .map(|_| (rng.sample(n) - best - xi).max(0.0))
        .sum::<f64>()
        / draws as f64;
    assert!((mc - ei).abs() / ei < 1e-2, "mc={mc} ei={ei}");
}

#[test]
fn expected_improvement_vanishes_without_variance() {
    let post = Posterior {
        mean: 5.0,
        variance: 0.0,
    };
    assert_eq!(expected_improvement(post, 0.0, 0.01), 0.0);
}

#[test]
fn expected_improvement_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let post = Posterior {
            mean: rng.gen_range(-50.0..50.0),
            variance: rng.gen_range(0.0..4.0f64).powi(3),
        };
        let ei = expected_improvement(post, rng.gen_range(-50.0..50.0), rng.gen_range(0.0..1.0));
        assert!(ei >= 0.0 && ei.is_finite());
    }
}

#[test]
fn posterior_matches_dense_solve() {
    let samples = random_samples(12, 11, bumpy);
    let b = unit_box(2);
    let gp = GpSurrogate::fit(&b, &samples, &GpOptions::default()).unwrap();
    let (x, z, th) = (gp.unit_points(), gp.targets(), gp.theta());
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], th) + if i == j { gp.jitter() } else { 0.0 });
    let lu = k.lu();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let y = DVector::from_fn(2, |_, _| rng.gen::<f64>());
        let ky = DVector::from_fn(n, |i, _| kernel(&x[i], &y, th));
        let mean = ky.dot(&lu.solve(z).unwrap());
        let var = 1.0 - ky.dot(&lu.solve(&ky).unwrap());
        let p = gp.posterior_unit(&y);
        assert!((p.mean - mean).abs() <= 1e-8 * mean.abs().max(1.0), "{} vs {mean}", p.mean);
        assert!((p.variance - var.max(0.0)).abs() <= 1e-8 * var.abs().max(1.0));
    }
}

#[test]
fn posterior_interpolates_samples() {
    let samples = random_samples(15, 2, bumpy);
    let gp = GpSurrogate::fit(&unit_box(2), &samples, &GpOptions::default()).unwrap();
    for (i, (y, f)) in samples.iter().enumerate() {
        let p = gp.posterior(y);
        assert!((p.mean - gp.targets()[i]).abs() < 1e-6);
        assert!((gp.to_objective(p.mean) - f).abs() < 1e-6);
        assert!(p.variance < 1e-6);
    }
}

#[test]
fn single_sample_and_far_field() {
    let b = Bounds::new(vec![0.0], vec![100.0]).unwrap();
    let gp = GpSurrogate::fit(&b, &[(vec![10.0], 3.5)], &GpOptions::default()).unwrap();
    let p = gp.posterior(&[10.0]);
    assert!((gp.to_objective(p.mean) - 3.5).abs() < 1e-12);
    assert!(p.variance < 1e-9);

    let gp = GpSurrogate::with_theta(&b, &[(vec![0.0], 1.0), (vec![2.0], 3.0)], 0.01, &GpOptions::default()).unwrap();
    let far = gp.posterior(&[90.0]);
    assert!(far.mean.abs() < 1e-12);
    assert!((far.variance - 1.0).abs() < 1e-12);
    assert!((gp.to_objective(far.mean) - 2.0).abs() < 1e-12);
}

#[test]
fn duplicates_keep_latest() {
    let s = vec![(vec![1.0], 5.0), (vec![2.0], 1.0), (vec![1.0], 7.0)];
    assert_eq!(dedup_latest(&s), vec![(vec![1.0], 7.0), (vec![2.0], 1.0)]);
    let b = Bounds::new(vec![0.0], vec![3.0]).unwrap();
    let gp = GpSurrogate::fit(&b, &s, &GpOptions::default()).unwrap();
    assert_eq!(gp.values(), &[7.0, 1.0]);
    assert!((gp.to_objective(gp.posterior(&[1.0]).mean) - 7.0).abs() < 1e-6);
}

#[test]
fn length_scale_recovered_from_prior_draw() {
    let truth = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 80;
    let x: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(2, |_, _| rng.gen::<f64>())).collect();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], truth) + if i == j { 1e-8 } else { 0.0 });
    let l = k.cholesky().unwrap().unpack();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let w = DVector::from_fn(n, |_, _| rng.sample(normal));
    let draw = l * w;
    let samples: Vec<_> = x.iter().zip(draw.iter()).map(|(p, v)| (p.as_slice().to_vec(), *v)).collect();
    let gp = GpSurrogate::fit(&unit_box(2), &samples, &GpOptions::default()).unwrap();
    assert!(gp.theta() > truth / 2.0 && gp.theta() < truth * 2.0, "theta={}", gp.theta());
    // the search lands on a local maximum of the likelihood
    let lml = gp.log_marginal_likelihood();
    for s in [0.9, 1.1] {
        let other = GpSurrogate::with_theta(&unit_box(2), &samples, gp.theta() * s, &GpOptions::default()).unwrap();
        assert!(other.log_marginal_likelihood() <= lml + 1e-9);
    }
}

#[test]
fn symmetric_pair_proposal() {
    let b = unit_box(1);
    let s = vec![(vec![0.25], 1.0), (vec![0.75], 1.0)];
    let gp = GpSurrogate::fit(&b, &s, &GpOptions::default()).unwrap();
    let prop = propose_next(&gp, &[VarKind::Continuous], &AcqParams::default());
    let y = prop.y[0];
    assert!((y - 0.5).abs() < 1e-6 || y == 0.0 || y == 1.0, "{y}");
    let best = gp.best_target();
    for (p, _) in &s {
        assert!(prop.ei >= expected_improvement(gp.posterior(p), best, 0.01));
    }
}

#[test]
fn proposal_beats_grid_oracle() {
    let samples = random_samples(8, 9, bumpy);
    let b = unit_box(2);
    let gp = GpSurrogate::fit(&b, &samples, &GpOptions::default()).unwrap();
    let acq = AcqParams::default();
    let prop = propose_next(&gp, &[VarKind::Continuous; 2], &acq);
    let best = gp.best_target();
    let m = 101;
    let mut oracle: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let y = [i as f64 / (m - 1) as f64, j as f64 / (m - 1) as f64];
            oracle = oracle.max(expected_improvement(gp.posterior(&y), best, acq.xi));
        }
    }
    assert!(prop.ei >= oracle * (1.0 - 1e-6), "{} < {oracle}", prop.ei);
}

#[test]
fn zero_variance_falls_back_to_mean() {
    let b = unit_box(2);
    let opts = GpOptions {
        jitter: 0.0,
        ..GpOptions::default()
    };
    let gp = GpSurrogate::with_theta(&b, &[(vec![0.3, 0.3], 1.0)], f64::INFINITY, &opts).unwrap();
    let prop = propose_next(&gp, &[VarKind::Continuous; 2], &AcqParams::default());
    assert!(prop.fallback);
    assert_eq!(prop.ei, 0.0);
    assert!(b.contains(&prop.y));
}

#[test]
fn integer_proposals_avoid_sampled_points() {
    let b = Bounds::new(vec![0.0, 30.0], vec![1.0, 50.0]).unwrap();
    let kinds = [VarKind::Continuous, VarKind::Integer];
    let s: Vec<_> = [(0.0, 30.0), (1.0, 30.0), (0.0, 50.0), (1.0, 50.0)]
        .iter()
        .map(|&(a, l)| (vec![a, l], 1.0 - a - 0.01 * l))
        .collect();
    let gp = GpSurrogate::fit(&b, &s, &GpOptions::default()).unwrap();
    let prop = propose_next(&gp, &kinds, &AcqParams::default());
    assert_eq!(prop.y[1].fract(), 0.0);
    assert!(!s.iter().any(|(p, _)| *p == prop.y));
}

fn corners() -> (Bounds, Vec<Vec<f64>>) {
    let b = Bounds::new(vec![0.005, 30.0], vec![0.01, 50.0]).unwrap();
    let c = vec![vec![0.005, 30.0], vec![0.01, 30.0], vec![0.005, 50.0], vec![0.01, 50.0]];
    (b, c)
}

fn wall_like(y: &[f64]) -> Result<f64, EvalError> {
    Ok(0.02 - 0.8 * y[0] - 1e-4 * y[1] + 30.0 * (y[0] - 0.0075).powi(2))
}

#[test]
fn monotone_problem_returns_best_corner() {
    let (b, c) = corners();
    let mut p = BoParams::new(vec![VarKind::Continuous, VarKind::Integer]);
    p.max_proposals = 4;
    let out = optimize(wall_like, &b, &c, &p).unwrap();
    assert_eq!(out.y, vec![0.01, 50.0]);
    assert!(out.history.len() <= 4);
    for r in &out.history {
        assert!(b.contains(&r.proposal));
        assert_eq!(r.proposal[1].fract(), 0.0);
    }
}

#[test]
fn seeded_runs_are_identical() {
    let (b, c) = corners();
    let mut p = BoParams::new(vec![VarKind::Continuous, VarKind::Integer]);
    p.max_proposals = 5;
    p.acq.seed = 17;
    let f = |y: &[f64]| -> Result<f64, EvalError> { Ok(bumpy(&[(y[0] - 0.005) / 0.005, (y[1] - 30.0) / 20.0])) };
    let a = optimize(f, &b, &c, &p).unwrap();
    p.jobs = 3;
    let again = optimize(f, &b, &c, &p).unwrap();
    assert_eq!(a.history, again.history);
    assert_eq!(a.samples, again.samples);
}

#[test]
fn finds_interior_minimum() {
    let b = unit_box(2);
    let c = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]];
    let f = |y: &[f64]| -> Result<f64, EvalError> { Ok((y[0] - 0.37).powi(2) + (y[1] - 0.61).powi(2)) };
    let mut p = BoParams::new(vec![VarKind::Continuous; 2]);
    p.max_proposals = 25;
    let out = optimize(f, &b, &c, &p).unwrap();
    assert!(out.converged);
    let opt = &out.history.last().unwrap().surrogate_optimum;
    assert!((opt[0] - 0.37).abs() < 0.02 && (opt[1] - 0.61).abs() < 0.02, "{opt:?}");
    assert!(out.f < 0.01);
}

#[test]
fn exports_have_expected_shape() {
    let (b, c) = corners();
    let mut p = BoParams::new(vec![VarKind::Continuous, VarKind::Integer]);
    p.max_proposals = 2;
    let out = optimize(wall_like, &b, &c, &p).unwrap();
    let mut buf = Vec::new();
    write_history(&out.history, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iteration,y0,y1,f,theta,ei\n"));
    assert_eq!(text.lines().count(), out.history.len() + 1);

    let rows = surrogate_grid(&out.surrogate, 5).unwrap();
    assert_eq!(rows.len(), 25);
    for (y, f) in &out.samples {
        if let Some(r) = rows.iter().find(|r| r[0] == y[0] && r[1] == y[1]) {
            assert!((r[2] - f).abs() < 1e-6 && r[3] < 1e-3);
        }
    }
    let mut buf = Vec::new();
    write_grid(&rows, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 26);
}
