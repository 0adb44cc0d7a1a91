use std::f64::consts::PI;

use koplab::linear::{self, Capillarity};
use koplab::model::{coeff_k, make_initial_data, CouplingAlpha, FluidParams, State};
use koplab::solver::{self, ModelKind, Solver, StepConfig};
use koplab::spectral::{Fourier, GridSpec, SpectralField};
use koplab::{lp, Error};
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

fn params() -> FluidParams {
    FluidParams::new(1.0, 0.5, 0.8, 1.2, 1.4).unwrap()
}

fn op(alpha: f64) -> ModelKind {
    ModelKind::Op(CouplingAlpha::new(alpha).unwrap())
}

fn dist(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().l2_norm()
}

fn state_dist(a: &State, b: &State) -> f64 {
    dist(&a.q, &b.q) + dist(&a.u, &b.u)
}

#[test]
fn equilibrium_is_fixed() {
    let f = Fourier::new(GridSpec::new(2, 16, 8.0 * PI).unwrap());
    let zero = State::zero(&f);
    let (dq, du) = solver::rhs_nonlinear(&f, &zero, &params()).unwrap();
    assert_eq!((dq.l2_norm(), du.l2_norm()), (0.0, 0.0));
    for dt in [1e-3, 0.1, 2.0] {
        for model in [op(3.0), ModelKind::K] {
            let s = Solver::new(&f, params(), model, dt, None).unwrap();
            let next = s.step(&zero, 0.0).unwrap();
            assert_eq!(next, zero);
        }
    }
}

#[test]
fn pressure_only_tendency_matches_physical_product() {
    let g = GridSpec::new(1, 64, 8.0 * PI).unwrap();
    let f = Fourier::new(g);
    let p = params();
    let q = f.sample(|x| 0.2 * (x[0] / 4.0).sin() + 0.1 * (x[0] / 2.0).cos());
    let state = State::new(&f, q.clone(), SpectralField::zeros(g, 1), None).unwrap();
    let (dq, du) = solver::rhs_nonlinear(&f, &state, &p).unwrap();
    assert!(dq.l2_norm() < 1e-15);
    // Oracle: K(q) ∂q formed pointwise, then truncated by the two-thirds rule.
    let qx = f.inverse_scalar(&q).unwrap();
    let dqx = f.inverse_scalar(&f.derivative(&q, 0)).unwrap();
    let prod: Vec<f64> = qx.iter().zip(&dqx).map(|(&a, &b)| coeff_k(a, &p).unwrap() * b).collect();
    let oracle = f.dealias(&f.forward(&[prod]).unwrap());
    assert!(dist(&du, &oracle) <= 1e-12 * oracle.l2_norm());
}

/// Per-mode linear flow built from nalgebra's matrix exponential.
fn linear_oracle(f: &Fourier, s: &State, dt: f64, model: ModelKind, p: &FluidParams) -> State {
    let parts = f.helmholtz_split(&s.u).unwrap();
    let cap = model.capillarity();
    let g = *f.grid();
    let mut q = s.q.clone();
    let mut v = parts.v.clone();
    let mut w = parts.w.clone();
    for i in 1..g.len() {
        let x = f.xi_norm2(i);
        let a = linear::mode_matrix(x, p, cap);
        let e = (Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]) * dt).exp();
        let (q0, v0) = (s.q.component(0)[i], parts.v.component(0)[i]);
        let re = e * Vector2::new(q0.re, v0.re);
        let im = e * Vector2::new(q0.im, v0.im);
        q.component_mut(0)[i] = Complex64::new(re[0], im[0]);
        v.component_mut(0)[i] = Complex64::new(re[1], im[1]);
        for c in 0..w.ncomp() {
            w.component_mut(c)[i] *= (-p.mu * x * dt).exp();
        }
    }
    let mut parts = parts;
    parts.v = v;
    parts.w = w;
    State { q, u: f.helmholtz_recompose(&parts), c: None }
}

#[test]
fn linear_step_matches_matrix_exponential() {
    let f = Fourier::new(GridSpec::new(2, 16, 8.0 * PI).unwrap());
    let p = params();
    let s0 = make_initial_data(&f, 1e-2, (-2, -1), 3).unwrap();
    for model in [op(0.7), op(5.0), ModelKind::K] {
        assert_eq!(solver::linear_step(&f, &s0, 0.0, model, &p).unwrap(), s0);
        for dt in [0.01, 0.3, 2.0] {
            let ours = solver::linear_step(&f, &s0, dt, model, &p).unwrap();
            let oracle = linear_oracle(&f, &s0, dt, model, &p);
            assert!(state_dist(&ours, &oracle) <= 1e-8 * (s0.q.l2_norm() + s0.u.l2_norm()), "dt {dt}");
        }
    }
}

#[test]
fn local_model_uses_local_symbol() {
    let p = params();
    for x in [0.01, 1.0, 50.0] {
        let a = linear::mode_matrix(x, &p, ModelKind::K.capillarity());
        assert_eq!(a, linear::mode_matrix(x, &p, Capillarity::Local));
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!((det - x * (p.p + p.kappa * x)).abs() <= 1e-12 * det);
    }
}

#[test]
fn richardson_self_convergence() {
    let f = Fourier::new(GridSpec::new(1, 64, 8.0 * PI).unwrap());
    let p = params();
    let s0 = make_initial_data(&f, 0.1, (-3, 1), 21).unwrap();
    let run = |dt: f64| {
        let cfg = StepConfig { dt, t_end: 1.0, n_trunc: None, record_every: usize::MAX };
        solver::integrate(&f, &s0, op(4.0), &p, &cfg).unwrap().states().last().unwrap().clone()
    };
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    let ratio = state_dist(&a, &b) / state_dist(&b, &c);
    assert!((ratio - 4.0).abs() <= 0.5, "ratio {ratio}");
}

#[test]
fn mass_is_conserved_with_truncation() {
    let f = Fourier::new(GridSpec::new(2, 32, 8.0 * PI).unwrap());
    let s0 = make_initial_data(&f, 5e-2, (-2, 0), 5).unwrap();
    let cfg = StepConfig { dt: 0.05, t_end: 2.0, n_trunc: Some(2), record_every: 5 };
    let traj = solver::integrate(&f, &s0, op(2.0), &params(), &cfg).unwrap();
    assert_eq!(traj.times().last(), Some(&2.0));
    for s in traj.states() {
        assert!((s.q.mean()[0] - s0.q.mean()[0]).abs() <= 1e-15);
        assert!(s.c.is_some());
    }
    let k = solver::integrate(&f, &s0, ModelKind::K, &params(), &cfg).unwrap();
    assert!(k.states().iter().all(|s| s.c.is_none()));
}

#[test]
fn order_parameter_examples() {
    let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
    let f = Fourier::new(g);
    let zero = SpectralField::zeros(g, 1);
    assert_eq!(solver::order_parameter(&f, &zero, 3.0).l2_norm(), 0.0);
    let q = f.sample(|x| 0.1 * (2.0 * x[0] + x[1]).cos());
    let c = solver::order_parameter(&f, &q, 3.0);
    assert!(dist(&c, &q.scale(1.0 / (1.0 + 5.0 / 9.0))) <= 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for alpha in [0.3, 3.0, 300.0] {
        let samples: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let q = f.forward(&[samples]).unwrap();
        let c = solver::order_parameter(&f, &q, alpha);
        assert!(solver::elliptic_residual(&f, &q, &c, alpha).unwrap() <= 1e-10);
    }
}

#[test]
fn remainder_examples() {
    let g = GridSpec::new(1, 128, 8.0 * PI).unwrap();
    let f = Fourier::new(g);
    let p = params();
    assert_eq!(solver::remainder_r_alpha(&f, &SpectralField::zeros(g, 1), &p, 2.0).l2_norm(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let q = f.dealias(&f.forward(&[samples]).unwrap());
    let mut prev = f64::INFINITY;
    for alpha in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let r = solver::remainder_r_alpha(&f, &q, &p, alpha);
        let n = r.l2_norm();
        assert!(n < prev);
        prev = n;
        // Mode by mode: |ξ|^{s−h−1}|R̂| ≤ κ α^{−h} |ξ|^{s+2}|q̂|.
        for h in [0.0, 0.25, 0.5, 1.0] {
            for i in 1..g.len() {
                let xi = f.xi_norm2(i).sqrt();
                let lhs = xi.powf(-h - 1.0) * r.component(0)[i].norm();
                let rhs = p.kappa * alpha.powf(-h) * xi * xi * q.component(0)[i].norm();
                assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}

#[test]
fn failures_are_reported() {
    let g = GridSpec::new(1, 32, 2.0 * PI).unwrap();
    let f = Fourier::new(g);
    let deep = f.sample(|x| -1.2 * x[0].cos().powi(2));
    assert!(matches!(State::new(&f, deep.clone(), SpectralField::zeros(g, 1), None), Err(Error::VacuumError { .. })));
    let bad = State::perturbation(&f, deep, SpectralField::zeros(g, 1), None).unwrap();
    let s = Solver::new(&f, params(), ModelKind::K, 0.01, None).unwrap();
    assert!(matches!(s.step(&bad, 0.0), Err(Error::VacuumError { .. })));
    let huge = State::perturbation(&f, SpectralField::zeros(g, 1), f.sample(|x| 1e7 * x[0].sin()), None).unwrap();
    assert!(matches!(s.step(&huge, 0.0), Err(Error::BlowUp { .. })));
    let cfg = StepConfig { dt: 0.0, t_end: 1.0, n_trunc: None, record_every: 1 };
    assert!(solver::integrate(&f, &State::zero(&f), ModelKind::K, &params(), &cfg).is_err());
}

#[test]
fn small_data_follow_linear_flow() {
    let f = Fourier::new(GridSpec::new(1, 64, 8.0 * PI).unwrap());
    let p = params();
    let tiny = make_initial_data(&f, 1e-6, (-3, 1), 4).unwrap();
    let cfg = StepConfig { dt: 0.01, t_end: 1.0, n_trunc: None, record_every: 20 };
    let traj = solver::integrate(&f, &tiny, op(6.0), &p, &cfg).unwrap();
    for (t, s) in traj.times().iter().zip(traj.states()).skip(1) {
        let lin = solver::linear_step(&f, &tiny, *t, op(6.0), &p).unwrap();
        let rel = state_dist(s, &lin) / (lin.q.l2_norm() + lin.u.l2_norm());
        assert!(rel <= 100.0 * 1e-6, "t {t}: {rel}");
    }
}

#[test]
fn trajectory_files() {
    let f = Fourier::new(GridSpec::new(1, 32, 8.0 * PI).unwrap());
    let s0 = make_initial_data(&f, 1e-3, (-2, 0), 1).unwrap();
    let cfg = StepConfig { dt: 0.1, t_end: 0.5, n_trunc: None, record_every: 2 };
    let traj = solver::integrate(&f, &s0, op(2.0), &params(), &cfg).unwrap();
    assert_eq!(traj.times(), &[0.0, 0.2, 0.4, 0.5]);
    let dir = tempdir().unwrap();
    solver::write_trajectory(dir.path(), &f, &traj, "run").unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("run_manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 2 + traj.len());
    for k in 0..traj.len() {
        for comp in ["q", "u"] {
            let path = dir.path().join(format!("run_{k:05}_{comp}.snap"));
            let (h, data) = koplab::spectral::read_snapshot(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
            assert_eq!(h.t, traj.times()[k]);
            assert_eq!(data[0].len(), 32);
        }
    }
    let part = lp::DyadicPartition::new(&f);
    assert!(lp::f_norm(&part, &traj, 0.0, 2.0, &params()).unwrap() > 0.0);
}
