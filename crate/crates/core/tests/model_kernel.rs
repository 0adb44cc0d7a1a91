use std::f64::consts::PI;

use koplab::bessel::{self, KernelSpec};
use koplab::model::{coeff_i, coeff_k, initial_data_norm, make_initial_data, CouplingAlpha, FluidParams};
use koplab::spectral::{Fourier, GridSpec};
use koplab::Error;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn params_substitution() {
    let p = FluidParams::new(1.0, 1.0, 1.0, 1.0, 1.4).unwrap();
    assert_eq!((p.nu, p.nu0), (3.0, 1.0));
    assert!((p.m - 9.0 / 4.0).abs() < 1e-15);
    let p = FluidParams::new(2.0, 0.0, 1.0, 1.0, 1.4).unwrap();
    assert_eq!((p.nu, p.nu0, p.m), (4.0, 2.0, 4.0));
}

#[test]
fn params_rejected_at_boundary() {
    for (mu, lambda, kappa, p, gamma) in
        [(1.0, -2.0, 1.0, 1.0, 1.4), (0.0, 1.0, 1.0, 1.0, 1.4), (1.0, 0.0, 0.0, 1.0, 1.4), (1.0, 0.0, 1.0, -1.0, 1.4), (1.0, 0.0, 1.0, 1.0, 1.0)]
    {
        assert!(matches!(FluidParams::new(mu, lambda, kappa, p, gamma), Err(Error::ParameterOutOfRange(_))));
    }
    assert!(CouplingAlpha::new(0.0).is_err());
    assert!(CouplingAlpha::new(f64::INFINITY).is_err());
}

#[test]
fn nonlinear_coefficients() {
    let p = FluidParams::new(1.0, 0.0, 1.0, 1.0, 1.4).unwrap();
    assert_eq!(coeff_k(0.0, &p).unwrap(), 0.0);
    let oracle = 1.0 - (-0.6 * 1.1f64.ln()).exp();
    assert!(rel(coeff_k(0.1, &p).unwrap(), oracle) < 1e-13);
    assert!((coeff_k(0.1, &p).unwrap() - 0.05558).abs() < 1e-5);
    let p2 = FluidParams::new(1.0, 0.0, 1.0, 1.0, 2.0).unwrap();
    for q in [-0.9, -0.1, 0.5, 3.0] {
        assert_eq!(coeff_k(q, &p2).unwrap(), 0.0);
    }
    assert_eq!(coeff_i(0.0).unwrap(), 0.0);
    assert_eq!(coeff_i(1.0).unwrap(), 0.5);
    assert_eq!(coeff_i(-0.5).unwrap(), -1.0);
    assert!(matches!(coeff_i(-1.0), Err(Error::DomainError(_))));
    assert!(matches!(coeff_k(-1.5, &p), Err(Error::DomainError(_))));
}

#[test]
fn initial_data_contract() {
    let f = Fourier::new(GridSpec::with_default_length(1, 256).unwrap());
    assert!(matches!(make_initial_data(&f, 0.0, (-3, 0), 1), Err(Error::ParameterOutOfRange(_))));
    for seed in [1, 2, 99] {
        let s = make_initial_data(&f, 1e-6, (-3, 0), seed).unwrap();
        assert!(rel(initial_data_norm(&f, &s.q, &s.u), 1e-6) < 1e-12);
        assert_eq!(s, make_initial_data(&f, 1e-6, (-3, 0), seed).unwrap());
    }
    assert_ne!(make_initial_data(&f, 1e-6, (-3, 0), 1).unwrap(), make_initial_data(&f, 1e-6, (-3, 0), 2).unwrap());
    assert!(matches!(make_initial_data(&f, 1e-3, (-3, 3), 1), Err(Error::BandOutOfRange(_))));
}

#[test]
fn bessel_k_values() {
    assert!(rel(bessel::bessel_k(0.5, 1.0).unwrap(), (PI / 2.0).sqrt() * (-1.0f64).exp()) < 1e-14);
    assert!((bessel::bessel_k(0.5, 1.0).unwrap() - 0.461069).abs() < 1e-6);
    // Independent oracle: Simpson on the cosh representation.
    let oracle = simpson(|t: f64| (-t.cosh()).exp(), 0.0, 8.0, 4000);
    let k0 = bessel::bessel_k(0.0, 1.0).unwrap();
    assert!(rel(k0, oracle) < 1e-11);
    assert!((k0 - 0.421024).abs() < 1e-6);
    for nu in [0.3, 1.0, 2.5] {
        for x in [0.2, 3.0, 20.0] {
            let o = simpson(|t: f64| (-x * t.cosh()).exp() * (nu * t).cosh(), 0.0, 12.0, 20000);
            assert!(rel(bessel::bessel_k(nu, x).unwrap(), o) < 1e-9, "nu {nu} x {x}");
        }
    }
}

#[test]
fn bessel_k_recurrence() {
    for x in [0.5, 1.0, 5.0] {
        let (k0, k1, k2) =
            (bessel::bessel_k(0.0, x).unwrap(), bessel::bessel_k(1.0, x).unwrap(), bessel::bessel_k(2.0, x).unwrap());
        let r = k0 - k2 + 2.0 / x * k1;
        assert!(r.abs() / k2 <= 1e-10, "x {x}: {r}");
    }
}

#[test]
fn bessel_k_derivative_identity() {
    for nu in [0.0, 0.5, 1.0, 1.5, 3.0] {
        for x in [0.05, 1.0, 7.0, 40.0] {
            let lhs = bessel::bessel_k_prime(nu, x).unwrap();
            let rhs = -0.5 * (bessel::bessel_k(nu - 1.0, x).unwrap() + bessel::bessel_k(nu + 1.0, x).unwrap());
            assert!(rel(lhs, rhs) < 1e-11, "nu {nu} x {x}");
        }
    }
}

#[test]
fn bessel_j_and_i() {
    assert_eq!(bessel::bessel_j(0.0, 0.0).unwrap(), 1.0);
    assert_eq!(bessel::bessel_j(1.0, 0.0).unwrap(), 0.0);
    assert!(bessel::bessel_j(0.5, PI).unwrap().abs() < 1e-14);
    for x in [0.3, 2.0, 9.0, 30.0] {
        let j_half = (2.0 / (PI * x)).sqrt() * x.sin();
        assert!((bessel::bessel_j(0.5, x).unwrap() - j_half).abs() < 1e-12);
        // Bessel integral J_0(x) = (1/π)∫₀^π cos(x sin t) dt.
        let j0 = simpson(|t: f64| (x * t.sin()).cos(), 0.0, PI, 4000) / PI;
        assert!((bessel::bessel_j(0.0, x).unwrap() - j0).abs() < 1e-11, "x {x}");
        // I_{1/2}(x) = √(2/(πx)) sinh x.
        let i_half = (2.0 / (PI * x)).sqrt() * x.sinh();
        assert!(rel(bessel::bessel_i(0.5, x).unwrap(), i_half) < 1e-12);
    }
}

#[test]
fn kernel_closed_forms() {
    for k in 1..200 {
        let x = k as f64 * 0.1;
        assert!(rel(bessel::kernel_phi(1, x).unwrap(), 0.5 * (-x).exp()) <= 1e-12);
        assert!(rel(bessel::kernel_phi(3, x).unwrap(), (-x).exp() / (4.0 * PI * x)) <= 1e-10);
    }
    // φ_α(x) = α^d φ(αx).
    for d in 1..=3 {
        let v = bessel::kernel_phi_alpha(d, 4.0, 0.3).unwrap();
        assert!(rel(v, 4f64.powi(d as i32) * bessel::kernel_phi(d, 1.2).unwrap()) < 1e-14);
    }
    assert!(bessel::kernel_phi(2, 0.0).is_err());
    assert_eq!(KernelSpec::new(3).unwrap().order(), 0.5);
}

#[test]
fn kernel_two_dimensional_log_singularity() {
    // K_0(x) = −ln(x/2) − γ_E + O(x² ln x), so φ·2π/(−ln x) = 1 + (ln 2 − γ_E)/(−ln x) + …
    let euler = 0.577_215_664_901_532_9;
    let mut prev = f64::INFINITY;
    for e in [4, 6, 8, 10] {
        let x = 10f64.powi(-e);
        let ratio = bessel::kernel_phi(2, x).unwrap() * 2.0 * PI / (-x.ln());
        let expected = 1.0 + (2f64.ln() - euler) / (-x.ln());
        assert!((ratio - expected).abs() < 1e-6, "x {x}: {ratio} vs {expected}");
        assert!((ratio - 1.0).abs() < (prev - 1.0).abs());
        prev = ratio;
    }
}

#[test]
fn kernel_fourier_pair() {
    assert_eq!(bessel::kernel_phi_hat(2, 0.0), 1.0);
    assert_eq!(bessel::kernel_phi_hat(1, 1.0), 0.5);
    assert!((bessel::kernel_phi_hat(3, 3.0) - 0.1).abs() < 1e-16);
    assert!(bessel::hankel_check(1, &[0.0, 1.0, 2.0]).unwrap() <= 1e-8);
    assert!(bessel::hankel_check(3, &[0.0, 1.0, 2.0]).unwrap() <= 1e-6);
    assert!(bessel::hankel_check(2, &[0.5, 1.0, 4.0]).unwrap() <= 1e-6);
    // Mass one: ∫φ = φ̂(0), checked in d = 1 against a Simpson oracle.
    let mass = 2.0 * simpson(|x| bessel::kernel_phi(1, x.max(1e-300)).unwrap(), 0.0, 40.0, 8000);
    assert!((mass - 1.0).abs() < 1e-10);
}
