//! Bessel functions of real order and the capillary interaction kernel.
//!
//! `K_ν` is evaluated from its integral representation
//! `K_ν(x) = ∫₀^∞ exp(-x cosh t) cosh(ν t) dt` by adaptive quadrature, with the
//! elementary closed forms used for half-integer orders. Recurrences are never
//! used for evaluation (the upward recurrence is unstable for small `x`).
//!
//! The kernel `φ` is normalised so that its Fourier transform, with the
//! convention `f̂(ξ) = ∫ e^{-ix·ξ} f(x) dx`, is exactly `1 / (1 + |ξ|²)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

fn inner_tol() -> Tolerance {
    Tolerance { abs: 0.0, rel: 1e-14, max_segments: 20_000 }
}

fn half_integer_index(nu: f64) -> Option<usize> {
    let twice = 2.0 * nu;
    if nu > 0.0 && (twice - twice.round()).abs() < 1e-15 && (twice.round() as i64) % 2 == 1 {
        Some(((twice.round() as i64 - 1) / 2) as usize)
    } else {
        None
    }
}

fn is_integer(nu: f64) -> bool {
    (nu - nu.round()).abs() < 1e-15
}

/// `e^x K_ν(x)` for `ν ≥ 0`, `x > 0`.
fn scaled_bessel_k(nu: f64, x: f64) -> Result<f64> {
    if let Some(n) = half_integer_index(nu) {
        // K_{n+1/2}(x) = sqrt(π/2x) e^{-x} Σ_k (n+k)! / (k! (n-k)!) (2x)^{-k}
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..n {
            term *= ((n + k + 1) * (n - k)) as f64 / ((k + 1) as f64 * 2.0 * x);
            sum += term;
        }
        return Ok((PI / (2.0 * x)).sqrt() * sum);
    }
    scaled_k_integral(nu, x, false)
}

/// `∫₀^∞ e^{-x(cosh t − 1)} cosh(νt) w(t) dt` with `w = cosh t` when `with_cosh`, else 1.
fn scaled_k_integral(nu: f64, x: f64, with_cosh: bool) -> Result<f64> {
    // log-integrand: ν t - x (cosh t - 1) + ln((1 + e^{-2νt}) / 2)
    let log_integrand = |t: f64| nu * t - x * (t.cosh() - 1.0);
    let t_peak = (nu / x).asinh();
    let peak = log_integrand(t_peak);
    let mut t_end = t_peak + 1.0;
    while log_integrand(t_end) > peak - 45.0 {
        t_end += 0.5;
    }
    let f = |t: f64| {
        let e = (-x * (t.cosh() - 1.0)).exp();
        let w = if with_cosh { t.cosh() } else { 1.0 };
        e * (nu * t).cosh() * w
    };
    let mut breaks = vec![0.0];
    if t_peak > 0.0 {
        breaks.push(t_peak);
    }
    breaks.push(t_end);
    quad::integrate_pieces(f, &breaks, inner_tol())
}

/// Modified Bessel function of the second kind `K_ν(x)`; `K_{-ν} = K_ν`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::DomainError(format!("K_ν requires x > 0, got {x}")));
    }
    Ok(scaled_bessel_k(nu.abs(), x)? * (-x).exp())
}

/// `K'_ν(x) = −∫₀^∞ e^{-x cosh t} cosh t cosh(νt) dt`, by direct quadrature.
pub fn bessel_k_prime(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::DomainError(format!("K'_ν requires x > 0, got {x}")));
    }
    Ok(-scaled_k_integral(nu.abs(), x, true)? * (-x).exp())
}

/// Bessel function of the first kind `J_ν(x)` for `ν ≥ -1/2`, `x ≥ 0`.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if x < 0.0 || !x.is_finite() {
        return Err(Error::DomainError(format!("J_ν requires x ≥ 0, got {x}")));
    }
    if nu < -0.5 || !nu.is_finite() {
        return Err(Error::DomainError(format!("J_ν implemented for ν ≥ -1/2, got {nu}")));
    }
    if nu == -0.5 {
        if x == 0.0 {
            return Err(Error::DomainError("J_{-1/2} is singular at 0".into()));
        }
        return Ok((2.0 / (PI * x)).sqrt() * x.cos());
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    if nu == 0.5 {
        return Ok((2.0 / (PI * x)).sqrt() * x.sin());
    }
    if is_integer(nu) {
        // (1/2π) ∫_0^{2π} cos(nτ - x sin τ) dτ: periodic, the trapezoid rule is spectrally exact.
        let n = nu.round();
        let points = (2.0 * (x + n) + 64.0).ceil() as usize;
        let h = 2.0 * PI / points as f64;
        let sum: f64 = (0..points)
            .map(|i| {
                let tau = i as f64 * h;
                (n * tau - x * tau.sin()).cos()
            })
            .sum();
        return Ok(sum / points as f64);
    }
    // Schläfli representation for non-integer order.
    let oscillatory = quad::integrate_pieces(
        |tau: f64| (nu * tau - x * tau.sin()).cos(),
        &linspace_breaks(0.0, PI, (x / 2.0).ceil() as usize + 1),
        inner_tol(),
    )?;
    let tail_end = decay_end(|t| x * t.sinh() + nu * t);
    let tail = quad::integrate(
        |t: f64| (-x * t.sinh() - nu * t).exp(),
        0.0,
        tail_end,
        Tolerance { abs: 1e-17, ..inner_tol() },
    )?;
    Ok(oscillatory / PI - (nu * PI).sin() / PI * tail)
}

/// Modified Bessel function of the first kind `I_ν(x)` for `ν ≥ 0`, `x ≥ 0`.
pub fn bessel_i(nu: f64, x: f64) -> Result<f64> {
    if x < 0.0 || !x.is_finite() || nu < 0.0 {
        return Err(Error::DomainError(format!("I_ν requires ν ≥ 0 and x ≥ 0, got ν={nu}, x={x}")));
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    if nu == 0.5 {
        return Ok((2.0 / (PI * x)).sqrt() * x.sinh());
    }
    if is_integer(nu) {
        let n = nu.round();
        let points = (2.0 * (x + n) + 64.0).ceil() as usize;
        let h = 2.0 * PI / points as f64;
        let sum: f64 =
            (0..points).map(|i| (x * (i as f64 * h).cos()).exp() * (n * i as f64 * h).cos()).sum();
        return Ok(sum / points as f64);
    }
    let head = quad::integrate(|t: f64| (x * t.cos()).exp() * (nu * t).cos(), 0.0, PI, inner_tol())?;
    let tail_end = decay_end(|t| x * t.cosh() + nu * t - x);
    let tail = quad::integrate(
        |t: f64| (-x * t.cosh() - nu * t).exp(),
        0.0,
        tail_end,
        Tolerance { abs: 1e-300, ..inner_tol() },
    )?;
    Ok(head / PI - (nu * PI).sin() / PI * tail)
}

fn linspace_breaks(a: f64, b: f64, pieces: usize) -> Vec<f64> {
    (0..=pieces).map(|i| a + (b - a) * i as f64 / pieces as f64).collect()
}

/// Smallest `t` (on a 0.5 grid) where the increasing exponent exceeds 45.
fn decay_end(exponent: impl Fn(f64) -> f64) -> f64 {
    let mut t = 0.5;
    while exponent(t) < 45.0 {
        t += 0.5;
    }
    t
}

/// Dimension and normalisation of the interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub d: usize,
    pub c_d: f64,
}

impl KernelSpec {
    pub fn new(d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::DomainError(format!("kernel dimension must be 1, 2 or 3, got {d}")));
        }
        Ok(Self { d, c_d: (2.0 * PI).powf(-(d as f64) / 2.0) })
    }

    /// Order `d/2 - 1` of the Bessel function in the kernel.
    pub fn order(&self) -> f64 {
        self.d as f64 / 2.0 - 1.0
    }

    /// Surface measure of the unit sphere `S^{d-1}`.
    pub fn sphere_area(&self) -> f64 {
        match self.d {
            1 => 2.0,
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Radial profile `φ₀(r) = C_d r^{1-d/2} K_{d/2-1}(r)`.
    pub fn profile(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::DomainError(format!("kernel evaluated at r = {r}")));
        }
        let nu = self.order();
        Ok(self.c_d * r.powf(-nu) * bessel_k(nu, r)?)
    }
}

/// `φ(x)` for `|x| = x > 0` in dimension `d ∈ {1, 2, 3}`.
pub fn kernel_phi(d: usize, x: f64) -> Result<f64> {
    KernelSpec::new(d)?.profile(x)
}

/// Rescaled kernel `φ_α(x) = α^d φ(α x)`.
pub fn kernel_phi_alpha(d: usize, alpha: f64, x: f64) -> Result<f64> {
    Ok(alpha.powi(d as i32) * kernel_phi(d, alpha * x)?)
}

/// Fourier transform of `φ`: `1 / (1 + |ξ|²)`.
pub fn kernel_phi_hat(_d: usize, xi_norm: f64) -> f64 {
    1.0 / (1.0 + xi_norm * xi_norm)
}

/// Radial outer cutoff for kernel integrals; the profile is below `e^{-60}` beyond it.
const KERNEL_RADIUS: f64 = 60.0;

/// Radial Fourier transform of `φ` at `|ξ| = xi` by Hankel quadrature.
pub fn hankel_transform(d: usize, xi: f64) -> Result<f64> {
    let spec = KernelSpec::new(d)?;
    let tol = Tolerance { abs: 1e-13, rel: 1e-11, max_segments: 50_000 };
    let mut breaks: Vec<f64> = vec![0.0, 1e-6, 1e-3, 0.1, 0.5];
    let mut r = 1.0;
    while r <= KERNEL_RADIUS {
        breaks.push(r);
        r += 1.0;
    }
    if xi == 0.0 {
        let integral =
            quad::integrate_pieces(|r| profile_or_zero(&spec, r) * r.powi(d as i32 - 1), &breaks, tol)?;
        return Ok(spec.sphere_area() * integral);
    }
    let nu = spec.order();
    let half_d = d as f64 / 2.0;
    let failure = std::cell::RefCell::new(None);
    let integral = quad::integrate_pieces(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            match bessel_j(nu, xi * r) {
                Ok(j) => j * profile_or_zero(&spec, r) * r.powf(half_d),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e.to_string());
                    f64::NAN
                }
            }
        },
        &breaks,
        tol,
    );
    if let Some(msg) = failure.into_inner() {
        return Err(Error::QuadratureFailure(msg));
    }
    Ok((2.0 * PI).powf(half_d) * xi.powf(1.0 - half_d) * integral?)
}

fn profile_or_zero(spec: &KernelSpec, r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        spec.profile(r).unwrap_or(f64::NAN)
    }
}

/// Maximum over `xi_samples` of `|Hankel(φ)(ξ) - 1/(1+ξ²)|`.
pub fn hankel_check(d: usize, xi_samples: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &xi in xi_samples {
        if !(xi >= 0.0) {
            return Err(Error::DomainError(format!("frequency sample {xi} must be ≥ 0")));
        }
        let err = (hankel_transform(d, xi)? - kernel_phi_hat(d, xi)).abs();
        worst = worst.max(err);
    }
    Ok(worst)
}
