//! Closed-form analysis of the linearised system.
//!
//! With `v = Λ⁻¹div u` and `x = |ξ|²`, each Fourier mode of `(q, v)` obeys
//! `d/dt (q̂, v̂) = A(ξ) (q̂, v̂)` with
//!
//! ```text
//! A(ξ) = [[0, −|ξ|], [|ξ| s(x), −ν x]],   s(x) = p + κ x / (1 + x/α²)
//! ```
//!
//! (`s(x) = p + κx` for the local Korteweg term). The discriminant changes sign
//! at `x_α`, the root of `g_α`. The solenoidal part of `u` follows the heat flow
//! `e^{−μ x t}`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::FluidParams;

/// `|g_α|` below which the propagator switches from the eigenvalue formulas to
/// the trace-free form `e^{−at}(C I + t S N)`.
pub const DEGENERATE_G: f64 = 1e-6;

/// Capillary part of the linear symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capillarity {
    /// `κα²∇(φ_α∗q − q)`, symbol `−κx/(1 + x/α²)`.
    Nonlocal { alpha: f64 },
    /// `κ∇Δq`, symbol `−κx`.
    Local,
}

impl Capillarity {
    /// `s(x)`, the restoring coefficient in `A(ξ)`.
    pub fn stiffness(&self, x: f64, params: &FluidParams) -> f64 {
        match *self {
            Capillarity::Nonlocal { alpha } => params.p + params.kappa * x / (1.0 + x / (alpha * alpha)),
            Capillarity::Local => params.p + params.kappa * x,
        }
    }
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("|xi|^2 must be positive and finite, got {x}")))
    }
}

/// `g_α(x) = 1 − (4p/ν²)/x − (α²/M)/(x + α²)`.
pub fn g_alpha(x: f64, params: &FluidParams, alpha: f64) -> Result<f64> {
    check_x(x)?;
    let a2 = alpha * alpha;
    Ok(1.0 - 4.0 * params.p / (params.nu * params.nu * x) - (a2 / params.m) / (x + a2))
}

/// `1 − g(x) = 4 s(x) / (ν² x)` for either capillarity.
fn one_minus_g(x: f64, params: &FluidParams, cap: Capillarity) -> f64 {
    4.0 * cap.stiffness(x, params) / (params.nu * params.nu * x)
}

/// The mode matrix `A(ξ)` for `x = |ξ|²`.
pub fn mode_matrix(x: f64, params: &FluidParams, cap: Capillarity) -> [[f64; 2]; 2] {
    let r = x.sqrt();
    [[0.0, -r], [r * cap.stiffness(x, params), -params.nu * x]]
}

/// Solution of `g_α(x) = β` in closed form.
pub fn threshold_x_beta(beta: f64, params: &FluidParams, alpha: f64) -> Result<f64> {
    check_beta(beta)?;
    let a2 = alpha * alpha;
    let w = 1.0 / (1.0 - beta);
    let c = 4.0 * params.p / (params.nu * params.nu);
    let a = (a2 / params.m) * (params.m - w) - w * c;
    let b = 4.0 * c * a2 * w;
    let root = (a * a + b).sqrt();
    Ok(if a > 0.0 { b / (2.0 * (a + root)) } else { 0.5 * (root - a) })
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("beta must lie in [0, 1), got {beta}")))
    }
}

/// Solution of `g_α(x) = β` by bisection on the monotone `g_α`.
pub fn threshold_x_beta_bisect(beta: f64, params: &FluidParams, alpha: f64) -> Result<f64> {
    check_beta(beta)?;
    let f = |x: f64| g_alpha(x, params, alpha).map(|g| g - beta);
    let (mut lo, mut hi) = (1.0, 1.0);
    for _ in 0..2100 {
        if f(lo)? < 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..2100 {
        if f(hi)? > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    if !(f(lo)? < 0.0 && f(hi)? > 0.0) {
        return Err(Error::ConvergenceFailure(format!("no bracket for g_alpha = {beta}")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::ConvergenceFailure("bisection did not reach machine resolution".into()))
}

/// Frequency thresholds of the linear analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub x_alpha: f64,
    pub y_alpha: f64,
    /// `√g_α(y_α)`.
    pub m: f64,
    /// `ν²/(4κ)`.
    pub big_m: f64,
}

/// Level of `g_α` that defines `y_α`: ½ if `M ≤ 1`, else `1 − 1/(2M)`.
pub fn y_level(params: &FluidParams) -> f64 {
    if params.m <= 1.0 {
        0.5
    } else {
        1.0 - 0.5 / params.m
    }
}

pub fn threshold_y(params: &FluidParams, alpha: f64) -> Result<Thresholds> {
    let beta = y_level(params);
    Ok(Thresholds {
        x_alpha: threshold_x_beta(0.0, params, alpha)?,
        y_alpha: threshold_x_beta(beta, params, alpha)?,
        m: beta.sqrt(),
        big_m: params.m,
    })
}

/// Bracket `[lo, hi]` such that `lo α² ≤ y_α ≤ hi α²` is expected for large α.
pub fn y_bounds(params: &FluidParams) -> (f64, f64) {
    if params.m >= 1.0 {
        (1.0, 2.0)
    } else {
        (2.0 / params.m - 1.0, 2.0 / params.m - 0.5)
    }
}

pub fn y_within_bounds(params: &FluidParams, alpha: f64) -> Result<bool> {
    let y = threshold_y(params, alpha)?.y_alpha;
    let (lo, hi) = y_bounds(params);
    let a2 = alpha * alpha;
    Ok(lo * a2 <= y && y <= hi * a2)
}

/// Smallest `α ∈ {1, 2, 4, …, 2^max_doublings}` from which the `y_α` bracket
/// holds at every scanned value.
pub fn alpha_onset(params: &FluidParams, max_doublings: u32) -> Result<Option<f64>> {
    let mut onset = None;
    for k in 0..=max_doublings {
        let alpha = 2f64.powi(k as i32);
        if y_within_bounds(params, alpha)? {
            onset.get_or_insert(alpha);
        } else {
            onset = None;
        }
    }
    Ok(onset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Low,
    Transition,
    High,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Transition => "transition",
            Regime::High => "high",
        }
    }
}

/// Eigenstructure of `A(ξ)` at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModes {
    pub xi_norm2: f64,
    pub regime: Regime,
    /// `√(−g_α)`, present when `g_α ≤ 0`.
    pub s: Option<f64>,
    /// `√g_α`, present when `g_α ≥ 0`.
    pub r: Option<f64>,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub m: f64,
}

/// Eigenvalues `λ± = −(νx/2)(1 ± iS)` or `−(νx/2)(1 ± R)`. The point `x = x_α`
/// is assigned to the low regime.
pub fn modes(xi_norm2: f64, params: &FluidParams, alpha: f64) -> Result<LinearModes> {
    check_x(xi_norm2)?;
    let th = threshold_y(params, alpha)?;
    let h = one_minus_g(xi_norm2, params, Capillarity::Nonlocal { alpha });
    let g = 1.0 - h;
    let a = 0.5 * params.nu * xi_norm2;
    let (regime, s, r, lp, lm) = if g <= 0.0 {
        let s = (h - 1.0).max(0.0).sqrt();
        let r = (g == 0.0).then_some(0.0);
        (Regime::Low, Some(s), r, Complex64::new(-a, -a * s), Complex64::new(-a, a * s))
    } else {
        let r = g.sqrt();
        let regime = if xi_norm2 < th.y_alpha { Regime::Transition } else { Regime::High };
        (regime, None, Some(r), Complex64::new(-a * (1.0 + r), 0.0), Complex64::new(-a * h / (1.0 + r), 0.0))
    };
    Ok(LinearModes { xi_norm2, regime, s, r, lambda_plus: lp, lambda_minus: lm, m: th.m })
}

/// `e^{tA}` stored as `e^{log_scale} · matrix`, which keeps strongly damped
/// modes representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub log_scale: f64,
    pub matrix: [[f64; 2]; 2],
}

impl Propagator {
    pub fn dense(&self) -> [[f64; 2]; 2] {
        let k = self.log_scale.exp();
        let m = &self.matrix;
        [[k * m[0][0], k * m[0][1]], [k * m[1][0], k * m[1][1]]]
    }

    /// `ln ‖e^{tA}‖₂`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + spectral_norm2(&self.matrix).ln()
    }

    pub fn apply(&self, q: Complex64, v: Complex64) -> (Complex64, Complex64) {
        let m = self.dense();
        (q * m[0][0] + v * m[0][1], q * m[1][0] + v * m[1][1])
    }
}

/// Largest singular value of a real 2×2 matrix.
pub fn spectral_norm2(m: &[[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = *m;
    let fro2 = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = ((fro2 - 2.0 * det) * (fro2 + 2.0 * det)).max(0.0).sqrt();
    (0.5 * (fro2 + disc)).sqrt()
}

/// Exact propagator `e^{tA(ξ)}` of one mode.
pub fn propagator(xi_norm2: f64, t: f64, params: &FluidParams, cap: Capillarity) -> Result<Propagator> {
    check_x(xi_norm2)?;
    if !(t >= 0.0) {
        return Err(Error::DomainError(format!("time must be nonnegative, got {t}")));
    }
    let x = xi_norm2;
    let r = x.sqrt();
    let s = cap.stiffness(x, params);
    let nu = params.nu;
    let h = 4.0 * s / (nu * nu * x);
    let g = 1.0 - h;
    let a = 0.5 * nu * x;
    if t == 0.0 {
        return Ok(Propagator { log_scale: 0.0, matrix: [[1.0, 0.0], [0.0, 1.0]] });
    }
    if g.abs() < DEGENERATE_G {
        // e^{tA} = e^{−at} e^{tN}, N = A + aI trace-free with N² = a²g I,
        // so e^{tN} = C(z) I + t S(z) N with z = a²g t².
        let z = a * a * g * t * t;
        let (c, sc) = cosh_sinhc(z);
        let matrix = [[c + sc * a * t, -sc * r * t], [sc * r * s * t, c - sc * a * t]];
        return Ok(Propagator { log_scale: -a * t, matrix });
    }
    if g < 0.0 {
        let sv = (-g).sqrt();
        let w = a * sv * t;
        let (sn, cs) = w.sin_cos();
        let k = 2.0 / (nu * r * sv);
        let matrix = [[cs + sn / sv, -k * sn], [s * k * sn, cs - sn / sv]];
        Ok(Propagator { log_scale: -a * t, matrix })
    } else {
        let rv = g.sqrt();
        // e₋ = e^{tλ₋} carries the scale; ratio = e^{t(λ₊−λ₋)} = e^{−2aRt}.
        let slow = a * h / (1.0 + rv);
        let ratio = (-2.0 * a * rv * t).exp();
        let diff = (-2.0 * a * rv * t).exp_m1();
        let sum = 1.0 + ratio;
        let k = 1.0 / (nu * r * rv);
        let matrix = [
            [0.5 * sum - diff / (2.0 * rv), k * diff],
            [-s * k * diff, 0.5 * sum + diff / (2.0 * rv)],
        ];
        Ok(Propagator { log_scale: -slow * t, matrix })
    }
}

/// `(cosh √z, sinh √z / √z)`, continued to `z ≤ 0` by `cos`/`sin`.
fn cosh_sinhc(z: f64) -> (f64, f64) {
    if z.abs() < 1e-2 {
        let (mut c, mut sc, mut term) = (1.0, 1.0, 1.0);
        for k in 1..8 {
            term *= z / ((2 * k - 1) * (2 * k)) as f64;
            c += term;
            sc += term / (2 * k + 1) as f64;
        }
        (c, sc)
    } else if z > 0.0 {
        let w = z.sqrt();
        (w.cosh(), w.sinh() / w)
    } else {
        let w = (-z).sqrt();
        (w.cos(), w.sin() / w)
    }
}

/// Exact solution of the linear `(q̂, v̂)` system after time `t`.
pub fn semigroup_apply(
    q0: Complex64,
    v0: Complex64,
    xi_norm: f64,
    t: f64,
    params: &FluidParams,
    alpha: f64,
) -> Result<(Complex64, Complex64)> {
    if t == 0.0 {
        return Ok((q0, v0));
    }
    Ok(propagator(xi_norm * xi_norm, t, params, Capillarity::Nonlocal { alpha })?.apply(q0, v0))
}

/// Heat flow of the solenoidal part: `w₀ e^{−μ|ξ|²t}`.
pub fn heat_apply(w0: Complex64, xi_norm2: f64, t: f64, mu: f64) -> Complex64 {
    if t == 0.0 {
        return w0;
    }
    w0 * (-mu * xi_norm2 * t).exp()
}

/// Matrix exponential of a real 2×2 matrix by scaling and squaring of a
/// truncated Taylor series.
pub fn expm2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let norm = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max) * 2.0;
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-squarings);
    let b = [[a[0][0] * scale, a[0][1] * scale], [a[1][0] * scale, a[1][1] * scale]];
    let mut result = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = result;
    for k in 1..=20 {
        term = mul2(&term, &b);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul2(&result, &result);
    }
    result
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// One line of the decay-envelope table.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub xi_norm2: f64,
    pub regime: Regime,
    pub s_or_r: f64,
    pub re_plus: f64,
    pub re_minus: f64,
    pub im_plus: f64,
    pub measured: f64,
    pub bound: f64,
}

impl EnvelopeRow {
    /// Low regime: the rate equals `νx/2`; otherwise it must reach the bound.
    pub fn holds(&self, tol: f64) -> bool {
        match self.regime {
            Regime::Low => (self.measured - self.bound).abs() <= tol * self.bound.max(1.0),
            _ => self.measured >= self.bound * (1.0 - tol),
        }
    }
}

/// Measured decay exponent of `‖e^{tA(ξ)}‖` for each `|ξ|²` of `xi_grid`,
/// against the regime bound: `νx/2` (low), `(ν c₀² 2^{2j}/4)(1 − m)` with
/// `c₀ 2^j ≤ |ξ| < 2 c₀ 2^j` (transition), `κα²/(2ν)` (high).
///
/// Oscillating modes are measured over one half period, where the norm of the
/// rotating factor returns to 1; real and near-degenerate modes by the log
/// slope on `[t₁, 2t₁]` with `t₁ ≥ horizon` late enough for the transient to fade.
pub fn envelope_report(params: &FluidParams, alpha: f64, xi_grid: &[f64], horizon: f64) -> Result<Vec<EnvelopeRow>> {
    let cap = Capillarity::Nonlocal { alpha };
    xi_grid
        .iter()
        .map(|&x| {
            let md = modes(x, params, alpha)?;
            let a = 0.5 * params.nu * x;
            let measured = match md.regime {
                Regime::Low if md.s.unwrap_or(0.0) >= DEGENERATE_G.sqrt() => {
                    let period = std::f64::consts::PI / (a * md.s.unwrap_or(0.0));
                    -propagator(x, period, params, cap)?.log_norm() / period
                }
                Regime::Low => {
                    // Near-Jordan mode: the polynomial factor fades only as ln(t)/t.
                    let t1 = horizon.max(1e7 / a);
                    let n1 = propagator(x, t1, params, cap)?.log_norm();
                    let n2 = propagator(x, 2.0 * t1, params, cap)?.log_norm();
                    -(n2 - n1) / t1
                }
                _ => {
                    let rv = md.r.unwrap_or(0.0).max(DEGENERATE_G.sqrt());
                    let t1 = horizon.max(25.0 / (a * rv));
                    let n1 = propagator(x, t1, params, cap)?.log_norm();
                    let n2 = propagator(x, 2.0 * t1, params, cap)?.log_norm();
                    -(n2 - n1) / t1
                }
            };
            let bound = match md.regime {
                Regime::Low => a,
                Regime::Transition => {
                    let c0 = crate::lp::C0;
                    let j = (x.sqrt() / c0).log2().floor();
                    params.nu * c0 * c0 * 4f64.powf(j) / 4.0 * (1.0 - md.m)
                }
                Regime::High => params.kappa * alpha * alpha / (2.0 * params.nu),
            };
            Ok(EnvelopeRow {
                xi_norm2: x,
                regime: md.regime,
                s_or_r: md.s.or(md.r).unwrap_or(0.0),
                re_plus: md.lambda_plus.re,
                re_minus: md.lambda_minus.re,
                im_plus: md.lambda_plus.im,
                measured,
                bound,
            })
        })
        .collect()
}

pub fn write_envelope_csv<W: Write>(mut out: W, rows: &[EnvelopeRow]) -> Result<()> {
    writeln!(out, "# schema: linear_envelope,1")?;
    writeln!(out, "xi_norm2,regime,s_or_r,re_lambda_plus,re_lambda_minus,im_lambda_plus,envelope_rate_measured,envelope_rate_bound")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.xi_norm2,
            r.regime.label(),
            r.s_or_r,
            r.re_plus,
            r.re_minus,
            r.im_plus,
            r.measured,
            r.bound
        )?;
    }
    Ok(())
}
