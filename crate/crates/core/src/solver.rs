//! Time integration of the nonlinear systems.
//!
//! Strang splitting: half a step of the exact linear flow, an explicit midpoint
//! step of the nonlinear tendencies, and another exact half step. The linear
//! flow is applied mode by mode through the Helmholtz split: `(q, Λ⁻¹div u)`
//! by the 2×2 propagator, the rotational part by the heat flow.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linear::{self, Capillarity};
use crate::lp::Trajectory;
use crate::model::{coeff_k_unchecked, CouplingAlpha, FluidParams, State};
use crate::spectral::{write_snapshot, Fourier, SpectralField};

/// `‖(q, u)‖_{L^∞}` above which a run is declared unstable.
pub const BLOW_UP_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// Nonlocal capillarity through the order parameter.
    Op(CouplingAlpha),
    /// Local Korteweg capillarity `κ∇Δρ`.
    K,
}

impl ModelKind {
    pub fn capillarity(&self) -> Capillarity {
        match self {
            ModelKind::Op(a) => Capillarity::Nonlocal { alpha: a.get() },
            ModelKind::K => Capillarity::Local,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            ModelKind::Op(a) => Some(a.get()),
            ModelKind::K => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Friedrichs level applied to the nonlinear tendencies, if any.
    pub n_trunc: Option<u32>,
    pub record_every: usize,
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!("dt > 0 (dt = {})", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::ParameterOutOfRange(format!("dt <= T (dt = {}, T = {})", self.dt, self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::ParameterOutOfRange("record_every >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually used (`T` split evenly).
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_end / self.dt).round().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

fn physical(fourier: &Fourier, f: &SpectralField) -> Result<Vec<Vec<f64>>> {
    fourier.inverse(f)
}

/// `A u = μΔu + (λ+μ)∇div u`.
pub fn lame_operator(fourier: &Fourier, u: &SpectralField, params: &FluidParams) -> Result<SpectralField> {
    let lap = fourier.laplacian(u).scale(params.mu);
    let grad_div = fourier.gradient(&fourier.divergence(u)).scale(params.lambda + params.mu);
    lap.add(&grad_div)
}

struct Tendency {
    dq: SpectralField,
    du: SpectralField,
    sup: f64,
    min_density: f64,
}

fn tendencies(fourier: &Fourier, state: &State, params: &FluidParams, t: f64) -> Result<Tendency> {
    let grid = *fourier.grid();
    let d = grid.d;
    let npts = grid.len();
    let q = fourier.inverse_scalar(&state.q)?;
    let u = physical(fourier, &state.u)?;
    let sup = q.iter().chain(u.iter().flatten()).fold(0.0f64, |m, v| m.max(v.abs()));
    let min_density = q.iter().fold(f64::INFINITY, |m, &v| m.min(1.0 + v));
    if !sup.is_finite() || sup > BLOW_UP_NORM {
        return Err(Error::BlowUp { norm: sup, t });
    }
    if min_density <= 0.0 {
        return Err(Error::VacuumError { min_density, t });
    }
    let grad_q = physical(fourier, &fourier.gradient(&state.q))?;
    let lame = physical(fourier, &lame_operator(fourier, &state.u, params)?)?;
    let grad_u: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|a| physical(fourier, &fourier.derivative(&state.u, a)))
        .collect::<Result<_>>()?;

    let flux: Vec<Vec<f64>> = (0..d).map(|a| (0..npts).map(|i| q[i] * u[a][i]).collect()).collect();
    let mut dq = fourier.divergence(&fourier.forward(&flux)?).scale(-1.0);

    let k: Vec<f64> = q.iter().map(|&v| coeff_k_unchecked(v, params)).collect();
    let inertia: Vec<f64> = q.iter().map(|&v| v / (1.0 + v)).collect();
    let du_phys: Vec<Vec<f64>> = (0..d)
        .map(|b| {
            (0..npts)
                .map(|i| {
                    let advect: f64 = (0..d).map(|a| u[a][i] * grad_u[a][b][i]).sum();
                    -advect + k[i] * grad_q[b][i] - inertia[i] * lame[b][i]
                })
                .collect()
        })
        .collect();
    let mut du = fourier.forward(&du_phys)?;
    fourier.dealias_in_place(&mut dq);
    fourier.dealias_in_place(&mut du);
    Ok(Tendency { dq, du, sup, min_density })
}

/// Nonlinear tendencies `(−div(q u), −u·∇u + K(q)∇q − I(q)A u)`, dealiased.
pub fn rhs_nonlinear(fourier: &Fourier, state: &State, params: &FluidParams) -> Result<(SpectralField, SpectralField)> {
    let t = tendencies(fourier, state, params, f64::NAN)?;
    Ok((t.dq, t.du))
}

/// Exact linear flow over `dt`.
pub fn linear_step(fourier: &Fourier, state: &State, dt: f64, model: ModelKind, params: &FluidParams) -> Result<State> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    LinearFlow::new(fourier, dt, model, params)?.apply(fourier, state)
}

/// Per-mode propagators for one fixed step length.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    dt: f64,
    pair: Vec<[[f64; 2]; 2]>,
    heat: Vec<f64>,
}

impl LinearFlow {
    pub fn new(fourier: &Fourier, dt: f64, model: ModelKind, params: &FluidParams) -> Result<Self> {
        let cap = model.capillarity();
        let table = fourier.norm2_table();
        let mut pair = Vec::with_capacity(table.len());
        let mut heat = Vec::with_capacity(table.len());
        for &x in table {
            if x == 0.0 || dt == 0.0 {
                pair.push([[1.0, 0.0], [0.0, 1.0]]);
                heat.push(1.0);
            } else {
                pair.push(linear::propagator(x, dt, params, cap)?.dense());
                heat.push((-params.mu * x * dt).exp());
            }
        }
        Ok(Self { dt, pair, heat })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, fourier: &Fourier, state: &State) -> Result<State> {
        let mut parts = fourier.helmholtz_split(&state.u)?;
        let mut q = state.q.clone();
        {
            let qc = q.component_mut(0);
            let vc = parts.v.component_mut(0);
            for (i, m) in self.pair.iter().enumerate() {
                let (q0, v0) = (qc[i], vc[i]);
                qc[i] = q0 * m[0][0] + v0 * m[0][1];
                vc[i] = q0 * m[1][0] + v0 * m[1][1];
            }
        }
        for c in 0..parts.w.ncomp() {
            for (z, h) in parts.w.component_mut(c).iter_mut().zip(&self.heat) {
                *z *= *h;
            }
        }
        let u = fourier.helmholtz_recompose(&parts);
        Ok(State { q, u, c: state.c.clone() })
    }
}

/// Advisory stable step for the explicit nonlinear stage:
/// `0.5 / (ξ_max ‖u‖_∞ + ν ξ_max² ‖I(q)‖_∞ + ξ_max √‖K(q)‖_∞)`.
pub fn dt_max(fourier: &Fourier, state: &State, params: &FluidParams) -> Result<f64> {
    let xi = fourier.grid().max_resolved_xi();
    let q = fourier.inverse_scalar(&state.q)?;
    let u = physical(fourier, &state.u)?;
    let umax = u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let imax = q.iter().fold(0.0f64, |m, &v| m.max((v / (1.0 + v)).abs()));
    let kmax = q.iter().fold(0.0f64, |m, &v| m.max(coeff_k_unchecked(v, params).abs()));
    let rate = xi * umax + params.nu * xi * xi * imax + xi * kmax.sqrt();
    Ok(if rate > 0.0 { 0.5 / rate } else { f64::INFINITY })
}

/// Stepper for one model and step length.
#[derive(Debug, Clone)]
pub struct Solver {
    fourier: Fourier,
    params: FluidParams,
    model: ModelKind,
    n_trunc: Option<u32>,
    dt: f64,
    half: LinearFlow,
}

impl Solver {
    pub fn new(fourier: &Fourier, params: FluidParams, model: ModelKind, dt: f64, n_trunc: Option<u32>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("dt > 0 (dt = {dt})")));
        }
        let half = LinearFlow::new(fourier, 0.5 * dt, model, &params)?;
        Ok(Self { fourier: fourier.clone(), params, model, n_trunc, dt, half })
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    fn project(&self, f: SpectralField) -> SpectralField {
        match self.n_trunc {
            Some(n) => self.fourier.friedrichs_project(&f, n),
            None => f,
        }
    }

    fn nonlinear(&self, state: &State, t: f64) -> Result<(SpectralField, SpectralField)> {
        let input = match self.n_trunc {
            Some(n) => State {
                q: self.fourier.friedrichs_project(&state.q, n),
                u: self.fourier.friedrichs_project(&state.u, n),
                c: None,
            },
            None => State { q: state.q.clone(), u: state.u.clone(), c: None },
        };
        let tend = tendencies(&self.fourier, &input, &self.params, t)?;
        debug_assert!(tend.sup.is_finite() && tend.min_density > 0.0);
        Ok((self.project(tend.dq), self.project(tend.du)))
    }

    /// One Strang step from time `t`.
    pub fn step(&self, state: &State, t: f64) -> Result<State> {
        let dt = self.dt;
        let s1 = self.half.apply(&self.fourier, state)?;
        let (k1q, k1u) = self.nonlinear(&s1, t + 0.5 * dt)?;
        let mid = State { q: s1.q.axpy(0.5 * dt, &k1q)?, u: s1.u.axpy(0.5 * dt, &k1u)?, c: None };
        let (k2q, k2u) = self.nonlinear(&mid, t + 0.5 * dt)?;
        let s2 = State { q: s1.q.axpy(dt, &k2q)?, u: s1.u.axpy(dt, &k2u)?, c: None };
        let mut out = self.half.apply(&self.fourier, &s2)?;
        out.c = None;
        Ok(out)
    }

    /// Attaches `c − 1 = φ_α ∗ q` for the order-parameter model.
    pub fn with_order_parameter(&self, mut state: State) -> State {
        state.c = self.model.alpha().map(|a| order_parameter(&self.fourier, &state.q, a));
        state
    }

    /// Runs `T / dt` steps, recording every `record_every`-th state and the last one.
    pub fn integrate(&self, state0: &State, t_end: f64, record_every: usize) -> Result<Trajectory> {
        let cfg = StepConfig { dt: self.dt, t_end, n_trunc: self.n_trunc, record_every };
        cfg.validate()?;
        let (n, h) = cfg.steps();
        let stepper = if (h - self.dt).abs() > 1e-15 * self.dt {
            Solver::new(&self.fourier, self.params, self.model, h, self.n_trunc)?
        } else {
            self.clone()
        };
        let mut traj = Trajectory::empty();
        traj.push(0.0, self.with_order_parameter(state0.clone()))?;
        let mut state = State { q: state0.q.clone(), u: state0.u.clone(), c: None };
        for k in 1..=n {
            let t0 = (k - 1) as f64 * h;
            state = stepper.step(&state, t0)?;
            if k % record_every == 0 || k == n {
                let t = if k == n { t_end } else { k as f64 * h };
                traj.push(t, self.with_order_parameter(state.clone()))?;
            }
        }
        Ok(traj)
    }
}

/// Runs one model from `state0` under `cfg`.
pub fn integrate(
    fourier: &Fourier,
    state0: &State,
    model: ModelKind,
    params: &FluidParams,
    cfg: &StepConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (_, h) = cfg.steps();
    Solver::new(fourier, *params, model, h, cfg.n_trunc)?.integrate(state0, cfg.t_end, cfg.record_every)
}

/// `c − 1 = φ_α ∗ q`, the solution of `−Δc + α²(c − 1 − q) = 0`.
pub fn order_parameter(fourier: &Fourier, q: &SpectralField, alpha: f64) -> SpectralField {
    fourier.mollifier_phi_alpha(q, alpha)
}

/// Relative residual `‖−Δc + α²c − α²(1+q)‖ / (α² ‖1+q‖)` with `c = 1 + c_minus_one`.
pub fn elliptic_residual(fourier: &Fourier, q: &SpectralField, c_minus_one: &SpectralField, alpha: f64) -> Result<f64> {
    let a2 = alpha * alpha;
    let mut one_plus_q = q.clone();
    one_plus_q.component_mut(0)[0] += Complex64::new(1.0, 0.0);
    let mut c = c_minus_one.clone();
    c.component_mut(0)[0] += Complex64::new(1.0, 0.0);
    let lhs = fourier.laplacian(&c).scale(-1.0).axpy(a2, &c)?.axpy(-a2, &one_plus_q)?;
    Ok(lhs.l2_norm() / (a2 * one_plus_q.l2_norm()))
}

/// `R_α = κ∇(Δq − α²(φ_α∗q − q))`, symbol `−iκ ξ |ξ|⁴ / (α² + |ξ|²)`.
pub fn remainder_r_alpha(fourier: &Fourier, q: &SpectralField, params: &FluidParams, alpha: f64) -> SpectralField {
    let a2 = alpha * alpha;
    let scaled = fourier.apply_radial(q, |x| -params.kappa * x * x / (a2 + x));
    fourier.gradient(&scaled)
}

/// Writes one snapshot per recorded state (`q` and `u` files) and a manifest
/// CSV `t,file,mean_q,L2_q,L2_u`.
pub fn write_trajectory(dir: &Path, fourier: &Fourier, traj: &Trajectory, prefix: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{prefix}_manifest.csv")))?);
    writeln!(manifest, "# schema: trajectory_manifest,1")?;
    writeln!(manifest, "t,file,mean_q,L2_q,L2_u")?;
    for (k, (t, s)) in traj.times().iter().zip(traj.states()).enumerate() {
        let name = format!("{prefix}_{k:05}");
        for (field, kind) in [(&s.q, "q"), (&s.u, "u")] {
            let file = std::fs::File::create(dir.join(format!("{name}_{kind}.snap")))?;
            write_snapshot(std::io::BufWriter::new(file), fourier, field, kind, *t)?;
        }
        writeln!(manifest, "{t},{name},{:e},{:e},{:e}", s.q.mean()[0], s.q.l2_norm(), s.u.l2_norm())?;
    }
    manifest.flush()?;
    Ok(())
}
