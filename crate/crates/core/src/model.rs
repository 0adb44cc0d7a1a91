//! Fluid parameters, the pressure law, the nonlinear coefficients `K` and `I`,
//! and solver states.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lp;
use crate::spectral::{Fourier, SpectralField};

/// Viscosities, capillarity and the γ-law pressure `P(ρ) = (p/γ) ρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    /// Pressure slope `P'(1)`.
    pub p: f64,
    pub gamma: f64,
    /// `λ + 2μ`.
    pub nu: f64,
    /// `min(μ, ν)`.
    pub nu0: f64,
    /// `ν² / (4κ)`.
    pub m: f64,
}

impl FluidParams {
    pub const DEFAULT_GAMMA: f64 = 1.4;

    pub fn new(mu: f64, lambda: f64, kappa: f64, p: f64, gamma: f64) -> Result<Self> {
        let nu = lambda + 2.0 * mu;
        let checks = [
            (mu > 0.0, format!("mu > 0 (mu = {mu})")),
            (nu > 0.0, format!("2*mu + lambda > 0 (nu = {nu})")),
            (kappa > 0.0, format!("kappa > 0 (kappa = {kappa})")),
            (p > 0.0, format!("p > 0 (p = {p})")),
            (gamma > 1.0, format!("gamma > 1 (gamma = {gamma})")),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::ParameterOutOfRange(what));
            }
        }
        Ok(Self { mu, lambda, kappa, p, gamma, nu, nu0: mu.min(nu), m: nu * nu / (4.0 * kappa) })
    }

    /// `P'(ρ) = p ρ^{γ−1}`.
    pub fn pressure_slope(&self, rho: f64) -> f64 {
        self.p * rho.powf(self.gamma - 1.0)
    }
}

/// Coupling strength `α > 0` between density and order parameter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CouplingAlpha(f64);

impl CouplingAlpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(Self(alpha))
        } else {
            Err(Error::ParameterOutOfRange(format!("alpha > 0 (alpha = {alpha})")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn check_density(q: f64) -> Result<()> {
    if q > -1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("1 + q must be positive, q = {q}")))
    }
}

/// `K(q) = P'(1) − P'(1+q)/(1+q) = p (1 − (1+q)^{γ−2})`.
pub fn coeff_k(q: f64, params: &FluidParams) -> Result<f64> {
    check_density(q)?;
    Ok(coeff_k_unchecked(q, params))
}

#[inline]
pub(crate) fn coeff_k_unchecked(q: f64, params: &FluidParams) -> f64 {
    // (1+q)^{γ−2} − 1 through exp_m1 keeps K(q) accurate for tiny q.
    -params.p * ((params.gamma - 2.0) * q.ln_1p()).exp_m1()
}

/// `I(q) = q / (1 + q)`.
pub fn coeff_i(q: f64) -> Result<f64> {
    check_density(q)?;
    Ok(q / (1.0 + q))
}

/// Density fluctuation `q = ρ − 1`, velocity `u`, and optionally the order
/// parameter fluctuation `c − 1`, all in Fourier space on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: SpectralField,
    pub u: SpectralField,
    pub c: Option<SpectralField>,
}

impl State {
    /// Builds a physical state, rejecting vacuum (`1 + q ≤ 0` at a grid point).
    pub fn new(fourier: &Fourier, q: SpectralField, u: SpectralField, c: Option<SpectralField>) -> Result<Self> {
        let state = Self::perturbation(fourier, q, u, c)?;
        let min = state.min_density(fourier)?;
        if min <= 0.0 {
            return Err(Error::VacuumError { min_density: min, t: 0.0 });
        }
        Ok(state)
    }

    /// Same shape checks as [`State::new`] without the positivity test; used for
    /// differences of solutions, which are not densities.
    pub fn perturbation(
        fourier: &Fourier,
        q: SpectralField,
        u: SpectralField,
        c: Option<SpectralField>,
    ) -> Result<Self> {
        let grid = *fourier.grid();
        if q.ncomp() != 1 {
            return Err(Error::SizeMismatch { expected: 1, got: q.ncomp() });
        }
        if u.ncomp() != grid.d {
            return Err(Error::SizeMismatch { expected: grid.d, got: u.ncomp() });
        }
        let fields = std::iter::once(&q).chain(std::iter::once(&u)).chain(c.iter());
        for f in fields {
            if *f.grid() != grid {
                return Err(Error::Config("state components must share one grid".into()));
            }
        }
        if let Some(c) = &c {
            if c.ncomp() != 1 {
                return Err(Error::SizeMismatch { expected: 1, got: c.ncomp() });
            }
        }
        Ok(Self { q, u, c })
    }

    pub fn zero(fourier: &Fourier) -> Self {
        let g = *fourier.grid();
        Self { q: SpectralField::zeros(g, 1), u: SpectralField::zeros(g, g.d), c: None }
    }

    /// `min_x (1 + q(x))`.
    pub fn min_density(&self, fourier: &Fourier) -> Result<f64> {
        Ok(fourier.inverse_scalar(&self.q)?.into_iter().fold(f64::INFINITY, |m, v| m.min(1.0 + v)))
    }

    /// Component-wise `self − other` (`c` kept only when both carry it).
    pub fn difference(&self, other: &State) -> Result<State> {
        let c = match (&self.c, &other.c) {
            (Some(a), Some(b)) => Some(a.sub(b)?),
            _ => None,
        };
        Ok(State { q: self.q.sub(&other.q)?, u: self.u.sub(&other.u)?, c })
    }

    pub fn scale(&self, s: f64) -> State {
        State { q: self.q.scale(s), u: self.u.scale(s), c: self.c.as_ref().map(|c| c.scale(s)) }
    }
}

/// Smallness norm `‖q‖_{Ḃ^{d/2−1}} + ‖q‖_{Ḃ^{d/2}} + ‖u‖_{Ḃ^{d/2−1}}` of initial data.
pub fn initial_data_norm(fourier: &Fourier, q: &SpectralField, u: &SpectralField) -> f64 {
    let half_d = fourier.grid().d as f64 / 2.0;
    lp::besov_norm(fourier, q, half_d - 1.0)
        + lp::besov_norm(fourier, q, half_d)
        + lp::besov_norm(fourier, u, half_d - 1.0)
}

/// Random-phase data supported on `2^{j_lo} ≤ |ξ| < 2^{j_hi+1}`, rescaled so that
/// [`initial_data_norm`] equals `amplitude`. Deterministic in `seed`.
pub fn make_initial_data(fourier: &Fourier, amplitude: f64, band: (i32, i32), seed: u64) -> Result<State> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("amplitude > 0 (amplitude = {amplitude})")));
    }
    let (j_lo, j_hi) = band;
    let grid = *fourier.grid();
    let lo = 2f64.powi(j_lo);
    let hi = 2f64.powi(j_hi + 1);
    if j_lo > j_hi {
        return Err(Error::BandOutOfRange(format!("empty band [{j_lo}, {j_hi}]")));
    }
    if hi > grid.max_resolved_xi() {
        return Err(Error::BandOutOfRange(format!(
            "shell {j_hi} reaches |ξ| = {hi} beyond the resolved {}",
            grid.max_resolved_xi()
        )));
    }
    let in_band = |i: usize| {
        let r = fourier.xi_norm2(i).sqrt();
        r >= lo && r < hi
    };
    if !(0..grid.len()).any(in_band) {
        return Err(Error::BandOutOfRange(format!(
            "band [{j_lo}, {j_hi}] holds no grid frequency (spacing {})",
            grid.dxi()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_field = |ncomp: usize| {
        let mut comps = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; ncomp];
        for comp in comps.iter_mut() {
            for i in 0..grid.len() {
                let m = grid.mirror(i);
                if m < i || !in_band(i) {
                    continue;
                }
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                if m == i {
                    comp[i] = Complex64::new(re, 0.0);
                } else {
                    comp[i] = Complex64::new(re, im);
                    comp[m] = Complex64::new(re, -im);
                }
            }
        }
        SpectralField::from_components(grid, comps).expect("sizes match")
    };
    let q = random_field(1);
    let u = random_field(grid.d);
    let norm = initial_data_norm(fourier, &q, &u);
    let s = amplitude / norm;
    State::new(fourier, q.scale(s), u.scale(s), None)
}
