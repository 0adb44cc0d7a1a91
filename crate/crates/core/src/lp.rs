//! Littlewood–Paley decomposition and the Besov, hybrid and Chemin–Lerner
//! norms built on it.
//!
//! Blocks use the annulus `3/4 ≤ |ξ| ≤ 8/3`: `φ_LP(ξ) = χ(ξ/2) − χ(ξ)` with `χ`
//! equal to 1 on `B(0, 3/4)` and supported in `B(0, 4/3)`. On the torus the
//! homogeneous norms ignore the mean mode, and the block range is clipped to
//! the shells the grid can represent.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{FluidParams, State};
use crate::spectral::{Fourier, GridSpec, SpectralField};

pub const C0: f64 = 3.0 / 4.0;
pub const BIG_C0: f64 = 8.0 / 3.0;
const CHI_INNER: f64 = 3.0 / 4.0;
const CHI_OUTER: f64 = 4.0 / 3.0;

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Radial cut-off `χ(r)`: 1 on `[0, 3/4]`, 0 on `[4/3, ∞)`, smooth and nonincreasing.
pub fn chi(r: f64) -> f64 {
    1.0 - smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))
}

/// Annulus profile `φ_LP(r) = χ(r/2) − χ(r)`.
pub fn phi_lp(r: f64) -> f64 {
    chi(r / 2.0) - chi(r)
}

/// Blocks `j` whose annulus `2^j [3/4, 8/3]` can contain `r > 0`.
fn candidate_blocks(r: f64) -> impl Iterator<Item = i32> {
    let base = r.log2().floor() as i32;
    (base - 1)..=(base + 1)
}

/// Dyadic blocks restricted to one grid: for each nonzero frequency, the
/// (at most two) blocks it belongs to and the profile weight.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    grid: GridSpec,
    j_min: i32,
    j_max: i32,
    entries: Vec<(u32, u16, f64)>,
}

impl DyadicPartition {
    pub fn new(fourier: &Fourier) -> Self {
        let grid = *fourier.grid();
        let mut raw = Vec::new();
        let (mut j_min, mut j_max) = (i32::MAX, i32::MIN);
        for i in 1..grid.len() {
            let r = fourier.xi_norm2(i).sqrt();
            for j in candidate_blocks(r) {
                let w = phi_lp(r * 2f64.powi(-j));
                if w > 0.0 {
                    j_min = j_min.min(j);
                    j_max = j_max.max(j);
                    raw.push((i as u32, j, w));
                }
            }
        }
        let entries = raw.into_iter().map(|(i, j, w)| (i, (j - j_min) as u16, w)).collect();
        Self { grid, j_min, j_max, entries }
    }

    /// Smallest and largest block index that sees a grid frequency.
    pub fn j_range(&self) -> (i32, i32) {
        (self.j_min, self.j_max)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `Δ_j f`; blocks outside the grid's range are zero.
    pub fn dyadic_block(&self, f: &SpectralField, j: i32) -> SpectralField {
        let mut out = SpectralField::zeros(self.grid, f.ncomp());
        if j < self.j_min || j > self.j_max {
            return out;
        }
        let b = (j - self.j_min) as u16;
        for &(i, block, w) in &self.entries {
            if block == b {
                for c in 0..f.ncomp() {
                    out.component_mut(c)[i as usize] = f.component(c)[i as usize] * w;
                }
            }
        }
        out
    }

    /// `‖Δ_j f‖_{L²}` for every block in range (components summed in quadrature).
    pub fn block_norms(&self, f: &SpectralField) -> BlockNorms {
        let nblocks = (self.j_max - self.j_min + 1).max(0) as usize;
        let mut acc = vec![0.0; nblocks];
        for &(i, block, w) in &self.entries {
            let e: f64 = f.components().iter().map(|c| c[i as usize].norm_sqr()).sum();
            acc[block as usize] += w * w * e;
        }
        let vol = self.grid.volume();
        BlockNorms { j_min: self.j_min, norms: acc.into_iter().map(|a| (vol * a).sqrt()).collect() }
    }
}

/// Weight attached to block `j` in a norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `2^{js}`: homogeneous Besov `Ḃ^s_{2,1}`.
    Besov,
    /// `min(α², 2^{2j}) 2^{js}`: hybrid `Ḃ_α^{s+2,s}`.
    Hybrid { alpha: f64 },
}

impl NormKind {
    pub fn weight(&self, j: i32, s: f64) -> f64 {
        let base = 2f64.powf(j as f64 * s);
        match *self {
            NormKind::Besov => base,
            NormKind::Hybrid { alpha } => (alpha * alpha).min(4f64.powi(j)) * base,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NormKind::Besov => "besov_21",
            NormKind::Hybrid { .. } => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockNorms {
    j_min: i32,
    norms: Vec<f64>,
}

impl BlockNorms {
    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.norms.iter().enumerate().map(move |(k, &v)| (self.j_min + k as i32, v))
    }

    pub fn get(&self, j: i32) -> f64 {
        let k = j - self.j_min;
        if k < 0 {
            0.0
        } else {
            self.norms.get(k as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn weighted(&self, s: f64, kind: NormKind) -> f64 {
        self.iter().map(|(j, v)| kind.weight(j, s) * v).sum()
    }
}

/// `Σ_j 2^{js} ‖Δ_j f‖_{L²}`.
pub fn besov_norm(fourier: &Fourier, f: &SpectralField, s: f64) -> f64 {
    DyadicPartition::new(fourier).block_norms(f).weighted(s, NormKind::Besov)
}

/// `Σ_j min(α², 2^{2j}) 2^{js} ‖Δ_j f‖_{L²}`.
pub fn hybrid_norm(fourier: &Fourier, f: &SpectralField, s: f64, alpha: f64) -> f64 {
    DyadicPartition::new(fourier).block_norms(f).weighted(s, NormKind::Hybrid { alpha })
}

/// Time-stamped states with trapezoid quadrature weights.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<State>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<State>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::SizeMismatch { expected: times.len(), got: states.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { times, states })
    }

    pub fn push(&mut self, t: f64, state: State) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Config(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn empty() -> Self {
        Self { times: Vec::new(), states: Vec::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Trapezoid weights; a single sample gets weight 0.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.times.len();
        let mut w = vec![0.0; n];
        for k in 1..n {
            let h = self.times[k] - self.times[k - 1];
            w[k - 1] += 0.5 * h;
            w[k] += 0.5 * h;
        }
        w
    }

    /// Frame-wise difference of two trajectories sampled at identical times.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.times != other.times {
            return Err(Error::Config("trajectories are sampled at different times".into()));
        }
        let states = self.states.iter().zip(&other.states).map(|(a, b)| a.difference(b)).collect::<Result<_>>()?;
        Ok(Trajectory { times: self.times.clone(), states })
    }

    pub fn map_states(&self, f: impl Fn(&State) -> Result<State>) -> Result<Trajectory> {
        Ok(Trajectory { times: self.times.clone(), states: self.states.iter().map(f).collect::<Result<_>>()? })
    }
}

/// Which field of a state a norm is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSelector {
    Q,
    U,
    C,
}

impl FieldSelector {
    fn pick<'a>(&self, s: &'a State) -> Result<&'a SpectralField> {
        match self {
            FieldSelector::Q => Ok(&s.q),
            FieldSelector::U => Ok(&s.u),
            FieldSelector::C => s.c.as_ref().ok_or(Error::MissingComponent("c")),
        }
    }
}

/// Time norm applied to each block before summing over blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeNorm {
    /// `L^∞_t`: supremum over samples.
    Sup,
    /// `L^1_t`: trapezoid integral.
    Integral,
}

/// Block norms of one field along a trajectory.
#[derive(Debug, Clone)]
pub struct BlockHistory {
    weights: Vec<f64>,
    frames: Vec<BlockNorms>,
}

impl BlockHistory {
    pub fn new(partition: &DyadicPartition, traj: &Trajectory, field: FieldSelector) -> Result<Self> {
        if traj.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let frames = traj
            .states()
            .iter()
            .map(|s| field.pick(s).map(|f| partition.block_norms(f)))
            .collect::<Result<_>>()?;
        Ok(Self { weights: traj.weights(), frames })
    }

    /// Chemin–Lerner norm `‖ 2^{js} ‖Δ_j f‖_{L^ρ_t L²} ‖_{ℓ¹}` (or the hybrid weight).
    pub fn tilde(&self, s: f64, rho: TimeNorm, kind: NormKind) -> f64 {
        let first = &self.frames[0];
        first
            .iter()
            .map(|(j, _)| {
                let per_block = match rho {
                    TimeNorm::Sup => self.frames.iter().map(|f| f.get(j)).fold(0.0, f64::max),
                    TimeNorm::Integral => self.frames.iter().zip(&self.weights).map(|(f, w)| w * f.get(j)).sum(),
                };
                kind.weight(j, s) * per_block
            })
            .sum()
    }

    /// Plain `L^ρ_t` norm of the spatial norm (time norm taken after the block sum).
    pub fn plain(&self, s: f64, rho: TimeNorm, kind: NormKind) -> f64 {
        let values = self.frames.iter().map(|f| f.weighted(s, kind));
        match rho {
            TimeNorm::Sup => values.fold(0.0, f64::max),
            TimeNorm::Integral => values.zip(&self.weights).map(|(v, w)| v * w).sum(),
        }
    }

    pub fn spatial(&self, frame: usize, s: f64, kind: NormKind) -> f64 {
        self.frames[frame].weighted(s, kind)
    }
}

/// Chemin–Lerner norm of one field of a trajectory.
pub fn tilde_norm(
    partition: &DyadicPartition,
    traj: &Trajectory,
    field: FieldSelector,
    s: f64,
    rho: TimeNorm,
    kind: NormKind,
) -> Result<f64> {
    Ok(BlockHistory::new(partition, traj, field)?.tilde(s, rho, kind))
}

/// The six terms of `‖(q, u)‖_{E_α^s}`, in order:
/// `‖u‖_{L̃^∞Ḃ^{s−1}}, ‖q‖_{L̃^∞Ḃ^{s−1}}, ν‖q‖_{L̃^∞Ḃ^s}, ν₀‖u‖_{L̃^1Ḃ^{s+1}},
/// ν‖q‖_{L̃^1Ḃ_α^{s+1,s−1}}, ν²‖q‖_{L̃^1Ḃ_α^{s+2,s}}`.
pub fn e_norm_terms(
    partition: &DyadicPartition,
    traj: &Trajectory,
    s: f64,
    alpha: f64,
    params: &FluidParams,
) -> Result<[f64; 6]> {
    let q = BlockHistory::new(partition, traj, FieldSelector::Q)?;
    let u = BlockHistory::new(partition, traj, FieldSelector::U)?;
    let hyb = NormKind::Hybrid { alpha };
    Ok([
        u.tilde(s - 1.0, TimeNorm::Sup, NormKind::Besov),
        q.tilde(s - 1.0, TimeNorm::Sup, NormKind::Besov),
        params.nu * q.tilde(s, TimeNorm::Sup, NormKind::Besov),
        params.nu0 * u.tilde(s + 1.0, TimeNorm::Integral, NormKind::Besov),
        params.nu * q.tilde(s - 1.0, TimeNorm::Integral, hyb),
        params.nu * params.nu * q.tilde(s, TimeNorm::Integral, hyb),
    ])
}

/// The four order-parameter terms that `F_α^s` adds to `E_α^s`:
/// `‖c‖_{L̃^∞Ḃ^{s−1}}, ν‖c‖_{L̃^∞Ḃ^s}, ν‖c‖_{L̃^1Ḃ_α^{s+1,s−1}}, ν²‖c‖_{L̃^1Ḃ_α^{s+2,s}}`.
pub fn f_norm_extra_terms(
    partition: &DyadicPartition,
    traj: &Trajectory,
    s: f64,
    alpha: f64,
    params: &FluidParams,
) -> Result<[f64; 4]> {
    let c = BlockHistory::new(partition, traj, FieldSelector::C)?;
    let hyb = NormKind::Hybrid { alpha };
    Ok([
        c.tilde(s - 1.0, TimeNorm::Sup, NormKind::Besov),
        params.nu * c.tilde(s, TimeNorm::Sup, NormKind::Besov),
        params.nu * c.tilde(s - 1.0, TimeNorm::Integral, hyb),
        params.nu * params.nu * c.tilde(s, TimeNorm::Integral, hyb),
    ])
}

pub fn e_norm(partition: &DyadicPartition, traj: &Trajectory, s: f64, alpha: f64, params: &FluidParams) -> Result<f64> {
    Ok(e_norm_terms(partition, traj, s, alpha, params)?.iter().sum())
}

pub fn f_norm(partition: &DyadicPartition, traj: &Trajectory, s: f64, alpha: f64, params: &FluidParams) -> Result<f64> {
    let extra: f64 = f_norm_extra_terms(partition, traj, s, alpha, params)?.iter().sum();
    Ok(e_norm(partition, traj, s, alpha, params)? + extra)
}

/// One row of a norm report: `(t or "traj", norm_kind, s, alpha, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub t: Option<f64>,
    pub kind: String,
    pub s: f64,
    pub alpha: Option<f64>,
    pub value: f64,
}

pub fn write_norm_csv<W: Write>(mut out: W, rows: &[NormRow]) -> Result<()> {
    writeln!(out, "# schema: norm_report,1")?;
    writeln!(out, "t,norm_kind,s,alpha,value")?;
    for r in rows {
        let t = r.t.map_or_else(|| "traj".to_string(), |t| t.to_string());
        let alpha = r.alpha.map_or_else(String::new, |a| a.to_string());
        writeln!(out, "{t},{},{},{alpha},{:e}", r.kind, r.s, r.value)?;
    }
    Ok(())
}
