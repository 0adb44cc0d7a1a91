//! Periodic grids, discrete Fourier transforms and Fourier multipliers.
//!
//! Coefficients are Fourier-series coefficients: the forward transform divides
//! by the number of grid points, so a constant field `c` has `f̂(0) = c` and
//! `‖f‖²_{L²(torus)} = L^d Σ_k |f̂(k)|²`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Torus `[0, L)^d` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub length: f64,
}

impl GridSpec {
    /// Default period `2π·16`, which resolves dyadic shells down to `j = -4`.
    pub const DEFAULT_LENGTH: f64 = 2.0 * PI * 16.0;

    pub fn new(d: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::ParameterOutOfRange(format!("grid dimension d = {d} not in {{1,2,3}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::ParameterOutOfRange(format!("n = {n} must be a power of two ≥ 8")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("period L = {length} must be > 0")));
        }
        Ok(Self { d, n, length })
    }

    pub fn with_default_length(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, Self::DEFAULT_LENGTH)
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency spacing `2π / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Volume of the torus, `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.d as i32)
    }

    /// Axis indices of a flat (row-major, last axis fastest) index.
    pub fn axes(&self, flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = flat;
        for a in (0..self.d).rev() {
            out[a] = rem % self.n;
            rem /= self.n;
        }
        out
    }

    pub fn flat(&self, axes: [usize; 3]) -> usize {
        axes[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Signed wavenumber of an axis index, in `[-n/2, n/2)`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn wavenumbers(&self, flat: usize) -> [i64; 3] {
        let axes = self.axes(flat);
        let mut k = [0; 3];
        for a in 0..self.d {
            k[a] = self.wavenumber(axes[a]);
        }
        k
    }

    /// Frequency vector `ξ = 2πk / L` (unused axes are 0).
    pub fn xi(&self, flat: usize) -> [f64; 3] {
        let k = self.wavenumbers(flat);
        let h = self.dxi();
        [k[0] as f64 * h, k[1] as f64 * h, k[2] as f64 * h]
    }

    pub fn xi_norm2(&self, flat: usize) -> f64 {
        self.xi(flat).iter().map(|x| x * x).sum()
    }

    /// Flat index of the mode `-k`.
    pub fn mirror(&self, flat: usize) -> usize {
        let mut axes = self.axes(flat);
        for a in axes.iter_mut().take(self.d) {
            *a = (self.n - *a) % self.n;
        }
        self.flat(axes)
    }

    /// True if some axis sits at the unpaired wavenumber `-n/2`.
    pub fn on_nyquist_plane(&self, flat: usize) -> bool {
        self.axes(flat)[..self.d].iter().any(|&i| i == self.n / 2)
    }

    /// Physical coordinates of a grid point.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let axes = self.axes(flat);
        let h = self.length / self.n as f64;
        [axes[0] as f64 * h, axes[1] as f64 * h, axes[2] as f64 * h]
    }

    /// Largest retained wavenumber magnitude per axis under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> i64 {
        self.n as i64 / 3
    }

    /// Largest `|ξ|` kept by the two-thirds rule along one axis.
    pub fn max_resolved_xi(&self) -> f64 {
        self.dealias_cutoff() as f64 * self.dxi()
    }
}

/// Fourier coefficients of a real scalar (1 component) or vector (`d` components) field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec, ncomp: usize) -> Self {
        Self { grid, comps: vec![vec![ZERO; grid.len()]; ncomp] }
    }

    pub fn from_components(grid: GridSpec, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::SizeMismatch { expected: grid.len(), got: c.len() });
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Scalar field made of component `c`.
    pub fn select(&self, c: usize) -> SpectralField {
        Self { grid: self.grid, comps: vec![self.comps[c].clone()] }
    }

    /// The `k = 0` coefficient of each component (the spatial mean).
    pub fn mean(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c[0].re).collect()
    }

    pub fn without_mean(&self) -> SpectralField {
        let mut out = self.clone();
        for c in &mut out.comps {
            c[0] = ZERO;
        }
        out
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        self.map(|_, z| z * s)
    }

    pub fn map(&self, f: impl Fn(usize, Complex64) -> Complex64) -> SpectralField {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().enumerate().map(|(i, &z)| f(i, z)).collect())
            .collect();
        Self { grid: self.grid, comps }
    }

    fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Config("fields live on different grids".into()));
        }
        if self.ncomp() != other.ncomp() {
            return Err(Error::SizeMismatch { expected: self.ncomp(), got: other.ncomp() });
        }
        Ok(())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Result<SpectralField> {
        self.check_compatible(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * s).collect())
            .collect();
        Ok(Self { grid: self.grid, comps })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(1.0, other)
    }

    /// `L²(torus)` norm, summed over components.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum();
        (self.grid.volume() * s).sqrt()
    }

    /// Largest violation of `f̂(-k) = conj(f̂(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.comps {
            for (i, z) in c.iter().enumerate() {
                worst = worst.max((c[self.grid.mirror(i)] - z.conj()).norm());
            }
        }
        worst
    }

    /// Zeroes Nyquist-plane pairs that no longer satisfy Hermitian symmetry.
    fn repair_nyquist(&mut self) {
        let grid = self.grid;
        for c in &mut self.comps {
            let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            for i in 0..c.len() {
                if grid.on_nyquist_plane(i) {
                    let m = grid.mirror(i);
                    if (c[m] - c[i].conj()).norm() > 1e-13 * scale {
                        c[i] = ZERO;
                        c[m] = ZERO;
                    }
                }
            }
        }
    }
}

/// FFT plans and frequency tables for one grid.
#[derive(Clone)]
pub struct Fourier {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    xi: Vec<[f64; 3]>,
    norm2: Vec<f64>,
    retained: Vec<bool>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let xi: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.xi(i)).collect();
        let norm2 = xi.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
        let cut = grid.dealias_cutoff();
        let retained = (0..grid.len())
            .map(|i| grid.wavenumbers(i)[..grid.d].iter().all(|k| k.abs() <= cut))
            .collect();
        Self { grid, forward, inverse, xi, norm2, retained }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn xi(&self, flat: usize) -> &[f64; 3] {
        &self.xi[flat]
    }

    pub fn xi_norm2(&self, flat: usize) -> f64 {
        self.norm2[flat]
    }

    pub fn norm2_table(&self) -> &[f64] {
        &self.norm2
    }

    fn transform_in_place(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let d = self.grid.d;
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        // Last axis is contiguous.
        for row in data.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
        let mut line = vec![ZERO; n];
        for axis in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[start + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[start + k * stride] = *v;
                    }
                }
            }
        }
    }

    /// Forward transform of real samples, one slice per component.
    pub fn forward(&self, physical: &[Vec<f64>]) -> Result<SpectralField> {
        let inv_n = 1.0 / self.grid.len() as f64;
        let mut comps = Vec::with_capacity(physical.len());
        for samples in physical {
            if samples.len() != self.grid.len() {
                return Err(Error::SizeMismatch { expected: self.grid.len(), got: samples.len() });
            }
            let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x * inv_n, 0.0)).collect();
            self.transform_in_place(&mut data, &self.forward);
            comps.push(data);
        }
        Ok(SpectralField { grid: self.grid, comps })
    }

    /// Inverse transform; returns the real part of each component.
    pub fn inverse(&self, field: &SpectralField) -> Result<Vec<Vec<f64>>> {
        if field.grid != self.grid {
            return Err(Error::Config("field grid differs from transform grid".into()));
        }
        Ok(field
            .comps
            .iter()
            .map(|c| {
                let mut data = c.clone();
                self.transform_in_place(&mut data, &self.inverse);
                data.into_iter().map(|z| z.re).collect()
            })
            .collect())
    }

    pub fn inverse_scalar(&self, field: &SpectralField) -> Result<Vec<f64>> {
        Ok(self.inverse(field)?.swap_remove(0))
    }

    /// Samples a physical-space function into a scalar field.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> SpectralField {
        let samples: Vec<f64> = (0..self.grid.len()).map(|i| f(self.grid.position(i))).collect();
        self.forward(&[samples]).expect("sizes match by construction")
    }

    /// Multiplies every component pointwise by `m(ξ)`.
    ///
    /// `m` returns `None` where it is undefined; that is reported as
    /// [`Error::SingularMultiplier`]. Nyquist-plane pairs whose Hermitian pairing
    /// the multiplier breaks are set to zero.
    pub fn apply_multiplier(
        &self,
        f: &SpectralField,
        m: impl Fn(&[f64; 3]) -> Option<Complex64>,
    ) -> Result<SpectralField> {
        let mut symbol = Vec::with_capacity(self.grid.len());
        for (i, xi) in self.xi.iter().enumerate() {
            match m(xi) {
                Some(v) if v.re.is_finite() && v.im.is_finite() => symbol.push(v),
                _ => return Err(Error::SingularMultiplier(self.grid.xi(i)[..self.grid.d].to_vec())),
            }
        }
        let mut out = f.map(|i, z| z * symbol[i]);
        out.repair_nyquist();
        Ok(out)
    }

    /// Real radial multiplier `m(|ξ|²)`; always defined, keeps Hermitian symmetry.
    pub fn apply_radial(&self, f: &SpectralField, m: impl Fn(f64) -> f64) -> SpectralField {
        let symbol: Vec<f64> = self.norm2.iter().map(|&x| m(x)).collect();
        f.map(|i, z| z * symbol[i])
    }

    /// Partial derivative `∂_axis` of every component.
    pub fn derivative(&self, f: &SpectralField, axis: usize) -> SpectralField {
        let mut out = f.map(|i, z| z * Complex64::new(0.0, self.xi[i][axis]));
        out.repair_nyquist();
        out
    }

    pub fn gradient(&self, scalar: &SpectralField) -> SpectralField {
        let comps = (0..self.grid.d).map(|a| self.derivative(scalar, a).comps.swap_remove(0)).collect();
        SpectralField { grid: self.grid, comps }
    }

    pub fn divergence(&self, vector: &SpectralField) -> SpectralField {
        let mut acc = vec![ZERO; self.grid.len()];
        for a in 0..self.grid.d {
            for (i, (out, z)) in acc.iter_mut().zip(&vector.comps[a]).enumerate() {
                *out += z * Complex64::new(0.0, self.xi[i][a]);
            }
        }
        let mut out = SpectralField { grid: self.grid, comps: vec![acc] };
        out.repair_nyquist();
        out
    }

    pub fn laplacian(&self, f: &SpectralField) -> SpectralField {
        self.apply_radial(f, |x| -x)
    }

    /// `α²(φ_α * q − q)`, symbol `−|ξ|² / (1 + |ξ|²/α²)`.
    pub fn capillary_op(&self, q: &SpectralField, alpha: f64) -> SpectralField {
        let a2 = alpha * alpha;
        self.apply_radial(q, |x| -x / (1.0 + x / a2))
    }

    /// Convolution with `φ_α`, symbol `1 / (1 + |ξ|²/α²)`.
    pub fn mollifier_phi_alpha(&self, q: &SpectralField, alpha: f64) -> SpectralField {
        let a2 = alpha * alpha;
        self.apply_radial(q, |x| 1.0 / (1.0 + x / a2))
    }

    /// Friedrichs truncation to `2^{-n} ≤ |ξ| ≤ (8/3) 2^n`.
    pub fn friedrichs_project(&self, f: &SpectralField, n_trunc: u32) -> SpectralField {
        let lo = 2f64.powi(-(n_trunc as i32));
        let hi = 8.0 / 3.0 * 2f64.powi(n_trunc as i32);
        let (lo2, hi2) = (lo * lo, hi * hi);
        f.map(|i, z| {
            let x = self.norm2[i];
            if x >= lo2 && x <= hi2 {
                z
            } else {
                ZERO
            }
        })
    }

    /// Two-thirds rule: zero every mode with some `|k_i| > n/3`.
    pub fn dealias(&self, f: &SpectralField) -> SpectralField {
        f.map(|i, z| if self.retained[i] { z } else { ZERO })
    }

    pub fn dealias_in_place(&self, f: &mut SpectralField) {
        for c in &mut f.comps {
            for (z, &keep) in c.iter_mut().zip(&self.retained) {
                if !keep {
                    *z = ZERO;
                }
            }
        }
    }

    pub fn is_retained(&self, flat: usize) -> bool {
        self.retained[flat]
    }

    /// Helmholtz decomposition `v = Λ⁻¹ div u`, `w_ab = Λ⁻¹(∂_a u_b − ∂_b u_a)`.
    pub fn helmholtz_split(&self, u: &SpectralField) -> Result<Helmholtz> {
        let d = self.grid.d;
        if u.ncomp() != d {
            return Err(Error::SizeMismatch { expected: d, got: u.ncomp() });
        }
        let inv_norm = |i: usize| {
            let n = self.norm2[i].sqrt();
            if n > 0.0 {
                1.0 / n
            } else {
                0.0
            }
        };
        let mut v = vec![ZERO; self.grid.len()];
        for (i, out) in v.iter_mut().enumerate() {
            let mut s = ZERO;
            for a in 0..d {
                s += Complex64::new(0.0, self.xi[i][a]) * u.comps[a][i];
            }
            *out = s * inv_norm(i);
        }
        let mut w = Vec::new();
        for a in 0..d {
            for b in (a + 1)..d {
                let comp: Vec<Complex64> = (0..self.grid.len())
                    .map(|i| {
                        let ia = Complex64::new(0.0, self.xi[i][a]);
                        let ib = Complex64::new(0.0, self.xi[i][b]);
                        (ia * u.comps[b][i] - ib * u.comps[a][i]) * inv_norm(i)
                    })
                    .collect();
                w.push(comp);
            }
        }
        let mut v = SpectralField { grid: self.grid, comps: vec![v] };
        v.repair_nyquist();
        let mut w = SpectralField { grid: self.grid, comps: w };
        w.repair_nyquist();
        Ok(Helmholtz { v, w, mean: u.comps.iter().map(|c| c[0]).collect() })
    }

    /// Inverse of [`Fourier::helmholtz_split`]: `u = −Λ⁻¹∇v + Λ⁻¹ div w + mean`.
    pub fn helmholtz_recompose(&self, parts: &Helmholtz) -> SpectralField {
        let d = self.grid.d;
        let pair_index = |a: usize, b: usize| -> (usize, f64) {
            // w is stored for a < b; w_ba = −w_ab.
            let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
            let idx = lo * (2 * d - lo - 1) / 2 + (hi - lo - 1);
            (idx, sign)
        };
        let mut comps = vec![vec![ZERO; self.grid.len()]; d];
        for i in 1..self.grid.len() {
            let inv = 1.0 / self.norm2[i].sqrt();
            for a in 0..d {
                let mut s = -Complex64::new(0.0, self.xi[i][a]) * parts.v.comps[0][i];
                for b in 0..d {
                    if a != b {
                        let (idx, sign) = pair_index(a, b);
                        s += Complex64::new(0.0, self.xi[i][b]) * parts.w.comps[idx][i] * sign;
                    }
                }
                comps[a][i] = s * inv;
            }
        }
        for (c, m) in comps.iter_mut().zip(&parts.mean) {
            c[0] = *m;
        }
        SpectralField { grid: self.grid, comps }
    }
}

/// Output of the Helmholtz decomposition. `w` holds the `a < b` entries of the
/// antisymmetric matrix in lexicographic order (none in 1-D, one in 2-D, three in 3-D).
#[derive(Debug, Clone)]
pub struct Helmholtz {
    pub v: SpectralField,
    pub w: SpectralField,
    pub mean: Vec<Complex64>,
}

/// Header of a field snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub grid: GridSpec,
    pub kind: String,
    pub t: f64,
}

/// Writes `KOPLAB1 d n L kind t\n` followed by little-endian `f64` physical samples,
/// component after component.
pub fn write_snapshot<W: Write>(
    mut out: W,
    fourier: &Fourier,
    field: &SpectralField,
    kind: &str,
    t: f64,
) -> Result<()> {
    if kind.is_empty() || kind.contains(char::is_whitespace) {
        return Err(Error::Snapshot(format!("kind `{kind}` must be a single token")));
    }
    let g = field.grid();
    writeln!(out, "KOPLAB1 {} {} {} {} {}", g.d, g.n, g.length, kind, t)?;
    for comp in fourier.inverse(field)? {
        for x in comp {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]; returns the header and physical samples.
pub fn read_snapshot<R: BufRead>(mut input: R) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != "KOPLAB1" {
        return Err(Error::Snapshot(format!("bad header `{}`", line.trim_end())));
    }
    let parse = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Snapshot(format!("bad number `{s}`"))) };
    let d: usize = tokens[1].parse().map_err(|_| Error::Snapshot("bad d".into()))?;
    let n: usize = tokens[2].parse().map_err(|_| Error::Snapshot("bad n".into()))?;
    let grid = GridSpec::new(d, n, parse(tokens[3])?)?;
    let header = SnapshotHeader { grid, kind: tokens[4].to_string(), t: parse(tokens[5])? };
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let per_comp = grid.len() * 8;
    if bytes.is_empty() || bytes.len() % per_comp != 0 {
        return Err(Error::Snapshot(format!("payload of {} bytes is not a whole number of components", bytes.len())));
    }
    let comps = bytes
        .chunks_exact(per_comp)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    Ok((header, comps))
}
