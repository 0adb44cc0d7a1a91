//! Configuration, α-sweeps, validation reports and rate fits.

use std::io::Write;
use std::path::PathBuf;

use ini::Ini;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bessel;
use crate::error::{Error, Result};
use crate::linear::{self, Capillarity, Regime};
use crate::lp::{self, BlockHistory, DyadicPartition, FieldSelector, NormKind, TimeNorm, Trajectory};
use crate::model::{make_initial_data, CouplingAlpha, FluidParams, State};
use crate::solver::{integrate, ModelKind, StepConfig};
use crate::spectral::{Fourier, GridSpec};

/// Process exit status of the command-line runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass = 0,
    ToleranceFailure = 2,
    SolverFailure = 3,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::ToleranceFailure
        }
    }

    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Everything a run needs, read from an INI-style file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: FluidParams,
    pub grid: GridSpec,
    pub step: StepConfig,
    pub alphas: Vec<f64>,
    pub h: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub band: (i32, i32),
    pub output_dir: PathBuf,
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("fluid", &["mu", "lambda", "kappa", "p", "gamma"]),
    ("grid", &["d", "n", "L"]),
    ("time", &["dt", "T", "record_every", "n_trunc"]),
    ("sweep", &["alphas", "h", "seed", "amplitude", "band_lo", "band_hi"]),
    ("output", &["dir"]),
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_ini_str("").expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text)
    }

    /// Parses `[fluid]`, `[grid]`, `[time]`, `[sweep]` and `[output]` sections;
    /// missing keys take the defaults, unknown ones are rejected.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (section, props) in ini.iter() {
            let Some(name) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key `{k}` outside any section")));
                }
                continue;
            };
            let Some((_, keys)) = KNOWN_KEYS.iter().find(|(s, _)| *s == name) else {
                return Err(Error::Config(format!("unknown section [{name}]")));
            };
            for (k, _) in props.iter() {
                if !keys.contains(&k) {
                    return Err(Error::Config(format!("unknown key `{k}` in [{name}]")));
                }
            }
        }
        let raw = |section: &str, key: &str| ini.section(Some(section)).and_then(|p| p.get(key)).map(str::trim);
        fn parse<T: std::str::FromStr>(v: Option<&str>, default: T, what: &str) -> Result<T> {
            match v {
                None => Ok(default),
                Some(s) => s.parse().map_err(|_| Error::Config(format!("cannot parse {what} = `{s}`"))),
            }
        }
        let params = FluidParams::new(
            parse(raw("fluid", "mu"), 1.0, "mu")?,
            parse(raw("fluid", "lambda"), 0.0, "lambda")?,
            parse(raw("fluid", "kappa"), 1.0, "kappa")?,
            parse(raw("fluid", "p"), 1.0, "p")?,
            parse(raw("fluid", "gamma"), FluidParams::DEFAULT_GAMMA, "gamma")?,
        )?;
        let grid = GridSpec::new(
            parse(raw("grid", "d"), 1, "d")?,
            parse(raw("grid", "n"), 256, "n")?,
            parse(raw("grid", "L"), GridSpec::DEFAULT_LENGTH, "L")?,
        )?;
        let n_trunc = match raw("time", "n_trunc") {
            None | Some("off") => None,
            Some(s) => Some(s.parse().map_err(|_| Error::Config(format!("cannot parse n_trunc = `{s}`")))?),
        };
        let step = StepConfig {
            dt: parse(raw("time", "dt"), 0.01, "dt")?,
            t_end: parse(raw("time", "T"), 5.0, "T")?,
            n_trunc,
            record_every: parse(raw("time", "record_every"), 1, "record_every")?,
        };
        step.validate()?;
        let alphas = match raw("sweep", "alphas") {
            None => vec![4.0, 8.0, 16.0, 32.0, 64.0],
            Some(s) => parse_list(s)?,
        };
        let cfg = Self {
            params,
            grid,
            step,
            alphas,
            h: parse(raw("sweep", "h"), 0.5, "h")?,
            seed: parse(raw("sweep", "seed"), 1, "seed")?,
            amplitude: parse(raw("sweep", "amplitude"), 1e-3, "amplitude")?,
            band: (parse(raw("sweep", "band_lo"), -3, "band_lo")?, parse(raw("sweep", "band_hi"), 0, "band_hi")?),
            output_dir: PathBuf::from(raw("output", "dir").unwrap_or("koplab-out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("alphas must be positive".into()));
        }
        if self.alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("alphas must be strictly increasing".into()));
        }
        let h_max_open = self.grid.d == 2;
        let h_ok = self.h > 0.0 && (self.h < 1.0 || (self.h == 1.0 && !h_max_open && self.grid.d >= 3));
        if !h_ok {
            return Err(Error::Config(format!(
                "h = {} must lie in (0, 1) (h = 1 is allowed only for d >= 3)",
                self.h
            )));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::Config("amplitude must be positive".into()));
        }
        Ok(())
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Result<Self> {
        self.alphas = alphas;
        self.validate()?;
        Ok(self)
    }
}

/// Comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in list"))))
        .collect()
}

/// Thread pool capped by `KOPLAB_WORKERS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("KOPLAB_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("KOPLAB_WORKERS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

/// Least-squares fit of `ln v = slope · ln α + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval on the slope.
    pub ci95: f64,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", pairs.len())));
    }
    if let Some(&(a, v)) = pairs.iter().find(|(a, v)| !(*a > 0.0 && *v > 0.0)) {
        return Err(Error::DomainError(format!("log-log fit needs positive data, got ({a}, {v})")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>().max(1.0) {
        return Err(Error::DegenerateFit("all alphas are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::DegenerateFit(e.to_string()))?.inverse_cdf(0.975);
    Ok(RateFit { slope, intercept, ci95: t * se })
}

/// Norms of one α-run of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    /// `ν‖c_α − ρ_α‖_{L¹Ḃ^{d/2−1}} + ν²‖c_α − ρ_α‖_{L¹Ḃ^{d/2}}`.
    pub order_l1: f64,
    /// `sup_t ‖c_α − ρ_α‖_{Ḃ^{d/2−1}}`.
    pub order_sup: f64,
    /// `F_α^{d/2−h}` norm of the difference with the Korteweg solution.
    pub f_diff_h: f64,
    /// `F_α^{d/2}` norm of the same difference.
    pub f_diff_0: f64,
    /// `E_α^{d/2}` norm of the order-parameter solution.
    pub e_norm: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub h: f64,
    pub d: usize,
    pub rows: Vec<SweepRow>,
    pub order_fit: Option<RateFit>,
    pub f_fit: Option<RateFit>,
    /// `F_α^{d/2}` difference norm strictly decreasing along the α list.
    pub f0_decreasing: bool,
    pub sup_decreasing: bool,
}

impl RateReport {
    pub fn solver_failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    /// Order-parameter slope in `−2 ± 0.3`, difference slope at most `−h + slack`,
    /// and the monotonicity checks.
    pub fn passes(&self, slack: f64) -> bool {
        let order_ok = self.order_fit.is_some_and(|f| (f.slope + 2.0).abs() <= 0.3);
        let f_ok = self.f_fit.is_some_and(|f| f.slope <= -self.h + slack);
        !self.solver_failed() && order_ok && f_ok && self.f0_decreasing && self.sup_decreasing
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Per-frame `(c_α − ρ_α)` as a scalar trajectory stored in `q`.
fn order_gap(traj: &Trajectory) -> Result<Trajectory> {
    traj.map_states(|s| {
        let c = s.c.as_ref().ok_or(Error::MissingComponent("c"))?;
        Ok(State { q: c.sub(&s.q)?, u: s.u.scale(0.0), c: None })
    })
}

/// `(q_α − q, u_α − u, c_α − ρ)` against the Korteweg reference.
fn difference_with_reference(op: &Trajectory, reference: &Trajectory) -> Result<Trajectory> {
    if op.times() != reference.times() {
        return Err(Error::Config("runs were recorded at different times".into()));
    }
    let states = op
        .states()
        .iter()
        .zip(reference.states())
        .map(|(a, k)| {
            let c = a.c.as_ref().ok_or(Error::MissingComponent("c"))?;
            Ok(State { q: a.q.sub(&k.q)?, u: a.u.sub(&k.u)?, c: Some(c.sub(&k.q)?) })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(op.times().to_vec(), states)
}

fn sweep_row(
    partition: &DyadicPartition,
    cfg: &ExperimentConfig,
    alpha: f64,
    op: &Trajectory,
    reference: &Trajectory,
) -> Result<SweepRow> {
    let p = &cfg.params;
    let half_d = cfg.grid.d as f64 / 2.0;
    let gap = BlockHistory::new(partition, &order_gap(op)?, FieldSelector::Q)?;
    let order_l1 = p.nu * gap.plain(half_d - 1.0, TimeNorm::Integral, NormKind::Besov)
        + p.nu * p.nu * gap.plain(half_d, TimeNorm::Integral, NormKind::Besov);
    let order_sup = gap.plain(half_d - 1.0, TimeNorm::Sup, NormKind::Besov);
    let diff = difference_with_reference(op, reference)?;
    Ok(SweepRow {
        alpha,
        order_l1,
        order_sup,
        f_diff_h: lp::f_norm(partition, &diff, half_d - cfg.h, alpha, p)?,
        f_diff_0: lp::f_norm(partition, &diff, half_d, alpha, p)?,
        e_norm: lp::e_norm(partition, op, half_d, alpha, p)?,
        error: None,
    })
}

/// Solves the Korteweg reference once and the order-parameter system for each
/// α from identical data, then fits the decay rates.
pub fn run_convergence_sweep(cfg: &ExperimentConfig) -> Result<RateReport> {
    let fourier = Fourier::new(cfg.grid);
    let partition = DyadicPartition::new(&fourier);
    let state0 = make_initial_data(&fourier, cfg.amplitude, cfg.band, cfg.seed)?;
    let pool = worker_pool()?;
    let mut runs: Vec<Option<(f64, Result<Trajectory>)>> = Vec::new();
    let models: Vec<Option<f64>> = std::iter::once(None).chain(cfg.alphas.iter().map(|&a| Some(a))).collect();
    pool.install(|| {
        runs = models
            .par_iter()
            .map(|alpha| {
                let model = match alpha {
                    None => ModelKind::K,
                    Some(a) => ModelKind::Op(CouplingAlpha::new(*a).ok()?),
                };
                Some((alpha.unwrap_or(f64::NAN), integrate(&fourier, &state0, model, &cfg.params, &cfg.step)))
            })
            .collect();
    });
    let mut runs = runs.into_iter();
    let reference = match runs.next().flatten() {
        Some((_, r)) => r?,
        None => return Err(Error::Config("reference run missing".into())),
    };
    let rows: Vec<SweepRow> = runs
        .zip(&cfg.alphas)
        .map(|(run, &alpha)| {
            let outcome = match run {
                Some((_, Ok(traj))) => sweep_row(&partition, cfg, alpha, &traj, &reference),
                Some((_, Err(e))) => Err(e),
                None => Err(Error::ParameterOutOfRange(format!("alpha > 0 (alpha = {alpha})"))),
            };
            outcome.unwrap_or_else(|e| SweepRow {
                alpha,
                order_l1: f64::NAN,
                order_sup: f64::NAN,
                f_diff_h: f64::NAN,
                f_diff_0: f64::NAN,
                e_norm: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect();
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let order_fit = fit_rate(&ok.iter().map(|r| (r.alpha, r.order_l1)).collect::<Vec<_>>()).ok();
    let f_fit = fit_rate(&ok.iter().map(|r| (r.alpha, r.f_diff_h)).collect::<Vec<_>>()).ok();
    Ok(RateReport {
        h: cfg.h,
        d: cfg.grid.d,
        f0_decreasing: strictly_decreasing(&ok.iter().map(|r| r.f_diff_0).collect::<Vec<_>>()),
        sup_decreasing: strictly_decreasing(&ok.iter().map(|r| r.order_sup).collect::<Vec<_>>()),
        rows,
        order_fit,
        f_fit,
    })
}

pub fn write_rate_csv<W: Write>(mut out: W, report: &RateReport) -> Result<()> {
    writeln!(out, "# schema: convergence_sweep,1")?;
    if report.d < 2 {
        writeln!(out, "# note: d = {} is a model extension of the d >= 2 convergence statement", report.d)?;
    }
    writeln!(out, "alpha,order_l1,order_sup,f_diff_h,f_diff_0,e_norm,h,status")?;
    for r in &report.rows {
        let status = r.error.as_deref().map_or_else(|| "ok".to_string(), |e| format!("failed: {}", e.replace(',', ";")));
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{},{status}",
            r.alpha, r.order_l1, r.order_sup, r.f_diff_h, r.f_diff_0, r.e_norm, report.h
        )?;
    }
    for (name, fit) in [("order_l1", report.order_fit), ("f_diff_h", report.f_fit)] {
        match fit {
            Some(f) => writeln!(out, "# fit {name}: slope {:.4} +- {:.4}, intercept {:.4}", f.slope, f.ci95, f.intercept)?,
            None => writeln!(out, "# fit {name}: unavailable")?,
        }
    }
    Ok(())
}

/// Summary of the linear-analysis checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearValidation {
    pub max_oracle_error: f64,
    pub max_trace_det_residual: f64,
    pub max_composition_error: f64,
    pub envelope: Vec<(f64, linear::EnvelopeRow)>,
    pub envelope_ok: bool,
}

impl LinearValidation {
    pub fn passes(&self) -> bool {
        self.max_oracle_error <= 1e-8
            && self.max_trace_det_residual <= 1e-12
            && self.max_composition_error <= 1e-10
            && self.envelope_ok
    }
}

/// Relative residuals of the trace and determinant identities at one mode.
pub fn trace_det_residual(x: f64, params: &FluidParams, alpha: f64) -> Result<f64> {
    let md = linear::modes(x, params, alpha)?;
    let trace = -params.nu * x;
    let det = x * Capillarity::Nonlocal { alpha }.stiffness(x, params);
    let tr = ((md.lambda_plus + md.lambda_minus) - Complex64::new(trace, 0.0)).norm() / trace.abs();
    let dt = ((md.lambda_plus * md.lambda_minus) - Complex64::new(det, 0.0)).norm() / det.abs();
    Ok(tr.max(dt))
}

/// Largest entrywise gap between the closed-form propagator and the Taylor
/// matrix exponential, relative to the larger of 1 and the entries.
pub fn propagator_error(x: f64, t: f64, params: &FluidParams, cap: Capillarity) -> Result<f64> {
    let exact = linear::propagator(x, t, params, cap)?.dense();
    let a = linear::mode_matrix(x, params, cap);
    let oracle = linear::expm2([[a[0][0] * t, a[0][1] * t], [a[1][0] * t, a[1][1] * t]]);
    let mut err: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            err = err.max((exact[i][j] - oracle[i][j]).abs() / oracle[i][j].abs().max(1.0));
        }
    }
    Ok(err)
}

/// Runs the per-mode checks for each α of the configuration on random modes,
/// modes near `x_α`, and a log-spaced envelope grid.
pub fn run_linear_validation(cfg: &ExperimentConfig) -> Result<LinearValidation> {
    let p = &cfg.params;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut oracle, mut trdet, mut comp) = (0.0f64, 0.0f64, 0.0f64);
    let mut envelope = Vec::new();
    let mut envelope_ok = true;
    for &alpha in &cfg.alphas {
        let cap = Capillarity::Nonlocal { alpha };
        let th = linear::threshold_y(p, alpha)?;
        for k in 0..200 {
            let x = if k % 4 == 0 {
                th.x_alpha * (1.0 + rng.random_range(-1e-4..1e-4))
            } else {
                10f64.powf(rng.random_range(-3.0..3.0)) * th.x_alpha
            };
            let t = 10f64.powf(rng.random_range(-3.0..0.5));
            oracle = oracle.max(propagator_error(x, t, p, cap)?);
            trdet = trdet.max(trace_det_residual(x, p, alpha)?);
            let t2 = 10f64.powf(rng.random_range(-3.0..0.0));
            let q0 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let v0 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r = x.sqrt();
            let (qa, va) = linear::semigroup_apply(q0, v0, r, t + t2, p, alpha)?;
            let (q1, v1) = linear::semigroup_apply(q0, v0, r, t, p, alpha)?;
            let (qb, vb) = linear::semigroup_apply(q1, v1, r, t2, p, alpha)?;
            let scale = q0.norm().max(v0.norm());
            comp = comp.max(((qa - qb).norm().max((va - vb).norm())) / scale);
        }
        let xi_grid = envelope_grid(&th);
        for row in linear::envelope_report(p, alpha, &xi_grid, 1.0)? {
            envelope_ok &= row.holds(1e-6);
            envelope.push((alpha, row));
        }
    }
    Ok(LinearValidation {
        max_oracle_error: oracle,
        max_trace_det_residual: trdet,
        max_composition_error: comp,
        envelope,
        envelope_ok,
    })
}

/// Log-spaced `|ξ|²` from `x_α/100` to `100 y_α`, plus `x_α` itself.
pub fn envelope_grid(th: &linear::Thresholds) -> Vec<f64> {
    let lo = (th.x_alpha / 100.0).ln();
    let hi = (th.y_alpha * 100.0).ln();
    let mut grid: Vec<f64> = (0..=60).map(|k| (lo + (hi - lo) * k as f64 / 60.0).exp()).collect();
    grid.push(th.x_alpha);
    grid.sort_by(f64::total_cmp);
    grid
}

pub fn write_linear_csv<W: Write>(mut out: W, v: &LinearValidation) -> Result<()> {
    writeln!(out, "# schema: linear_validation,1")?;
    writeln!(out, "# max_oracle_error {:e}", v.max_oracle_error)?;
    writeln!(out, "# max_trace_det_residual {:e}", v.max_trace_det_residual)?;
    writeln!(out, "# max_composition_error {:e}", v.max_composition_error)?;
    writeln!(out, "alpha,xi_norm2,regime,s_or_r,re_lambda_plus,re_lambda_minus,im_lambda_plus,envelope_rate_measured,envelope_rate_bound,holds")?;
    for (alpha, r) in &v.envelope {
        writeln!(
            out,
            "{alpha},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.xi_norm2,
            r.regime.label(),
            r.s_or_r,
            r.re_plus,
            r.re_minus,
            r.im_plus,
            r.measured,
            r.bound,
            r.holds(1e-6)
        )?;
    }
    Ok(())
}

/// One α of the threshold report.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub alpha: f64,
    pub thresholds: linear::Thresholds,
    pub y_over_alpha2: f64,
    pub within_bounds: bool,
    /// `x_α` divided by its large-α equivalent.
    pub x_asymptote_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub rows: Vec<ThresholdRow>,
    /// First scanned `α = 2^k` from which the `y_α` bracket holds.
    pub alpha_onset: Option<f64>,
}

/// Large-α equivalent of `x_α`: `4p/(ν²−4κ)`, `α√(p/κ)` or `(4κ/ν²−1)α²` as
/// `M` is above, at or below 1.
pub fn x_alpha_asymptote(params: &FluidParams, alpha: f64) -> f64 {
    let nu2 = params.nu * params.nu;
    if params.m > 1.0 {
        4.0 * params.p / (nu2 - 4.0 * params.kappa)
    } else if params.m == 1.0 {
        alpha * (params.p / params.kappa).sqrt()
    } else {
        (4.0 * params.kappa / nu2 - 1.0) * alpha * alpha
    }
}

pub fn run_threshold_report(params: &FluidParams, alphas: &[f64]) -> Result<ThresholdReport> {
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let th = linear::threshold_y(params, alpha)?;
            Ok(ThresholdRow {
                alpha,
                thresholds: th,
                y_over_alpha2: th.y_alpha / (alpha * alpha),
                within_bounds: linear::y_within_bounds(params, alpha)?,
                x_asymptote_ratio: th.x_alpha / x_alpha_asymptote(params, alpha),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ThresholdReport { rows, alpha_onset: linear::alpha_onset(params, 20)? })
}

pub fn write_threshold_csv<W: Write>(mut out: W, report: &ThresholdReport) -> Result<()> {
    writeln!(out, "# schema: thresholds,1")?;
    match report.alpha_onset {
        Some(a) => writeln!(out, "# alpha_onset {a}")?,
        None => writeln!(out, "# alpha_onset none")?,
    }
    writeln!(out, "alpha,x_alpha,y_alpha,m,M,y_over_alpha2,within_bounds,x_asymptote_ratio")?;
    for r in &report.rows {
        let t = &r.thresholds;
        writeln!(
            out,
            "{},{:e},{:e},{},{},{},{},{}",
            r.alpha, t.x_alpha, t.y_alpha, t.m, t.big_m, r.y_over_alpha2, r.within_bounds, r.x_asymptote_ratio
        )?;
    }
    Ok(())
}

/// One kernel check: measured value against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub d: usize,
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
}

impl KernelRow {
    pub fn passes(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Closed-form `φ` for `d = 1, 3`.
fn kernel_closed_form(d: usize, r: f64) -> Option<f64> {
    match d {
        1 => Some(0.5 * (-r).exp()),
        3 => Some((-r).exp() / (4.0 * std::f64::consts::PI * r)),
        _ => None,
    }
}

/// Largest relative shortfall of `e^x x^ν K_ν(x) ≥ Γ(ν) 2^{ν−1}` over
/// `count` log-spaced points of `(0, 50]` (zero when the bound holds).
pub fn bessel_lower_bound_violation(nu: f64, count: usize) -> Result<f64> {
    let bound = statrs::function::gamma::gamma(nu) * 2f64.powf(nu - 1.0);
    let (lo, hi) = (1e-6f64.ln(), 50f64.ln());
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let x = (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp();
        let v = x.exp() * x.powf(nu) * bessel::bessel_k(nu, x)?;
        worst = worst.max((bound - v) / bound);
    }
    Ok(worst)
}

/// Largest relative residual of `K_{ν−1} − K_{ν+1} = −(2ν/x) K_ν` and
/// `K'_ν = −(K_{ν−1} + K_{ν+1})/2`, the derivative taken from its own integral.
pub fn bessel_identity_residual(nu: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in &[0.3, 0.5, 1.0, 2.0, 5.0, 12.0] {
        let km = bessel::bessel_k(nu - 1.0, x)?;
        let k0 = bessel::bessel_k(nu, x)?;
        let kp = bessel::bessel_k(nu + 1.0, x)?;
        worst = worst.max((km - kp + 2.0 * nu / x * k0).abs() / kp.abs());
        let deriv = bessel::bessel_k_prime(nu, x)?;
        let expect = -0.5 * (km + kp);
        worst = worst.max((deriv - expect).abs() / expect.abs());
    }
    Ok(worst)
}

pub fn run_kernel_validation(dims: &[usize]) -> Result<Vec<KernelRow>> {
    let mut rows = Vec::new();
    let xi: Vec<f64> = (0..=32).map(|k| 0.25 * k as f64).collect();
    for &d in dims {
        let tol = if d == 1 { 1e-8 } else { 1e-6 };
        rows.push(KernelRow { d, check: "hankel_pair".into(), value: bessel::hankel_check(d, &xi)?, tolerance: tol });
        if kernel_closed_form(d, 1.0).is_some() {
            let mut worst: f64 = 0.0;
            for k in 1..=400 {
                let r = 0.05 * k as f64;
                let exact = kernel_closed_form(d, r).expect("closed form exists");
                worst = worst.max((bessel::kernel_phi(d, r)? - exact).abs() / exact);
            }
            let tol = if d == 1 { 1e-12 } else { 1e-10 };
            rows.push(KernelRow { d, check: "closed_form".into(), value: worst, tolerance: tol });
        }
    }
    for nu in [0.5, 1.0, 1.5] {
        // For ν = 1/2 the bound is an equality, checked to a few ulps.
        rows.push(KernelRow {
            d: 0,
            check: format!("lower_bound_nu_{nu}"),
            value: bessel_lower_bound_violation(nu, 1000)?,
            tolerance: 8.0 * f64::EPSILON,
        });
        rows.push(KernelRow {
            d: 0,
            check: format!("identities_nu_{nu}"),
            value: bessel_identity_residual(nu)?,
            tolerance: 1e-8,
        });
    }
    Ok(rows)
}

pub fn write_kernel_csv<W: Write>(mut out: W, rows: &[KernelRow]) -> Result<()> {
    writeln!(out, "# schema: kernel_validation,1")?;
    writeln!(out, "d,check,value,tolerance,pass")?;
    for r in rows {
        writeln!(out, "{},{},{:e},{:e},{}", r.d, r.check, r.value, r.tolerance, r.passes())?;
    }
    Ok(())
}

/// Norm rows of a single trajectory: per-frame Besov norms and the
/// trajectory `E` (and `F` when the order parameter is present) norms.
pub fn trajectory_norm_rows(
    fourier: &Fourier,
    traj: &Trajectory,
    params: &FluidParams,
    alpha: Option<f64>,
) -> Result<Vec<lp::NormRow>> {
    let partition = DyadicPartition::new(fourier);
    let half_d = fourier.grid().d as f64 / 2.0;
    let q = BlockHistory::new(&partition, traj, FieldSelector::Q)?;
    let mut rows = Vec::new();
    for (k, &t) in traj.times().iter().enumerate() {
        for s in [half_d - 1.0, half_d] {
            rows.push(lp::NormRow { t: Some(t), kind: "q_besov".into(), s, alpha: None, value: q.spatial(k, s, NormKind::Besov) });
        }
    }
    let a = alpha.unwrap_or(f64::INFINITY);
    rows.push(lp::NormRow { t: None, kind: "e_norm".into(), s: half_d, alpha, value: lp::e_norm(&partition, traj, half_d, a, params)? });
    if alpha.is_some() {
        rows.push(lp::NormRow { t: None, kind: "f_norm".into(), s: half_d, alpha, value: lp::f_norm(&partition, traj, half_d, a, params)? });
    }
    Ok(rows)
}

/// Regime label counts of an envelope table, for summaries.
pub fn regime_counts(rows: &[(f64, linear::EnvelopeRow)]) -> [usize; 3] {
    let mut c = [0; 3];
    for (_, r) in rows {
        c[match r.regime {
            Regime::Low => 0,
            Regime::Transition => 1,
            Regime::High => 2,
        }] += 1;
    }
    c
}
