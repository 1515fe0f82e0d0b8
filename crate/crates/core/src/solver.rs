//! Time integration of the mild-solution equation.
//!
//! The linear flow is applied exactly through the heat multiplier; only the
//! Duhamel contribution of the drift term is approximated. Two exponential
//! steppers are provided (second-order exponential time differencing and a
//! four-stage integrating-factor Runge-Kutta), plus a global Picard mode
//! that iterates the integral equation itself on a fixed time lattice and
//! reports its contraction behaviour.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::models::{nonlinear_term, Coupling, SystemSpec};
use crate::spectral::field::SpectralField;
use crate::spectral::grid::TorusGrid;
use crate::spectral::transform::SpectralTransformer;

/// Coefficient magnitude beyond which a run is declared to have overflowed.
pub const OVERFLOW_GUARD: f64 = 1e280;

/// Stepping schemes. `Picard` is not a one-step method; `run` dispatches it
/// to the global fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Etd2rk,
    Ifrk4,
    Picard,
}

/// Why a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    OverflowDetected,
    PicardDiverged,
}

/// Fixed-point parameters for the Picard mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Relative sup-norm change between successive iterates that counts as
    /// converged.
    pub tol: f64,
    /// Iteration cap; exceeding it reports divergence.
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

/// Time-stepping parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub picard: PicardConfig,
    /// Keep every `snapshot_every`-th state (plus the initial and final
    /// ones). Zero keeps only initial and final.
    #[serde(default)]
    pub snapshot_every: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CoreError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CoreError::InvalidConfig(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.picard.tol > 0.0) {
            return Err(CoreError::InvalidConfig("picard tolerance must be positive".into()));
        }
        if self.picard.max_iter == 0 {
            return Err(CoreError::InvalidConfig("picard iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// One stored state of a trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub field: SpectralField,
}

/// Result of a forward run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    /// Last time with a finite state.
    pub final_time: f64,
    /// Largest finite coefficient magnitude seen along the run.
    pub max_coeff: f64,
}

/// Result of the Picard mode: the fixed-point trajectory on its time lattice
/// plus convergence telemetry.
#[derive(Debug, Clone)]
pub struct PicardRun {
    pub snapshots: Vec<Snapshot>,
    pub iterations: usize,
    /// Successive-difference ratios, one per iteration after the first.
    pub contraction_ratios: Vec<f64>,
    pub status: RunStatus,
}

/// phi1(z) = (e^z - 1)/z with the removable singularity filled by series.
fn phi1(z: f64) -> f64 {
    if z.abs() < 0.25 {
        // sum z^j / (j+1)!
        let mut term = 1.0;
        let mut acc = 1.0;
        for j in 1..=14 {
            term *= z / (j as f64 + 1.0);
            acc += term;
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

/// phi2(z) = (e^z - 1 - z)/z^2, same treatment.
fn phi2(z: f64) -> f64 {
    if z.abs() < 0.25 {
        // sum z^j / (j+2)!
        let mut term = 0.5;
        let mut acc = 0.5;
        for j in 1..=14 {
            term *= z / (j as f64 + 2.0);
            acc += term;
        }
        acc
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

/// Per-mode propagator and phi-weight tables for one step size.
struct StepTables {
    dt: f64,
    full: Vec<f64>,
    half: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl StepTables {
    fn new(grid: &TorusGrid, dt: f64) -> Self {
        let len = grid.len();
        let mut full = Vec::with_capacity(len);
        let mut half = Vec::with_capacity(len);
        let mut p1 = Vec::with_capacity(len);
        let mut p2 = Vec::with_capacity(len);
        for i in 0..len {
            let xi = grid.xi(i);
            let w2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let z = -dt * w2;
            full.push(z.exp());
            half.push((z / 2.0).exp());
            p1.push(phi1(z));
            p2.push(phi2(z));
        }
        Self { dt, full, half, p1, p2 }
    }
}

fn apply_table(field: &mut SpectralField, table: &[f64]) {
    for j in 0..field.species() {
        for (v, &w) in field.coeffs_mut(j).iter_mut().zip(table) {
            *v *= w;
        }
    }
}

/// dst += scale * (table o src), per mode.
fn add_weighted(dst: &mut SpectralField, table: &[f64], src: &SpectralField, scale: f64) {
    for j in 0..dst.species() {
        let s = src.coeffs(j);
        for (i, v) in dst.coeffs_mut(j).iter_mut().enumerate() {
            *v += scale * table[i] * s[i];
        }
    }
}

fn etd2rk_step(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    u: &SpectralField,
    t: &StepTables,
) -> Result<SpectralField> {
    let n1 = nonlinear_term(spec, transformer, u)?;
    let mut a = u.clone();
    apply_table(&mut a, &t.full);
    add_weighted(&mut a, &t.p1, &n1, t.dt);
    let n2 = nonlinear_term(spec, transformer, &a)?;
    let mut out = a;
    add_weighted(&mut out, &t.p2, &n2, t.dt);
    add_weighted(&mut out, &t.p2, &n1, -t.dt);
    Ok(out)
}

fn ifrk4_step(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    u: &SpectralField,
    t: &StepTables,
) -> Result<SpectralField> {
    let h = t.dt;
    let k1 = nonlinear_term(spec, transformer, u)?;

    let mut s1 = u.clone();
    s1.add_scaled(&k1, Complex64::new(h / 2.0, 0.0))?;
    apply_table(&mut s1, &t.half);
    let k2 = nonlinear_term(spec, transformer, &s1)?;

    let mut s2 = u.clone();
    apply_table(&mut s2, &t.half);
    s2.add_scaled(&k2, Complex64::new(h / 2.0, 0.0))?;
    let k3 = nonlinear_term(spec, transformer, &s2)?;

    let mut s3 = u.clone();
    apply_table(&mut s3, &t.full);
    add_weighted(&mut s3, &t.half, &k3, h);
    let k4 = nonlinear_term(spec, transformer, &s3)?;

    let mut out = u.clone();
    apply_table(&mut out, &t.full);
    add_weighted(&mut out, &t.full, &k1, h / 6.0);
    add_weighted(&mut out, &t.half, &k2, h / 3.0);
    add_weighted(&mut out, &t.half, &k3, h / 3.0);
    out.add_scaled(&k4, Complex64::new(h / 6.0, 0.0))?;
    Ok(out)
}

/// Advance one step with the given one-step scheme.
pub fn step(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    field: &SpectralField,
    dt: f64,
    scheme: Scheme,
) -> Result<SpectralField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CoreError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let tables = StepTables::new(transformer.grid(), dt);
    match scheme {
        Scheme::Etd2rk => etd2rk_step(spec, transformer, field, &tables),
        Scheme::Ifrk4 => ifrk4_step(spec, transformer, field, &tables),
        Scheme::Picard => {
            Err(CoreError::InvalidConfig("picard is a global mode, not a one-step scheme".into()))
        }
    }
}

fn finite_and_bounded(field: &SpectralField) -> bool {
    field.all_finite() && field.max_abs() <= OVERFLOW_GUARD
}

/// Integrate from `u0` to `config.t_end` (or until overflow), recording
/// snapshots on the configured schedule.
pub fn run(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    u0: &SpectralField,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    spec.validate()?;
    if config.scheme == Scheme::Picard {
        let pr = picard_solve(spec, transformer, u0, config.t_end, config.dt, &config.picard)?;
        let final_time = pr.snapshots.last().map(|s| s.time).unwrap_or(0.0);
        let max_coeff =
            pr.snapshots.iter().map(|s| s.field.max_abs()).fold(0.0f64, f64::max);
        let keep = config.snapshot_every.max(1);
        let last = pr.snapshots.len() - 1;
        let snapshots = pr
            .snapshots
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i == 0 || *i == last || *i % keep == 0)
            .map(|(_, s)| s)
            .collect();
        return Ok(Trajectory { snapshots, status: pr.status, final_time, max_coeff });
    }

    let mut state = u0.clone();
    if !finite_and_bounded(&state) {
        return Err(CoreError::InvalidConfig("initial data is non-finite or beyond guard".into()));
    }
    let mut snapshots = vec![Snapshot { time: 0.0, field: state.clone() }];
    let mut t = 0.0f64;
    let mut max_coeff = state.max_abs();
    let mut status = RunStatus::Completed;
    let mut tables = StepTables::new(transformer.grid(), config.dt);
    let keep = config.snapshot_every;
    let mut istep = 0usize;
    while t < config.t_end - 1e-12 * config.t_end {
        let dt = config.dt.min(config.t_end - t);
        if (dt - tables.dt).abs() > 1e-15 * tables.dt {
            tables = StepTables::new(transformer.grid(), dt);
        }
        let next = match config.scheme {
            Scheme::Etd2rk => etd2rk_step(spec, transformer, &state, &tables)?,
            Scheme::Ifrk4 => ifrk4_step(spec, transformer, &state, &tables)?,
            Scheme::Picard => unreachable!(),
        };
        istep += 1;
        if !finite_and_bounded(&next) {
            status = RunStatus::OverflowDetected;
            break;
        }
        t += dt;
        state = next;
        max_coeff = max_coeff.max(state.max_abs());
        let at_end = t >= config.t_end - 1e-12 * config.t_end;
        if at_end || (keep > 0 && istep % keep == 0) {
            snapshots.push(Snapshot { time: t, field: state.clone() });
        }
    }
    Ok(Trajectory { snapshots, status, final_time: t, max_coeff })
}

/// Global Picard iteration of the integral equation on a uniform time
/// lattice over `[0, t_end]`: each sweep recomputes every node from the
/// initial data plus the trapezoid-quadratured Duhamel integral with exact
/// propagator weights, until sweeps agree to `cfg.tol` relative sup norm.
pub fn picard_solve(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    u0: &SpectralField,
    t_end: f64,
    dt: f64,
    cfg: &PicardConfig,
) -> Result<PicardRun> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CoreError::InvalidConfig(format!("t_end must be positive, got {t_end}")));
    }
    if !(dt > 0.0) {
        return Err(CoreError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    spec.validate()?;
    let grid = *transformer.grid();
    let steps = ((t_end / dt).round() as usize).max(1);
    let h = t_end / steps as f64;

    // heat propagator over k*h, k = 0..=steps
    let mut props: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let tk = k as f64 * h;
        props.push(
            (0..grid.len())
                .map(|i| {
                    let xi = grid.xi(i);
                    (-(tk) * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])).exp()
                })
                .collect(),
        );
    }

    let free: Vec<SpectralField> = (0..=steps)
        .map(|i| {
            let mut f = u0.clone();
            apply_table(&mut f, &props[i]);
            f
        })
        .collect();
    let mut current = free.clone();
    let mut ratios = Vec::new();
    let mut prev_diff: Option<f64> = None;

    for iter in 1..=cfg.max_iter {
        let mut drifts = Vec::with_capacity(steps + 1);
        let mut ok = true;
        for node in &current {
            let n = nonlinear_term(spec, transformer, node)?;
            if !n.all_finite() {
                ok = false;
            }
            drifts.push(n);
        }
        if !ok {
            return Ok(PicardRun {
                snapshots: pack(&current, h),
                iterations: iter,
                contraction_ratios: ratios,
                status: RunStatus::PicardDiverged,
            });
        }
        let mut next = Vec::with_capacity(steps + 1);
        next.push(free[0].clone());
        for i in 1..=steps {
            let mut acc = free[i].clone();
            for (j, drift) in drifts.iter().enumerate().take(i + 1) {
                let w = if j == 0 || j == i { h / 2.0 } else { h };
                add_weighted(&mut acc, &props[i - j], drift, w);
            }
            next.push(acc);
        }
        let mut diff = 0.0f64;
        let mut scale = 1.0f64;
        for (a, b) in next.iter().zip(&current) {
            diff = diff.max(a.max_diff(b)?);
            scale = scale.max(a.max_abs());
        }
        if let Some(p) = prev_diff {
            if p > 0.0 {
                ratios.push(diff / p);
            }
        }
        prev_diff = Some(diff);
        current = next;
        if !diff.is_finite() || scale > OVERFLOW_GUARD {
            return Ok(PicardRun {
                snapshots: pack(&current, h),
                iterations: iter,
                contraction_ratios: ratios,
                status: RunStatus::PicardDiverged,
            });
        }
        if diff <= cfg.tol * scale {
            return Ok(PicardRun {
                snapshots: pack(&current, h),
                iterations: iter,
                contraction_ratios: ratios,
                status: RunStatus::Completed,
            });
        }
    }
    Ok(PicardRun {
        snapshots: pack(&current, h),
        iterations: cfg.max_iter,
        contraction_ratios: ratios,
        status: RunStatus::PicardDiverged,
    })
}

fn pack(nodes: &[SpectralField], h: f64) -> Vec<Snapshot> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, f)| Snapshot { time: i as f64 * h, field: f.clone() })
        .collect()
}

/// Parameters of a rescaling comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub lambda: f64,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
}

/// Outcome of a rescaling comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub lambda: f64,
    pub max_rel_error: f64,
    pub compared_snapshots: usize,
}

/// Evaluate the trigonometric interpolant of `samples` (given on `grid`)
/// at the physical points of `scaled`, which shares `n` but not the period.
fn resample_on_grid(
    transformer: &SpectralTransformer,
    scaled: &TorusGrid,
    samples: &[f64],
) -> Result<Vec<f64>> {
    let grid = transformer.grid();
    let complex: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    let hat = transformer.forward(&complex)?;
    let vol = grid.period().powi(grid.d() as i32);
    let mut out = Vec::with_capacity(scaled.len());
    for p in 0..scaled.len() {
        let x = scaled.point(p);
        let mut acc = Complex64::default();
        for (i, c) in hat.iter().enumerate() {
            let xi = grid.xi(i);
            let phase = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2];
            acc += c * Complex64::new(0.0, phase).exp();
        }
        out.push(acc.re / vol);
    }
    Ok(out)
}

/// Rescaling covariance: the solution map commutes with the parabolic
/// rescaling `u -> lambda^2 u(lambda x, lambda^2 t)` when the coupling is
/// constant. Runs the base problem and the rescaled problem (period `L /
/// lambda`, data `lambda^2 u0(lambda x)`, step `dt / lambda^2`) at equal
/// resolution and reports the worst relative coefficient discrepancy at
/// matched steps. The rescaled data is exact on the lattice: physical
/// samples sit at the same indices, so coefficients just scale by
/// `lambda^(2-d)`. A spatially varying coupling is kept fixed as a function
/// of position (resampled on the smaller torus), which is precisely what
/// breaks covariance for non-constant couplings.
pub fn scaling_covariance_check(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    u0: &SpectralField,
    check: &CovarianceCheck,
) -> Result<CovarianceReport> {
    if !(check.lambda > 0.0 && check.lambda.is_finite()) {
        return Err(CoreError::InvalidConfig(format!(
            "lambda must be positive, got {}",
            check.lambda
        )));
    }
    let lambda = check.lambda;
    let grid = *transformer.grid();
    let d = grid.d();
    let steps = (check.t_end / check.dt).round().max(1.0);
    let snapshot_every = ((steps as usize) / 8).max(1);

    let base_cfg = SolverConfig {
        dt: check.t_end / steps,
        t_end: check.t_end,
        scheme: check.scheme,
        picard: PicardConfig::default(),
        snapshot_every,
    };
    let base = run(spec, transformer, u0, &base_cfg)?;

    let scaled_grid = TorusGrid::new(d, grid.n(), grid.period() / lambda)?;
    let scaled_tr = SpectralTransformer::new(scaled_grid);
    let mut scaled_spec = spec.clone();
    if let Coupling::Field(entries) = &spec.coupling {
        let resampled = entries
            .iter()
            .map(|(j, hh, k, samples)| {
                resample_on_grid(transformer, &scaled_grid, samples).map(|s| (*j, *hh, *k, s))
            })
            .collect::<Result<Vec<_>>>()?;
        scaled_spec.coupling = Coupling::Field(resampled);
    }
    let mut scaled_u0 = SpectralField::zeros(scaled_grid, u0.species());
    let factor = lambda.powi(2 - d as i32);
    for j in 0..u0.species() {
        let src = u0.coeffs(j);
        for (i, v) in scaled_u0.coeffs_mut(j).iter_mut().enumerate() {
            *v = factor * src[i];
        }
    }
    let scaled_cfg = SolverConfig {
        dt: base_cfg.dt / (lambda * lambda),
        t_end: check.t_end / (lambda * lambda),
        scheme: check.scheme,
        picard: PicardConfig::default(),
        snapshot_every,
    };
    let scaled = run(&scaled_spec, &scaled_tr, &scaled_u0, &scaled_cfg)?;

    if base.status != RunStatus::Completed || scaled.status != RunStatus::Completed {
        return Err(CoreError::InvalidConfig(
            "covariance check needs both runs to complete".into(),
        ));
    }
    if base.snapshots.len() != scaled.snapshots.len() {
        return Err(CoreError::ShapeMismatch("snapshot schedules diverged".into()));
    }

    let mut worst = 0.0f64;
    for (b, s) in base.snapshots.iter().zip(&scaled.snapshots) {
        let mut scale = 1e-300f64;
        for j in 0..u0.species() {
            for (x, y) in b.field.coeffs(j).iter().zip(s.field.coeffs(j)) {
                scale = scale.max((factor * x).norm()).max(y.norm());
            }
        }
        for j in 0..u0.species() {
            for (x, y) in b.field.coeffs(j).iter().zip(s.field.coeffs(j)) {
                worst = worst.max((factor * x - y).norm() / scale);
            }
        }
    }
    Ok(CovarianceReport {
        lambda,
        max_rel_error: worst,
        compared_snapshots: base.snapshots.len(),
    })
}
