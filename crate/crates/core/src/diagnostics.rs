//! Discrete norms and decay measurements: weighted sup norms, the
//! frequency-side `PM` scale, dyadic-block (Besov-type) norms built from a
//! fixed radial bump, envelope pairs over a run, and least-squares decay
//! fits. All reductions are sequential for bit-stable results.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::models::smooth_step;
use crate::solver::Snapshot;
use crate::spectral::field::SpectralField;
use crate::spectral::transform::SpectralTransformer;

/// Radial bump profile for the dyadic blocks: exactly 1 on the plateau,
/// glued smoothly to 0 outside the support interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiProfile {
    pub inner: f64,
    pub plateau_lo: f64,
    pub plateau_hi: f64,
    pub outer: f64,
}

impl Default for PsiProfile {
    fn default() -> Self {
        Self { inner: 1.0 / 3.0, plateau_lo: 0.5, plateau_hi: 1.0, outer: 4.0 / 3.0 }
    }
}

impl PsiProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.inner
            && self.inner < self.plateau_lo
            && self.plateau_lo < self.plateau_hi
            && self.plateau_hi < self.outer;
        if !ok {
            return Err(CoreError::InvalidConfig(format!(
                "bump radii must satisfy 0 < {} < {} < {} < {}",
                self.inner, self.plateau_lo, self.plateau_hi, self.outer
            )));
        }
        Ok(())
    }

    /// The bump value at radius `r`.
    pub fn psi_hat(&self, r: f64) -> f64 {
        if r <= self.inner || r >= self.outer {
            0.0
        } else if r < self.plateau_lo {
            smooth_step((r - self.inner) / (self.plateau_lo - self.inner))
        } else if r <= self.plateau_hi {
            1.0
        } else {
            smooth_step((self.outer - r) / (self.outer - self.plateau_hi))
        }
    }
}

/// Regularity index, dyadic range and bump profile of the block norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BesovConfig {
    pub a: f64,
    pub k_min: i32,
    pub k_max: i32,
    #[serde(default)]
    pub psi: PsiProfile,
}

/// Block table and its maximum.
#[derive(Debug, Clone, Serialize)]
pub struct BesovResult {
    pub value: f64,
    pub blocks: Vec<(i32, f64)>,
}

/// Frequency-side norm value together with the separately reported zero
/// mode (which the max excludes).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PmNorm {
    pub value: f64,
    pub zero_mode: f64,
}

/// max over grid points of `(1 + |x|)^theta |u(x)|`, with `|x|` the
/// distance to the nearest periodic image of the origin.
pub fn weighted_sup_norm(
    transformer: &SpectralTransformer,
    field: &SpectralField,
    species: usize,
    theta: f64,
) -> Result<f64> {
    if theta < 0.0 {
        return Err(CoreError::InvalidConfig(format!("theta must be nonnegative, got {theta}")));
    }
    let grid = transformer.grid();
    let phys = field.to_physical(transformer, species)?;
    let mut best = 0.0f64;
    for (i, v) in phys.iter().enumerate() {
        let r = grid.periodic_radius(&grid.point(i));
        best = best.max((1.0 + r).powf(theta) * v.norm());
    }
    Ok(best)
}

/// max over nonzero lattice frequencies of `|xi|^a |u_hat(xi)|`.
pub fn pm_norm(field: &SpectralField, species: usize, a: f64) -> PmNorm {
    let grid = field.grid();
    let coeffs = field.coeffs(species);
    let mut best = 0.0f64;
    for (i, c) in coeffs.iter().enumerate().skip(1) {
        let xi = grid.xi(i);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        best = best.max(r.powf(a) * c.norm());
    }
    PmNorm { value: best, zero_mode: coeffs[0].norm() }
}

/// Dyadic-block norm: each block restricts the coefficients to the bump
/// shell at scale `2^k`, transforms back, and takes the physical sup with
/// the configured scaling; the norm is the largest block.
pub fn besov_norm(
    transformer: &SpectralTransformer,
    field: &SpectralField,
    species: usize,
    cfg: &BesovConfig,
) -> Result<BesovResult> {
    cfg.psi.validate()?;
    if cfg.k_min > cfg.k_max {
        return Err(CoreError::InvalidConfig(format!(
            "empty dyadic range [{}, {}]",
            cfg.k_min, cfg.k_max
        )));
    }
    let grid = transformer.grid();
    let d = grid.d();
    let xi_min = grid.freq_spacing();
    let xi_max = xi_min * (grid.n() as f64 / 2.0) * (d as f64).sqrt();
    for k in cfg.k_min..=cfg.k_max {
        let scale = (2.0f64).powi(k);
        if scale * cfg.psi.outer < xi_min || scale * cfg.psi.inner > xi_max {
            return Err(CoreError::InvalidConfig(format!(
                "dyadic shell k={k} lies outside the lattice resolution"
            )));
        }
    }

    let coeffs = field.coeffs(species);
    let mut blocks = Vec::with_capacity((cfg.k_max - cfg.k_min + 1) as usize);
    let mut value = 0.0f64;
    for k in cfg.k_min..=cfg.k_max {
        let down = (2.0f64).powi(-(d as i32) * k);
        let up = (2.0f64).powf((cfg.a + d as f64) * k as f64);
        let mut shell: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let xi = grid.xi(i);
                let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                let w = cfg.psi.psi_hat(r / (2.0f64).powi(k));
                down * w * c
            })
            .collect();
        transformer.inverse_in_place(&mut shell);
        let sup = shell.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        let block = up * sup;
        value = value.max(block);
        blocks.push((k, block));
    }
    Ok(BesovResult { value, blocks })
}

/// Decay laws the fitter knows. The exponential model subtracts a known
/// floor (for instance the conserved spatial mean) before taking logs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `y = C (1+t)^(-p)`; requires at least 10 samples spanning a decade
    /// in `1+t`.
    Algebraic,
    /// `y = c e^(-lambda t) + mean`.
    Exponential { mean: f64 },
}

/// Fitted decay law: `exponent` is `p` or `lambda`, `constant` is the
/// prefactor, and the residual is the worst relative misfit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitReport {
    pub exponent: f64,
    pub constant: f64,
    pub max_rel_residual: f64,
}

/// Least-squares fit of a norm series in log coordinates.
pub fn decay_fit(times: &[f64], values: &[f64], model: DecayModel) -> Result<FitReport> {
    if times.len() != values.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 2 {
        return Err(CoreError::InvalidConfig("need at least two samples".into()));
    }
    let (xs, floor): (Vec<f64>, f64) = match model {
        DecayModel::Algebraic => {
            if times.len() < 10 {
                return Err(CoreError::InvalidConfig(format!(
                    "algebraic fit needs at least 10 samples, got {}",
                    times.len()
                )));
            }
            let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if (1.0 + hi) / (1.0 + lo) < 10.0 {
                return Err(CoreError::InvalidConfig(format!(
                    "algebraic fit needs a decade of span in 1+t, got {:.3}x",
                    (1.0 + hi) / (1.0 + lo)
                )));
            }
            (times.iter().map(|&t| (1.0 + t).ln()).collect(), 0.0)
        }
        DecayModel::Exponential { mean } => (times.to_vec(), mean),
    };
    let mut ys = Vec::with_capacity(values.len());
    for &v in values {
        let shifted = v - floor;
        if !(shifted > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "series value {v} is not above the floor {floor}"
            )));
        }
        ys.push(shifted.ln());
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    if sxx == 0.0 {
        return Err(CoreError::InvalidConfig("degenerate time axis".into()));
    }
    let slope = sxy / sxx;
    let constant = (ym - slope * xm).exp();
    let mut worst = 0.0f64;
    for (x, &v) in xs.iter().zip(values) {
        let fit = constant * (slope * x).exp() + floor;
        worst = worst.max((v - fit).abs() / v.abs().max(1e-300));
    }
    Ok(FitReport { exponent: -slope, constant, max_rel_residual: worst })
}

/// The two envelopes of a weighted-space membership claim over a run: the
/// worst spatially weighted sup, and the worst `(1+t)^(theta/2)`-weighted
/// plain sup.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopePair {
    pub space: f64,
    pub time: f64,
}

/// Evaluate both envelopes over a snapshot sequence.
pub fn envelope_pair(
    transformer: &SpectralTransformer,
    snapshots: &[Snapshot],
    species: usize,
    theta: f64,
) -> Result<EnvelopePair> {
    if snapshots.is_empty() {
        return Err(CoreError::InvalidConfig("no snapshots to evaluate".into()));
    }
    let mut space = 0.0f64;
    let mut time = 0.0f64;
    for snap in snapshots {
        space = space.max(weighted_sup_norm(transformer, &snap.field, species, theta)?);
        let sup = weighted_sup_norm(transformer, &snap.field, species, 0.0)?;
        time = time.max((1.0 + snap.time).powf(theta / 2.0) * sup);
    }
    Ok(EnvelopePair { space, time })
}

/// One row of diagnostics for a single state: per-species norms for the
/// configured exponent lists plus global coefficient extrema.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub time: f64,
    pub sup: Vec<f64>,
    /// (theta, per-species values)
    pub weighted: Vec<(f64, Vec<f64>)>,
    /// (a, per-species values)
    pub pm: Vec<(f64, Vec<f64>)>,
    pub zero_mode: Vec<f64>,
    pub mass: Vec<f64>,
    /// (a, per-species values)
    pub besov: Option<(f64, Vec<f64>)>,
    pub max_coeff: f64,
    pub overflow: bool,
}

/// Evaluate the configured norms on one state.
pub fn norm_report(
    transformer: &SpectralTransformer,
    field: &SpectralField,
    time: f64,
    thetas: &[f64],
    pm_exponents: &[f64],
    besov: Option<&BesovConfig>,
) -> Result<NormReport> {
    let m = field.species();
    let mut sup = Vec::with_capacity(m);
    let mut zero_mode = Vec::with_capacity(m);
    let mut mass = Vec::with_capacity(m);
    for j in 0..m {
        sup.push(weighted_sup_norm(transformer, field, j, 0.0)?);
        zero_mode.push(field.coeffs(j)[0].norm());
        mass.push(field.coeffs(j)[0].re);
    }
    let mut weighted = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let vals = (0..m)
            .map(|j| weighted_sup_norm(transformer, field, j, theta))
            .collect::<Result<Vec<_>>>()?;
        weighted.push((theta, vals));
    }
    let mut pm = Vec::with_capacity(pm_exponents.len());
    for &a in pm_exponents {
        pm.push((a, (0..m).map(|j| pm_norm(field, j, a).value).collect()));
    }
    let besov = match besov {
        Some(cfg) => {
            let vals = (0..m)
                .map(|j| besov_norm(transformer, field, j, cfg).map(|r| r.value))
                .collect::<Result<Vec<_>>>()?;
            Some((cfg.a, vals))
        }
        None => None,
    };
    let max_coeff = field.max_abs();
    let overflow = !field.all_finite();
    Ok(NormReport {
        time,
        sup,
        weighted,
        pm,
        zero_mode,
        mass,
        besov,
        max_coeff,
        overflow,
    })
}

impl NormReport {
    /// Self-describing CSV header matching `csv_row`.
    pub fn csv_header(&self) -> String {
        let m = self.sup.len();
        let mut cols = vec!["time".to_string()];
        for j in 0..m {
            cols.push(format!("sup_s{j}"));
        }
        for (theta, _) in &self.weighted {
            for j in 0..m {
                cols.push(format!("wsup_th{theta}_s{j}"));
            }
        }
        for (a, _) in &self.pm {
            for j in 0..m {
                cols.push(format!("pm_a{a}_s{j}"));
            }
        }
        for j in 0..m {
            cols.push(format!("zero_mode_s{j}"));
        }
        for j in 0..m {
            cols.push(format!("mass_s{j}"));
        }
        if let Some((a, _)) = &self.besov {
            for j in 0..m {
                cols.push(format!("besov_a{a}_s{j}"));
            }
        }
        cols.push("max_coeff".to_string());
        cols.push("overflow".to_string());
        cols.join(",")
    }

    /// One CSV row in header order.
    pub fn csv_row(&self) -> String {
        let mut cols = vec![format!("{}", self.time)];
        for v in &self.sup {
            cols.push(format!("{v}"));
        }
        for (_, vals) in &self.weighted {
            for v in vals {
                cols.push(format!("{v}"));
            }
        }
        for (_, vals) in &self.pm {
            for v in vals {
                cols.push(format!("{v}"));
            }
        }
        for v in &self.zero_mode {
            cols.push(format!("{v}"));
        }
        for v in &self.mass {
            cols.push(format!("{v}"));
        }
        if let Some((_, vals)) = &self.besov {
            for v in vals {
                cols.push(format!("{v}"));
            }
        }
        cols.push(format!("{}", self.max_coeff));
        cols.push(format!("{}", self.overflow));
        cols.join(",")
    }
}
