//! Dyadic frequency-shell recursion certificate.
//!
//! A nonnegative shape is placed on a fine frequency lattice inside the shell
//! `{2^{k-1} <= xi_1 <= |xi| <= 2^k}`, self-convolved, downsampled back onto a
//! congruent box one shell up, and the worst-case gain of the induction
//! inequality is measured numerically at every level. Chaining the measured
//! gains yields an amplitude threshold `A*` above which the mode-coefficient
//! recursion diverges in finite time; the same chain evaluates divergence
//! tables for Besov-type quantities and lower barriers that simulated
//! trajectories can be checked against. All prefactor bookkeeping runs in log
//! space so the recursion stays finite far past the levels any solver grid
//! can resolve.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::PsiProfile;
use crate::error::{CoreError, Result};
use crate::models::bump_profile;
use crate::solver::Trajectory;
use crate::threads;

/// Supremum of the level times: `ln 2 / 3`.
pub fn t_star() -> f64 {
    LN_2 / 3.0
}

/// Level time `t_k = (ln 2 / 3) (1 - 4^{-k})`; `t_0 = 0`, and
/// `t_star - t_k = (ln 2 / 3) 4^{-k}` exactly.
pub fn ladder_time(k: u32) -> f64 {
    LN_2 * (1.0 - 0.25f64.powi(k as i32)) / 3.0
}

/// Natural log of the classical level-`k` amplitude envelope
/// `2^{2k+7-2^k} e^{-2^k t}`, valid for `t >= t_k`; `-inf` below the level
/// time, where the envelope makes no claim.
pub fn alpha_ln(k: u32, t: f64) -> f64 {
    if t < ladder_time(k) {
        return f64::NEG_INFINITY;
    }
    let p = two_pow(k);
    (2.0 * k as f64 + 7.0 - p) * LN_2 - p * t
}

/// Closed form of `int_{t_{k-1}}^{t_k} exp((s - t_k) 4^k) ds`, the time
/// quadrature seen by the fastest mode of shell `k`. Because the level
/// spacing is `ln 2 * 4^{-k}`, the exponent spans exactly `ln 2` and the
/// integral collapses to `2^{-2k-1}`.
pub fn peak_time_integral(k: u32) -> f64 {
    let delta = LN_2 * 0.25f64.powi(k as i32);
    let rate = 4.0f64.powi(k as i32);
    -(-rate * delta).exp_m1() / rate
}

fn two_pow(k: u32) -> f64 {
    2.0f64.powi(k as i32)
}

fn ln_2pi(d: usize) -> f64 {
    d as f64 * (2.0 * PI).ln()
}

/// Nonnegative samples on a dyadic frequency box. Lattice spacing is `h`,
/// point `i` sits at `xi_a = (offset_a + i_a) h`; inactive axes (`a >= d`)
/// carry offset 0 and extent 1 so every shape lives in three slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeGrid {
    pub d: usize,
    /// Shell index: the box spans `xi_1 in [2^{level-1}, 2^level]`.
    pub level: i32,
    pub h: f64,
    pub offset: [i64; 3],
    pub dims: [usize; 3],
    /// Row-major values, normalized so `sum * h^d = 1`.
    pub values: Vec<f64>,
}

impl ShapeGrid {
    fn flat(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    fn unflat(&self, mut f: usize) -> [usize; 3] {
        let i2 = f % self.dims[2];
        f /= self.dims[2];
        let i1 = f % self.dims[1];
        [f / self.dims[1], i1, i2]
    }

    /// Frequency coordinates of local index `i`.
    pub fn xi(&self, i: [usize; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = (self.offset[a] + i[a] as i64) as f64 * self.h;
        }
        out
    }

    /// Discrete mass `sum of values * h^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h.powi(self.d as i32)
    }

    /// Largest sample value.
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Outer radius of the enclosing box, `(offset_1 + dims_1 - 1) h`; for
    /// ladder shapes this equals `2^level`.
    pub fn outer_radius(&self) -> f64 {
        (self.offset[0] + self.dims[0] as i64 - 1) as f64 * self.h
    }

    /// Per-axis extent `[lo, hi]` of the strictly positive samples.
    pub fn support_box(&self) -> [[f64; 2]; 3] {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (f, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                let xi = self.xi(self.unflat(f));
                for a in 0..3 {
                    lo[a] = lo[a].min(xi[a]);
                    hi[a] = hi[a].max(xi[a]);
                }
            }
        }
        let mut out = [[0.0; 2]; 3];
        for a in 0..3 {
            if lo[a].is_finite() {
                out[a] = [lo[a], hi[a]];
            }
        }
        out
    }

    /// Iterate `(flat, xi)` over strictly positive samples.
    fn support_points(&self) -> Vec<(usize, [f64; 3])> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(f, _)| (f, self.xi(self.unflat(f))))
            .collect()
    }
}

/// Base shape: the reference bump sampled on a lattice of spacing `h`
/// (dyadic, at most 1/32) over `xi_1 in [1/2, 1]`, `|xi_perp| <= 1/4`, then
/// normalized to unit discrete mass.
pub fn build_w0(d: usize, h: f64) -> Result<ShapeGrid> {
    if !(d == 2 || d == 3) {
        return Err(CoreError::InvalidConfig(format!("dimension {d} not in {{2, 3}}")));
    }
    if !(h > 0.0) || h > 1.0 / 32.0 + 1e-15 {
        return Err(CoreError::InvalidConfig(format!(
            "base lattice spacing {h} must be positive and at most 1/32"
        )));
    }
    let j = -h.log2();
    if (j - j.round()).abs() > 1e-12 {
        return Err(CoreError::InvalidConfig(format!(
            "base lattice spacing {h} must be a dyadic fraction 2^-j"
        )));
    }
    let inv = (1.0 / h).round() as i64;
    let (lo1, hi1) = (inv / 2, inv);
    let perp = inv / 4;
    let mut offset = [lo1, 0, 0];
    let mut dims = [(hi1 - lo1 + 1) as usize, 1, 1];
    for a in 1..d {
        offset[a] = -perp;
        dims[a] = (2 * perp + 1) as usize;
    }
    let mut shape = ShapeGrid { d, level: 0, h, offset, dims, values: Vec::new() };
    let mut values = vec![0.0; dims[0] * dims[1] * dims[2]];
    for (f, v) in values.iter_mut().enumerate() {
        let i2 = f % dims[2];
        let rest = f / dims[2];
        let xi = shape.xi([rest / dims[1], rest % dims[1], i2]);
        *v = bump_profile(&xi);
    }
    let mass: f64 = values.iter().sum::<f64>() * h.powi(d as i32);
    if !(mass > 0.0) {
        return Err(CoreError::InvalidConfig("base bump has no lattice mass".into()));
    }
    for v in &mut values {
        *v /= mass;
    }
    shape.values = values;
    Ok(shape)
}

/// One rung of the shape recursion: full discrete self-convolution on the
/// fine lattice, restriction to the even sublattice (which is the congruent
/// box one shell up at doubled spacing), renormalization to unit mass. The
/// convolution is evaluated directly so every output is an exact sum of
/// nonnegative products; positivity cannot be lost to transform round-off.
/// Fails with `LevelRejected` if any positive sample escapes the target
/// shell's outer radius.
pub fn convolve_level(prev: &ShapeGrid) -> Result<ShapeGrid> {
    let d = prev.d;
    let n = prev.dims;
    let on = [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1];
    let v = &prev.values;
    let flat_in = |i: [usize; 3]| (i[0] * n[1] + i[1]) * n[2] + i[2];

    let conv: Vec<Vec<f64>> = threads::install(|| {
        (0..on[0])
            .into_par_iter()
            .map(|o0| {
                let mut slab = vec![0.0; on[1] * on[2]];
                let (a0, b0) = (o0.saturating_sub(n[0] - 1), o0.min(n[0] - 1));
                for o1 in 0..on[1] {
                    let (a1, b1) = (o1.saturating_sub(n[1] - 1), o1.min(n[1] - 1));
                    for o2 in 0..on[2] {
                        let (a2, b2) = (o2.saturating_sub(n[2] - 1), o2.min(n[2] - 1));
                        let mut acc = 0.0;
                        for j0 in a0..=b0 {
                            for j1 in a1..=b1 {
                                for j2 in a2..=b2 {
                                    acc += v[flat_in([j0, j1, j2])]
                                        * v[flat_in([o0 - j0, o1 - j1, o2 - j2])];
                                }
                            }
                        }
                        slab[o1 * on[2] + o2] = acc;
                    }
                }
                slab
            })
            .collect()
    });

    // Even sublattice of the convolution output is the coarse box: local
    // coarse index i corresponds to fine output index 2i, so the integer
    // offsets carry over unchanged in units of the doubled spacing.
    let h_new = 2.0 * prev.h;
    let hd_fine = prev.h.powi(d as i32);
    let mut values = vec![0.0; n[0] * n[1] * n[2]];
    for i0 in 0..n[0] {
        for i1 in 0..n[1] {
            for i2 in 0..n[2] {
                values[flat_in([i0, i1, i2])] =
                    conv[2 * i0][(2 * i1) * on[2] + 2 * i2] * hd_fine;
            }
        }
    }
    let mass_raw: f64 = values.iter().sum::<f64>() * h_new.powi(d as i32);
    let level = prev.level + 1;
    if !(mass_raw > 0.0) {
        return Err(CoreError::LevelRejected {
            level: level.max(0) as u32,
            reason: "no mass survives the downsample".into(),
        });
    }
    for v in &mut values {
        *v /= mass_raw;
    }
    let next = ShapeGrid { d, level, h: h_new, offset: prev.offset, dims: n, values };

    let radius = next.outer_radius() * (1.0 + 1e-12);
    for (_, xi) in next.support_points() {
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        if r > radius {
            return Err(CoreError::LevelRejected {
                level: level.max(0) as u32,
                reason: format!("support point at |xi| = {r} escapes the shell radius {}", next.outer_radius()),
            });
        }
    }
    Ok(next)
}

/// Measured data for one induction step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepMeasurement {
    /// Worst-case per-level gain `min I(t, xi) K(xi) / m_k(xi)` over the
    /// support of the coarse shape and sample times `t >= t_k`.
    pub gain: f64,
    /// Gain relative to the `2^{-2k-3}` per-level budget of the classical
    /// prefactor chain: `gain * 2^{2k+3}`. At least 1 means the chain closes.
    pub margin: f64,
    /// Smallest interaction weight `xi_1 eta_1 / |eta|^2` seen by the
    /// quadrature; the shell geometry guarantees at least 1/2.
    pub weight_min: f64,
}

/// Quadrature of the induction inequality from level `k-1` to level `k`
/// (`k = next.level`): for every positive coarse sample `xi`, the convolution
/// `K(xi) = sum_eta (xi_1 eta_1 / |eta|^2) m_{k-1}(xi - eta) m_{k-1}(eta) h^d`
/// is weighted by a lower bound for the Duhamel time factor
/// `int e^{(s-t)|xi|^2} e^{2^k (t-s)} ds` and divided by the target sample.
/// The time integral is bracketed by both composite endpoint rules on
/// `time_subintervals` panels and the smaller sum is used, so the reported
/// gain is one-sided-safe regardless of the integrand's monotonicity.
pub fn verify_induction_step(
    prev: &ShapeGrid,
    next: &ShapeGrid,
    time_subintervals: usize,
) -> Result<StepMeasurement> {
    if prev.d != next.d || prev.dims != next.dims || next.level != prev.level + 1 {
        return Err(CoreError::ShapeMismatch(
            "induction step needs congruent shapes on consecutive levels".into(),
        ));
    }
    if next.level < 1 {
        return Err(CoreError::InvalidConfig("induction starts at level 1".into()));
    }
    let k = next.level as u32;
    let d = prev.d;
    let h = prev.h;
    let hd = h.powi(d as i32);
    // Sample times t_k, (t_k + t_star)/2 and t_star, expressed as exact
    // integration-window widths t - t_{k-1} in units of the level spacing
    // delta = ln2 * 4^{-k}. Beyond level 26 the spacing drops below one ulp
    // of t_star, so subtracting nearby ladder times would cancel to zero;
    // the closed-form multiples 1, 7/6, 4/3 never do.
    let delta = LN_2 * 0.25f64.powi(k as i32);
    let widths = [delta, delta * 7.0 / 6.0, delta * 4.0 / 3.0];

    let mask = 1e-13 * next.max_value();
    let points: Vec<usize> = next
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > mask)
        .map(|(f, _)| f)
        .collect();
    if points.is_empty() {
        return Err(CoreError::Quadrature("coarse shape has empty support".into()));
    }
    let eta_points = prev.support_points();

    let per_point: Vec<(f64, f64)> = threads::install(|| {
        points
            .par_iter()
            .map(|&f| {
                let i = next.unflat(f);
                // Coarse point expressed on the fine lattice: index doubles.
                let fine = [
                    2 * (next.offset[0] + i[0] as i64),
                    2 * (next.offset[1] + i[1] as i64),
                    2 * (next.offset[2] + i[2] as i64),
                ];
                let xi = [fine[0] as f64 * h, fine[1] as f64 * h, fine[2] as f64 * h];
                let xi_sq = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                let cexp = two_pow(k) - xi_sq;
                let mut kernel = 0.0;
                let mut wmin = f64::INFINITY;
                for &(g, eta) in &eta_points {
                    let je = prev.unflat(g);
                    let mut inside = true;
                    let mut jd = [0usize; 3];
                    for a in 0..3 {
                        let loc = fine[a] - (prev.offset[a] + je[a] as i64) - prev.offset[a];
                        if loc < 0 || loc >= prev.dims[a] as i64 {
                            inside = false;
                            break;
                        }
                        jd[a] = loc as usize;
                    }
                    if !inside {
                        continue;
                    }
                    let a_diff = prev.values[prev.flat(jd)];
                    if a_diff == 0.0 {
                        continue;
                    }
                    let eta_sq = eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2];
                    let w = xi[0] * eta[0] / eta_sq;
                    wmin = wmin.min(w);
                    kernel += w * a_diff * prev.values[g];
                }
                kernel *= hd;
                let integral = widths
                    .iter()
                    .map(|&w| lower_time_integral(cexp, w, time_subintervals))
                    .fold(f64::INFINITY, f64::min);
                (integral * kernel / next.values[f], wmin)
            })
            .collect()
    });

    let gain = per_point.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let weight_min = per_point.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !gain.is_finite() || gain <= 0.0 {
        return Err(CoreError::Quadrature(format!("level {k} gain {gain} is not positive")));
    }
    Ok(StepMeasurement { gain, margin: gain * two_pow(2 * k + 3), weight_min })
}

/// Lower bound for `int_0^width e^{c tau} d tau`: the smaller of the two
/// composite endpoint rules. The integrand is monotone, so the rules bracket
/// the integral and the minimum never overestimates.
fn lower_time_integral(c: f64, width: f64, subintervals: usize) -> f64 {
    let s = subintervals.max(1);
    let dt = width / s as f64;
    let mut left = 0.0;
    for j in 0..s {
        left += (c * j as f64 * dt).exp();
    }
    let right = left - 1.0 + (c * width).exp();
    dt * left.min(right)
}

/// One measured level of the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderLevel {
    pub k: u32,
    pub t_k: f64,
    /// Measured per-level gain; 1 at the base level by convention.
    pub gain: f64,
    /// Induction margin against the classical per-level budget. The base
    /// level records the base-case ratio `2^{-6}` instead (the corrected
    /// base envelope is `e^{-t}`, a factor 64 below the classical one).
    pub margin: f64,
    /// Smallest interaction weight seen at this level (absent at the base).
    pub weight_min: Option<f64>,
    /// `log2` of the mass-normalized gain chain `c_k = c_{k-1}^2 g_k`.
    pub log2_gain_chain: f64,
    /// Natural log of the shape-mass chain, `ln P_k = 2 ln P_{k-1} - d ln 2pi`.
    pub ln_mass_chain: f64,
    pub support_box: [[f64; 2]; 3],
}

/// Measured gain ladder: levels, shapes, and the quadrature width they were
/// measured with.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub d: usize,
    pub k_max: u32,
    pub levels: Vec<LadderLevel>,
    pub shapes: Vec<ShapeGrid>,
    pub time_subintervals: usize,
}

/// Ratio of the measured base envelope `e^{-t}` to the classical base
/// envelope `64 e^{-t}`.
pub const BASE_CASE_GAP: f64 = 0.015625;

/// Default panel count for the endpoint-rule time quadrature.
pub const DEFAULT_TIME_SUBINTERVALS: usize = 256;

impl Ladder {
    /// Natural log of the full level-`k` chain coefficient
    /// `c_k * P_k = (gain chain) * (mass chain)`; the level-`k` barrier for
    /// amplitude `A` reads `exp(2^k ln A + ln_coefficient(k) - 2^k t) m_k(xi)`.
    pub fn ln_coefficient(&self, k: u32) -> f64 {
        let lv = &self.levels[k as usize];
        lv.log2_gain_chain * LN_2 + lv.ln_mass_chain
    }
}

/// Build the shape ladder and measure every induction step with the default
/// quadrature width.
pub fn build_ladder(d: usize, k_max: u32) -> Result<Ladder> {
    build_ladder_with(d, k_max, DEFAULT_TIME_SUBINTERVALS)
}

/// Build the shape ladder to `k_max` levels, measuring each step with
/// `time_subintervals` panels in the time quadrature.
pub fn build_ladder_with(d: usize, k_max: u32, time_subintervals: usize) -> Result<Ladder> {
    if k_max > 40 {
        return Err(CoreError::InvalidConfig(format!(
            "ladder depth {k_max} exceeds the supported log-space range (40)"
        )));
    }
    let base = build_w0(d, 1.0 / 32.0)?;
    let mut levels = vec![LadderLevel {
        k: 0,
        t_k: 0.0,
        gain: 1.0,
        margin: BASE_CASE_GAP,
        weight_min: None,
        log2_gain_chain: 0.0,
        ln_mass_chain: 0.0,
        support_box: base.support_box(),
    }];
    let mut shapes = vec![base];
    for k in 1..=k_max {
        let next = convolve_level(&shapes[(k - 1) as usize])?;
        let step = verify_induction_step(&shapes[(k - 1) as usize], &next, time_subintervals)?;
        let prev_lv = &levels[(k - 1) as usize];
        levels.push(LadderLevel {
            k,
            t_k: ladder_time(k),
            gain: step.gain,
            margin: step.margin,
            weight_min: Some(step.weight_min),
            log2_gain_chain: 2.0 * prev_lv.log2_gain_chain + step.gain.log2(),
            ln_mass_chain: 2.0 * prev_lv.ln_mass_chain - ln_2pi(d),
            support_box: next.support_box(),
        });
        shapes.push(next);
    }
    Ok(Ladder { d, k_max, levels, shapes, time_subintervals })
}

/// One row of a divergence table: base-2 logs of the recursion terms for a
/// given amplitude, and whether they grow monotonically past level 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub amplitude: f64,
    pub log2_terms: Vec<f64>,
    pub diverges: bool,
}

/// Amplitude-threshold extrapolation from a measured ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Measured divergence threshold `(2pi)^d 2^{1/3 + L_inf}`.
    #[serde(rename = "A_star")]
    pub a_star: f64,
    /// Threshold implied by the classical prefactor chain, `2^{4/3} (2pi)^d`.
    #[serde(rename = "A_paper")]
    pub a_classical: f64,
    /// Extrapolated limit of `L_k = -log2(c_k) / 2^k`.
    pub l_infinity: f64,
    /// The sequence `L_k` for `k = 1..=k_max`.
    pub l_sequence: Vec<f64>,
    /// Besov smoothness index the divergence table was evaluated at.
    pub besov_index: f64,
    pub divergence_table: Vec<DivergenceRow>,
}

/// Extrapolate the divergence threshold from the measured gain chain and
/// tabulate the recursion terms at `t_star` for the given amplitudes.
///
/// `L_k` converges like `L_inf - (a k + b) / 2^k`; the last three levels pin
/// the three unknowns exactly, which needs a ladder of depth at least 3.
pub fn estimate_threshold(
    ladder: &Ladder,
    besov_index: f64,
    amplitudes: &[f64],
) -> Result<ThresholdEstimate> {
    if ladder.k_max < 3 {
        return Err(CoreError::InvalidConfig(format!(
            "threshold extrapolation needs at least 3 levels, got {}",
            ladder.k_max
        )));
    }
    let l_sequence: Vec<f64> = (1..=ladder.k_max)
        .map(|k| -ladder.levels[k as usize].log2_gain_chain / two_pow(k))
        .collect();

    let ks: Vec<f64> = (ladder.k_max - 2..=ladder.k_max).map(|k| k as f64).collect();
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (r, &k) in ks.iter().enumerate() {
        let p = 2.0f64.powf(-k);
        m[r] = [1.0, -k * p, -p];
        rhs[r] = l_sequence[(k as u32 - 1) as usize];
    }
    let l_infinity = solve3(&m, &rhs)?[0];

    let two_pi_d = (2.0 * PI).powi(ladder.d as i32);
    let a_star = two_pi_d * 2.0f64.powf(1.0 / 3.0 + l_infinity);
    let a_classical = 2.0f64.powf(4.0 / 3.0) * two_pi_d;

    let psi = PsiProfile::default();
    let mut divergence_table = Vec::new();
    for &amp in amplitudes {
        if !(amp > 0.0) {
            return Err(CoreError::InvalidConfig(format!("amplitude {amp} must be positive")));
        }
        let terms = besov_lowerbound(ladder, amp, besov_index, t_star(), &psi)?;
        let log2_terms: Vec<f64> = terms.iter().map(|t| t / LN_2).collect();
        let diverges = log2_terms.len() >= 4
            && (2..log2_terms.len() - 1).all(|j| log2_terms[j + 1] > log2_terms[j]);
        divergence_table.push(DivergenceRow { amplitude: amp, log2_terms, diverges });
    }

    Ok(ThresholdEstimate {
        a_star,
        a_classical,
        l_infinity,
        l_sequence,
        besov_index,
        divergence_table,
    })
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Result<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d0 = det(m);
    if d0.abs() < 1e-300 {
        return Err(CoreError::Quadrature("singular extrapolation system".into()));
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut mc = *m;
        for r in 0..3 {
            mc[r][c] = rhs[r];
        }
        out[c] = det(&mc) / d0;
    }
    Ok(out)
}

/// Natural logs of the level terms
/// `2^{ak} (2pi)^{-d} A^{2^k} c_k P_k e^{-2^k t} M_k(psi)` for `k = 0..=k_max`,
/// where `M_k(psi)` is the discrete mass of `m_k` weighted by the dyadic
/// window `psi(|xi| / 2^k)`. The window plateau covers each shell, so the
/// weighted mass never falls below the plain (unit) mass. Levels whose time
/// has not arrived (`t < t_k`) report `-inf`.
pub fn besov_lowerbound(
    ladder: &Ladder,
    amplitude: f64,
    besov_index: f64,
    t: f64,
    psi: &PsiProfile,
) -> Result<Vec<f64>> {
    if !(amplitude > 0.0) {
        return Err(CoreError::InvalidConfig(format!("amplitude {amplitude} must be positive")));
    }
    psi.validate()?;
    let ln_a = amplitude.ln();
    let mut out = Vec::with_capacity(ladder.levels.len());
    for lv in &ladder.levels {
        if t < lv.t_k {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let shape = &ladder.shapes[lv.k as usize];
        let scale = two_pow(lv.k);
        let hd = shape.h.powi(ladder.d as i32);
        let weighted_mass: f64 = shape
            .support_points()
            .iter()
            .map(|&(f, xi)| {
                let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                psi.psi_hat(r / scale) * shape.values[f] * hd
            })
            .sum();
        out.push(
            besov_index * lv.k as f64 * LN_2 - ln_2pi(ladder.d)
                + scale * ln_a
                + ladder.ln_coefficient(lv.k)
                - scale * t
                + weighted_mass.ln(),
        );
    }
    Ok(out)
}

/// Outcome of checking one ladder level against a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BarrierStatus {
    /// Compared on `points` lattice-representable support points across
    /// `snapshots` admissible snapshot times; `min_ratio` is the worst
    /// solution-to-barrier ratio seen. `unreachable` counts on-lattice
    /// support points that were excluded because no sum of initially active
    /// modes can ever land on them.
    Checked { min_ratio: f64, points: usize, unreachable: usize, snapshots: usize },
    /// No snapshot reaches the level time; nothing to compare.
    Vacuous { points: usize, snapshots_total: usize },
    /// The level cannot be evaluated on this grid at all.
    Skipped { reason: String },
}

/// Per-level barrier verdict. `passed` is present only for checked levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierLevel {
    pub k: u32,
    pub passed: Option<bool>,
    #[serde(flatten)]
    pub status: BarrierStatus,
}

/// Indicator of every lattice mode the solver's quadratic interaction can in
/// principle populate: the additive closure of the initial bump's support on
/// the frequency lattice of spacing `dxi`, restricted to first components
/// `0..=hi1`. Because every generator has a strictly positive first
/// component, one ascending sweep in `m_1` completes the closure, and the
/// transverse extent of any sum landing below `hi1` is bounded by the
/// summand count times the generator extent, which bounds the bookkeeping
/// box.
struct ReachableModes {
    perp: i64,
    dims: [usize; 3],
    cells: Vec<bool>,
}

impl ReachableModes {
    fn slot(&self, m: &[i64; 3]) -> Option<usize> {
        if m[0] < 0 || m[0] >= self.dims[0] as i64 {
            return None;
        }
        let mut idx = m[0] as usize;
        for a in 1..3 {
            if self.dims[a] == 1 {
                if m[a] != 0 {
                    return None;
                }
                continue;
            }
            if m[a].abs() > self.perp {
                return None;
            }
            idx = idx * self.dims[a] + (m[a] + self.perp) as usize;
        }
        Some(idx)
    }

    fn contains(&self, m: &[i64; 3]) -> bool {
        self.slot(m).is_some_and(|i| self.cells[i])
    }
}

/// `None` when the closure box would exceed a safety cap (far coarser or
/// deeper than any sane configuration).
fn reachable_modes(d: usize, dxi: f64, hi1: i64) -> Option<ReachableModes> {
    let hi1 = hi1.max(0);
    let m1_hi = (1.0 / dxi).ceil() as i64;
    let mp_hi = (0.25 / dxi).ceil() as i64;
    let mut gens: Vec<[i64; 3]> = Vec::new();
    let mut rperp = 0i64;
    for m1 in 1..=m1_hi {
        for m2 in -mp_hi..=mp_hi {
            let m3_range = if d == 3 { -mp_hi..=mp_hi } else { 0..=0 };
            for m3 in m3_range {
                let xi = [m1 as f64 * dxi, m2 as f64 * dxi, m3 as f64 * dxi];
                if bump_profile(&xi) > 0.0 {
                    gens.push([m1, m2, m3]);
                    rperp = rperp.max(m2.abs()).max(m3.abs());
                }
            }
        }
    }
    let perp = match gens.iter().map(|g| g[0]).min() {
        Some(g1min) => (hi1 / g1min + 1) * rperp,
        // No lattice mode lands inside the bump: nothing is reachable.
        None => 0,
    };
    let dims = [
        (hi1 + 1) as usize,
        (2 * perp + 1) as usize,
        if d == 3 { (2 * perp + 1) as usize } else { 1 },
    ];
    let total = dims[0].checked_mul(dims[1])?.checked_mul(dims[2])?;
    if total > (1 << 26) {
        return None;
    }
    let mut reach = ReachableModes { perp, dims, cells: vec![false; total] };
    for g in &gens {
        if let Some(i) = reach.slot(g) {
            reach.cells[i] = true;
        }
    }
    for m1 in 1..=hi1 {
        for m2 in -perp..=perp {
            let m3_range = if d == 3 { -perp..=perp } else { 0..=0 };
            for m3 in m3_range {
                let cell = [m1, m2, m3];
                let marked = match reach.slot(&cell) {
                    Some(i) => reach.cells[i],
                    None => false,
                };
                if !marked {
                    continue;
                }
                for g in &gens {
                    let next = [m1 + g[0], m2 + g[1], m3 + g[2]];
                    if let Some(j) = reach.slot(&next) {
                        reach.cells[j] = true;
                    }
                }
            }
        }
    }
    Some(reach)
}

/// Check a simulated trajectory (species 0) against the measured-chain lower
/// barriers `exp(2^k ln A + ln c_k P_k - 2^k t) m_k(xi)` for levels
/// `0..=max_level`.
///
/// Support points are mapped onto the solver's frequency lattice; points
/// that fall between lattice modes or beyond the dealiased band are dropped,
/// and a level with no representable points is skipped with the reason
/// spelled out. Two further classes of points measure grid resolution rather
/// than dynamics and are excluded with explicit counts:
///
/// * shape values below `1e-13` of the level peak, whose barrier sits
///   beneath the round-off floor of any floating trajectory (the gain
///   quadrature masks its support the same way), and
/// * points outside the additive semigroup generated by the initial bump's
///   own lattice support. The solver's convolution can only populate sums
///   of initially active modes, so shell-edge points fed by convolution
///   lenses thinner than the solver spacing stay identically zero no matter
///   how the dynamics behave; counting them as failures would report the
///   lattice, not the solution.
///
/// Levels whose time `t_k` lies beyond every snapshot are reported vacuous
/// together with the sample counts, so a trajectory that overflows early
/// cannot silently "pass" late levels. Barriers are built in log space and
/// compared only where they are representable in floating point.
pub fn verify_solution_barrier(
    traj: &Trajectory,
    ladder: &Ladder,
    amplitude: f64,
    max_level: u32,
    rel_tol: f64,
) -> Result<Vec<BarrierLevel>> {
    if !(amplitude > 0.0) || !(rel_tol >= 0.0) {
        return Err(CoreError::InvalidConfig(
            "barrier check needs a positive amplitude and nonnegative tolerance".into(),
        ));
    }
    if max_level > ladder.k_max {
        return Err(CoreError::InvalidConfig(format!(
            "barrier level {max_level} exceeds ladder depth {}",
            ladder.k_max
        )));
    }
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| CoreError::InvalidConfig("trajectory has no snapshots".into()))?;
    let grid = *first.field.grid();
    if grid.d() != ladder.d {
        return Err(CoreError::ShapeMismatch(format!(
            "trajectory dimension {} does not match ladder dimension {}",
            grid.d(),
            ladder.d
        )));
    }
    let dxi = grid.freq_spacing();
    let band = grid.n() as i64;
    let ln_a = amplitude.ln();

    let mut out = Vec::new();
    for k in 0..=max_level {
        let shape = &ladder.shapes[k as usize];
        let floor = 1e-13 * shape.max_value();
        let mut reps: Vec<([i64; 3], usize, f64)> = Vec::new();
        let mut off_lattice = 0usize;
        let mut off_band = 0usize;
        for (f, xi) in shape.support_points() {
            if shape.values[f] <= floor {
                continue;
            }
            let mut modes = [0i64; 3];
            let mut exact = true;
            let mut in_band = true;
            for a in 0..grid.d() {
                let r = xi[a] / dxi;
                let ri = r.round();
                if (r - ri).abs() > 1e-9 {
                    exact = false;
                    break;
                }
                modes[a] = ri as i64;
                if 3 * modes[a].abs() > band {
                    in_band = false;
                    break;
                }
            }
            if !exact {
                off_lattice += 1;
                continue;
            }
            if !in_band {
                off_band += 1;
                continue;
            }
            match grid.k_to_index(&modes[..grid.d()]) {
                Some(idx) => reps.push((modes, idx, shape.values[f].ln())),
                None => off_band += 1,
            }
        }
        let mut unreachable = 0usize;
        if !reps.is_empty() {
            let hi1 = reps.iter().map(|(m, ..)| m[0]).max().unwrap_or(0);
            match reachable_modes(grid.d(), dxi, hi1) {
                Some(reach) => reps.retain(|(m, ..)| {
                    let keep = reach.contains(m);
                    if !keep {
                        unreachable += 1;
                    }
                    keep
                }),
                None => {
                    out.push(BarrierLevel {
                        k,
                        passed: None,
                        status: BarrierStatus::Skipped {
                            reason: "reachable-mode closure too large for this lattice".into(),
                        },
                    });
                    continue;
                }
            }
        }
        if reps.is_empty() {
            let reason = if unreachable > 0 {
                format!(
                    "all {unreachable} on-lattice support points unreachable by sums of initially active modes"
                )
            } else if off_band > 0 {
                format!(
                    "all {off_band} support points beyond the dealiased band (plus {off_lattice} off-lattice)"
                )
            } else {
                format!("all {off_lattice} support points fall between solver lattice modes")
            };
            out.push(BarrierLevel { k, passed: None, status: BarrierStatus::Skipped { reason } });
            continue;
        }

        let t_k = ladder_time(k);
        let ln_chain = two_pow(k) * ln_a + ladder.ln_coefficient(k);
        let admissible: Vec<_> =
            traj.snapshots.iter().filter(|s| s.time >= t_k - 1e-12).collect();
        if admissible.is_empty() {
            out.push(BarrierLevel {
                k,
                passed: None,
                status: BarrierStatus::Vacuous {
                    points: reps.len(),
                    snapshots_total: traj.snapshots.len(),
                },
            });
            continue;
        }

        let mut min_ratio = f64::INFINITY;
        let mut compared = 0usize;
        for snap in &admissible {
            let coeffs = snap.field.coeffs(0);
            for &(_, idx, ln_m) in &reps {
                let ln_barrier = ln_chain - two_pow(k) * snap.time + ln_m;
                if ln_barrier.abs() > 690.0 {
                    continue; // barrier outside floating range at this sample
                }
                compared += 1;
                min_ratio = min_ratio.min(coeffs[idx].re / ln_barrier.exp());
            }
        }
        if compared == 0 {
            out.push(BarrierLevel {
                k,
                passed: None,
                status: BarrierStatus::Skipped {
                    reason: "barrier outside floating range at every sample".into(),
                },
            });
            continue;
        }
        out.push(BarrierLevel {
            k,
            passed: Some(min_ratio >= 1.0 - rel_tol),
            status: BarrierStatus::Checked {
                min_ratio,
                points: reps.len(),
                unreachable,
                snapshots: admissible.len(),
            },
        });
    }
    Ok(out)
}

/// How a certificate was produced: pure recursion, or recursion plus
/// trajectory barriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMode {
    RecursionOnly,
    SolverCoupled,
}

/// One level as reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportLevel {
    pub k: u32,
    pub t_k: f64,
    /// Natural log of the amplitude-bearing prefactor `A^{2^k} c_k P_k`; the
    /// level barrier is `exp(logPrefactor - 2^k t) m_k(xi)`.
    #[serde(rename = "logPrefactor")]
    pub log_prefactor: f64,
    pub margin: f64,
    pub support_box: [[f64; 2]; 3],
}

/// Full certificate: measured levels, threshold extrapolation, divergence
/// table, and (in solver-coupled mode) barrier verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub d: usize,
    pub k_max: u32,
    pub mode: CertificateMode,
    pub amplitude: f64,
    pub levels: Vec<ReportLevel>,
    #[serde(rename = "A_star")]
    pub a_star: f64,
    #[serde(rename = "A_paper")]
    pub a_classical: f64,
    pub l_infinity: f64,
    /// Base-case ratio against the classical envelope, recorded separately
    /// and excluded from `pass`.
    pub base_case_gap: f64,
    pub gains: Vec<f64>,
    pub divergence_table: Vec<DivergenceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<Vec<BarrierLevel>>,
    pub pass: bool,
}

/// Assemble a report for amplitude `amplitude`. `pass` requires every
/// measured induction margin (levels 1 and up) to be at least 1 and, when
/// barrier verdicts are attached, no checked level to have failed; skipped
/// and vacuous levels are reported but do not fail the certificate.
pub fn certificate_report(
    ladder: &Ladder,
    threshold: &ThresholdEstimate,
    mode: CertificateMode,
    amplitude: f64,
    barrier: Option<Vec<BarrierLevel>>,
) -> CertificateReport {
    let levels: Vec<ReportLevel> = ladder
        .levels
        .iter()
        .map(|lv| ReportLevel {
            k: lv.k,
            t_k: lv.t_k,
            log_prefactor: two_pow(lv.k) * amplitude.ln() + ladder.ln_coefficient(lv.k),
            margin: lv.margin,
            support_box: lv.support_box,
        })
        .collect();
    let margins_ok = ladder.levels.iter().skip(1).all(|lv| lv.margin >= 1.0);
    let barrier_ok = barrier
        .as_ref()
        .map(|b| b.iter().all(|lv| lv.passed != Some(false)))
        .unwrap_or(true);
    CertificateReport {
        d: ladder.d,
        k_max: ladder.k_max,
        mode,
        amplitude,
        levels,
        a_star: threshold.a_star,
        a_classical: threshold.a_classical,
        l_infinity: threshold.l_infinity,
        base_case_gap: BASE_CASE_GAP,
        gains: ladder.levels.iter().map(|lv| lv.gain).collect(),
        divergence_table: threshold.divergence_table.clone(),
        barrier,
        pass: margins_ok && barrier_ok,
    }
}
