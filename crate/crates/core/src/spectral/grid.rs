//! Torus grid geometry and the frequency-lattice indexing convention.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Uniform collocation grid on `[0, period)^d`, `n` points per axis.
///
/// Coordinate vectors are returned as `[f64; 3]` (and integer frequencies as
/// `[i64; 3]`) with only the first `d` components meaningful; trailing
/// components are zero. This keeps hot loops allocation-free for `d = 2, 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    d: usize,
    n: usize,
    period: f64,
}

impl TorusGrid {
    /// `d` must be 2 or 3, `n` a power of two with `n >= 8`, `period > 0`.
    pub fn new(d: usize, n: usize, period: f64) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(CoreError::InvalidGrid(format!("dimension {d} not in {{2, 3}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(CoreError::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(CoreError::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(Self { d, n, period })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of lattice points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical mesh width `L / n`.
    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Frequency mesh width `2 pi / L`.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Quadrature weight of one physical cell, `(L/n)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Volume of one frequency cell, `(2 pi / L)^d`.
    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_spacing().powi(self.d as i32)
    }

    /// Integer frequency of one axis index in FFT storage order.
    #[inline]
    pub fn axis_k(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage index of one axis integer frequency `k in [-n/2, n/2)`.
    #[inline]
    pub fn axis_index(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k >= -half && k < half {
            Some(k.rem_euclid(self.n as i64) as usize)
        } else {
            None
        }
    }

    /// Integer frequency vector of a flat storage index.
    #[inline]
    pub fn index_to_k(&self, mut flat: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        for a in (0..self.d).rev() {
            out[a] = self.axis_k(flat % self.n);
            flat /= self.n;
        }
        out
    }

    /// Flat storage index of an integer frequency vector, if representable.
    pub fn k_to_index(&self, k: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for a in 0..self.d {
            flat = flat * self.n + self.axis_index(k[a])?;
        }
        Some(flat)
    }

    /// Continuous frequency `xi = 2 pi k / L` of a flat storage index.
    #[inline]
    pub fn xi(&self, flat: usize) -> [f64; 3] {
        let k = self.index_to_k(flat);
        let s = self.freq_spacing();
        [k[0] as f64 * s, k[1] as f64 * s, k[2] as f64 * s]
    }

    /// Physical collocation point of a flat storage index.
    #[inline]
    pub fn point(&self, mut flat: usize) -> [f64; 3] {
        let mut out = [0.0f64; 3];
        let h = self.spacing();
        for a in (0..self.d).rev() {
            out[a] = (flat % self.n) as f64 * h;
            flat /= self.n;
        }
        out
    }

    /// Distance from `x` to the nearest periodic image of the origin.
    pub fn periodic_radius(&self, x: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.d {
            let w = x[a].rem_euclid(self.period);
            let w = w.min(self.period - w);
            s += w * w;
        }
        s.sqrt()
    }
}
