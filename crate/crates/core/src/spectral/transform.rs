//! Forward/inverse transforms between collocation samples and frequency
//! coefficients, axis by axis over the flat row-major buffer.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};
use crate::spectral::grid::TorusGrid;

/// Caches FFT plans for one grid size and applies the crate's quadrature
/// normalization (forward multiplies by `(L/n)^d`, inverse by `1/L^d`).
pub struct SpectralTransformer {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralTransformer {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        Self { grid, fwd, inv }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "buffer has {len} entries, grid needs {}",
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Unnormalized DFT along every axis, in place.
    fn dft_all_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let d = self.grid.d();
        let mut line = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for axis in 0..d {
            // Row-major: stride of `axis` is n^(d-1-axis).
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            let blocks = data.len() / block;
            for b in 0..blocks {
                for off in 0..stride {
                    let base = b * block + off;
                    for j in 0..n {
                        line[j] = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..n {
                        data[base + j * stride] = line[j];
                    }
                }
            }
        }
    }

    /// Collocation samples -> frequency coefficients (trapezoid quadrature of
    /// `integral u(x) exp(-i xi.x) dx`).
    pub fn forward(&self, physical: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(physical.len())?;
        let mut data = physical.to_vec();
        self.forward_in_place(&mut data);
        Ok(data)
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        self.dft_all_axes(data, &self.fwd);
        let w = self.grid.cell_volume();
        for v in data.iter_mut() {
            *v *= w;
        }
    }

    /// Frequency coefficients -> collocation samples.
    pub fn inverse(&self, spectral: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(spectral.len())?;
        let mut data = spectral.to_vec();
        self.inverse_in_place(&mut data);
        Ok(data)
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        self.dft_all_axes(data, &self.inv);
        let w = self.grid.period().powi(self.grid.d() as i32).recip();
        for v in data.iter_mut() {
            *v *= w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid_2pi(n: usize) -> TorusGrid {
        TorusGrid::new(2, n, 2.0 * PI).unwrap()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_field_concentrates_at_zero_mode() {
        let g = grid_2pi(16);
        let t = SpectralTransformer::new(g);
        let phys = vec![Complex64::new(1.0, 0.0); g.len()];
        let spec = t.forward(&phys).unwrap();
        let vol = (2.0 * PI).powi(2);
        assert!((spec[0] - Complex64::new(vol, 0.0)).norm() < 1e-12 * vol);
        for (i, v) in spec.iter().enumerate().skip(1) {
            assert!(v.norm() < 1e-12 * vol, "leakage at index {i}: {v}");
        }
    }

    #[test]
    fn cosine_splits_between_conjugate_modes() {
        let g = grid_2pi(16);
        let t = SpectralTransformer::new(g);
        let phys: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new(g.point(i)[0].cos(), 0.0))
            .collect();
        let spec = t.forward(&phys).unwrap();
        let expect = (2.0 * PI).powi(2) / 2.0;
        let at = |k: [i64; 3]| spec[g.k_to_index(&k).unwrap()];
        assert!((at([1, 0, 0]) - Complex64::new(expect, 0.0)).norm() < 1e-10);
        assert!((at([-1, 0, 0]) - Complex64::new(expect, 0.0)).norm() < 1e-10);
        assert!(at([2, 0, 0]).norm() < 1e-10);
    }

    #[test]
    fn roundtrip_identity() {
        let g = grid_2pi(32);
        let t = SpectralTransformer::new(g);
        let phys: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                Complex64::new((p[0].sin() + 0.3 * (2.0 * p[1]).cos()).exp(), p[0].cos())
            })
            .collect();
        let spec = t.forward(&phys).unwrap();
        let back = t.inverse(&spec).unwrap();
        let scale = phys.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(&phys, &back) < 1e-12 * scale);
    }

    #[test]
    fn gaussian_coefficients_agree_across_resolutions() {
        // Resolution-independence of resolved coefficients: n = 64 vs n = 128.
        let coeffs = |n: usize| {
            let g = grid_2pi(n);
            let t = SpectralTransformer::new(g);
            let phys: Vec<Complex64> = (0..g.len())
                .map(|i| {
                    let p = g.point(i);
                    let dx = p[0] - PI;
                    let dy = p[1] - PI;
                    Complex64::new((-(dx * dx + dy * dy) / 0.5).exp(), 0.0)
                })
                .collect();
            (g, t.forward(&phys).unwrap())
        };
        let (g64, c64) = coeffs(64);
        let (g128, c128) = coeffs(128);
        let mut worst = 0.0f64;
        for i in 0..g64.len() {
            let k = g64.index_to_k(i);
            let j = g128.k_to_index(&k).unwrap();
            worst = worst.max((c64[i] - c128[j]).norm());
        }
        assert!(worst < 1e-10, "worst shared-mode deviation {worst}");
    }

    #[test]
    fn hermitian_symmetry_for_real_data() {
        let g = grid_2pi(16);
        let t = SpectralTransformer::new(g);
        let phys: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                Complex64::new(p[0].sin() * (3.0 * p[1]).cos() + 0.2, 0.0)
            })
            .collect();
        let spec = t.forward(&phys).unwrap();
        for i in 0..g.len() {
            let k = g.index_to_k(i);
            let neg = [-k[0], -k[1], -k[2]];
            if let Some(j) = g.k_to_index(&neg) {
                let diff = (spec[i] - spec[j].conj()).norm();
                assert!(diff < 1e-10, "asymmetry at k={k:?}: {diff}");
            }
        }
    }

    #[test]
    fn parseval_identity() {
        let g = grid_2pi(32);
        let t = SpectralTransformer::new(g);
        let phys: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                Complex64::new((2.0 * p[0]).cos() * p[1].sin(), (p[0] + p[1]).sin())
            })
            .collect();
        let spec = t.forward(&phys).unwrap();
        let phys_energy: f64 = phys.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume();
        let spec_energy: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>()
            * g.freq_cell_volume()
            / (2.0 * PI).powi(g.d() as i32);
        assert!((phys_energy - spec_energy).abs() < 1e-10 * phys_energy.max(1.0));
    }

    #[test]
    fn rejects_wrong_length() {
        let g = grid_2pi(16);
        let t = SpectralTransformer::new(g);
        assert!(t.forward(&vec![Complex64::default(); 17]).is_err());
    }
}
