//! Multi-species coefficient fields.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::spectral::grid::TorusGrid;
use crate::spectral::transform::SpectralTransformer;

/// Frequency-side state of `m` scalar species on a common grid.
///
/// Coefficients are stored species-major; each species buffer is the flat
/// row-major lattice of the grid. Fields are not assumed Hermitian: data with
/// one-sided spectral support (complex-valued in physical space) is a
/// first-class citizen.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: TorusGrid,
    species: usize,
    coeffs: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid, species: usize) -> Self {
        Self {
            grid,
            species,
            coeffs: vec![vec![Complex64::default(); grid.len()]; species],
        }
    }

    /// Build from an explicit per-mode rule `f(species, k, xi)`.
    pub fn from_modes(
        grid: TorusGrid,
        species: usize,
        mut f: impl FnMut(usize, &[i64; 3], &[f64; 3]) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(grid, species);
        for j in 0..species {
            for i in 0..grid.len() {
                let k = grid.index_to_k(i);
                let xi = grid.xi(i);
                out.coeffs[j][i] = f(j, &k, &xi);
            }
        }
        out
    }

    /// Transform per-species collocation samples into a coefficient field.
    pub fn from_physical(
        transformer: &SpectralTransformer,
        samples: &[Vec<Complex64>],
    ) -> Result<Self> {
        let grid = *transformer.grid();
        let mut coeffs = Vec::with_capacity(samples.len());
        for s in samples {
            coeffs.push(transformer.forward(s)?);
        }
        Ok(Self { grid, species: coeffs.len(), coeffs })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn coeffs(&self, j: usize) -> &[Complex64] {
        &self.coeffs[j]
    }

    pub fn coeffs_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.coeffs[j]
    }

    /// Coefficient at integer frequency `k` for species `j`.
    pub fn at(&self, j: usize, k: &[i64]) -> Option<Complex64> {
        self.grid.k_to_index(k).map(|i| self.coeffs[j][i])
    }

    /// Collocation samples of species `j`.
    pub fn to_physical(&self, transformer: &SpectralTransformer, j: usize) -> Result<Vec<Complex64>> {
        transformer.inverse(&self.coeffs[j])
    }

    /// Largest coefficient magnitude over all species.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for s in &self.coeffs {
            for v in s {
                let a = v.norm();
                if a > m {
                    m = a;
                }
            }
        }
        m
    }

    /// True when every coefficient is finite.
    pub fn all_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|s| s.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    /// Zero-mode coefficient (total mass) per species.
    pub fn masses(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|s| s[0]).collect()
    }

    /// `self += scale * other`, species- and mode-wise.
    pub fn add_scaled(&mut self, other: &Self, scale: Complex64) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: Complex64) {
        for a in self.coeffs.iter_mut() {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }

    /// Largest pointwise coefficient distance to `other`.
    pub fn max_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let mut m = 0.0f64;
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            for (x, y) in a.iter().zip(b) {
                let v = (x - y).norm();
                if v > m {
                    m = v;
                }
            }
        }
        Ok(m)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.species != other.species {
            return Err(CoreError::ShapeMismatch(
                "fields live on different grids or species counts".into(),
            ));
        }
        Ok(())
    }
}
