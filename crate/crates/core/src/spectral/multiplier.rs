//! Diagonal Fourier multipliers and the Poisson-gradient operator.

use num_complex::Complex64;

use crate::spectral::field::SpectralField;
use crate::spectral::grid::TorusGrid;

/// A scalar symbol applied mode-wise, with an explicit zero-mode value so
/// singular symbols (negative powers of `|xi|`) stay well defined.
pub struct MultiplierSpec {
    symbol: Box<dyn Fn(&[f64; 3]) -> Complex64 + Send + Sync>,
    zero_mode: Complex64,
}

impl MultiplierSpec {
    pub fn new(
        symbol: impl Fn(&[f64; 3]) -> Complex64 + Send + Sync + 'static,
        zero_mode: Complex64,
    ) -> Self {
        Self { symbol: Box::new(symbol), zero_mode }
    }

    /// Symbol value at frequency `xi` (the zero-mode override applies at 0).
    pub fn eval(&self, xi: &[f64; 3]) -> Complex64 {
        if xi[0] == 0.0 && xi[1] == 0.0 && xi[2] == 0.0 {
            self.zero_mode
        } else {
            (self.symbol)(xi)
        }
    }

    /// Pointwise product of two multipliers.
    pub fn compose(self, other: Self) -> Self {
        let zero = self.zero_mode * other.zero_mode;
        Self {
            symbol: Box::new(move |xi| (self.symbol)(xi) * (other.symbol)(xi)),
            zero_mode: zero,
        }
    }
}

/// Heat semigroup symbol `exp(-t |xi|^2)`.
pub fn heat_propagator(t: f64) -> MultiplierSpec {
    MultiplierSpec::new(
        move |xi| {
            let n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            Complex64::new((-t * n2).exp(), 0.0)
        },
        Complex64::new(1.0, 0.0),
    )
}

/// Apply a multiplier to every species of a field, in place.
pub fn apply_multiplier(field: &mut SpectralField, spec: &MultiplierSpec) {
    let grid = *field.grid();
    for j in 0..field.species() {
        let buf = field.coeffs_mut(j);
        for (i, v) in buf.iter_mut().enumerate() {
            *v *= spec.eval(&grid.xi(i));
        }
    }
}

/// Gradient of the Poisson potential sourced by `coeffs`: component `c` of
/// the result is `-i xi_c / |xi|^2` times the input, with the zero mode set
/// to zero (the potential is only defined up to its mean).
pub fn poisson_gradient(grid: &TorusGrid, coeffs: &[Complex64]) -> Vec<Vec<Complex64>> {
    let d = grid.d();
    let mut out = vec![vec![Complex64::default(); coeffs.len()]; d];
    for i in 1..coeffs.len() {
        let xi = grid.xi(i);
        let n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if n2 == 0.0 {
            continue;
        }
        let v = coeffs[i] / n2;
        for (c, comp) in out.iter_mut().enumerate() {
            // -i xi_c / |xi|^2
            comp[i] = Complex64::new(0.0, -xi[c]) * v;
        }
    }
    out
}
