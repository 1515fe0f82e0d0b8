//! Two-thirds-rule dealiasing and the dealiased pointwise product.
//!
//! Quadratic products computed through the transform fold frequencies above
//! `n/3` back onto retained modes. Zeroing every mode with `3 |k_i| > n`
//! before and after the physical-space product makes the retained part of the
//! product exact: surviving pairs can only alias into modes that the mask
//! removes again.

use num_complex::Complex64;

use crate::error::Result;
use crate::spectral::grid::TorusGrid;
use crate::spectral::transform::SpectralTransformer;

/// True for modes kept by the two-thirds rule: `3 |k_i| <= n` on every axis.
pub fn dealias_mask(grid: &TorusGrid, flat_index: usize) -> bool {
    let k = grid.index_to_k(flat_index);
    let n = grid.n() as i64;
    k.iter().all(|&ki| 3 * ki.abs() <= n)
}

/// Zero every masked mode in place.
pub fn apply_dealias(grid: &TorusGrid, coeffs: &mut [Complex64]) {
    for (i, v) in coeffs.iter_mut().enumerate() {
        if !dealias_mask(grid, i) {
            *v = Complex64::default();
        }
    }
}

/// Coefficients of the product `a * b` from coefficient inputs, dealiased on
/// both sides of the physical-space multiplication.
pub fn dealiased_product(
    transformer: &SpectralTransformer,
    a_hat: &[Complex64],
    b_hat: &[Complex64],
) -> Result<Vec<Complex64>> {
    let grid = *transformer.grid();
    if a_hat.len() != grid.len() || b_hat.len() != grid.len() {
        return Err(crate::error::CoreError::ShapeMismatch(format!(
            "dealiased product expects {} coefficients, got {} and {}",
            grid.len(),
            a_hat.len(),
            b_hat.len()
        )));
    }
    let mut a = a_hat.to_vec();
    let mut b = b_hat.to_vec();
    apply_dealias(&grid, &mut a);
    apply_dealias(&grid, &mut b);
    transformer.inverse_in_place(&mut a);
    transformer.inverse_in_place(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    transformer.forward_in_place(&mut a);
    apply_dealias(&grid, &mut a);
    Ok(a)
}
