//! Spectral representation on a periodic box: grid geometry, transforms,
//! Fourier multipliers and dealiased products.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * physical domain `[0, L)^d`, collocation points `x_j = j L / n`;
//! * frequency lattice `xi = 2 pi k / L` with integer `k` in
//!   `{-n/2, ..., n/2 - 1}` per axis, stored in FFT order
//!   (`0, 1, ..., n/2 - 1, -n/2, ..., -1`), row-major across axes;
//! * the forward transform approximates `integral of u(x) exp(-i xi.x) dx`
//!   with trapezoidal weight `(L/n)^d`; the inverse divides the unnormalized
//!   inverse DFT by `L^d`. A constant field `u = 1` therefore has zero-mode
//!   coefficient `L^d`, and products in coefficient space carry a `1/L^d`
//!   convolution factor.

pub mod dealias;
pub mod field;
pub mod grid;
pub mod multiplier;
pub mod transform;
