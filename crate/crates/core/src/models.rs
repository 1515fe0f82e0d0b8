//! System specifications, initial-data constructors, the drift nonlinearity
//! and the singular-steady-state residual.
//!
//! The systems all share the shape
//!
//! ```text
//! d/dt u_j = Lap u_j + div( sum_{h,k} c_{jhk} u_h grad phi_k ),   Lap phi_k = u_k,
//! ```
//!
//! so a model is just the coupling tensor `c_{jhk}` (constant, or a bounded
//! physical-space field per entry) together with the species count.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spectral::dealias::apply_dealias;
use crate::spectral::field::SpectralField;
use crate::spectral::grid::TorusGrid;
use crate::spectral::multiplier::poisson_gradient;
use crate::spectral::transform::SpectralTransformer;

/// Named model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// One species, attractive coupling `+div(u grad phi)`.
    Gravitating,
    /// One species, repulsive coupling `-div(u grad phi)`.
    Debye,
    /// Two species of opposite charge; the potential is sourced by the
    /// charge difference.
    NernstPlanck,
    /// User-supplied coupling tensor.
    General,
}

/// Coupling tensor `c_{jhk}`, either constants or bounded scalar fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Flattened `m^3` constants, index `(j*m + h)*m + k`.
    Constant(Vec<f64>),
    /// Sparse spatially varying entries `(j, h, k, samples)`; samples are
    /// physical-space values, one per grid point, row-major.
    Field(Vec<(usize, usize, usize, Vec<f64>)>),
}

/// Dimension, species count, kernel exponent and coupling of one system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    pub d: usize,
    pub m: usize,
    /// Kernel homogeneity exponent. Only the Poisson case `alpha = 2` is
    /// realized by the multiplier stack; the field is kept for config
    /// fidelity and validated.
    pub alpha: f64,
    pub preset: Preset,
    pub coupling: Coupling,
}

impl SystemSpec {
    /// Build a named preset. `coupling` is required for (and only for)
    /// `Preset::General`.
    pub fn build_preset(
        preset: Preset,
        d: usize,
        m: usize,
        coupling: Option<Coupling>,
    ) -> Result<Self> {
        let coupling = match preset {
            Preset::Gravitating | Preset::Debye => {
                if m != 1 {
                    return Err(CoreError::InvalidConfig(format!(
                        "{preset:?} is a single-species model, got m={m}"
                    )));
                }
                let sign = if preset == Preset::Gravitating { 1.0 } else { -1.0 };
                Coupling::Constant(vec![sign])
            }
            Preset::NernstPlanck => {
                if m != 2 {
                    return Err(CoreError::InvalidConfig(format!(
                        "nernst_planck needs m=2, got m={m}"
                    )));
                }
                // Species 0 drifts down its own potential gradient and up the
                // other's; species 1 mirrors it. Equivalent to a single
                // potential sourced by the charge difference u1 - u0, with
                // species 0 repelled and species 1 attracted.
                let mut c = vec![0.0; 8];
                c[flat(2, 0, 0, 0)] = -1.0;
                c[flat(2, 0, 0, 1)] = 1.0;
                c[flat(2, 1, 1, 0)] = 1.0;
                c[flat(2, 1, 1, 1)] = -1.0;
                Coupling::Constant(c)
            }
            Preset::General => coupling.ok_or_else(|| {
                CoreError::InvalidConfig("general preset needs an explicit coupling".into())
            })?,
        };
        let spec = Self { d, m, alpha: 2.0, preset, coupling };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks: dimensions, tensor sizes, exponent range.
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return Err(CoreError::InvalidConfig(format!("d must be 2 or 3, got {}", self.d)));
        }
        if self.m == 0 {
            return Err(CoreError::InvalidConfig("m must be at least 1".into()));
        }
        if self.alpha != 2.0 {
            return Err(CoreError::InvalidConfig(format!(
                "only the Poisson coupling alpha=2 is implemented, got {}",
                self.alpha
            )));
        }
        if self.d >= 3 && !(1.0 < self.alpha && self.alpha < self.d as f64) {
            return Err(CoreError::InvalidConfig(format!(
                "alpha={} outside (1, d) for d={}",
                self.alpha, self.d
            )));
        }
        match &self.coupling {
            Coupling::Constant(c) => {
                if c.len() != self.m * self.m * self.m {
                    return Err(CoreError::InvalidConfig(format!(
                        "constant coupling needs m^3={} entries, got {}",
                        self.m * self.m * self.m,
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(CoreError::InvalidConfig("non-finite coupling entry".into()));
                }
            }
            Coupling::Field(entries) => {
                for (j, h, k, vals) in entries {
                    if *j >= self.m || *h >= self.m || *k >= self.m {
                        return Err(CoreError::InvalidConfig(format!(
                            "coupling index ({j},{h},{k}) out of range for m={}",
                            self.m
                        )));
                    }
                    if vals.iter().any(|v| !v.is_finite()) {
                        return Err(CoreError::InvalidConfig(
                            "non-finite coupling field sample".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if grid.d() != self.d {
            return Err(CoreError::ShapeMismatch(format!(
                "system is {}-dimensional, grid is {}-dimensional",
                self.d,
                grid.d()
            )));
        }
        if let Coupling::Field(entries) = &self.coupling {
            for (j, h, k, vals) in entries {
                if vals.len() != grid.len() {
                    return Err(CoreError::ShapeMismatch(format!(
                        "coupling field ({j},{h},{k}) has {} samples, grid has {}",
                        vals.len(),
                        grid.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn flat(m: usize, j: usize, h: usize, k: usize) -> usize {
    (j * m + h) * m + k
}

/// The divergence-form drift term `N_j = div( sum c_{jhk} u_h grad phi_k )`
/// in coefficient space: products are formed pointwise in physical space
/// after two-thirds truncation, and the outer divergence contracts `i xi`
/// against the flux components. The zero mode is exactly zero.
pub fn nonlinear_term(
    spec: &SystemSpec,
    transformer: &SpectralTransformer,
    u: &SpectralField,
) -> Result<SpectralField> {
    let grid = *transformer.grid();
    spec.check_grid(&grid)?;
    if u.species() != spec.m {
        return Err(CoreError::ShapeMismatch(format!(
            "field has {} species, system has {}",
            u.species(),
            spec.m
        )));
    }
    if u.grid().n() != grid.n() || u.grid().period() != grid.period() {
        return Err(CoreError::ShapeMismatch("field grid differs from transformer grid".into()));
    }
    let d = grid.d();
    let m = spec.m;

    // Physical-space copies of every species and every potential-gradient
    // component, dealiased on the way down.
    let mut u_phys = Vec::with_capacity(m);
    let mut g_phys = Vec::with_capacity(m);
    for h in 0..m {
        let mut hat = u.coeffs(h).to_vec();
        apply_dealias(&grid, &mut hat);
        let grad = poisson_gradient(&grid, &hat);
        transformer.inverse_in_place(&mut hat);
        u_phys.push(hat);
        let mut comps = Vec::with_capacity(d);
        for mut comp in grad {
            apply_dealias(&grid, &mut comp);
            transformer.inverse_in_place(&mut comp);
            comps.push(comp);
        }
        g_phys.push(comps);
    }

    let mut out = SpectralField::zeros(grid, m);
    let mut flux = vec![vec![Complex64::default(); grid.len()]; d];
    for j in 0..m {
        for comp in flux.iter_mut() {
            comp.iter_mut().for_each(|v| *v = Complex64::default());
        }
        let mut term = |h: usize, k: usize, weight: CouplingWeight| {
            for c in 0..d {
                let g = &g_phys[k][c];
                let uh = &u_phys[h];
                let comp = &mut flux[c];
                match weight {
                    CouplingWeight::Const(w) => {
                        for i in 0..comp.len() {
                            comp[i] += w * uh[i] * g[i];
                        }
                    }
                    CouplingWeight::Samples(vals) => {
                        for i in 0..comp.len() {
                            comp[i] += vals[i] * uh[i] * g[i];
                        }
                    }
                }
            }
        };
        match &spec.coupling {
            Coupling::Constant(c) => {
                for h in 0..m {
                    for k in 0..m {
                        let w = c[flat(m, j, h, k)];
                        if w != 0.0 {
                            term(h, k, CouplingWeight::Const(w));
                        }
                    }
                }
            }
            Coupling::Field(entries) => {
                for (ej, h, k, vals) in entries {
                    if *ej == j {
                        term(*h, *k, CouplingWeight::Samples(vals));
                    }
                }
            }
        }
        let target = out.coeffs_mut(j);
        for comp in flux.iter_mut() {
            transformer.forward_in_place(comp);
            apply_dealias(&grid, comp);
        }
        for (c, comp) in flux.iter().enumerate() {
            for i in 1..target.len() {
                let xi = grid.xi(i);
                target[i] += Complex64::new(0.0, xi[c]) * comp[i];
            }
        }
        target[0] = Complex64::default();
    }
    Ok(out)
}

enum CouplingWeight<'a> {
    Const(f64),
    Samples(&'a [f64]),
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, `exp(-1/t)`-glued between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// The reference frequency-space bump: smooth, nonnegative, supported in the
/// ball of radius 1/4 about `(3/4) e_1`, value `exp(-1/(1 - |4(xi - 3e_1/4)|^2))`.
pub fn bump_profile(xi: &[f64; 3]) -> f64 {
    let dx = xi[0] - 0.75;
    let rho2 = 16.0 * (dx * dx + xi[1] * xi[1] + xi[2] * xi[2]);
    if rho2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - rho2)).exp()
    }
}

/// A single prescribed coefficient for `custom_spectral` data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralMode {
    pub species: usize,
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

/// Initial-data constructors. Physical-space profiles are realized on the
/// grid and transformed; spectral profiles set coefficients directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `eta * (1 + |x|)^{-2}` with `|x|` the distance to the nearest
    /// periodic image of the origin, cut off smoothly before the wrap-around
    /// seam so the profile is smooth on the torus.
    WeightedDecay { eta: f64 },
    /// Nonnegative coefficients `A * bump_profile / mass`, normalized so the
    /// discrete frequency-space integral (sum times cell volume) equals `A`.
    FourierBump { amplitude: f64 },
    /// `2(d-2) / (eps^2 + |x|^2)`, the mollified singular steady profile.
    ChandrasekharMollified { eps: f64 },
    /// Explicit coefficient list.
    CustomSpectral { modes: Vec<SpectralMode> },
}

impl InitialData {
    /// Realize on the transformer's grid with `m` species. Profile variants
    /// fill every species with the same data; `custom_spectral` addresses
    /// species individually.
    pub fn realize(&self, transformer: &SpectralTransformer, m: usize) -> Result<SpectralField> {
        let grid = *transformer.grid();
        if m == 0 {
            return Err(CoreError::InvalidConfig("m must be at least 1".into()));
        }
        match self {
            InitialData::WeightedDecay { eta } => {
                let l = grid.period();
                let profile: Vec<Complex64> = (0..grid.len())
                    .map(|i| {
                        let r = grid.periodic_radius(&grid.point(i));
                        let chi = smooth_step((0.48 * l - r) / (0.13 * l));
                        Complex64::new(eta * chi / ((1.0 + r) * (1.0 + r)), 0.0)
                    })
                    .collect();
                from_physical_all_species(transformer, m, &profile)
            }
            InitialData::FourierBump { amplitude } => {
                let raw: Vec<f64> = (0..grid.len()).map(|i| bump_profile(&grid.xi(i))).collect();
                let cell = grid.freq_cell_volume();
                let mass: f64 = raw.iter().sum::<f64>() * cell;
                if mass <= 0.0 {
                    return Err(CoreError::InvalidConfig(format!(
                        "frequency lattice (spacing {}) has no points in the bump support",
                        grid.freq_spacing()
                    )));
                }
                let scale = amplitude / mass;
                let mut field = SpectralField::zeros(grid, m);
                for j in 0..m {
                    let buf = field.coeffs_mut(j);
                    for (i, v) in raw.iter().enumerate() {
                        buf[i] = Complex64::new(scale * v, 0.0);
                    }
                }
                Ok(field)
            }
            InitialData::ChandrasekharMollified { eps } => {
                if grid.d() < 3 {
                    return Err(CoreError::InvalidConfig(
                        "the singular steady profile needs d >= 3".into(),
                    ));
                }
                if *eps <= 0.0 {
                    return Err(CoreError::InvalidConfig("eps must be positive".into()));
                }
                let amp = 2.0 * (grid.d() as f64 - 2.0);
                let profile: Vec<Complex64> = (0..grid.len())
                    .map(|i| {
                        let r = grid.periodic_radius(&grid.point(i));
                        Complex64::new(amp / (eps * eps + r * r), 0.0)
                    })
                    .collect();
                from_physical_all_species(transformer, m, &profile)
            }
            InitialData::CustomSpectral { modes } => {
                let mut field = SpectralField::zeros(grid, m);
                for mode in modes {
                    if mode.species >= m {
                        return Err(CoreError::InvalidConfig(format!(
                            "mode species {} out of range for m={m}",
                            mode.species
                        )));
                    }
                    if mode.k.len() != grid.d() {
                        return Err(CoreError::InvalidConfig(format!(
                            "mode index {:?} has wrong dimension for d={}",
                            mode.k,
                            grid.d()
                        )));
                    }
                    let idx = grid.k_to_index(&mode.k).ok_or_else(|| {
                        CoreError::InvalidConfig(format!(
                            "mode index {:?} outside the lattice for n={}",
                            mode.k,
                            grid.n()
                        ))
                    })?;
                    field.coeffs_mut(mode.species)[idx] = Complex64::new(mode.re, mode.im);
                }
                Ok(field)
            }
        }
    }
}

fn from_physical_all_species(
    transformer: &SpectralTransformer,
    m: usize,
    profile: &[Complex64],
) -> Result<SpectralField> {
    let grid = *transformer.grid();
    let hat = transformer.forward(profile)?;
    let mut field = SpectralField::zeros(grid, m);
    for j in 0..m {
        field.coeffs_mut(j).copy_from_slice(&hat);
    }
    Ok(field)
}

/// One row of the steady-profile residual check.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyResidual {
    pub r: f64,
    pub laplacian: f64,
    pub transport: f64,
    pub residual: f64,
}

/// Residual of the singular steady profile `2(d-2) r^{-2}` of the attractive
/// model, by closed-form radial calculus. The radial Laplacian gives
/// `-4(d-2)(d-4) r^{-4}`; the potential gradient integrates exactly to
/// `phi'(r) = 2/r`, so the transport divergence gives `+4(d-2)(d-4) r^{-4}`
/// and the two cancel identically.
pub fn chandrasekhar_residual(d: usize, radii: &[f64]) -> Result<Vec<SteadyResidual>> {
    if d < 3 {
        return Err(CoreError::InvalidConfig(format!(
            "the steady profile needs d >= 3, got {d}"
        )));
    }
    let df = d as f64;
    radii
        .iter()
        .map(|&r| {
            if r <= 0.0 {
                return Err(CoreError::InvalidConfig(format!("radius must be positive, got {r}")));
            }
            let r4 = r * r * r * r;
            // u(r) = 2(d-2) r^{-2}; u'' + (d-1)/r u' = 2(d-2)(6 - 2(d-1)) r^{-4}
            let laplacian = -4.0 * (df - 2.0) * (df - 4.0) / r4;
            // r^{1-d} d/dr [ r^{d-1} * u(r) * phi'(r) ] with phi'(r) = 2/r
            let transport = 4.0 * (df - 2.0) * (df - 4.0) / r4;
            let residual = (laplacian + transport).abs();
            Ok(SteadyResidual { r, laplacian, transport, residual })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(d: usize, n: usize, period: f64) -> (TorusGrid, SpectralTransformer) {
        let g = TorusGrid::new(d, n, period).unwrap();
        (g, SpectralTransformer::new(g))
    }

    fn random_hermitian(grid: TorusGrid, m: usize, seed: u64) -> SpectralField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut field = SpectralField::zeros(grid, m);
        let phys: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let tr = SpectralTransformer::new(grid);
        for (j, samples) in phys.iter().enumerate() {
            let data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            field.coeffs_mut(j).copy_from_slice(&tr.forward(&data).unwrap());
        }
        field
    }

    #[test]
    fn preset_tensors() {
        let grav = SystemSpec::build_preset(Preset::Gravitating, 2, 1, None).unwrap();
        assert!(matches!(&grav.coupling, Coupling::Constant(c) if c == &vec![1.0]));
        let debye = SystemSpec::build_preset(Preset::Debye, 3, 1, None).unwrap();
        assert!(matches!(&debye.coupling, Coupling::Constant(c) if c == &vec![-1.0]));
        let np = SystemSpec::build_preset(Preset::NernstPlanck, 2, 2, None).unwrap();
        if let Coupling::Constant(c) = &np.coupling {
            let mut expect = vec![0.0; 8];
            expect[flat(2, 0, 0, 0)] = -1.0;
            expect[flat(2, 0, 0, 1)] = 1.0;
            expect[flat(2, 1, 1, 0)] = 1.0;
            expect[flat(2, 1, 1, 1)] = -1.0;
            assert_eq!(c, &expect);
        } else {
            panic!("expected constant coupling");
        }
        assert!(SystemSpec::build_preset(Preset::NernstPlanck, 2, 1, None).is_err());
        assert!(SystemSpec::build_preset(Preset::General, 2, 1, None).is_err());
    }

    #[test]
    fn constant_field_has_zero_drift() {
        let (g, tr) = setup(2, 16, 2.0 * PI);
        let spec = SystemSpec::build_preset(Preset::Gravitating, 2, 1, None).unwrap();
        let mut u = SpectralField::zeros(g, 1);
        u.coeffs_mut(0)[0] = Complex64::new(5.0 * g.period() * g.period(), 0.0);
        let n = nonlinear_term(&spec, &tr, &u).unwrap();
        assert_eq!(n.max_abs(), 0.0);
    }

    #[test]
    fn single_mode_pair_value() {
        // One mode at xi = (1,0): the only interacting pair is (eta, xi-eta)
        // = ((1,0),(1,0)), with divergence-times-gradient weight
        // xi.eta/|eta|^2 = 2 at xi = (2,0), and the product rule contributes
        // 1/L^d. Everything else vanishes.
        let (g, tr) = setup(2, 32, 2.0 * PI);
        let spec = SystemSpec::build_preset(Preset::Gravitating, 2, 1, None).unwrap();
        let mut u = SpectralField::zeros(g, 1);
        let i10 = g.k_to_index(&[1, 0]).unwrap();
        let amp = Complex64::new(0.3, -0.1);
        u.coeffs_mut(0)[i10] = amp;
        let nl = nonlinear_term(&spec, &tr, &u).unwrap();
        let l2 = g.period() * g.period();
        let expect = 2.0 * amp * amp / l2;
        let i20 = g.k_to_index(&[2, 0]).unwrap();
        assert!((nl.coeffs(0)[i20] - expect).norm() < 1e-14);
        for i in 0..g.len() {
            if i != i20 {
                assert!(nl.coeffs(0)[i].norm() < 1e-14, "stray value at {:?}", g.index_to_k(i));
            }
        }
    }

    #[test]
    fn debye_negates_gravitating_exactly() {
        let (g, tr) = setup(2, 16, 2.0 * PI);
        let u = random_hermitian(g, 1, 7);
        let grav = SystemSpec::build_preset(Preset::Gravitating, 2, 1, None).unwrap();
        let deb = SystemSpec::build_preset(Preset::Debye, 2, 1, None).unwrap();
        let ng = nonlinear_term(&grav, &tr, &u).unwrap();
        let nd = nonlinear_term(&deb, &tr, &u).unwrap();
        for i in 0..g.len() {
            assert_eq!(ng.coeffs(0)[i], -nd.coeffs(0)[i]);
        }
    }

    #[test]
    fn drift_term_is_quadratic() {
        let (g, tr) = setup(2, 16, 2.0 * PI);
        let u = random_hermitian(g, 1, 11);
        let spec = SystemSpec::build_preset(Preset::Gravitating, 2, 1, None).unwrap();
        let n1 = nonlinear_term(&spec, &tr, &u).unwrap();
        let mut u3 = u.clone();
        u3.scale(Complex64::new(3.0, 0.0));
        let n3 = nonlinear_term(&spec, &tr, &u3).unwrap();
        let mut scaled = n1.clone();
        scaled.scale(Complex64::new(9.0, 0.0));
        assert!(n3.max_diff(&scaled).unwrap() <= 1e-12 * n3.max_abs());
    }

    #[test]
    fn zero_mode_is_exactly_zero() {
        let (g, tr) = setup(2, 16, 2.0 * PI);
        let specs = [
            SystemSpec::build_preset(Preset::Gravitating, 2, 1, None).unwrap(),
            SystemSpec::build_preset(Preset::Debye, 2, 1, None).unwrap(),
        ];
        for spec in &specs {
            let u = random_hermitian(g, 1, 23);
            let n = nonlinear_term(spec, &tr, &u).unwrap();
            assert_eq!(n.coeffs(0)[0], Complex64::default());
        }
        let np = SystemSpec::build_preset(Preset::NernstPlanck, 2, 2, None).unwrap();
        let u = random_hermitian(g, 2, 29);
        let n = nonlinear_term(&np, &tr, &u).unwrap();
        assert_eq!(n.coeffs(0)[0], Complex64::default());
        assert_eq!(n.coeffs(1)[0], Complex64::default());
    }

    #[test]
    fn nernst_planck_matches_charge_difference_assembly() {
        // Assemble the two-species drift by hand from a single potential
        // sourced by u1 - u0 and compare against the preset tensor.
        let (g, tr) = setup(2, 16, 2.0 * PI);
        let np = SystemSpec::build_preset(Preset::NernstPlanck, 2, 2, None).unwrap();
        let u = random_hermitian(g, 2, 31);
        let fast = nonlinear_term(&np, &tr, &u).unwrap();

        let mut diff = u.coeffs(1).to_vec();
        for (v, a) in diff.iter_mut().zip(u.coeffs(0)) {
            *v -= a;
        }
        apply_dealias(&g, &mut diff);
        let grad = poisson_gradient(&g, &diff);
        let mut grad_phys = Vec::new();
        for mut comp in grad {
            apply_dealias(&g, &mut comp);
            tr.inverse_in_place(&mut comp);
            grad_phys.push(comp);
        }
        for (j, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let mut hat = u.coeffs(j).to_vec();
            apply_dealias(&g, &mut hat);
            tr.inverse_in_place(&mut hat);
            let mut manual = vec![Complex64::default(); g.len()];
            for (c, gp) in grad_phys.iter().enumerate() {
                let mut comp: Vec<Complex64> =
                    hat.iter().zip(gp).map(|(a, b)| sign * a * b).collect();
                tr.forward_in_place(&mut comp);
                apply_dealias(&g, &mut comp);
                for i in 1..g.len() {
                    manual[i] += Complex64::new(0.0, g.xi(i)[c]) * comp[i];
                }
            }
            let scale = fast.max_abs().max(1.0);
            for i in 0..g.len() {
                assert!(
                    (fast.coeffs(j)[i] - manual[i]).norm() < 1e-12 * scale,
                    "species {j} mode {:?}",
                    g.index_to_k(i)
                );
            }
        }
    }

    #[test]
    fn steady_profile_residual_values() {
        let rows = chandrasekhar_residual(3, &[2.0]).unwrap();
        assert!((rows[0].laplacian - 0.25).abs() < 1e-15);
        assert!((rows[0].transport + 0.25).abs() < 1e-15);
        assert!(rows[0].residual <= 1e-12);
        for d in [3, 4] {
            let radii: Vec<f64> = (1..40).map(|i| 0.25 * i as f64).collect();
            for row in chandrasekhar_residual(d, &radii).unwrap() {
                assert!(row.residual <= 1e-12, "d={d} r={}", row.r);
            }
        }
        assert!(chandrasekhar_residual(2, &[1.0]).is_err());
        assert!(chandrasekhar_residual(3, &[0.0]).is_err());
    }

    #[test]
    fn weighted_decay_respects_envelope() {
        let (g, tr) = setup(2, 64, 32.0 * PI);
        let eta = 0.7;
        let field = InitialData::WeightedDecay { eta }.realize(&tr, 1).unwrap();
        let phys = field.to_physical(&tr, 0).unwrap();
        let mut sup = 0.0f64;
        for (i, v) in phys.iter().enumerate() {
            assert!(v.im.abs() < 1e-12, "profile should be real");
            let r = g.periodic_radius(&g.point(i));
            sup = sup.max((1.0 + r) * (1.0 + r) * v.norm());
        }
        assert!(sup <= eta * (1.0 + 1e-10), "envelope violated: {sup}");
        // the origin attains the envelope: chi(0) = 1
        assert!((phys[0].re - eta).abs() < 1e-10);
    }

    #[test]
    fn fourier_bump_mass_support_sign() {
        let (g, _) = setup(2, 64, 32.0 * PI);
        let tr = SpectralTransformer::new(g);
        let amp = 3.5;
        let field = InitialData::FourierBump { amplitude: amp }.realize(&tr, 1).unwrap();
        let cell = g.freq_cell_volume();
        let mut mass = 0.0;
        for i in 0..g.len() {
            let v = field.coeffs(0)[i];
            assert_eq!(v.im, 0.0);
            assert!(v.re >= 0.0);
            let xi = g.xi(i);
            let dist2 =
                (xi[0] - 0.75) * (xi[0] - 0.75) + xi[1] * xi[1] + xi[2] * xi[2];
            if dist2 > 0.0625 {
                assert_eq!(v.re, 0.0, "support leak at xi={xi:?}");
            }
            if v.re > 0.0 {
                assert!(xi[0] >= 0.5 && xi[0] <= 1.0, "xi_1 out of band at {xi:?}");
            }
            mass += v.re * cell;
        }
        assert!((mass - amp).abs() < 1e-12 * amp);
    }

    #[test]
    fn fourier_bump_needs_resolution() {
        // Unit frequency spacing has no lattice point inside the bump.
        let (_, tr) = setup(2, 16, 2.0 * PI);
        assert!(InitialData::FourierBump { amplitude: 1.0 }.realize(&tr, 1).is_err());
    }

    #[test]
    fn mollified_steady_profile_center_value() {
        let (_, tr) = setup(3, 16, 8.0 * PI);
        let eps = 0.5;
        let field = InitialData::ChandrasekharMollified { eps }.realize(&tr, 1).unwrap();
        let phys = field.to_physical(&tr, 0).unwrap();
        assert!((phys[0].re - 2.0 / (eps * eps)).abs() < 1e-8);
        let (_, tr2) = setup(2, 16, 2.0 * PI);
        assert!(InitialData::ChandrasekharMollified { eps }.realize(&tr2, 1).is_err());
    }

    #[test]
    fn custom_spectral_places_modes() {
        let (_g, tr) = setup(2, 16, 2.0 * PI);
        let data = InitialData::CustomSpectral {
            modes: vec![
                SpectralMode { species: 0, k: vec![1, 0], re: 2.0, im: -1.0 },
                SpectralMode { species: 1, k: vec![-3, 2], re: 0.5, im: 0.0 },
            ],
        };
        let field = data.realize(&tr, 2).unwrap();
        assert_eq!(field.at(0, &[1, 0]).unwrap(), Complex64::new(2.0, -1.0));
        assert_eq!(field.at(1, &[-3, 2]).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(field.at(0, &[0, 0]).unwrap(), Complex64::default());
        let bad = InitialData::CustomSpectral {
            modes: vec![SpectralMode { species: 2, k: vec![0, 0], re: 1.0, im: 0.0 }],
        };
        assert!(bad.realize(&tr, 2).is_err());
    }

    #[test]
    fn smooth_step_profile() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = smooth_step(i as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
