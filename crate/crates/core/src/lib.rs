//! Pseudospectral toolkit for nonlocal semilinear parabolic systems on the
//! torus: aggregation (gravitating-particle), Debye screening and
//! Nernst-Planck models with a quadratic drift nonlinearity driven by a
//! Poisson coupling.
//!
//! The crate has two halves:
//!
//! * a forward solver (`spectral`, `models`, `solver`, `diagnostics`) that
//!   integrates the mild-solution form of the system and measures decay
//!   profiles in weighted sup, `PM^a` and Besov norms, and
//! * a Fourier-side blow-up certificate (`certificate`) that runs a dyadic
//!   self-convolution recursion on lower-bound profiles, measures the
//!   per-level gains in log arithmetic, and estimates the divergence
//!   threshold for bump-type spectral data, optionally cross-checked against
//!   solver trajectories.
//!
//! `oracle` holds slow, independent reference implementations (direct-sum
//! Picard integration on a small frequency box, 1-D reductions of the kernel
//! and Duhamel convolution estimates) used to validate the fast paths.

pub mod certificate;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod oracle;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod threads;

pub use error::{CoreError, Result};
pub use num_complex::Complex64;
pub use spectral::dealias::{apply_dealias, dealias_mask, dealiased_product};
pub use spectral::field::SpectralField;
pub use spectral::grid::TorusGrid;
pub use spectral::multiplier::{
    apply_multiplier, heat_propagator, poisson_gradient, MultiplierSpec,
};
pub use spectral::transform::SpectralTransformer;

pub use certificate::{
    alpha_ln, besov_lowerbound, build_ladder, build_ladder_with, build_w0, certificate_report,
    convolve_level, estimate_threshold, ladder_time, peak_time_integral, t_star,
    verify_induction_step, verify_solution_barrier, BarrierLevel, BarrierStatus,
    CertificateMode, CertificateReport, DivergenceRow, Ladder, LadderLevel, ReportLevel,
    ShapeGrid, StepMeasurement, ThresholdEstimate, BASE_CASE_GAP, DEFAULT_TIME_SUBINTERVALS,
};
pub use diagnostics::{
    besov_norm, decay_fit, envelope_pair, norm_report, pm_norm, weighted_sup_norm, BesovConfig,
    BesovResult, DecayModel, EnvelopePair, FitReport, NormReport, PmNorm, PsiProfile,
};
pub use models::{
    chandrasekhar_residual, nonlinear_term, Coupling, InitialData, Preset, SystemSpec,
};
pub use oracle::{
    duhamel_operator_quadrature, g_l1_norm, kernel_convolution_quadrature, kernel_region_split,
    picard_direct, DirectTrajectory, DuhamelRow, DuhamelTable, KernelNormRow, KernelNormTable,
    SmallLattice, DESK_BOUND,
};
pub use solver::{
    picard_solve, run, scaling_covariance_check, step, CovarianceCheck, CovarianceReport,
    PicardConfig, PicardRun, RunStatus, Scheme, Snapshot, SolverConfig, Trajectory,
};
