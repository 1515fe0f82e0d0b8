//! `compare-oracle`: run the same scenario through the spectral solver and
//! the direct-sum Picard reference and report the worst final-state
//! coefficient discrepancy on the shared frequency box. The two routes
//! share no numerical code, so agreement is evidence for both.

use std::path::Path;

use anyhow::{bail, Context, Result};

use nlps_core::{picard_direct, RunStatus, SmallLattice, SpectralTransformer};

use crate::config::RunConfig;

/// Largest reference cutoff; beyond this the direct solver stops being a
/// desk-checkable reference.
const MAX_RADIUS: i64 = 10;

/// Agreement gate on the final-state sup discrepancy.
const AGREEMENT_TOL: f64 = 1e-6;

pub fn run(config_path: &Path, radius: Option<i64>) -> Result<u8> {
    let cfg = RunConfig::load(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    let spec = cfg.model.build(cfg.grid.d)?;
    let grid = cfg.grid.build()?;
    if (grid.freq_spacing() - 1.0).abs() > 1e-12 {
        bail!(
            "the reference box needs an integer frequency lattice: set period = 2*pi, \
             got spacing {}",
            grid.freq_spacing()
        );
    }
    let transformer = SpectralTransformer::new(grid);
    let u0 = cfg.initial.realize(&transformer, spec.m)?;

    // Max-norm support radius of the initial data.
    let mut support = 0i64;
    for j in 0..spec.m {
        for (i, v) in u0.coeffs(j).iter().enumerate() {
            if v.norm() > 0.0 {
                let k = grid.index_to_k(i);
                support = support.max(k[0].abs()).max(k[1].abs()).max(k[2].abs());
            }
        }
    }
    let r = radius.unwrap_or(support);
    if r < 0 {
        bail!("the reference cutoff must be nonnegative, got {r}");
    }
    if r > MAX_RADIUS {
        bail!(
            "reference cutoff {r} exceeds the desk bound {MAX_RADIUS}; \
             pass --radius to truncate deliberately"
        );
    }

    let mut small = SmallLattice::zeros(grid.d(), r, spec.m)?;
    for j in 0..spec.m {
        for (i, v) in u0.coeffs(j).iter().enumerate() {
            if v.norm() > 0.0 {
                let k = grid.index_to_k(i);
                if k.iter().all(|c| c.abs() <= r) {
                    small.set(j, &k[..grid.d()], *v)?;
                }
            }
        }
    }

    let steps = (cfg.solver.t_end / cfg.solver.dt).round().max(1.0) as usize;
    let direct = picard_direct(&spec, &small, cfg.solver.t_end, steps)?;
    let traj = nlps_core::run(&spec, &transformer, &u0, &cfg.solver)?;
    if traj.status != RunStatus::Completed {
        bail!(
            "spectral run ended with {:?} at t={}; nothing to compare",
            traj.status,
            traj.final_time
        );
    }
    let final_spectral = &traj.snapshots.last().expect("runs keep the final state").field;
    let final_direct = direct.states.last().expect("the reference keeps the final node");

    let mut discrepancy = 0.0f64;
    for j in 0..spec.m {
        for (idx, &direct_amp) in final_direct.amps(j).iter().enumerate() {
            let k = final_direct.mode(idx);
            let spectral_amp = grid
                .k_to_index(&k[..grid.d()])
                .map(|i| final_spectral.coeffs(j)[i])
                .unwrap_or_default();
            discrepancy = discrepancy.max((direct_amp - spectral_amp).norm());
        }
    }
    println!(
        "max discrepancy {discrepancy:.6e} (cutoff {r}, {} modes, {steps} steps)",
        final_direct.len()
    );
    Ok(if discrepancy <= AGREEMENT_TOL { 0 } else { 4 })
}
