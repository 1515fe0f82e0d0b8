//! `simulate`: integrate one configured scenario and write its artifacts —
//! `norms.csv` with the configured norm series, one `NLPF1` file per kept
//! state, and `run_summary.json` with the outcome.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use nlps_core::snapshot::write_snapshot;
use nlps_core::{norm_report, RunStatus, SpectralTransformer};

use crate::config::RunConfig;
use crate::output::{to_json_pretty, write_atomic};

/// Contents of `run_summary.json`. `wallclock` is elapsed seconds and is
/// the one field that varies between otherwise identical reruns.
#[derive(Debug, Serialize)]
struct RunSummary {
    status: RunStatus,
    final_time: f64,
    max_coeff: f64,
    wallclock: f64,
}

pub fn run(config_path: &Path, out_override: Option<&Path>) -> Result<u8> {
    let started = Instant::now();
    let cfg = RunConfig::load(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    let out: PathBuf = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set `output` in the config"))?;

    let spec = cfg.model.build(cfg.grid.d)?;
    let transformer = SpectralTransformer::new(cfg.grid.build()?);
    let u0 = cfg.initial.realize(&transformer, spec.m)?;
    let traj = nlps_core::run(&spec, &transformer, &u0, &cfg.solver)?;

    let every = cfg.diagnostics.every.max(1);
    let last = traj.snapshots.len() - 1;
    let mut csv = String::new();
    for (i, snap) in traj.snapshots.iter().enumerate() {
        if i % every != 0 && i != last {
            continue;
        }
        let report = norm_report(
            &transformer,
            &snap.field,
            snap.time,
            &cfg.diagnostics.thetas,
            &cfg.diagnostics.pm_exponents,
            cfg.diagnostics.besov.as_ref(),
        )?;
        if csv.is_empty() {
            csv.push_str(&report.csv_header());
            csv.push('\n');
        }
        csv.push_str(&report.csv_row());
        csv.push('\n');
    }
    write_atomic(&out.join("norms.csv"), csv.as_bytes())?;

    for (i, snap) in traj.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &snap.field, snap.time)?;
        write_atomic(&out.join(format!("snapshot_{i:04}.nlpf")), &buf)?;
    }

    let summary = RunSummary {
        status: traj.status,
        final_time: traj.final_time,
        max_coeff: traj.max_coeff,
        wallclock: started.elapsed().as_secs_f64(),
    };
    write_atomic(&out.join("run_summary.json"), &to_json_pretty(&summary)?)?;

    let label = match traj.status {
        RunStatus::Completed => "completed",
        RunStatus::OverflowDetected => "overflow_detected",
        RunStatus::PicardDiverged => "picard_diverged",
    };
    println!(
        "{label} final_time={} max_coeff={:e} snapshots={} -> {}",
        traj.final_time,
        traj.max_coeff,
        traj.snapshots.len(),
        out.display()
    );
    Ok(match traj.status {
        RunStatus::Completed => 0,
        // Any run that stopped short of its horizon lands in the overflow
        // exit class; the summary's status string disambiguates.
        RunStatus::OverflowDetected | RunStatus::PicardDiverged => 2,
    })
}
