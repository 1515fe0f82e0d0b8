//! `lemmas`: run one of the slow reference sweeps and write its CSV table.
//!
//! * `k_decay` tabulates the decay-weighted magnitude of the potential
//!   gradient convolved with a unit-normalized `(1+r)^{-2}` profile,
//! * `duhamel` tabulates both envelopes of the time-smoothed drift for a
//!   profile decaying in space and time,
//! * `chandrasekhar` evaluates the closed-form residual of the singular
//!   steady profile of the attractive model at dyadic radii.

use std::path::Path;

use anyhow::{Context, Result};

use nlps_core::{
    chandrasekhar_residual, duhamel_operator_quadrature, kernel_convolution_quadrature,
};

use crate::output::write_atomic;
use crate::LemmaSweep;

pub fn run(which: LemmaSweep, dim: usize, panels: usize, out: &Path) -> Result<u8> {
    let csv = match which {
        LemmaSweep::KDecay => {
            let table =
                kernel_convolution_quadrature(|r| (1.0 + r).powi(-2), 1.0, dim, 2.0, panels)
                    .context("kernel sweep")?;
            table.to_csv()
        }
        LemmaSweep::Duhamel => {
            // `(1+r)^{-2} (1+t)^{-1}` has unit norm in both envelopes.
            let table = duhamel_operator_quadrature(
                |r, t| (1.0 + r).powi(-2) / (1.0 + t),
                1.0,
                dim,
                2.0,
                panels,
            )
            .context("duhamel sweep")?;
            table.to_csv()
        }
        LemmaSweep::Chandrasekhar => {
            let radii: Vec<f64> = (-4..=6).map(|e| f64::powi(2.0, e)).collect();
            let rows = chandrasekhar_residual(dim, &radii)?;
            let mut csv = String::from("r,laplacian,transport,residual\n");
            for row in &rows {
                csv.push_str(&format!(
                    "{},{:.12e},{:.12e},{:.12e}\n",
                    row.r, row.laplacian, row.transport, row.residual
                ));
            }
            csv
        }
    };
    write_atomic(out, csv.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(0)
}
