//! On-disk snapshot format `NLPF1`: a magic line, a one-line JSON header and
//! the raw coefficient bytes, species-major, row-major within a species,
//! complex interleaved little-endian f64.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spectral::field::SpectralField;
use crate::spectral::grid::TorusGrid;

const MAGIC: &[u8] = b"NLPF1\n";
const LAYOUT: &str = "row-major complex interleaved little-endian float64";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    d: usize,
    n: usize,
    period: f64,
    m: usize,
    time: f64,
    layout: String,
}

/// Write a coefficient snapshot taken at simulation time `time`.
pub fn write_snapshot(w: &mut impl Write, field: &SpectralField, time: f64) -> Result<()> {
    let grid = field.grid();
    let header = Header {
        d: grid.d(),
        n: grid.n(),
        period: grid.period(),
        m: field.species(),
        time,
        layout: LAYOUT.to_string(),
    };
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(16 * grid.len());
    for j in 0..field.species() {
        buf.clear();
        for v in field.coeffs(j) {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Read a snapshot back; returns the field and the recorded time.
pub fn read_snapshot(r: &mut impl Read) -> Result<(SpectralField, f64)> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(CoreError::InvalidConfig(format!(
            "bad snapshot magic {:?}",
            &magic
        )));
    }
    let mut header_line = Vec::new();
    loop {
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        if b[0] == b'\n' {
            break;
        }
        header_line.push(b[0]);
        if header_line.len() > 4096 {
            return Err(CoreError::InvalidConfig(
                "snapshot header exceeds 4096 bytes".into(),
            ));
        }
    }
    let header: Header = serde_json::from_slice(&header_line)?;
    if header.layout != LAYOUT {
        return Err(CoreError::InvalidConfig(format!(
            "unsupported snapshot layout {:?}",
            header.layout
        )));
    }
    let grid = TorusGrid::new(header.d, header.n, header.period)?;
    let mut field = SpectralField::zeros(grid, header.m);
    let mut bytes = vec![0u8; 16 * grid.len()];
    for j in 0..header.m {
        r.read_exact(&mut bytes)?;
        let buf = field.coeffs_mut(j);
        for (i, chunk) in bytes.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            buf[i] = Complex64::new(re, im);
        }
    }
    Ok((field, header.time))
}
