//! Per-step diagnostics as CSV with a frozen column order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::BalanceReport;
use crate::error::{Error, Result};
use crate::num::Real;

/// Column names in output order. New columns are only ever appended.
pub const CSV_COLUMNS: [&str; 25] = [
    "step",
    "t",
    "E_total",
    "P_u",
    "P_theta",
    "P_theta_sq",
    "D_E",
    "D_E_time",
    "D_E_visc_alpha",
    "D_E_upwind",
    "D_s1",
    "D_s2",
    "D_s3",
    "R_s",
    "R_B1",
    "R_B2",
    "res_energy",
    "res_entropy",
    "res_ballistic",
    "min_rho",
    "max_rho",
    "min_theta",
    "max_theta",
    "mass",
    "newton_iters",
];

/// One CSV line (without newline) for a report. Floats use the shortest
/// representation that parses back to the same value.
pub fn csv_row<T: Real>(r: &BalanceReport<T>) -> String {
    let floats = [
        r.t,
        r.energy.energy,
        r.energy.penalty_u,
        r.energy.penalty_theta,
        r.ballistic.penalty_theta_sq,
        r.energy.dissipation(),
        r.energy.dissipation_time,
        r.energy.dissipation_diffusion,
        r.energy.dissipation_upwind,
        r.entropy_boundary.d_s1,
        r.entropy_boundary.d_s2,
        r.entropy_boundary.d_s3,
        r.entropy_boundary.r_s,
        r.ballistic.r_b1,
        r.ballistic.r_b2,
        r.energy.residual,
        r.entropy_residual(),
        r.ballistic.residual,
        r.min_rho,
        r.max_rho,
        r.min_theta,
        r.max_theta,
        r.mass,
    ];
    let mut line = r.step.to_string();
    for x in floats {
        line.push(',');
        line.push_str(&format!("{x:?}"));
    }
    line.push(',');
    line.push_str(&r.newton_iters.to_string());
    line
}

/// Streams rows to a writer; the header is written on creation.
pub struct DiagnosticsCsv<W: Write> {
    out: W,
}

impl<W: Write> DiagnosticsCsv<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{}", CSV_COLUMNS.join(","))?;
        Ok(DiagnosticsCsv { out })
    }

    pub fn write<T: Real>(&mut self, r: &BalanceReport<T>) -> std::io::Result<()> {
        writeln!(self.out, "{}", csv_row(r))
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes the header and one row per report.
pub fn write_diagnostics_csv<T: Real>(
    reports: &[BalanceReport<T>],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = DiagnosticsCsv::new(BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
    for r in reports {
        w.write(r).map_err(|e| Error::io(path, e))?;
    }
    w.finish().map_err(|e| Error::io(path, e))?;
    Ok(())
}
