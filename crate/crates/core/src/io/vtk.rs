//! Legacy VTK snapshots of cell data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::DomainMask;
use crate::num::Real;
use crate::scheme::State;

/// ASCII `STRUCTURED_POINTS` text with cell scalars `rho`, `theta`, `mask`
/// (the solid indicator) and the vector `u`.
pub fn snapshot_text<T: Real>(state: &State<T>, mask: &DomainMask) -> Result<String> {
    let g = state.grid();
    let nc = g.num_cells();
    if mask.num_cells() != nc {
        return Err(Error::FieldMismatch("mask does not match the state".into()));
    }
    let d = g.dim();
    let n = g.n();
    let h = g.h();
    let mut s = String::new();
    let dims: Vec<String> = (0..3)
        .map(|a| {
            if a < d {
                (n + 1).to_string()
            } else {
                "1".into()
            }
        })
        .collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "penfv t={:?}", state.t);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {}", dims.join(" "));
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING {h:?} {h:?} {h:?}");
    let _ = writeln!(s, "CELL_DATA {nc}");
    let mut scalars = |name: &str, kind: &str, value: &dyn Fn(usize) -> String| {
        let _ = writeln!(s, "SCALARS {name} {kind} 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for k in 0..nc {
            let _ = writeln!(s, "{}", value(k));
        }
    };
    scalars("rho", "double", &|k| format!("{:?}", state.rho.at(k)));
    scalars("theta", "double", &|k| format!("{:?}", state.theta.at(k)));
    scalars("mask", "int", &|k| {
        if mask.is_solid(k) {
            "1".into()
        } else {
            "0".into()
        }
    });
    let _ = writeln!(s, "VECTORS u double");
    for k in 0..nc {
        let c: Vec<String> = (0..3)
            .map(|j| {
                if j < d {
                    format!("{:?}", state.u.get(k, j))
                } else {
                    format!("{:?}", T::zero())
                }
            })
            .collect();
        let _ = writeln!(s, "{}", c.join(" "));
    }
    Ok(s)
}

pub fn write_snapshot<T: Real>(
    state: &State<T>,
    mask: &DomainMask,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = snapshot_text(state, mask)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
