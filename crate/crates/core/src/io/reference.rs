//! Binary storage of reference trajectories: little-endian `f64` throughout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ReferenceTrajectory;
use crate::mesh::Grid;
use crate::num::Real;
use crate::scheme::State;

const MAGIC: &[u8; 8] = b"PENFVREF";
const VERSION: u32 = 1;

/// Layout: magic, version `u32`, dim `u32`, n `u64`, length, snapshot step,
/// count `u64`, then per snapshot its time and the interleaved unknowns.
pub fn write_reference<T: Real>(r: &ReferenceTrajectory<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let f = |x: T| x.to_f64_lossy().to_le_bytes();
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(r.grid.dim() as u32).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(r.grid.n() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&f(r.grid.len())).map_err(io)?;
    w.write_all(&f(r.dt_snapshot)).map_err(io)?;
    w.write_all(&(r.snapshots.len() as u64).to_le_bytes())
        .map_err(io)?;
    for s in &r.snapshots {
        w.write_all(&f(s.t)).map_err(io)?;
        for x in s.to_vector() {
            w.write_all(&f(x)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

struct Input<R> {
    inner: R,
    path: String,
}

impl<R: Read> Input<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| Error::Format {
            path: self.path.clone(),
            reason: format!("truncated file ({e})"),
        })?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }
}

pub fn read_reference<T: Real>(path: impl AsRef<Path>) -> Result<ReferenceTrajectory<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Input {
        inner: BufReader::new(file),
        path: path.display().to_string(),
    };
    if &r.bytes::<8>()? != MAGIC {
        return Err(r.bad("not a reference trajectory"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.bad(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let n = r.u64()? as usize;
    let len = r.f64()?;
    let dt = r.f64()?;
    let count = r.u64()? as usize;
    let grid = Grid::new(dim, n, T::lit(len)).map_err(|e| r.bad(e.to_string()))?;
    let size = (dim + 2) * grid.num_cells();
    let mut snapshots = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let t = T::lit(r.f64()?);
        let mut x = Vec::with_capacity(size);
        for _ in 0..size {
            x.push(T::lit(r.f64()?));
        }
        snapshots.push(State::from_vector(&grid, &x, t)?);
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(r.bad("trailing data"));
    }
    Ok(ReferenceTrajectory {
        grid,
        dt_snapshot: T::lit(dt),
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::project_cells;

    #[test]
    fn round_trip_is_bitwise() {
        let g = Grid::<f64>::new(2, 8, 1.0).unwrap();
        let mut snaps = Vec::new();
        for m in 0..3 {
            let mut s = State::constant(&g, 1.0, &[0.0, 0.0], 1.0).unwrap();
            s.rho = project_cells(|x| 1.0 + 0.1 * (m as f64 + x[0]).sin(), &g);
            s.t = m as f64 * 0.1;
            snaps.push(s);
        }
        let r = ReferenceTrajectory {
            grid: g,
            dt_snapshot: 0.1,
            snapshots: snaps,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ref.bin");
        write_reference(&r, &p).unwrap();
        assert_eq!(read_reference::<f64>(&p).unwrap(), r);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_reference::<f64>(&p),
            Err(Error::Format { .. })
        ));
        std::fs::write(&p, b"garbage!").unwrap();
        assert!(matches!(
            read_reference::<f64>(&p),
            Err(Error::Format { .. })
        ));
    }
}
