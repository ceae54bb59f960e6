//! Field dumps: a little-endian binary format with an `(n, L)` header and a
//! CSV format with one grid point per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const MAGIC: &[u8; 8] = b"FSPFLD01";

fn io_err(e: std::io::Error) -> Error {
    Error::Other(format!("i/o: {e}"))
}

/// Magic, `n` as u64, `L` as f64, then `n^3` values in row-major order.
pub fn write_field(path: &Path, u: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&(u.grid().n() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&u.grid().length().to_le_bytes()).map_err(io_err)?;
    for v in u.values() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_field(path: &Path) -> Result<Field> {
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Other(format!("{}: not a field dump", path.display())));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io_err)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(io_err)?;
    let grid = Grid::new(n, f64::from_le_bytes(b8))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8).map_err(io_err)?;
        values.push(f64::from_le_bytes(b8));
    }
    Field::new(grid, values)
}

/// `# n=.. L=..` header line, then `x,y,z,u` rows.
pub fn write_field_csv(path: &Path, u: &Field) -> Result<()> {
    let g = u.grid();
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "# n={} L={:.17e}", g.n(), g.length()).map_err(io_err)?;
    writeln!(w, "x,y,z,u").map_err(io_err)?;
    for (idx, v) in u.values().iter().enumerate() {
        let [x, y, z] = g.point(idx);
        writeln!(w, "{x:.17e},{y:.17e},{z:.17e},{v:.17e}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
