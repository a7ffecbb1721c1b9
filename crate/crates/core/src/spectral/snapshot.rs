//! Field snapshot files.
//!
//! Binary layout (little-endian): the four bytes `SMIX`, a `u32` format
//! version, a `u32` resolution `n`, then `n²` `f64` samples in row-major
//! order (`y` outer, `x` inner).

use std::io::{Read, Write};
use std::path::Path;

use super::ScalarField;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SMIX";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(field.n() as u32).to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ScalarField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a snapshot file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    super::fft::check_resolution(n)?;
    let mut values = Vec::with_capacity(n * n);
    let mut buf = [0u8; 8];
    for _ in 0..n * n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    ScalarField::from_values(n, values)
}

pub fn save_snapshot(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_snapshot(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}

/// Plot-friendly `x,y,value` export.
pub fn write_csv<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    writeln!(w, "x,y,value")?;
    let n = field.n();
    let h = field.spacing();
    for j in 0..n {
        for i in 0..n {
            writeln!(w, "{},{},{}", i as f64 * h, j as f64 * h, field.values()[j * n + i])?;
        }
    }
    Ok(())
}
