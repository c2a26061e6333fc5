//! Field serialization.
//!
//! CSV files start with a `#` schema line followed by a header row.
//! Binary blocks are little-endian: a `u64` node count `n`, then `n`
//! doubles for a [`Field`] or `n²` row-major doubles for a [`TensorField`].

use std::io::{Read, Write};

use super::field::{Field, TensorField};
use super::grid::{Grid1D, Grid2D};
use crate::error::{Error, Result};

pub const FIELD_CSV_SCHEMA: &str = "# smplab field csv v1";
pub const TENSOR_CSV_SCHEMA: &str = "# smplab tensor csv v1";

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

pub fn write_field_csv<W: Write>(mut out: W, f: &Field) -> Result<()> {
    writeln!(out, "{FIELD_CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "coordinate", "value"]).map_err(csv_err)?;
    for (i, v) in f.values().iter().enumerate() {
        w.serialize((i, f.grid().node(i), v)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field CSV back onto `grid`; coordinates are checked against it.
pub fn read_field_csv<R: Read>(input: R, grid: Grid1D) -> Result<Field> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut values = vec![f64::NAN; grid.n()];
    for rec in r.deserialize::<(usize, f64, f64)>() {
        let (i, x, v) = rec.map_err(csv_err)?;
        if i >= grid.n() || (x - grid.node(i)).abs() > 1e-9 * grid.length() {
            return Err(Error::Structural(format!("node {i} at {x} does not belong to the grid")));
        }
        values[i] = v;
    }
    Field::new(grid, values)
}

pub fn write_tensor_csv<W: Write>(mut out: W, w: &TensorField) -> Result<()> {
    writeln!(out, "{TENSOR_CSV_SCHEMA}")?;
    let base = w.grid().base();
    let n = base.n();
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["i", "j", "lambda", "mu", "value"]).map_err(csv_err)?;
    for i in 0..n {
        for j in 0..n {
            wr.serialize((i, j, base.node(i), base.node(j), w.get(i, j))).map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_field_bin<W: Write>(mut out: W, f: &Field) -> Result<()> {
    out.write_all(&(f.values().len() as u64).to_le_bytes())?;
    write_f64s(&mut out, f.values())
}

pub fn read_field_bin<R: Read>(mut input: R, grid: Grid1D) -> Result<Field> {
    let n = read_u64(&mut input)? as usize;
    if n != grid.n() {
        return Err(Error::Structural(format!("binary block has {n} nodes, grid has {}", grid.n())));
    }
    Field::new(grid, read_f64s(&mut input, n)?)
}

pub fn write_tensor_bin<W: Write>(mut out: W, w: &TensorField) -> Result<()> {
    out.write_all(&(w.grid().n() as u64).to_le_bytes())?;
    write_f64s(&mut out, w.values())
}

pub fn read_tensor_bin<R: Read>(mut input: R, grid: Grid1D) -> Result<TensorField> {
    let n = read_u64(&mut input)? as usize;
    if n != grid.n() {
        return Err(Error::Structural(format!("binary block has {n} nodes, grid has {}", grid.n())));
    }
    TensorField::new(Grid2D::new(grid), read_f64s(&mut input, n * n)?)
}

pub(crate) fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    input.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_csv_round_trip() {
        let g = Grid1D::new(-1.0, 1.0, 6).unwrap();
        let f = Field::from_fn(g, |x| x.sin() / 3.0);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(FIELD_CSV_SCHEMA));
        let back = read_field_csv(buf.as_slice(), g).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn binary_round_trips_are_exact() {
        let g = Grid1D::unit(5).unwrap();
        let f = Field::from_fn(g, |x| (7.0 * x).exp());
        let mut buf = Vec::new();
        write_field_bin(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 8 + 5 * 8);
        assert_eq!(read_field_bin(buf.as_slice(), g).unwrap(), f);

        let w = f.outer(&f).unwrap();
        let mut buf = Vec::new();
        write_tensor_bin(&mut buf, &w).unwrap();
        assert_eq!(read_tensor_bin(buf.as_slice(), g).unwrap().values(), w.values());
    }

    #[test]
    fn size_mismatch_is_structural() {
        let f = Field::zeros(Grid1D::unit(5).unwrap());
        let mut buf = Vec::new();
        write_field_bin(&mut buf, &f).unwrap();
        assert!(matches!(read_field_bin(buf.as_slice(), Grid1D::unit(4).unwrap()), Err(Error::Structural(_))));
    }
}
