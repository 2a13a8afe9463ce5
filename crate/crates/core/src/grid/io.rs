//! Binary field dumps: a one-line ASCII header followed by raw little-endian
//! doubles in x-fastest order. Vector fields are written one file per component.

use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use crate::cache::atomic_write;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Cell,
    FaceX,
    FaceY,
    FaceZ,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Cell => "cell",
            FieldKind::FaceX => "face-x",
            FieldKind::FaceY => "face-y",
            FieldKind::FaceZ => "face-z",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cell" => FieldKind::Cell,
            "face-x" => FieldKind::FaceX,
            "face-y" => FieldKind::FaceY,
            "face-z" => FieldKind::FaceZ,
            _ => return None,
        })
    }

    pub fn face(c: usize) -> Self {
        [FieldKind::FaceX, FieldKind::FaceY, FieldKind::FaceZ][c]
    }
}

/// Writes one array; `dims` are those of the array itself (one larger than
/// the cell resolution along the face normal).
pub fn write_field(
    path: &Path,
    kind: FieldKind,
    dims: [usize; 3],
    h: f64,
    data: &[f64],
) -> Result<()> {
    if dims.iter().product::<usize>() != data.len() {
        return Err(Error::Shape(format!(
            "{} values for dims {dims:?}",
            data.len()
        )));
    }
    let header = format!(
        "field {} {} {} {} {:e}\n",
        kind.as_str(),
        dims[0],
        dims[1],
        dims[2],
        h
    );
    let mut bytes = Vec::with_capacity(header.len() + 8 * data.len());
    bytes.extend_from_slice(header.as_bytes());
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &bytes)
}

pub fn write_scalar_field(path: &Path, grid: &GridSpec, p: &ScalarField) -> Result<()> {
    p.check(grid)?;
    write_field(path, FieldKind::Cell, grid.n, grid.h, &p.data)
}

/// Writes `<stem>_x.field`, `<stem>_y.field`, `<stem>_z.field` in `dir`.
pub fn write_vector_field(
    dir: &Path,
    stem: &str,
    grid: &GridSpec,
    u: &VectorField,
) -> Result<Vec<PathBuf>> {
    u.check(grid)?;
    let mut out = Vec::new();
    for (c, axis) in ["x", "y", "z"].iter().enumerate() {
        let path = dir.join(format!("{stem}_{axis}.field"));
        write_field(
            &path,
            FieldKind::face(c),
            grid.face_dims(c),
            grid.h,
            u.comp(c),
        )?;
        out.push(path);
    }
    Ok(out)
}

/// Reads a dump back as (kind, dims, h, values).
pub fn read_field(path: &Path) -> Result<(FieldKind, [usize; 3], f64, Vec<f64>)> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let bad = || Error::Shape(format!("malformed field header in {}", path.display()));
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "field" {
        return Err(bad());
    }
    let kind = FieldKind::parse(parts[1]).ok_or_else(bad)?;
    let mut dims = [0usize; 3];
    for d in 0..3 {
        dims[d] = parts[2 + d].parse().map_err(|_| bad())?;
    }
    let h: f64 = parts[5].parse().map_err(|_| bad())?;
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    let count = dims.iter().product::<usize>();
    if raw.len() != 8 * count {
        return Err(Error::Shape(format!(
            "{}: expected {count} values, found {} bytes",
            path.display(),
            raw.len()
        )));
    }
    let data = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((kind, dims, h, data))
}
