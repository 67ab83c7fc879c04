//! Grid files, CSV tables and PGM previews.
//!
//! A grid file is one line of JSON (`{"dims":[..],"spacing":[..],"complex":b}`)
//! followed by little-endian `f64` samples in row-major order. Complex data
//! is stored as interleaved `(re, im)` pairs. Reading back is bit-exact.

use crate::grid::{Axis, GridError, PlaneGrid};
use crate::imaging::GhostImage;
use crate::propagation::GridKernel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad grid header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("grid payload holds {got} values, header expects {expected}")]
    Payload { expected: usize, got: usize },
    #[error("header dims {0:?} do not describe a line or plane")]
    Dims(Vec<usize>),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub complex: bool,
}

impl GridHeader {
    pub fn for_plane(grid: &PlaneGrid, complex: bool) -> Self {
        Self { dims: grid.dims(), spacing: grid.spacings(), complex }
    }

    pub fn values(&self) -> usize {
        self.dims.iter().product::<usize>() * if self.complex { 2 } else { 1 }
    }

    /// Inverse of [`GridHeader::for_plane`].
    pub fn plane(&self) -> Result<PlaneGrid, IoError> {
        match (self.dims.as_slice(), self.spacing.as_slice()) {
            ([n], [d]) => Ok(PlaneGrid::line(Axis::new(*n, *d)?)),
            ([ny, nx], [dy, dx]) => Ok(PlaneGrid::rect(Axis::new(*nx, *dx)?, Axis::new(*ny, *dy)?)),
            _ => Err(IoError::Dims(self.dims.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub header: GridHeader,
    pub data: Vec<f64>,
}

impl GridFile {
    pub fn real(grid: &PlaneGrid, values: &[f64]) -> Self {
        Self { header: GridHeader::for_plane(grid, false), data: values.to_vec() }
    }

    pub fn complex(header_dims: Vec<usize>, spacing: Vec<f64>, values: &[Complex64]) -> Self {
        let data = values.iter().flat_map(|v| [v.re, v.im]).collect();
        Self { header: GridHeader { dims: header_dims, spacing, complex: true }, data }
    }

    /// Correlation kernel with `dims = [n1, n2]` (coordinate 1 slow).
    pub fn kernel(k: &GridKernel) -> Self {
        Self::complex(
            vec![k.axis1.samples, k.axis2.samples],
            vec![k.axis1.spacing, k.axis2.spacing],
            &k.data,
        )
    }

    pub fn complex_values(&self) -> Option<Vec<Complex64>> {
        self.header
            .complex
            .then(|| self.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), IoError> {
        if self.data.len() != self.header.values() {
            return Err(IoError::Payload { expected: self.header.values(), got: self.data.len() });
        }
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self, IoError> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: GridHeader = serde_json::from_str(line.trim_end())?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 || bytes.len() / 8 != header.values() {
            return Err(IoError::Payload { expected: header.values(), got: bytes.len() / 8 });
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { header, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::read_from(File::open(path)?)
    }
}

/// `x,y,C` rows in grid order.
pub fn write_image_csv(img: &GhostImage, mut w: impl Write) -> Result<(), IoError> {
    writeln!(w, "x,y,C")?;
    for (i, c) in img.values().iter().enumerate() {
        let p = img.grid.point(i);
        writeln!(w, "{},{},{}", p[0], p[1], c)?;
    }
    w.flush()?;
    Ok(())
}

/// 8-bit binary PGM of `C`, scaled so `min C0 -> 0` and `max C -> 255`.
///
/// Rows are written with `+y` at the top. Line images become a single row.
pub fn write_image_pgm(img: &GhostImage, mut w: impl Write) -> Result<(), IoError> {
    let c = img.values();
    let lo = img.background.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let (nx, ny) = (img.grid.nx(), img.grid.ny());
    write!(w, "P5\n{nx} {ny}\n255\n")?;
    let mut buf = Vec::with_capacity(nx * ny);
    for row in (0..ny).rev() {
        for v in &c[row * nx..(row + 1) * nx] {
            let t = if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
            buf.push((t * 255.0).round() as u8);
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
