//! Node-centred sampling grids shared by kernels, masks and images.
//!
//! An [`Axis`] with `n` samples and spacing `dx` has nodes at
//! `x_j = (j - (n-1)/2) dx`, so it is symmetric about the origin and the
//! composite midpoint rule assigns each node a cell of width `dx`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Transverse position in metres. Line (1-D slice) grids use `y = 0`.
pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis needs at least one sample")]
    Empty,
    #[error("axis spacing must be finite and positive, got {0}")]
    BadSpacing(f64),
    #[error("data length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub samples: usize,
    pub spacing: f64,
}

impl Axis {
    pub fn new(samples: usize, spacing: f64) -> Result<Self, GridError> {
        if samples == 0 {
            return Err(GridError::Empty);
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(GridError::BadSpacing(spacing));
        }
        Ok(Self { samples, spacing })
    }

    /// Axis whose cells tile `extent` exactly (`spacing = extent / samples`).
    pub fn with_extent(samples: usize, extent: f64) -> Result<Self, GridError> {
        if samples == 0 {
            return Err(GridError::Empty);
        }
        Self::new(samples, extent / samples as f64)
    }

    #[inline]
    pub fn coord(&self, index: usize) -> f64 {
        (index as f64 - (self.samples as f64 - 1.0) / 2.0) * self.spacing
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.coord(i)).collect()
    }

    /// Distance from the centre to the outermost node.
    pub fn half_width(&self) -> f64 {
        (self.samples as f64 - 1.0) / 2.0 * self.spacing
    }

    /// Total length covered by the midpoint cells.
    pub fn extent(&self) -> f64 {
        self.samples as f64 * self.spacing
    }

    /// Fractional node index of `x`.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        x / self.spacing + (self.samples as f64 - 1.0) / 2.0
    }

    /// Bracketing node and interpolation weight for `x`, or `None` when `x`
    /// lies outside the outermost nodes (beyond a 1e-9 cell slack).
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let pos = self.position(x);
        let last = (self.samples - 1) as f64;
        if pos < -1e-9 || pos > last + 1e-9 {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        if self.samples == 1 {
            return Some((0, 0.0));
        }
        let i = (pos.floor() as usize).min(self.samples - 2);
        Some((i, pos - i as f64))
    }

    /// Index of the node at `x`, if `x` coincides with one within `tol` cells.
    pub fn node_at(&self, x: f64, tol: f64) -> Option<usize> {
        let pos = self.position(x);
        let r = pos.round();
        if (pos - r).abs() <= tol && r >= 0.0 && (r as usize) < self.samples {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Linear interpolation of `values` (one per node) at `x`.
    pub fn interpolate<T>(&self, values: &[T], x: f64) -> Option<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let (i, t) = self.locate(x)?;
        if self.samples == 1 {
            return Some(values[0]);
        }
        Some(values[i] * (1.0 - t) + values[i + 1] * t)
    }
}

/// A transverse sampling plane: a 1-D line (slice mode) or a 2-D rectangle.
///
/// 2-D data is stored row-major with `y` as the slow index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub x: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Axis>,
}

impl PlaneGrid {
    pub fn line(x: Axis) -> Self {
        Self { x, y: None }
    }

    pub fn square(axis: Axis) -> Self {
        Self { x: axis, y: Some(axis) }
    }

    pub fn rect(x: Axis, y: Axis) -> Self {
        Self { x, y: Some(y) }
    }

    pub fn is_line(&self) -> bool {
        self.y.is_none()
    }

    pub fn nx(&self) -> usize {
        self.x.samples
    }

    pub fn ny(&self) -> usize {
        self.y.map_or(1, |a| a.samples)
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major dimensions, slow index first.
    pub fn dims(&self) -> Vec<usize> {
        match self.y {
            Some(y) => vec![y.samples, self.x.samples],
            None => vec![self.x.samples],
        }
    }

    pub fn spacings(&self) -> Vec<f64> {
        match self.y {
            Some(y) => vec![y.spacing, self.x.spacing],
            None => vec![self.x.spacing],
        }
    }

    /// Quadrature weight of a single node (length for lines, area for planes).
    pub fn cell_measure(&self) -> f64 {
        self.x.spacing * self.y.map_or(1.0, |a| a.spacing)
    }

    #[inline]
    pub fn point(&self, index: usize) -> Point {
        let nx = self.nx();
        let ix = index % nx;
        let iy = index / nx;
        [self.x.coord(ix), self.y.map_or(0.0, |a| a.coord(iy))]
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Largest centred disk radius fully covered by the grid.
    pub fn inscribed_radius(&self) -> f64 {
        let hx = self.x.extent() / 2.0;
        match self.y {
            Some(y) => hx.min(y.extent() / 2.0),
            None => hx,
        }
    }

    /// Bilinear (or linear, for lines) interpolation at `p`.
    pub fn interpolate(&self, values: &[f64], p: Point) -> Option<f64> {
        match self.y {
            None => {
                if p[1].abs() > 1e-12 * self.x.spacing.max(1.0) {
                    return None;
                }
                self.x.interpolate(values, p[0])
            }
            Some(y) => {
                let (ix, tx) = self.x.locate(p[0])?;
                let (iy, ty) = y.locate(p[1])?;
                let nx = self.nx();
                let at = |i: usize, j: usize| values[j * nx + i];
                let ix1 = (ix + 1).min(nx - 1);
                let iy1 = (iy + 1).min(y.samples - 1);
                Some(
                    at(ix, iy) * (1.0 - tx) * (1.0 - ty)
                        + at(ix1, iy) * tx * (1.0 - ty)
                        + at(ix, iy1) * (1.0 - tx) * ty
                        + at(ix1, iy1) * tx * ty,
                )
            }
        }
    }

    pub fn check_len(&self, got: usize) -> Result<(), GridError> {
        if got != self.len() {
            return Err(GridError::LengthMismatch { expected: self.len(), got });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_centred() {
        let odd = Axis::new(5, 0.5).unwrap();
        assert_eq!(odd.coords(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let even = Axis::new(4, 1.0).unwrap();
        assert_eq!(even.coords(), vec![-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(even.extent(), 4.0);
        assert_eq!(even.half_width(), 1.5);
    }

    #[test]
    fn interpolation_is_exact_on_linear_data() {
        let axis = Axis::new(11, 0.1).unwrap();
        let vals: Vec<f64> = axis.coords().iter().map(|x| 3.0 * x + 1.0).collect();
        let v = axis.interpolate(&vals, 0.237).unwrap();
        assert!((v - (3.0 * 0.237 + 1.0)).abs() < 1e-12);
        assert!(axis.interpolate(&vals, 0.6).is_none());
    }

    #[test]
    fn bilinear_on_plane() {
        let g = PlaneGrid::square(Axis::new(5, 1.0).unwrap());
        let vals: Vec<f64> = g.points().iter().map(|p| p[0] + 2.0 * p[1]).collect();
        let v = g.interpolate(&vals, [0.3, -1.25]).unwrap();
        assert!((v - (0.3 - 2.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_axes() {
        assert_eq!(Axis::new(0, 1.0), Err(GridError::Empty));
        assert!(matches!(Axis::new(3, -1.0), Err(GridError::BadSpacing(_))));
    }
}
