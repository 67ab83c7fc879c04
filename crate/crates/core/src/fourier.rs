//! FFT helpers.
//!
//! One Fourier convention is used throughout the crate:
//! `g~(f) = ∫ g(x) exp(-i 2π f·x) dx` (unitary in ordinary frequency).
//! Discrete transforms here are unnormalised; callers apply the `dx` / `df`
//! cell factors that turn the sums into midpoint-rule integrals.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Signed index of sample `j` in an origin-at-zero wrapped layout of length `n`.
#[inline]
pub fn wrapped_index(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub(crate) fn plan(n: usize, direction: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::<f64>::new();
    match direction {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    }
}

/// Reusable plan for in-place N-dimensional transforms of one shape.
pub struct NdPlan {
    dims: Vec<usize>,
    plans: Vec<Option<Arc<dyn Fft<f64>>>>,
}

/// Line and FFT scratch buffers for [`NdPlan::process`].
pub struct NdScratch {
    line: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl NdPlan {
    pub fn new(dims: &[usize], direction: Direction) -> Self {
        let plans = dims.iter().map(|&n| (n > 1).then(|| plan(n, direction))).collect();
        Self { dims: dims.to_vec(), plans }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scratch(&self) -> NdScratch {
        let longest = self.dims.iter().copied().max().unwrap_or(0);
        let fft = self.plans.iter().flatten().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        NdScratch { line: vec![Complex64::new(0.0, 0.0); longest], fft: vec![Complex64::new(0.0, 0.0); fft] }
    }

    /// Unnormalised transform of a row-major buffer (last index fastest).
    pub fn process(&self, data: &mut [Complex64], scratch: &mut NdScratch) {
        let total = self.len();
        assert_eq!(total, data.len(), "NdPlan: dims do not match buffer");
        let mut stride = 1usize;
        for axis in (0..self.dims.len()).rev() {
            let n = self.dims[axis];
            if let Some(fft) = &self.plans[axis] {
                let block = n * stride;
                if stride == 1 {
                    for chunk in data.chunks_exact_mut(n) {
                        fft.process_with_scratch(chunk, &mut scratch.fft);
                    }
                } else {
                    let line = &mut scratch.line[..n];
                    for outer in 0..total / block {
                        for inner in 0..stride {
                            let base = outer * block + inner;
                            for (k, v) in line.iter_mut().enumerate() {
                                *v = data[base + k * stride];
                            }
                            fft.process_with_scratch(line, &mut scratch.fft);
                            for (k, v) in line.iter().enumerate() {
                                data[base + k * stride] = *v;
                            }
                        }
                    }
                }
            }
            stride *= n;
        }
    }
}

/// In-place N-dimensional FFT of a row-major buffer (last index fastest).
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], direction: Direction) {
    let p = NdPlan::new(dims, direction);
    let mut s = p.scratch();
    p.process(data, &mut s);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_layout() {
        let idx: Vec<i64> = (0..5).map(|j| wrapped_index(j, 5)).collect();
        assert_eq!(idx, vec![0, 1, 2, -2, -1]);
        let idx: Vec<i64> = (0..4).map(|j| wrapped_index(j, 4)).collect();
        assert_eq!(idx, vec![0, 1, -2, -1]);
    }

    #[test]
    fn nd_round_trip() {
        let dims = [3usize, 4, 5];
        let orig: Vec<Complex64> =
            (0..60).map(|i| Complex64::new(i as f64 * 0.1, (i % 7) as f64)).collect();
        let mut data = orig.clone();
        fft_nd(&mut data, &dims, Direction::Forward);
        fft_nd(&mut data, &dims, Direction::Inverse);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / 60.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn nd_matches_direct_dft() {
        let dims = [2usize, 3];
        let orig: Vec<Complex64> =
            (0..6).map(|i| Complex64::new((i * i) as f64, -(i as f64))).collect();
        let mut data = orig.clone();
        fft_nd(&mut data, &dims, Direction::Forward);
        for k0 in 0..2 {
            for k1 in 0..3 {
                let mut s = Complex64::new(0.0, 0.0);
                for j0 in 0..2 {
                    for j1 in 0..3 {
                        let ph = -2.0 * std::f64::consts::PI
                            * ((j0 * k0) as f64 / 2.0 + (j1 * k1) as f64 / 3.0);
                        s += orig[j0 * 3 + j1] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((s - data[k0 * 3 + k1]).norm() < 1e-10);
            }
        }
    }
}
