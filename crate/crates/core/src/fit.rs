//! Levenberg-Marquardt fit of an isotropic Gaussian on log intensity.
//!
//! Model: `ln v = ln A - 2 |r - c|^2 / w^2`, so `w` is the e^-2 radius.
//! Only samples above `1e-3` of the peak enter the fit. The start point is
//! taken from intensity-weighted second moments (`w = 2 sigma`).

use crate::grid::PlaneGrid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FIT_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("image has no positive samples")]
    NoSignal,
    #[error("need at least {need} samples above the fit floor, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("fit diverged")]
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: [f64; 2],
    /// e^-2 radius.
    pub radius: f64,
    /// RMS residual of the log-intensity fit.
    pub residual_rms: f64,
    pub samples: usize,
    pub iterations: usize,
    pub converged: bool,
}

struct Sample {
    x: f64,
    y: f64,
    ln_v: f64,
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let (top, rest) = a.split_at_mut(r);
            for (x, p) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Parameter vector: `[ln A, cx, (cy), w]`.
fn residuals(p: &[f64], data: &[Sample], plane: bool) -> Vec<f64> {
    let w = p[p.len() - 1];
    let (cx, cy) = (p[1], if plane { p[2] } else { 0.0 });
    data.iter()
        .map(|s| {
            let r2 = (s.x - cx).powi(2) + if plane { (s.y - cy).powi(2) } else { 0.0 };
            s.ln_v - (p[0] - 2.0 * r2 / (w * w))
        })
        .collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn fit_gaussian(grid: &PlaneGrid, values: &[f64]) -> Result<GaussianFit, FitError> {
    let plane = !grid.is_line();
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(FitError::NoSignal);
    }
    let floor = FIT_FLOOR * peak;
    let mut data = Vec::new();
    let (mut m0, mut mx, mut my) = (0.0, 0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        if v > floor {
            let p = grid.point(i);
            data.push(Sample { x: p[0], y: p[1], ln_v: v.ln() });
            m0 += v;
            mx += v * p[0];
            my += v * p[1];
        }
    }
    let npar = if plane { 4 } else { 3 };
    if data.len() < npar {
        return Err(FitError::TooFewSamples { need: npar, got: data.len() });
    }
    let (cx, cy) = (mx / m0, my / m0);
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if v > floor {
            let p = grid.point(i);
            m2 += v * ((p[0] - cx).powi(2) + if plane { (p[1] - cy).powi(2) } else { 0.0 });
        }
    }
    let dims = if plane { 2.0 } else { 1.0 };
    let sigma = (m2 / (m0 * dims)).sqrt().max(grid.x.spacing * 0.5);
    let mut p: Vec<f64> = if plane {
        vec![peak.ln(), cx, cy, 2.0 * sigma]
    } else {
        vec![peak.ln(), cx, 2.0 * sigma]
    };

    let mut r = residuals(&p, &data, plane);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let w = p[npar - 1];
        let (cx, cy) = (p[1], if plane { p[2] } else { 0.0 });
        let mut jtj = vec![vec![0.0; npar]; npar];
        let mut jtr = vec![0.0; npar];
        for (s, ri) in data.iter().zip(&r) {
            let dx = s.x - cx;
            let dy = if plane { s.y - cy } else { 0.0 };
            let r2 = dx * dx + dy * dy;
            // Jacobian of the model (residual = data - model).
            let mut j = vec![1.0, 4.0 * dx / (w * w)];
            if plane {
                j.push(4.0 * dy / (w * w));
            }
            j.push(4.0 * r2 / (w * w * w));
            for a in 0..npar {
                jtr[a] += j[a] * ri;
                for b in 0..npar {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for (k, row) in a.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-300);
            }
            let Some(step) = solve(a, jtr.clone()) else { break };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            if !(trial[npar - 1] > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let rt = residuals(&trial, &data, plane);
            let ct = cost(&rt);
            if ct <= c {
                let rel = step.iter().zip(&trial).map(|(s, t)| (s / t.abs().max(1e-300)).abs()).fold(0.0, f64::max);
                p = trial;
                r = rt;
                let done = (c - ct) <= 1e-15 * c.max(1e-300) || rel < 1e-12;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                converged = done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(FitError::Diverged);
    }
    Ok(GaussianFit {
        amplitude: p[0].exp(),
        center: [p[1], if plane { p[2] } else { 0.0 }],
        radius: p[npar - 1],
        residual_rms: (c / data.len() as f64).sqrt(),
        samples: data.len(),
        iterations,
        converged,
    })
}
