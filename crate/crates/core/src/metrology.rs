//! Resolution, field of view, orientation and contrast read off a ghost image.

use crate::fit::{fit_gaussian, FitError, GaussianFit};
use crate::grid::PlaneGrid;
use crate::imaging::{pearson, GhostImage, ObjectMask};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Objects whose intensity correlates this well with their own inversion
/// cannot tell an erect image from an inverted one.
pub const INVERSION_SELF_CORRELATION_MAX: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetrologyError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("orientation undecidable: object correlates with its inversion at {0:.3}")]
    Undecidable(f64),
    #[error("background is not positive at the image peak ({0})")]
    NoBackground(f64),
    #[error("image grid is not a line or a plane the object can be sampled on")]
    Incompatible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Erect,
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub orientation: Orientation,
    pub erect_score: f64,
    pub inverted_score: f64,
    pub self_correlation: f64,
}

/// e^-2 radius of the image term, from a log-intensity Gaussian fit.
pub fn measure_psf(img: &GhostImage) -> Result<GaussianFit, MetrologyError> {
    Ok(fit_gaussian(&img.grid, img.image_term())?)
}

/// Field-of-view radius: `sqrt(2)` times the fitted e^-2 radius of the
/// image term of a uniform (or large, smooth) object.
///
/// The uniform-object image is the product of the two arm envelopes, so its
/// fitted radius is `1/sqrt(2)` of the single-envelope radius.
pub fn measure_fov(img: &GhostImage) -> Result<f64, MetrologyError> {
    Ok(std::f64::consts::SQRT_2 * measure_psf(img)?.radius)
}

/// `(max C - C0) / C0` at the point of largest `C`.
pub fn measure_contrast(img: &GhostImage) -> Result<f64, MetrologyError> {
    let i = img.peak_index();
    let c0 = img.background[i];
    if !(c0 > 0.0) {
        return Err(MetrologyError::NoBackground(c0));
    }
    Ok(img.signal[i] / c0)
}

/// Gaussian blur factor matrix `f[i][j] = exp(-2 (s_i - sign t_j)^2 / w^2)`.
fn blur_axis(scan: &[f64], obj: &[f64], sign: f64, w: f64) -> Vec<Vec<f64>> {
    scan.iter()
        .map(|&s| obj.iter().map(|&t| (-2.0 * (s - sign * t).powi(2) / (w * w)).exp()).collect())
        .collect()
}

/// `|T(sign r)|^2` blurred to resolution `w` and sampled on `scan`.
pub fn blurred_reference(obj: &ObjectMask, scan: &PlaneGrid, sign: f64, w: f64) -> Result<Vec<f64>, MetrologyError> {
    if obj.grid.is_line() != scan.is_line() {
        return Err(MetrologyError::Incompatible);
    }
    let t = obj.intensity();
    let fx = blur_axis(&scan.x.coords(), &obj.grid.x.coords(), sign, w);
    match (scan.y, obj.grid.y) {
        (None, None) => Ok(fx.iter().map(|row| row.iter().zip(&t).map(|(a, b)| a * b).sum()).collect()),
        (Some(sy), Some(oy)) => {
            let fy = blur_axis(&sy.coords(), &oy.coords(), sign, w);
            let (onx, ony) = (obj.grid.nx(), oy.samples);
            // Contract x first: tmp[oy][sx].
            let mut tmp = vec![0.0; ony * scan.nx()];
            for j in 0..ony {
                let row = &t[j * onx..(j + 1) * onx];
                for (i, f) in fx.iter().enumerate() {
                    tmp[j * scan.nx() + i] = f.iter().zip(row).map(|(a, b)| a * b).sum();
                }
            }
            let mut out = vec![0.0; scan.len()];
            for (jy, f) in fy.iter().enumerate() {
                for (j, &fa) in f.iter().enumerate() {
                    if fa < 1e-300 {
                        continue;
                    }
                    let src = &tmp[j * scan.nx()..(j + 1) * scan.nx()];
                    for (o, s) in out[jy * scan.nx()..(jy + 1) * scan.nx()].iter_mut().zip(src) {
                        *o += fa * s;
                    }
                }
            }
            Ok(out)
        }
        _ => Err(MetrologyError::Incompatible),
    }
}

/// Decide erect vs inverted by correlating the image term with the blurred
/// object and its point reflection.
///
/// `resolution` defaults to the image's PSF hint. The blur never drops below
/// two object-grid spacings.
pub fn detect_inversion(
    img: &GhostImage,
    obj: &ObjectMask,
    resolution: Option<f64>,
) -> Result<InversionReport, MetrologyError> {
    let self_correlation = obj.inversion_self_correlation();
    if self_correlation >= INVERSION_SELF_CORRELATION_MAX {
        return Err(MetrologyError::Undecidable(self_correlation));
    }
    let floor = 2.0 * obj.grid.x.spacing;
    let w = resolution.or(img.metadata.psf_hint).unwrap_or(floor).max(floor);
    let erect = blurred_reference(obj, &img.grid, 1.0, w)?;
    let inverted = blurred_reference(obj, &img.grid, -1.0, w)?;
    let s = img.image_term();
    let erect_score = pearson(s, &erect);
    let inverted_score = pearson(s, &inverted);
    let orientation = if inverted_score > erect_score { Orientation::Inverted } else { Orientation::Erect };
    Ok(InversionReport { orientation, erect_score, inverted_score, self_correlation })
}

/// Summary written next to every image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub psf_radius: Option<f64>,
    pub fit: Option<GaussianFit>,
    pub fov_radius: Option<f64>,
    pub contrast: Option<f64>,
    pub inversion: Option<InversionReport>,
    pub peak_value: f64,
    pub background_at_peak: f64,
    pub invariant_holds: bool,
    pub notes: Vec<String>,
}

impl ImageMetrics {
    /// Every metric that applies; failures are recorded as notes.
    pub fn collect(img: &GhostImage, obj: Option<&ObjectMask>) -> Self {
        let mut m = ImageMetrics::default();
        let i = img.peak_index();
        m.peak_value = img.signal[i] + img.background[i];
        m.background_at_peak = img.background[i];
        m.invariant_holds = img.invariant_holds();
        match measure_psf(img) {
            Ok(f) => {
                m.psf_radius = Some(f.radius);
                m.fov_radius = Some(std::f64::consts::SQRT_2 * f.radius);
                m.fit = Some(f);
            }
            Err(e) => m.notes.push(format!("fit: {e}")),
        }
        match measure_contrast(img) {
            Ok(c) => m.contrast = Some(c),
            Err(e) => m.notes.push(format!("contrast: {e}")),
        }
        if let Some(obj) = obj {
            match detect_inversion(img, obj, None) {
                Ok(r) => m.inversion = Some(r),
                Err(e) => m.notes.push(format!("inversion: {e}")),
            }
        }
        m
    }
}
