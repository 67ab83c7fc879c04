//! Ghost-image synthesis from propagated correlation kernels.
//!
//! With Gaussian moment factoring the pinhole/bucket photocurrent cross
//! correlation at scan point `r1` is
//!
//! ```text
//! C(r1) = C0(r1) + Cn ∫_A2 |Kn(r1, r)|^2 |T(r)|^2 dr + Cp ∫_A2 |Kp(r1, r)|^2 |T(r)|^2 dr
//! ```
//!
//! Normalization: detector filters have unit area, so
//! `C0 = eta^2 K11(r1, r1) ∫_A2 K22(r, r) |T|^2 dr` is the product of the mean
//! detected photon fluxes and `Cn`, `Cp` are `eta^2` times the dimensionless
//! temporal overlap `∬ h(t1) h(t2) |R(t2 - t1)|^2 dt1 dt2`.
//!
//! Line grids select the 1-D slice model: kernels contribute their slice
//! factors and integrals run along the line only.

use crate::exec::{map_indexed, Execution};
use crate::grid::{Axis, GridError, PlaneGrid, Point};
use crate::propagation::{
    fresnel_regime, propagate_closed_gsm, propagate_numeric, source_kernel, CoherenceCoordinate,
    CorrKernel, CorrelationKind, KernelRepr, OpticalPath, PropagationError, Regime,
};
use crate::source::{GsmSource, SourceClass, SourceError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Bucket radius, in envelope radii, from which the Parseval step holds.
pub const LARGE_BUCKET_FACTOR: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("transmission magnitude {0} exceeds 1")]
    Transmission(f64),
    #[error("quantum efficiency must lie in [0, 1], got {0}")]
    Efficiency(f64),
    #[error("integration time must be finite and positive, got {0}")]
    IntegrationTime(f64),
    #[error("bucket region contains no object-grid node")]
    EmptyBucket,
    #[error("need at least one image-bearing kernel")]
    NoKernel,
    #[error("scan and object grids must both be lines or both be planes")]
    Dimensionality,
    #[error("grid kernels are slices; use line grids")]
    GridKernelOnPlane,
    #[error("kernel grid does not cover the point ({0:?}, {1:?})")]
    KernelGridMismatch(Point, Point),
    #[error("unknown glyph {0:?}")]
    UnknownGlyph(char),
    #[error("{0}")]
    BadShape(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Complex amplitude transmission `T(r)` on a grid, `|T| <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMask {
    pub grid: PlaneGrid,
    values: Vec<Complex64>,
}

const GLYPHS: &[(char, [&str; 7])] = &[
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
];

impl ObjectMask {
    pub fn new(grid: PlaneGrid, values: Vec<Complex64>) -> Result<Self, ImagingError> {
        grid.check_len(values.len())?;
        if let Some(v) = values.iter().map(|v| v.norm()).find(|&m| !(m <= 1.0 + 1e-12)) {
            return Err(ImagingError::Transmission(v));
        }
        Ok(Self { grid, values })
    }

    fn from_fn(grid: PlaneGrid, f: impl Fn(Point) -> bool) -> Self {
        let values = grid
            .points()
            .into_iter()
            .map(|p| if f(p) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self { grid, values }
    }

    pub fn uniform(grid: PlaneGrid) -> Self {
        Self::from_fn(grid, |_| true)
    }

    pub fn opaque(grid: PlaneGrid) -> Self {
        Self::from_fn(grid, |_| false)
    }

    /// Unit transmission at the single node nearest `center`.
    pub fn point(grid: PlaneGrid, center: Point) -> Result<Self, ImagingError> {
        let ix = grid.x.locate(center[0]).map(|(i, t)| if t > 0.5 { i + 1 } else { i });
        let iy = match grid.y {
            Some(y) => y.locate(center[1]).map(|(i, t)| if t > 0.5 { i + 1 } else { i }),
            None => Some(0),
        };
        let (ix, iy) = match (ix, iy) {
            (Some(a), Some(b)) => (a.min(grid.nx() - 1), b.min(grid.ny() - 1)),
            _ => return Err(ImagingError::BadShape(format!("point {center:?} is off the grid"))),
        };
        let mut m = Self::opaque(grid);
        m.values[iy * grid.nx() + ix] = Complex64::new(1.0, 0.0);
        Ok(m)
    }

    pub fn disk(grid: PlaneGrid, center: Point, radius: f64) -> Self {
        Self::from_fn(grid, |p| (p[0] - center[0]).hypot(p[1] - center[1]) <= radius)
    }

    /// Two vertical slits of unequal width. The left slit (centred at
    /// `-separation/2`) has width `width`, the right one `2 width`, so the
    /// pattern is not inversion symmetric. `height` bounds the slits in `y`
    /// on planes and is ignored on lines.
    pub fn double_slit(grid: PlaneGrid, width: f64, separation: f64, height: f64) -> Result<Self, ImagingError> {
        if !(width > 0.0 && separation > 1.5 * width && height > 0.0) {
            return Err(ImagingError::BadShape("double slit needs width > 0, separation > 1.5 width, height > 0".into()));
        }
        let line = grid.is_line();
        Ok(Self::from_fn(grid, |p| {
            if !line && p[1].abs() > height / 2.0 {
                return false;
            }
            (p[0] + separation / 2.0).abs() <= width / 2.0 || (p[0] - separation / 2.0).abs() <= width
        }))
    }

    /// Block letter of height `size` centred at the origin (5 x 7 cells).
    pub fn letter(grid: PlaneGrid, glyph: char, size: f64) -> Result<Self, ImagingError> {
        let rows = GLYPHS
            .iter()
            .find(|(c, _)| *c == glyph.to_ascii_uppercase())
            .map(|(_, r)| r)
            .ok_or(ImagingError::UnknownGlyph(glyph))?;
        if grid.is_line() {
            return Err(ImagingError::BadShape("letters need a plane grid".into()));
        }
        let cell = size / 7.0;
        Ok(Self::from_fn(grid, |p| {
            let c = ((p[0] / cell) + 2.5).floor();
            let r = (3.5 - p[1] / cell).floor();
            if !(0.0..5.0).contains(&c) || !(0.0..7.0).contains(&r) {
                return false;
            }
            rows[r as usize].as_bytes()[c as usize] == b'#'
        }))
    }

    /// Multiply by `e^{i theta(r)}`.
    pub fn with_phase(mut self, theta: impl Fn(Point) -> f64) -> Self {
        for (i, v) in self.values.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, theta(self.grid.point(i)));
        }
        self
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `|T|^2` per node.
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Linear / bilinear resampling onto `grid`; zero outside the mask grid.
    pub fn resample(&self, grid: PlaneGrid) -> Self {
        let re: Vec<f64> = self.values.iter().map(|v| v.re).collect();
        let im: Vec<f64> = self.values.iter().map(|v| v.im).collect();
        let values = grid
            .points()
            .into_iter()
            .map(|p| match (self.grid.interpolate(&re, p), self.grid.interpolate(&im, p)) {
                (Some(a), Some(b)) => Complex64::new(a, b),
                _ => Complex64::new(0.0, 0.0),
            })
            .collect();
        Self { grid, values }
    }

    /// Pearson correlation of `|T(r)|^2` with `|T(-r)|^2`.
    pub fn inversion_self_correlation(&self) -> f64 {
        let a = self.intensity();
        // A featureless mask is its own inversion.
        if a.iter().all(|&v| v == a[0]) {
            return 1.0;
        }
        let b: Vec<f64> = (0..a.len()).map(|i| a[a.len() - 1 - i]).collect();
        pearson(&a, &b)
    }
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Bucket aperture `A2` on the object grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Bucket {
    /// Every node of the object grid.
    Full,
    Disk { radius: f64 },
}

impl Bucket {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Bucket::Full => true,
            Bucket::Disk { radius } => p[0].hypot(p[1]) <= radius,
        }
    }

    /// Radius of the largest centred disk inside the bucket.
    pub fn radius(&self, grid: &PlaneGrid) -> f64 {
        match *self {
            Bucket::Full => grid.inscribed_radius(),
            Bucket::Disk { radius } => radius.min(grid.inscribed_radius()),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct DetectorDescriptor {
    quantum_efficiency: f64,
    integration_time: f64,
    scan: PlaneGrid,
    #[serde(default = "full_bucket")]
    bucket: Bucket,
}

fn full_bucket() -> Bucket {
    Bucket::Full
}

/// Pinhole scan grid, bucket aperture and detector response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DetectorDescriptor", into = "DetectorDescriptor")]
pub struct DetectorModel {
    quantum_efficiency: f64,
    integration_time: f64,
    scan: PlaneGrid,
    bucket: Bucket,
}

impl TryFrom<DetectorDescriptor> for DetectorModel {
    type Error = ImagingError;
    fn try_from(d: DetectorDescriptor) -> Result<Self, Self::Error> {
        DetectorModel::new(d.quantum_efficiency, d.integration_time, d.scan, d.bucket)
    }
}

impl From<DetectorModel> for DetectorDescriptor {
    fn from(d: DetectorModel) -> Self {
        DetectorDescriptor {
            quantum_efficiency: d.quantum_efficiency,
            integration_time: d.integration_time,
            scan: d.scan,
            bucket: d.bucket,
        }
    }
}

impl DetectorModel {
    pub fn new(quantum_efficiency: f64, integration_time: f64, scan: PlaneGrid, bucket: Bucket) -> Result<Self, ImagingError> {
        if !(0.0..=1.0).contains(&quantum_efficiency) {
            return Err(ImagingError::Efficiency(quantum_efficiency));
        }
        if !(integration_time.is_finite() && integration_time > 0.0) {
            return Err(ImagingError::IntegrationTime(integration_time));
        }
        if let Bucket::Disk { radius } = bucket {
            if !(radius > 0.0) {
                return Err(ImagingError::EmptyBucket);
            }
        }
        Ok(Self { quantum_efficiency, integration_time, scan, bucket })
    }

    pub fn quantum_efficiency(&self) -> f64 {
        self.quantum_efficiency
    }
    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }
    pub fn scan(&self) -> &PlaneGrid {
        &self.scan
    }
    pub fn bucket(&self) -> Bucket {
        self.bucket
    }

    pub fn with_integration_time(mut self, t: f64) -> Result<Self, ImagingError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(ImagingError::IntegrationTime(t));
        }
        self.integration_time = t;
        Ok(self)
    }

    pub fn with_scan(mut self, scan: PlaneGrid) -> Self {
        self.scan = scan;
        self
    }

    pub fn bucket_sufficiently_large(&self, obj: &PlaneGrid, envelope_radius: f64) -> bool {
        self.bucket.radius(obj) >= LARGE_BUCKET_FACTOR * envelope_radius
    }
}

/// Temporal overlap factors of the image-bearing terms (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalFactors {
    pub cn_scale: f64,
    pub cp_scale: f64,
}

/// Gaussian post-detection filter of effective integration time `T_d`:
/// standard deviation `T_d / 4`, unit area.
pub fn detector_filter(t: f64, integration_time: f64) -> f64 {
    let s = integration_time / 4.0;
    (-t * t / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
}

/// `∬ h(t1) h(t2) exp(-c (t2 - t1)^2) dt1 dt2` by 2-D midpoint quadrature.
fn filtered_overlap(integration_time: f64, c: f64) -> f64 {
    let s = integration_time / 4.0;
    let half = 6.0 * s;
    let corr = 1.0 / c.sqrt();
    let step = (s.min(corr) / 20.0).min(2.0 * half / 240.0);
    let n = ((2.0 * half / step).ceil() as usize).clamp(241, 4001);
    let dt = 2.0 * half / n as f64;
    let t: Vec<f64> = (0..n).map(|i| -half + (i as f64 + 0.5) * dt).collect();
    let h: Vec<f64> = t.iter().map(|&x| detector_filter(x, integration_time) * dt).collect();
    let mut sum = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let d = t[j] - t[i];
            row += h[j] * (-c * d * d).exp();
        }
        sum += h[i] * row;
    }
    let mass: f64 = h.iter().sum();
    sum / (mass * mass)
}

/// Temporal factors for `src` seen through the detector filters.
///
/// Classical correlations have `|R(tau)|^2 = exp(-tau^2/T0^2)`; the quantum
/// phase-sensitive one `exp(-2 tau^2/T0^2)`. Both scales tend to one as
/// `T_d / T0 -> 0`.
pub fn temporal_factors(src: &GsmSource, det: &DetectorModel) -> TemporalFactors {
    let t0 = src.coherence_time();
    let td = det.integration_time();
    let classical = filtered_overlap(td, 1.0 / (t0 * t0));
    let cp_scale = match src.class() {
        SourceClass::Thermal => 0.0,
        SourceClass::ClassicalPhaseSensitive => classical,
        SourceClass::QuantumPhaseSensitive => filtered_overlap(td, 2.0 / (t0 * t0)),
    };
    let cn_scale = if src.class() == SourceClass::Thermal { classical } else { 0.0 };
    TemporalFactors { cn_scale, cp_scale }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImageMetadata {
    pub source_class: Option<SourceClass>,
    pub regime: Option<Regime>,
    pub fresnel_product: Option<f64>,
    pub plane: String,
    pub mode: String,
    pub normalization: String,
    /// How the quantum prefactor was fixed, when one is involved.
    pub kappa_convention: Option<String>,
    pub bucket_sufficiently_large: bool,
    /// Expected e^-2 PSF radius, used to blur reference objects.
    pub psf_hint: Option<f64>,
    pub notes: Vec<String>,
}

pub const NORMALIZATION: &str = "unit-area Gaussian filters (std T_d/4); C0 = eta^2 K11(r1,r1) ∫A2 K22|T|^2; \
Cn,Cp = eta^2 ∬h h |R|^2; pinhole is a point sampler";

pub const KAPPA_CONVENTION: &str = "kappa = peak of inverse transform of sqrt(gn(1+gn)), transform g~(f) = ∫ g e^{-i2πf·x} dx";

/// Scanned correlation `C(r1) = C0(r1) + S(r1)`.
///
/// The image-bearing term `S` and the background `C0` are stored apart: `S`
/// can sit many orders of magnitude below `C0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostImage {
    pub grid: PlaneGrid,
    pub signal: Vec<f64>,
    pub background: Vec<f64>,
    pub cn: f64,
    pub cp: f64,
    pub metadata: ImageMetadata,
}

impl GhostImage {
    /// `C = C0 + S` per scan point.
    pub fn values(&self) -> Vec<f64> {
        self.signal.iter().zip(&self.background).map(|(s, b)| s + b).collect()
    }

    /// `C - C0` per scan point.
    pub fn image_term(&self) -> &[f64] {
        &self.signal
    }

    /// `C >= C0 (1 - 1e-12)` everywhere.
    pub fn invariant_holds(&self) -> bool {
        self.signal.iter().zip(&self.background).all(|(s, b)| *s >= -1e-12 * b.abs())
    }

    /// Index of the largest `C`.
    pub fn peak_index(&self) -> usize {
        let v = self.values();
        (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0)
    }
}

/// Nodes of the object grid inside the bucket, weighted by `|T|^2 dA`.
fn bucket_weights(obj: &ObjectMask, bucket: Bucket) -> Result<Vec<f64>, ImagingError> {
    let da = obj.grid.cell_measure();
    let mut any = false;
    let w = obj
        .values
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if bucket.contains(obj.grid.point(i)) {
                any = true;
                t.norm_sqr() * da
            } else {
                0.0
            }
        })
        .collect();
    if !any {
        return Err(ImagingError::EmptyBucket);
    }
    Ok(w)
}

/// `F(u1, u) = exp(-2 (u1^2 + u^2)/a^2 - 2 (u ∓ u1)^2/w^2)`, one axis of `|K|^2 / |A|^2`.
fn axis_factor(g: &crate::propagation::ClosedGaussian, s: &Axis, o: &Axis) -> Vec<f64> {
    let a2 = g.envelope_radius * g.envelope_radius;
    let w2 = g.coherence_width * g.coherence_width;
    let sign = match g.coordinate {
        CoherenceCoordinate::Difference => -1.0,
        CoherenceCoordinate::Sum => 1.0,
    };
    let oc = o.coords();
    let mut out = Vec::with_capacity(s.samples * o.samples);
    for u1 in s.coords() {
        for &u in &oc {
            let c = u + sign * u1;
            out.push((-2.0 * (u1 * u1 + u * u) / a2 - 2.0 * c * c / w2).exp());
        }
    }
    out
}

/// `∫ |K(r1, r)|^2 W(r)` for every scan point, `W` already carrying `dA`.
fn magnitude_term(
    kern: &CorrKernel,
    scan: &PlaneGrid,
    obj: &PlaneGrid,
    weights: &[f64],
    exec: Execution,
) -> Result<Vec<f64>, ImagingError> {
    if scan.is_line() != obj.is_line() {
        return Err(ImagingError::Dimensionality);
    }
    match &kern.repr {
        KernelRepr::Closed(g) => {
            let fx = axis_factor(g, &scan.x, &obj.x);
            let (nsx, nox) = (scan.nx(), obj.nx());
            match (scan.y, obj.y) {
                (Some(sy), Some(oy)) => {
                    let amp2 = g.amplitude.norm_sqr();
                    let fy = axis_factor(g, &sy, &oy);
                    let noy = oy.samples;
                    // stage[ix1][iy] = Σ_ix F(x1, x) W(x, y)
                    let stage: Vec<Vec<f64>> = map_indexed(exec, nsx, |ix1| {
                        let f = &fx[ix1 * nox..(ix1 + 1) * nox];
                        (0..noy)
                            .map(|iy| f.iter().zip(&weights[iy * nox..(iy + 1) * nox]).map(|(a, b)| a * b).sum())
                            .collect()
                    });
                    let rows: Vec<Vec<f64>> = map_indexed(exec, sy.samples, |iy1| {
                        let f = &fy[iy1 * noy..(iy1 + 1) * noy];
                        stage
                            .iter()
                            .map(|col| amp2 * f.iter().zip(col).map(|(a, b)| a * b).sum::<f64>())
                            .collect()
                    });
                    Ok(rows.concat())
                }
                _ => {
                    let amp = g.amplitude.norm();
                    Ok(map_indexed(exec, nsx, |ix1| {
                        amp * fx[ix1 * nox..(ix1 + 1) * nox].iter().zip(weights).map(|(a, b)| a * b).sum::<f64>()
                    }))
                }
            }
        }
        KernelRepr::Grid(g) => {
            if !scan.is_line() {
                return Err(ImagingError::GridKernelOnPlane);
            }
            let oc = obj.x.coords();
            let sc = scan.x.coords();
            let rows: Vec<Result<f64, ImagingError>> = map_indexed(exec, sc.len(), |i| {
                let x1 = sc[i];
                let mut acc = 0.0;
                for (&x, &w) in oc.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    let v = g
                        .value_at(x1, x)
                        .ok_or(ImagingError::KernelGridMismatch([x1, 0.0], [x, 0.0]))?;
                    acc += v.norm_sqr() * w;
                }
                Ok(acc)
            });
            rows.into_iter().collect()
        }
    }
}

/// Phase-insensitive auto-correlation on the diagonal, `K(r, r)`.
fn diagonal(kern: &CorrKernel, p: Point, line: bool) -> Option<f64> {
    match &kern.repr {
        KernelRepr::Closed(g) if line => Some(g.line_factor(p[0], p[0]).re),
        KernelRepr::Closed(g) => Some(g.eval(p, p).re),
        KernelRepr::Grid(g) => g.value_at(p[0], p[0]).map(|v| v.re),
    }
}

/// Per-scan-point background `C0(r1) = eta^2 K11(r1, r1) ∫_A2 K22(r, r) |T|^2 dr`.
pub fn background_level(
    k11: &CorrKernel,
    k22: &CorrKernel,
    obj: &ObjectMask,
    det: &DetectorModel,
) -> Result<Vec<f64>, ImagingError> {
    let line = obj.grid.is_line();
    if det.scan().is_line() != line {
        return Err(ImagingError::Dimensionality);
    }
    let w = bucket_weights(obj, det.bucket())?;
    let mut bucket_flux = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let p = obj.grid.point(i);
        bucket_flux += wi * diagonal(k22, p, line).ok_or(ImagingError::KernelGridMismatch(p, p))?;
    }
    let eta2 = det.quantum_efficiency().powi(2);
    det.scan()
        .points()
        .into_iter()
        .map(|p| {
            let d = diagonal(k11, p, line).ok_or(ImagingError::KernelGridMismatch(p, p))?;
            Ok(eta2 * d * bucket_flux)
        })
        .collect()
}

/// Phase-insensitive auto-correlations of the pinhole (`k11`) and bucket (`k22`) arms.
#[derive(Debug, Clone, Copy)]
pub struct AutoKernels<'a> {
    pub k11: &'a CorrKernel,
    pub k22: &'a CorrKernel,
}

/// Image-bearing cross kernels; at least one must be present.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossKernels<'a> {
    pub kn: Option<&'a CorrKernel>,
    pub kp: Option<&'a CorrKernel>,
}

pub fn synthesize_image(
    cross: CrossKernels<'_>,
    auto: AutoKernels<'_>,
    obj: &ObjectMask,
    det: &DetectorModel,
    temporal: TemporalFactors,
    exec: Execution,
) -> Result<GhostImage, ImagingError> {
    if cross.kn.is_none() && cross.kp.is_none() {
        return Err(ImagingError::NoKernel);
    }
    let scan = *det.scan();
    if scan.is_line() != obj.grid.is_line() {
        return Err(ImagingError::Dimensionality);
    }
    let w = bucket_weights(obj, det.bucket())?;
    let background = background_level(auto.k11, auto.k22, obj, det)?;
    let eta2 = det.quantum_efficiency().powi(2);
    let cn = eta2 * temporal.cn_scale;
    let cp = eta2 * temporal.cp_scale;
    let mut signal = vec![0.0; scan.len()];
    for (k, c) in [(cross.kn, cn), (cross.kp, cp)] {
        if let Some(k) = k {
            let term = magnitude_term(k, &scan, &obj.grid, &w, exec)?;
            signal.iter_mut().zip(term).for_each(|(v, t)| *v += c * t);
        }
    }
    let psf_hint = cross.kn.or(cross.kp).and_then(|k| k.as_closed()).map(|g| g.coherence_width);
    let envelope = match &auto.k22.repr {
        KernelRepr::Closed(g) => Some(g.envelope_radius),
        KernelRepr::Grid(_) => None,
    };
    let metadata = ImageMetadata {
        plane: "object".into(),
        normalization: NORMALIZATION.into(),
        bucket_sufficiently_large: envelope.is_some_and(|a| det.bucket_sufficiently_large(&obj.grid, a)),
        psf_hint,
        ..Default::default()
    };
    Ok(GhostImage { grid: scan, signal, background, cn, cp, metadata })
}

/// Object-plane kernels for `src` at the end of `path` (closed forms).
pub struct ClosedKernels {
    /// Phase-insensitive kernel; shared by both arms' auto-correlations and,
    /// for thermal light, the cross correlation.
    pub pi: CorrKernel,
    pub ps: Option<CorrKernel>,
}

pub fn closed_kernels(src: &GsmSource, path: &OpticalPath) -> Result<ClosedKernels, ImagingError> {
    let pi = propagate_closed_gsm(src, path, CorrelationKind::PhaseInsensitive)?;
    let ps = if src.class().is_phase_sensitive() {
        Some(propagate_closed_gsm(src, path, CorrelationKind::PhaseSensitive)?)
    } else {
        None
    };
    Ok(ClosedKernels { pi, ps })
}

fn finish_metadata(img: &mut GhostImage, src: &GsmSource, path: &OpticalPath, mode: &str) {
    let report = fresnel_regime(src, path);
    img.metadata.source_class = Some(src.class());
    img.metadata.regime = Some(report.regime);
    img.metadata.fresnel_product = Some(report.fresnel_product);
    img.metadata.mode = mode.into();
    if src.class() == SourceClass::QuantumPhaseSensitive {
        img.metadata.kappa_convention = Some(KAPPA_CONVENTION.into());
    }
}

/// Analytic pipeline: closed-form kernels, then [`synthesize_image`].
pub fn analytic_image(
    src: &GsmSource,
    path: &OpticalPath,
    obj: &ObjectMask,
    det: &DetectorModel,
    exec: Execution,
) -> Result<GhostImage, ImagingError> {
    let k = closed_kernels(src, path)?;
    let cross = match &k.ps {
        None => CrossKernels { kn: Some(&k.pi), kp: None },
        Some(ps) => CrossKernels { kn: None, kp: Some(ps) },
    };
    let auto = AutoKernels { k11: &k.pi, k22: &k.pi };
    let mut img = synthesize_image(cross, auto, obj, det, temporal_factors(src, det), exec)?;
    finish_metadata(&mut img, src, path, "analytic");
    Ok(img)
}

/// Slice-mode pipeline with brute-force Fresnel propagation from the source
/// slice `input` onto the object axis. Works in every regime.
pub fn numeric_line_image(
    src: &GsmSource,
    path: &OpticalPath,
    obj: &ObjectMask,
    det: &DetectorModel,
    input: Axis,
    exec: Execution,
) -> Result<GhostImage, ImagingError> {
    if !obj.grid.is_line() || !det.scan().is_line() {
        return Err(ImagingError::Dimensionality);
    }
    let out_axis = obj.grid.x;
    let pi_src = source_kernel(src, CorrelationKind::PhaseInsensitive)?.sample_line(input)?;
    let pi = propagate_numeric(&pi_src, path, out_axis, exec)?;
    let ps = if src.class().is_phase_sensitive() {
        let k = source_kernel(src, CorrelationKind::PhaseSensitive)?.sample_line(input)?;
        Some(propagate_numeric(&k, path, out_axis, exec)?)
    } else {
        None
    };
    let cross = match &ps {
        None => CrossKernels { kn: Some(&pi), kp: None },
        Some(ps) => CrossKernels { kn: None, kp: Some(ps) },
    };
    let auto = AutoKernels { k11: &pi, k22: &pi };
    let mut img = synthesize_image(cross, auto, obj, det, temporal_factors(src, det), exec)?;
    finish_metadata(&mut img, src, path, "numeric");
    if let Ok(closed) = closed_kernels(src, path) {
        let g = closed.ps.as_ref().unwrap_or(&closed.pi);
        img.metadata.psf_hint = g.as_closed().map(|g| g.coherence_width);
        img.metadata.bucket_sufficiently_large = closed
            .pi
            .as_closed()
            .is_some_and(|g| det.bucket_sufficiently_large(&obj.grid, g.envelope_radius));
    }
    Ok(img)
}
