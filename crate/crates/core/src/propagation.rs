//! Propagation of correlation kernels through free space and the relay lens.
//!
//! Closed forms cover the near- and far-field GSM limits in two transverse
//! dimensions. Numeric propagation works on 1-D transverse slices: a GSM
//! kernel factors into identical x and y parts, so the slice factor carries
//! the square root of the 2-D amplitude.

use crate::exec::{for_each_row_init, Execution};
use crate::fourier::{plan, Direction};
use crate::grid::{Axis, GridError, PlaneGrid, Point};
use crate::imaging::GhostImage;
use crate::source::{dist2, norm2, GsmSource, SourceClass, SourceError};
use num_complex::Complex64;
use rustfft::Fft;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Lens-law tolerance (relative).
pub const LENS_LAW_TOLERANCE: f64 = 1e-9;

/// Relative tolerance of the grid-kernel Hermiticity / symmetry checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

pub const NEAR_FIELD_MIN: f64 = 10.0;
pub const FAR_FIELD_MAX: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("{name} must be finite and positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("lens law violated: 1/d1 + 1/d2 = {lhs:.9e} but 1/f = {rhs:.9e}")]
    LensLaw { lhs: f64, rhs: f64 },
    #[error("Intermediate regime (D0 = {d0:.3e}) has no closed form; use numeric propagation (mode=numeric)")]
    IntermediateRegime { d0: f64 },
    #[error("grid spacing {spacing:.3e} m exceeds the Fresnel-phase Nyquist bound {bound:.3e} m; refine the input grid or shrink the extent")]
    Aliasing { spacing: f64, bound: f64 },
    #[error("numeric propagation covers free space only; the path has a lens")]
    LensInPath,
    #[error("relay mapping needs a lens in the path")]
    MissingLens,
    #[error("relay mapping needs a sufficiently large bucket (radius >= 4 envelope radii)")]
    BucketTooSmall,
    #[error("magnification {m} pushes the image support off the detector grid")]
    OffGrid { m: f64 },
    #[error("kernel violates its symmetry class (relative error {error:.3e})")]
    Symmetry { error: f64 },
    #[error("operation needs a grid kernel")]
    NotGrid,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, PropagationError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(PropagationError::NonPositive { name, value })
    }
}

/// Imaging lens of the relay geometry: source-to-lens `d1`, lens-to-detector `d2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayLens {
    pub focal_length: f64,
    pub d1: f64,
    pub d2: f64,
}

impl RelayLens {
    pub fn new(focal_length: f64, d1: f64, d2: f64) -> Result<Self, PropagationError> {
        let lens = Self {
            focal_length: positive("focal_length", focal_length)?,
            d1: positive("d1", d1)?,
            d2: positive("d2", d2)?,
        };
        lens.check()?;
        Ok(lens)
    }

    /// Lens that images at magnification `m = -d2/d1` (`m < 0`).
    pub fn with_magnification(focal_length: f64, m: f64) -> Result<Self, PropagationError> {
        let g = positive("|magnification|", -m)?;
        Self::new(focal_length, focal_length * (1.0 + 1.0 / g), focal_length * (1.0 + g))
    }

    fn check(&self) -> Result<(), PropagationError> {
        let lhs = 1.0 / self.d1 + 1.0 / self.d2;
        let rhs = 1.0 / self.focal_length;
        if ((lhs - rhs) / rhs).abs() > LENS_LAW_TOLERANCE {
            return Err(PropagationError::LensLaw { lhs, rhs });
        }
        Ok(())
    }

    pub fn magnification(&self) -> f64 {
        -self.d2 / self.d1
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PathDescriptor {
    distance: f64,
    wavenumber: f64,
    #[serde(default)]
    lens: Option<RelayLens>,
    #[serde(default)]
    reference_path_length: Option<f64>,
}

/// Propagation geometry of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathDescriptor", into = "PathDescriptor")]
pub struct OpticalPath {
    distance: f64,
    wavenumber: f64,
    lens: Option<RelayLens>,
    reference_path_length: Option<f64>,
}

impl TryFrom<PathDescriptor> for OpticalPath {
    type Error = PropagationError;

    fn try_from(d: PathDescriptor) -> Result<Self, Self::Error> {
        let mut p = OpticalPath::free_space(d.distance, d.wavenumber)?;
        if let Some(l) = d.lens {
            p = p.with_lens(RelayLens::new(l.focal_length, l.d1, l.d2)?);
        }
        if let Some(lr) = d.reference_path_length {
            p = p.with_reference_path_length(lr)?;
        }
        Ok(p)
    }
}

impl From<OpticalPath> for PathDescriptor {
    fn from(p: OpticalPath) -> Self {
        PathDescriptor {
            distance: p.distance,
            wavenumber: p.wavenumber,
            lens: p.lens,
            reference_path_length: p.reference_path_length,
        }
    }
}

impl OpticalPath {
    pub fn free_space(distance: f64, wavenumber: f64) -> Result<Self, PropagationError> {
        Ok(Self {
            distance: positive("distance", distance)?,
            wavenumber: positive("wavenumber", wavenumber)?,
            lens: None,
            reference_path_length: None,
        })
    }

    pub fn with_lens(mut self, lens: RelayLens) -> Self {
        self.lens = Some(lens);
        self
    }

    pub fn with_reference_path_length(mut self, length: f64) -> Result<Self, PropagationError> {
        self.reference_path_length = Some(positive("reference_path_length", length)?);
        Ok(self)
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }
    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.wavenumber
    }
    pub fn lens(&self) -> Option<&RelayLens> {
        self.lens.as_ref()
    }
    pub fn reference_path_length(&self) -> Option<f64> {
        self.reference_path_length
    }

    /// Geometric length of the signal arm (`d1 + d2` with a lens, `L` otherwise).
    pub fn signal_length(&self) -> f64 {
        self.lens.map_or(self.distance, |l| l.d1 + l.d2)
    }

    /// Post-detection delay that equalises the arms, when the reference length is known.
    pub fn electronic_delay(&self) -> Option<f64> {
        self.reference_path_length.map(|lr| (lr - self.signal_length()) / SPEED_OF_LIGHT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NearField,
    FarField,
    Intermediate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NearField => "near_field",
            Regime::FarField => "far_field",
            Regime::Intermediate => "intermediate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// Regime that applies to the source's image-bearing correlation.
    pub regime: Regime,
    /// Fresnel number product `k0 a0 rho0 / 2L`.
    pub fresnel_product: f64,
    /// Source Fresnel number `k0 a0^2 / 2L` (deep far-field gate).
    pub source_fresnel_number: f64,
}

impl RegimeReport {
    pub fn regime_for(&self, kind: CorrelationKind) -> Regime {
        classify(self.fresnel_product, self.source_fresnel_number, kind)
    }
}

fn classify(d0: f64, nf: f64, kind: CorrelationKind) -> Regime {
    if d0 >= NEAR_FIELD_MIN {
        Regime::NearField
    } else if d0 <= FAR_FIELD_MAX && (kind == CorrelationKind::PhaseInsensitive || nf <= FAR_FIELD_MAX) {
        Regime::FarField
    } else {
        Regime::Intermediate
    }
}

pub fn fresnel_regime(src: &GsmSource, path: &OpticalPath) -> RegimeReport {
    let k = path.wavenumber();
    let l = path.distance();
    let a = src.beam_radius();
    let d0 = k * a * src.coherence_length() / (2.0 * l);
    let nf = k * a * a / (2.0 * l);
    let kind = if src.class().is_phase_sensitive() {
        CorrelationKind::PhaseSensitive
    } else {
        CorrelationKind::PhaseInsensitive
    };
    RegimeReport { regime: classify(d0, nf, kind), fresnel_product: d0, source_fresnel_number: nf }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    PhaseInsensitive,
    PhaseSensitive,
}

/// Which coordinate combination the coherence factor depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceCoordinate {
    Difference,
    Sum,
}

/// `A exp(-(|r1|^2 + |r2|^2)/a^2) exp(-|r2 ∓ r1|^2 / w^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedGaussian {
    pub amplitude: Complex64,
    pub envelope_radius: f64,
    pub coherence_width: f64,
    pub coordinate: CoherenceCoordinate,
}

impl ClosedGaussian {
    pub fn eval(&self, r1: Point, r2: Point) -> Complex64 {
        let a2 = self.envelope_radius * self.envelope_radius;
        let w2 = self.coherence_width * self.coherence_width;
        let c = match self.coordinate {
            CoherenceCoordinate::Difference => dist2(r1, r2),
            CoherenceCoordinate::Sum => dist2(r1, [-r2[0], -r2[1]]),
        };
        self.amplitude * (-(norm2(r1) + norm2(r2)) / a2 - c / w2).exp()
    }

    /// Amplitude of the 1-D slice factor, `sqrt(|A|) e^{i arg A}`.
    pub fn line_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude.norm().sqrt(), self.amplitude.arg())
    }

    pub fn line_factor(&self, x1: f64, x2: f64) -> Complex64 {
        let a2 = self.envelope_radius * self.envelope_radius;
        let w2 = self.coherence_width * self.coherence_width;
        let c = match self.coordinate {
            CoherenceCoordinate::Difference => x2 - x1,
            CoherenceCoordinate::Sum => x2 + x1,
        };
        self.line_amplitude() * (-(x1 * x1 + x2 * x2) / a2 - c * c / w2).exp()
    }

    pub fn sample_line(&self, axis1: Axis, axis2: Axis) -> GridKernel {
        let x2s = axis2.coords();
        let mut data = Vec::with_capacity(axis1.samples * axis2.samples);
        for x1 in axis1.coords() {
            for &x2 in &x2s {
                data.push(self.line_factor(x1, x2));
            }
        }
        GridKernel { axis1, axis2, data }
    }
}

/// 1-D slice kernel `K(x1, x2)`, row-major in `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridKernel {
    pub axis1: Axis,
    pub axis2: Axis,
    pub data: Vec<Complex64>,
}

impl GridKernel {
    pub fn new(axis1: Axis, axis2: Axis, data: Vec<Complex64>) -> Result<Self, GridError> {
        let expected = axis1.samples * axis2.samples;
        if data.len() != expected {
            return Err(GridError::LengthMismatch { expected, got: data.len() });
        }
        Ok(Self { axis1, axis2, data })
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize) -> Complex64 {
        self.data[i1 * self.axis2.samples + i2]
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Relative deviation from Hermiticity (phase-insensitive) or symmetry
    /// (phase-sensitive). Zero for kernels on unequal axes.
    pub fn symmetry_error(&self, kind: CorrelationKind) -> f64 {
        if self.axis1 != self.axis2 {
            return 0.0;
        }
        let n = self.axis1.samples;
        let scale = self.max_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let a = self.get(i, j);
                let b = match kind {
                    CorrelationKind::PhaseInsensitive => self.get(j, i).conj(),
                    CorrelationKind::PhaseSensitive => self.get(j, i),
                };
                worst = worst.max((a - b).norm());
            }
            if kind == CorrelationKind::PhaseInsensitive {
                worst = worst.max(self.get(i, i).im.abs());
            }
        }
        worst / scale
    }

    /// Bilinear interpolation at `(x1, x2)`.
    pub fn value_at(&self, x1: f64, x2: f64) -> Option<Complex64> {
        let (i, t) = self.axis1.locate(x1)?;
        let (j, u) = self.axis2.locate(x2)?;
        let i1 = (i + 1).min(self.axis1.samples - 1);
        let j1 = (j + 1).min(self.axis2.samples - 1);
        Some(
            self.get(i, j) * ((1.0 - t) * (1.0 - u))
                + self.get(i1, j) * (t * (1.0 - u))
                + self.get(i, j1) * ((1.0 - t) * u)
                + self.get(i1, j1) * (t * u),
        )
    }

    /// `∫ K(x, x) dx` (midpoint rule); requires equal axes.
    pub fn diagonal_integral(&self) -> Option<f64> {
        if self.axis1 != self.axis2 {
            return None;
        }
        let n = self.axis1.samples;
        Some((0..n).map(|i| self.get(i, i).re).sum::<f64>() * self.axis1.spacing)
    }

    /// Magnitude-wise relative L2 distance to `other` on the same axes.
    pub fn magnitude_l2_error(&self, reference: &GridKernel) -> Option<f64> {
        if self.axis1 != reference.axis1 || self.axis2 != reference.axis2 {
            return None;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.data.iter().zip(&reference.data) {
            let d = a.norm() - b.norm();
            num += d * d;
            den += b.norm_sqr();
        }
        Some((num / den).sqrt())
    }

    /// Least-squares fit of `ln|K| = c - (x1^2 + x2^2)/a^2 - (x2 ∓ x1)^2/w^2`
    /// over samples above `1e-3` of the peak. Returns `(|A|, a, w)`.
    pub fn fit_gaussian(&self, coordinate: CoherenceCoordinate) -> Option<(f64, f64, f64)> {
        let peak = self.max_norm();
        if peak == 0.0 {
            return None;
        }
        let floor = 1e-3 * peak;
        let x1s = self.axis1.coords();
        let x2s = self.axis2.coords();
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for (i, &x1) in x1s.iter().enumerate() {
            for (j, &x2) in x2s.iter().enumerate() {
                let m = self.get(i, j).norm();
                if m < floor {
                    continue;
                }
                let c = match coordinate {
                    CoherenceCoordinate::Difference => x2 - x1,
                    CoherenceCoordinate::Sum => x2 + x1,
                };
                let row = [1.0, -(x1 * x1 + x2 * x2), -c * c];
                let y = m.ln();
                for r in 0..3 {
                    atb[r] += row[r] * y;
                    for s in 0..3 {
                        ata[r][s] += row[r] * row[s];
                    }
                }
            }
        }
        let sol = solve3(ata, atb)?;
        if sol[1] <= 0.0 || sol[2] <= 0.0 {
            return None;
        }
        Some((sol[0].exp(), 1.0 / sol[1].sqrt(), 1.0 / sol[2].sqrt()))
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            let pivot = a[col];
            for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let mut s = b[r];
        for c in r + 1..3 {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case")]
pub enum KernelRepr {
    Closed(ClosedGaussian),
    Grid(GridKernel),
}

/// Two-point correlation kernel at a named plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrKernel {
    pub kind: CorrelationKind,
    pub plane: String,
    pub repr: KernelRepr,
}

impl CorrKernel {
    pub fn closed(kind: CorrelationKind, plane: impl Into<String>, g: ClosedGaussian) -> Self {
        Self { kind, plane: plane.into(), repr: KernelRepr::Closed(g) }
    }

    /// Grid kernel, checked against its symmetry class when both axes agree.
    pub fn grid(kind: CorrelationKind, plane: impl Into<String>, g: GridKernel) -> Result<Self, PropagationError> {
        let error = g.symmetry_error(kind);
        if error > SYMMETRY_TOLERANCE {
            return Err(PropagationError::Symmetry { error });
        }
        Ok(Self { kind, plane: plane.into(), repr: KernelRepr::Grid(g) })
    }

    pub fn as_closed(&self) -> Option<&ClosedGaussian> {
        match &self.repr {
            KernelRepr::Closed(g) => Some(g),
            KernelRepr::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridKernel> {
        match &self.repr {
            KernelRepr::Grid(g) => Some(g),
            KernelRepr::Closed(_) => None,
        }
    }

    /// Kernel value; grid kernels are slices and only answer for `y = 0`.
    pub fn eval(&self, r1: Point, r2: Point) -> Option<Complex64> {
        match &self.repr {
            KernelRepr::Closed(g) => Some(g.eval(r1, r2)),
            KernelRepr::Grid(g) => {
                if r1[1] != 0.0 || r2[1] != 0.0 {
                    return None;
                }
                g.value_at(r1[0], r2[0])
            }
        }
    }

    /// Slice-mode version of this kernel on `axis x axis`.
    pub fn sample_line(&self, axis: Axis) -> Result<CorrKernel, PropagationError> {
        match &self.repr {
            KernelRepr::Closed(g) => Ok(CorrKernel {
                kind: self.kind,
                plane: self.plane.clone(),
                repr: KernelRepr::Grid(g.sample_line(axis, axis)),
            }),
            KernelRepr::Grid(_) => Ok(self.clone()),
        }
    }
}

/// Source-plane kernel for `kind`: the GSM auto-correlation (phase
/// insensitive) or the signal/reference phase-sensitive cross correlation.
pub fn source_kernel(src: &GsmSource, kind: CorrelationKind) -> Result<CorrKernel, PropagationError> {
    let g = match kind {
        CorrelationKind::PhaseInsensitive => ClosedGaussian {
            amplitude: Complex64::new(src.peak_intensity(), 0.0),
            envelope_radius: src.beam_radius(),
            coherence_width: 2f64.sqrt() * src.coherence_length(),
            coordinate: CoherenceCoordinate::Difference,
        },
        CorrelationKind::PhaseSensitive => {
            let ps = src.phase_sensitive()?;
            ClosedGaussian {
                amplitude: ps.amplitude,
                envelope_radius: ps.envelope_radius,
                coherence_width: ps.coherence_width,
                coordinate: CoherenceCoordinate::Difference,
            }
        }
    };
    Ok(CorrKernel::closed(kind, "source", g))
}

/// Closed-form propagated GSM kernel in the near- or far-field limit.
///
/// Far-field forms carry the exact magnitudes; the quadratic geometric phase
/// factors of the Fresnel integrals are dropped (they cancel in `|K|^2`).
pub fn propagate_closed_gsm(
    src: &GsmSource,
    path: &OpticalPath,
    kind: CorrelationKind,
) -> Result<CorrKernel, PropagationError> {
    let report = fresnel_regime(src, path);
    let mut kern = source_kernel(src, kind)?;
    match report.regime_for(kind) {
        Regime::Intermediate => Err(PropagationError::IntermediateRegime { d0: report.fresnel_product }),
        Regime::NearField => {
            kern.plane = "object".into();
            Ok(kern)
        }
        Regime::FarField => {
            let k = path.wavenumber();
            let l = path.distance();
            let a_l = 2.0 * l / (k * src.coherence_length());
            let rho_l = 2.0 * l / (k * src.beam_radius());
            let phase = Complex64::from_polar(1.0, src.phase());
            let g = match (kind, src.class()) {
                (CorrelationKind::PhaseInsensitive, _) => ClosedGaussian {
                    amplitude: Complex64::new(2.0 * src.photon_flux() / (PI * a_l * a_l), 0.0),
                    envelope_radius: a_l,
                    coherence_width: 2f64.sqrt() * rho_l,
                    coordinate: CoherenceCoordinate::Difference,
                },
                (CorrelationKind::PhaseSensitive, SourceClass::QuantumPhaseSensitive) => {
                    let kappa = kern.as_closed().map_or(0.0, |g| g.amplitude.norm());
                    let a0 = src.beam_radius();
                    ClosedGaussian {
                        amplitude: phase * (kappa * a0 * a0 / (2.0 * a_l * a_l)),
                        envelope_radius: 2f64.sqrt() * a_l,
                        coherence_width: 2f64.sqrt() * rho_l,
                        coordinate: CoherenceCoordinate::Sum,
                    }
                }
                (CorrelationKind::PhaseSensitive, _) => ClosedGaussian {
                    amplitude: phase * (2.0 * src.photon_flux() / (PI * a_l * a_l)),
                    envelope_radius: a_l,
                    coherence_width: 2f64.sqrt() * rho_l,
                    coordinate: CoherenceCoordinate::Sum,
                },
            };
            kern.plane = "object".into();
            kern.repr = KernelRepr::Closed(g);
            Ok(kern)
        }
    }
}

/// Default slice axis: 512 samples over `8 max(a0, a_L)`.
pub fn default_line_axis(src: &GsmSource, path: &OpticalPath) -> Result<Axis, GridError> {
    let a_l = 2.0 * path.distance() / (path.wavenumber() * src.coherence_length());
    Axis::with_extent(512, 8.0 * src.beam_radius().max(a_l))
}

/// Largest input spacing that samples the Fresnel chirp without aliasing.
pub fn nyquist_spacing(path: &OpticalPath, input: &Axis, output: &Axis) -> f64 {
    let sep = input.half_width() + output.half_width();
    if sep == 0.0 {
        return f64::INFINITY;
    }
    path.wavelength() * path.distance() / (2.0 * sep)
}

/// 1-D Fresnel propagator `E_out(x) = ∫ h(x - x') E_in(x') dx'` with
/// `h(x) = sqrt(k/2πL) e^{-iπ/4} e^{i k x^2 / 2L}` (or its conjugate).
pub struct FresnelLine {
    input: Axis,
    output: Axis,
    strategy: Strategy,
}

enum Strategy {
    /// `n_out x n_in` weights including the cell length.
    Dense(Vec<Complex64>),
    /// Linear convolution through a zero-padded FFT.
    Toeplitz {
        len: usize,
        spectrum: Vec<Complex64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
}

/// Reusable buffers for [`FresnelLine::apply`].
pub struct FresnelScratch {
    buf: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl FresnelLine {
    pub fn new(path: &OpticalPath, input: Axis, output: Axis, conjugate: bool) -> Result<Self, PropagationError> {
        if path.lens().is_some() {
            return Err(PropagationError::LensInPath);
        }
        let bound = nyquist_spacing(path, &input, &output);
        if input.spacing > bound * (1.0 + 1e-12) {
            return Err(PropagationError::Aliasing { spacing: input.spacing, bound });
        }
        let k = path.wavenumber();
        let l = path.distance();
        let pre = Complex64::from_polar((k / (2.0 * PI * l)).sqrt(), -FRAC_PI_4);
        let g = move |d: f64| {
            let v = pre * Complex64::from_polar(input.spacing, k * d * d / (2.0 * l));
            if conjugate {
                v.conj()
            } else {
                v
            }
        };
        let (n_in, n_out) = (input.samples, output.samples);
        let equal_spacing = ((output.spacing - input.spacing) / input.spacing).abs() < 1e-12;
        let strategy = if equal_spacing && n_in >= n_out && (n_in - n_out) % 2 == 0 {
            let shift = ((n_in - n_out) / 2) as f64;
            let taps = n_in + n_out - 1;
            let len = (n_in + taps - 1).next_power_of_two();
            let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
            for (kk, c) in spectrum.iter_mut().take(taps).enumerate() {
                *c = g((kk as f64 - (n_in as f64 - 1.0) + shift) * input.spacing);
            }
            let forward = plan(len, Direction::Forward);
            let inverse = plan(len, Direction::Inverse);
            forward.process(&mut spectrum);
            let norm = 1.0 / len as f64;
            spectrum.iter_mut().for_each(|c| *c *= norm);
            Strategy::Toeplitz { len, spectrum, forward, inverse }
        } else {
            let xin = input.coords();
            let mut w = Vec::with_capacity(n_out * n_in);
            for xo in output.coords() {
                w.extend(xin.iter().map(|&xi| g(xo - xi)));
            }
            Strategy::Dense(w)
        };
        Ok(Self { input, output, strategy })
    }

    pub fn input(&self) -> Axis {
        self.input
    }
    pub fn output(&self) -> Axis {
        self.output
    }

    pub fn scratch(&self) -> FresnelScratch {
        match &self.strategy {
            Strategy::Dense(_) => FresnelScratch { buf: Vec::new(), fft: Vec::new() },
            Strategy::Toeplitz { len, forward, inverse, .. } => FresnelScratch {
                buf: vec![Complex64::new(0.0, 0.0); *len],
                fft: vec![
                    Complex64::new(0.0, 0.0);
                    forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())
                ],
            },
        }
    }

    pub fn apply(&self, field: &[Complex64], out: &mut [Complex64], scratch: &mut FresnelScratch) {
        let (n_in, n_out) = (self.input.samples, self.output.samples);
        assert_eq!(field.len(), n_in);
        assert_eq!(out.len(), n_out);
        match &self.strategy {
            Strategy::Dense(w) => {
                for (m, o) in out.iter_mut().enumerate() {
                    let row = &w[m * n_in..(m + 1) * n_in];
                    *o = row.iter().zip(field).map(|(a, b)| a * b).sum();
                }
            }
            Strategy::Toeplitz { spectrum, forward, inverse, .. } => {
                let buf = &mut scratch.buf;
                buf[..n_in].copy_from_slice(field);
                buf[n_in..].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                forward.process_with_scratch(buf, &mut scratch.fft);
                buf.iter_mut().zip(spectrum).for_each(|(b, s)| *b *= s);
                inverse.process_with_scratch(buf, &mut scratch.fft);
                out.copy_from_slice(&buf[n_in - 1..n_in - 1 + n_out]);
            }
        }
    }

    pub fn apply_new(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.output.samples];
        let mut s = self.scratch();
        self.apply(field, &mut out, &mut s);
        out
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Double Fresnel integral of a slice kernel onto `output x output`.
///
/// Phase-insensitive kernels use `conj(h) ⊗ h`, phase-sensitive ones `h ⊗ h`.
pub fn propagate_numeric(
    kern: &CorrKernel,
    path: &OpticalPath,
    output: Axis,
    exec: Execution,
) -> Result<CorrKernel, PropagationError> {
    let g = kern.as_grid().ok_or(PropagationError::NotGrid)?;
    let conj1 = kern.kind == CorrelationKind::PhaseInsensitive;
    let op2 = FresnelLine::new(path, g.axis2, output, false)?;
    let op1 = FresnelLine::new(path, g.axis1, output, conj1)?;
    let (n1, n2, no) = (g.axis1.samples, g.axis2.samples, output.samples);

    // Rows: x1' fixed, propagate along x2.
    let mut stage = vec![Complex64::new(0.0, 0.0); n1 * no];
    for_each_row_init(exec, &mut stage, no, || op2.scratch(), |s, i, row| {
        op2.apply(&g.data[i * n2..(i + 1) * n2], row, s);
    });
    let t = transpose(&stage, n1, no);
    drop(stage);
    let mut done = vec![Complex64::new(0.0, 0.0); no * no];
    for_each_row_init(exec, &mut done, no, || op1.scratch(), |s, m2, row| {
        op1.apply(&t[m2 * n1..(m2 + 1) * n1], row, s);
    });
    let data = transpose(&done, no, no);
    let out = GridKernel { axis1: output, axis2: output, data };
    let error = out.symmetry_error(kern.kind);
    // Symmetry must survive propagation to rounding accuracy.
    if error > 1e-8 {
        return Err(PropagationError::Symmetry { error });
    }
    Ok(CorrKernel { kind: kern.kind, plane: "object".into(), repr: KernelRepr::Grid(out) })
}

/// Resample `img` under `C'(r) = m^2 C(m r)` onto `grid`.
pub fn map_image(img: &GhostImage, m: f64, grid: PlaneGrid) -> Result<GhostImage, PropagationError> {
    let m2 = m * m;
    let mut signal = Vec::with_capacity(grid.len());
    let mut background = Vec::with_capacity(grid.len());
    for p in grid.points() {
        let q = [m * p[0], m * p[1]];
        let c = img.grid.interpolate(&img.signal, q).ok_or(PropagationError::OffGrid { m })?;
        let b = img.grid.interpolate(&img.background, q).ok_or(PropagationError::OffGrid { m })?;
        signal.push(m2 * c);
        background.push(m2 * b);
    }
    let mut meta = img.metadata.clone();
    meta.plane = "detector".into();
    meta.psf_hint = meta.psf_hint.map(|r| r / m.abs());
    Ok(GhostImage {
        grid,
        signal,
        background,
        cn: img.cn,
        cp: img.cp,
        metadata: meta,
    })
}

fn scaled_axis(a: Axis, s: f64) -> Axis {
    Axis { samples: a.samples, spacing: a.spacing * s }
}

/// Detector-plane image `C'(r) = M^2 C(M r)` of the relay geometry, `M = -d2/d1`.
///
/// The default detector grid is the object grid shrunk by `1/|M|` when
/// `|M| > 1`, and the object grid itself otherwise.
pub fn relay_image_map(
    path: &OpticalPath,
    img: &GhostImage,
    detector: Option<PlaneGrid>,
) -> Result<GhostImage, PropagationError> {
    let lens = path.lens().ok_or(PropagationError::MissingLens)?;
    if !img.metadata.bucket_sufficiently_large {
        return Err(PropagationError::BucketTooSmall);
    }
    let m = lens.magnification();
    let grid = detector.unwrap_or_else(|| {
        let s = if m.abs() > 1.0 { 1.0 / m.abs() } else { 1.0 };
        PlaneGrid { x: scaled_axis(img.grid.x, s), y: img.grid.y.map(|a| scaled_axis(a, s)) }
    });
    // Image content that lands outside the detector grid would be lost.
    let peak = img.image_term().iter().fold(0.0f64, |a, &b| a.max(b));
    let hx = grid.x.half_width() * m.abs() * (1.0 + 1e-9);
    let hy = grid.y.map_or(0.0, |a| a.half_width()) * m.abs() * (1.0 + 1e-9);
    for (i, v) in img.image_term().iter().enumerate() {
        let p = img.grid.point(i);
        if *v > 1e-6 * peak && (p[0].abs() > hx || p[1].abs() > hy) {
            return Err(PropagationError::OffGrid { m });
        }
    }
    map_image(img, m, grid)
}
