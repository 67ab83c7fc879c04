//! Gaussian-state source models and the classical/quantum certifier.
//!
//! Sources are Gaussian-Schell model (GSM) beams: photon flux `P`, beam
//! radius `a0`, coherence length `rho0` and coherence time `T0`. All three
//! classes share the same phase-insensitive auto-correlation
//!
//! ```text
//! K(r1, r2, tau) = (2P / pi a0^2) exp(-(|r1|^2 + |r2|^2)/a0^2)
//!                  exp(-|r2 - r1|^2 / 2 rho0^2) exp(-tau^2 / 2 T0^2)
//! ```
//!
//! and differ in their signal/reference cross correlation. No class carries
//! phase-sensitive auto-correlations.

use crate::fourier::{fft_nd, wrapped_index, Direction};
use crate::grid::Point;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

/// Largest brightness for which the low-brightness quantum kernel is built.
pub const MAX_QUANTUM_BRIGHTNESS: f64 = 0.1;

/// Relative tolerance of the spectrum positivity, evenness and bound checks.
pub const SPECTRUM_TOLERANCE: f64 = 1e-12;

/// Allowed relative mismatch of the recovered quantum coherence widths.
pub const WIDTH_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("{name} must be finite and positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("thermal sources carry no phase-sensitive cross correlation")]
    NoPhaseSensitiveCorrelation,
    #[error("operation requires a quantum phase-sensitive source, got {0:?}")]
    NotQuantum(SourceClass),
    #[error("brightness {brightness:.3e} exceeds {limit} (low-brightness approximation violated)")]
    BrightnessTooHigh { brightness: f64, limit: f64 },
    #[error("recovered {axis} width {recovered:.6e} differs from {expected:.6e} by more than 1%")]
    WidthMismatch { axis: &'static str, recovered: f64, expected: f64 },
    #[error("spectrum grid: {0}")]
    BadSpectrum(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    Thermal,
    #[serde(alias = "classical_ps")]
    ClassicalPhaseSensitive,
    #[serde(alias = "quantum_ps")]
    QuantumPhaseSensitive,
}

impl SourceClass {
    pub fn is_phase_sensitive(self) -> bool {
        !matches!(self, SourceClass::Thermal)
    }
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SourceClass::Thermal => "thermal",
            SourceClass::ClassicalPhaseSensitive => "classical_phase_sensitive",
            SourceClass::QuantumPhaseSensitive => "quantum_phase_sensitive",
        };
        f.write_str(s)
    }
}

/// Thresholds for the soft regime conditions (`rho0 << a0`, brightness `<< 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeThresholds {
    pub coherence_ratio: f64,
    pub brightness: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { coherence_ratio: 0.2, brightness: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum RegimeWarning {
    LowCoherence { ratio: f64, limit: f64 },
    Brightness { brightness: f64, limit: f64 },
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeWarning::LowCoherence { ratio, limit } => write!(
                f,
                "coherence_length/beam_radius = {ratio:.3} exceeds {limit}; GSM far-field forms assume rho0 << a0"
            ),
            RegimeWarning::Brightness { brightness, limit } => write!(
                f,
                "brightness {brightness:.3e} exceeds {limit}; quantum kernel assumes << 1 photon per mode"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct SourceDescriptor {
    photon_flux: f64,
    beam_radius: f64,
    coherence_length: f64,
    coherence_time: f64,
    class: SourceClass,
    #[serde(default)]
    phase: f64,
}

/// A Gaussian-Schell model source. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceDescriptor", into = "SourceDescriptor")]
pub struct GsmSource {
    photon_flux: f64,
    beam_radius: f64,
    coherence_length: f64,
    coherence_time: f64,
    class: SourceClass,
    phase: f64,
}

impl TryFrom<SourceDescriptor> for GsmSource {
    type Error = SourceError;

    fn try_from(d: SourceDescriptor) -> Result<Self, Self::Error> {
        Ok(GsmSource::new(d.photon_flux, d.beam_radius, d.coherence_length, d.coherence_time, d.class)?
            .with_phase(d.phase))
    }
}

impl From<GsmSource> for SourceDescriptor {
    fn from(s: GsmSource) -> Self {
        SourceDescriptor {
            photon_flux: s.photon_flux,
            beam_radius: s.beam_radius,
            coherence_length: s.coherence_length,
            coherence_time: s.coherence_time,
            class: s.class,
            phase: s.phase,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, SourceError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(SourceError::NonPositive { name, value })
    }
}

impl GsmSource {
    pub fn new(
        photon_flux: f64,
        beam_radius: f64,
        coherence_length: f64,
        coherence_time: f64,
        class: SourceClass,
    ) -> Result<Self, SourceError> {
        Ok(Self {
            photon_flux: positive("photon_flux", photon_flux)?,
            beam_radius: positive("beam_radius", beam_radius)?,
            coherence_length: positive("coherence_length", coherence_length)?,
            coherence_time: positive("coherence_time", coherence_time)?,
            class,
            phase: 0.0,
        })
    }

    /// Build and report the soft regime conditions that are violated.
    pub fn new_checked(
        photon_flux: f64,
        beam_radius: f64,
        coherence_length: f64,
        coherence_time: f64,
        class: SourceClass,
        thresholds: &RegimeThresholds,
    ) -> Result<(Self, Vec<RegimeWarning>), SourceError> {
        let src = Self::new(photon_flux, beam_radius, coherence_length, coherence_time, class)?;
        let warnings = src.warnings(thresholds);
        Ok((src, warnings))
    }

    /// Phase of the signal/reference cross correlation (radians).
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = if phase.is_finite() { phase } else { 0.0 };
        self
    }

    pub fn with_class(mut self, class: SourceClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_photon_flux(mut self, photon_flux: f64) -> Result<Self, SourceError> {
        self.photon_flux = positive("photon_flux", photon_flux)?;
        Ok(self)
    }

    pub fn photon_flux(&self) -> f64 {
        self.photon_flux
    }
    pub fn beam_radius(&self) -> f64 {
        self.beam_radius
    }
    pub fn coherence_length(&self) -> f64 {
        self.coherence_length
    }
    pub fn coherence_time(&self) -> f64 {
        self.coherence_time
    }
    pub fn class(&self) -> SourceClass {
        self.class
    }
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn warnings(&self, thresholds: &RegimeThresholds) -> Vec<RegimeWarning> {
        let mut out = Vec::new();
        let ratio = self.coherence_length / self.beam_radius;
        if ratio > thresholds.coherence_ratio {
            out.push(RegimeWarning::LowCoherence { ratio, limit: thresholds.coherence_ratio });
        }
        if self.class == SourceClass::QuantumPhaseSensitive {
            let b = self.brightness();
            if b > thresholds.brightness {
                out.push(RegimeWarning::Brightness { brightness: b, limit: thresholds.brightness });
            }
        }
        out
    }

    /// Peak photon-flux density `2P / (pi a0^2)`.
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.photon_flux / (PI * self.beam_radius * self.beam_radius)
    }

    /// Mean photon number per spatio-temporal mode, `P T0 rho0^2 / a0^2`.
    pub fn brightness(&self) -> f64 {
        let r = self.coherence_length / self.beam_radius;
        self.photon_flux * self.coherence_time * r * r
    }

    /// Phase-insensitive auto-correlation `<E^†(r1, t) E(r2, t + tau)>`.
    pub fn autocorr_pi(&self, r1: Point, r2: Point, tau: f64) -> Complex64 {
        let a2 = self.beam_radius * self.beam_radius;
        let rho2 = self.coherence_length * self.coherence_length;
        let t2 = self.coherence_time * self.coherence_time;
        let env = (norm2(r1) + norm2(r2)) / a2;
        let coh = dist2(r1, r2) / (2.0 * rho2);
        Complex64::new(self.peak_intensity() * (-env - coh - tau * tau / (2.0 * t2)).exp(), 0.0)
    }

    /// Signal/reference phase-sensitive correlation, ready for repeated evaluation.
    ///
    /// For quantum sources this runs [`sqrt_spectrum_prefactor`] once.
    pub fn phase_sensitive(&self) -> Result<PhaseSensitiveCorrelation, SourceError> {
        let rho = self.coherence_length;
        let t0 = self.coherence_time;
        let rot = Complex64::from_polar(1.0, self.phase);
        match self.class {
            SourceClass::Thermal => Err(SourceError::NoPhaseSensitiveCorrelation),
            SourceClass::ClassicalPhaseSensitive => Ok(PhaseSensitiveCorrelation {
                amplitude: rot * self.peak_intensity(),
                envelope_radius: self.beam_radius,
                coherence_width: 2f64.sqrt() * rho,
                temporal_width: 2f64.sqrt() * t0,
            }),
            SourceClass::QuantumPhaseSensitive => {
                let kappa = sqrt_spectrum_prefactor(self)?.prefactor;
                Ok(PhaseSensitiveCorrelation {
                    amplitude: rot * kappa,
                    envelope_radius: self.beam_radius,
                    coherence_width: rho,
                    temporal_width: t0,
                })
            }
        }
    }

    /// Phase-sensitive cross correlation `<E_S(r1, t) E_R(r2, t + tau)>`.
    pub fn crosscorr_ps(&self, r1: Point, r2: Point, tau: f64) -> Result<Complex64, SourceError> {
        Ok(self.phase_sensitive()?.eval(r1, r2, tau))
    }
}

/// `A exp(-(|r1|^2+|r2|^2)/a^2) exp(-|r2-r1|^2/w^2) exp(-tau^2/theta^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSensitiveCorrelation {
    pub amplitude: Complex64,
    pub envelope_radius: f64,
    /// `w` in `exp(-|r2 - r1|^2 / w^2)`.
    pub coherence_width: f64,
    /// `theta` in `exp(-tau^2 / theta^2)`.
    pub temporal_width: f64,
}

impl PhaseSensitiveCorrelation {
    pub fn eval(&self, r1: Point, r2: Point, tau: f64) -> Complex64 {
        let a2 = self.envelope_radius * self.envelope_radius;
        let w2 = self.coherence_width * self.coherence_width;
        let th2 = self.temporal_width * self.temporal_width;
        self.amplitude
            * (-(norm2(r1) + norm2(r2)) / a2 - dist2(r1, r2) / w2 - tau * tau / th2).exp()
    }
}

#[inline]
pub(crate) fn norm2(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

#[inline]
pub(crate) fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Sampling of the spectral construction, in units of `rho0` (space) and
/// `T0` (time) per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtSpectrumGrid {
    pub samples: usize,
    pub spacing: f64,
}

impl Default for SqrtSpectrumGrid {
    fn default() -> Self {
        Self { samples: 64, spacing: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtSpectrum {
    /// Peak `kappa` of the phase-sensitive correlation (photons / s m^2).
    pub prefactor: f64,
    /// Peak of the phase-insensitive spectrum (photons per mode).
    pub peak_spectrum: f64,
    /// Recovered Gaussian sigma of the spatial coherence factor (m).
    pub spatial_sigma: f64,
    /// Recovered Gaussian sigma of the temporal coherence factor (s).
    pub temporal_sigma: f64,
}

/// Quantum phase-sensitive prefactor from the maximal spectrum
/// `|g~p| = sqrt(g~n (1 + g~n))`.
///
/// The homogeneous part of the GSM auto-correlation is sampled on a 3-D
/// (x, y, t) grid, transformed, mapped through the square-root bound and
/// transformed back. The returned prefactor is the correlation peak; the
/// recovered coherence sigmas must equal `rho0/√2` and `T0/√2` within 1%.
pub fn sqrt_spectrum_prefactor(src: &GsmSource) -> Result<SqrtSpectrum, SourceError> {
    sqrt_spectrum_prefactor_on(src, SqrtSpectrumGrid::default())
}

pub fn sqrt_spectrum_prefactor_on(
    src: &GsmSource,
    grid: SqrtSpectrumGrid,
) -> Result<SqrtSpectrum, SourceError> {
    if src.class() != SourceClass::QuantumPhaseSensitive {
        return Err(SourceError::NotQuantum(src.class()));
    }
    let b = src.brightness();
    if b > MAX_QUANTUM_BRIGHTNESS {
        return Err(SourceError::BrightnessTooHigh { brightness: b, limit: MAX_QUANTUM_BRIGHTNESS });
    }
    let n = grid.samples;
    let du = grid.spacing;
    // Dimensionless x/rho0, y/rho0, t/T0; the amplitude carries rho0^2 T0 so the
    // transform is the physical spectrum (photons per mode).
    let amp = src.peak_intensity() * src.coherence_length().powi(2) * src.coherence_time();
    let mut vol = vec![Complex64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        let x = wrapped_index(i, n) as f64 * du;
        for j in 0..n {
            let y = wrapped_index(j, n) as f64 * du;
            for k in 0..n {
                let t = wrapped_index(k, n) as f64 * du;
                vol[(i * n + j) * n + k] =
                    Complex64::new(amp * (-(x * x + y * y) / 2.0 - t * t / 2.0).exp(), 0.0);
            }
        }
    }
    fft_nd(&mut vol, &[n, n, n], Direction::Forward);
    let cell = du * du * du;
    let spectrum: Vec<f64> = vol.iter().map(|v| (v.re * cell).max(0.0)).collect();
    let peak_spectrum = spectrum[0];
    let df = 1.0 / (n as f64 * du);
    let corr = sqrt_spectrum_correlation(&spectrum, [n, n, n], [df, df, df]);

    let scale = src.coherence_length().powi(2) * src.coherence_time();
    let peak = corr[0];
    let line_x: Vec<f64> = (0..n).map(|i| corr[i * n * n]).collect();
    let line_t: Vec<f64> = (0..n).map(|k| corr[k]).collect();
    let sx = fit_sigma(&line_x, du) * src.coherence_length();
    let st = fit_sigma(&line_t, du) * src.coherence_time();
    let ex = src.coherence_length() / 2f64.sqrt();
    let et = src.coherence_time() / 2f64.sqrt();
    if ((sx - ex) / ex).abs() > WIDTH_TOLERANCE {
        return Err(SourceError::WidthMismatch { axis: "spatial", recovered: sx, expected: ex });
    }
    if ((st - et) / et).abs() > WIDTH_TOLERANCE {
        return Err(SourceError::WidthMismatch { axis: "temporal", recovered: st, expected: et });
    }
    Ok(SqrtSpectrum { prefactor: peak / scale, peak_spectrum, spatial_sigma: sx, temporal_sigma: st })
}

/// Inverse transform of `sqrt(g~n (1 + g~n))` for a spectrum stored in the
/// wrapped (origin-first) layout with frequency cell sizes `df`.
///
/// Returns the real correlation in the matching wrapped spatial layout.
pub fn sqrt_spectrum_correlation(spectrum: &[f64], dims: [usize; 3], df: [f64; 3]) -> Vec<f64> {
    let mut vol: Vec<Complex64> = spectrum
        .iter()
        .map(|&g| {
            let g = g.max(0.0);
            Complex64::new((g * (1.0 + g)).sqrt(), 0.0)
        })
        .collect();
    fft_nd(&mut vol, &dims, Direction::Inverse);
    let cell = df[0] * df[1] * df[2];
    vol.iter().map(|v| v.re * cell).collect()
}

/// Gaussian sigma of a wrapped-layout line from a log-quadratic fit through
/// the origin over samples above `e^-2` of the peak.
fn fit_sigma(line: &[f64], spacing: f64) -> f64 {
    let n = line.len();
    let peak = line[0];
    if peak <= 0.0 {
        return f64::NAN;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, &v) in line.iter().enumerate().skip(1) {
        let r = v / peak;
        if r >= (-2f64).exp() {
            let u = wrapped_index(j, n) as f64 * spacing;
            num += u.powi(4);
            den += -2.0 * u * u * r.ln();
        }
    }
    if den <= 0.0 {
        return f64::NAN;
    }
    (num / den).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classicality {
    Classical,
    QuantumAdmissible,
    Unphysical,
}

/// Which maximal phase-sensitive spectrum to pair with a GSM source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumConfiguration {
    /// `|g~p| = g~n`, the classical maximum.
    ClassicalMaximum,
    /// `|g~p| = sqrt(g~n (1 + g~n))`, the quantum maximum.
    QuantumMaximum,
}

/// Phase-insensitive spectrum `g~n` and phase-sensitive spectrum `g~p` on a
/// common centred frequency grid (row-major, last index fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrSpectrumPair {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    gn: Vec<f64>,
    gp: Vec<Complex64>,
}

impl CorrSpectrumPair {
    pub fn new(
        dims: Vec<usize>,
        spacing: Vec<f64>,
        gn: Vec<f64>,
        gp: Vec<Complex64>,
    ) -> Result<Self, SourceError> {
        if dims.is_empty() || dims.len() != spacing.len() {
            return Err(SourceError::BadSpectrum("dims and spacing must have equal, non-zero length".into()));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(SourceError::BadSpectrum("spacing must be positive".into()));
        }
        let total: usize = dims.iter().product();
        if gn.len() != total || gp.len() != total {
            return Err(SourceError::BadSpectrum(format!(
                "expected {total} samples, got gn={} gp={}",
                gn.len(),
                gp.len()
            )));
        }
        let pair = Self { dims, spacing, gn, gp };
        let scale = pair.gn.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = SPECTRUM_TOLERANCE * scale;
        for (i, &g) in pair.gn.iter().enumerate() {
            if !g.is_finite() || g < -tol {
                return Err(SourceError::BadSpectrum(format!("g~n[{i}] = {g} is negative")));
            }
            let m = pair.mirror_index(i);
            if (g - pair.gn[m]).abs() > tol {
                return Err(SourceError::BadSpectrum(format!("g~n is not even at sample {i}")));
            }
        }
        if pair.gp.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SourceError::BadSpectrum("g~p has non-finite samples".into()));
        }
        Ok(pair)
    }

    /// Maximal phase-sensitive spectrum for `src` on an `n`-per-axis (x, y, t)
    /// grid spanning `±extent` spectral standard deviations.
    pub fn gsm(
        src: &GsmSource,
        config: SpectrumConfiguration,
        samples: usize,
        extent: f64,
    ) -> Result<Self, SourceError> {
        if samples == 0 || !(extent > 0.0) {
            return Err(SourceError::BadSpectrum("need samples > 0 and extent > 0".into()));
        }
        let rho = src.coherence_length();
        let t0 = src.coherence_time();
        let peak = src.peak_intensity() * 2.0 * PI * rho * rho * (2.0 * PI).sqrt() * t0;
        let sig_s = 1.0 / (2.0 * PI * rho);
        let sig_t = 1.0 / (2.0 * PI * t0);
        let denom = (samples.max(2) - 1) as f64;
        let ds = 2.0 * extent * sig_s / denom;
        let dt = 2.0 * extent * sig_t / denom;
        let c = (samples as f64 - 1.0) / 2.0;
        let rot = Complex64::from_polar(1.0, src.phase());
        let mut gn = Vec::with_capacity(samples.pow(3));
        let mut gp = Vec::with_capacity(samples.pow(3));
        for i in 0..samples {
            let fx = (i as f64 - c) * ds;
            for j in 0..samples {
                let fy = (j as f64 - c) * ds;
                for k in 0..samples {
                    let ft = (k as f64 - c) * dt;
                    let g = peak
                        * (-2.0 * PI * PI * (rho * rho * (fx * fx + fy * fy) + t0 * t0 * ft * ft)).exp();
                    let mag = match config {
                        SpectrumConfiguration::ClassicalMaximum => g,
                        SpectrumConfiguration::QuantumMaximum => (g * (1.0 + g)).sqrt(),
                    };
                    gn.push(g);
                    gp.push(rot * mag);
                }
            }
        }
        Self::new(vec![samples; 3], vec![ds, ds, dt], gn, gp)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn gn(&self) -> &[f64] {
        &self.gn
    }
    pub fn gp(&self) -> &[Complex64] {
        &self.gp
    }

    /// Flat index of the sample at `-f`.
    pub fn mirror_index(&self, index: usize) -> usize {
        let mut rem = index;
        let mut out = 0usize;
        let mut stride = 1usize;
        for &n in self.dims.iter().rev() {
            let k = rem % n;
            rem /= n;
            out += (n - 1 - k) * stride;
            stride *= n;
        }
        out
    }

    /// Same pair with `g~p` multiplied by `s`.
    pub fn scaled_gp(&self, s: f64) -> Self {
        Self { gp: self.gp.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

/// Classify a spectrum pair against the classical bound `|g~p| <= g~n` and the
/// physical bound `|g~p| <= sqrt(g~n (1 + g~n))`.
pub fn classicality_certify(spec: &CorrSpectrumPair) -> Classicality {
    let mut classical = true;
    for (&gn, gp) in spec.gn.iter().zip(&spec.gp) {
        let gn = gn.max(0.0);
        let mag = gp.norm();
        let quantum_bound = (gn * (1.0 + gn)).sqrt();
        if mag > quantum_bound * (1.0 + SPECTRUM_TOLERANCE) {
            return Classicality::Unphysical;
        }
        if mag > gn * (1.0 + SPECTRUM_TOLERANCE) {
            classical = false;
        }
    }
    if classical {
        Classicality::Classical
    } else {
        Classicality::QuantumAdmissible
    }
}
