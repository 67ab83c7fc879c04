//! Ghost imaging with Gaussian-state light.
//!
//! The crate models thermal, classical phase-sensitive and quantum
//! (low-brightness SPDC-like) Gaussian-Schell sources, propagates their
//! correlation kernels through Fresnel paths, synthesizes ghost images
//! analytically, validates them with Monte Carlo field ensembles and
//! measures resolution, field of view, contrast and image orientation.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod fit;
pub mod fourier;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod metrology;
pub mod montecarlo;
pub mod propagation;
pub mod source;

pub use exec::Execution;
pub use grid::{Axis, GridError, PlaneGrid, Point};
pub use source::{
    classicality_certify, sqrt_spectrum_prefactor, Classicality, CorrSpectrumPair, GsmSource,
    RegimeThresholds, RegimeWarning, SourceClass, SourceError, SpectrumConfiguration,
};
pub use imaging::{
    analytic_image, background_level, numeric_line_image, synthesize_image, temporal_factors, Bucket,
    DetectorModel, GhostImage, ImagingError, ObjectMask, TemporalFactors,
};
pub use propagation::{
    fresnel_regime, propagate_closed_gsm, propagate_numeric, relay_image_map, CorrKernel,
    CorrelationKind, OpticalPath, PropagationError, Regime, RelayLens,
};
pub use montecarlo::{
    empirical_ghost_image, make_pair, moment_factoring_residual, sample_gsm_field, EmpiricalImage,
    FieldEnsemble, MonteCarloError,
};
pub use fit::{fit_gaussian, FitError, GaussianFit};
pub use io::{GridFile, GridHeader, IoError};
pub use metrology::{
    detect_inversion, measure_contrast, measure_fov, measure_psf, ImageMetrics, InversionReport,
    MetrologyError, Orientation,
};
