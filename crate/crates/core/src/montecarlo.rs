//! Monte Carlo validation with classical Gaussian field realizations.
//!
//! Each snapshot is one temporal coherence cell: a circular complex Gaussian
//! field with GSM statistics, synthesized by filtering white noise on a
//! periodic embedding. Snapshots are regenerated on demand from
//! `(seed, index)`, so an ensemble of any size costs one field of memory per
//! worker.

use crate::exec::{map_indexed_init, pairwise_reduce, Execution};
use crate::fourier::{wrapped_index, Direction, NdPlan, NdScratch};
use crate::grid::{Axis, PlaneGrid};
use crate::imaging::{Bucket, DetectorModel, GhostImage, ImageMetadata, ObjectMask, NORMALIZATION};
use crate::propagation::{fresnel_regime, FresnelLine, FresnelScratch, OpticalPath, PropagationError};
use crate::source::{GsmSource, SourceClass};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Minimum samples per coherence length.
pub const MIN_SAMPLES_PER_COHERENCE: f64 = 4.0;

/// Snapshots per accumulation block. Blocks are combined pairwise in index
/// order, so sums do not depend on the worker count.
pub const BLOCK: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("grid spacing {spacing:.3e} m resolves rho0 = {rho:.3e} m with fewer than 4 samples")]
    TooCoarse { spacing: f64, rho: f64 },
    #[error("quantum phase-sensitive light has no classical field realization")]
    QuantumHasNoRealization,
    #[error("ensemble needs at least one snapshot")]
    Empty,
    #[error("Monte Carlo images run in 1-D slice mode; use line grids")]
    NotLine,
    #[error("scan point {0:.3e} m lies outside the propagated field grid")]
    ScanOffGrid(f64),
    #[error("bucket region contains no object-grid node")]
    EmptyBucket,
    #[error("point index {0} is outside the field grid")]
    BadIndex(usize),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Spectral synthesizer of `E(r) = A e^{-|r|^2/a0^2} w(r)` on `grid`.
pub struct GsmFieldSampler {
    grid: PlaneGrid,
    embed: Vec<usize>,
    filter: Vec<f64>,
    envelope: Vec<f64>,
    plan: NdPlan,
}

impl GsmFieldSampler {
    pub fn new(src: &GsmSource, grid: PlaneGrid) -> Result<Self, MonteCarloError> {
        let rho = src.coherence_length();
        let a0 = src.beam_radius();
        let axes: Vec<Axis> = match grid.y {
            Some(y) => vec![y, grid.x],
            None => vec![grid.x],
        };
        for ax in &axes {
            if ax.spacing * MIN_SAMPLES_PER_COHERENCE > rho * (1.0 + 1e-12) {
                return Err(MonteCarloError::TooCoarse { spacing: ax.spacing, rho });
            }
        }
        // Periods of at least 8 a0 and wide enough that wrapped
        // correlations between grid nodes stay below e^-72.
        let embed: Vec<usize> = axes
            .iter()
            .map(|ax| {
                let by_beam = (8.0 * a0 / ax.spacing).ceil() as usize;
                let by_grid = ax.samples + (12.0 * rho / ax.spacing).ceil() as usize;
                by_beam.max(by_grid).next_power_of_two()
            })
            .collect();
        let total: usize = embed.iter().product();
        let mut cov = vec![Complex64::new(0.0, 0.0); total];
        for (flat, c) in cov.iter_mut().enumerate() {
            let mut rem = flat;
            let mut r2 = 0.0;
            for (d, ax) in embed.iter().zip(&axes).rev() {
                let j = rem % d;
                rem /= d;
                let x = wrapped_index(j, *d) as f64 * ax.spacing;
                r2 += x * x;
            }
            *c = Complex64::new((-r2 / (2.0 * rho * rho)).exp(), 0.0);
        }
        let fwd = NdPlan::new(&embed, Direction::Forward);
        let mut s = fwd.scratch();
        fwd.process(&mut cov, &mut s);
        let norm = 1.0 / (total as f64).sqrt();
        let filter = cov.iter().map(|v| v.re.max(0.0).sqrt() * norm).collect();

        let a2 = a0 * a0;
        let peak = src.peak_intensity();
        // Slice fields carry the square root of the 1-D factor amplitude.
        let amp = if grid.is_line() { peak.sqrt().sqrt() } else { peak.sqrt() };
        let envelope = grid.points().into_iter().map(|p| amp * (-(p[0] * p[0] + p[1] * p[1]) / a2).exp()).collect();
        let plan = NdPlan::new(&embed, Direction::Inverse);
        Ok(Self { grid, embed, filter, envelope, plan })
    }

    pub fn grid(&self) -> &PlaneGrid {
        &self.grid
    }

    pub fn scratch(&self) -> SamplerScratch {
        SamplerScratch { buf: vec![Complex64::new(0.0, 0.0); self.filter.len()], fft: self.plan.scratch() }
    }

    /// One field realization drawn from `rng`.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [Complex64], scratch: &mut SamplerScratch) {
        let buf = &mut scratch.buf;
        let root_half = std::f64::consts::FRAC_1_SQRT_2;
        for (b, f) in buf.iter_mut().zip(&self.filter) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *b = Complex64::new(re * root_half * f, im * root_half * f);
        }
        self.plan.process(buf, &mut scratch.fft);
        let nx = self.grid.nx();
        let ex = *self.embed.last().unwrap_or(&1);
        for (i, o) in out.iter_mut().enumerate() {
            let (iy, ix) = (i / nx, i % nx);
            *o = buf[iy * ex + ix] * self.envelope[i];
        }
    }
}

pub struct SamplerScratch {
    buf: Vec<Complex64>,
    fft: NdScratch,
}

/// RNG of snapshot `index`: ChaCha8 seeded with `seed`, stream `index`.
pub fn snapshot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Single GSM field realization on `grid`.
pub fn sample_gsm_field(src: &GsmSource, grid: PlaneGrid, seed: u64) -> Result<Vec<Complex64>, MonteCarloError> {
    let sampler = GsmFieldSampler::new(src, grid)?;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut s = sampler.scratch();
    sampler.sample_into(&mut snapshot_rng(seed, 0), &mut out, &mut s);
    Ok(out)
}

/// Signal and reference fields of one realization.
///
/// Thermal light uses a 50/50 split (reference = signal). Classical
/// phase-sensitive light uses reference = conj(signal) e^{i phase}.
pub fn make_pair(src: &GsmSource, field: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>), MonteCarloError> {
    match src.class() {
        SourceClass::Thermal => Ok((field.to_vec(), field.to_vec())),
        SourceClass::ClassicalPhaseSensitive => {
            let rot = Complex64::from_polar(1.0, src.phase());
            Ok((field.to_vec(), field.iter().map(|e| e.conj() * rot).collect()))
        }
        SourceClass::QuantumPhaseSensitive => Err(MonteCarloError::QuantumHasNoRealization),
    }
}

/// Optional Poisson photodetection noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoise {
    /// Mean counts per unit of detected intensity.
    pub counts_per_unit: f64,
}

impl ShotNoise {
    fn detect<R: Rng>(&self, rng: &mut R, mean: f64) -> f64 {
        let lambda = mean * self.counts_per_unit;
        if lambda <= 0.0 {
            return 0.0;
        }
        let n: f64 = Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(lambda);
        n / self.counts_per_unit
    }
}

/// Lazily regenerated ensemble of classical signal/reference realizations.
pub struct FieldEnsemble {
    src: GsmSource,
    sampler: GsmFieldSampler,
    snapshots: usize,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleInfo {
    pub snapshots: usize,
    pub seed: u64,
    pub grid: PlaneGrid,
    pub embedding: Vec<usize>,
    pub rng: String,
}

impl FieldEnsemble {
    pub fn new(src: &GsmSource, grid: PlaneGrid, snapshots: usize, seed: u64) -> Result<Self, MonteCarloError> {
        if snapshots == 0 {
            return Err(MonteCarloError::Empty);
        }
        if src.class() == SourceClass::QuantumPhaseSensitive {
            return Err(MonteCarloError::QuantumHasNoRealization);
        }
        Ok(Self { src: *src, sampler: GsmFieldSampler::new(src, grid)?, snapshots, seed })
    }

    pub fn len(&self) -> usize {
        self.snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots == 0
    }

    pub fn source(&self) -> &GsmSource {
        &self.src
    }

    pub fn grid(&self) -> &PlaneGrid {
        self.sampler.grid()
    }

    /// First `n` snapshots of the same ensemble.
    pub fn truncated(&self, n: usize) -> Result<Self, MonteCarloError> {
        FieldEnsemble::new(&self.src, *self.grid(), n.min(self.snapshots), self.seed)
    }

    pub fn info(&self) -> EnsembleInfo {
        EnsembleInfo {
            snapshots: self.snapshots,
            seed: self.seed,
            grid: *self.grid(),
            embedding: self.sampler.embed.clone(),
            rng: "ChaCha8 seed_from_u64(seed), stream = snapshot index".into(),
        }
    }

    pub fn field(&self, index: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid().len()];
        let mut s = self.sampler.scratch();
        self.sampler.sample_into(&mut snapshot_rng(self.seed, index as u64), &mut out, &mut s);
        out
    }

    pub fn pair(&self, index: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        make_pair(&self.src, &self.field(index)).expect("quantum sources are rejected at construction")
    }

    /// Fold `visit` over all snapshots in fixed blocks and combine the block
    /// results pairwise in index order.
    fn fold_blocks<S, A, I, V, M>(&self, exec: Execution, init: I, visit: V, merge: M) -> Option<A>
    where
        A: Send,
        I: Fn() -> (S, SamplerScratch, Vec<Complex64>) + Sync + Send,
        V: Fn(&mut S, usize, &[Complex64], &mut ChaCha8Rng, Option<A>) -> A + Sync + Send,
        M: Fn(A, A) -> A,
    {
        let nblocks = self.snapshots.div_ceil(BLOCK);
        let partials = map_indexed_init(exec, nblocks, &init, |(state, sc, field), b| {
            let mut acc = None;
            for i in b * BLOCK..((b + 1) * BLOCK).min(self.snapshots) {
                let mut rng = snapshot_rng(self.seed, i as u64);
                self.sampler.sample_into(&mut rng, field, sc);
                acc = Some(visit(state, i, field, &mut rng, acc));
            }
            acc.expect("blocks are non-empty")
        });
        pairwise_reduce(partials, merge)
    }
}

/// Running sums for the per-point statistics.
#[derive(Debug, Clone)]
struct ImageSums {
    n: usize,
    x: Vec<f64>,
    x2: Vec<f64>,
    i1: Vec<f64>,
    bucket: f64,
}

impl ImageSums {
    fn zeros(m: usize) -> Self {
        Self { n: 0, x: vec![0.0; m], x2: vec![0.0; m], i1: vec![0.0; m], bucket: 0.0 }
    }

    fn merge(mut self, o: Self) -> Self {
        self.n += o.n;
        self.bucket += o.bucket;
        for k in 0..self.x.len() {
            self.x[k] += o.x[k];
            self.x2[k] += o.x2[k];
            self.i1[k] += o.i1[k];
        }
        self
    }
}

/// Monte Carlo image with per-point standard errors of `C`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalImage {
    pub image: GhostImage,
    pub standard_error: Vec<f64>,
    pub snapshots: usize,
    /// Standard errors are undefined for a single snapshot (reported as infinity).
    pub degenerate: bool,
}

impl EmpiricalImage {
    /// Mean standard error over the scan.
    pub fn mean_standard_error(&self) -> f64 {
        self.standard_error.iter().sum::<f64>() / self.standard_error.len() as f64
    }
}

struct Propagators {
    signal: FresnelLine,
    reference: FresnelLine,
}

/// Empirical pinhole/bucket correlation `eta^2 <I1(r1) ∫_A2 |T|^2 I2>`.
///
/// Both arms are propagated over `path` with the single-field Fresnel
/// operator from the ensemble grid onto the object axis. Scan intensities are
/// linearly interpolated from that axis.
pub fn empirical_ghost_image(
    ensemble: &FieldEnsemble,
    path: &OpticalPath,
    obj: &ObjectMask,
    det: &DetectorModel,
    shot_noise: Option<ShotNoise>,
    exec: Execution,
) -> Result<EmpiricalImage, MonteCarloError> {
    let grid = *ensemble.grid();
    if !grid.is_line() || !obj.grid.is_line() || !det.scan().is_line() {
        return Err(MonteCarloError::NotLine);
    }
    let out = obj.grid.x;
    let ops = Propagators {
        signal: FresnelLine::new(path, grid.x, out, false)?,
        reference: FresnelLine::new(path, grid.x, out, false)?,
    };
    let weights: Vec<f64> = obj
        .intensity()
        .iter()
        .enumerate()
        .map(|(i, t)| if det.bucket().contains(obj.grid.point(i)) { t * out.spacing } else { 0.0 })
        .collect();
    if !obj.grid.points().iter().any(|p| det.bucket().contains(*p)) {
        return Err(MonteCarloError::EmptyBucket);
    }
    let scan = det.scan().x.coords();
    let locs: Vec<(usize, f64)> = scan
        .iter()
        .map(|&x| out.locate(x).ok_or(MonteCarloError::ScanOffGrid(x)))
        .collect::<Result<_, _>>()?;
    let m = scan.len();
    let eta2 = det.quantum_efficiency().powi(2);
    let src = *ensemble.source();

    let init = || {
        let state = (
            ops.signal.scratch(),
            ops.reference.scratch(),
            vec![Complex64::new(0.0, 0.0); out.samples],
            vec![Complex64::new(0.0, 0.0); out.samples],
        );
        (state, ensemble.sampler.scratch(), vec![Complex64::new(0.0, 0.0); grid.len()])
    };
    type State = (FresnelScratch, FresnelScratch, Vec<Complex64>, Vec<Complex64>);
    let visit = |st: &mut State, _i: usize, field: &[Complex64], rng: &mut ChaCha8Rng, acc: Option<ImageSums>| {
        let mut acc = acc.unwrap_or_else(|| ImageSums::zeros(m));
        let (ss, rs, es, er) = st;
        let (sig, refr) = make_pair(&src, field).expect("classical ensemble");
        ops.signal.apply(&sig, es, ss);
        ops.reference.apply(&refr, er, rs);
        let mut bucket: f64 = es.iter().zip(&weights).map(|(e, w)| e.norm_sqr() * w).sum();
        if let Some(sn) = shot_noise {
            bucket = sn.detect(rng, bucket);
        }
        for (k, &(j, t)) in locs.iter().enumerate() {
            let j1 = (j + 1).min(out.samples - 1);
            let mut i1 = er[j].norm_sqr() * (1.0 - t) + er[j1].norm_sqr() * t;
            if let Some(sn) = shot_noise {
                i1 = sn.detect(rng, i1);
            }
            let x = eta2 * i1 * bucket;
            acc.x[k] += x;
            acc.x2[k] += x * x;
            acc.i1[k] += i1;
        }
        acc.bucket += bucket;
        acc.n += 1;
        acc
    };
    let sums = ensemble.fold_blocks(exec, init, visit, ImageSums::merge).ok_or(MonteCarloError::Empty)?;

    let n = sums.n as f64;
    let mean_b = sums.bucket / n;
    let mut signal = Vec::with_capacity(m);
    let mut background = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    for k in 0..m {
        let mean = sums.x[k] / n;
        let c0 = eta2 * (sums.i1[k] / n) * mean_b;
        signal.push(mean - c0);
        background.push(c0);
        if sums.n < 2 {
            se.push(f64::INFINITY);
        } else {
            let var = ((sums.x2[k] - n * mean * mean) / (n - 1.0)).max(0.0);
            se.push((var / n).sqrt());
        }
    }
    let report = fresnel_regime(&src, path);
    let metadata = ImageMetadata {
        source_class: Some(src.class()),
        regime: Some(report.regime),
        fresnel_product: Some(report.fresnel_product),
        plane: "object".into(),
        mode: "montecarlo".into(),
        normalization: NORMALIZATION.into(),
        bucket_sufficiently_large: matches!(det.bucket(), Bucket::Full),
        notes: vec![format!("{} snapshots, one per coherence time", sums.n)],
        ..Default::default()
    };
    Ok(EmpiricalImage {
        image: GhostImage { grid: *det.scan(), signal, background, cn: eta2, cp: eta2, metadata },
        standard_error: se,
        snapshots: sums.n,
        degenerate: sums.n < 2,
    })
}

/// Batch-means estimate of a statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub batches: usize,
}

impl BatchEstimate {
    /// `|value| <= k * standard_error`.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.value.abs() <= k * self.standard_error
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct MomentSums {
    n: f64,
    i1: f64,
    i2: f64,
    i1i2: f64,
    pi: Complex64,
    ps: Complex64,
}

impl MomentSums {
    fn add(mut self, o: Self) -> Self {
        self.n += o.n;
        self.i1 += o.i1;
        self.i2 += o.i2;
        self.i1i2 += o.i1i2;
        self.pi += o.pi;
        self.ps += o.ps;
        self
    }

    /// `<I1 I2> - <I1><I2> - |<E1* E2>|^2 - |<E1 E2>|^2`.
    fn residual(&self) -> f64 {
        let n = self.n;
        self.i1i2 / n - (self.i1 / n) * (self.i2 / n) - (self.pi / n).norm_sqr() - (self.ps / n).norm_sqr()
    }
}

/// Gaussian moment-factoring residual at reference node `i1` and signal
/// node `i2` of the source-plane fields, normalised by `<I1><I2>`.
pub fn moment_factoring_residual(
    ensemble: &FieldEnsemble,
    i1: usize,
    i2: usize,
    batches: usize,
    exec: Execution,
) -> Result<BatchEstimate, MonteCarloError> {
    let len = ensemble.grid().len();
    for i in [i1, i2] {
        if i >= len {
            return Err(MonteCarloError::BadIndex(i));
        }
    }
    let batches = batches.clamp(2, ensemble.len().max(2));
    let per_snapshot: Vec<MomentSums> = ensemble
        .fold_blocks(
            exec,
            || ((), ensemble.sampler.scratch(), vec![Complex64::new(0.0, 0.0); len]),
            |_, _, field, _, acc: Option<Vec<MomentSums>>| {
                let mut acc = acc.unwrap_or_default();
                let (s, r) = make_pair(ensemble.source(), field).expect("classical ensemble");
                let (e1, e2) = (r[i1], s[i2]);
                let (a, b) = (e1.norm_sqr(), e2.norm_sqr());
                acc.push(MomentSums { n: 1.0, i1: a, i2: b, i1i2: a * b, pi: e1.conj() * e2, ps: e1 * e2 });
                acc
            },
            |mut a, b| {
                a.extend(b);
                a
            },
        )
        .ok_or(MonteCarloError::Empty)?;
    let total = per_snapshot.iter().fold(MomentSums::default(), |a, b| a.add(*b));
    let scale = (total.i1 / total.n) * (total.i2 / total.n);
    let size = per_snapshot.len() / batches;
    if size == 0 {
        return Err(MonteCarloError::Empty);
    }
    let vals: Vec<f64> = per_snapshot
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().fold(MomentSums::default(), |a, b| a.add(*b)).residual() / scale)
        .collect();
    let b = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / b;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(BatchEstimate { value: mean, standard_error: (var / b).sqrt(), batches: vals.len() })
}

/// Empirical second moments `<E1* E2>` and `<E1 E2>` between reference node
/// `i1` and signal node `i2` with their standard errors (magnitudes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub phase_insensitive: Complex64,
    pub phase_sensitive: Complex64,
    pub pi_standard_error: f64,
    pub ps_standard_error: f64,
    pub mean_field: Complex64,
    pub mean_field_standard_error: f64,
}

pub fn second_moments(ensemble: &FieldEnsemble, i1: usize, i2: usize, exec: Execution) -> Result<SecondMoments, MonteCarloError> {
    let len = ensemble.grid().len();
    for i in [i1, i2] {
        if i >= len {
            return Err(MonteCarloError::BadIndex(i));
        }
    }
    // [Σ pi, Σ |pi|^2, Σ ps, Σ |ps|^2, Σ E2, Σ |E2|^2]
    type Acc = (Complex64, f64, Complex64, f64, Complex64, f64);
    let sums = ensemble
        .fold_blocks(
            exec,
            || ((), ensemble.sampler.scratch(), vec![Complex64::new(0.0, 0.0); len]),
            |_, _, field, _, acc: Option<Acc>| {
                let z = Complex64::new(0.0, 0.0);
                let (a, b, c, d, e, f) = acc.unwrap_or((z, 0.0, z, 0.0, z, 0.0));
                let (s, r) = make_pair(ensemble.source(), field).expect("classical ensemble");
                let pi = r[i1].conj() * s[i2];
                let ps = r[i1] * s[i2];
                (a + pi, b + pi.norm_sqr(), c + ps, d + ps.norm_sqr(), e + s[i2], f + s[i2].norm_sqr())
            },
            |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2, x.3 + y.3, x.4 + y.4, x.5 + y.5),
        )
        .ok_or(MonteCarloError::Empty)?;
    let n = ensemble.len() as f64;
    let se = |sum: Complex64, sq: f64| {
        if n < 2.0 {
            f64::INFINITY
        } else {
            (((sq - sum.norm_sqr() / n) / (n - 1.0)).max(0.0) / n).sqrt()
        }
    };
    Ok(SecondMoments {
        phase_insensitive: sums.0 / n,
        phase_sensitive: sums.2 / n,
        pi_standard_error: se(sums.0, sums.1),
        ps_standard_error: se(sums.2, sums.3),
        mean_field: sums.4 / n,
        mean_field_standard_error: se(sums.4, sums.5),
    })
}

/// Least-squares slope of `ln se` against `ln N`.
pub fn scaling_exponent(counts: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Analytic 1-D slice value `<E*(x1) E(x2)>` of the sampled fields.
pub fn slice_autocorrelation(src: &GsmSource, x1: f64, x2: f64) -> f64 {
    let a2 = src.beam_radius().powi(2);
    let rho2 = src.coherence_length().powi(2);
    (2.0 * src.photon_flux() / (PI * a2)).sqrt() * (-(x1 * x1 + x2 * x2) / a2 - (x2 - x1).powi(2) / (2.0 * rho2)).exp()
}
