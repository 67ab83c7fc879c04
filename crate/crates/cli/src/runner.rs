//! Scene execution, sweeps, Monte Carlo validation and report rendering.

use crate::config::{canonical_json, sweep_point, Mode, Scene, SceneConfig, SweepAxis};
use crate::error::Failure;
use ghost_imaging::imaging::{analytic_image, numeric_line_image, ImageMetadata};
use ghost_imaging::io::{write_image_csv, write_image_pgm, GridFile};
use ghost_imaging::metrology::ImageMetrics;
use ghost_imaging::montecarlo::{empirical_ghost_image, moment_factoring_residual, BatchEstimate, FieldEnsemble, MonteCarloError, ShotNoise};
use ghost_imaging::source::{classicality_certify, Classicality, CorrSpectrumPair, SpectrumConfiguration};
use ghost_imaging::{
    fresnel_regime, relay_image_map, Execution, GhostImage, GsmSource, ObjectMask, PlaneGrid, Regime, SourceClass,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// Wall-clock information. The only part of a manifest that differs between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_s: u64,
    pub stages_s: BTreeMap<String, f64>,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub tool: String,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub regime: Option<Regime>,
    pub fresnel_product: Option<f64>,
    pub warnings: Vec<String>,
    pub artifacts: BTreeMap<String, Artifact>,
    /// Everything needed to reproduce the run.
    pub config: SceneConfig,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: String,
    #[serde(flatten)]
    pub metrics: ImageMetrics,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub metrics: ImageMetrics,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_hash(cfg: &SceneConfig) -> String {
    sha256_hex(&canonical_json(cfg))
}

struct Stages {
    start: Instant,
    last: Instant,
    stages: BTreeMap<String, f64>,
}

impl Stages {
    fn new() -> Self {
        let now = Instant::now();
        Self { start: now, last: now, stages: BTreeMap::new() }
    }

    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.insert(name.into(), (now - self.last).as_secs_f64());
        self.last = now;
    }

    fn finish(self) -> Timing {
        let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Timing { started_unix_s, stages_s: self.stages, total_s: self.start.elapsed().as_secs_f64() }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: BTreeMap<String, Artifact>,
}

impl Writer<'_> {
    fn put(&mut self, key: &str, file: &str, bytes: Vec<u8>) -> Result<(), Failure> {
        let path = self.dir.join(file);
        fs::write(&path, &bytes).map_err(|e| Failure::io(path.display(), e))?;
        self.artifacts.insert(key.into(), Artifact { file: file.into(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    fn grid(&mut self, key: &str, grid: &PlaneGrid, values: &[f64]) -> Result<(), Failure> {
        let mut bytes = Vec::new();
        GridFile::real(grid, values).write_to(&mut bytes).map_err(|e| Failure::io(key, e))?;
        self.put(key, &format!("{key}.grid"), bytes)
    }

    fn json<T: Serialize>(&mut self, key: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::io(key, e))?;
        bytes.push(b'\n');
        self.put(key, &format!("{key}.json"), bytes)
    }
}

/// Quantum light is rejected before the grid shape so the regime error wins.
fn monte_carlo_ready(src: &GsmSource, grid: &PlaneGrid) -> Result<(), Failure> {
    if src.class() == SourceClass::QuantumPhaseSensitive {
        return Err(MonteCarloError::QuantumHasNoRealization.into());
    }
    line_only(Mode::Montecarlo, grid)
}

fn line_only(mode: Mode, grid: &PlaneGrid) -> Result<(), Failure> {
    if grid.is_line() {
        Ok(())
    } else {
        Err(Failure::Config(format!("mode={mode} runs in 1-D slice mode; set run.grid.line = true")))
    }
}

/// Image in the configured mode, its Monte Carlo standard errors if any.
fn compute_image(scene: &Scene, obj: &ObjectMask, exec: Execution) -> Result<(GhostImage, Option<Vec<f64>>), Failure> {
    let cfg = &scene.config;
    let src = cfg.source;
    let path = scene.object_path()?;
    let det = scene.detector(obj.grid)?;
    match cfg.run.mode {
        Mode::Analytic => Ok((analytic_image(&src, &path, obj, &det, exec)?, None)),
        Mode::Numeric => {
            line_only(Mode::Numeric, &obj.grid)?;
            Ok((numeric_line_image(&src, &path, obj, &det, scene.input_axis()?, exec)?, None))
        }
        Mode::Montecarlo => {
            monte_carlo_ready(&src, &obj.grid)?;
            let ens = FieldEnsemble::new(&src, obj.grid, cfg.run.snapshots, cfg.run.seed)?;
            let noise = cfg.run.shot_noise.map(|c| ShotNoise { counts_per_unit: c });
            let e = empirical_ghost_image(&ens, &path, obj, &det, noise, exec)?;
            Ok((e.image, Some(e.standard_error)))
        }
    }
}

pub fn run_scene(scene: &Scene, out: &Path, exec: Execution) -> Result<RunSummary, Failure> {
    let cfg = &scene.config;
    let mut stages = Stages::new();
    let hash = config_hash(cfg);
    let run_id = hash[..16].to_string();
    let warnings: Vec<String> = cfg.source.warnings(&cfg.run.thresholds).iter().map(|w| w.to_string()).collect();

    let grid = scene.object_grid()?;
    let obj = scene.object(grid)?;
    stages.mark("setup");

    let (object_image, stderr) = compute_image(scene, &obj, exec)?;
    let relayed = match cfg.path.lens() {
        Some(_) => Some(relay_image_map(&cfg.path, &object_image, None)?),
        None => None,
    };
    stages.mark("image");

    let img = relayed.as_ref().unwrap_or(&object_image);
    // Orientation is only defined against the object-plane coordinates.
    let metrics = ImageMetrics::collect(img, relayed.is_none().then_some(&obj));
    stages.mark("metrics");

    fs::create_dir_all(out).map_err(|e| Failure::io(out.display(), e))?;
    let mut w = Writer { dir: out, artifacts: BTreeMap::new() };
    w.grid("image", &img.grid, &img.values())?;
    w.grid("signal", &img.grid, &img.signal)?;
    w.grid("background", &img.grid, &img.background)?;
    if let Some(se) = &stderr {
        w.grid("standard_error", &object_image.grid, se)?;
    }
    if relayed.is_some() {
        w.grid("object_plane_image", &object_image.grid, &object_image.values())?;
    }
    w.json("metadata", &img.metadata)?;
    w.json("metrics", &MetricsRecord { run_id: run_id.clone(), metrics: metrics.clone() })?;
    stages.mark("write");

    let report = fresnel_regime(&cfg.source, &cfg.path);
    let manifest = Manifest {
        run_id,
        tool: "ghostimg".into(),
        code_version: CODE_VERSION.into(),
        config_hash: hash,
        seed: cfg.run.seed,
        mode: cfg.run.mode,
        regime: Some(report.regime),
        fresnel_product: Some(report.fresnel_product),
        warnings,
        artifacts: w.artifacts,
        config: cfg.clone(),
        timing: stages.finish(),
    };
    write_manifest(out, &manifest)?;
    Ok(RunSummary { dir: out.to_path_buf(), manifest, metrics })
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), Failure> {
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(m).map_err(|e| Failure::io("manifest", e))?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Failure::io(path.display(), e))
}

pub fn load_manifest(target: &Path) -> Result<(PathBuf, Manifest), Failure> {
    let file = if target.is_dir() { target.join("manifest.json") } else { target.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Failure::Config(format!("cannot read {}: {e}", file.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    Ok((file.parent().map(Path::to_path_buf).unwrap_or_default(), m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub index: usize,
    pub values: Vec<f64>,
    pub dir: String,
    pub run_id: Option<String>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub tool: String,
    pub code_version: String,
    pub config_hash: String,
    pub axes: Vec<SweepAxis>,
    pub runs: Vec<SweepRun>,
}

pub struct SweepSummary {
    pub table: PathBuf,
    pub runs: Vec<Result<RunSummary, Failure>>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Cartesian product of the sweep axes (first axis slowest), executed
/// concurrently. Each point writes into its own `run_NNNN` directory.
pub fn run_sweep(scene: &Scene, out: &Path, exec: Execution) -> Result<SweepSummary, Failure> {
    let cfg = &scene.config;
    let axes = &cfg.run.sweep;
    if axes.is_empty() {
        let run = run_scene(scene, out, exec);
        return Ok(SweepSummary { table: out.join("manifest.json"), runs: vec![run] });
    }
    if axes.len() > 2 {
        return Err(Failure::Config(format!("sweeps take 1 or 2 axes, got {}", axes.len())));
    }
    if let Some(a) = axes.iter().find(|a| a.values.is_empty()) {
        return Err(Failure::Config(format!("sweep axis {:?} has no values", a.parameter)));
    }
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for a in axes {
        points = points.iter().flat_map(|p| a.values.iter().map(move |v| [p.clone(), vec![*v]].concat())).collect();
    }
    // Surface a bad parameter name once, before any work.
    let first: Vec<(&SweepAxis, f64)> = axes.iter().zip(&points[0]).map(|(a, v)| (a, *v)).collect();
    sweep_point(cfg, &first)?;

    fs::create_dir_all(out).map_err(|e| Failure::io(out.display(), e))?;
    let runs: Vec<Result<RunSummary, Failure>> = points
        .par_iter()
        .enumerate()
        .map(|(i, values)| {
            let assignment: Vec<(&SweepAxis, f64)> = axes.iter().zip(values).map(|(a, v)| (a, *v)).collect();
            let config = sweep_point(cfg, &assignment)?;
            let s = Scene { config, base_dir: scene.base_dir.clone() };
            run_scene(&s, &out.join(format!("run_{i:04}")), exec)
        })
        .collect();

    let mut csv = String::from("run");
    for a in axes {
        csv.push(',');
        csv.push_str(&a.parameter);
    }
    csv.push_str(",run_id,status,regime,psf_radius,fov_radius,contrast,orientation\n");
    let mut records = Vec::new();
    for (i, (values, r)) in points.iter().zip(&runs).enumerate() {
        let mut row = format!("{i}");
        for v in values {
            row.push_str(&format!(",{v}"));
        }
        match r {
            Ok(s) => {
                let m = &s.metrics;
                let orient = m.inversion.map_or(String::new(), |x| format!("{:?}", x.orientation).to_lowercase());
                let regime = s.manifest.regime.map_or(String::new(), |x| x.to_string());
                row.push_str(&format!(
                    ",{},ok,{regime},{},{},{},{orient}",
                    s.manifest.run_id,
                    opt(m.psf_radius),
                    opt(m.fov_radius),
                    opt(m.contrast)
                ));
            }
            Err(e) => row.push_str(&format!(",,exit {},,,,,", e.exit_code())),
        }
        csv.push_str(&row);
        csv.push('\n');
        records.push(SweepRun {
            index: i,
            values: values.clone(),
            dir: format!("run_{i:04}"),
            run_id: r.as_ref().ok().map(|s| s.manifest.run_id.clone()),
            status: match r {
                Ok(_) => "ok".into(),
                Err(e) => e.to_string(),
            },
        });
    }
    let table = out.join("sweep.csv");
    fs::write(&table, csv).map_err(|e| Failure::io(table.display(), e))?;
    let sm = SweepManifest {
        tool: "ghostimg".into(),
        code_version: CODE_VERSION.into(),
        config_hash: config_hash(cfg),
        axes: axes.clone(),
        runs: records,
    };
    let mut bytes = serde_json::to_vec_pretty(&sm).map_err(|e| Failure::io("sweep manifest", e))?;
    bytes.push(b'\n');
    fs::write(out.join("sweep_manifest.json"), bytes).map_err(|e| Failure::io("sweep manifest", e))?;
    Ok(SweepSummary { table, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config_hash: String,
    pub reference_mode: String,
    pub snapshots: usize,
    pub seed: u64,
    pub scan_points: usize,
    pub within: usize,
    pub fraction: f64,
    pub min_fraction: f64,
    pub sigma: f64,
    pub moment_residual: BatchEstimate,
    pub residual_consistent: bool,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Monte Carlo image against the deterministic prediction on the same grid.
///
/// The Monte Carlo estimator takes one snapshot per coherence time, so the
/// reference is evaluated with `T_d << T0`.
pub fn validate(scene: &Scene, exec: Execution, min_fraction: f64, sigma: f64) -> Result<ValidationReport, Failure> {
    let cfg = &scene.config;
    let grid = scene.object_grid()?;
    let src = cfg.source;
    monte_carlo_ready(&src, &grid)?;
    let obj = scene.object(grid)?;
    let path = scene.object_path()?;
    let det = scene.detector(grid)?;
    let mut notes = Vec::new();
    let t_ref = det.integration_time().min(1e-6 * src.coherence_time());
    if t_ref < det.integration_time() {
        notes.push(format!("reference integration time {t_ref:.3e} s (T_d << T0 limit)"));
    }
    let ref_det = det.with_integration_time(t_ref)?;
    let (reference, reference_mode) = match analytic_image(&src, &path, &obj, &ref_det, exec) {
        Ok(img) => (img, "analytic"),
        Err(ghost_imaging::ImagingError::Propagation(ghost_imaging::PropagationError::IntermediateRegime { .. })) => {
            (numeric_line_image(&src, &path, &obj, &ref_det, grid.x, exec)?, "numeric")
        }
        Err(e) => return Err(e.into()),
    };
    let ens = FieldEnsemble::new(&src, grid, cfg.run.snapshots, cfg.run.seed)?;
    let emp = empirical_ghost_image(&ens, &path, &obj, &det, None, exec)?;
    let got = emp.image.values();
    let want = reference.values();
    let within = got
        .iter()
        .zip(&want)
        .zip(&emp.standard_error)
        .filter(|((g, w), se)| (*g - *w).abs() <= sigma * *se)
        .count();
    let fraction = within as f64 / got.len() as f64;
    let mid = grid.x.samples / 2;
    let offset = ((0.5 * src.coherence_length() / grid.x.spacing).round() as usize).min(grid.x.samples - 1 - mid);
    let batches = 20.min(cfg.run.snapshots.max(2));
    let moment_residual = moment_factoring_residual(&ens, mid, mid + offset, batches, exec)?;
    let residual_consistent = moment_residual.consistent_with_zero(sigma);
    if emp.degenerate {
        notes.push("single snapshot: standard errors undefined".into());
    }
    Ok(ValidationReport {
        config_hash: config_hash(cfg),
        reference_mode: reference_mode.into(),
        snapshots: emp.snapshots,
        seed: cfg.run.seed,
        scan_points: got.len(),
        within,
        fraction,
        min_fraction,
        sigma,
        moment_residual,
        residual_consistent,
        passed: fraction >= min_fraction && residual_consistent && !emp.degenerate,
        notes,
    })
}

fn load_artifact(dir: &Path, m: &Manifest, key: &str) -> Result<GridFile, Failure> {
    let a = m.artifacts.get(key).ok_or_else(|| Failure::Config(format!("manifest lists no {key:?} artifact")))?;
    let path = dir.join(&a.file);
    let bytes = fs::read(&path).map_err(|e| Failure::io(path.display(), e))?;
    if sha256_hex(&bytes) != a.sha256 {
        return Err(Failure::Validation(format!("{} does not match its manifest hash", path.display())));
    }
    GridFile::read_from(bytes.as_slice()).map_err(|e| Failure::io(path.display(), e))
}

/// Render `image.pgm` and `image.csv` from a run's grid files.
pub fn report(target: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>, Failure> {
    let (dir, m) = load_manifest(target)?;
    let signal = load_artifact(&dir, &m, "signal")?;
    let background = load_artifact(&dir, &m, "background")?;
    let grid = signal.header.plane().map_err(|e| Failure::io("signal grid", e))?;
    let img = GhostImage {
        grid,
        signal: signal.data,
        background: background.data,
        cn: 0.0,
        cp: 0.0,
        metadata: ImageMetadata::default(),
    };
    let out = out.unwrap_or(&dir);
    fs::create_dir_all(out).map_err(|e| Failure::io(out.display(), e))?;
    let pgm = out.join("image.pgm");
    let csv = out.join("image.csv");
    let open = |p: &Path| fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| Failure::io(p.display(), e));
    write_image_pgm(&img, open(&pgm)?).map_err(|e| Failure::io(pgm.display(), e))?;
    write_image_csv(&img, open(&csv)?).map_err(|e| Failure::io(csv.display(), e))?;
    Ok(vec![pgm, csv])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub classicality: Classicality,
    pub samples: usize,
}

pub fn certify_pair(pair: &CorrSpectrumPair) -> Result<CertifyReport, Failure> {
    // Re-validate: the serialized form bypasses the constructor checks.
    let pair = CorrSpectrumPair::new(pair.dims().to_vec(), pair.spacing().to_vec(), pair.gn().to_vec(), pair.gp().to_vec())?;
    Ok(CertifyReport { classicality: classicality_certify(&pair), samples: pair.gn().len() })
}

pub fn certify_file(path: &Path) -> Result<CertifyReport, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let pair: CorrSpectrumPair =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    certify_pair(&pair)
}

pub fn certify_scene(
    scene: &Scene,
    configuration: SpectrumConfiguration,
    samples: usize,
    extent: f64,
    scale: f64,
) -> Result<CertifyReport, Failure> {
    let pair = CorrSpectrumPair::gsm(&scene.config.source, configuration, samples, extent)?.scaled_gp(scale);
    certify_pair(&pair)
}
