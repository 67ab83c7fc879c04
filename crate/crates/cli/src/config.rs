//! Scene configuration: JSON in SI units, parsed into core types.

use crate::error::Failure;
use ghost_imaging::io::GridFile;
use ghost_imaging::source::RegimeThresholds;
use ghost_imaging::{Axis, Bucket, DetectorModel, GsmSource, ObjectMask, OpticalPath, PlaneGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub source: GsmSource,
    pub path: OpticalPath,
    pub object: ObjectSpec,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSpec {
    Point {
        #[serde(default)]
        center: [f64; 2],
    },
    Uniform,
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    DoubleSlit {
        width: f64,
        separation: f64,
        /// Ignored on line grids.
        #[serde(default = "unit")]
        height: f64,
    },
    Letter {
        glyph: char,
        size: f64,
    },
    /// `|T|` (and optionally `arg T`) per object-grid node, row-major.
    Inline {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Vec<f64>>,
    },
    /// Grid file holding `|T|` (real) or `T` (complex). Relative paths are
    /// resolved against the config file's directory.
    File {
        path: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Default 512.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Full width covered by the grid cells (m). Default `8 max(a0, a_L)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
    /// Line (1-D slice) grid. Defaults to a plane in analytic mode and a line
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<bool>,
}

pub const DEFAULT_SAMPLES: usize = 512;

impl GridSpec {
    pub fn axis(&self, default_extent: f64) -> Result<Axis, Failure> {
        Axis::with_extent(self.samples.unwrap_or(DEFAULT_SAMPLES), self.extent.unwrap_or(default_extent))
            .map_err(|e| Failure::Config(format!("grid: {e}")))
    }

    pub fn plane(&self, line_default: bool, default_extent: f64) -> Result<PlaneGrid, Failure> {
        let a = self.axis(default_extent)?;
        Ok(if self.line.unwrap_or(line_default) { PlaneGrid::line(a) } else { PlaneGrid::square(a) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub quantum_efficiency: f64,
    pub integration_time: f64,
    #[serde(default)]
    pub bucket: BucketSpec,
    /// Pinhole scan grid; defaults to the object grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum BucketSpec {
    #[default]
    Full,
    Disk {
        radius: f64,
    },
}

impl From<BucketSpec> for Bucket {
    fn from(b: BucketSpec) -> Self {
        match b {
            BucketSpec::Full => Bucket::Full,
            BucketSpec::Disk { radius } => Bucket::Disk { radius },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Analytic,
    Numeric,
    Montecarlo,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Numeric => "numeric",
            Mode::Montecarlo => "montecarlo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path of a numeric config field, e.g. `path.distance`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Multiply each value by this (base-config) field, e.g. sweep
    /// `detector.integration_time` in units of `source.coherence_time`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default)]
    pub mode: Mode,
    /// Object grid. Default: 512 samples over `8 max(a0, a_L)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Source-plane slice for numeric propagation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Poisson counts per unit intensity in Monte Carlo mode (off when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub thresholds: RegimeThresholds,
}

fn default_snapshots() -> usize {
    1000
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Analytic,
            grid: None,
            input_grid: None,
            seed: 0,
            snapshots: default_snapshots(),
            shot_noise: None,
            sweep: Vec::new(),
            thresholds: RegimeThresholds::default(),
        }
    }
}

/// A parsed scene plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub base_dir: PathBuf,
}

impl Scene {
    pub fn load(file: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(file)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", file.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
        // A run manifest embeds the config it was produced from.
        let value = match value.get("config") {
            Some(c) if value.get("config_hash").is_some() => c.clone(),
            _ => value,
        };
        let base_dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_value(value, base_dir)
    }

    pub fn from_value(value: Value, base_dir: PathBuf) -> Result<Self, Failure> {
        let config: SceneConfig =
            serde_json::from_value(value).map_err(|e| Failure::Config(format!("invalid scene: {e}")))?;
        let mut scene = Scene { config, base_dir };
        // Anchor object files so an embedded config works from any directory.
        if let ObjectSpec::File { path } = &scene.config.object {
            let abs = std::path::absolute(scene.resolve(path)).map_err(|e| Failure::Config(format!("object file: {e}")))?;
            scene.config.object = ObjectSpec::File { path: abs };
        }
        scene.check_files()?;
        Ok(scene)
    }

    fn check_files(&self) -> Result<(), Failure> {
        if let ObjectSpec::File { path } = &self.config.object {
            let p = self.resolve(path);
            if !p.is_file() {
                return Err(Failure::Config(format!("object file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Object-plane path: the configured path with any relay lens removed.
    pub fn object_path(&self) -> Result<OpticalPath, Failure> {
        let p = &self.config.path;
        let mut out = OpticalPath::free_space(p.distance(), p.wavenumber()).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(lr) = p.reference_path_length() {
            out = out.with_reference_path_length(lr).map_err(|e| Failure::Config(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn line_mode(&self) -> bool {
        self.config.run.mode != Mode::Analytic
    }

    /// `8 max(a0, a_L)` with `a_L = 2L / (k rho0)`.
    pub fn default_extent(&self) -> f64 {
        let src = &self.config.source;
        let p = &self.config.path;
        let a_l = 2.0 * p.distance() / (p.wavenumber() * src.coherence_length());
        8.0 * src.beam_radius().max(a_l)
    }

    pub fn object_grid(&self) -> Result<PlaneGrid, Failure> {
        let line = self.line_mode();
        if let Some(g) = self.config.run.grid {
            return g.plane(line, self.default_extent());
        }
        if let ObjectSpec::File { path } = &self.config.object {
            let f = GridFile::load(self.resolve(path)).map_err(|e| Failure::Config(format!("object file: {e}")))?;
            return f.header.plane().map_err(|e| Failure::Config(format!("object file: {e}")));
        }
        GridSpec::default().plane(line, self.default_extent())
    }

    pub fn object(&self, grid: PlaneGrid) -> Result<ObjectMask, Failure> {
        let bad = |e: ghost_imaging::ImagingError| Failure::Config(format!("object: {e}"));
        Ok(match &self.config.object {
            ObjectSpec::Point { center } => ObjectMask::point(grid, *center).map_err(bad)?,
            ObjectSpec::Uniform => ObjectMask::uniform(grid),
            ObjectSpec::Disk { center, radius } => ObjectMask::disk(grid, *center, *radius),
            ObjectSpec::DoubleSlit { width, separation, height } => {
                ObjectMask::double_slit(grid, *width, *separation, *height).map_err(bad)?
            }
            ObjectSpec::Letter { glyph, size } => ObjectMask::letter(grid, *glyph, *size).map_err(bad)?,
            ObjectSpec::Inline { values, phase } => {
                if let Some(ph) = phase {
                    if ph.len() != values.len() {
                        return Err(Failure::Config("object: phase and values differ in length".into()));
                    }
                }
                let t = values
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| Complex64::from_polar(m, phase.as_ref().map_or(0.0, |p| p[i])))
                    .collect();
                ObjectMask::new(grid, t).map_err(bad)?
            }
            ObjectSpec::File { path } => {
                let f = GridFile::load(self.resolve(path)).map_err(|e| Failure::Config(format!("object file: {e}")))?;
                let fg = f.header.plane().map_err(|e| Failure::Config(format!("object file: {e}")))?;
                let t = match f.complex_values() {
                    Some(c) => c,
                    None => f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
                };
                let m = ObjectMask::new(fg, t).map_err(bad)?;
                if fg == grid {
                    m
                } else {
                    m.resample(grid)
                }
            }
        })
    }

    pub fn detector(&self, object_grid: PlaneGrid) -> Result<DetectorModel, Failure> {
        let d = &self.config.detector;
        let scan = match d.scan {
            Some(s) => s.plane(object_grid.is_line(), self.default_extent())?,
            None => object_grid,
        };
        DetectorModel::new(d.quantum_efficiency, d.integration_time, scan, d.bucket.into())
            .map_err(|e| Failure::Config(format!("detector: {e}")))
    }

    pub fn input_axis(&self) -> Result<Axis, Failure> {
        match self.config.run.input_grid {
            Some(g) => g.axis(self.default_extent()),
            None => ghost_imaging::propagation::default_line_axis(&self.config.source, &self.config.path)
                .map_err(|e| Failure::Config(e.to_string())),
        }
    }
}

/// Canonical JSON of a config (field order fixed by the types).
pub fn canonical_json(cfg: &SceneConfig) -> Vec<u8> {
    serde_json::to_vec(cfg).expect("config serializes")
}

fn lookup<'a>(v: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(v, |v, k| v.get(k))
}

fn lookup_mut<'a>(v: &'a mut Value, dotted: &str) -> Option<&'a mut Value> {
    dotted.split('.').try_fold(v, |v, k| v.get_mut(k))
}

/// Config for one sweep point: each `(axis, value)` written into the base
/// config, sweep axes cleared.
pub fn sweep_point(base: &SceneConfig, assignment: &[(&SweepAxis, f64)]) -> Result<SceneConfig, Failure> {
    let original = serde_json::to_value(base).expect("config serializes");
    let mut v = original.clone();
    for (axis, value) in assignment {
        let scale = match &axis.relative_to {
            Some(r) => lookup(&original, r)
                .and_then(Value::as_f64)
                .ok_or_else(|| Failure::Config(format!("sweep: relative_to field {r:?} is not a number")))?,
            None => 1.0,
        };
        let slot = lookup_mut(&mut v, &axis.parameter)
            .filter(|s| s.is_number())
            .ok_or_else(|| Failure::Config(format!("sweep: {:?} is not a numeric config field", axis.parameter)))?;
        let x = value * scale;
        *slot = if slot.is_u64() && x.fract() == 0.0 && x >= 0.0 { Value::from(x as u64) } else { Value::from(x) };
    }
    if let Some(run) = v.get_mut("run") {
        if let Some(obj) = run.as_object_mut() {
            obj.remove("sweep");
        }
    }
    serde_json::from_value(v).map_err(|e| Failure::Config(format!("sweep point: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
        "source": {"photon_flux": 1e6, "beam_radius": 1e-3, "coherence_length": 1e-4,
                   "coherence_time": 1e-9, "class": "thermal"},
        "path": {"distance": 0.005, "wavenumber": 1e7},
        "object": {"kind": "double_slit", "width": 1e-4, "separation": 4e-4},
        "detector": {"quantum_efficiency": 0.9, "integration_time": 1e-10},
        "run": {"sweep": [{"parameter": "detector.integration_time", "values": [0.5, 2],
                           "relative_to": "source.coherence_time"}]}
    }"#;

    fn scene() -> Scene {
        Scene::from_value(serde_json::from_str(SCENE).unwrap(), PathBuf::new()).unwrap()
    }

    #[test]
    fn defaults_and_round_trip() {
        let s = scene();
        assert_eq!(s.config.run.mode, Mode::Analytic);
        assert_eq!(s.config.run.snapshots, 1000);
        let g = s.object_grid().unwrap();
        assert_eq!(g.nx(), 512);
        assert!(!g.is_line());
        assert!((g.x.extent() - 8e-3).abs() < 1e-15);
        let back: SceneConfig = serde_json::from_slice(&canonical_json(&s.config)).unwrap();
        assert_eq!(back, s.config);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        let mut v: Value = serde_json::from_str(SCENE).unwrap();
        v["detector"]["colour"] = Value::from(1);
        assert!(matches!(Scene::from_value(v, PathBuf::new()), Err(Failure::Config(_))));
        let mut v: Value = serde_json::from_str(SCENE).unwrap();
        v["source"]["coherence_length"] = Value::from(-1.0);
        assert!(matches!(Scene::from_value(v, PathBuf::new()), Err(Failure::Config(_))));
        let mut v: Value = serde_json::from_str(SCENE).unwrap();
        v["object"] = serde_json::json!({"kind": "file", "path": "missing.grid"});
        assert!(matches!(Scene::from_value(v, PathBuf::new()), Err(Failure::Config(_))));
    }

    #[test]
    fn sweep_point_applies_relative_values() {
        let s = scene();
        let axis = &s.config.run.sweep[0];
        let p = sweep_point(&s.config, &[(axis, 2.0)]).unwrap();
        assert_eq!(p.detector.integration_time, 2e-9);
        assert!(p.run.sweep.is_empty());
        let bad = SweepAxis { parameter: "source.class".into(), values: vec![1.0], relative_to: None };
        assert!(sweep_point(&s.config, &[(&bad, 1.0)]).is_err());
    }
}
