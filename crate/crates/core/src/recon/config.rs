//! JSON run configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};
use crate::optics::{Geometry, PlaneGrid, check_fresnel_sampling};
use crate::sources::{SourceKind, SourceModel};

pub const DEFAULT_SHOTS: u64 = 10_000;
pub const DEFAULT_DETECTION_RATE: f64 = 0.1;
pub const DEFAULT_INSTANCES: usize = 100;
pub const DEFAULT_OUT_DIR: &str = "ghostsim-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pgi,
    Cgi,
    CgiPhoton,
    PairMc,
    VerifyEq1,
    Psf,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Pgi,
        Mode::Cgi,
        Mode::CgiPhoton,
        Mode::PairMc,
        Mode::VerifyEq1,
        Mode::Psf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Pgi => "pgi",
            Mode::Cgi => "cgi",
            Mode::CgiPhoton => "cgi-photon",
            Mode::PairMc => "pair-mc",
            Mode::VerifyEq1 => "verify-eq1",
            Mode::Psf => "psf",
        }
    }

    fn needs_geometry(&self) -> bool {
        !matches!(self, Mode::VerifyEq1)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = GhostError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GhostError::config("mode", format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "default_kind")]
    pub kind: SourceKind,
    #[serde(default = "default_mean_intensity")]
    pub mean_intensity: f64,
}

fn default_kind() -> SourceKind {
    SourceKind::GaussianComplex
}

fn default_mean_intensity() -> f64 {
    1.0
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            kind: default_kind(),
            mean_intensity: default_mean_intensity(),
        }
    }
}

/// Where the object transmittance comes from: a builtin mask, a CSV file
/// `(x_m, re_t, im_t)`, or inline samples on the object grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// `[re, im]` pairs, one per object grid sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
}

/// User-supplied propagator matrices, CSV `(row, col, re, im)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorFiles {
    pub object_arm: PathBuf,
    pub ccd_arm: PathBuf,
}

/// Config file contents as written by the user; every field optional so that
/// validation can name what is missing.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    wavelength: Option<f64>,
    z_object: Option<f64>,
    z_ccd: Option<f64>,
    source_grid: Option<PlaneGrid>,
    object_grid: Option<PlaneGrid>,
    ccd_grid: Option<PlaneGrid>,
    source: Option<SourceSpec>,
    object: Option<ObjectSource>,
    propagators: Option<PropagatorFiles>,
    shots: Option<u64>,
    seed: Option<u64>,
    mu: Option<f64>,
    instances: Option<usize>,
    export_patterns: Option<bool>,
    out: Option<PathBuf>,
}

/// Validated configuration with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    pub source: SourceSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagators: Option<PropagatorFiles>,
    pub shots: u64,
    pub seed: u64,
    pub mu: f64,
    pub instances: usize,
    pub export_patterns: bool,
    pub out: PathBuf,
}

/// Geometry fields, flattened into the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometrySpec {
    pub wavelength: f64,
    pub z_object: f64,
    pub z_ccd: f64,
    pub source_grid: PlaneGrid,
    pub object_grid: PlaneGrid,
    pub ccd_grid: PlaneGrid,
}

impl GeometrySpec {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            source_grid: self.source_grid,
            object_grid: self.object_grid,
            ccd_grid: self.ccd_grid,
            wavelength: self.wavelength,
            z_object: self.z_object,
            z_ccd: self.z_ccd,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn source_model(&self) -> Result<SourceModel> {
        let geo = self.require_geometry()?;
        SourceModel::new(self.source.kind, geo.source_grid, self.source.mean_intensity)
    }

    pub fn require_geometry(&self) -> Result<&GeometrySpec> {
        self.geometry
            .as_ref()
            .ok_or_else(|| GhostError::config("wavelength", format!("mode {} needs a geometry", self.mode)))
    }

    /// JSON form of the resolved config; parses back to the same config.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(geo) = value.as_object_mut().and_then(|m| m.remove("geometry")) {
            let map = value.as_object_mut().unwrap();
            for (k, v) in geo.as_object().unwrap() {
                map.insert(k.clone(), v.clone());
            }
        }
        value
    }
}

fn parse_error(e: serde_json::Error) -> GhostError {
    GhostError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn grid_field(name: &str, grid: Option<PlaneGrid>) -> Result<PlaneGrid> {
    let grid = grid.ok_or_else(|| GhostError::config(name, "missing"))?;
    if grid.n_points == 0 {
        return Err(GhostError::config(&format!("{name}.n_points"), "must be at least 1"));
    }
    if !(grid.pitch > 0.0 && grid.pitch.is_finite()) {
        return Err(GhostError::config(
            &format!("{name}.pitch"),
            format!("must be positive, got {}", grid.pitch),
        ));
    }
    if !grid.center_offset.is_finite() {
        return Err(GhostError::config(&format!("{name}.center_offset"), "must be finite"));
    }
    Ok(grid)
}

fn positive_field(name: &str, value: Option<f64>) -> Result<f64> {
    let v = value.ok_or_else(|| GhostError::config(name, "missing"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(GhostError::config(name, format!("must be positive, got {v}")))
    }
}

fn resolve(raw: RawConfig, base_dir: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mode = overrides
        .mode
        .or(raw.mode)
        .ok_or_else(|| GhostError::config("mode", "missing (give it in the config or on the command line)"))?;

    let propagators = raw.propagators.map(|p| PropagatorFiles {
        object_arm: base_dir.join(p.object_arm),
        ccd_arm: base_dir.join(p.ccd_arm),
    });

    let geometry = if mode.needs_geometry() || raw.wavelength.is_some() {
        let wavelength = positive_field("wavelength", raw.wavelength)?;
        let z_object = positive_field("z_object", raw.z_object)?;
        // the CCD sits as far from the beamsplitter as the object unless told otherwise
        let z_ccd = positive_field("z_ccd", raw.z_ccd.or(Some(z_object)))?;
        let source_grid = grid_field("source_grid", raw.source_grid)?;
        let object_grid = grid_field("object_grid", raw.object_grid)?;
        let ccd_grid = grid_field("ccd_grid", raw.ccd_grid.or(Some(object_grid)))?;
        if propagators.is_none() {
            check_fresnel_sampling(&source_grid, &object_grid, wavelength, z_object)?;
            check_fresnel_sampling(&source_grid, &ccd_grid, wavelength, z_ccd)?;
        }
        Some(GeometrySpec {
            wavelength,
            z_object,
            z_ccd,
            source_grid,
            object_grid,
            ccd_grid,
        })
    } else {
        None
    };

    let source = raw.source.unwrap_or_default();
    if !(source.mean_intensity >= 0.0 && source.mean_intensity.is_finite()) {
        return Err(GhostError::config(
            "source.mean_intensity",
            format!("must be non-negative, got {}", source.mean_intensity),
        ));
    }

    let object = match raw.object {
        Some(mut obj) => {
            validate_object_source(&obj)?;
            if let Some(f) = obj.file.take() {
                let path = base_dir.join(f);
                if !path.is_file() {
                    return Err(GhostError::config(
                        "object.file",
                        format!("{} does not exist", path.display()),
                    ));
                }
                obj.file = Some(path);
            }
            Some(obj)
        }
        None if mode.needs_geometry() => return Err(GhostError::config("object", "missing")),
        None => None,
    };

    if let Some(p) = &propagators {
        for (field, path) in [("propagators.object_arm", &p.object_arm), ("propagators.ccd_arm", &p.ccd_arm)] {
            if !path.is_file() {
                return Err(GhostError::config(field, format!("{} does not exist", path.display())));
            }
        }
    }

    let shots = overrides.shots.or(raw.shots).unwrap_or(DEFAULT_SHOTS);
    let mu = raw.mu.unwrap_or(DEFAULT_DETECTION_RATE);
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(GhostError::config("mu", format!("must lie in (0, 1], got {mu}")));
    }
    let instances = raw.instances.unwrap_or(DEFAULT_INSTANCES);
    if instances == 0 {
        return Err(GhostError::config("instances", "must be at least 1"));
    }

    Ok(RunConfig {
        mode,
        geometry,
        source,
        object,
        propagators,
        shots,
        seed: overrides.seed.or(raw.seed).unwrap_or(0),
        mu,
        instances,
        export_patterns: raw.export_patterns.unwrap_or(false),
        out: overrides
            .out
            .clone()
            .or(raw.out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    })
}

fn validate_object_source(obj: &ObjectSource) -> Result<()> {
    let kinds = [obj.builtin.is_some(), obj.file.is_some(), obj.samples.is_some()];
    if kinds.iter().filter(|k| **k).count() != 1 {
        return Err(GhostError::config(
            "object",
            "give exactly one of `builtin`, `file` or `samples`",
        ));
    }
    if let Some(name) = &obj.builtin {
        let need: &[(&str, Option<f64>)] = match name.as_str() {
            "single-slit" => &[("width", obj.width)],
            "double-slit" => &[("width", obj.width), ("separation", obj.separation)],
            "grating" => &[("width", obj.width), ("period", obj.period)],
            other => {
                return Err(GhostError::config(
                    "object.builtin",
                    format!("unknown builtin `{other}` (single-slit, double-slit, grating)"),
                ));
            }
        };
        for (field, value) in need {
            positive_field(&format!("object.{field}"), *value)?;
        }
    }
    Ok(())
}

/// Parses a config (or a run manifest, which embeds its config) from JSON text.
/// Relative paths are resolved against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    let raw: RawConfig = match value.get("config") {
        Some(inner) if value.get("geometry_hash").is_some() => serde_json::from_value(inner.clone())
            .map_err(|e| GhostError::Format(format!("manifest config: {e}")))?,
        // parse from text, not the value, so errors carry line information
        _ => serde_json::from_str(text).map_err(parse_error)?,
    };
    resolve(raw, base_dir, overrides)
}

pub fn parse_config_with(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, overrides)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_with(path, &Overrides::default())
}
