//! Experiment orchestration: one run writes its artifacts and a manifest
//! into the output directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value, json};
use sha2::{Digest, Sha256};

use super::config::{Mode, ObjectSource, RunConfig};
use super::ingest::{load_object, read_propagator_csv};
use super::verify::{check_instance, random_instance};
use crate::correlation::export::{save_image_csv, save_kernel_pgm};
use crate::correlation::{
    ImageResult, ObjectSpec, argmax, cgi_sequence_image, correlation_kernel, fwhm, klyshko_psf,
    normalized_correlation, pgi_ensemble,
};
use crate::error::{GhostError, Result};
use crate::optics::{Geometry, PropagatorMatrix};
use crate::photon::{PhotonRunConfig, image_from_histogram, joint_table, sample_pairs, single_photon_cgi};
use crate::sources::{export_library, sample_realization};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Largest relative disagreement tolerated by `verify-eq1`.
pub const EQ1_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub out_dir: PathBuf,
    /// File names inside `out_dir`, manifest last.
    pub artifacts: Vec<String>,
    pub summary: Map<String, Value>,
    pub warnings: Vec<String>,
}

struct Arms {
    g_obj: PropagatorMatrix,
    g_ccd: PropagatorMatrix,
    /// Bytes of user-supplied propagator files, folded into the geometry hash.
    file_bytes: Vec<u8>,
}

fn build_arms(cfg: &RunConfig, geo: &Geometry) -> Result<Arms> {
    match &cfg.propagators {
        Some(files) => {
            let g_obj = read_propagator_csv(&files.object_arm, geo.source_grid, geo.object_grid)?;
            let g_ccd = read_propagator_csv(&files.ccd_arm, geo.source_grid, geo.ccd_grid)?;
            let mut file_bytes = fs::read(&files.object_arm)?;
            file_bytes.extend(fs::read(&files.ccd_arm)?);
            Ok(Arms { g_obj, g_ccd, file_bytes })
        }
        None => Ok(Arms {
            g_obj: geo.object_propagator()?,
            g_ccd: geo.ccd_propagator()?,
            file_bytes: Vec::new(),
        }),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn geometry_hash(cfg: &RunConfig, arms: Option<&Arms>) -> String {
    let mut h = Sha256::new();
    if let Some(geo) = &cfg.geometry {
        h.update(serde_json::to_vec(geo).expect("geometry serializes"));
    }
    if let Some(a) = arms {
        h.update(&a.file_bytes);
    }
    hex(&h.finalize())
}

struct Outputs<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
    summary: Map<String, Value>,
}

impl Outputs<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

/// Executes `cfg`, writing every artifact and `manifest.json` under `cfg.out`.
///
/// The manifest embeds the resolved config, so `parse_config` on the
/// manifest reproduces the run bit for bit.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    fs::create_dir_all(&cfg.out)?;
    let mut out = Outputs {
        dir: &cfg.out,
        artifacts: Vec::new(),
        summary: Map::new(),
    };
    let mut warnings = Vec::new();
    let mut manifest_cfg = cfg.clone();

    let arms = if cfg.mode == Mode::VerifyEq1 {
        run_verify(cfg, &mut out)?;
        None
    } else {
        let geo = cfg.require_geometry()?.geometry();
        let arms = build_arms(cfg, &geo)?;
        let source = cfg
            .object
            .as_ref()
            .ok_or_else(|| GhostError::config("object", "missing"))?;
        let loaded = load_object(source, geo.object_grid)?;
        warnings.extend(loaded.warnings);
        if source.file.is_some() {
            // the manifest carries the resampled object so reruns do not depend on the file
            manifest_cfg.object = Some(ObjectSource {
                samples: Some(loaded.object.transmittance().iter().map(|t| [t.re, t.im]).collect()),
                ..Default::default()
            });
        }
        run_imaging(cfg, &arms, &loaded.object, &mut out)?;
        Some(arms)
    };

    if let Some(p) = &mut manifest_cfg.propagators {
        p.object_arm = fs::canonicalize(&p.object_arm)?;
        p.ccd_arm = fs::canonicalize(&p.ccd_arm)?;
    }
    let mut artifacts = out.artifacts.clone();
    artifacts.push(MANIFEST_FILE.to_string());
    let manifest = json!({
        "tool": "ghostsim",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "geometry_hash": geometry_hash(cfg, arms.as_ref()),
        "config": manifest_cfg.to_json_value(),
        "artifacts": artifacts,
        "summary": out.summary,
        "warnings": warnings,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| GhostError::Format(e.to_string()))?;
    fs::write(cfg.out.join(MANIFEST_FILE), text + "\n")?;

    Ok(RunReport {
        mode: cfg.mode,
        out_dir: cfg.out.clone(),
        artifacts,
        summary: out.summary,
        warnings,
    })
}

fn image_summary(out: &mut Outputs<'_>, image: &ImageResult) {
    out.note("shots", image.shots);
    if let Some(peak) = argmax(&image.covariance) {
        out.note("peak_index", peak);
        out.note("peak_covariance", image.covariance[peak]);
    }
}

fn run_imaging(cfg: &RunConfig, arms: &Arms, object: &ObjectSpec, out: &mut Outputs<'_>) -> Result<()> {
    let (g_obj, g_ccd) = (&arms.g_obj, &arms.g_ccd);
    match cfg.mode {
        Mode::Pgi => {
            let image = pgi_ensemble(&cfg.source_model()?, cfg.seed, cfg.shots, g_obj, g_ccd, object)?;
            save_image_csv(&image, &out.path("image.csv"))?;
            image_summary(out, &image);
        }
        Mode::Cgi => {
            let model = cfg.source_model()?;
            let image = cgi_sequence_image(&model, cfg.seed, cfg.shots, g_obj, g_ccd, object)?;
            save_image_csv(&image, &out.path("image.csv"))?;
            image_summary(out, &image);
            if cfg.export_patterns {
                let patterns: Vec<_> = (0..cfg.shots)
                    .map(|r| sample_realization(&model, cfg.seed, r))
                    .collect();
                let bin = out.path("patterns.bin");
                let sidecar = out.path("patterns.json");
                export_library(&bin, &sidecar, &model, Some(cfg.seed), &patterns)?;
            }
        }
        Mode::CgiPhoton => {
            let model = cfg.source_model()?;
            let photon_cfg = PhotonRunConfig {
                shots: cfg.shots,
                detection_rate: cfg.mu,
                seed: cfg.seed,
            };
            let photon = single_photon_cgi(&model, g_obj, g_ccd, object, &photon_cfg)?;
            let reference = cgi_sequence_image(&model, cfg.seed, cfg.shots, g_obj, g_ccd, object)?;
            save_image_csv(&photon.image, &out.path("image.csv"))?;
            save_image_csv(&reference, &out.path("reference_image.csv"))?;
            image_summary(out, &photon.image);
            out.note("clicks", photon.clicks);
            out.note("bucket_max", photon.bucket_max);
            let r = normalized_correlation(&photon.image.covariance, &reference.covariance);
            out.note("correlation_with_reference", r.map_or(Value::Null, Value::from));
        }
        Mode::PairMc => {
            if cfg.shots == 0 {
                return Err(GhostError::InsufficientData("pair-mc needs at least one pair".into()));
            }
            let table = joint_table(g_obj, g_ccd, object)?;
            let hist = sample_pairs(&table, cfg.shots, cfg.seed)?;
            hist.write_csv(BufWriter::new(fs::File::create(out.path("histogram.csv"))?))?;
            let image = image_from_histogram(&hist, &table.singles_reference())?;
            let exact = table.image_profile();
            let mut w = BufWriter::new(fs::File::create(out.path("pair_image.csv"))?);
            writeln!(w, "y_coordinate_m,coincidences,accidentals,image,exact_image")?;
            for (y, e) in exact.iter().enumerate() {
                writeln!(
                    w,
                    "{:e},{:e},{:e},{:e},{e:e}",
                    table.y_grid().coordinate(y),
                    image.coincidences[y],
                    image.accidentals[y],
                    image.image[y],
                )?;
            }
            w.flush()?;
            out.note("pairs", hist.total());
            out.note("total_variation", hist.total_variation(table.probs()));
            let r = normalized_correlation(&image.image, &exact);
            out.note("correlation_with_exact", r.map_or(Value::Null, Value::from));
        }
        Mode::Psf => run_psf(cfg, g_obj, g_ccd, out)?,
        Mode::VerifyEq1 => unreachable!("handled without a geometry"),
    }
    Ok(())
}

fn run_psf(cfg: &RunConfig, g_obj: &PropagatorMatrix, g_ccd: &PropagatorMatrix, out: &mut Outputs<'_>) -> Result<()> {
    let geo = cfg.require_geometry()?;
    let pitch = geo.ccd_grid.pitch;
    let scale = geo.wavelength * geo.z_object / geo.source_grid.extent();
    let mut w = BufWriter::new(fs::File::create(out.path("psf_table.csv"))?);
    writeln!(w, "x_index,x_m,argmax_y,peak_y_m,fwhm_m,diffraction_scale_m")?;
    let mut widths = Vec::new();
    for x in 0..g_obj.rows() {
        let profile: Vec<f64> = klyshko_psf(g_obj, g_ccd, x)?
            .amplitudes()
            .iter()
            .map(|a| a.norm_sqr())
            .collect();
        let peak = argmax(&profile).expect("non-empty CCD grid");
        let width = fwhm(&profile, peak).map(|s| s * pitch);
        if let Some(wd) = width {
            widths.push(wd);
        }
        let width_text = width.map_or("nan".to_string(), |v| format!("{v:e}"));
        writeln!(
            w,
            "{x},{:e},{peak},{:e},{width_text},{scale:e}",
            g_obj.dst().coordinate(x),
            g_ccd.dst().coordinate(peak)
        )?;
    }
    w.flush()?;
    let kernel = correlation_kernel(g_obj, g_ccd)?;
    let pgm = out.path("psf_kernel.pgm");
    let sidecar = out.path("psf_kernel.json");
    save_kernel_pgm(&kernel, g_ccd.rows(), g_obj.rows(), "correlation kernel |psf|^2", &pgm, &sidecar)?;
    out.note("diffraction_scale_m", scale);
    if !widths.is_empty() {
        widths.sort_by(f64::total_cmp);
        out.note("median_fwhm_m", widths[widths.len() / 2]);
    }
    Ok(())
}

fn run_verify(cfg: &RunConfig, out: &mut Outputs<'_>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(out.path("eq1_report.csv"))?);
    writeln!(w, "instance,n_s,n_x,n_y,max_relative_error")?;
    let mut worst = 0.0f64;
    for i in 0..cfg.instances as u64 {
        let check = check_instance(&random_instance(cfg.seed, i))?;
        writeln!(
            w,
            "{i},{},{},{},{:e}",
            check.n_s, check.n_x, check.n_y, check.max_relative_error
        )?;
        worst = worst.max(check.max_relative_error);
    }
    w.flush()?;
    out.note("instances", cfg.instances);
    out.note("max_relative_error", worst);
    if worst > EQ1_TOLERANCE {
        return Err(GhostError::Numerical(format!(
            "factored and term-by-term correlation differ by {worst:e} (tolerance {EQ1_TOLERANCE:e})"
        )));
    }
    Ok(())
}
