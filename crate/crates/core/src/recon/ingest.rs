//! Object and propagator ingestion.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use super::config::ObjectSource;
use crate::correlation::ObjectSpec;
use crate::error::{GhostError, Result};
use crate::optics::{PlaneGrid, PropagatorMatrix};

#[derive(Debug, Clone)]
pub struct LoadedObject {
    pub object: ObjectSpec,
    pub warnings: Vec<String>,
}

/// Builds the object transmittance on `grid`.
///
/// File and inline samples are clamped to `|t| <= 1` (phase kept) and file
/// samples are resampled to the grid by nearest neighbour.
pub fn load_object(spec: &ObjectSource, grid: PlaneGrid) -> Result<LoadedObject> {
    let mut warnings = Vec::new();
    let object = if let Some(name) = &spec.builtin {
        let width = spec.width.unwrap_or(0.0);
        match name.as_str() {
            "single-slit" => ObjectSpec::single_slit(grid, width, spec.center.unwrap_or(0.0))?,
            "double-slit" => ObjectSpec::double_slit(grid, width, spec.separation.unwrap_or(0.0))?,
            "grating" => ObjectSpec::grating(grid, width, spec.period.unwrap_or(0.0))?,
            other => {
                return Err(GhostError::config(
                    "object.builtin",
                    format!("unknown builtin `{other}`"),
                ));
            }
        }
    } else if let Some(path) = &spec.file {
        let samples = read_object_csv(path)?;
        let values = resample_nearest(&samples, grid);
        ObjectSpec::new(grid, clamp(values, &mut warnings))?
    } else if let Some(samples) = &spec.samples {
        if samples.len() != grid.n_points {
            return Err(GhostError::config(
                "object.samples",
                format!("{} samples for an object grid of {} points", samples.len(), grid.n_points),
            ));
        }
        let values = samples.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        ObjectSpec::new(grid, clamp(values, &mut warnings))?
    } else {
        return Err(GhostError::config("object", "no transmittance given"));
    };
    if object.is_opaque() {
        warnings.push("object is completely opaque; correlation images will be empty".into());
    }
    Ok(LoadedObject { object, warnings })
}

fn clamp(values: Vec<Complex64>, warnings: &mut Vec<String>) -> Vec<Complex64> {
    let mut clamped = 0;
    let out = values
        .into_iter()
        .map(|t| {
            let m = t.norm();
            if m > 1.0 {
                clamped += 1;
                t / m
            } else {
                t
            }
        })
        .collect();
    if clamped > 0 {
        warnings.push(format!("clamped {clamped} transmittance samples with |t| > 1"));
    }
    out
}

fn parse_fields(line: &str, expected: usize, path: &Path, lineno: usize) -> Result<Option<Vec<f64>>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(GhostError::Format(format!(
            "{}:{lineno}: expected {expected} columns, found {}",
            path.display(),
            fields.len()
        )));
    }
    let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
    match parsed {
        Ok(v) => Ok(Some(v)),
        // a non-numeric first line is a header
        Err(_) if lineno == 1 => Ok(None),
        Err(e) => Err(GhostError::Format(format!("{}:{lineno}: {e}", path.display()))),
    }
}

/// Reads `x_m, re_t, im_t` rows (header optional).
pub fn read_object_csv(path: &Path) -> Result<Vec<(f64, Complex64)>> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(v) = parse_fields(line, 3, path, i + 1)? {
            samples.push((v[0], Complex64::new(v[1], v[2])));
        }
    }
    if samples.is_empty() {
        return Err(GhostError::Format(format!("{} holds no samples", path.display())));
    }
    Ok(samples)
}

pub fn write_object_csv(object: &ObjectSpec, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "x_m,re_t,im_t")?;
    for (i, t) in object.transmittance().iter().enumerate() {
        writeln!(out, "{:e},{:e},{:e}", object.grid().coordinate(i), t.re, t.im)?;
    }
    out.flush()?;
    Ok(())
}

fn resample_nearest(samples: &[(f64, Complex64)], grid: PlaneGrid) -> Vec<Complex64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    grid.coordinates()
        .into_iter()
        .map(|x| {
            let i = sorted.partition_point(|s| s.0 < x);
            let candidates = [i.checked_sub(1), (i < sorted.len()).then_some(i)];
            let best = candidates
                .into_iter()
                .flatten()
                .min_by(|&a, &b| (sorted[a].0 - x).abs().total_cmp(&(sorted[b].0 - x).abs()))
                .unwrap();
            sorted[best].1
        })
        .collect()
}

/// Reads a propagator from `row, col, re, im` rows; missing entries are zero.
pub fn read_propagator_csv(path: &Path, src: PlaneGrid, dst: PlaneGrid) -> Result<PropagatorMatrix> {
    let text = fs::read_to_string(path)?;
    let mut entries = vec![Complex64::new(0.0, 0.0); src.n_points * dst.n_points];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some(v) = parse_fields(line, 4, path, i + 1)? else {
            continue;
        };
        let (row, col) = (v[0] as usize, v[1] as usize);
        if v[0] < 0.0 || v[1] < 0.0 || v[0].fract() != 0.0 || v[1].fract() != 0.0 || row >= dst.n_points || col >= src.n_points {
            return Err(GhostError::Format(format!(
                "{}:{}: entry ({}, {}) outside {} x {}",
                path.display(),
                i + 1,
                v[0],
                v[1],
                dst.n_points,
                src.n_points
            )));
        }
        entries[row * src.n_points + col] = Complex64::new(v[2], v[3]);
    }
    PropagatorMatrix::from_entries(src, dst, entries, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PlaneGrid {
        PlaneGrid::centered(n, 1e-5).unwrap()
    }

    #[test]
    fn builtin_double_slit() {
        let source = ObjectSource {
            builtin: Some("double-slit".into()),
            width: Some(1e-5),
            separation: Some(6e-5),
            ..Default::default()
        };
        let obj = load_object(&source, PlaneGrid::centered(9, 1e-5).unwrap()).unwrap().object;
        assert_eq!(
            obj.intensity_transmission(),
            vec![0., 1., 0., 0., 0., 0., 0., 1., 0.]
        );
    }

    #[test]
    fn uniform_csv_object() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "x_m,re_t,im_t\n-1,1,0\n0,1,0\n1,1,0\n").unwrap();
        let source = ObjectSource { file: Some(path), ..Default::default() };
        let loaded = load_object(&source, grid(5)).unwrap();
        assert_eq!(loaded.object, ObjectSpec::uniform(grid(5)));
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn clamping_and_column_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "0,3,4\n").unwrap();
        let source = ObjectSource { file: Some(path.clone()), ..Default::default() };
        let loaded = load_object(&source, grid(2)).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        let t = loaded.object.transmittance()[0];
        assert!((t - Complex64::new(0.6, 0.8)).norm() < 1e-15);

        fs::write(&path, "0,1\n").unwrap();
        assert!(matches!(load_object(&source, grid(2)), Err(GhostError::Format(_))));
    }

    #[test]
    fn off_grid_samples_resample_idempotently() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        // irregular, off-grid sampling of a smooth complex profile
        let mut text = String::new();
        for k in 0..37 {
            let x = -2.3e-5 + k as f64 * 1.31e-6;
            let t = Complex64::from_polar(0.5 + 0.4 * (x * 1e5).sin(), x * 3e5);
            text.push_str(&format!("{x:e},{:e},{:e}\n", t.re, t.im));
        }
        fs::write(&path, text).unwrap();
        let g = PlaneGrid::new(9, 5e-6, 1e-6).unwrap();
        let first = load_object(&ObjectSource { file: Some(path), ..Default::default() }, g).unwrap().object;
        let exported = dir.path().join("resampled.csv");
        write_object_csv(&first, &exported).unwrap();
        let second = load_object(&ObjectSource { file: Some(exported), ..Default::default() }, g).unwrap().object;
        assert_eq!(first, second);
    }

    #[test]
    fn opaque_object_warns() {
        let source = ObjectSource { samples: Some(vec![[0.0, 0.0]; 3]), ..Default::default() };
        let loaded = load_object(&source, grid(3)).unwrap();
        assert!(loaded.object.is_opaque());
        assert_eq!(loaded.warnings.len(), 1);
        let bad = ObjectSource { samples: Some(vec![[0.0, 0.0]; 2]), ..Default::default() };
        assert!(load_object(&bad, grid(3)).is_err());
    }

    #[test]
    fn propagator_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        fs::write(&path, "row,col,re,im\n0,0,1,0\n1,1,0,1\n").unwrap();
        let p = read_propagator_csv(&path, grid(2), grid(2)).unwrap();
        assert_eq!(p.entry(1, 1), Complex64::new(0.0, 1.0));
        assert_eq!(p.entry(0, 1), Complex64::new(0.0, 0.0));
        fs::write(&path, "2,0,1,0\n").unwrap();
        assert!(read_propagator_csv(&path, grid(2), grid(2)).is_err());
    }
}
