//! Binary pattern library with a JSON sidecar.
//!
//! Record layout, repeated once per pattern:
//! `shot_index: u64 LE | n_points: u32 LE | n_points x (re: f64 LE, im: f64 LE)`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PatternId, SourceKind, SourceModel, SourceRealization, sample_realization};
use crate::error::{GhostError, Result};
use crate::optics::{ComplexField, PlaneGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibrarySidecar {
    /// Absent for patterns that did not come from the built-in generator.
    pub seed: Option<u64>,
    pub model_kind: SourceKind,
    pub mean_intensity: f64,
    pub grid: PlaneGrid,
    pub patterns: usize,
}

impl LibrarySidecar {
    pub fn model(&self) -> Result<SourceModel> {
        SourceModel::new(self.model_kind, self.grid, self.mean_intensity)
    }
}

#[derive(Debug, Clone)]
pub struct PatternLibrary {
    pub sidecar: LibrarySidecar,
    pub patterns: Vec<SourceRealization>,
}

pub fn export_library(
    bin_path: &Path,
    sidecar_path: &Path,
    model: &SourceModel,
    seed: Option<u64>,
    patterns: &[SourceRealization],
) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(bin_path)?);
    for p in patterns {
        if p.field.grid() != &model.grid {
            return Err(GhostError::Dimension(format!(
                "pattern {} is not on the source grid",
                p.pattern_id.shot_index
            )));
        }
        out.write_all(&p.pattern_id.shot_index.to_le_bytes())?;
        let n = u32::try_from(model.n_points())
            .map_err(|_| GhostError::Format("source grid too large for library".into()))?;
        out.write_all(&n.to_le_bytes())?;
        for a in p.field.amplitudes() {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
    }
    out.flush()?;

    let sidecar = LibrarySidecar {
        seed,
        model_kind: model.kind,
        mean_intensity: model.mean_intensity,
        grid: model.grid,
        patterns: patterns.len(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| GhostError::Format(e.to_string()))?;
    fs::write(sidecar_path, json + "\n")?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = *pos + n;
    if end > bytes.len() {
        return Err(GhostError::Format(format!(
            "pattern library truncated at byte {}",
            bytes.len()
        )));
    }
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

fn read_f64(bytes: &[u8], pos: &mut usize) -> Result<f64> {
    Ok(f64::from_le_bytes(take(bytes, pos, 8)?.try_into().unwrap()))
}

/// Reads a library; when the sidecar carries a seed, every pattern is
/// checked bit-for-bit against regeneration.
pub fn import_library(bin_path: &Path, sidecar_path: &Path) -> Result<PatternLibrary> {
    let sidecar_text = fs::read_to_string(sidecar_path)?;
    let sidecar: LibrarySidecar = serde_json::from_str(&sidecar_text).map_err(|e| GhostError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let model = sidecar.model()?;
    let bytes = fs::read(bin_path)?;

    let mut pos = 0;
    let mut patterns = Vec::new();
    while pos < bytes.len() {
        let shot_index = u64::from_le_bytes(take(&bytes, &mut pos, 8)?.try_into().unwrap());
        let n = u32::from_le_bytes(take(&bytes, &mut pos, 4)?.try_into().unwrap()) as usize;
        if n != model.n_points() {
            return Err(GhostError::Format(format!(
                "pattern {shot_index} has {n} points, sidecar grid has {}",
                model.n_points()
            )));
        }
        let mut amplitudes = Vec::with_capacity(n);
        for _ in 0..n {
            let re = read_f64(&bytes, &mut pos)?;
            let im = read_f64(&bytes, &mut pos)?;
            amplitudes.push(Complex64::new(re, im));
        }
        let field = ComplexField::new(model.grid, amplitudes)?;
        let realization = SourceRealization {
            field,
            pattern_id: PatternId {
                seed: sidecar.seed.unwrap_or(0),
                shot_index,
            },
        };
        if let Some(seed) = sidecar.seed {
            let expected = sample_realization(&model, seed, shot_index);
            if expected.field != realization.field {
                return Err(GhostError::Format(format!(
                    "pattern {shot_index} does not match regeneration from seed {seed}"
                )));
            }
        }
        patterns.push(realization);
    }
    if patterns.len() != sidecar.patterns {
        return Err(GhostError::Format(format!(
            "library holds {} patterns, sidecar declares {}",
            patterns.len(),
            sidecar.patterns
        )));
    }
    Ok(PatternLibrary { sidecar, patterns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SourceModel {
        SourceModel::gaussian(PlaneGrid::centered(6, 1e-5).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, side) = (dir.path().join("p.bin"), dir.path().join("p.json"));
        let m = model();
        let pats: Vec<_> = (0..5).map(|k| sample_realization(&m, 9, k * 3)).collect();
        export_library(&bin, &side, &m, Some(9), &pats).unwrap();
        let bytes = fs::read(&bin).unwrap();
        assert_eq!(bytes.len(), 5 * (8 + 4 + 6 * 16));
        assert_eq!(&bytes[8..12], &6u32.to_le_bytes());
        let lib = import_library(&bin, &side).unwrap();
        assert_eq!(lib.patterns, pats);
        assert_eq!(lib.sidecar.seed, Some(9));
    }

    #[test]
    fn import_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, side) = (dir.path().join("p.bin"), dir.path().join("p.json"));
        let m = model();
        let pats: Vec<_> = (0..2).map(|k| sample_realization(&m, 1, k)).collect();
        export_library(&bin, &side, &m, Some(1), &pats).unwrap();
        let mut bytes = fs::read(&bin).unwrap();
        bytes[20] ^= 0x01;
        fs::write(&bin, &bytes).unwrap();
        assert!(matches!(import_library(&bin, &side), Err(GhostError::Format(_))));
        // without a seed there is nothing to regenerate against
        export_library(&bin, &side, &m, None, &pats).unwrap();
        assert!(import_library(&bin, &side).is_ok());
    }

    #[test]
    fn import_rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, side) = (dir.path().join("p.bin"), dir.path().join("p.json"));
        let m = model();
        let pats = vec![sample_realization(&m, 1, 0)];
        export_library(&bin, &side, &m, Some(1), &pats).unwrap();
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(import_library(&bin, &side), Err(GhostError::Format(_))));
    }
}
