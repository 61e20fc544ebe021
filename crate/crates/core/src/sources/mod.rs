//! Pseudothermal source realizations and the replayable C-source pattern
//! sequence.
//!
//! A realization is a pure function of `(model, seed, shot_index)`. Each
//! shot owns one keystream of the counter-based generator and each source
//! point owns two 64-bit words inside it, so shots and points can be
//! regenerated in any order. Knowing the `PatternId` of a shot is therefore
//! the same as knowing the field the source emitted.

mod library;

pub use library::{LibrarySidecar, PatternLibrary, export_library, import_library};

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};
use crate::optics::{ComplexField, PlaneGrid, PropagatorMatrix};
use crate::rng::{Domain, keyed_stream, open_unit_f64, unit_f64};

/// 32-bit words of keystream consumed per source point.
const WORDS_PER_POINT: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Circular complex Gaussian amplitude per point (thermal statistics).
    GaussianComplex,
    /// Fixed modulus with uniform random phase per point.
    PhaseOnly,
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::GaussianComplex => "gaussian_complex",
            SourceKind::PhaseOnly => "phase_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub kind: SourceKind,
    pub grid: PlaneGrid,
    /// Expected `|E_j|^2` at every source point.
    pub mean_intensity: f64,
}

impl SourceModel {
    pub fn new(kind: SourceKind, grid: PlaneGrid, mean_intensity: f64) -> Result<Self> {
        grid.validate()?;
        if !(mean_intensity >= 0.0 && mean_intensity.is_finite()) {
            return Err(GhostError::Parameter(format!(
                "mean intensity must be finite and non-negative, got {mean_intensity}"
            )));
        }
        Ok(SourceModel {
            kind,
            grid,
            mean_intensity,
        })
    }

    pub fn gaussian(grid: PlaneGrid, mean_intensity: f64) -> Result<Self> {
        Self::new(SourceKind::GaussianComplex, grid, mean_intensity)
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points
    }
}

/// Address of one pattern in the C-source sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternId {
    pub seed: u64,
    pub shot_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceRealization {
    pub field: ComplexField,
    pub pattern_id: PatternId,
}

#[inline]
fn draw_point<R: rand_chacha::rand_core::Rng>(
    rng: &mut R,
    kind: SourceKind,
    amplitude_scale: f64,
) -> Complex64 {
    let radial = open_unit_f64(rng);
    let phase = TAU * unit_f64(rng);
    let modulus = match kind {
        // |E|^2 = -m ln(u) is exponential with mean m; uniform phase makes E circular Gaussian
        SourceKind::GaussianComplex => amplitude_scale * (-radial.ln()).sqrt(),
        SourceKind::PhaseOnly => amplitude_scale,
    };
    Complex64::from_polar(modulus, phase)
}

/// Writes the amplitudes of pattern `(seed, shot_index)` into `out`.
pub fn fill_pattern(model: &SourceModel, seed: u64, shot_index: u64, out: &mut [Complex64]) {
    debug_assert_eq!(out.len(), model.n_points());
    let mut rng = keyed_stream(seed, Domain::SourcePattern, shot_index, 0);
    let scale = model.mean_intensity.sqrt();
    for a in out.iter_mut() {
        *a = draw_point(&mut rng, model.kind, scale);
    }
}

/// Draws the source field of one shot.
pub fn sample_realization(model: &SourceModel, seed: u64, shot_index: u64) -> SourceRealization {
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); model.n_points()];
    fill_pattern(model, seed, shot_index, &mut amplitudes);
    SourceRealization {
        field: ComplexField::from_parts_unchecked(model.grid, amplitudes),
        pattern_id: PatternId { seed, shot_index },
    }
}

/// Regenerates the field of a previously drawn shot from its address alone.
pub fn replay_pattern(model: &SourceModel, pattern_id: PatternId) -> SourceRealization {
    sample_realization(model, pattern_id.seed, pattern_id.shot_index)
}

/// Amplitude of a single source point of a pattern, without generating the rest.
pub fn sample_point(model: &SourceModel, pattern_id: PatternId, point: usize) -> Result<Complex64> {
    if point >= model.n_points() {
        return Err(GhostError::Dimension(format!(
            "point {point} outside source grid of {} points",
            model.n_points()
        )));
    }
    let mut rng = keyed_stream(
        pattern_id.seed,
        Domain::SourcePattern,
        pattern_id.shot_index,
        point as u128 * WORDS_PER_POINT,
    );
    Ok(draw_point(&mut rng, model.kind, model.mean_intensity.sqrt()))
}

/// Cross-plane mutual coherence `Gamma[x][y] = <E_obj(x) conj(E_ccd(y))>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceMatrix {
    n_obj: usize,
    n_ccd: usize,
    entries: Vec<Complex64>,
}

impl CoherenceMatrix {
    pub fn from_entries(n_obj: usize, n_ccd: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n_obj * n_ccd {
            return Err(GhostError::Dimension(format!(
                "coherence matrix has {} entries, expected {n_obj} x {n_ccd}",
                entries.len()
            )));
        }
        Ok(CoherenceMatrix {
            n_obj,
            n_ccd,
            entries,
        })
    }

    pub fn n_obj(&self) -> usize {
        self.n_obj
    }

    pub fn n_ccd(&self) -> usize {
        self.n_ccd
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.entries[x * self.n_ccd + y]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `|Gamma[x][y]|^2` as a row-major table.
    pub fn squared_modulus(&self) -> Vec<f64> {
        self.entries.iter().map(|g| g.norm_sqr()).collect()
    }

    /// `Gamma^H`, i.e. the coherence with the two planes exchanged.
    pub fn adjoint(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for y in 0..self.n_ccd {
            for x in 0..self.n_obj {
                entries.push(self.get(x, y).conj());
            }
        }
        CoherenceMatrix {
            n_obj: self.n_ccd,
            n_ccd: self.n_obj,
            entries,
        }
    }
}

/// Analytic mutual coherence of two arms fed by the same source:
/// `Gamma[x][y] = mean_intensity * sum_j g_obj[x][j] conj(g_ccd[y][j])`.
pub fn mutual_coherence(
    model: &SourceModel,
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
) -> Result<CoherenceMatrix> {
    if g_obj.src() != g_ccd.src() {
        return Err(GhostError::Dimension(
            "object and CCD propagators do not share a source grid".into(),
        ));
    }
    if g_obj.cols() != model.n_points() {
        return Err(GhostError::Dimension(format!(
            "source model has {} points but propagators expect {}",
            model.n_points(),
            g_obj.cols()
        )));
    }
    let (n_obj, n_ccd) = (g_obj.rows(), g_ccd.rows());
    let mut entries = Vec::with_capacity(n_obj * n_ccd);
    for x in 0..n_obj {
        let gx = g_obj.row(x);
        for y in 0..n_ccd {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in gx.iter().zip(g_ccd.row(y)) {
                acc += a * b.conj();
            }
            entries.push(acc * model.mean_intensity);
        }
    }
    Ok(CoherenceMatrix {
        n_obj,
        n_ccd,
        entries,
    })
}
