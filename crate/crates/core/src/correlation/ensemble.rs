use num_complex::Complex64;
use rayon::prelude::*;

use super::{CorrelationAccumulator, ImageResult, ObjectSpec, check_arms};
use crate::error::{GhostError, Result};
use crate::optics::PropagatorMatrix;
use crate::sources::{PatternId, SourceModel, SourceRealization, fill_pattern, replay_pattern};

/// Shots per work unit. Fixed so that results do not depend on the thread count.
pub const SHARD_SHOTS: u64 = 4096;

/// Per-shot detector model: source amplitudes in, bucket value and CCD frame out.
pub struct ShotKernel<'a> {
    g_obj: &'a PropagatorMatrix,
    g_ccd: &'a PropagatorMatrix,
    /// `|t(x)|^2 * pitch_obj`
    bucket_weights: Vec<f64>,
    e_obj: Vec<Complex64>,
    e_ccd: Vec<Complex64>,
    i_ccd: Vec<f64>,
}

impl<'a> ShotKernel<'a> {
    pub fn new(
        g_obj: &'a PropagatorMatrix,
        g_ccd: &'a PropagatorMatrix,
        object: &ObjectSpec,
    ) -> Result<Self> {
        check_arms(g_obj, g_ccd, object)?;
        let pitch = object.grid().pitch;
        Ok(ShotKernel {
            g_obj,
            g_ccd,
            bucket_weights: object.intensity_transmission().iter().map(|t| t * pitch).collect(),
            e_obj: vec![Complex64::new(0.0, 0.0); g_obj.rows()],
            e_ccd: vec![Complex64::new(0.0, 0.0); g_ccd.rows()],
            i_ccd: vec![0.0; g_ccd.rows()],
        })
    }

    pub fn source_points(&self) -> usize {
        self.g_obj.cols()
    }

    /// Bucket value for a source field.
    pub fn bucket(&mut self, source: &[Complex64]) -> f64 {
        self.g_obj.apply_into(source, &mut self.e_obj);
        self.e_obj
            .iter()
            .zip(&self.bucket_weights)
            .map(|(e, w)| w * e.norm_sqr())
            .sum()
    }

    /// CCD intensities for a source field.
    pub fn ccd_frame(&mut self, source: &[Complex64]) -> &[f64] {
        self.g_ccd.apply_into(source, &mut self.e_ccd);
        for (i, e) in self.i_ccd.iter_mut().zip(&self.e_ccd) {
            *i = e.norm_sqr();
        }
        &self.i_ccd
    }
}

fn check_model(model: &SourceModel, g_obj: &PropagatorMatrix) -> Result<()> {
    if model.grid != *g_obj.src() {
        return Err(GhostError::Dimension(
            "source model grid does not match the propagators' source grid".into(),
        ));
    }
    Ok(())
}

pub(crate) fn shard_ranges(shots: u64) -> Vec<(u64, u64)> {
    (0..shots.div_ceil(SHARD_SHOTS))
        .map(|s| (s * SHARD_SHOTS, ((s + 1) * SHARD_SHOTS).min(shots)))
        .collect()
}

fn merge_in_order(
    grid: crate::optics::PlaneGrid,
    parts: Vec<Result<CorrelationAccumulator>>,
) -> Result<CorrelationAccumulator> {
    let mut total = CorrelationAccumulator::new(grid);
    for part in parts {
        total.merge(&part?)?;
    }
    Ok(total)
}

/// Pseudothermal ghost imaging: both arms are illuminated by the same random
/// source field each shot; the CCD frame is measured, the bucket integrates
/// the light transmitted by the object.
pub fn pgi_ensemble(
    model: &SourceModel,
    seed: u64,
    shots: u64,
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
) -> Result<ImageResult> {
    check_model(model, g_obj)?;
    ShotKernel::new(g_obj, g_ccd, object)?;
    let parts: Vec<_> = shard_ranges(shots)
        .into_par_iter()
        .map(|(start, end)| {
            let mut kernel = ShotKernel::new(g_obj, g_ccd, object)?;
            let mut acc = CorrelationAccumulator::new(*g_ccd.dst());
            let mut source = vec![Complex64::new(0.0, 0.0); model.n_points()];
            for shot in start..end {
                fill_pattern(model, seed, shot, &mut source);
                let b = kernel.bucket(&source);
                acc.accumulate(b, kernel.ccd_frame(&source))?;
            }
            Ok(acc)
        })
        .collect();
    merge_in_order(*g_ccd.dst(), parts)?.finalize()
}

/// Computational ghost imaging over an explicit, fully known pattern set:
/// every pattern is propagated through both arms and the exact sample
/// correlation over the set is returned.
pub fn cgi_expected_image(
    patterns: &[SourceRealization],
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
) -> Result<ImageResult> {
    if patterns.is_empty() {
        return Err(GhostError::InsufficientData("empty pattern set".into()));
    }
    ShotKernel::new(g_obj, g_ccd, object)?;
    if let Some(p) = patterns.iter().find(|p| p.field.grid() != g_obj.src()) {
        return Err(GhostError::Dimension(format!(
            "pattern {} is not on the source grid",
            p.pattern_id.shot_index
        )));
    }
    let parts: Vec<_> = patterns
        .par_chunks(SHARD_SHOTS as usize)
        .map(|chunk| {
            let mut kernel = ShotKernel::new(g_obj, g_ccd, object)?;
            let mut acc = CorrelationAccumulator::new(*g_ccd.dst());
            for p in chunk {
                let amplitudes = p.field.amplitudes();
                let b = kernel.bucket(amplitudes);
                acc.accumulate(b, kernel.ccd_frame(amplitudes))?;
            }
            Ok(acc)
        })
        .collect();
    merge_in_order(*g_ccd.dst(), parts)?.finalize()
}

/// Computational ghost imaging driven by the C-source sequence
/// `(seed, 0..shots)`: the bucket sees the emitted pattern, and the CCD arm
/// is computed from the pattern replayed by its address.
pub fn cgi_sequence_image(
    model: &SourceModel,
    seed: u64,
    shots: u64,
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
) -> Result<ImageResult> {
    check_model(model, g_obj)?;
    ShotKernel::new(g_obj, g_ccd, object)?;
    let parts: Vec<_> = shard_ranges(shots)
        .into_par_iter()
        .map(|(start, end)| {
            let mut kernel = ShotKernel::new(g_obj, g_ccd, object)?;
            let mut acc = CorrelationAccumulator::new(*g_ccd.dst());
            let mut emitted = vec![Complex64::new(0.0, 0.0); model.n_points()];
            for shot in start..end {
                fill_pattern(model, seed, shot, &mut emitted);
                let b = kernel.bucket(&emitted);
                let twin = replay_pattern(model, PatternId { seed, shot_index: shot });
                acc.accumulate(b, kernel.ccd_frame(twin.field.amplitudes()))?;
            }
            Ok(acc)
        })
        .collect();
    merge_in_order(*g_ccd.dst(), parts)?.finalize()
}
