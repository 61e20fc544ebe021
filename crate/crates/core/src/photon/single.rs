//! Computational ghost imaging with one real photon per shot.
//!
//! Each shot the C-source emits a known pattern. The bucket registers at most
//! one click, with probability proportional to the transmitted power. The CCD
//! arm is never measured: its intensity is computed from the pattern replayed
//! by address, i.e. the simulated twin of the detected photon.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    CorrelationAccumulator, ImageResult, ObjectSpec, SHARD_SHOTS, ShotKernel,
};
use crate::error::{GhostError, Result};
use crate::optics::PropagatorMatrix;
use crate::rng::{Domain, keyed_stream, unit_f64};
use crate::sources::{PatternId, SourceModel, fill_pattern, replay_pattern};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonRunConfig {
    pub shots: u64,
    /// Click probability of the brightest pattern, in `(0, 1]`.
    pub detection_rate: f64,
    pub seed: u64,
}

impl PhotonRunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.detection_rate > 0.0 && self.detection_rate <= 1.0) {
            return Err(GhostError::Parameter(format!(
                "detection rate must lie in (0, 1], got {}",
                self.detection_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonCgiResult {
    pub image: ImageResult,
    pub clicks: u64,
    /// Largest bucket value over the pattern sequence (thinning normalization).
    pub bucket_max: f64,
}

fn shards(shots: u64) -> Vec<(u64, u64, u64)> {
    (0..shots.div_ceil(SHARD_SHOTS))
        .map(|s| (s, s * SHARD_SHOTS, ((s + 1) * SHARD_SHOTS).min(shots)))
        .collect()
}

/// Runs the single-photon protocol over patterns `(cfg.seed, 0..cfg.shots)`.
///
/// A calibration pass over the same (replayed) patterns fixes
/// `bucket_max`; shot `r` then clicks with probability
/// `detection_rate * B_r / bucket_max`. The expected covariance is
/// `detection_rate / bucket_max` times the full-intensity CGI covariance.
pub fn single_photon_cgi(
    model: &SourceModel,
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
    cfg: &PhotonRunConfig,
) -> Result<PhotonCgiResult> {
    cfg.validate()?;
    if model.grid != *g_obj.src() {
        return Err(GhostError::Dimension(
            "source model grid does not match the propagators' source grid".into(),
        ));
    }
    ShotKernel::new(g_obj, g_ccd, object)?;
    let work = shards(cfg.shots);

    let maxima: Vec<Result<f64>> = work
        .par_iter()
        .map(|&(_, start, end)| {
            let mut kernel = ShotKernel::new(g_obj, g_ccd, object)?;
            let mut source = vec![Complex64::new(0.0, 0.0); model.n_points()];
            let mut max = 0.0f64;
            for shot in start..end {
                fill_pattern(model, cfg.seed, shot, &mut source);
                max = max.max(kernel.bucket(&source));
            }
            Ok(max)
        })
        .collect();
    let mut bucket_max = 0.0f64;
    for m in maxima {
        bucket_max = bucket_max.max(m?);
    }

    let parts: Vec<Result<(CorrelationAccumulator, u64)>> = work
        .par_iter()
        .map(|&(shard, start, end)| {
            let mut kernel = ShotKernel::new(g_obj, g_ccd, object)?;
            let mut acc = CorrelationAccumulator::new(*g_ccd.dst());
            let mut clicks_rng = keyed_stream(cfg.seed, Domain::BucketClick, shard, 0);
            let mut emitted = vec![Complex64::new(0.0, 0.0); model.n_points()];
            let mut clicks = 0;
            for shot in start..end {
                fill_pattern(model, cfg.seed, shot, &mut emitted);
                let b = kernel.bucket(&emitted);
                let p = if bucket_max > 0.0 {
                    cfg.detection_rate * b / bucket_max
                } else {
                    0.0
                };
                // always draw, so the click stream stays aligned with shot indices
                let click = unit_f64(&mut clicks_rng) < p;
                clicks += click as u64;
                let twin = replay_pattern(model, PatternId { seed: cfg.seed, shot_index: shot });
                acc.accumulate(click as u8 as f64, kernel.ccd_frame(twin.field.amplitudes()))?;
            }
            Ok((acc, clicks))
        })
        .collect();

    let mut total = CorrelationAccumulator::new(*g_ccd.dst());
    let mut clicks = 0;
    for part in parts {
        let (acc, c) = part?;
        total.merge(&acc)?;
        clicks += c;
    }
    Ok(PhotonCgiResult {
        image: total.finalize()?,
        clicks,
        bucket_max,
    })
}
