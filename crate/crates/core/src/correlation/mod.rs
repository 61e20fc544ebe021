//! Two-arm intensity correlation: exact evaluation of the bucket/CCD
//! correlation, its Klyshko advanced-wave kernel, and ensemble estimators.
//!
//! The object transmittance is folded into the object arm, `G'[x][j] =
//! t(x) G[x][j]`, so every evaluator describes light that actually reaches
//! the bucket detector. With `t = 1` the bare propagators are recovered.

mod accumulator;
mod ensemble;
pub mod export;
mod object;

pub use accumulator::{CorrelationAccumulator, ImageResult};
pub use ensemble::{ShotKernel, SHARD_SHOTS, cgi_expected_image, cgi_sequence_image, pgi_ensemble};
pub use object::ObjectSpec;

use num_complex::Complex64;

use crate::error::{GhostError, Result};
use crate::optics::{ComplexField, PropagatorMatrix};

/// Total transmitted power seen by the bucket: `sum_x |t(x)|^2 |E(x)|^2 pitch`.
pub fn bucket_signal(field_at_object: &ComplexField, object: &ObjectSpec) -> Result<f64> {
    if field_at_object.grid() != object.grid() {
        return Err(GhostError::Dimension(
            "field and object are sampled on different grids".into(),
        ));
    }
    let sum: f64 = field_at_object
        .amplitudes()
        .iter()
        .zip(object.transmittance())
        .map(|(e, t)| t.norm_sqr() * e.norm_sqr())
        .sum();
    Ok(sum * object.grid().pitch)
}

fn check_arms(g_obj: &PropagatorMatrix, g_ccd: &PropagatorMatrix, object: &ObjectSpec) -> Result<()> {
    if g_obj.src() != g_ccd.src() {
        return Err(GhostError::Dimension(
            "object and CCD propagators do not share a source grid".into(),
        ));
    }
    if g_obj.dst() != object.grid() {
        return Err(GhostError::Dimension(
            "object grid does not match the object-arm propagator".into(),
        ));
    }
    Ok(())
}

fn check_index(name: &str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(GhostError::Dimension(format!(
            "{name} index {index} out of range 0..{len}"
        )))
    }
}

/// Symmetrized two-photon sum, evaluated term by term:
/// `(1/2) sum_{j,k,x} |G'[x][j] g[y][k] + G'[x][k] g[y][j]|^2`.
///
/// Cost is `O(n_s^2 n_x)`; intended as an oracle on small instances.
pub fn eq1_bruteforce(
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
    y: usize,
) -> Result<f64> {
    check_arms(g_obj, g_ccd, object)?;
    check_index("CCD", y, g_ccd.rows())?;
    let b = g_ccd.row(y);
    let mut total = 0.0;
    for (x, t) in object.transmittance().iter().enumerate() {
        let a: Vec<Complex64> = g_obj.row(x).iter().map(|g| t * g).collect();
        for j in 0..a.len() {
            for k in 0..a.len() {
                total += (a[j] * b[k] + a[k] * b[j]).norm_sqr();
            }
        }
    }
    Ok(0.5 * total)
}

/// The two terms of the factored correlation at one CCD sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eq1Terms {
    /// `<I_b><I_y>` with `<I_b> = sum_{j,x} |G'[x][j]|^2`, `<I_y> = sum_j |g[y][j]|^2`.
    pub background: f64,
    /// `sum_x |sum_j G'[x][j] conj(g[y][j])|^2`.
    pub image: f64,
}

impl Eq1Terms {
    pub fn total(&self) -> f64 {
        self.background + self.image
    }
}

/// Factored form: coherent sum over source points inside the modulus,
/// incoherent sum over object points outside it. Cost `O(n_s n_x)`.
pub fn eq1_terms(
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
    y: usize,
) -> Result<Eq1Terms> {
    check_arms(g_obj, g_ccd, object)?;
    check_index("CCD", y, g_ccd.rows())?;
    let b = g_ccd.row(y);
    let mean_iy: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    let mut mean_ib = 0.0;
    let mut image = 0.0;
    for (x, t) in object.transmittance().iter().enumerate() {
        let t2 = t.norm_sqr();
        let row = g_obj.row(x);
        mean_ib += t2 * row.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let mut overlap = Complex64::new(0.0, 0.0);
        for (g, h) in row.iter().zip(b) {
            overlap += g * h.conj();
        }
        image += t2 * overlap.norm_sqr();
    }
    Ok(Eq1Terms {
        background: mean_ib * mean_iy,
        image,
    })
}

/// `<I_b><I_y> + sum_x |sum_j G'[x][j] conj(g[y][j])|^2`.
pub fn eq1_factored(
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
    y: usize,
) -> Result<f64> {
    eq1_terms(g_obj, g_ccd, object, y).map(|t| t.total())
}

/// Image term of the factored correlation for every CCD sample.
pub fn image_profile(
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
) -> Result<Vec<f64>> {
    (0..g_ccd.rows())
        .map(|y| eq1_terms(g_obj, g_ccd, object, y).map(|t| t.image))
        .collect()
}

/// Advanced-wave point spread function of object point `x`:
/// `out[y] = sum_j conj(G[x][j]) g[y][j]`, i.e. back-propagation from `x`
/// to the source followed by forward propagation to the CCD.
pub fn klyshko_psf(g_obj: &PropagatorMatrix, g_ccd: &PropagatorMatrix, x: usize) -> Result<ComplexField> {
    if g_obj.src() != g_ccd.src() {
        return Err(GhostError::Dimension(
            "object and CCD propagators do not share a source grid".into(),
        ));
    }
    check_index("object", x, g_obj.rows())?;
    let back = g_obj.row(x);
    let out = (0..g_ccd.rows())
        .map(|y| {
            back.iter()
                .zip(g_ccd.row(y))
                .fold(Complex64::new(0.0, 0.0), |acc, (g, h)| acc + g.conj() * h)
        })
        .collect();
    ComplexField::new(*g_ccd.dst(), out)
}

/// Correlation kernel `K[x][y] = |sum_j G[x][j] conj(g[y][j])|^2` (row-major,
/// `n_obj x n_ccd`): the image a single transmitting point at `x` leaves on the CCD.
pub fn correlation_kernel(g_obj: &PropagatorMatrix, g_ccd: &PropagatorMatrix) -> Result<Vec<f64>> {
    let mut table = Vec::with_capacity(g_obj.rows() * g_ccd.rows());
    for x in 0..g_obj.rows() {
        let psf = klyshko_psf(g_obj, g_ccd, x)?;
        table.extend(psf.amplitudes().iter().map(|a| a.norm_sqr()));
    }
    Ok(table)
}

/// Pearson correlation of two profiles; `None` if either is constant.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Index of the largest value; first occurrence wins.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Full width at half maximum of the lobe around `peak`, in samples,
/// with linear interpolation of both half-maximum crossings. `None` if the
/// lobe runs off either end of the profile.
pub fn fwhm(profile: &[f64], peak: usize) -> Option<f64> {
    let half = profile.get(peak)? / 2.0;
    let mut left = None;
    for i in (0..peak).rev() {
        if profile[i] <= half {
            let frac = (profile[i + 1] - half) / (profile[i + 1] - profile[i]);
            left = Some(i as f64 + 1.0 - frac);
            break;
        }
    }
    let mut right = None;
    for i in peak + 1..profile.len() {
        if profile[i] <= half {
            let frac = (profile[i - 1] - half) / (profile[i - 1] - profile[i]);
            right = Some(i as f64 - 1.0 + frac);
            break;
        }
    }
    Some(right? - left?)
}
