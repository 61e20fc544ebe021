//! Photon-level Monte Carlo.
//!
//! Two-photon pseudothermal ghost imaging is sampled directly from the
//! normalized joint detection distribution of a photon pair (one photon at
//! the bucket side, one at the CCD). Single-photon computational ghost
//! imaging is in [`single`].

mod single;

pub use single::{PhotonCgiResult, PhotonRunConfig, single_photon_cgi};

use std::io::{BufWriter, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::correlation::ObjectSpec;
use crate::error::{GhostError, Result};
use crate::optics::{PlaneGrid, PropagatorMatrix};
use crate::rng::{Domain, keyed_stream, unit_f64};

/// Pair draws per work unit; fixed so results do not depend on the thread count.
pub const PAIR_SHARD: u64 = 1 << 16;

/// Joint probability of detecting one photon behind object point `x` and
/// its partner at CCD point `y`.
///
/// `probs` is proportional to `|t(x)|^2 (r_x r_y + |sum_j G[x][j] conj(g[y][j])|^2)`
/// with `r_x = sum_j |G[x][j]|^2` and `r_y = sum_j |g[y][j]|^2`. The first
/// term is what two distinguishable photons would give (accidentals); the
/// second is the two-photon interference term that carries the image.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDetectionTable {
    x_grid: PlaneGrid,
    y_grid: PlaneGrid,
    probs: Vec<f64>,
    accidentals: Vec<f64>,
}

/// Single-photon reference needed to separate accidental pairs from the image.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglesReference {
    /// Fraction of pairs that are accidental (distinguishable-photon weight).
    pub accidental_fraction: f64,
    /// Normalized CCD singles distribution.
    pub ccd_singles: Vec<f64>,
}

impl SinglesReference {
    /// Expected accidental coincidence fraction per CCD sample.
    pub fn background(&self) -> Vec<f64> {
        self.ccd_singles
            .iter()
            .map(|s| self.accidental_fraction * s)
            .collect()
    }
}

impl JointDetectionTable {
    pub fn x_grid(&self) -> &PlaneGrid {
        &self.x_grid
    }

    pub fn y_grid(&self) -> &PlaneGrid {
        &self.y_grid
    }

    pub fn n_x(&self) -> usize {
        self.x_grid.n_points
    }

    pub fn n_y(&self) -> usize {
        self.y_grid.n_points
    }

    /// Row-major `n_x x n_y` probabilities summing to one.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.n_y() + y]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.probs.chunks(self.n_y()).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        column_sums(&self.probs, self.n_y())
    }

    /// Accidental (product-form) part of `probs`.
    pub fn accidentals(&self) -> &[f64] {
        &self.accidentals
    }

    pub fn singles_reference(&self) -> SinglesReference {
        let col = column_sums(&self.accidentals, self.n_y());
        let fraction: f64 = col.iter().sum();
        let ccd_singles = if fraction > 0.0 {
            col.iter().map(|c| c / fraction).collect()
        } else {
            vec![0.0; self.n_y()]
        };
        SinglesReference {
            accidental_fraction: fraction,
            ccd_singles,
        }
    }

    /// Interference part of the CCD marginal, i.e. the exact pair image.
    pub fn image_profile(&self) -> Vec<f64> {
        let acc = column_sums(&self.accidentals, self.n_y());
        self.marginal_y().iter().zip(acc).map(|(m, a)| m - a).collect()
    }
}

fn column_sums(table: &[f64], n_y: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_y];
    for row in table.chunks(n_y) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Builds the normalized joint detection table for a two-arm geometry.
pub fn joint_table(
    g_obj: &PropagatorMatrix,
    g_ccd: &PropagatorMatrix,
    object: &ObjectSpec,
) -> Result<JointDetectionTable> {
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
    let (n_x, n_y) = (g_obj.rows(), g_ccd.rows());
    let r_x = g_obj.row_powers();
    let r_y = g_ccd.row_powers();
    let mut probs = Vec::with_capacity(n_x * n_y);
    let mut accidentals = Vec::with_capacity(n_x * n_y);
    for (x, t) in object.transmittance().iter().enumerate() {
        let t2 = t.norm_sqr();
        let gx = g_obj.row(x);
        for y in 0..n_y {
            let overlap = gx
                .iter()
                .zip(g_ccd.row(y))
                .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b.conj());
            let accidental = t2 * r_x[x] * r_y[y];
            accidentals.push(accidental);
            probs.push(accidental + t2 * overlap.norm_sqr());
        }
    }
    let z: f64 = probs.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(GhostError::Degenerate(
            "joint detection table is identically zero (opaque object or dark arms)".into(),
        ));
    }
    probs.iter_mut().for_each(|p| *p /= z);
    accidentals.iter_mut().for_each(|p| *p /= z);
    Ok(JointDetectionTable {
        x_grid: *g_obj.dst(),
        y_grid: *g_ccd.dst(),
        probs,
        accidentals,
    })
}

/// Coincidence counts over `(x, y)` detector cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceHistogram {
    n_x: usize,
    n_y: usize,
    counts: Vec<u64>,
    total: u64,
}

impl CoincidenceHistogram {
    pub fn new(n_x: usize, n_y: usize) -> Self {
        CoincidenceHistogram {
            n_x,
            n_y,
            counts: vec![0; n_x * n_y],
            total: 0,
        }
    }

    pub fn from_counts(n_x: usize, n_y: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_x * n_y {
            return Err(GhostError::Dimension(format!(
                "histogram has {} cells, expected {n_x} x {n_y}",
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(CoincidenceHistogram {
            n_x,
            n_y,
            counts,
            total,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.n_y + y]
    }

    #[inline]
    fn record(&mut self, cell: usize) {
        self.counts[cell] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if (self.n_x, self.n_y) != (other.n_x, other.n_y) {
            return Err(GhostError::Dimension("histogram shapes differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Empirical cell frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Total-variation distance to a reference distribution of the same shape.
    pub fn total_variation(&self, probs: &[f64]) -> f64 {
        0.5 * self
            .frequencies()
            .iter()
            .zip(probs)
            .map(|(f, p)| (f - p).abs())
            .sum::<f64>()
    }

    /// Writes `x_index,y_index,count` for every cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "x_index,y_index,count")?;
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                writeln!(out, "{x},{y},{}", self.count(x, y))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws `n` independent photon pairs from the table.
pub fn sample_pairs(table: &JointDetectionTable, n: u64, seed: u64) -> Result<CoincidenceHistogram> {
    if n == 0 {
        return Err(GhostError::Parameter("need at least one pair draw".into()));
    }
    let mut cdf = Vec::with_capacity(table.probs.len());
    let mut running = 0.0;
    for p in &table.probs {
        running += p;
        cdf.push(running);
    }
    let last_open = table.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    let (n_x, n_y) = (table.n_x(), table.n_y());

    let shards: Vec<(u64, u64)> = (0..n.div_ceil(PAIR_SHARD))
        .map(|s| (s, PAIR_SHARD.min(n - s * PAIR_SHARD)))
        .collect();
    let parts: Vec<CoincidenceHistogram> = shards
        .into_par_iter()
        .map(|(shard, draws)| {
            let mut rng = keyed_stream(seed, Domain::PairSampling, shard, 0);
            let mut h = CoincidenceHistogram::new(n_x, n_y);
            for _ in 0..draws {
                let u = unit_f64(&mut rng) * running;
                let cell = cdf.partition_point(|c| *c <= u).min(last_open);
                h.record(cell);
            }
            h
        })
        .collect();
    let mut hist = CoincidenceHistogram::new(n_x, n_y);
    for p in &parts {
        hist.merge(p)?;
    }
    Ok(hist)
}

/// Pair image recovered from coincidence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PairImage {
    /// Fraction of coincidences landing on each CCD sample.
    pub coincidences: Vec<f64>,
    /// Accidental fraction expected from the singles reference.
    pub accidentals: Vec<f64>,
    /// `coincidences - accidentals`.
    pub image: Vec<f64>,
}

/// CCD profile of the coincidences minus the accidental background built
/// from the product of the single-photon distributions.
pub fn image_from_histogram(h: &CoincidenceHistogram, singles: &SinglesReference) -> Result<PairImage> {
    if h.total == 0 {
        return Err(GhostError::InsufficientData("histogram is empty".into()));
    }
    if singles.ccd_singles.len() != h.n_y {
        return Err(GhostError::Dimension(format!(
            "singles reference has {} CCD samples, histogram has {}",
            singles.ccd_singles.len(),
            h.n_y
        )));
    }
    let n = h.total as f64;
    let mut col = vec![0u64; h.n_y];
    for row in h.counts.chunks(h.n_y) {
        for (c, v) in col.iter_mut().zip(row) {
            *c += v;
        }
    }
    let coincidences: Vec<f64> = col.iter().map(|&c| c as f64 / n).collect();
    let accidentals = singles.background();
    let image = coincidences.iter().zip(&accidentals).map(|(c, a)| c - a).collect();
    Ok(PairImage {
        coincidences,
        accidentals,
        image,
    })
}
