use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};
use crate::optics::PlaneGrid;
use crate::summation::CompensatedSum;

/// Streaming sums for the bucket/CCD intensity correlation.
///
/// Accumulators merge by component-wise (compensated) addition, so shots can
/// be sharded across workers and combined in any grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationAccumulator {
    grid: PlaneGrid,
    shots: u64,
    sum_b: CompensatedSum,
    sum_b2: CompensatedSum,
    sum_iy: Vec<CompensatedSum>,
    sum_b_iy: Vec<CompensatedSum>,
    sum_iy2: Vec<CompensatedSum>,
}

impl CorrelationAccumulator {
    pub fn new(ccd_grid: PlaneGrid) -> Self {
        let n = ccd_grid.n_points;
        CorrelationAccumulator {
            grid: ccd_grid,
            shots: 0,
            sum_b: CompensatedSum::new(),
            sum_b2: CompensatedSum::new(),
            sum_iy: vec![CompensatedSum::new(); n],
            sum_b_iy: vec![CompensatedSum::new(); n],
            sum_iy2: vec![CompensatedSum::new(); n],
        }
    }

    pub fn width(&self) -> usize {
        self.grid.n_points
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn grid(&self) -> &PlaneGrid {
        &self.grid
    }

    /// Adds one shot: bucket value `b` and CCD intensities `i_ccd`.
    pub fn accumulate(&mut self, b: f64, i_ccd: &[f64]) -> Result<()> {
        if i_ccd.len() != self.width() {
            return Err(GhostError::Dimension(format!(
                "CCD frame has {} samples, accumulator expects {}",
                i_ccd.len(),
                self.width()
            )));
        }
        self.shots += 1;
        self.sum_b.add(b);
        self.sum_b2.add(b * b);
        for (y, &iy) in i_ccd.iter().enumerate() {
            self.sum_iy[y].add(iy);
            self.sum_b_iy[y].add(b * iy);
            self.sum_iy2[y].add(iy * iy);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<()> {
        if other.grid != self.grid {
            return Err(GhostError::Dimension(
                "cannot merge accumulators on different CCD grids".into(),
            ));
        }
        self.shots += other.shots;
        self.sum_b.merge(&other.sum_b);
        self.sum_b2.merge(&other.sum_b2);
        for y in 0..self.width() {
            self.sum_iy[y].merge(&other.sum_iy[y]);
            self.sum_b_iy[y].merge(&other.sum_b_iy[y]);
            self.sum_iy2[y].merge(&other.sum_iy2[y]);
        }
        Ok(())
    }

    pub fn mean_bucket(&self) -> f64 {
        self.sum_b.value() / self.shots as f64
    }

    pub fn mean_ccd(&self) -> Vec<f64> {
        let n = self.shots as f64;
        self.sum_iy.iter().map(|s| s.value() / n).collect()
    }

    pub fn bucket_variance(&self) -> f64 {
        let n = self.shots as f64;
        self.sum_b2.value() / n - self.mean_bucket().powi(2)
    }

    pub fn ccd_variance(&self) -> Vec<f64> {
        let n = self.shots as f64;
        self.sum_iy2
            .iter()
            .zip(self.mean_ccd())
            .map(|(s2, m)| s2.value() / n - m * m)
            .collect()
    }

    /// Raw sums `(sum_b, sum_b2, sum_iy, sum_b_iy, sum_iy2)`.
    pub fn sums(&self) -> (f64, f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let v = |s: &Vec<CompensatedSum>| s.iter().map(|c| c.value()).collect::<Vec<_>>();
        (
            self.sum_b.value(),
            self.sum_b2.value(),
            v(&self.sum_iy),
            v(&self.sum_b_iy),
            v(&self.sum_iy2),
        )
    }

    /// Background-subtracted correlation image.
    pub fn finalize(&self) -> Result<ImageResult> {
        if self.shots < 2 {
            return Err(GhostError::InsufficientData(format!(
                "need at least 2 shots to form a correlation image, have {}",
                self.shots
            )));
        }
        let n = self.shots as f64;
        let mean_b = self.mean_bucket();
        let mut covariance = Vec::with_capacity(self.width());
        let mut g2 = Vec::with_capacity(self.width());
        let mut background = Vec::with_capacity(self.width());
        for y in 0..self.width() {
            let mean_iy = self.sum_iy[y].value() / n;
            let mean_b_iy = self.sum_b_iy[y].value() / n;
            let bg = mean_b * mean_iy;
            covariance.push(mean_b_iy - bg);
            g2.push((bg != 0.0).then(|| mean_b_iy / bg));
            background.push(bg);
        }
        Ok(ImageResult {
            grid: self.grid,
            covariance,
            g2,
            background,
            shots: self.shots,
        })
    }
}

/// Ghost image over the CCD plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub grid: PlaneGrid,
    /// `<B I_y> - <B><I_y>`.
    pub covariance: Vec<f64>,
    /// `<B I_y> / (<B><I_y>)`; `None` where the background vanishes.
    pub g2: Vec<Option<f64>>,
    /// `<B><I_y>`.
    pub background: Vec<f64>,
    pub shots: u64,
}
