use num_complex::Complex64;

use crate::error::{GhostError, Result};
use crate::optics::PlaneGrid;

const MODULUS_SLACK: f64 = 1e-12;

/// Complex amplitude transmittance `t(x)` sampled on the object plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    grid: PlaneGrid,
    transmittance: Vec<Complex64>,
}

impl ObjectSpec {
    pub fn new(grid: PlaneGrid, transmittance: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if transmittance.len() != grid.n_points {
            return Err(GhostError::Dimension(format!(
                "transmittance has {} samples but object grid has {} points",
                transmittance.len(),
                grid.n_points
            )));
        }
        if let Some((i, t)) = transmittance
            .iter()
            .enumerate()
            .find(|(_, t)| t.norm().is_nan() || t.norm() > 1.0 + MODULUS_SLACK)
        {
            return Err(GhostError::Parameter(format!(
                "transmittance at sample {i} has modulus {} > 1",
                t.norm()
            )));
        }
        Ok(ObjectSpec { grid, transmittance })
    }

    pub fn uniform(grid: PlaneGrid) -> Self {
        Self::from_mask(grid, |_| true)
    }

    pub fn opaque(grid: PlaneGrid) -> Self {
        Self::from_mask(grid, |_| false)
    }

    /// Binary object: `t = 1` where `open(x)` holds, `0` elsewhere.
    pub fn from_mask(grid: PlaneGrid, open: impl Fn(f64) -> bool) -> Self {
        let transmittance = grid
            .coordinates()
            .into_iter()
            .map(|x| Complex64::new(if open(x) { 1.0 } else { 0.0 }, 0.0))
            .collect();
        ObjectSpec { grid, transmittance }
    }

    /// Open interval of width `width` centered at `center`.
    pub fn single_slit(grid: PlaneGrid, width: f64, center: f64) -> Result<Self> {
        check_length("width", width)?;
        let half = half_with_slack(width, &grid);
        Ok(Self::from_mask(grid, |x| (x - center).abs() <= half))
    }

    /// Two slits of width `width` centered at `+-separation/2`.
    pub fn double_slit(grid: PlaneGrid, width: f64, separation: f64) -> Result<Self> {
        check_length("width", width)?;
        check_length("separation", separation)?;
        if width >= separation {
            return Err(GhostError::Parameter(format!(
                "slit width {width} must be smaller than the separation {separation}"
            )));
        }
        let half = half_with_slack(width, &grid);
        let c = separation / 2.0;
        Ok(Self::from_mask(grid, |x| {
            (x - c).abs() <= half || (x + c).abs() <= half
        }))
    }

    /// Periodic slits of width `width` and period `period`, one slit centered at 0.
    pub fn grating(grid: PlaneGrid, width: f64, period: f64) -> Result<Self> {
        check_length("width", width)?;
        check_length("period", period)?;
        if width >= period {
            return Err(GhostError::Parameter(format!(
                "slit width {width} must be smaller than the period {period}"
            )));
        }
        let half = half_with_slack(width, &grid);
        Ok(Self::from_mask(grid, |x| {
            let r = x - period * (x / period).round();
            r.abs() <= half
        }))
    }

    pub fn grid(&self) -> &PlaneGrid {
        &self.grid
    }

    pub fn transmittance(&self) -> &[Complex64] {
        &self.transmittance
    }

    /// `|t(x)|^2`, the quantity a ghost image reproduces.
    pub fn intensity_transmission(&self) -> Vec<f64> {
        self.transmittance.iter().map(|t| t.norm_sqr()).collect()
    }

    pub fn is_opaque(&self) -> bool {
        self.transmittance.iter().all(|t| t.norm_sqr() == 0.0)
    }
}

fn check_length(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GhostError::Parameter(format!("{name} must be positive, got {v}")))
    }
}

// keeps samples that sit exactly on a slit edge inside the slit
fn half_with_slack(width: f64, grid: &PlaneGrid) -> f64 {
    width / 2.0 + 1e-9 * grid.pitch
}
