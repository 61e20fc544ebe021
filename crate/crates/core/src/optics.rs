//! Sampled 1-D planes, complex fields and dense free-space propagators.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};

/// Uniformly sampled line in a transverse plane, symmetric about `center_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub n_points: usize,
    /// Sample spacing in meters.
    pub pitch: f64,
    /// Grid center in meters.
    #[serde(default)]
    pub center_offset: f64,
}

impl PlaneGrid {
    pub fn new(n_points: usize, pitch: f64, center_offset: f64) -> Result<Self> {
        let grid = PlaneGrid {
            n_points,
            pitch,
            center_offset,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn centered(n_points: usize, pitch: f64) -> Result<Self> {
        Self::new(n_points, pitch, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(GhostError::Parameter("grid needs at least one point".into()));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(GhostError::Parameter(format!(
                "grid pitch must be positive and finite, got {}",
                self.pitch
            )));
        }
        if !self.center_offset.is_finite() {
            return Err(GhostError::Parameter("grid center offset must be finite".into()));
        }
        Ok(())
    }

    /// Coordinate of sample `i` in meters.
    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        self.center_offset + (i as f64 - (self.n_points as f64 - 1.0) / 2.0) * self.pitch
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.coordinate(i)).collect()
    }

    /// Distance from the center to the outermost sample.
    pub fn half_width(&self) -> f64 {
        (self.n_points as f64 - 1.0) / 2.0 * self.pitch
    }

    /// Full sampled extent `n_points * pitch`.
    pub fn extent(&self) -> f64 {
        self.n_points as f64 * self.pitch
    }

    /// Index of the sample nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let pos = (x - self.center_offset) / self.pitch + (self.n_points as f64 - 1.0) / 2.0;
        pos.round().clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Complex amplitudes on a [`PlaneGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: PlaneGrid,
    amplitudes: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: PlaneGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(GhostError::Dimension(format!(
                "field has {} amplitudes but grid has {} points",
                amplitudes.len(),
                grid.n_points
            )));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(GhostError::Parameter("field amplitudes must be finite".into()));
        }
        Ok(ComplexField { grid, amplitudes })
    }

    pub fn zeros(grid: PlaneGrid) -> Self {
        ComplexField {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_points],
        }
    }

    /// Unit amplitude at `index`, zero elsewhere.
    pub fn delta(grid: PlaneGrid, index: usize) -> Result<Self> {
        if index >= grid.n_points {
            return Err(GhostError::Dimension(format!(
                "delta index {index} outside grid of {} points",
                grid.n_points
            )));
        }
        let mut f = Self::zeros(grid);
        f.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    pub(crate) fn from_parts_unchecked(grid: PlaneGrid, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(grid.n_points, amplitudes.len());
        ComplexField { grid, amplitudes }
    }

    pub fn grid(&self) -> &PlaneGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `sum |a|^2 * pitch`.
    pub fn total_power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.pitch
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        ComplexField {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }
}

/// Dense matrix mapping source-plane amplitudes onto a destination plane.
///
/// Row `y` holds the amplitudes reaching destination sample `y` from every
/// source sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorMatrix {
    src: PlaneGrid,
    dst: PlaneGrid,
    entries: Vec<Complex64>,
    wavelength: f64,
    distance: f64,
}

impl PropagatorMatrix {
    /// Wraps externally supplied entries (row-major, `dst.n_points` rows).
    pub fn from_entries(
        src: PlaneGrid,
        dst: PlaneGrid,
        entries: Vec<Complex64>,
        wavelength: f64,
        distance: f64,
    ) -> Result<Self> {
        src.validate()?;
        dst.validate()?;
        if entries.len() != src.n_points * dst.n_points {
            return Err(GhostError::Dimension(format!(
                "propagator has {} entries, expected {} x {}",
                entries.len(),
                dst.n_points,
                src.n_points
            )));
        }
        if entries.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(GhostError::Parameter("propagator entries must be finite".into()));
        }
        Ok(PropagatorMatrix {
            src,
            dst,
            entries,
            wavelength,
            distance,
        })
    }

    /// Identity map on `grid`; wavelength and distance are recorded as zero.
    pub fn identity(grid: PlaneGrid) -> Self {
        let n = grid.n_points;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        PropagatorMatrix {
            src: grid,
            dst: grid,
            entries,
            wavelength: 0.0,
            distance: 0.0,
        }
    }

    pub fn src(&self) -> &PlaneGrid {
        &self.src
    }

    pub fn dst(&self) -> &PlaneGrid {
        &self.dst
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn rows(&self) -> usize {
        self.dst.n_points
    }

    pub fn cols(&self) -> usize {
        self.src.n_points
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.src.n_points + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[Complex64] {
        let n = self.src.n_points;
        &self.entries[row * n..(row + 1) * n]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Entry-wise complex conjugate (the time-reversed propagator).
    pub fn conjugate(&self) -> Self {
        PropagatorMatrix {
            entries: self.entries.iter().map(|e| e.conj()).collect(),
            ..self.clone()
        }
    }

    /// `sum_j |entry[row][j]|^2` for every row.
    pub fn row_powers(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|r| self.row(r).iter().map(|e| e.norm_sqr()).sum())
            .collect()
    }

    /// Applies the matrix to raw amplitudes, writing into `out`.
    #[inline]
    pub(crate) fn apply_into(&self, amplitudes: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(amplitudes.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows());
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, a) in self.row(r).iter().zip(amplitudes) {
                acc += k * a;
            }
            *o = acc;
        }
    }
}

/// Free-space geometry of the two-arm setup: one source, an object arm ending
/// at the bucket detector, and a reference arm ending at the CCD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub source_grid: PlaneGrid,
    pub object_grid: PlaneGrid,
    pub ccd_grid: PlaneGrid,
    pub wavelength: f64,
    pub z_object: f64,
    pub z_ccd: f64,
}

impl Geometry {
    pub fn new(
        source_grid: PlaneGrid,
        object_grid: PlaneGrid,
        ccd_grid: PlaneGrid,
        wavelength: f64,
        z_object: f64,
        z_ccd: f64,
    ) -> Result<Self> {
        let g = Geometry {
            source_grid,
            object_grid,
            ccd_grid,
            wavelength,
            z_object,
            z_ccd,
        };
        g.validate()?;
        Ok(g)
    }

    /// CCD plane placed at the object distance, sampled like the object plane.
    pub fn symmetric(
        source_grid: PlaneGrid,
        image_grid: PlaneGrid,
        wavelength: f64,
        distance: f64,
    ) -> Result<Self> {
        Self::new(source_grid, image_grid, image_grid, wavelength, distance, distance)
    }

    pub fn validate(&self) -> Result<()> {
        self.source_grid.validate()?;
        self.object_grid.validate()?;
        self.ccd_grid.validate()?;
        check_positive("wavelength", self.wavelength)?;
        check_positive("z_object", self.z_object)?;
        check_positive("z_ccd", self.z_ccd)?;
        check_fresnel_sampling(&self.source_grid, &self.object_grid, self.wavelength, self.z_object)?;
        check_fresnel_sampling(&self.source_grid, &self.ccd_grid, self.wavelength, self.z_ccd)
    }

    /// Both detectors at the same distance with identical sampling.
    pub fn is_symmetric(&self) -> bool {
        self.z_object == self.z_ccd && self.object_grid == self.ccd_grid
    }

    /// Source-to-object propagator `G`.
    pub fn object_propagator(&self) -> Result<PropagatorMatrix> {
        fresnel_propagator(self.source_grid, self.object_grid, self.wavelength, self.z_object)
    }

    /// Source-to-CCD propagator `g`.
    pub fn ccd_propagator(&self) -> Result<PropagatorMatrix> {
        fresnel_propagator(self.source_grid, self.ccd_grid, self.wavelength, self.z_ccd)
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GhostError::Parameter(format!("{name} must be positive, got {value}")))
    }
}

/// Rejects grids on which the Fresnel chirp advances by more than pi between
/// adjacent samples at the largest source-destination separation.
pub fn check_fresnel_sampling(
    src: &PlaneGrid,
    dst: &PlaneGrid,
    wavelength: f64,
    distance: f64,
) -> Result<()> {
    let lambda_z = wavelength * distance;
    let offset = (dst.center_offset - src.center_offset).abs();
    let max_separation = offset + src.half_width() + dst.half_width();
    for grid in [src, dst] {
        if grid.n_points < 2 {
            continue;
        }
        let d = grid.pitch;
        // phase difference between separations u_max - d and u_max
        let phase_step = PI * (2.0 * max_separation * d - d * d) / lambda_z;
        if phase_step > PI * (1.0 + 1e-12) {
            let admissible_separation = (lambda_z + d * d) / (2.0 * d);
            return Err(GhostError::Sampling {
                phase_step,
                pitch: d,
                max_separation,
                lambda_z,
                max_half_width: ((admissible_separation - offset) / 2.0).max(0.0),
            });
        }
    }
    Ok(())
}

/// Paraxial Fresnel kernel between two sampled planes:
/// `entry[y][j] = pitch_src / sqrt(lambda z) * exp(i pi (x_y - xi_j)^2 / (lambda z) - i pi/4)`.
pub fn fresnel_propagator(
    src: PlaneGrid,
    dst: PlaneGrid,
    wavelength: f64,
    distance: f64,
) -> Result<PropagatorMatrix> {
    src.validate()?;
    dst.validate()?;
    check_positive("wavelength", wavelength)?;
    check_positive("distance", distance)?;
    check_fresnel_sampling(&src, &dst, wavelength, distance)?;

    let lambda_z = wavelength * distance;
    let modulus = src.pitch / lambda_z.sqrt();
    let chirp = PI / lambda_z;
    let xi = src.coordinates();
    let mut entries = Vec::with_capacity(src.n_points * dst.n_points);
    for y in 0..dst.n_points {
        let x = dst.coordinate(y);
        entries.extend(xi.iter().map(|s| {
            let u = x - s;
            Complex64::from_polar(modulus, chirp * u * u - FRAC_PI_4)
        }));
    }
    Ok(PropagatorMatrix {
        src,
        dst,
        entries,
        wavelength,
        distance,
    })
}

/// `out[i] = sum_j p[i][j] * field[j]`.
pub fn apply_propagator(field: &ComplexField, p: &PropagatorMatrix) -> Result<ComplexField> {
    if field.grid() != p.src() {
        return Err(GhostError::Dimension(format!(
            "field grid {:?} does not match propagator source grid {:?}",
            field.grid(),
            p.src()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); p.rows()];
    p.apply_into(field.amplitudes(), &mut out);
    Ok(ComplexField::from_parts_unchecked(*p.dst(), out))
}

/// Detected intensity `|a|^2` per sample.
pub fn intensity(field: &ComplexField) -> Vec<f64> {
    field.amplitudes().iter().map(|a| a.norm_sqr()).collect()
}
