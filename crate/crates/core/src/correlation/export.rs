//! CSV and PGM writers for images and kernels.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ImageResult;
use crate::error::{GhostError, Result};

pub const IMAGE_CSV_HEADER: &str = "y_coordinate_m,covariance,g2,background";

/// Writes `y_coordinate_m,covariance,g2,background`; undefined g2 is `nan`.
pub fn write_image_csv<W: Write>(image: &ImageResult, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{IMAGE_CSV_HEADER}")?;
    for y in 0..image.grid.n_points {
        let g2 = match image.g2[y] {
            Some(v) => format!("{v:e}"),
            None => "nan".to_string(),
        };
        writeln!(
            out,
            "{:e},{:e},{},{:e}",
            image.grid.coordinate(y),
            image.covariance[y],
            g2,
            image.background[y]
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_image_csv(image: &ImageResult, path: &Path) -> Result<()> {
    write_image_csv(image, fs::File::create(path)?)
}

/// Scale information for a 16-bit PGM: `value = pixel / max_value * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub quantity: String,
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub scale: f64,
}

/// Binary 16-bit PGM (P5, big-endian samples) of a row-major table, scaled so
/// the largest entry maps to 65535. Negative entries are clipped to 0.
pub fn encode_pgm16(values: &[f64], width: usize, height: usize) -> Result<(Vec<u8>, f64)> {
    if values.len() != width * height {
        return Err(GhostError::Dimension(format!(
            "table has {} values, expected {width} x {height}",
            values.len()
        )));
    }
    let scale = values.iter().cloned().fold(0.0, f64::max);
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        let level = if scale > 0.0 {
            (v.max(0.0) / scale * 65535.0).round() as u16
        } else {
            0
        };
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    Ok((bytes, scale))
}

pub fn save_kernel_pgm(
    values: &[f64],
    width: usize,
    height: usize,
    quantity: &str,
    pgm_path: &Path,
    sidecar_path: &Path,
) -> Result<()> {
    let (bytes, scale) = encode_pgm16(values, width, height)?;
    fs::write(pgm_path, bytes)?;
    let sidecar = PgmSidecar {
        quantity: quantity.to_string(),
        width,
        height,
        max_value: u16::MAX,
        scale,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| GhostError::Format(e.to_string()))?;
    fs::write(sidecar_path, json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::PlaneGrid;

    #[test]
    fn csv_layout() {
        let image = ImageResult {
            grid: PlaneGrid::centered(2, 1.0).unwrap(),
            covariance: vec![0.5, -0.25],
            g2: vec![Some(1.5), None],
            background: vec![1.0, 0.0],
            shots: 3,
        };
        let mut buf = Vec::new();
        write_image_csv(&image, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "y_coordinate_m,covariance,g2,background\n-5e-1,5e-1,1.5e0,1e0\n5e-1,-2.5e-1,nan,0e0\n"
        );
    }

    #[test]
    fn pgm_header_and_scaling() {
        let (bytes, scale) = encode_pgm16(&[0.0, 1.0, 2.0, -1.0], 2, 2).unwrap();
        assert_eq!(scale, 2.0);
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..]
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(px, vec![0, 32768, 65535, 0]);
        assert!(encode_pgm16(&[1.0], 2, 2).is_err());
    }
}
