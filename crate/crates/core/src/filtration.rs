//! Density-based filtration of the pixel grid built from contour pixels.
//!
//! The density at pixel `p` is the Gaussian kernel sum
//! `Σ_c exp(−‖p − c‖² / 2B²)` over contour pixels `c`, truncated at radius
//! `6B`, then divided by its grid maximum. The filtration value is
//! `min(−ln density, cap)`.
//!
//! Kernel contributions are grouped by integer squared distance and summed in
//! ascending distance order, so every pixel's value depends only on the
//! multiset of its distances to the contour. Mirrored or translated contours
//! yield bit-identical fields.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::segmap::ContourSet;

pub const DEFAULT_BANDWIDTH: f64 = 1.0;
pub const DEFAULT_CAP: f64 = 20.0;

/// Kernel support radius in units of the bandwidth.
const CUTOFF_BANDWIDTHS: f64 = 6.0;

/// Peak-normalized kernel density on the pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

/// Per-pixel filtration values in `[0, cap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    bandwidth: Option<f64>,
    cap: f64,
}

impl FiltrationField {
    /// Wraps arbitrary values; used for densities computed elsewhere and for tests.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>, cap: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("dimensions", "field must be at least 1x1"));
        }
        if values.len() != width * height {
            return Err(Error::Contract(format!(
                "field has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::param(
                "cap",
                format!("{cap} must be finite and positive"),
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v <= cap))
        {
            return Err(Error::Contract(format!(
                "field value {v} at {i} outside [0, {cap}]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            bandwidth: None,
            cap,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// KDE bandwidth the field was built with, if it came from a density.
    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    /// Anisotropic total variation over 4-neighbour pairs.
    pub fn total_variation(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut tv = 0.0;
        for y in 0..h {
            for x in 0..w {
                let v = self.value(x, y);
                if x + 1 < w {
                    tv += (v - self.value(x + 1, y)).abs();
                }
                if y + 1 < h {
                    tv += (v - self.value(x, y + 1)).abs();
                }
            }
        }
        tv
    }

    /// `TPF1` raster: magic, u32 width, u32 height, then little-endian f32 values row-major.
    pub fn to_tpf1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.values.len());
        out.extend_from_slice(b"TPF1");
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn write_tpf1(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tpf1()).map_err(|e| Error::io(path, e))
    }
}

/// Decodes a `TPF1` raster into (width, height, values).
pub fn read_tpf1(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 12 || &bytes[..4] != b"TPF1" {
        return Err(Error::format(0, "missing TPF1 header"));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 4 * w * h {
        return Err(Error::format(
            12,
            format!("expected {} value bytes, found {}", 4 * w * h, body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, values))
}

/// Offsets inside the kernel support, grouped by squared length ascending.
fn kernel_shells(bandwidth: f64) -> Vec<(f64, Vec<(isize, isize)>)> {
    let limit = (CUTOFF_BANDWIDTHS * bandwidth).powi(2);
    let r = (CUTOFF_BANDWIDTHS * bandwidth).floor() as isize;
    let mut by_k: std::collections::BTreeMap<isize, Vec<(isize, isize)>> = Default::default();
    for dy in -r..=r {
        for dx in -r..=r {
            let k = dx * dx + dy * dy;
            if (k as f64) <= limit {
                by_k.entry(k).or_default().push((dx, dy));
            }
        }
    }
    let two_b2 = 2.0 * bandwidth * bandwidth;
    by_k.into_iter()
        .map(|(k, offs)| ((-(k as f64) / two_b2).exp(), offs))
        .collect()
}

/// Truncated Gaussian kernel sum at every pixel, before peak normalization.
pub fn kde_sum(contours: &ContourSet, bandwidth: f64) -> Result<Vec<f64>> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::param(
            "bandwidth",
            format!("{bandwidth} must be finite and positive"),
        ));
    }
    if contours.is_empty() {
        return Err(Error::EmptyContours);
    }
    let (w, h) = (contours.width as isize, contours.height as isize);
    let shells = kernel_shells(bandwidth);
    let mask = &contours.mask;
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let mut sum = 0.0;
                    for (weight, offsets) in &shells {
                        let hits = offsets
                            .iter()
                            .filter(|(dx, dy)| {
                                let (cx, cy) = (x + dx, y + dy);
                                cx >= 0
                                    && cy >= 0
                                    && cx < w
                                    && cy < h
                                    && mask[(cy * w + cx) as usize]
                            })
                            .count();
                        if hits > 0 {
                            sum += hits as f64 * weight;
                        }
                    }
                    sum
                })
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Kernel density of the contour pixels, divided by its maximum so the peak is 1.
pub fn kde_density(contours: &ContourSet, bandwidth: f64) -> Result<DensityField> {
    let mut values = kde_sum(contours, bandwidth)?;
    let peak = values.iter().copied().fold(0.0f64, f64::max);
    for v in &mut values {
        *v /= peak;
    }
    Ok(DensityField {
        width: contours.width,
        height: contours.height,
        values,
        bandwidth,
    })
}

/// `min(−ln density, cap)`, with `cap` wherever the density underflowed to zero.
pub fn neglog_filtration(density: &DensityField, cap: f64) -> Result<FiltrationField> {
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::param(
            "cap",
            format!("{cap} must be finite and positive"),
        ));
    }
    let values = density
        .values
        .iter()
        .map(|&d| {
            if d > 0.0 {
                (0.0 - d.ln()).min(cap)
            } else {
                cap
            }
        })
        .collect();
    Ok(FiltrationField {
        width: density.width,
        height: density.height,
        values,
        bandwidth: Some(density.bandwidth),
        cap,
    })
}

/// Contours → density → filtration in one call.
pub fn build_filtration(
    contours: &ContourSet,
    bandwidth: f64,
    cap: f64,
) -> Result<FiltrationField> {
    neglog_filtration(&kde_density(contours, bandwidth)?, cap)
}
