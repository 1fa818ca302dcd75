//! Lifetime-weighted persistence images.
//!
//! Diagram points are mapped to (birth, lifetime), each is smoothed by an
//! isotropic Gaussian of variance `sigma2`, weighted by `ω(lifetime, γ)`, and
//! integrated exactly over the cells of a fixed raster. The raster is then
//! z-normalized.
//!
//! Raster layout is row-major; row 0 covers the lowest lifetimes and column 0
//! the earliest births.

use std::path::Path;

use crate::error::{Error, Result};
use crate::filtration::{build_filtration, DEFAULT_BANDWIDTH, DEFAULT_CAP};
use crate::persistence::{compute_persistence, PersistenceDiagram};
use crate::segmap::{extract_contours, SegMap};

pub const DEFAULT_SIGMA2: f64 = 1.0;
pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceImageConfig {
    pub rows: usize,
    pub cols: usize,
    /// Raster window is `[0, birth_max] × [0, lifetime_max]`.
    pub birth_max: f64,
    pub lifetime_max: f64,
    pub sigma2: f64,
    pub gamma: f64,
    /// Also rasterize dimension-0 bars. Off by default: the image summarizes holes.
    pub include_dim0: bool,
}

impl Default for PersistenceImageConfig {
    fn default() -> Self {
        Self {
            rows: DEFAULT_RESOLUTION,
            cols: DEFAULT_RESOLUTION,
            birth_max: DEFAULT_CAP,
            lifetime_max: DEFAULT_CAP,
            sigma2: DEFAULT_SIGMA2,
            gamma: DEFAULT_GAMMA,
            include_dim0: false,
        }
    }
}

impl PersistenceImageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::param(
                "resolution",
                "rows and cols must be at least 1",
            ));
        }
        if !(self.birth_max.is_finite() && self.birth_max > 0.0) {
            return Err(Error::param(
                "extent-birth",
                format!("{} must be positive", self.birth_max),
            ));
        }
        if !(self.lifetime_max.is_finite() && self.lifetime_max > 0.0) {
            return Err(Error::param(
                "extent-life",
                format!("{} must be positive", self.lifetime_max),
            ));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::param(
                "sigma2",
                format!("{} must be positive", self.sigma2),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::param(
                "gamma",
                format!("{} must be non-negative", self.gamma),
            ));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    fn birth_edges(&self) -> Vec<f64> {
        edges(self.birth_max, self.cols)
    }

    fn lifetime_edges(&self) -> Vec<f64> {
        edges(self.lifetime_max, self.rows)
    }
}

fn edges(max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| max * i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiWarning {
    /// The map had no contour pixels; the image is all zeros.
    EmptyContours,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceImage {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub normalized: bool,
    pub config: PersistenceImageConfig,
    pub warning: Option<PiWarning>,
}

impl PersistenceImage {
    fn zeros(config: PersistenceImageConfig) -> Self {
        Self {
            rows: config.rows,
            cols: config.cols,
            values: vec![0.0; config.rows * config.cols],
            normalized: false,
            config,
            warning: None,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `TPP1` raster: header then little-endian f32 values row-major.
    pub fn to_tpp1(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(44 + 4 * self.values.len());
        out.extend_from_slice(b"TPP1");
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in [c.gamma, c.sigma2, c.birth_max, c.lifetime_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// 8-bit preview with min-max scaling; the longest lifetimes are at the top.
    pub fn to_preview_pgm(&self) -> Vec<u8> {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        for r in (0..self.rows).rev() {
            for c in 0..self.cols {
                let v = self.get(r, c);
                let g = if hi > lo {
                    ((v - lo) / (hi - lo) * 255.0).round()
                } else {
                    0.0
                };
                out.push(g as u8);
            }
        }
        out
    }

    pub fn write_tpp1(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tpp1()).map_err(|e| Error::io(path, e))
    }
}

/// Decoded `TPP1` contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Tpp1 {
    pub rows: usize,
    pub cols: usize,
    pub gamma: f64,
    pub sigma2: f64,
    pub birth_max: f64,
    pub lifetime_max: f64,
    pub values: Vec<f32>,
}

pub fn read_tpp1(bytes: &[u8]) -> Result<Tpp1> {
    if bytes.len() < 44 || &bytes[..4] != b"TPP1" {
        return Err(Error::format(0, "missing TPP1 header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (rows, cols) = (u32_at(4), u32_at(8));
    let body = &bytes[44..];
    if body.len() != 4 * rows * cols {
        return Err(Error::format(
            44,
            format!(
                "expected {} value bytes, found {}",
                4 * rows * cols,
                body.len()
            ),
        ));
    }
    Ok(Tpp1 {
        rows,
        cols,
        gamma: f64_at(12),
        sigma2: f64_at(20),
        birth_max: f64_at(28),
        lifetime_max: f64_at(36),
        values: body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

/// (birth, lifetime) points of the dimension-1 bars, plus dimension-0 bars if requested.
pub fn linear_transform(diagram: &PersistenceDiagram, include_dim0: bool) -> Vec<(f64, f64)> {
    diagram
        .bars()
        .iter()
        .filter(|b| b.dim == 1 || (include_dim0 && b.dim == 0))
        .map(|b| (b.birth, b.death - b.birth))
        .collect()
}

/// `y^γ` for `γ ≥ 1`, `y` otherwise.
pub fn weight(lifetime: f64, gamma: f64) -> f64 {
    if gamma >= 1.0 {
        lifetime.powf(gamma)
    } else {
        lifetime
    }
}

/// Mass of N(mean, sd²) on `[lo, hi]`, evaluated on the tail side to avoid cancellation.
pub(crate) fn interval_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let s = sd * std::f64::consts::SQRT_2;
    let (za, zb) = ((lo - mean) / s, (hi - mean) / s);
    if za >= 0.0 {
        0.5 * (libm::erfc(za) - libm::erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (libm::erfc(-zb) - libm::erfc(-za))
    } else {
        0.5 * (libm::erf(zb) - libm::erf(za))
    }
}

/// Unnormalized raster of weighted Gaussian masses. Points are summed in
/// canonical order, so the result does not depend on input order.
pub fn rasterize(
    points: &[(f64, f64)],
    config: &PersistenceImageConfig,
) -> Result<PersistenceImage> {
    config.validate()?;
    let mut image = PersistenceImage::zeros(*config);
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let sd = config.sigma2.sqrt();
    let bx = config.birth_edges();
    let ly = config.lifetime_edges();
    let mut col_mass = vec![0.0; config.cols];
    let mut row_mass = vec![0.0; config.rows];
    for &(x, y) in &sorted {
        let w = weight(y, config.gamma);
        for (c, m) in col_mass.iter_mut().enumerate() {
            *m = interval_mass(bx[c], bx[c + 1], x, sd);
        }
        for (r, m) in row_mass.iter_mut().enumerate() {
            *m = w * interval_mass(ly[r], ly[r + 1], y, sd);
        }
        for (r, &rm) in row_mass.iter().enumerate() {
            let row = &mut image.values[r * config.cols..(r + 1) * config.cols];
            for (cell, &cm) in row.iter_mut().zip(&col_mass) {
                *cell += rm * cm;
            }
        }
    }
    Ok(image)
}

/// Per-image z-score with population standard deviation; constant rasters map to zeros.
pub fn z_normalize(image: &PersistenceImage) -> PersistenceImage {
    let mut out = image.clone();
    out.normalized = true;
    let first = image.values[0];
    if image.values.iter().all(|&v| v == first) {
        out.values.iter_mut().for_each(|v| *v = 0.0);
        return out;
    }
    let n = image.values.len() as f64;
    let mean = image.values.iter().sum::<f64>() / n;
    let var = image.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in &mut out.values {
        *v = (*v - mean) / sd;
    }
    out
}

/// Normalized persistence image of a precomputed diagram.
pub fn image_from_diagram(
    diagram: &PersistenceDiagram,
    config: &PersistenceImageConfig,
) -> Result<PersistenceImage> {
    let points = linear_transform(diagram, config.include_dim0);
    Ok(z_normalize(&rasterize(&points, config)?))
}

/// Everything the map → image pipeline needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub bandwidth: f64,
    pub cap: f64,
    pub image: PersistenceImageConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bandwidth: DEFAULT_BANDWIDTH,
            cap: DEFAULT_CAP,
            image: PersistenceImageConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::param(
                "bandwidth",
                format!("{} must be positive", self.bandwidth),
            ));
        }
        if !(self.cap.is_finite() && self.cap > 0.0) {
            return Err(Error::param(
                "cap",
                format!("{} must be positive", self.cap),
            ));
        }
        self.image.validate()
    }
}

/// Persistence diagram of a map's contour filtration; empty when the map has no contours.
pub fn map_diagram(map: &SegMap, bandwidth: f64, cap: f64) -> Result<PersistenceDiagram> {
    let contours = extract_contours(map);
    if contours.is_empty() {
        return Ok(PersistenceDiagram::empty(cap));
    }
    Ok(compute_persistence(&build_filtration(
        &contours, bandwidth, cap,
    )?))
}

/// Contours → density filtration → persistence → weighted raster → z-normalization.
pub fn persistence_image(map: &SegMap, config: &PipelineConfig) -> Result<PersistenceImage> {
    config.validate()?;
    let diagram = map_diagram(map, config.bandwidth, config.cap)?;
    let mut image = image_from_diagram(&diagram, &config.image)?;
    if map.foreground_count() == 0 {
        image.warning = Some(PiWarning::EmptyContours);
    }
    Ok(image)
}
