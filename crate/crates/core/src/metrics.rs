//! Pixel and topological evaluation metrics.
//!
//! Topological errors compare the contour masks of the ground truth and of
//! the prediction after dropping predicted components that mostly miss the
//! ground truth. Betti matching pairs spatial features (contour loops by
//! their enclosed regions, holes by their pixels) with a maximum-overlap
//! assignment and counts what stays unmatched on either side.

use std::fmt::Write as _;

use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::labeling::{label_components, Connectivity};
use crate::persistence::betti_numbers;
use crate::segmap::{extract_contours, filter_majority_overlap, ContourSet, SegMap};

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelScores {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Foreground-vs-background precision, recall and f-score.
pub fn pixel_metrics(pred: &SegMap, gt: &SegMap) -> Result<PixelScores> {
    pred.ensure_same_shape(gt)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        match (p > 0, g > 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let both_empty = tp + fp == 0 && tp + fn_ == 0;
    let ratio = |num: usize, den: usize| {
        if den > 0 {
            num as f64 / den as f64
        } else if both_empty {
            1.0
        } else {
            0.0
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let fscore = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PixelScores {
        precision,
        recall,
        fscore,
    })
}

/// Per-dimension error counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TopoErrors {
    pub dim0: usize,
    pub dim1: usize,
}

impl TopoErrors {
    pub fn total(&self) -> usize {
        self.dim0 + self.dim1
    }
}

fn contour_masks(pred: &SegMap, gt: &SegMap, threshold: f64) -> Result<(ContourSet, ContourSet)> {
    let kept = filter_majority_overlap(pred, gt, threshold)?;
    Ok((extract_contours(&kept), extract_contours(gt)))
}

/// `|β_k(pred contours) − β_k(gt contours)|` after majority-overlap filtering.
pub fn betti_error(pred: &SegMap, gt: &SegMap, threshold: f64) -> Result<TopoErrors> {
    let (pc, gc) = contour_masks(pred, gt, threshold)?;
    let (bp, bg) = (betti_numbers(&pc), betti_numbers(&gc));
    Ok(TopoErrors {
        dim0: bp.b0.abs_diff(bg.b0),
        dim1: bp.b1.abs_diff(bg.b1),
    })
}

/// Spatial supports of the topological features of one mask, each a sorted pixel list.
struct Features {
    loops: Vec<Vec<usize>>,
    holes: Vec<Vec<usize>>,
}

/// Pixels a component encloses: itself plus every pixel that cannot reach the
/// image border through 4-connected pixels outside the component.
fn enclosed_region(width: usize, height: usize, component: &[usize]) -> Vec<usize> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &p in component {
        let (x, y) = (p % width, p / width);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    // One pixel of padding, clipped to the image; the window frame is reachable.
    let (x0, y0) = (x0.saturating_sub(1), y0.saturating_sub(1));
    let (x1, y1) = ((x1 + 1).min(width - 1), (y1 + 1).min(height - 1));
    let (ww, wh) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut wall = vec![false; ww * wh];
    for &p in component {
        wall[(p / width - y0) * ww + (p % width - x0)] = true;
    }
    let mut reached = vec![false; ww * wh];
    let mut stack = Vec::new();
    for wy in 0..wh {
        for wx in 0..ww {
            let frame = wx == 0 || wy == 0 || wx + 1 == ww || wy + 1 == wh;
            let i = wy * ww + wx;
            if frame && !wall[i] {
                reached[i] = true;
                stack.push(i);
            }
        }
    }
    while let Some(i) = stack.pop() {
        let (wx, wy) = (i % ww, i / ww);
        let mut visit = |j: usize| {
            if !wall[j] && !reached[j] {
                reached[j] = true;
                stack.push(j);
            }
        };
        if wx > 0 {
            visit(i - 1);
        }
        if wx + 1 < ww {
            visit(i + 1);
        }
        if wy > 0 {
            visit(i - ww);
        }
        if wy + 1 < wh {
            visit(i + ww);
        }
    }
    let mut region = Vec::new();
    for wy in 0..wh {
        for wx in 0..ww {
            if !reached[wy * ww + wx] {
                region.push((wy + y0) * width + wx + x0);
            }
        }
    }
    region
}

fn features(mask: &ContourSet) -> Features {
    let (w, h) = (mask.width, mask.height);
    let loops = label_components(w, h, &mask.mask, Connectivity::Eight)
        .pixel_lists()
        .iter()
        .map(|c| enclosed_region(w, h, c))
        .collect();
    let background: Vec<bool> = mask.mask.iter().map(|b| !b).collect();
    let bg = label_components(w, h, &background, Connectivity::Four);
    let touches = bg.touches_border();
    let holes = bg
        .pixel_lists()
        .into_iter()
        .zip(touches)
        .filter(|(_, t)| !t)
        .map(|(p, _)| p)
        .collect();
    Features { loops, holes }
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Features left unmatched on both sides under a maximum-total-overlap
/// assignment restricted to positively overlapping pairs.
fn unmatched(gt: &[Vec<usize>], pred: &[Vec<usize>]) -> usize {
    if gt.is_empty() || pred.is_empty() {
        return gt.len() + pred.len();
    }
    // kuhn_munkres needs rows <= columns
    let (rows, cols) = if gt.len() <= pred.len() {
        (gt, pred)
    } else {
        (pred, gt)
    };
    let mut weights = Matrix::new(rows.len(), cols.len(), 0i64);
    for (r, a) in rows.iter().enumerate() {
        for (c, b) in cols.iter().enumerate() {
            weights[(r, c)] = intersection_size(a, b) as i64;
        }
    }
    let (_, assignment) = kuhn_munkres(&weights);
    let matched = assignment
        .iter()
        .enumerate()
        .filter(|&(r, &c)| weights[(r, c)] > 0)
        .count();
    gt.len() + pred.len() - 2 * matched
}

/// Betti matching errors by spatial overlap of contour loops and enclosed holes.
pub fn betti_matching_error(pred: &SegMap, gt: &SegMap, threshold: f64) -> Result<TopoErrors> {
    let (pc, gc) = contour_masks(pred, gt, threshold)?;
    let (fp, fg) = (features(&pc), features(&gc));
    Ok(TopoErrors {
        dim0: unmatched(&fg.loops, &fp.loops),
        dim1: unmatched(&fg.holes, &fp.holes),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub betti_err_0: f64,
    pub betti_err_1: f64,
    pub betti_err: f64,
    pub match_err_0: f64,
    pub match_err_1: f64,
    pub match_err: f64,
}

impl MetricValues {
    const NAMES: [&'static str; 9] = [
        "precision",
        "recall",
        "fscore",
        "betti_err_0",
        "betti_err_1",
        "betti_err",
        "match_err_0",
        "match_err_1",
        "match_err",
    ];

    fn to_array(self) -> [f64; 9] {
        [
            self.precision,
            self.recall,
            self.fscore,
            self.betti_err_0,
            self.betti_err_1,
            self.betti_err,
            self.match_err_0,
            self.match_err_1,
            self.match_err,
        ]
    }

    fn from_array(a: [f64; 9]) -> Self {
        Self {
            precision: a[0],
            recall: a[1],
            fscore: a[2],
            betti_err_0: a[3],
            betti_err_1: a[4],
            betti_err: a[5],
            match_err_0: a[6],
            match_err_1: a[7],
            match_err: a[8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub source_id: String,
    #[serde(flatten)]
    pub values: MetricValues,
}

/// Every metric for one (prediction, ground truth) pair.
pub fn evaluate_pair(pred: &SegMap, gt: &SegMap, threshold: f64) -> Result<ImageMetrics> {
    let px = pixel_metrics(pred, gt)?;
    let be = betti_error(pred, gt, threshold)?;
    let me = betti_matching_error(pred, gt, threshold)?;
    Ok(ImageMetrics {
        source_id: gt.source_id().to_string(),
        values: MetricValues {
            precision: px.precision,
            recall: px.recall,
            fscore: px.fscore,
            betti_err_0: be.dim0 as f64,
            betti_err_1: be.dim1 as f64,
            betti_err: be.total() as f64,
            match_err_0: me.dim0 as f64,
            match_err_1: me.dim1 as f64,
            match_err: me.total() as f64,
        },
    })
}

/// Per-image rows with their arithmetic means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub mean: MetricValues,
    pub std: MetricValues,
    pub per_image: Vec<ImageMetrics>,
}

impl MetricReport {
    pub fn from_images(per_image: Vec<ImageMetrics>) -> Self {
        let n = per_image.len();
        let mut mean = [0.0; 9];
        let mut std = [0.0; 9];
        if n > 0 {
            for m in &per_image {
                for (acc, v) in mean.iter_mut().zip(m.values.to_array()) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= n as f64);
            for m in &per_image {
                for ((acc, v), mu) in std.iter_mut().zip(m.values.to_array()).zip(mean) {
                    *acc += (v - mu).powi(2);
                }
            }
            std.iter_mut().for_each(|v| *v = (*v / n as f64).sqrt());
        }
        Self {
            count: n,
            mean: MetricValues::from_array(mean),
            std: MetricValues::from_array(std),
            per_image,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per image, then `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source_id");
        for name in MetricValues::NAMES {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        let mut row = |id: &str, v: MetricValues| {
            out.push_str(id);
            for x in v.to_array() {
                write!(out, ",{x}").unwrap();
            }
            out.push('\n');
        };
        for m in &self.per_image {
            row(&m.source_id, m.values);
        }
        row("mean", self.mean);
        row("std", self.std);
        out
    }
}
