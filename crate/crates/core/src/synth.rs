//! Seeded synthetic multi-object maps and their corrupted variants.
//!
//! Scenes are well-separated discs and annuli. Corruptions act on the object
//! parameters, so their topological effect is known by construction:
//! `Delete` drops an object, `Split` cuts one in two, `Merge` bridges two,
//! `Hole` punches a hole in a disc, and `Jitter` adds or removes a single
//! rim pixel on every object while keeping the Betti numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::betti_numbers;
use crate::segmap::SegMap;

/// Minimum gap between the outer rims of two objects.
const SEPARATION: f64 = 8.0;
/// Radii straddle the kernel cutoff of the default bandwidth: small objects
/// keep size-dependent interior values, large ones reach the cap.
const MIN_RADIUS: f64 = 4.0;
const MAX_RADIUS: f64 = 10.0;
/// Room for one object of the largest radius and its margin.
pub const MIN_SIZE: usize = 32;
const MAX_PLACEMENT_ATTEMPTS: usize = 2000;
const JITTER_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    None,
    Delete,
    Split,
    Merge,
    Hole,
    Jitter,
}

impl std::str::FromStr for Corruption {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "none" => Corruption::None,
            "delete" => Corruption::Delete,
            "split" => Corruption::Split,
            "merge" => Corruption::Merge,
            "hole" => Corruption::Hole,
            "jitter" => Corruption::Jitter,
            other => return Err(format!("unknown corruption `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    /// Zero for a disc.
    pub inner_radius: f64,
    pub label: u8,
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        let d2 = (x - self.cx).powi(2) + (y - self.cy).powi(2);
        d2 <= self.radius * self.radius
            && (self.inner_radius == 0.0 || d2 > self.inner_radius.powi(2))
    }

    fn is_disc(&self) -> bool {
        self.inner_radius == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub size: usize,
    pub shapes: Vec<Shape>,
}

impl Scene {
    /// Places `n_objects` non-touching shapes; the first is always a disc.
    pub fn generate(rng: &mut ChaCha8Rng, size: usize, n_objects: usize) -> Result<Self> {
        if n_objects == 0 {
            return Err(Error::param("n-objects", "must be at least 1"));
        }
        if size < MIN_SIZE {
            return Err(Error::param(
                "size",
                format!("{size} is below the minimum of {MIN_SIZE}"),
            ));
        }
        let mut shapes: Vec<Shape> = Vec::with_capacity(n_objects);
        let mut attempts = 0;
        while shapes.len() < n_objects {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::param(
                    "n-objects",
                    format!("cannot place {n_objects} separated objects on a {size}x{size} map"),
                ));
            }
            let radius = rng.random_range(MIN_RADIUS..MAX_RADIUS);
            let margin = radius + 3.0;
            let cx = rng.random_range(margin..size as f64 - margin).round();
            let cy = rng.random_range(margin..size as f64 - margin).round();
            let annulus = !shapes.is_empty() && radius >= 5.5 && rng.random_bool(0.4);
            let inner_radius = if annulus {
                rng.random_range(1.5..radius - 3.0)
            } else {
                0.0
            };
            let label = rng.random_range(1..=2u8);
            let candidate = Shape {
                cx,
                cy,
                radius,
                inner_radius,
                label,
            };
            let clear = shapes.iter().all(|s| {
                let d = ((s.cx - cx).powi(2) + (s.cy - cy).powi(2)).sqrt();
                d >= s.radius + radius + SEPARATION
            });
            if clear {
                shapes.push(candidate);
            }
        }
        Ok(Self { size, shapes })
    }

    pub fn render(&self, source_id: &str) -> SegMap {
        let n = self.size;
        let mut labels = vec![0u8; n * n];
        for s in &self.shapes {
            for y in 0..n {
                for x in 0..n {
                    if s.contains(x as f64, y as f64) {
                        labels[y * n + x] = s.label;
                    }
                }
            }
        }
        SegMap::new(n, n, labels, source_id).expect("scene size is positive")
    }

    /// Rendered corrupted variant of the scene.
    pub fn corrupt(&self, rng: &mut ChaCha8Rng, corruption: Corruption, source_id: &str) -> SegMap {
        let n = self.size;
        match corruption {
            Corruption::None => self.render(source_id),
            Corruption::Delete => {
                let mut scene = self.clone();
                let k = rng.random_range(0..scene.shapes.len());
                scene.shapes.remove(k);
                scene.render(source_id)
            }
            Corruption::Jitter => {
                let gt = self.render(source_id);
                let target = betti_numbers(&gt);
                let mut map = gt.clone();
                for s in &self.shapes {
                    for _ in 0..JITTER_ATTEMPTS {
                        let mut trial = map.clone();
                        flip_rim_pixel(&mut trial, s, rng);
                        if betti_numbers(&trial) == target {
                            map = trial;
                            break;
                        }
                    }
                }
                map
            }
            Corruption::Split => {
                let k = rng.random_range(0..self.shapes.len());
                let s = self.shapes[k];
                let mut map = self.render(source_id);
                let labels = map.labels_mut();
                for y in 0..n {
                    for x in 0..n {
                        if s.contains(x as f64, y as f64) && (x as f64 - s.cx).abs() <= 1.0 {
                            labels[y * n + x] = 0;
                        }
                    }
                }
                map
            }
            Corruption::Merge => {
                let mut map = self.render(source_id);
                if self.shapes.len() < 2 {
                    return map;
                }
                let a = self.shapes[rng.random_range(0..self.shapes.len())];
                let b = self
                    .shapes
                    .iter()
                    .filter(|s| **s != a)
                    .min_by(|p, q| dist(p, &a).total_cmp(&dist(q, &a)))
                    .copied()
                    .expect("at least two shapes");
                let labels = map.labels_mut();
                let (dx, dy) = (b.cx - a.cx, b.cy - a.cy);
                let len2 = dx * dx + dy * dy;
                for y in 0..n {
                    for x in 0..n {
                        let (px, py) = (x as f64 - a.cx, y as f64 - a.cy);
                        let t = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
                        let off = (px - t * dx).powi(2) + (py - t * dy).powi(2);
                        if off <= 2.25 && labels[y * n + x] == 0 {
                            labels[y * n + x] = a.label;
                        }
                    }
                }
                map
            }
            Corruption::Hole => {
                let discs: Vec<&Shape> = self.shapes.iter().filter(|s| s.is_disc()).collect();
                let s = *discs[rng.random_range(0..discs.len())];
                let hole = (s.radius / 3.0).max(1.5);
                let mut map = self.render(source_id);
                let labels = map.labels_mut();
                for y in 0..n {
                    for x in 0..n {
                        if (x as f64 - s.cx).powi(2) + (y as f64 - s.cy).powi(2) <= hole * hole {
                            labels[y * n + x] = 0;
                        }
                    }
                }
                map
            }
        }
    }
}

/// Adds or removes one pixel on the outer rim of `shape`, at a random angle.
fn flip_rim_pixel(map: &mut SegMap, shape: &Shape, rng: &mut ChaCha8Rng) {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let grow = rng.random_bool(0.5);
    let (dx, dy) = (angle.cos(), angle.sin());
    let w = map.width();
    let at = |t: f64| {
        let x = (shape.cx + t * dx).round() as usize;
        let y = (shape.cy + t * dy).round() as usize;
        y * w + x
    };
    // Walk outwards along the ray to the last foreground pixel.
    let mut t = shape.radius.floor() - 1.0;
    while map.labels()[at(t + 0.5)] != 0 {
        t += 0.5;
    }
    let (inside, outside) = (at(t), at(t + 0.5));
    let labels = map.labels_mut();
    if grow {
        labels[outside] = shape.label;
    } else {
        labels[inside] = 0;
    }
}

fn dist(a: &Shape, b: &Shape) -> f64 {
    ((a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2)).sqrt()
}

/// A ground-truth map and its corrupted counterpart.
#[derive(Debug, Clone)]
pub struct SynthPair {
    pub gt: SegMap,
    pub pred: SegMap,
    pub scene: Scene,
}

/// Sample `index` of the stream selected by `seed`. Samples are independent
/// of how many others are generated.
pub fn synth_pair(
    seed: u64,
    index: u64,
    size: usize,
    n_objects: usize,
    corruption: Corruption,
) -> Result<SynthPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let scene = Scene::generate(&mut rng, size, n_objects)?;
    let id = format!("{index:04}");
    let gt = scene.render(&id);
    let pred = scene.corrupt(&mut rng, corruption, &id);
    Ok(SynthPair { gt, pred, scene })
}
