#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(dim, birth, death)`, sorted by `sorted_bars`.
pub type RawBar = (u8, f64, f64);

pub fn sorted_bars(mut bars: Vec<RawBar>) -> Vec<RawBar> {
    bars.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    bars
}

pub fn library_bars(diagram: &topopi::PersistenceDiagram) -> Vec<RawBar> {
    sorted_bars(
        diagram
            .bars()
            .iter()
            .map(|b| (b.dim, b.birth, b.death))
            .collect(),
    )
}

/// Sublevel persistence of a pixel field by plain boundary-matrix reduction.
///
/// The complex lives on the doubled grid of size (2w+1) x (2h+1): cell (i, j)
/// has dimension `i % 2 + j % 2`, and odd-odd cells are the pixels. Lower
/// cells take the minimum value of the pixels around them. Columns are dense
/// bitsets and are reduced left to right without any shortcuts.
pub fn oracle_persistence(w: usize, h: usize, values: &[f64], cap: f64) -> Vec<RawBar> {
    let (gw, gh) = (2 * w + 1, 2 * h + 1);
    let n = gw * gh;
    let dim = |c: usize| ((c % gw) % 2 + (c / gw) % 2) as u8;
    let mut value = vec![f64::INFINITY; n];
    for py in 0..h {
        for px in 0..w {
            let v = values[py * w + px];
            for j in 2 * py..=2 * py + 2 {
                for i in 2 * px..=2 * px + 2 {
                    let c = j * gw + i;
                    value[c] = value[c].min(v);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        value[a]
            .total_cmp(&value[b])
            .then(dim(a).cmp(&dim(b)))
            .then(a.cmp(&b))
    });
    let mut pos = vec![0usize; n];
    for (k, &c) in order.iter().enumerate() {
        pos[c] = k;
    }
    let words = n.div_ceil(64);
    let mut columns: Vec<Vec<u64>> = Vec::with_capacity(n);
    for &c in &order {
        let mut col = vec![0u64; words];
        let (i, j) = (c % gw, c / gw);
        let mut faces = Vec::new();
        if i % 2 == 1 {
            faces.push(c - 1);
            faces.push(c + 1);
        }
        if j % 2 == 1 {
            faces.push(c - gw);
            faces.push(c + gw);
        }
        for f in faces {
            col[pos[f] / 64] ^= 1 << (pos[f] % 64);
        }
        columns.push(col);
    }
    let low = |col: &[u64]| {
        col.iter()
            .enumerate()
            .rev()
            .find(|(_, &wd)| wd != 0)
            .map(|(k, &wd)| k * 64 + 63 - wd.leading_zeros() as usize)
    };
    let mut pivot_of: Vec<Option<usize>> = vec![None; n];
    let mut is_low = vec![false; n];
    let mut bars = Vec::new();
    for k in 0..n {
        while let Some(l) = low(&columns[k]) {
            match pivot_of[l] {
                Some(other) => {
                    let (a, b) = columns.split_at_mut(k);
                    for (x, y) in b[0].iter_mut().zip(&a[other]) {
                        *x ^= *y;
                    }
                }
                None => break,
            }
        }
        if let Some(l) = low(&columns[k]) {
            pivot_of[l] = Some(k);
            is_low[l] = true;
            let (birth, death) = (value[order[l]], value[order[k]]);
            if birth < death {
                bars.push((dim(order[l]), birth, death));
            }
        }
    }
    for k in 0..n {
        let zero = columns[k].iter().all(|&wd| wd == 0);
        if zero && !is_low[k] {
            let birth = value[order[k]];
            if birth < cap {
                bars.push((dim(order[k]), birth, cap));
            }
        }
    }
    sorted_bars(bars)
}

/// Component count by iterative flood fill over `selected`.
pub fn flood_components(w: usize, h: usize, selected: &[bool], eight: bool) -> (usize, usize) {
    let mut seen = vec![false; w * h];
    let (mut total, mut interior) = (0, 0);
    for start in 0..w * h {
        if !selected[start] || seen[start] {
            continue;
        }
        total += 1;
        let mut touches = false;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            if x == 0 || y == 0 || x == w as i64 - 1 || y == h as i64 - 1 {
                touches = true;
            }
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if (dx, dy) == (0, 0) || (!eight && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if selected[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if !touches {
            interior += 1;
        }
    }
    (total, interior)
}

/// (components, holes): 8-connected foreground, 4-connected enclosed background.
pub fn flood_betti(w: usize, h: usize, mask: &[bool]) -> (usize, usize) {
    let (b0, _) = flood_components(w, h, mask, true);
    let bg: Vec<bool> = mask.iter().map(|&m| !m).collect();
    let (_, b1) = flood_components(w, h, &bg, false);
    (b0, b1)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random field in `[0, cap]` with plenty of ties and some cap-valued pixels.
pub fn random_field(rng: &mut ChaCha8Rng, max_side: usize, cap: f64) -> (usize, usize, Vec<f64>) {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let levels = rng.random_range(2..=8u32);
    let continuous = rng.random_bool(0.3);
    let values = (0..w * h)
        .map(|_| {
            if rng.random_bool(0.08) {
                cap
            } else if continuous {
                rng.random_range(0.0..cap)
            } else {
                rng.random_range(0..levels) as f64 * cap / levels as f64
            }
        })
        .collect();
    (w, h, values)
}

pub fn random_mask(rng: &mut ChaCha8Rng, max_side: usize) -> (usize, usize, Vec<bool>) {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let p = rng.random_range(0.05..0.95);
    (w, h, (0..w * h).map(|_| rng.random_bool(p)).collect())
}

/// Random labels from a mask, so maps carry both foreground classes.
pub fn mask_to_map(rng: &mut ChaCha8Rng, w: usize, h: usize, mask: &[bool]) -> topopi::SegMap {
    let labels = mask
        .iter()
        .map(|&m| if m { rng.random_range(1..=2u8) } else { 0 })
        .collect();
    topopi::SegMap::new(w, h, labels, "").unwrap()
}

/// Random diagram of dimension-1 bars inside `[0, cap]`.
pub fn random_diagram(
    rng: &mut ChaCha8Rng,
    max_bars: usize,
    cap: f64,
) -> topopi::PersistenceDiagram {
    let n = rng.random_range(0..=max_bars);
    let bars = (0..n)
        .map(|_| {
            let birth = rng.random_range(0.0..cap * 0.9);
            let death = rng.random_range(birth + 1e-3..=cap);
            topopi::Bar::new(birth, death, 1)
        })
        .collect();
    topopi::PersistenceDiagram::new(bars, cap)
}

/// Standard normal CDF evaluated through `erf`.
pub fn normal_cdf(t: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + libm::erf((t - mean) / (sd * std::f64::consts::SQRT_2)))
}
