//! Zero-dimensional persistence by union-find over pixels.
//!
//! A sublevel set of the T-constructed complex is a union of closed pixels,
//! so its components are the 8-connected components of the pixels entered so
//! far. Pixels enter in `(value, index)` order; on a merge the component with
//! the later-entered minimum dies (elder rule).

use crate::filtration::FiltrationField;
use crate::labeling::DisjointSet;

use super::{Bar, PersistenceDiagram};

pub(crate) fn dim0_union_find(field: &FiltrationField) -> PersistenceDiagram {
    let (w, h) = (field.width(), field.height());
    let values = field.values();
    let n = w * h;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &p) in order.iter().enumerate() {
        rank[p] = r;
    }

    let mut forest = DisjointSet::new(n);
    // elder[root] = pixel index of the oldest pixel in that component
    let mut elder: Vec<usize> = (0..n).collect();
    let mut active = vec![false; n];
    let mut bars = Vec::new();

    for &p in &order {
        active[p] = true;
        let (px, py) = ((p % w) as isize, (p / w) as isize);
        let v = values[p];
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (qx, qy) = (px + dx, py + dy);
                if (dx == 0 && dy == 0) || qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize
                {
                    continue;
                }
                let q = qy as usize * w + qx as usize;
                if !active[q] {
                    continue;
                }
                let (rp, rq) = (forest.find(p), forest.find(q));
                if rp == rq {
                    continue;
                }
                let (ep, eq) = (elder[rp], elder[rq]);
                let (older, younger) = if rank[ep] < rank[eq] {
                    (ep, eq)
                } else {
                    (eq, ep)
                };
                if values[younger] < v {
                    bars.push(Bar::new(values[younger], v, 0));
                }
                let root = forest.union(rp, rq);
                elder[root] = older;
            }
        }
    }

    let first = order[0];
    let cap = field.cap();
    if values[first] < cap {
        bars.push(Bar::new(values[first], cap, 0));
    }
    PersistenceDiagram::new(bars, cap)
}
