//! Sublevel persistence of a 2D cubical complex by column reduction.
//!
//! Pixels are the 2-cells. Edges and vertices take the minimum value of the
//! pixels they bound (T-construction). Cells are ordered by
//! `(value, dimension, cell id)`, which is a valid filtration because a face
//! never exceeds its cofaces. Reduction runs over Z/2, squares first, and
//! clears every edge column that appears as a square pivot.

use crate::filtration::FiltrationField;

use super::{Bar, PersistenceDiagram};

const NONE: u32 = u32::MAX;

/// Cell layout: vertices, then horizontal edges, then vertical edges, then squares.
pub(crate) struct CubicalComplex {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Vertex,
    HEdge,
    VEdge,
    Square,
}

impl CubicalComplex {
    pub(crate) fn new(field: &FiltrationField) -> Self {
        let (w, h) = (field.width(), field.height());
        let mut complex = Self {
            width: w,
            height: h,
            values: Vec::new(),
        };
        let n = complex.num_cells();
        let mut values = vec![f64::INFINITY; n];
        for y in 0..h {
            for x in 0..w {
                let v = field.value(x, y);
                let sq = complex.square(x, y);
                values[sq] = v;
                for face in complex.boundary_of_square(x, y) {
                    values[face] = values[face].min(v);
                }
                for vert in [
                    complex.vertex(x, y),
                    complex.vertex(x + 1, y),
                    complex.vertex(x, y + 1),
                    complex.vertex(x + 1, y + 1),
                ] {
                    values[vert] = values[vert].min(v);
                }
            }
        }
        complex.values = values;
        complex
    }

    fn num_vertices(&self) -> usize {
        (self.width + 1) * (self.height + 1)
    }

    fn num_hedges(&self) -> usize {
        self.width * (self.height + 1)
    }

    fn num_vedges(&self) -> usize {
        (self.width + 1) * self.height
    }

    fn num_cells(&self) -> usize {
        self.num_vertices() + self.num_hedges() + self.num_vedges() + self.width * self.height
    }

    fn vertex(&self, i: usize, j: usize) -> usize {
        j * (self.width + 1) + i
    }

    /// Edge from vertex (x, j) to (x + 1, j).
    fn hedge(&self, x: usize, j: usize) -> usize {
        self.num_vertices() + j * self.width + x
    }

    /// Edge from vertex (i, y) to (i, y + 1).
    fn vedge(&self, i: usize, y: usize) -> usize {
        self.num_vertices() + self.num_hedges() + y * (self.width + 1) + i
    }

    fn square(&self, x: usize, y: usize) -> usize {
        self.num_vertices() + self.num_hedges() + self.num_vedges() + y * self.width + x
    }

    fn boundary_of_square(&self, x: usize, y: usize) -> [usize; 4] {
        [
            self.hedge(x, y),
            self.hedge(x, y + 1),
            self.vedge(x, y),
            self.vedge(x + 1, y),
        ]
    }

    fn kind(&self, id: usize) -> (Kind, usize) {
        let mut off = id;
        if off < self.num_vertices() {
            return (Kind::Vertex, off);
        }
        off -= self.num_vertices();
        if off < self.num_hedges() {
            return (Kind::HEdge, off);
        }
        off -= self.num_hedges();
        if off < self.num_vedges() {
            return (Kind::VEdge, off);
        }
        (Kind::Square, off - self.num_vedges())
    }

    fn dim(&self, id: usize) -> u8 {
        match self.kind(id).0 {
            Kind::Vertex => 0,
            Kind::HEdge | Kind::VEdge => 1,
            Kind::Square => 2,
        }
    }

    fn boundary(&self, id: usize) -> Vec<usize> {
        match self.kind(id) {
            (Kind::Vertex, _) => Vec::new(),
            (Kind::HEdge, off) => {
                let (x, j) = (off % self.width, off / self.width);
                vec![self.vertex(x, j), self.vertex(x + 1, j)]
            }
            (Kind::VEdge, off) => {
                let (i, y) = (off % (self.width + 1), off / (self.width + 1));
                vec![self.vertex(i, y), self.vertex(i, y + 1)]
            }
            (Kind::Square, off) => {
                let (x, y) = (off % self.width, off / self.width);
                self.boundary_of_square(x, y).to_vec()
            }
        }
    }

    /// Cell ids in filtration order.
    fn filtration_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_cells()).collect();
        order.sort_by(|&a, &b| {
            self.values[a]
                .total_cmp(&self.values[b])
                .then(self.dim(a).cmp(&self.dim(b)))
                .then(a.cmp(&b))
        });
        order
    }
}

/// Symmetric difference of two sorted index lists, written into `out`.
fn xor_into(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

struct Reduction {
    /// `owner[row]` = filtration position of the column whose pivot is `row`.
    owner: Vec<u32>,
    /// Reduced columns by filtration position; empty for zero columns.
    columns: Vec<Vec<u32>>,
    cleared: Vec<bool>,
    paired: Vec<bool>,
    pairs: Vec<(u32, u32)>,
}

impl Reduction {
    fn reduce_column(&mut self, pos: u32, mut col: Vec<u32>, scratch: &mut Vec<u32>) {
        col.sort_unstable();
        while let Some(&pivot) = col.last() {
            let other = self.owner[pivot as usize];
            if other == NONE {
                break;
            }
            xor_into(&col, &self.columns[other as usize], scratch);
            std::mem::swap(&mut col, scratch);
        }
        if let Some(&pivot) = col.last() {
            self.owner[pivot as usize] = pos;
            self.cleared[pivot as usize] = true;
            self.paired[pivot as usize] = true;
            self.paired[pos as usize] = true;
            self.pairs.push((pivot, pos));
        }
        self.columns[pos as usize] = col;
    }
}

pub(crate) fn cubical_persistence(field: &FiltrationField) -> PersistenceDiagram {
    let complex = CubicalComplex::new(field);
    let order = complex.filtration_order();
    let n = order.len();
    let mut position = vec![0u32; n];
    for (p, &id) in order.iter().enumerate() {
        position[id] = p as u32;
    }

    let mut red = Reduction {
        owner: vec![NONE; n],
        columns: vec![Vec::new(); n],
        cleared: vec![false; n],
        paired: vec![false; n],
        pairs: Vec::new(),
    };
    let mut scratch = Vec::new();
    let mut negative = 0usize;
    for dim in [2u8, 1u8] {
        for (p, &id) in order.iter().enumerate() {
            if complex.dim(id) != dim || red.cleared[p] {
                continue;
            }
            let col = complex
                .boundary(id)
                .into_iter()
                .map(|f| position[f])
                .collect();
            let before = red.pairs.len();
            red.reduce_column(p as u32, col, &mut scratch);
            negative += red.pairs.len() - before;
        }
    }
    debug_assert_eq!(negative, red.pairs.len());

    let cap = field.cap();
    let value_at = |p: u32| complex.values[order[p as usize]];
    let mut bars = Vec::new();
    for &(birth, death) in &red.pairs {
        let (b, d) = (value_at(birth), value_at(death));
        if b < d {
            bars.push(Bar::new(b, d, complex.dim(order[birth as usize])));
        }
    }
    let mut essential = [0usize; 2];
    for (p, &id) in order.iter().enumerate() {
        let dim = complex.dim(id);
        if dim < 2 && !red.paired[p] {
            essential[dim as usize] += 1;
            let b = complex.values[id];
            if b < cap {
                bars.push(Bar::new(b, cap, dim));
            }
        }
    }
    // The full rectangle is contractible.
    debug_assert_eq!(essential, [1, 0]);
    PersistenceDiagram::new(bars, cap)
}
