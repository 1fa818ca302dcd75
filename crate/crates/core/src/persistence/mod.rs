//! Persistent homology of filtration fields and Betti numbers of binary masks.

mod cubical;
mod union_find;

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::filtration::FiltrationField;
use crate::labeling::{label_components, Connectivity};
use crate::segmap::BinaryMask;

/// One persistence pair. Essential classes carry `death = field_cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub birth: f64,
    pub death: f64,
    pub dim: u8,
}

impl Bar {
    pub fn new(birth: f64, death: f64, dim: u8) -> Self {
        Self { birth, death, dim }
    }

    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    fn canonical_cmp(&self, other: &Bar) -> Ordering {
        self.dim
            .cmp(&other.dim)
            .then(self.birth.total_cmp(&other.birth))
            .then(self.death.total_cmp(&other.death))
    }
}

/// Multiset of bars in canonical `(dim, birth, death)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    bars: Vec<Bar>,
    field_cap: f64,
}

impl PersistenceDiagram {
    pub fn new(mut bars: Vec<Bar>, field_cap: f64) -> Self {
        debug_assert!(bars
            .iter()
            .all(|b| 0.0 <= b.birth && b.birth < b.death && b.death <= field_cap));
        bars.sort_by(Bar::canonical_cmp);
        Self { bars, field_cap }
    }

    /// Diagram of a map with no contour pixels.
    pub fn empty(field_cap: f64) -> Self {
        Self {
            bars: Vec::new(),
            field_cap,
        }
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn field_cap(&self) -> f64 {
        self.field_cap
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn of_dim(&self, dim: u8) -> impl Iterator<Item = &Bar> + '_ {
        self.bars.iter().filter(move |b| b.dim == dim)
    }

    /// Restriction to one homology dimension.
    pub fn restrict(&self, dim: u8) -> PersistenceDiagram {
        Self {
            bars: self.of_dim(dim).copied().collect(),
            field_cap: self.field_cap,
        }
    }

    /// CSV with header `dim,birth,death`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,birth,death\n");
        for b in &self.bars {
            writeln!(out, "{},{:.16e},{:.16e}", b.dim, b.birth, b.death).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str, field_cap: f64) -> Result<Self> {
        let mut lines = text.lines();
        let mut offset = 0usize;
        match lines.next() {
            Some(h) if h.trim() == "dim,birth,death" => offset += h.len() + 1,
            _ => return Err(Error::format(0, "expected header `dim,birth,death`")),
        }
        let mut bars = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            let parsed = (fields.len() == 3)
                .then(|| {
                    Some(Bar::new(
                        fields[1].trim().parse().ok()?,
                        fields[2].trim().parse().ok()?,
                        fields[0].trim().parse().ok()?,
                    ))
                })
                .flatten();
            match parsed {
                Some(bar) if bar.birth < bar.death && bar.death <= field_cap && bar.dim <= 1 => {
                    bars.push(bar)
                }
                _ => return Err(Error::format(offset, format!("bad diagram row `{line}`"))),
            }
            offset += line.len() + 1;
        }
        Ok(Self::new(bars, field_cap))
    }
}

/// Dimension-0 and dimension-1 sublevel persistence of the T-constructed cubical complex.
pub fn compute_persistence(field: &FiltrationField) -> PersistenceDiagram {
    cubical::cubical_persistence(field)
}

/// Dimension-0 bars only, by union-find with the elder rule.
pub fn persistence_dim0_unionfind(field: &FiltrationField) -> PersistenceDiagram {
    union_find::dim0_union_find(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BettiPair {
    pub b0: usize,
    pub b1: usize,
}

/// `b0` = 8-connected foreground components, `b1` = 4-connected background
/// components that do not touch the image border.
pub fn betti_numbers<M: BinaryMask + ?Sized>(mask: &M) -> BettiPair {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let fg = label_components(w, h, &bits, Connectivity::Eight);
    let background: Vec<bool> = bits.iter().map(|b| !b).collect();
    let bg = label_components(w, h, &background, Connectivity::Four);
    let b1 = bg.touches_border().iter().filter(|&&t| !t).count();
    BettiPair { b0: fg.count, b1 }
}
