//! Connected-component labeling on pixel grids.
//!
//! Foreground is labeled with 8-connectivity and background with
//! 4-connectivity throughout the crate. Labeling is the classic two-pass
//! algorithm over a disjoint-set forest, so labels are assigned in raster
//! order of each component's first pixel.

/// Pixel adjacency used when grouping pixels into components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Disjoint-set forest with path halving and union by rank.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        while self.parent[node] != node {
            let grand = self.parent[self.parent[node]];
            self.parent[node] = grand;
            node = grand;
        }
        node
    }

    /// Merges the sets holding `a` and `b`; returns the surviving root.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => {
                self.parent[ra] = rb;
                rb
            }
            std::cmp::Ordering::Greater => {
                self.parent[rb] = ra;
                ra
            }
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
                ra
            }
        }
    }
}

/// Result of labeling: `labels[i]` is 0 for pixels outside the selection and
/// `1..=count` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Pixel indices of every component, indexed by `label - 1`, each in raster order.
    pub fn pixel_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                lists[l as usize - 1].push(i);
            }
        }
        lists
    }

    /// Whether component `label` has a pixel on the image border.
    pub fn touches_border(&self) -> Vec<bool> {
        let mut touches = vec![false; self.count];
        let (w, h) = (self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    let l = self.labels[y * w + x];
                    if l > 0 {
                        touches[l as usize - 1] = true;
                    }
                }
            }
        }
        touches
    }
}

/// Labels the pixels for which `selected` is true.
pub fn label_components(
    width: usize,
    height: usize,
    selected: &[bool],
    connectivity: Connectivity,
) -> Components {
    assert_eq!(selected.len(), width * height, "selection length mismatch");
    let n = width * height;
    let mut forest = DisjointSet::new(n);

    // First pass: union each selected pixel with its already-visited neighbours.
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !selected[i] {
                continue;
            }
            if x > 0 && selected[i - 1] {
                forest.union(i, i - 1);
            }
            if y > 0 {
                let up = i - width;
                if selected[up] {
                    forest.union(i, up);
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && selected[up - 1] {
                        forest.union(i, up - 1);
                    }
                    if x + 1 < width && selected[up + 1] {
                        forest.union(i, up + 1);
                    }
                }
            }
        }
    }

    // Second pass: compact root ids into consecutive labels.
    let mut root_label = vec![0u32; n];
    let mut labels = vec![0u32; n];
    let mut count = 0usize;
    for i in 0..n {
        if !selected[i] {
            continue;
        }
        let root = forest.find(i);
        if root_label[root] == 0 {
            count += 1;
            root_label[root] = count as u32;
        }
        labels[i] = root_label[root];
    }

    Components {
        width,
        height,
        labels,
        count,
    }
}
