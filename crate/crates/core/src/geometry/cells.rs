/// Uniform bucket grid for fixed-radius neighbor queries.
///
/// Particles are bucketed once (counting sort, so every bucket lists its
/// particles in ascending index) and the grid is read-only afterwards.
/// Queries with any radius are answered correctly; they are cheapest when the
/// radius is close to the cell size.
#[derive(Clone, Debug)]
pub struct CellList {
    dim: usize,
    origin: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    starts: Vec<u32>,
    items: Vec<u32>,
}

const MAX_CELLS_PER_PARTICLE: usize = 8;

impl CellList {
    /// Buckets `coords` (flat, `dim` per point) into cells of side `cell_size`.
    /// The side is enlarged when the requested one would create far more
    /// cells than particles.
    pub fn new(coords: &[f64], dim: usize, cell_size: f64) -> Self {
        assert!(dim > 0 && dim <= 8, "cell lists support 1 <= dim <= 8");
        let n = coords.len() / dim;
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks_exact(dim) {
            for k in 0..dim {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        if n == 0 {
            lower.fill(0.0);
            upper.fill(0.0);
        }

        let max_cells = (n * MAX_CELLS_PER_PARTICLE).max(64);
        let mut cell = if cell_size.is_finite() && cell_size > 0.0 {
            cell_size
        } else {
            1.0
        };
        let shape = loop {
            let shape: Vec<usize> = (0..dim)
                .map(|k| ((upper[k] - lower[k]) / cell).floor() as usize + 1)
                .collect();
            let total = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
            match total {
                Some(t) if t <= max_cells => break shape,
                _ => cell *= 2.0,
            }
        };

        let ncells: usize = shape.iter().product();
        let mut counts = vec![0u32; ncells + 1];
        let cell_of: Vec<usize> = coords
            .chunks_exact(dim)
            .map(|p| flat_index(&shape, (0..dim).map(|k| axis_cell(p[k], lower[k], cell, shape[k]))))
            .collect();
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; n];
        for (i, &c) in cell_of.iter().enumerate() {
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }

        Self {
            dim,
            origin: lower,
            cell,
            shape,
            starts,
            items,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `visit(i, |x - x_i|^2)` for every particle with `|x - x_i| < r`.
    /// Particles are visited bucket by bucket, not in global index order.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, coords: &[f64], x: &[f64], r: f64, mut visit: F) {
        let dim = self.dim;
        if self.items.is_empty() || !(r > 0.0) {
            return;
        }
        let r2 = r * r;
        let mut lo = [0usize; 8];
        let mut hi = [0usize; 8];
        for k in 0..dim {
            let a = ((x[k] - r - self.origin[k]) / self.cell).floor();
            let b = ((x[k] + r - self.origin[k]) / self.cell).floor();
            let last = self.shape[k] as f64 - 1.0;
            if b < 0.0 || a > last {
                return;
            }
            lo[k] = a.max(0.0) as usize;
            hi[k] = b.min(last) as usize;
        }

        // odometer over the cell block; the last axis is contiguous in memory
        let mut idx = lo;
        loop {
            let mut base = 0usize;
            for k in 0..dim - 1 {
                base = base * self.shape[k] + idx[k];
            }
            let last = dim - 1;
            let row = base * self.shape[last];
            let s = self.starts[row + lo[last]] as usize;
            let e = self.starts[row + hi[last] + 1] as usize;
            for &j in &self.items[s..e] {
                let j = j as usize;
                let p = &coords[j * dim..(j + 1) * dim];
                let mut d2 = 0.0;
                for k in 0..dim {
                    let t = p[k] - x[k];
                    d2 += t * t;
                }
                if d2 < r2 {
                    visit(j, d2);
                }
            }

            if dim == 1 {
                return;
            }
            let mut k = dim - 2;
            loop {
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
                if k == 0 {
                    return;
                }
                k -= 1;
            }
        }
    }

    /// `Lambda(x, r)` (or `Lambda*(x, r)` with `exclude_center`) in ascending
    /// particle index.
    pub fn neighbors(&self, coords: &[f64], x: &[f64], r: f64, exclude_center: bool) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(coords, x, r, |j, d2| {
            if !(exclude_center && d2 == 0.0) {
                out.push(j);
            }
        });
        out.sort_unstable();
        out
    }

    /// Neighbors with their squared distances, ascending by index.
    pub fn neighbors_with_dist2(&self, coords: &[f64], x: &[f64], r: f64, out: &mut Vec<(u32, f64)>) {
        out.clear();
        self.for_each_within(coords, x, r, |j, d2| out.push((j as u32, d2)));
        out.sort_unstable_by_key(|e| e.0);
    }
}

fn axis_cell(v: f64, lower: f64, cell: f64, len: usize) -> usize {
    let c = ((v - lower) / cell).floor();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(len - 1)
    }
}

fn flat_index(shape: &[usize], idx: impl Iterator<Item = usize>) -> usize {
    idx.zip(shape).fold(0, |acc, (i, s)| acc * s + i)
}
