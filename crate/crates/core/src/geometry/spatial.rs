//! Uniform-grid nearest neighbour search over point sets.

use super::mesh::aabb_of;
use crate::error::{Error, Result};
use crate::Vec3;

/// Cap on grid cells relative to the point count.
const MAX_CELLS_PER_POINT: usize = 8;

/// Exact nearest-neighbour index. Distances use the same arithmetic as a brute
/// force scan, and ties resolve to the lowest point index, so results are
/// identical to brute force.
#[derive(Debug, Clone)]
pub struct PointGrid {
    points: Vec<Vec3>,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl PointGrid {
    /// Cell size is the median nearest-neighbour spacing of the points.
    pub fn new(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let (lo, hi) = aabb_of(points);
        let span = (hi - lo).max();
        let floor = (span * 1e-3).max(1e-9);
        let provisional = Self::with_cell(points, (span / (points.len() as f64).cbrt()).max(floor))?;
        if points.len() < 2 {
            return Ok(provisional);
        }
        let mut nn: Vec<f64> = (0..points.len())
            .map(|i| provisional.nearest_excluding(&points[i], i).0)
            .collect();
        let mid = nn.len() / 2;
        let (_, median, _) = nn.select_nth_unstable_by(mid, f64::total_cmp);
        Self::with_cell(points, median.max(floor))
    }

    /// Grid with an explicit cell size (enlarged if it would need too many cells).
    pub fn with_cell(points: &[Vec3], cell: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let (lo, hi) = aabb_of(points);
        let span = hi - lo;
        let mut cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let budget = (MAX_CELLS_PER_POINT * points.len()).max(64);
        let dims = loop {
            let d = [0, 1, 2].map(|a| ((span[a] / cell).floor() as usize + 1).max(1));
            if d[0].saturating_mul(d[1]).saturating_mul(d[2]) <= budget {
                break d;
            }
            cell *= 1.5;
        };
        let ncells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; ncells + 1];
        let key = |p: &Vec3| -> usize {
            let c = [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell).floor() as usize).min(dims[a] - 1));
            (c[2] * dims[1] + c[1]) * dims[0] + c[0]
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        Ok(PointGrid {
            points: points.to_vec(),
            origin: lo,
            cell,
            dims,
            starts,
            items,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Nearest point as (distance, index).
    pub fn nearest(&self, q: &Vec3) -> (f64, usize) {
        self.nearest_excluding(q, usize::MAX)
    }

    /// Nearest point strictly closer than `bound`, if any. Cheaper than
    /// [`nearest`](Self::nearest) when most queries lose to the bound.
    pub fn nearest_below(&self, q: &Vec3, bound: f64) -> Option<(f64, usize)> {
        let mut best = (bound, usize::MAX);
        self.search(q, usize::MAX, bound, &mut |d, i| {
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
            best.0
        });
        (best.1 != usize::MAX && best.0 < bound).then_some(best)
    }

    fn nearest_excluding(&self, q: &Vec3, skip: usize) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(q, skip, f64::INFINITY, &mut |d, i| {
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
            best.0
        });
        best
    }

    /// Calls `f(distance, index)` for every point within `radius` of `q`.
    pub fn within(&self, q: &Vec3, radius: f64, mut f: impl FnMut(f64, usize)) {
        let qc = self.cell_coords(q);
        let reach = (radius / self.cell).ceil() as i64;
        // squared prefilter, widened so it never rejects a point the exact
        // comparison would accept
        let r2 = radius * radius * (1.0 + 1e-12);
        let lo = [0, 1, 2].map(|a| (qc[a] - reach).max(0));
        let hi = [0, 1, 2].map(|a| (qc[a] + reach).min(self.dims[a] as i64 - 1));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    for &i in self.cell_items(x as usize, y as usize, z as usize) {
                        let i = i as usize;
                        let d2 = (self.points[i] - q).norm_squared();
                        if d2 <= r2 {
                            let d = d2.sqrt();
                            if d <= radius {
                                f(d, i);
                            }
                        }
                    }
                }
            }
        }
    }

    fn cell_coords(&self, q: &Vec3) -> [i64; 3] {
        [0, 1, 2].map(|a| {
            let c = ((q[a] - self.origin[a]) / self.cell).floor();
            c.clamp(-1e15, 1e15) as i64
        })
    }

    fn cell_items(&self, x: usize, y: usize, z: usize) -> &[u32] {
        let k = (z * self.dims[1] + y) * self.dims[0] + x;
        &self.items[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    /// Visits shells of cells outward from the query cell until no unvisited
    /// cell can hold a point closer than the current best.
    fn search(
        &self,
        q: &Vec3,
        skip: usize,
        bound: f64,
        visit: &mut impl FnMut(f64, usize) -> f64,
    ) {
        let qc = self.cell_coords(q);
        let dims = self.dims.map(|d| d as i64);
        // Chebyshev cell distance from the query cell to the grid
        let r0 = (0..3)
            .map(|a| {
                if qc[a] < 0 {
                    -qc[a]
                } else if qc[a] >= dims[a] {
                    qc[a] - dims[a] + 1
                } else {
                    0
                }
            })
            .max()
            .unwrap();
        let rmax = (0..3)
            .map(|a| (qc[a]).abs().max((qc[a] - dims[a] + 1).abs()))
            .max()
            .unwrap();
        let mut best = bound;
        let mut r = r0;
        if best < (r0 - 1).max(0) as f64 * self.cell {
            return;
        }
        loop {
            let lo = [0, 1, 2].map(|a| (qc[a] - r).max(0));
            let hi = [0, 1, 2].map(|a| (qc[a] + r).min(dims[a] - 1));
            if lo.iter().zip(&hi).all(|(l, h)| l <= h) {
                for z in lo[2]..=hi[2] {
                    let dz = (z - qc[2]).abs();
                    for y in lo[1]..=hi[1] {
                        let dy = (y - qc[1]).abs();
                        for x in lo[0]..=hi[0] {
                            let dx = (x - qc[0]).abs();
                            if dx.max(dy).max(dz) != r {
                                continue;
                            }
                            for &i in self.cell_items(x as usize, y as usize, z as usize) {
                                let i = i as usize;
                                if i == skip {
                                    continue;
                                }
                                let d = (self.points[i] - q).norm();
                                best = visit(d, i);
                            }
                        }
                    }
                }
            }
            if best < r as f64 * self.cell || r >= rmax {
                break;
            }
            r += 1;
        }
    }
}

/// d(v, V) = min over w in V of |v − w|.
pub fn min_dist_point_set(v: &Vec3, set: &[Vec3]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(PointGrid::new(set)?.nearest(v).0)
}

/// d(A, B) = min over a in A of d(a, B).
pub fn min_dist_set_set(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let grid = PointGrid::new(b)?;
    Ok(a.iter()
        .map(|p| grid.nearest(p).0)
        .fold(f64::INFINITY, f64::min))
}
