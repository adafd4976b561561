use super::{Point, Rect};
use crate::scalar::Scalar;

/// Uniform bucket grid over a point set, optionally periodic.
#[derive(Debug, Clone)]
pub struct PointGrid<T> {
    bounds: Rect<T>,
    cell: T,
    nx: usize,
    ny: usize,
    torus: bool,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl<T: Scalar> PointGrid<T> {
    /// Buckets `points` into cells of roughly `cell` side. With `torus`, `bounds`
    /// is the fundamental domain and every point must lie in it (after wrapping).
    pub fn new(points: &[Point<T>], bounds: Rect<T>, cell: T, torus: bool) -> Self {
        let w = bounds.width().max(T::min_positive_value());
        let h = bounds.height().max(T::min_positive_value());
        let cap = 4096usize;
        let nx = ((w / cell).floor().to_usize().unwrap_or(1)).clamp(1, cap);
        let ny = ((h / cell).floor().to_usize().unwrap_or(1)).clamp(1, cap);
        let cell = (w / T::from_usize_lossy(nx)).max(h / T::from_usize_lossy(ny));
        let mut grid = Self {
            bounds,
            cell,
            nx,
            ny,
            torus,
            starts: vec![0; nx * ny + 1],
            items: vec![0; points.len()],
        };
        let ids: Vec<usize> = points.iter().map(|&p| grid.cell_id(p)).collect();
        for &c in &ids {
            grid.starts[c + 1] += 1;
        }
        for i in 0..nx * ny {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in ids.iter().enumerate() {
            grid.items[fill[c]] = i;
            fill[c] += 1;
        }
        grid
    }

    pub fn cell_size(&self) -> T {
        self.cell
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn coords(&self, p: Point<T>) -> (usize, usize) {
        let p = if self.torus { self.bounds.wrap(p) } else { p };
        let fx = ((p.x - self.bounds.x0) / self.cell).floor();
        let fy = ((p.y - self.bounds.y0) / self.cell).floor();
        let cx = fx.to_i64().unwrap_or(0).clamp(0, self.nx as i64 - 1) as usize;
        let cy = fy.to_i64().unwrap_or(0).clamp(0, self.ny as i64 - 1) as usize;
        (cx, cy)
    }

    fn cell_id(&self, p: Point<T>) -> usize {
        let (cx, cy) = self.coords(p);
        cy * self.nx + cx
    }

    fn bucket(&self, cx: usize, cy: usize) -> &[usize] {
        let c = cy * self.nx + cx;
        &self.items[self.starts[c]..self.starts[c + 1]]
    }

    /// Largest ring index that still reaches new cells.
    pub fn max_ring(&self) -> usize {
        if self.torus {
            self.nx.max(self.ny) / 2
        } else {
            self.nx.max(self.ny)
        }
    }

    /// Indices of points in the cells at Chebyshev ring `r` around the cell
    /// containing `p`. Every point not yet visited after rings `0..=r` is at
    /// distance at least `r * cell_size()` from `p` (minimum image on a torus).
    pub fn ring(&self, p: Point<T>, r: usize, out: &mut Vec<usize>) {
        out.clear();
        let (cx, cy) = self.coords(p);
        let (cx, cy, r) = (cx as i64, cy as i64, r as i64);
        let mut seen_cells: Vec<(usize, usize)> = Vec::new();
        let mut visit = |x: i64, y: i64, out: &mut Vec<usize>| {
            let cell = if self.torus {
                Some((
                    x.rem_euclid(self.nx as i64) as usize,
                    y.rem_euclid(self.ny as i64) as usize,
                ))
            } else if x >= 0 && y >= 0 && (x as usize) < self.nx && (y as usize) < self.ny {
                Some((x as usize, y as usize))
            } else {
                None
            };
            if let Some(c) = cell {
                if self.torus {
                    // small periodic grids can revisit a cell within one ring
                    if seen_cells.contains(&c) {
                        return;
                    }
                    seen_cells.push(c);
                }
                out.extend_from_slice(self.bucket(c.0, c.1));
            }
        };
        if r == 0 {
            visit(cx, cy, out);
            return;
        }
        for x in (cx - r)..=(cx + r) {
            visit(x, cy - r, out);
            visit(x, cy + r, out);
        }
        for y in (cy - r + 1)..=(cy + r - 1) {
            visit(cx - r, y, out);
            visit(cx + r, y, out);
        }
    }

    /// All point indices whose cell lies within `radius` of `p`'s cell (a superset
    /// of the points within `radius`).
    pub fn candidates_within(&self, p: Point<T>, radius: T, out: &mut Vec<usize>) {
        out.clear();
        let rings = (radius / self.cell).ceil().to_usize().unwrap_or(0) + 1;
        let rings = rings.min(self.max_ring());
        let mut tmp = Vec::new();
        for r in 0..=rings {
            self.ring(p, r, &mut tmp);
            out.extend_from_slice(&tmp);
        }
        if self.torus {
            out.sort_unstable();
            out.dedup();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rings_partition_all_points() {
        let pts: Vec<Point<f64>> = (0..100)
            .map(|i| Point::new((i % 10) as f64 + 0.5, (i / 10) as f64 + 0.5))
            .collect();
        for torus in [false, true] {
            let g = PointGrid::new(&pts, Rect::square(10.0), 1.0, torus);
            let mut all = Vec::new();
            let mut buf = Vec::new();
            for r in 0..=g.max_ring() {
                g.ring(Point::new(3.2, 7.7), r, &mut buf);
                all.extend_from_slice(&buf);
            }
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 100, "torus={torus}");
        }
    }

    #[test]
    fn ring_distance_lower_bound() {
        let pts: Vec<Point<f64>> = (0..400)
            .map(|i| Point::new((i * 37 % 400) as f64 / 20.0, (i * 91 % 400) as f64 / 20.0))
            .collect();
        let g = PointGrid::new(&pts, Rect::square(20.0), 1.0, false);
        let q = Point::new(5.3, 11.9);
        let mut buf = Vec::new();
        for r in 0..6 {
            g.ring(q, r + 1, &mut buf);
            for &i in &buf {
                assert!(pts[i].dist(q) >= r as f64 * g.cell_size());
            }
        }
    }
}
