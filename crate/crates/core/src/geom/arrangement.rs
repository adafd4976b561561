//! Planar subdivision of a road set.
//!
//! Every segment is split at every node lying on it: its own endpoints, cities
//! on it, and (in junction mode) every crossing or touching point with another
//! segment. Nodes closer than the snapping distance are merged, collinear
//! overlaps are merged beforehand so shared geometry is counted once.

use super::{segment_intersection, Intersection, Point, Rect, RoutingGraph, Segment};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrangementOptions<T> {
    /// Points closer than this are one node.
    pub snap_eps: T,
    /// Crossings become junctions (Steiner semantics). When false, segments
    /// only meet at shared endpoints and at cities lying on them.
    pub junctions: bool,
    /// Periodic fundamental domain; segments may extend past it and are wrapped.
    pub torus: Option<Rect<T>>,
}

impl<T: Scalar> ArrangementOptions<T> {
    pub fn steiner(snap_eps: T) -> Self {
        Self {
            snap_eps,
            junctions: true,
            torus: None,
        }
    }

    pub fn graph(snap_eps: T) -> Self {
        Self {
            snap_eps,
            junctions: false,
            torus: None,
        }
    }

    pub fn with_torus(mut self, window: Rect<T>) -> Self {
        self.torus = Some(window);
        self
    }

    /// `1e-9` times the diameter of `window`.
    pub fn default_eps(window: &Rect<T>) -> T {
        T::lit(1e-9) * window.diameter()
    }
}

/// Splits a segment at the boundary lines of the periodic domain `r` and
/// translates each piece into `r`. Total length is preserved.
pub fn wrap_segment<T: Scalar>(s: &Segment<T>, r: &Rect<T>) -> Vec<Segment<T>> {
    let s = s.translate(r.wrap(s.a) - s.a);
    let d = s.dir();
    let mut ts = vec![T::zero(), T::one()];
    let mut cuts = |a: T, da: T, origin: T, period: T| {
        if da == T::zero() {
            return;
        }
        let (lo, hi) = if da > T::zero() { (a, a + da) } else { (a + da, a) };
        let mut k = ((lo - origin) / period).floor() + T::one();
        loop {
            let x = origin + k * period;
            if x >= hi {
                break;
            }
            if x > lo {
                ts.push((x - a) / da);
            }
            k = k + T::one();
        }
    };
    cuts(s.a.x, d.x, r.x0, r.width());
    cuts(s.a.y, d.y, r.y0, r.height());
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let two = T::lit(2.0);
    ts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let piece = Segment::new(s.at(w[0]), s.at(w[1]));
            let mid = s.at((w[0] + w[1]) / two);
            piece.translate(r.wrap(mid) - mid)
        })
        .collect()
}

/// Merges collinear segments whose extents overlap by more than `eps`; the
/// union of the geometry is unchanged and no stretch is covered twice.
/// Segments shorter than `eps` are dropped.
pub fn merge_collinear<T: Scalar>(segments: &[Segment<T>], eps: T) -> Vec<Segment<T>> {
    struct Keyed<T> {
        angle: T,
        offset: T,
        lo: T,
        hi: T,
        a: Point<T>,
        b: Point<T>,
    }
    let half_pi = T::pi() / T::lit(2.0);
    let mut keyed: Vec<Keyed<T>> = segments
        .iter()
        .filter(|s| s.length() > eps)
        .map(|s| {
            let (mut a, mut b) = (s.a, s.b);
            let mut d = b - a;
            if d.x < T::zero() || (d.x == T::zero() && d.y < T::zero()) {
                std::mem::swap(&mut a, &mut b);
                d = b - a;
            }
            let angle = d.y.atan2(d.x);
            let u = d.scale(T::one() / d.norm());
            Keyed {
                angle,
                offset: u.cross(a),
                lo: u.dot(a),
                hi: u.dot(b),
                a,
                b,
            }
        })
        .collect();
    debug_assert!(keyed.iter().all(|k| k.angle > -half_pi - eps && k.angle <= half_pi));
    keyed.sort_by(|p, q| {
        p.angle
            .partial_cmp(&q.angle)
            .unwrap()
            .then(p.offset.partial_cmp(&q.offset).unwrap())
            .then(p.lo.partial_cmp(&q.lo).unwrap())
    });

    let ang_tol = T::lit(1e-12).max(eps * T::lit(1e-3));
    let mut out = Vec::with_capacity(keyed.len());
    let mut i = 0;
    while i < keyed.len() {
        let mut j = i + 1;
        while j < keyed.len()
            && (keyed[j].angle - keyed[j - 1].angle).abs() <= ang_tol
            && (keyed[j].offset - keyed[j - 1].offset).abs() <= eps
        {
            j += 1;
        }
        let group = &mut keyed[i..j];
        if group.len() == 1 {
            out.push(Segment::new(group[0].a, group[0].b));
        } else {
            // project on the first member's direction so the sweep is consistent
            let u = (group[0].b - group[0].a).scale(T::one() / group[0].b.dist(group[0].a));
            for k in group.iter_mut() {
                k.lo = u.dot(k.a);
                k.hi = u.dot(k.b);
            }
            group.sort_by(|p, q| p.lo.partial_cmp(&q.lo).unwrap());
            let mut cur_a = group[0].a;
            let mut cur_b = group[0].b;
            let mut cur_hi = group[0].hi;
            for k in group.iter().skip(1) {
                if k.lo < cur_hi - eps {
                    if k.hi > cur_hi {
                        cur_hi = k.hi;
                        cur_b = k.b;
                    }
                } else {
                    out.push(Segment::new(cur_a, cur_b));
                    cur_a = k.a;
                    cur_b = k.b;
                    cur_hi = k.hi;
                }
            }
            out.push(Segment::new(cur_a, cur_b));
        }
        i = j;
    }
    out
}

struct Snapper<T> {
    eps: T,
    torus: Option<Rect<T>>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    nodes: Vec<Point<T>>,
}

impl<T: Scalar> Snapper<T> {
    fn new(eps: T, torus: Option<Rect<T>>) -> Self {
        Self {
            eps,
            torus,
            buckets: HashMap::new(),
            nodes: Vec::new(),
        }
    }

    fn canonical(&self, p: Point<T>) -> Point<T> {
        match &self.torus {
            None => p,
            Some(r) => {
                let mut q = r.wrap(p);
                if r.x1 - q.x <= self.eps {
                    q.x = r.x0;
                }
                if r.y1 - q.y <= self.eps {
                    q.y = r.y0;
                }
                q
            }
        }
    }

    fn dist(&self, a: Point<T>, b: Point<T>) -> T {
        match &self.torus {
            None => a.dist(b),
            Some(r) => r.torus_dist(a, b),
        }
    }

    fn key(&self, p: Point<T>) -> (i64, i64) {
        (
            (p.x / self.eps).floor().to_i64().unwrap_or(i64::MAX),
            (p.y / self.eps).floor().to_i64().unwrap_or(i64::MAX),
        )
    }

    fn insert(&mut self, p: Point<T>) -> usize {
        let q = self.canonical(p);
        let (kx, ky) = self.key(q);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if let Some(&id) = ids.iter().find(|&&id| self.dist(self.nodes[id], q) <= self.eps) {
                        return id;
                    }
                }
            }
        }
        let id = self.nodes.len();
        self.nodes.push(q);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }
}

/// Uniform grid of the cells each segment actually passes through.
struct SegmentBins<T> {
    bounds: Rect<T>,
    cell: T,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
    per_segment: Vec<Vec<u32>>,
}

impl<T: Scalar> SegmentBins<T> {
    fn new(segs: &[Segment<T>], extra: &[Point<T>], pad: T) -> Self {
        let mut bounds = Rect::new(T::infinity(), T::infinity(), T::neg_infinity(), T::neg_infinity());
        let mut grow = |p: Point<T>| {
            bounds.x0 = bounds.x0.min(p.x);
            bounds.y0 = bounds.y0.min(p.y);
            bounds.x1 = bounds.x1.max(p.x);
            bounds.y1 = bounds.y1.max(p.y);
        };
        for s in segs {
            grow(s.a);
            grow(s.b);
        }
        for &p in extra {
            grow(p);
        }
        if !bounds.x0.is_finite() {
            bounds = Rect::new(T::zero(), T::zero(), T::one(), T::one());
        }
        let pad2 = pad * T::lit(4.0);
        bounds = Rect::new(bounds.x0 - pad2, bounds.y0 - pad2, bounds.x1 + pad2, bounds.y1 + pad2);
        let n = segs.len().max(1);
        let cap = T::lit(2048.0);
        let cell = (bounds.area() / T::from_usize_lossy(n))
            .sqrt()
            .max(bounds.width() / cap)
            .max(bounds.height() / cap)
            .max(pad * T::lit(16.0));
        let nx = (bounds.width() / cell).ceil().to_usize().unwrap_or(1).max(1);
        let ny = (bounds.height() / cell).ceil().to_usize().unwrap_or(1).max(1);
        let mut bins = Self {
            bounds,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
            per_segment: Vec::with_capacity(segs.len()),
        };
        for (i, s) in segs.iter().enumerate() {
            let covered = bins.covered_cells(s, pad);
            for &c in &covered {
                bins.cells[c as usize].push(i as u32);
            }
            bins.per_segment.push(covered);
        }
        bins
    }

    fn col(&self, x: T) -> usize {
        ((x - self.bounds.x0) / self.cell)
            .floor()
            .to_i64()
            .unwrap_or(0)
            .clamp(0, self.nx as i64 - 1) as usize
    }

    fn row(&self, y: T) -> usize {
        ((y - self.bounds.y0) / self.cell)
            .floor()
            .to_i64()
            .unwrap_or(0)
            .clamp(0, self.ny as i64 - 1) as usize
    }

    fn covered_cells(&self, s: &Segment<T>, pad: T) -> Vec<u32> {
        let (a, b) = if s.a.x <= s.b.x { (s.a, s.b) } else { (s.b, s.a) };
        let mut out = Vec::new();
        let c0 = self.col(a.x - pad);
        let c1 = self.col(b.x + pad);
        let dx = b.x - a.x;
        for cx in c0..=c1 {
            let xl = self.bounds.x0 + T::from_usize_lossy(cx) * self.cell;
            let xr = xl + self.cell;
            let (ylo, yhi) = if dx <= pad {
                (a.y.min(b.y), a.y.max(b.y))
            } else {
                let tl = ((xl - pad - a.x) / dx).max(T::zero()).min(T::one());
                let tr = ((xr + pad - a.x) / dx).max(T::zero()).min(T::one());
                let yl = a.y + (b.y - a.y) * tl;
                let yr = a.y + (b.y - a.y) * tr;
                (yl.min(yr), yl.max(yr))
            };
            for cy in self.row(ylo - pad)..=self.row(yhi + pad) {
                out.push((cy * self.nx + cx) as u32);
            }
        }
        out
    }

    fn near_point(&self, p: Point<T>) -> impl Iterator<Item = u32> + '_ {
        let cx = self.col(p.x) as i64;
        let cy = self.row(p.y) as i64;
        (-1..=1i64).flat_map(move |dx| {
            (-1..=1i64).flat_map(move |dy| {
                let x = cx + dx;
                let y = cy + dy;
                if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                    [].iter().copied()
                } else {
                    self.cells[(y as usize) * self.nx + x as usize].iter().copied()
                }
            })
        })
    }
}

/// Builds the routing graph of `segments` with `cities` attached.
///
/// Fails with [`Error::DisconnectedCity`] when a city is farther than the
/// snapping distance from every segment.
pub fn build_arrangement<T: Scalar>(
    segments: &[Segment<T>],
    cities: &[Point<T>],
    opts: &ArrangementOptions<T>,
) -> Result<RoutingGraph<T>> {
    let eps = opts.snap_eps;
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput("snap_eps must be positive".into()));
    }
    if let Some(p) = cities.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite city {p:?}")));
    }
    if segments.iter().any(|s| !s.a.is_finite() || !s.b.is_finite()) {
        return Err(Error::InvalidInput("non-finite segment endpoint".into()));
    }

    let pieces: Vec<Segment<T>> = match &opts.torus {
        Some(r) => segments.iter().flat_map(|s| wrap_segment(s, r)).collect(),
        None => segments.to_vec(),
    };
    let segs = merge_collinear(&pieces, eps);

    let mut snap = Snapper::new(eps, opts.torus);
    let mut splits: Vec<Vec<(T, usize)>> = Vec::with_capacity(segs.len());
    for s in &segs {
        let na = snap.insert(s.a);
        let nb = snap.insert(s.b);
        splits.push(vec![(T::zero(), na), (T::one(), nb)]);
    }
    let endpoint_nodes = snap.nodes.len();

    let city_pos: Vec<Point<T>> = cities.iter().map(|&c| snap.canonical(c)).collect();
    let city_nodes: Vec<usize> = city_pos.iter().map(|&c| snap.insert(c)).collect();

    let bins = SegmentBins::new(&segs, &city_pos, eps);
    for (ci, &c) in city_pos.iter().enumerate() {
        let mut attached = city_nodes[ci] < endpoint_nodes;
        for j in bins.near_point(c) {
            let s = &segs[j as usize];
            if s.distance_to(c) <= eps {
                splits[j as usize].push((s.project_param(c), city_nodes[ci]));
                attached = true;
            }
        }
        if !attached {
            return Err(Error::DisconnectedCity { index: ci });
        }
    }

    if opts.junctions {
        let mut stamp = vec![u32::MAX; segs.len()];
        for i in 0..segs.len() {
            for &c in &bins.per_segment[i] {
                for &j in &bins.cells[c as usize] {
                    let ju = j as usize;
                    if ju <= i || stamp[ju] == i as u32 {
                        continue;
                    }
                    stamp[ju] = i as u32;
                    let hits = match segment_intersection(&segs[i], &segs[ju]) {
                        Intersection::None => continue,
                        Intersection::Point(p) => [Some(p), None],
                        Intersection::Overlap(o) => [Some(o.a), Some(o.b)],
                    };
                    for p in hits.into_iter().flatten() {
                        let n = snap.insert(p);
                        splits[i].push((param_on(&segs[i], p), n));
                        splits[ju].push((param_on(&segs[ju], p), n));
                    }
                }
            }
        }
    }

    let nodes = snap.nodes;
    // On a torus two distinct roads can join the same node pair, so the key
    // also carries the quantized displacement and weights come from geometry.
    let quantum = eps * T::lit(1024.0);
    let mut edge_map: HashMap<(usize, usize, i64, i64), T> = HashMap::new();
    for (si, list) in splits.iter_mut().enumerate() {
        list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let dir = segs[si].dir();
        let mut prev: Option<(T, usize)> = None;
        for &(t, n) in list.iter() {
            if let Some((tp, u)) = prev {
                if u != n {
                    let (key, w) = match &opts.torus {
                        None => ((u.min(n), u.max(n), 0, 0), nodes[u].dist(nodes[n])),
                        Some(_) => {
                            let mut disp = dir.scale(t - tp);
                            if u > n {
                                disp = disp.scale(-T::one());
                            }
                            let q = |v: T| (v / quantum).round().to_i64().unwrap_or(0);
                            ((u.min(n), u.max(n), q(disp.x), q(disp.y)), disp.norm())
                        }
                    };
                    edge_map
                        .entry(key)
                        .and_modify(|e| {
                            if w < *e {
                                *e = w
                            }
                        })
                        .or_insert(w);
                }
            }
            prev = Some((t, n));
        }
    }
    let mut edges: Vec<(usize, usize, T)> = edge_map.into_iter().map(|((u, v, _, _), w)| (u, v, w)).collect();
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.partial_cmp(&b.2).unwrap()));
    Ok(RoutingGraph::from_parts(nodes, edges, city_nodes, opts.torus))
}

fn param_on<T: Scalar>(s: &Segment<T>, p: Point<T>) -> T {
    let d = s.dir();
    (p - s.a).dot(d) / d.dot(d)
}
