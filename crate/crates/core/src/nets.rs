//! Road-network constructions over a city configuration.

use crate::configs::{square_grid, ConfigKind, PointConfig};
use crate::error::{domain, Error, Result};
use crate::geom::{build_arrangement, clip_segment, ArrangementOptions, PointGrid};
use crate::{Point, Rect, RoutingGraph, Segment};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, Point2, Triangulation};
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

pub const NETWORK_SCHEMA_VERSION: u32 = 1;

/// A set of straight roads over a set of cities.
///
/// On a torus, roads start inside the window and may run past its edge; they
/// are wrapped when the routing graph is built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub cities: Vec<Point>,
    pub segments: Vec<Segment>,
    pub window: Rect,
    pub torus: bool,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    schema_version: u32,
    kind: String,
    params: BTreeMap<String, f64>,
    window: [f64; 4],
    torus: bool,
    cities: Vec<[f64; 2]>,
    segments: Vec<[f64; 4]>,
}

impl Network {
    fn from_config(kind: &str, params: &[(&str, f64)], cfg: &PointConfig, segments: Vec<Segment>) -> Self {
        Self {
            kind: kind.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            cities: cfg.points.clone(),
            segments,
            window: cfg.window,
            torus: cfg.torus,
        }
    }

    /// Sum of raw segment lengths (overlaps counted twice).
    pub fn raw_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    pub fn snap_eps(&self) -> f64 {
        ArrangementOptions::default_eps(&self.window)
    }

    /// Routing graph. With `junctions`, roads meet wherever they cross
    /// (Steiner semantics); otherwise only at shared endpoints and cities.
    pub fn routing_graph(&self, junctions: bool) -> Result<RoutingGraph> {
        let eps = self.snap_eps();
        let mut opts = if junctions {
            ArrangementOptions::steiner(eps)
        } else {
            ArrangementOptions::graph(eps)
        };
        if self.torus {
            opts = opts.with_torus(self.window);
        }
        build_arrangement(&self.segments, &self.cities, &opts)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.cities = self.cities.iter().map(|p| p.scale(c)).collect();
        out.segments = self.segments.iter().map(|s| Segment::new(s.a.scale(c), s.b.scale(c))).collect();
        let w = self.window;
        out.window = Rect::new(w.x0 * c, w.y0 * c, w.x1 * c, w.y1 * c);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let w = self.window;
        let f = NetworkFile {
            schema_version: NETWORK_SCHEMA_VERSION,
            kind: self.kind.clone(),
            params: self.params.clone(),
            window: [w.x0, w.y0, w.x1, w.y1],
            torus: self.torus,
            cities: self.cities.iter().map(|p| [p.x, p.y]).collect(),
            segments: self.segments.iter().map(|s| [s.a.x, s.a.y, s.b.x, s.b.y]).collect(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: NetworkFile = serde_json::from_str(s)?;
        if f.schema_version != NETWORK_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported network schema version {}", f.schema_version)));
        }
        let [x0, y0, x1, y1] = f.window;
        let net = Self {
            kind: f.kind,
            params: f.params,
            cities: f.cities.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            segments: f
                .segments
                .iter()
                .map(|&[ax, ay, bx, by]| Segment::new(Point::new(ax, ay), Point::new(bx, by)))
                .collect(),
            window: Rect::new(x0, y0, x1, y1),
            torus: f.torus,
        };
        let finite = net.cities.iter().all(|p| p.is_finite())
            && net.segments.iter().all(|s| s.a.is_finite() && s.b.is_finite());
        if !finite || net.window.is_empty() {
            return Err(Error::InvalidInput("network file has non-finite coordinates or an empty window".into()));
        }
        Ok(net)
    }
}

/// Builder selection, as stored in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuilderSpec {
    Delaunay,
    Theta { m: u32 },
    Yao { m: u32 },
    Cone { k: u32 },
    ConeDirection { k: u32, i: u32 },
    Grid { t: f64, variant: GridVariant },
    AlternateDiagonals,
    Lattice,
}

impl BuilderSpec {
    pub fn build(&self, cfg: &PointConfig) -> Result<Network> {
        match *self {
            Self::Delaunay => delaunay(cfg),
            Self::Theta { m } => theta_graph(cfg, m),
            Self::Yao { m } => yao_graph(cfg, m),
            Self::Cone { k } => cone_road_network(cfg, k),
            Self::ConeDirection { k, i } => cone_road_direction(cfg, k, i),
            Self::Grid { t, variant } => grid_freeway(cfg, t, variant),
            Self::AlternateDiagonals => alternate_diagonals(cfg.window),
            Self::Lattice => lattice_edges(cfg),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Delaunay => "delaunay".into(),
            Self::Theta { m } => format!("theta(m={m})"),
            Self::Yao { m } => format!("yao(m={m})"),
            Self::Cone { k } => format!("cone(k={k})"),
            Self::ConeDirection { k, i } => format!("cone_direction(k={k},i={i})"),
            Self::Grid { t, variant } => format!("grid({variant:?},t={t})"),
            Self::AlternateDiagonals => "alternate_diagonals".into(),
            Self::Lattice => "lattice".into(),
        }
    }
}

/// Collects city-to-city roads once each. On a torus a road is identified by
/// its endpoints and the period shift between them.
struct EdgeSet<'a> {
    cfg: &'a PointConfig,
    seen: HashSet<(usize, usize, i64, i64)>,
    segments: Vec<(usize, usize, i64, i64, Segment)>,
}

impl<'a> EdgeSet<'a> {
    fn new(cfg: &'a PointConfig) -> Self {
        Self {
            cfg,
            seen: HashSet::new(),
            segments: Vec::new(),
        }
    }

    /// Road from city `i` along displacement `d` to (a periodic copy of) city `j`.
    fn add(&mut self, i: usize, j: usize, d: Point) {
        if i == j && !self.cfg.torus {
            return;
        }
        let pts = &self.cfg.points;
        let (a, b, d) = if i <= j { (i, j, d) } else { (j, i, Point::new(-d.x, -d.y)) };
        let (sx, sy) = if self.cfg.torus {
            let w = self.cfg.window;
            let off = pts[a] + d - pts[b];
            ((off.x / w.width()).round() as i64, (off.y / w.height()).round() as i64)
        } else {
            (0, 0)
        };
        if a == b && (sx, sy) == (0, 0) {
            return;
        }
        // a self-loop through the period is the same road in both directions
        let key = if a == b && (sx < 0 || (sx == 0 && sy < 0)) { (a, b, -sx, -sy) } else { (a, b, sx, sy) };
        if self.seen.insert(key) {
            let d = if key.2 != sx || key.3 != sy { Point::new(-d.x, -d.y) } else { d };
            self.segments.push((key.0, key.1, key.2, key.3, Segment::new(pts[a], pts[a] + d)));
        }
    }

    fn into_segments(mut self) -> Vec<Segment> {
        self.segments.sort_by_key(|e| (e.0, e.1, e.2, e.3));
        self.segments.into_iter().map(|e| e.4).collect()
    }
}

/// Delaunay triangulation of the cities. On a torus the triangulation of the
/// 3×3 tiling is taken and every edge with an endpoint in the central tile
/// is kept once.
pub fn delaunay(cfg: &PointConfig) -> Result<Network> {
    let n = cfg.len();
    if n < 3 {
        return domain(format!("Delaunay needs at least 3 cities, got {n}"));
    }
    let w = cfg.window;
    let shifts: Vec<(i64, i64)> = if cfg.torus {
        let mut s = vec![(0, 0)];
        for a in -1..=1 {
            for b in -1..=1 {
                if (a, b) != (0, 0) {
                    s.push((a, b));
                }
            }
        }
        s
    } else {
        vec![(0, 0)]
    };
    let mut dt = DelaunayTriangulation::<Point2<f64>>::new();
    // vertex index -> (city, tile)
    let mut owner: Vec<(usize, usize)> = Vec::with_capacity(n * shifts.len());
    for (tile, &(a, b)) in shifts.iter().enumerate() {
        for (i, p) in cfg.points.iter().enumerate() {
            let q = Point2::new(p.x + a as f64 * w.width(), p.y + b as f64 * w.height());
            let h = dt
                .insert(q)
                .map_err(|e| Error::InvalidInput(format!("city {i} cannot be triangulated: {e:?}")))?;
            if h.index() == owner.len() {
                owner.push((i, tile));
            }
        }
    }
    if dt.num_inner_faces() == 0 {
        return domain("Delaunay needs cities that are not all collinear");
    }
    let mut edges = EdgeSet::new(cfg);
    for e in dt.undirected_edges() {
        let [u, v] = e.vertices();
        let (ci, ti) = owner[u.fix().index()];
        let (cj, tj) = owner[v.fix().index()];
        if ti != 0 && tj != 0 {
            continue;
        }
        let (pu, pv) = (u.position(), v.position());
        let d = Point::new(pv.x - pu.x, pv.y - pu.y);
        if ti == 0 {
            edges.add(ci, cj, d);
        } else {
            edges.add(cj, ci, Point::new(-d.x, -d.y));
        }
    }
    Ok(Network::from_config("delaunay", &[], cfg, edges.into_segments()))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ConeKey {
    /// Orthogonal projection onto the cone bisector (θ-graph).
    Projection,
    /// Euclidean distance (Yao graph).
    Distance,
}

#[derive(Clone, Copy)]
struct Candidate {
    key: f64,
    dist: f64,
    angle: f64,
    index: usize,
    disp: Point,
}

impl Candidate {
    fn better_than(&self, o: &Candidate) -> bool {
        (self.key, self.dist, self.angle, self.index)
            .partial_cmp(&(o.key, o.dist, o.angle, o.index))
            .map(|c| c.is_lt())
            .unwrap_or(false)
    }
}

fn full_angle(d: Point) -> f64 {
    let a = d.y.atan2(d.x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

fn grid_cell(cfg: &PointConfig) -> f64 {
    let n = cfg.len().max(1) as f64;
    (cfg.window.area() / n).sqrt().max(1e-9 * cfg.window.diameter())
}

/// For every city and every active cone (`cones` equal cones starting at
/// angle 0), the best neighbor under `key` with ties broken by distance,
/// angle, then index. Returns `(city, neighbor, displacement)`.
fn cone_choices(cfg: &PointConfig, cones: usize, key: ConeKey, active: &[bool]) -> Vec<(usize, usize, Point)> {
    let pts = &cfg.points;
    if pts.len() < 2 {
        return Vec::new();
    }
    let width = 2.0 * PI / cones as f64;
    let bisectors: Vec<Point> = (0..cones)
        .map(|c| {
            let a = (c as f64 + 0.5) * width;
            Point::new(a.cos(), a.sin())
        })
        .collect();
    let key_scale = match key {
        ConeKey::Projection => (width / 2.0).cos(),
        ConeKey::Distance => 1.0,
    };
    let n_active = active.iter().filter(|&&a| a).count();
    let grid = PointGrid::new(pts, cfg.window, grid_cell(cfg), cfg.torus);
    let per_city: Vec<Vec<(usize, usize, Point)>> = (0..pts.len())
        .into_par_iter()
        .map(|z| {
            let pz = pts[z];
            let mut best: Vec<Option<Candidate>> = vec![None; cones];
            let mut buf = Vec::new();
            for r in 0..=grid.max_ring() {
                grid.ring(pz, r, &mut buf);
                for &j in &buf {
                    if j == z {
                        continue;
                    }
                    let d = if cfg.torus { cfg.window.min_image(pz, pts[j]) } else { pts[j] - pz };
                    let dist = d.norm();
                    if dist == 0.0 {
                        continue;
                    }
                    let angle = full_angle(d);
                    let c = ((angle / width) as usize).min(cones - 1);
                    if !active[c] {
                        continue;
                    }
                    let k = match key {
                        ConeKey::Projection => d.dot(bisectors[c]),
                        ConeKey::Distance => dist,
                    };
                    let cand = Candidate { key: k, dist, angle, index: j, disp: d };
                    if best[c].is_none_or(|b| cand.better_than(&b)) {
                        best[c] = Some(cand);
                    }
                }
                let lb = r as f64 * grid.cell_size() * key_scale;
                let found = best.iter().filter(|b| b.is_some_and(|b| b.key < lb)).count();
                if found == n_active {
                    break;
                }
            }
            best.iter().flatten().map(|c| (z, c.index, c.disp)).collect()
        })
        .collect();
    per_city.into_iter().flatten().collect()
}

fn check_m(m: u32) -> Result<()> {
    if m < 6 {
        return domain(format!("cone graphs need m >= 6, got {m}"));
    }
    Ok(())
}

fn cone_network(cfg: &PointConfig, kind: &str, params: &[(&str, f64)], cones: usize, key: ConeKey, active: &[bool]) -> Network {
    let mut edges = EdgeSet::new(cfg);
    for (z, j, d) in cone_choices(cfg, cones, key, active) {
        edges.add(z, j, d);
    }
    Network::from_config(kind, params, cfg, edges.into_segments())
}

/// θ_m graph: in each of `m` cones of angle `2π/m` (boundaries at `2πi/m`),
/// an edge to the city whose projection onto the cone bisector is smallest.
pub fn theta_graph(cfg: &PointConfig, m: u32) -> Result<Network> {
    check_m(m)?;
    let m_us = m as usize;
    Ok(cone_network(cfg, "theta", &[("m", f64::from(m))], m_us, ConeKey::Projection, &vec![true; m_us]))
}

/// Yao graph: the same cones, nearest city by Euclidean distance.
pub fn yao_graph(cfg: &PointConfig, m: u32) -> Result<Network> {
    check_m(m)?;
    let m_us = m as usize;
    Ok(cone_network(cfg, "yao", &[("m", f64::from(m))], m_us, ConeKey::Distance, &vec![true; m_us]))
}

fn check_k(k: u32) -> Result<()> {
    if k < 2 {
        return domain(format!("cone roads need k >= 2, got {k}"));
    }
    Ok(())
}

/// Union of the direction networks `N_0, ..., N_{k-1}`: every city is joined
/// to its nearest city in each of the `2k` cones of angle `π/k`.
pub fn cone_road_network(cfg: &PointConfig, k: u32) -> Result<Network> {
    check_k(k)?;
    let c = 2 * k as usize;
    Ok(cone_network(cfg, "cone", &[("k", f64::from(k))], c, ConeKey::Distance, &vec![true; c]))
}

/// Direction network `N_i`: nearest city in cone `[iπ/k, (i+1)π/k)` and in the
/// opposite cone.
pub fn cone_road_direction(cfg: &PointConfig, k: u32, i: u32) -> Result<Network> {
    check_k(k)?;
    if i >= k {
        return domain(format!("direction index {i} must be below k = {k}"));
    }
    let c = 2 * k as usize;
    let mut active = vec![false; c];
    active[i as usize] = true;
    active[(i + k) as usize] = true;
    Ok(cone_network(
        cfg,
        "cone_direction",
        &[("k", f64::from(k)), ("i", f64::from(i))],
        c,
        ConeKey::Distance,
        &active,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridVariant {
    N1,
    N2,
    N3,
}

impl std::str::FromStr for GridVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "N1" => Ok(Self::N1),
            "N2" => Ok(Self::N2),
            "N3" => Ok(Self::N3),
            _ => Err(Error::InvalidInput(format!("unknown grid variant {s:?} (expected N1, N2 or N3)"))),
        }
    }
}

/// Grid roads of spacing `t` (adjusted so the window holds a whole number of
/// cells), a N-S and an E-W access road across its cell for every city, and
/// for N2 one, for N3 two, interior roads each way per cell.
pub fn grid_freeway(cfg: &PointConfig, t: f64, variant: GridVariant) -> Result<Network> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("grid spacing must be positive, got {t}"));
    }
    if cfg.torus {
        return Err(Error::Unsupported("grid freeways are built on planar windows".into()));
    }
    let w = cfg.window;
    let nx = ((w.width() / t).round() as usize).max(1);
    let ny = ((w.height() / t).round() as usize).max(1);
    let (tx, ty) = (w.width() / nx as f64, w.height() / ny as f64);
    let vertical = |x: f64, y0: f64, y1: f64| Segment::new(Point::new(x, y0), Point::new(x, y1));
    let horizontal = |y: f64, x0: f64, x1: f64| Segment::new(Point::new(x0, y), Point::new(x1, y));
    let mut segs = Vec::new();
    let fractions: &[f64] = match variant {
        GridVariant::N1 => &[0.0],
        GridVariant::N2 => &[0.0, 0.5],
        GridVariant::N3 => &[0.0, 1.0 / 3.0, 2.0 / 3.0],
    };
    for i in 0..nx {
        for &f in fractions {
            segs.push(vertical(w.x0 + (i as f64 + f) * tx, w.y0, w.y1));
        }
    }
    segs.push(vertical(w.x1, w.y0, w.y1));
    for j in 0..ny {
        for &f in fractions {
            segs.push(horizontal(w.y0 + (j as f64 + f) * ty, w.x0, w.x1));
        }
    }
    segs.push(horizontal(w.y1, w.x0, w.x1));
    for p in &cfg.points {
        let i = (((p.x - w.x0) / tx).floor() as usize).min(nx - 1);
        let j = (((p.y - w.y0) / ty).floor() as usize).min(ny - 1);
        let (cx0, cy0) = (w.x0 + i as f64 * tx, w.y0 + j as f64 * ty);
        segs.push(vertical(p.x, cy0, cy0 + ty));
        segs.push(horizontal(p.y, cx0, cx0 + tx));
    }
    let code = match variant {
        GridVariant::N1 => 1.0,
        GridVariant::N2 => 2.0,
        GridVariant::N3 => 3.0,
    };
    Ok(Network::from_config(
        "grid",
        &[("t", t), ("t_used", tx), ("variant", code)],
        cfg,
        segs,
    ))
}

/// Period-2 diagonal pattern over the integer lattice: lines `x − y = c` for
/// even `c` and `x + y = c` for odd `c`, so every lattice city sits on exactly
/// one line. Lines are clipped to the window grown by one unit so corner
/// cities keep a road through them.
pub fn alternate_diagonals(window: Rect) -> Result<Network> {
    let int = |v: f64| (v - v.round()).abs() < 1e-12;
    if ![window.x0, window.y0, window.x1, window.y1].iter().all(|&v| int(v)) {
        return domain("alternate diagonals need a window with integer corners");
    }
    let cfg = square_grid(window)?;
    let clip = Rect::new(window.x0 - 1.0, window.y0 - 1.0, window.x1 + 1.0, window.y1 + 1.0);
    let reach = clip.diameter() + clip.x0.abs() + clip.y0.abs() + clip.x1.abs() + clip.y1.abs();
    let mut segs = Vec::new();
    let (lo, hi) = ((clip.x0 - clip.y1).floor() as i64, (clip.x1 - clip.y0).ceil() as i64);
    for c in lo..=hi {
        if c.rem_euclid(2) == 0 {
            let c = c as f64;
            let s = Segment::new(Point::new(-reach, -reach - c), Point::new(reach, reach - c));
            segs.extend(clip_segment(&s, &clip).filter(|s| s.length() > 1e-9));
        }
    }
    let (lo, hi) = ((clip.x0 + clip.y0).floor() as i64, (clip.x1 + clip.y1).ceil() as i64);
    for c in lo..=hi {
        if c.rem_euclid(2) == 1 {
            let c = c as f64;
            let s = Segment::new(Point::new(-reach, c + reach), Point::new(reach, c - reach));
            segs.extend(clip_segment(&s, &clip).filter(|s| s.length() > 1e-9));
        }
    }
    Ok(Network::from_config("alternate_diagonals", &[], &cfg, segs))
}

/// All nearest-neighbor edges of a square, hexagonal or triangular lattice.
pub fn lattice_edges(cfg: &PointConfig) -> Result<Network> {
    if !cfg.kind.is_lattice() {
        return Err(Error::InvalidInput(format!("lattice edges need a lattice configuration, got {:?}", cfg.kind)));
    }
    let l = cfg
        .spacing()
        .ok_or_else(|| Error::InvalidInput("lattice configuration has no spacing".into()))?;
    let pts = &cfg.points;
    let grid = PointGrid::new(pts, cfg.window, l, false);
    let mut buf = Vec::new();
    let mut segs = Vec::new();
    for (i, &p) in pts.iter().enumerate() {
        grid.candidates_within(p, l * 1.01, &mut buf);
        buf.sort_unstable();
        for &j in &buf {
            if j > i && (pts[j].dist(p) - l).abs() <= 1e-9 * l.max(1.0) {
                segs.push(Segment::new(p, pts[j]));
            }
        }
    }
    let kind = match cfg.kind {
        ConfigKind::SquareGrid => 4.0,
        ConfigKind::Hex => 3.0,
        _ => 6.0,
    };
    Ok(Network::from_config("lattice", &[("spacing", l), ("degree", kind)], cfg, segs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs::{hex_config, poisson, tri_config};

    fn cfg(points: &[(f64, f64)], side: f64) -> PointConfig {
        PointConfig::custom(points.iter().map(|&(x, y)| Point::new(x, y)).collect(), Rect::square(side)).unwrap()
    }

    fn index_pairs(net: &Network) -> Vec<(usize, usize)> {
        let idx = |p: Point| net.cities.iter().position(|&c| c.dist(p) < 1e-9);
        let mut v: Vec<(usize, usize)> = net
            .segments
            .iter()
            .map(|s| {
                let (a, b) = (idx(s.a).unwrap(), idx(s.b).unwrap());
                (a.min(b), a.max(b))
            })
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn delaunay_small_cases() {
        let t = delaunay(&cfg(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], 2.0)).unwrap();
        assert_eq!(t.segments.len(), 3);
        assert!(delaunay(&cfg(&[(0.0, 0.0), (1.0, 1.0)], 2.0)).is_err());
        assert!(delaunay(&cfg(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], 3.0)).is_err());
    }

    #[test]
    fn delaunay_torus_has_three_edges_per_city() {
        let c = poisson(Rect::square(12.0), 1.0, 4).unwrap().into_torus().unwrap();
        let net = delaunay(&c).unwrap();
        // Euler on the torus: E = 3V
        assert_eq!(net.segments.len(), 3 * c.len());
        let g = net.routing_graph(true).unwrap();
        assert!((g.total_length() - net.raw_length()).abs() < 1e-9 * net.raw_length());
    }

    #[test]
    fn theta_small_cases() {
        let two = theta_graph(&cfg(&[(1.0, 1.0), (2.0, 1.5)], 3.0), 6).unwrap();
        assert_eq!(two.segments.len(), 1);
        let line: Vec<(f64, f64)> = (0..5).map(|i| (1.0 + i as f64, 1.0)).collect();
        let net = theta_graph(&cfg(&line, 6.0), 6).unwrap();
        assert_eq!(index_pairs(&net), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert!(theta_graph(&cfg(&line, 6.0), 5).is_err());
    }

    #[test]
    fn yao_and_theta_differ_on_witness() {
        // A sits near the cone edge at distance 1, B on the bisector at 0.9:
        // A has the smaller projection, B the smaller distance.
        let a = PI / 3.0 - 0.01;
        let b = PI / 6.0;
        let pts = [(2.0, 2.0), (2.0 + a.cos(), 2.0 + a.sin()), (2.0 + 0.9 * b.cos(), 2.0 + 0.9 * b.sin())];
        let c = cfg(&pts, 4.0);
        let from_origin = |key| {
            cone_choices(&c, 6, key, &[true; 6])
                .into_iter()
                .filter(|e| e.0 == 0)
                .map(|e| e.1)
                .collect::<Vec<_>>()
        };
        assert_eq!(from_origin(ConeKey::Projection), vec![1]);
        assert_eq!(from_origin(ConeKey::Distance), vec![2]);
        assert!(theta_graph(&c, 6).is_ok() && yao_graph(&c, 6).is_ok());
    }

    #[test]
    fn at_most_one_edge_per_cone() {
        let c = poisson(Rect::square(15.0), 1.0, 9).unwrap();
        for m in [6u32, 9] {
            let choices = cone_choices(&c, m as usize, ConeKey::Distance, &vec![true; m as usize]);
            let mut seen = HashSet::new();
            for (z, _, d) in choices {
                let cone = (full_angle(d) / (2.0 * PI / m as f64)) as usize;
                assert!(seen.insert((z, cone)));
            }
        }
    }

    #[test]
    fn rotation_by_one_cone_maps_edges() {
        let m = 8u32;
        let c0 = Point::new(20.0, 20.0);
        let pts: Vec<Point> = poisson(Rect::square(40.0), 0.3, 2)
            .unwrap()
            .points
            .into_iter()
            .filter(|p| p.dist(c0) < 15.0)
            .collect();
        let rot = 2.0 * PI / m as f64;
        let turned: Vec<Point> = pts.iter().map(|&p| c0 + (p - c0).rotate(rot)).collect();
        for build in [theta_graph, yao_graph] {
            let a = build(&PointConfig::custom(pts.clone(), Rect::square(40.0)).unwrap(), m).unwrap();
            let b = build(&PointConfig::custom(turned.clone(), Rect::square(40.0)).unwrap(), m).unwrap();
            assert_eq!(index_pairs(&a), index_pairs(&b));
        }
    }

    #[test]
    fn cone_roads_basic() {
        let two = cone_road_network(&cfg(&[(1.0, 1.0), (2.0, 1.5)], 3.0), 2).unwrap();
        assert_eq!(two.segments.len(), 1);
        assert!(cone_road_network(&cfg(&[(1.0, 1.0)], 3.0), 1).is_err());
        assert!(cone_road_direction(&cfg(&[(1.0, 1.0)], 3.0), 3, 3).is_err());
    }

    #[test]
    fn cone_roads_are_theta_dense() {
        for torus in [false, true] {
            let mut c = poisson(Rect::square(12.0), 1.0, 21).unwrap();
            if torus {
                c = c.into_torus().unwrap();
            }
            let k = 4u32;
            let width = PI / k as f64;
            let net = cone_road_network(&c, k).unwrap();
            let disp = |a: Point, b: Point| if torus { c.window.min_image(a, b) } else { b - a };
            let cone_of = |d: Point| ((full_angle(d) / width) as usize).min(2 * k as usize - 1);
            let mut has_edge = HashSet::new();
            for s in &net.segments {
                let ia = c.points.iter().position(|&p| p.dist(s.a) < 1e-9).unwrap();
                let ib = c.points.iter().position(|&p| disp(p, s.b).norm() < 1e-9).unwrap();
                has_edge.insert((ia, cone_of(s.b - s.a)));
                has_edge.insert((ib, cone_of(s.a - s.b)));
            }
            for (i, &p) in c.points.iter().enumerate() {
                for (j, &q) in c.points.iter().enumerate() {
                    if i != j {
                        assert!(has_edge.contains(&(i, cone_of(disp(p, q)))), "city {i} torus={torus}");
                    }
                }
            }
        }
    }

    #[test]
    fn grid_freeway_adjusts_spacing() {
        let c = cfg(&[(0.5, 0.5)], 10.0);
        let net = grid_freeway(&c, 3.0, GridVariant::N1).unwrap();
        assert!((net.params["t_used"] - 10.0 / 3.0).abs() < 1e-12);
        assert!(grid_freeway(&c, 0.0, GridVariant::N1).is_err());
        assert!("n3".parse::<GridVariant>().is_ok() && "N4".parse::<GridVariant>().is_err());
    }

    #[test]
    fn alternate_diagonals_periodic() {
        let net = alternate_diagonals(Rect::square(9.0)).unwrap();
        let on_line = |p: Point| net.segments.iter().any(|s| s.distance_to(p) < 1e-12);
        for x in 0..7 {
            for y in 0..7 {
                let p = Point::new(x as f64 + 0.5, y as f64 + 0.25);
                assert_eq!(on_line(p), on_line(p + Point::new(2.0, 0.0)));
                assert_eq!(on_line(p), on_line(p + Point::new(0.0, 2.0)));
            }
        }
        assert!(net.routing_graph(true).is_ok());
        assert!(alternate_diagonals(Rect::square(2.5)).is_err());
    }

    #[test]
    fn lattice_edge_counts() {
        let sq = lattice_edges(&square_grid(Rect::square(3.0)).unwrap()).unwrap();
        assert_eq!(sq.segments.len(), 24);
        let hex = lattice_edges(&hex_config(Rect::square(20.0)).unwrap()).unwrap();
        let tri = lattice_edges(&tri_config(Rect::square(20.0)).unwrap()).unwrap();
        assert!(hex.segments.len() as f64 / hex.cities.len() as f64 <= 1.5);
        assert!(tri.segments.len() as f64 / tri.cities.len() as f64 <= 3.0);
        assert!(lattice_edges(&poisson(Rect::square(5.0), 1.0, 1).unwrap()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = poisson(Rect::square(8.0), 1.0, 3).unwrap().into_torus().unwrap();
        let net = delaunay(&c).unwrap();
        assert_eq!(Network::from_json(&net.to_json().unwrap()).unwrap(), net);
        assert!(Network::from_json("not json").is_err());
    }

    #[test]
    fn builder_spec_round_trip() {
        let spec = BuilderSpec::Grid { t: 1.5, variant: GridVariant::N2 };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<BuilderSpec>(&s).unwrap(), spec);
    }
}
