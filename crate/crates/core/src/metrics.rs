//! Stretch, normalized length and intersection rate of a network.

use crate::configs::rng_for;
use crate::error::{domain, Result};
use crate::geom::{clip_segment, merge_collinear, wrap_segment, PointGrid};
use crate::nets::Network;
use crate::{Point, Rect, RoutingGraph, Segment};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MARGIN: f64 = 0.1;
pub const DEFAULT_MAX_SOURCES: usize = 400;
/// Torus pairs farther apart than this fraction of the side are skipped.
pub const DEFAULT_TORUS_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StretchMode {
    /// Roads join wherever they cross.
    Steiner,
    /// Roads join only at shared endpoints and at cities.
    Graph,
}

impl std::str::FromStr for StretchMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steiner" => Ok(Self::Steiner),
            "graph" => Ok(Self::Graph),
            _ => Err(crate::Error::InvalidInput(format!("unknown stretch mode {s:?} (expected steiner or graph)"))),
        }
    }
}

/// Which city pairs enter a stretch measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairFilter {
    All,
    /// Both cities inside the window shrunk by `margin` of its extent per side.
    Interior { margin: f64 },
    /// Minimum-image distance at most `fraction` of the shorter window side.
    TorusRadius { fraction: f64 },
}

impl PairFilter {
    /// Interior pairs on a plane, nearby pairs on a torus.
    pub fn default_for(net: &Network) -> Self {
        if net.torus {
            Self::TorusRadius { fraction: DEFAULT_TORUS_RADIUS }
        } else {
            Self::Interior { margin: DEFAULT_MARGIN }
        }
    }

    fn eligible(&self, net: &Network) -> Result<Vec<usize>> {
        match *self {
            Self::Interior { margin } => {
                check_margin(margin)?;
                let inner = net.window.shrink(margin);
                Ok((0..net.cities.len()).filter(|&i| inner.contains(net.cities[i])).collect())
            }
            _ => Ok((0..net.cities.len()).collect()),
        }
    }

    fn radius(&self, net: &Network) -> f64 {
        match *self {
            Self::TorusRadius { fraction } => fraction * net.window.width().min(net.window.height()),
            _ => f64::INFINITY,
        }
    }
}

fn check_margin(margin: f64) -> Result<()> {
    if !(0.0..0.5).contains(&margin) {
        return domain(format!("margin fraction must lie in [0, 0.5), got {margin}"));
    }
    Ok(())
}

/// Serializes non-finite floats as strings so JSON output stays valid.
mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    #[serde(with = "lossless_f64")]
    pub p50: f64,
    #[serde(with = "lossless_f64")]
    pub p90: f64,
    #[serde(with = "lossless_f64")]
    pub p99: f64,
}

impl Percentiles {
    fn of(sorted: &[f64]) -> Self {
        let at = |q: f64| {
            if sorted.is_empty() {
                return f64::NAN;
            }
            let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            sorted[rank - 1]
        };
        Self {
            p50: at(0.5),
            p90: at(0.9),
            p99: at(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchReport {
    pub mode: StretchMode,
    /// `+inf` when some filtered pair is disconnected; `1` with fewer than two cities.
    #[serde(with = "lossless_f64")]
    pub max_ratio: f64,
    pub argmax_pair: Option<(usize, usize)>,
    pub percentiles: Percentiles,
    pub pair_filter: PairFilter,
    /// Cities passing the filter.
    pub cities: usize,
    /// Search sources; smaller than `cities` when sampled.
    pub sources: usize,
    pub pairs: usize,
    pub exact: bool,
}

impl StretchReport {
    pub fn csv_header() -> &'static str {
        "mode,max_ratio,argmax_i,argmax_j,p50,p90,p99,cities,sources,pairs,exact,schema_version"
    }

    pub fn csv_row(&self) -> String {
        let (i, j) = self
            .argmax_pair
            .map(|(i, j)| (i.to_string(), j.to_string()))
            .unwrap_or_default();
        format!(
            "{},{},{i},{j},{},{},{},{},{},{},{},{}",
            match self.mode {
                StretchMode::Steiner => "steiner",
                StretchMode::Graph => "graph",
            },
            self.max_ratio,
            self.percentiles.p50,
            self.percentiles.p90,
            self.percentiles.p99,
            self.cities,
            self.sources,
            self.pairs,
            self.exact,
            METRICS_SCHEMA_VERSION
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchOptions {
    pub mode: StretchMode,
    pub filter: PairFilter,
    /// Above this many filtered cities, sources are sampled.
    pub max_sources: usize,
    pub seed: u64,
}

impl StretchOptions {
    pub fn new(mode: StretchMode, filter: PairFilter) -> Self {
        Self {
            mode,
            filter,
            max_sources: DEFAULT_MAX_SOURCES,
            seed: 0,
        }
    }
}

/// Maximum route/Euclidean ratio over the filtered city pairs.
pub fn stretch(net: &Network, mode: StretchMode, filter: PairFilter) -> Result<StretchReport> {
    stretch_with(net, &StretchOptions::new(mode, filter))
}

pub fn stretch_with(net: &Network, opts: &StretchOptions) -> Result<StretchReport> {
    let g = net.routing_graph(opts.mode == StretchMode::Steiner)?;
    stretch_on_graph(net, &g, opts)
}

/// As [`stretch_with`] on a routing graph already built for `net` in `opts.mode`.
pub fn stretch_on_graph(net: &Network, g: &RoutingGraph, opts: &StretchOptions) -> Result<StretchReport> {
    let eligible = opts.filter.eligible(net)?;
    let radius = opts.filter.radius(net);
    let exact = eligible.len() <= opts.max_sources;
    let sources: Vec<usize> = if exact {
        eligible.clone()
    } else {
        let mut rng = rng_for(opts.seed, 0x5354_5245);
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), opts.max_sources)
            .into_iter()
            .map(|k| eligible[k])
            .collect();
        picked.sort_unstable();
        picked
    };
    let rank: Vec<usize> = {
        let mut r = vec![usize::MAX; net.cities.len()];
        for (k, &c) in eligible.iter().enumerate() {
            r[c] = k;
        }
        r
    };
    let per_source: Vec<Vec<(f64, usize, usize)>> = sources
        .par_iter()
        .map(|&i| {
            let targets: Vec<usize> = eligible
                .iter()
                .copied()
                .filter(|&j| if exact { rank[j] > rank[i] } else { j != i })
                .filter(|&j| {
                    let d = g.city_distance(i, j);
                    d > 0.0 && d <= radius
                })
                .collect();
            if targets.is_empty() {
                return Vec::new();
            }
            let mut want = vec![false; g.nodes.len()];
            let mut left = 0usize;
            for &j in &targets {
                let node = g.city_nodes[j];
                if !want[node] {
                    want[node] = true;
                    left += 1;
                }
            }
            let dist = g.dijkstra(g.city_nodes[i], None, |u, _| {
                if want[u] {
                    left -= 1;
                }
                left > 0
            });
            targets
                .iter()
                .map(|&j| {
                    let (a, b) = (i.min(j), i.max(j));
                    (dist[g.city_nodes[j]] / g.city_distance(i, j), a, b)
                })
                .collect()
        })
        .collect();
    let mut ratios: Vec<(f64, usize, usize)> = per_source.into_iter().flatten().collect();
    let pairs = ratios.len();
    let best = ratios
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (b.1, b.2).cmp(&(a.1, a.2))));
    ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    Ok(StretchReport {
        mode: opts.mode,
        max_ratio: best.map_or(1.0, |b| b.0),
        argmax_pair: best.map(|b| (b.1, b.2)),
        percentiles: Percentiles::of(&sorted),
        pair_filter: opts.filter,
        cities: eligible.len(),
        sources: sources.len(),
        pairs,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRule {
    /// Pairs at the smallest inter-city distance of the configuration.
    UnitDistance,
    /// Pairs where each city is a nearest neighbor of the other.
    MutualNearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStretchReport {
    pub rule: NeighborRule,
    #[serde(with = "lossless_f64")]
    pub max_ratio: f64,
    pub argmax_pair: Option<(usize, usize)>,
    pub pairs: usize,
}

fn distance_fn(net: &Network) -> impl Fn(Point, Point) -> f64 + '_ {
    move |a, b| if net.torus { net.window.torus_dist(a, b) } else { a.dist(b) }
}

fn nearest_distances(net: &Network, grid: &PointGrid<f64>) -> Vec<f64> {
    let dist = distance_fn(net);
    let pts = &net.cities;
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            let mut buf = Vec::new();
            for r in 0..=grid.max_ring() {
                grid.ring(pts[i], r, &mut buf);
                for &j in &buf {
                    let d = dist(pts[i], pts[j]);
                    if j != i && d > 0.0 && d < best {
                        best = d;
                    }
                }
                if best < r as f64 * grid.cell_size() {
                    break;
                }
            }
            best
        })
        .collect()
}

/// Maximum Steiner route/Euclidean ratio over the nearest-neighbor pairs
/// selected by `rule`.
pub fn local_stretch(net: &Network, rule: NeighborRule) -> Result<LocalStretchReport> {
    let g = net.routing_graph(true)?;
    let pts = &net.cities;
    let n = pts.len();
    let cell = (net.window.area() / n.max(1) as f64).sqrt().max(1e-9 * net.window.diameter());
    let grid = PointGrid::new(pts, net.window, cell, net.torus);
    let nn = nearest_distances(net, &grid);
    let global = nn.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1.0 + 1e-9;
    let dist = distance_fn(net);
    let per_city: Vec<Vec<(f64, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let reach = match rule {
                NeighborRule::UnitDistance => global,
                NeighborRule::MutualNearest => nn[i],
            };
            if !reach.is_finite() {
                return Vec::new();
            }
            let mut buf = Vec::new();
            grid.candidates_within(pts[i], reach * tol, &mut buf);
            buf.sort_unstable();
            buf.dedup();
            let partners: Vec<usize> = buf
                .into_iter()
                .filter(|&j| j > i)
                .filter(|&j| {
                    let d = dist(pts[i], pts[j]);
                    d > 0.0
                        && match rule {
                            NeighborRule::UnitDistance => d <= global * tol,
                            NeighborRule::MutualNearest => d <= nn[i] * tol && d <= nn[j] * tol,
                        }
                })
                .collect();
            if partners.is_empty() {
                return Vec::new();
            }
            let d = g.distances_from_city(i).expect("city index in range");
            partners
                .iter()
                .map(|&j| (d[g.city_nodes[j]] / g.city_distance(i, j), i, j))
                .collect()
        })
        .collect();
    let all: Vec<(f64, usize, usize)> = per_city.into_iter().flatten().collect();
    let best = all
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (b.1, b.2).cmp(&(a.1, a.2))));
    Ok(LocalStretchReport {
        rule,
        max_ratio: best.map_or(1.0, |b| b.0),
        argmax_pair: best.map(|b| (b.1, b.2)),
        pairs: all.len(),
    })
}

/// Road pieces inside the measurement window, with collinear overlaps merged.
/// On a torus the roads are folded into the fundamental domain.
fn measured_pieces(net: &Network, margin: f64) -> Result<(Vec<Segment>, Rect)> {
    check_margin(margin)?;
    let eps = net.snap_eps();
    if net.torus {
        let folded: Vec<Segment> = net.segments.iter().flat_map(|s| wrap_segment(s, &net.window)).collect();
        return Ok((merge_collinear(&folded, eps), net.window));
    }
    let inner = net.window.shrink(margin);
    if inner.is_empty() {
        return domain("the measurement window is empty");
    }
    let pieces = merge_collinear(&net.segments, eps)
        .iter()
        .filter_map(|s| clip_segment(s, &inner))
        .collect();
    Ok((pieces, inner))
}

/// Road length per unit area inside the window shrunk by `margin_fraction`
/// per side (the whole fundamental domain on a torus).
pub fn normalized_length(net: &Network, margin_fraction: f64) -> Result<f64> {
    let (pieces, inner) = measured_pieces(net, margin_fraction)?;
    Ok(pieces.iter().map(|s| s.length()).sum::<f64>() / inner.area())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRate {
    /// Road crossings per unit length of test line.
    pub rate: f64,
    pub se: f64,
    pub lines: usize,
}

impl IntersectionRate {
    /// Length per unit area implied for an isotropic network.
    pub fn implied_length(&self) -> f64 {
        PI / 2.0 * self.rate
    }
}

/// Isotropic random lines hitting the measurement window, each counted
/// against the road pieces inside it.
pub fn intersection_rate(net: &Network, n_lines: usize, seed: u64) -> Result<IntersectionRate> {
    let margin = if net.torus { 0.0 } else { DEFAULT_MARGIN };
    intersection_rate_with(net, margin, n_lines, seed)
}

pub fn intersection_rate_with(net: &Network, margin: f64, n_lines: usize, seed: u64) -> Result<IntersectionRate> {
    if n_lines == 0 {
        return domain("at least one test line is needed");
    }
    let (pieces, inner) = measured_pieces(net, margin)?;
    let c = inner.center();
    let radius = inner.diameter() / 2.0;
    let reach = 2.0 * radius;
    // each line draws from its own substream so the result does not depend on scheduling
    let samples: Vec<(f64, f64)> = (0..n_lines as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(seed, k);
            loop {
                let theta = rng.random::<f64>() * PI;
                let p = (2.0 * rng.random::<f64>() - 1.0) * radius;
                let normal = Point::new(theta.cos(), theta.sin());
                let along = Point::new(-normal.y, normal.x);
                let foot = c + normal.scale(p);
                let line = Segment::new(foot - along.scale(reach), foot + along.scale(reach));
                let Some(chord) = clip_segment(&line, &inner) else { continue };
                let len = chord.length();
                if len <= 0.0 {
                    continue;
                }
                let level = foot.dot(normal);
                let hits = pieces
                    .iter()
                    .filter(|s| {
                        let (da, db) = (s.a.dot(normal) - level, s.b.dot(normal) - level);
                        (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)
                    })
                    .count();
                return (hits as f64, len);
            }
        })
        .collect();
    let n = samples.len() as f64;
    let total_hits: f64 = samples.iter().map(|s| s.0).sum();
    let total_len: f64 = samples.iter().map(|s| s.1).sum();
    let rate = total_hits / total_len;
    let se = if samples.len() > 1 {
        let ss: f64 = samples.iter().map(|&(h, l)| (h - rate * l).powi(2)).sum();
        (ss / (n * (n - 1.0))).sqrt() / (total_len / n)
    } else {
        f64::INFINITY
    };
    Ok(IntersectionRate { rate, se, lines: samples.len() })
}

/// Proper crossings of roads with a fixed test segment, per unit of its length.
pub fn crossing_density(net: &Network, test: &Segment) -> f64 {
    let side = |p: Point, q: Point, r: Point| crate::geom::orient(p, q, r);
    let hits = net
        .segments
        .iter()
        .filter(|s| {
            side(test.a, test.b, s.a) * side(test.a, test.b, s.b) < 0 && side(s.a, s.b, test.a) * side(s.a, s.b, test.b) < 0
        })
        .count();
    hits as f64 / test.length()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs::{hex_config, poisson, square_grid, tri_config, PointConfig};
    use crate::nets::{alternate_diagonals, delaunay, grid_freeway, lattice_edges, theta_graph, GridVariant};
    use approx::assert_relative_eq;

    fn net_of(cities: &[(f64, f64)], segs: &[((f64, f64), (f64, f64))], side: f64) -> Network {
        let cfg = PointConfig::custom(cities.iter().map(|&(x, y)| Point::new(x, y)).collect(), Rect::square(side)).unwrap();
        Network {
            kind: "custom".into(),
            params: Default::default(),
            cities: cfg.points,
            segments: segs
                .iter()
                .map(|&(a, b)| Segment::new(Point::new(a.0, a.1), Point::new(b.0, b.1)))
                .collect(),
            window: cfg.window,
            torus: false,
        }
    }

    #[test]
    fn single_edge_has_stretch_one() {
        let net = net_of(&[(1.0, 1.0), (3.0, 2.0)], &[((1.0, 1.0), (3.0, 2.0))], 4.0);
        let r = stretch(&net, StretchMode::Steiner, PairFilter::All).unwrap();
        assert_relative_eq!(r.max_ratio, 1.0, epsilon = 1e-12);
        assert_eq!(r.argmax_pair, Some((0, 1)));
        assert!(r.exact);
    }

    #[test]
    fn right_angle_route() {
        let net = net_of(&[(0.0, 0.0), (1.0, 1.0)], &[((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 1.0))], 2.0);
        let r = stretch(&net, StretchMode::Graph, PairFilter::All).unwrap();
        assert_relative_eq!(r.max_ratio, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn crossing_roads_separate_the_modes() {
        let net = net_of(
            &[(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)],
            &[((0.0, 0.0), (2.0, 2.0)), ((2.0, 0.0), (0.0, 2.0))],
            2.0,
        );
        let st = stretch(&net, StretchMode::Steiner, PairFilter::All).unwrap();
        let gr = stretch(&net, StretchMode::Graph, PairFilter::All).unwrap();
        assert_relative_eq!(st.max_ratio, 2f64.sqrt(), epsilon = 1e-12);
        assert!(gr.max_ratio.is_infinite());
        let json = serde_json::to_string(&gr).unwrap();
        assert_eq!(serde_json::from_str::<StretchReport>(&json).unwrap(), gr);
    }

    #[test]
    fn sampling_matches_exact_when_all_sources_taken() {
        let cfg = poisson(Rect::square(12.0), 1.0, 5).unwrap();
        let net = delaunay(&cfg).unwrap();
        let exact = stretch(&net, StretchMode::Steiner, PairFilter::All).unwrap();
        let mut opts = StretchOptions::new(StretchMode::Steiner, PairFilter::All);
        opts.max_sources = cfg.len() - 1;
        let sampled = stretch_with(&net, &opts).unwrap();
        assert!(!sampled.exact && sampled.max_ratio <= exact.max_ratio);
        assert!(sampled.max_ratio >= exact.percentiles.p99);
    }

    #[test]
    fn interior_filter_drops_boundary_cities() {
        let cfg = poisson(Rect::square(20.0), 1.0, 6).unwrap();
        let net = delaunay(&cfg).unwrap();
        let r = stretch(&net, StretchMode::Steiner, PairFilter::Interior { margin: 0.1 }).unwrap();
        let inner = cfg.window.shrink(0.1);
        assert_eq!(r.cities, cfg.points.iter().filter(|&&p| inner.contains(p)).count());
        assert!(r.max_ratio >= 1.0 && r.max_ratio < 2.42);
    }

    #[test]
    fn lattice_lengths() {
        let sq = lattice_edges(&square_grid(Rect::square(25.0)).unwrap()).unwrap();
        assert_relative_eq!(normalized_length(&sq, 0.1).unwrap(), 2.0, epsilon = 1e-9);
        let diag = alternate_diagonals(Rect::square(20.0)).unwrap();
        assert_relative_eq!(normalized_length(&diag, 0.1).unwrap(), 2f64.sqrt(), epsilon = 1e-9);
        assert!(normalized_length(&sq, 0.5).is_err());
    }

    #[test]
    fn local_stretch_witnesses() {
        let diag = alternate_diagonals(Rect::square(8.0)).unwrap();
        let r = local_stretch(&diag, NeighborRule::UnitDistance).unwrap();
        assert_relative_eq!(r.max_ratio, 2f64.sqrt(), epsilon = 1e-9);
        assert_eq!(r.pairs, 2 * 8 * 9);
        for cfg in [hex_config(Rect::square(10.0)).unwrap(), tri_config(Rect::square(10.0)).unwrap()] {
            let r = local_stretch(&lattice_edges(&cfg).unwrap(), NeighborRule::MutualNearest).unwrap();
            assert_relative_eq!(r.max_ratio, 1.0, epsilon = 1e-9);
            assert!(r.pairs > 0);
        }
    }

    #[test]
    fn fixed_line_crosses_unit_verticals() {
        let cfg = PointConfig::custom(vec![], Rect::square(10.0)).unwrap();
        let net = grid_freeway(&cfg, 1.0, GridVariant::N1).unwrap();
        let vertical_only = Network {
            segments: net.segments.iter().copied().filter(|s| s.a.x == s.b.x).collect(),
            ..net
        };
        let test = Segment::new(Point::new(0.25, 3.5), Point::new(8.25, 3.5));
        assert_relative_eq!(crossing_density(&vertical_only, &test), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn isotropic_rate_matches_length() {
        let cfg = poisson(Rect::square(20.0), 1.0, 8).unwrap().into_torus().unwrap();
        let net = delaunay(&cfg).unwrap();
        let len = normalized_length(&net, 0.0).unwrap();
        let rate = intersection_rate(&net, 4000, 3).unwrap();
        assert!((len - rate.implied_length()).abs() < 4.0 * PI / 2.0 * rate.se);
        assert_eq!(rate, intersection_rate(&net, 4000, 3).unwrap());
    }

    #[test]
    fn torus_length_counts_each_road_once() {
        let cfg = poisson(Rect::square(10.0), 1.0, 2).unwrap().into_torus().unwrap();
        let net = theta_graph(&cfg, 6).unwrap();
        let len = normalized_length(&net, 0.0).unwrap();
        assert_relative_eq!(len, net.raw_length() / 100.0, max_relative = 1e-9);
    }
}
