//! City configurations at density one per unit area.

use crate::error::{domain, Error, Result};
use crate::{Point, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Nearest-neighbor spacing of the honeycomb at density 1: `2·3^{-3/4}`.
pub fn hex_spacing() -> f64 {
    2.0 * 3f64.powf(-0.75)
}

/// Spacing of the triangular lattice at density 1: `√(2/√3)`.
pub fn tri_spacing() -> f64 {
    (2.0 / 3f64.sqrt()).sqrt()
}

/// ChaCha8 stream `stream` of master seed `seed`.
///
/// Replicate `r` of an experiment draws from stream `r`, so replicates are
/// independent of each other and of execution order.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of replicate `r` under master seed `master`.
pub fn replicate_seed(master: u64, r: u64) -> u64 {
    rng_for(master, r).random()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    Poisson,
    Uniform,
    SquareGrid,
    Hex,
    Tri,
    Custom,
}

impl ConfigKind {
    pub fn is_lattice(self) -> bool {
        matches!(self, Self::SquareGrid | Self::Hex | Self::Tri)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub points: Vec<Point>,
    pub window: Rect,
    pub torus: bool,
    pub kind: ConfigKind,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    schema_version: u32,
    kind: ConfigKind,
    seed: Option<u64>,
    window: [f64; 4],
    torus: bool,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    points: Vec<[f64; 2]>,
}

fn check_window(w: &Rect) -> Result<()> {
    let ok = [w.x0, w.y0, w.x1, w.y1].iter().all(|v| v.is_finite());
    if !ok || w.is_empty() {
        return Err(Error::InvalidInput(format!("window [{}, {}, {}, {}] is empty or not finite", w.x0, w.y0, w.x1, w.y1)));
    }
    Ok(())
}

impl PointConfig {
    /// Configuration from explicit points.
    pub fn custom(points: Vec<Point>, window: Rect) -> Result<Self> {
        let cfg = Self {
            points,
            window,
            torus: false,
            kind: ConfigKind::Custom,
            seed: None,
            params: BTreeMap::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Marks the configuration as living on the flat torus with fundamental
    /// domain `window`, which must be square.
    pub fn into_torus(mut self) -> Result<Self> {
        let w = self.window;
        if (w.width() - w.height()).abs() > 1e-12 * w.width() {
            return domain("a toroidal configuration needs a square window");
        }
        self.torus = true;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.points.len() as f64 / self.window.area()
    }

    /// Lattice spacing for lattice kinds.
    pub fn spacing(&self) -> Option<f64> {
        self.params.get("spacing").copied()
    }

    /// Scales every coordinate (and the window) by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.points = self.points.iter().map(|p| p.scale(c)).collect();
        let w = self.window;
        out.window = Rect::new(w.x0 * c, w.y0 * c, w.x1 * c, w.y1 * c);
        if let Some(s) = out.params.get_mut("spacing") {
            *s *= c;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check_window(&self.window)?;
        for (i, p) in self.points.iter().enumerate() {
            if !p.is_finite() || !self.window.contains(*p) {
                return Err(Error::InvalidInput(format!("point {i} ({}, {}) is not inside the window", p.x, p.y)));
            }
        }
        if self.torus {
            let w = self.window;
            if (w.width() - w.height()).abs() > 1e-12 * w.width() {
                return Err(Error::InvalidInput("toroidal window must be square".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let w = self.window;
        let file = ConfigFile {
            schema_version: CONFIG_SCHEMA_VERSION,
            kind: self.kind,
            seed: self.seed,
            window: [w.x0, w.y0, w.x1, w.y1],
            torus: self.torus,
            params: self.params.clone(),
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ConfigFile = serde_json::from_str(s)?;
        if f.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported config schema version {}", f.schema_version)));
        }
        let [x0, y0, x1, y1] = f.window;
        let cfg = Self {
            points: f.points.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            window: Rect::new(x0, y0, x1, y1),
            torus: f.torus,
            kind: f.kind,
            seed: f.seed,
            params: f.params,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, w: &Rect) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let x = w.x0 + w.width() * rng.random::<f64>();
            let y = w.y0 + w.height() * rng.random::<f64>();
            Point::new(x, y)
        })
        .collect()
}

/// Poisson process of intensity `rate` on `window`.
pub fn poisson(window: Rect, rate: f64, seed: u64) -> Result<PointConfig> {
    check_window(&window)?;
    if !(rate >= 0.0 && rate.is_finite()) {
        return domain(format!("Poisson rate must be finite and >= 0, got {rate}"));
    }
    let mut rng = rng_for(seed, 0);
    let mean = rate * window.area();
    let n = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    Ok(PointConfig {
        points: uniform_points(&mut rng, n, &window),
        window,
        torus: false,
        kind: ConfigKind::Poisson,
        seed: Some(seed),
        params: BTreeMap::from([("rate".to_string(), rate)]),
    })
}

/// Exactly `n` independent uniform points.
pub fn uniform_n(n: usize, window: Rect, seed: u64) -> Result<PointConfig> {
    check_window(&window)?;
    let mut rng = rng_for(seed, 0);
    Ok(PointConfig {
        points: uniform_points(&mut rng, n, &window),
        window,
        torus: false,
        kind: ConfigKind::Uniform,
        seed: Some(seed),
        params: BTreeMap::from([("n".to_string(), n as f64)]),
    })
}

fn lattice_config(window: Rect, kind: ConfigKind, spacing: f64, points: Vec<Point>) -> PointConfig {
    PointConfig {
        points,
        window,
        torus: false,
        kind,
        seed: None,
        params: BTreeMap::from([("spacing".to_string(), spacing)]),
    }
}

/// Integer lattice points `(i, j)` in the closed window.
pub fn square_grid(window: Rect) -> Result<PointConfig> {
    check_window(&window)?;
    if window.width() < 1.0 || window.height() < 1.0 {
        return domain("square grid needs a window of side at least 1");
    }
    let (i0, i1) = (window.x0.ceil() as i64, window.x1.floor() as i64);
    let (j0, j1) = (window.y0.ceil() as i64, window.y1.floor() as i64);
    let mut pts = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            pts.push(Point::new(i as f64, j as f64));
        }
    }
    Ok(lattice_config(window, ConfigKind::SquareGrid, 1.0, pts))
}

// Points o + i a1 + j a2 + b for every basis vector b, kept when inside the
// half-open window.
fn lattice_points(window: &Rect, origin: Point, a1: Point, a2: Point, basis: &[Point]) -> Vec<Point> {
    let mut pts = Vec::new();
    let j_hi = ((window.y1 - origin.y) / a2.y).ceil() as i64 + 1;
    let j_lo = ((window.y0 - origin.y) / a2.y).floor() as i64 - 1;
    for j in j_lo..=j_hi {
        let row = origin + a2 * j as f64;
        let i_lo = ((window.x0 - row.x) / a1.x).floor() as i64 - 2;
        let i_hi = ((window.x1 - row.x) / a1.x).ceil() as i64 + 2;
        for i in i_lo..=i_hi {
            for &b in basis {
                let p = row + a1 * i as f64 + b;
                if p.x >= window.x0 && p.x < window.x1 && p.y >= window.y0 && p.y < window.y1 {
                    pts.push(p);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    pts
}

fn check_lattice_window(window: &Rect, spacing: f64) -> Result<()> {
    check_window(window)?;
    if window.width() < 2.0 * spacing || window.height() < 2.0 * spacing {
        return domain("window too small for one lattice cell");
    }
    Ok(())
}

/// Honeycomb (hexagon vertices) with spacing `2·3^{-3/4}`, anchored half a
/// cell in from the lower-left corner.
pub fn hex_config(window: Rect) -> Result<PointConfig> {
    let l = hex_spacing();
    check_lattice_window(&window, l)?;
    let r3 = 3f64.sqrt();
    let a1 = Point::new(r3 * l, 0.0);
    let a2 = Point::new(r3 * l / 2.0, 1.5 * l);
    let origin = Point::new(window.x0 + r3 * l / 4.0, window.y0 + l / 2.0);
    let basis = [Point::new(0.0, 0.0), Point::new(0.0, l)];
    let pts = lattice_points(&window, origin, a1, a2, &basis);
    Ok(lattice_config(window, ConfigKind::Hex, l, pts))
}

/// Triangular lattice with spacing `√(2/√3)`, anchored half a cell in from the
/// lower-left corner.
pub fn tri_config(window: Rect) -> Result<PointConfig> {
    let l = tri_spacing();
    check_lattice_window(&window, l)?;
    let a1 = Point::new(l, 0.0);
    let a2 = Point::new(l / 2.0, 3f64.sqrt() / 2.0 * l);
    let origin = Point::new(window.x0 + l / 2.0, window.y0 + a2.y / 2.0);
    let pts = lattice_points(&window, origin, a1, a2, &[Point::new(0.0, 0.0)]);
    Ok(lattice_config(window, ConfigKind::Tri, l, pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PointGrid;

    fn nn_degrees(cfg: &PointConfig) -> Vec<(Point, usize, f64)> {
        let l = cfg.spacing().unwrap();
        let grid = PointGrid::new(&cfg.points, cfg.window, l, false);
        let mut buf = Vec::new();
        cfg.points
            .iter()
            .map(|&p| {
                grid.candidates_within(p, 2.0 * l, &mut buf);
                let d = buf
                    .iter()
                    .map(|&j| cfg.points[j].dist(p))
                    .filter(|&d| d > 1e-12)
                    .fold(f64::INFINITY, f64::min);
                let deg = buf.iter().filter(|&&j| (cfg.points[j].dist(p) - d).abs() < 1e-9).count();
                (p, deg, d)
            })
            .collect()
    }

    #[test]
    fn poisson_edge_cases_and_determinism() {
        let w = Rect::square(20.0);
        assert!(poisson(w, 0.0, 1).unwrap().is_empty());
        assert!(poisson(w, -1.0, 1).is_err());
        assert_eq!(poisson(w, 1.0, 7).unwrap(), poisson(w, 1.0, 7).unwrap());
        assert_ne!(poisson(w, 1.0, 7).unwrap().points, poisson(w, 1.0, 8).unwrap().points);
    }

    #[test]
    fn poisson_mean_count() {
        let w = Rect::square(20.0);
        let n = 1000;
        let mean = (0..n).map(|s| poisson(w, 1.0, s).unwrap().len() as f64).sum::<f64>() / n as f64;
        assert!((mean - 400.0).abs() < 3.0 * (400.0f64 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn uniform_counts_and_moments() {
        let w = Rect::square(1.0);
        assert!(uniform_n(0, w, 1).unwrap().is_empty());
        let one = uniform_n(1, w, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(w.contains(one.points[0]));
        let many = uniform_n(10_000, w, 3).unwrap();
        let mx = many.points.iter().map(|p| p.x).sum::<f64>() / 1e4;
        assert!((mx - 0.5).abs() < 3.0 / 12f64.sqrt() / 100.0);
    }

    #[test]
    fn square_grid_counts() {
        let g = square_grid(Rect::square(3.0)).unwrap();
        assert_eq!(g.len(), 16);
        let degs = nn_degrees(&g);
        assert!(degs.iter().all(|&(_, _, d)| (d - 1.0).abs() < 1e-12));
        let big = square_grid(Rect::square(99.5)).unwrap();
        assert!((big.density() - 1.0).abs() < 0.03);
    }

    #[test]
    fn hex_spacing_and_degree() {
        assert!((hex_spacing() - 0.877_383_3).abs() < 1e-6);
        let cfg = hex_config(Rect::square(30.0)).unwrap();
        assert!((cfg.density() - 1.0).abs() < 0.02, "{}", cfg.density());
        let inner = cfg.window.shrink(0.1);
        for (p, deg, d) in nn_degrees(&cfg) {
            if inner.contains(p) {
                assert_eq!(deg, 3);
                assert!((d - hex_spacing()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tri_spacing_and_degree() {
        let l = tri_spacing();
        assert!((2.0 / 3f64.sqrt() / (l * l) - 1.0).abs() < 1e-14);
        let cfg = tri_config(Rect::square(30.0)).unwrap();
        assert!((cfg.density() - 1.0).abs() < 0.02, "{}", cfg.density());
        let inner = cfg.window.shrink(0.1);
        for (p, deg, d) in nn_degrees(&cfg) {
            if inner.contains(p) {
                assert_eq!(deg, 6);
                assert!((d - l).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lattice_density_converges() {
        for make in [hex_config, tri_config] {
            for side in [10.0, 20.0, 30.0] {
                let cfg = make(Rect::square(side)).unwrap();
                let err = (cfg.density() - 1.0).abs();
                assert!(err <= 3.0 / side, "side {side}: {err}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = poisson(Rect::new(-1.0, 2.0, 9.0, 12.0), 1.0, 11).unwrap().into_torus().unwrap();
        let back = PointConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert!(PointConfig::from_json("{\"kind\": 3}").is_err());
        let outside = r#"{"schema_version":1,"kind":"custom","seed":null,"window":[0,0,1,1],"torus":false,"points":[[2,2]]}"#;
        assert!(matches!(PointConfig::from_json(outside), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn replicate_streams_differ() {
        assert_ne!(replicate_seed(5, 0), replicate_seed(5, 1));
        assert_eq!(replicate_seed(5, 3), replicate_seed(5, 3));
    }
}
