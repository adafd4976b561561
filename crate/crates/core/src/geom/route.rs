use super::{Point, Rect};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex};

/// Planar subdivision of a road network with cities attached to nodes.
///
/// Immutable after construction; shortest-path searches only read it.
#[derive(Debug, Clone)]
pub struct RoutingGraph<T> {
    pub nodes: Vec<Point<T>>,
    /// `(u, v, length)` with `u < v`.
    pub edges: Vec<(usize, usize, T)>,
    /// City index to node index.
    pub city_nodes: Vec<usize>,
    pub torus: Option<Rect<T>>,
    offsets: Vec<usize>,
    adj: Vec<(u32, T)>,
}

#[derive(Clone, Copy)]
struct Item<T> {
    dist: T,
    node: u32,
}

impl<T: PartialOrd> PartialEq for Item<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: PartialOrd> Eq for Item<T> {}
impl<T: PartialOrd> PartialOrd for Item<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: PartialOrd> Ord for Item<T> {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Scalar> RoutingGraph<T> {
    pub fn from_parts(
        nodes: Vec<Point<T>>,
        edges: Vec<(usize, usize, T)>,
        city_nodes: Vec<usize>,
        torus: Option<Rect<T>>,
    ) -> Self {
        let n = nodes.len();
        let mut offsets = vec![0usize; n + 1];
        for &(u, v, _) in &edges {
            offsets[u + 1] += 1;
            offsets[v + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0u32, T::zero()); offsets[n]];
        for &(u, v, w) in &edges {
            adj[fill[u]] = (v as u32, w);
            fill[u] += 1;
            adj[fill[v]] = (u as u32, w);
            fill[v] += 1;
        }
        Self {
            nodes,
            edges,
            city_nodes,
            torus,
            offsets,
            adj,
        }
    }

    pub fn num_cities(&self) -> usize {
        self.city_nodes.len()
    }

    pub fn total_length(&self) -> T {
        self.edges.iter().fold(T::zero(), |acc, e| acc + e.2)
    }

    /// Euclidean (minimum-image on a torus) distance between two cities.
    pub fn city_distance(&self, a: usize, b: usize) -> T {
        let pa = self.nodes[self.city_nodes[a]];
        let pb = self.nodes[self.city_nodes[b]];
        match &self.torus {
            Some(r) => r.torus_dist(pa, pb),
            None => pa.dist(pb),
        }
    }

    pub fn neighbors(&self, u: usize) -> &[(u32, T)] {
        &self.adj[self.offsets[u]..self.offsets[u + 1]]
    }

    fn check_city(&self, c: usize) -> Result<usize> {
        self.city_nodes.get(c).copied().ok_or(Error::UnknownCity {
            index: c,
            count: self.city_nodes.len(),
        })
    }

    /// Dijkstra from `src`. `settle` is called once per node in nondecreasing
    /// distance order and may return `false` to stop early. Unreached nodes
    /// keep distance `+inf`.
    pub fn dijkstra(
        &self,
        src: usize,
        mut pred: Option<&mut Vec<usize>>,
        mut settle: impl FnMut(usize, T) -> bool,
    ) -> Vec<T> {
        let n = self.nodes.len();
        let mut dist = vec![T::infinity(); n];
        let mut done = vec![false; n];
        if let Some(p) = pred.as_deref_mut() {
            p.clear();
            p.resize(n, usize::MAX);
        }
        let mut heap = BinaryHeap::new();
        dist[src] = T::zero();
        heap.push(Item {
            dist: T::zero(),
            node: src as u32,
        });
        while let Some(Item { dist: d, node }) = heap.pop() {
            let u = node as usize;
            if done[u] {
                continue;
            }
            done[u] = true;
            if !settle(u, d) {
                break;
            }
            for &(v, w) in self.neighbors(u) {
                let v = v as usize;
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    if let Some(p) = pred.as_deref_mut() {
                        p[v] = u;
                    }
                    heap.push(Item { dist: nd, node: v as u32 });
                }
            }
        }
        dist
    }

    /// Route lengths from city `src` to every node.
    pub fn distances_from_city(&self, src: usize) -> Result<Vec<T>> {
        let s = self.check_city(src)?;
        Ok(self.dijkstra(s, None, |_, _| true))
    }
}

/// Shortest route between two cities: length and node path. Unreachable pairs
/// give `+inf` and an empty path.
pub fn shortest_route<T: Scalar>(g: &RoutingGraph<T>, src: usize, dst: usize) -> Result<(T, Vec<usize>)> {
    let s = g.check_city(src)?;
    let t = g.check_city(dst)?;
    let mut pred = Vec::new();
    let dist = g.dijkstra(s, Some(&mut pred), |u, _| u != t);
    if !dist[t].is_finite() {
        return Ok((T::infinity(), Vec::new()));
    }
    let mut path = vec![t];
    let mut cur = t;
    while cur != s {
        cur = pred[cur];
        path.push(cur);
    }
    path.reverse();
    Ok((dist[t], path))
}

/// Per-source memo of full distance vectors, keyed by source city.
#[derive(Debug)]
pub struct RouteCache<'g, T> {
    graph: &'g RoutingGraph<T>,
    memo: Mutex<HashMap<usize, Arc<Vec<T>>>>,
}

impl<'g, T: Scalar> RouteCache<'g, T> {
    pub fn new(graph: &'g RoutingGraph<T>) -> Self {
        Self {
            graph,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &RoutingGraph<T> {
        self.graph
    }

    pub fn from_city(&self, src: usize) -> Result<Arc<Vec<T>>> {
        if let Some(d) = self.memo.lock().unwrap().get(&src) {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(self.graph.distances_from_city(src)?);
        self.memo.lock().unwrap().insert(src, Arc::clone(&d));
        Ok(d)
    }

    pub fn route_length(&self, src: usize, dst: usize) -> Result<T> {
        let t = self.graph.check_city(dst)?;
        Ok(self.from_city(src)?[t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{build_arrangement, ArrangementOptions, Segment};

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    fn square() -> RoutingGraph<f64> {
        let c = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let segs: Vec<_> = (0..4).map(|i| Segment::new(c[i], c[(i + 1) % 4])).collect();
        build_arrangement(&segs, &c, &ArrangementOptions::steiner(1e-9)).unwrap()
    }

    #[test]
    fn same_city_is_zero() {
        let g = square();
        assert_eq!(shortest_route(&g, 2, 2).unwrap().0, 0.0);
    }

    #[test]
    fn single_segment() {
        let segs = [Segment::new(p(0.0, 0.0), p(3.0, 4.0))];
        let g = build_arrangement(&segs, &[p(0.0, 0.0), p(3.0, 4.0)], &ArrangementOptions::steiner(1e-9)).unwrap();
        let (d, path) = shortest_route(&g, 0, 1).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        assert_eq!(path.len(), 2);
    }

    #[test]
    fn square_opposite_corners() {
        let g = square();
        let (d, path) = shortest_route(&g, 0, 2).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        assert_eq!(path.len(), 3);
    }

    #[test]
    fn unknown_city_and_unreachable() {
        let g = square();
        assert!(matches!(shortest_route(&g, 0, 9), Err(Error::UnknownCity { index: 9, .. })));
        let segs = [
            Segment::new(p(0.0, 0.0), p(1.0, 0.0)),
            Segment::new(p(5.0, 0.0), p(6.0, 0.0)),
        ];
        let g = build_arrangement(&segs, &[p(0.0, 0.0), p(6.0, 0.0)], &ArrangementOptions::steiner(1e-9)).unwrap();
        let (d, path) = shortest_route(&g, 0, 1).unwrap();
        assert!(d.is_infinite() && path.is_empty());
    }

    #[test]
    fn cache_matches_direct() {
        let g = square();
        let cache = RouteCache::new(&g);
        for a in 0..4 {
            for b in 0..4 {
                let direct = shortest_route(&g, a, b).unwrap().0;
                assert!((cache.route_length(a, b).unwrap() - direct).abs() < 1e-15);
            }
        }
    }
}
