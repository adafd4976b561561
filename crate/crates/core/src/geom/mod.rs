//! Planar geometry kernel: points, segments, exact orientation, segment
//! intersection, and the road arrangement used for route queries.

mod arrangement;
mod grid;
mod route;

pub use arrangement::{build_arrangement, merge_collinear, wrap_segment, ArrangementOptions};
pub use grid::PointGrid;
pub use route::{shortest_route, RouteCache, RoutingGraph};

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(self, other: Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scale(self, c: T) -> Self {
        Self::new(self.x * c, self.y * c)
    }

    /// Rotation about the origin by `angle` radians.
    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, other: Self, t: T) -> Self {
        Self::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl<T: Scalar> Add for Point<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point<T> {
    type Output = Self;
    fn mul(self, c: T) -> Self {
        self.scale(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub a: Point<T>,
    pub b: Point<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn new(a: Point<T>, b: Point<T>) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> T {
        self.a.dist(self.b)
    }

    pub fn dir(&self) -> Point<T> {
        self.b - self.a
    }

    pub fn at(&self, t: T) -> Point<T> {
        self.a.lerp(self.b, t)
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.b, self.a)
    }

    pub fn translate(&self, v: Point<T>) -> Self {
        Self::new(self.a + v, self.b + v)
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    /// Parameter of the orthogonal projection of `p`, clamped to `[0, 1]`.
    pub fn project_param(&self, p: Point<T>) -> T {
        let d = self.dir();
        let len2 = d.dot(d);
        if len2 == T::zero() {
            return T::zero();
        }
        ((p - self.a).dot(d) / len2).max(T::zero()).min(T::one())
    }

    pub fn distance_to(&self, p: Point<T>) -> T {
        self.at(self.project_param(p)).dist(p)
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn square(side: T) -> Self {
        Self::new(T::zero(), T::zero(), side, side)
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> T {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point<T> {
        let two = T::lit(2.0);
        Point::new((self.x0 + self.x1) / two, (self.y0 + self.y1) / two)
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Shrinks each side by `fraction` of the corresponding extent.
    pub fn shrink(&self, fraction: T) -> Self {
        let dx = self.width() * fraction;
        let dy = self.height() * fraction;
        Self::new(self.x0 + dx, self.y0 + dy, self.x1 - dx, self.y1 - dy)
    }

    pub fn is_empty(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0)
    }

    /// Maps `p` into `[x0, x1) × [y0, y1)` by whole periods.
    pub fn wrap(&self, p: Point<T>) -> Point<T> {
        Point::new(
            wrap_coord(p.x, self.x0, self.width()),
            wrap_coord(p.y, self.y0, self.height()),
        )
    }

    /// Minimum-image displacement from `a` to `b` on the torus with this fundamental domain.
    pub fn min_image(&self, a: Point<T>, b: Point<T>) -> Point<T> {
        let d = b - a;
        Point::new(
            min_image_coord(d.x, self.width()),
            min_image_coord(d.y, self.height()),
        )
    }

    pub fn torus_dist(&self, a: Point<T>, b: Point<T>) -> T {
        self.min_image(a, b).norm()
    }
}

fn wrap_coord<T: Scalar>(v: T, origin: T, period: T) -> T {
    let mut r = (v - origin) % period;
    if r < T::zero() {
        r = r + period;
    }
    if r >= period {
        r = r - period;
    }
    origin + r
}

fn min_image_coord<T: Scalar>(d: T, period: T) -> T {
    let half = period / T::lit(2.0);
    let mut r = d % period;
    if r > half {
        r = r - period;
    } else if r < -half {
        r = r + period;
    }
    r
}

/// Sign of twice the signed area of `(p, q, r)`: `+1` counterclockwise,
/// `-1` clockwise, `0` collinear. Exact for all finite inputs.
pub fn orient<T: Scalar>(p: Point<T>, q: Point<T>, r: Point<T>) -> i8 {
    let c = |p: Point<T>| robust::Coord {
        x: p.x.as_f64(),
        y: p.y.as_f64(),
    };
    let det = robust::orient2d(c(p), c(q), c(r));
    if det > 0.0 {
        1
    } else if det < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intersection<T> {
    None,
    Point(Point<T>),
    Overlap(Segment<T>),
}

/// Intersection of two closed segments. Classification uses exact orientation
/// signs; the coordinates of a proper crossing are computed in floating point.
pub fn segment_intersection<T: Scalar>(s1: &Segment<T>, s2: &Segment<T>) -> Intersection<T> {
    let (a, b, c, d) = (s1.a, s1.b, s2.a, s2.b);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);

    if o1 == 0 && o2 == 0 && o3 == 0 && o4 == 0 {
        return collinear_overlap(s1, s2);
    }
    if o1 * o2 > 0 || o3 * o4 > 0 {
        return Intersection::None;
    }
    if o1 == 0 {
        return Intersection::Point(c);
    }
    if o2 == 0 {
        return Intersection::Point(d);
    }
    if o3 == 0 {
        return Intersection::Point(a);
    }
    if o4 == 0 {
        return Intersection::Point(b);
    }
    let r = b - a;
    let s = d - c;
    let t = (c - a).cross(s) / r.cross(s);
    Intersection::Point(a.lerp(b, t.max(T::zero()).min(T::one())))
}

fn collinear_overlap<T: Scalar>(s1: &Segment<T>, s2: &Segment<T>) -> Intersection<T> {
    let d = s1.dir();
    let key = |p: Point<T>| if d.x.abs() >= d.y.abs() { p.x } else { p.y };
    let (mut p0, mut p1) = (s1.a, s1.b);
    if key(p0) > key(p1) {
        std::mem::swap(&mut p0, &mut p1);
    }
    let (mut q0, mut q1) = (s2.a, s2.b);
    if key(q0) > key(q1) {
        std::mem::swap(&mut q0, &mut q1);
    }
    let lo = if key(p0) >= key(q0) { p0 } else { q0 };
    let hi = if key(p1) <= key(q1) { p1 } else { q1 };
    if key(lo) > key(hi) {
        Intersection::None
    } else if lo == hi || key(lo) == key(hi) {
        Intersection::Point(lo)
    } else {
        Intersection::Overlap(Segment::new(lo, hi))
    }
}

/// Clips a segment to a rectangle (Liang–Barsky). Returns `None` when nothing
/// of positive length remains.
pub fn clip_segment<T: Scalar>(s: &Segment<T>, r: &Rect<T>) -> Option<Segment<T>> {
    let d = s.dir();
    let mut t0 = T::zero();
    let mut t1 = T::one();
    let checks = [
        (-d.x, s.a.x - r.x0),
        (d.x, r.x1 - s.a.x),
        (-d.y, s.a.y - r.y0),
        (d.y, r.y1 - s.a.y),
    ];
    for (p, q) in checks {
        if p == T::zero() {
            if q < T::zero() {
                return None;
            }
        } else {
            let t = q / p;
            if p < T::zero() {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    if t0 >= t1 {
        return None;
    }
    let a = if t0 == T::zero() { s.a } else { s.at(t0) };
    let b = if t1 == T::one() { s.b } else { s.at(t1) };
    Some(Segment::new(a, b))
}
