//! Planar primitives: points, closed polygons and a segment index for
//! nearest-distance queries.

use std::ops::{Add, Mul, Neg, Sub};

use rstar::primitives::Line;
use rstar::{PointDistance, RTree};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Unit vector at angle `theta`.
    pub fn polar(theta: f64) -> Self {
        Point::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    fn arr(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// True when the open segments `[a, b]` and `[c, d]` cross at a single
/// interior point of both.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    let eps = 1e-12;
    ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps))
        && ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps))
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

/// A closed polygon; the last vertex connects back to the first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    /// Axis-parallel rectangle, counter-clockwise.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    /// The square `[-1, 1]^2`.
    pub fn unit_box() -> Self {
        Polygon::rect(-1.0, -1.0, 1.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterator over the closed edge list.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn translated(&self, shift: Point) -> Polygon {
        Polygon::new(self.vertices.iter().map(|&p| p + shift).collect())
    }

    pub fn scaled(&self, s: f64) -> Polygon {
        Polygon::new(self.vertices.iter().map(|&p| p * s).collect())
    }

    pub fn reversed(&self) -> Polygon {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon::new(v)
    }

    /// Same polygon with counter-clockwise orientation.
    pub fn to_ccw(&self) -> Polygon {
        if self.signed_area() < 0.0 {
            self.reversed()
        } else {
            self.clone()
        }
    }

    pub fn bbox(&self) -> BBox {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        BBox { min, max }
    }

    /// Even-odd point membership. Points on the boundary may go either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Keeps the part of the polygon with `x . normal <= offset`.
    pub fn clip_halfplane(&self, normal: Point, offset: f64) -> Polygon {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let cur = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let fc = cur.dot(normal) - offset;
            let fn_ = next.dot(normal) - offset;
            if fc <= 0.0 {
                out.push(cur);
            }
            if (fc < 0.0 && fn_ > 0.0) || (fc > 0.0 && fn_ < 0.0) {
                let t = fc / (fc - fn_);
                out.push(cur + (next - cur) * t);
            }
        }
        Polygon::new(out)
    }

    /// Drops consecutive vertices closer than `tol` and collinear vertices.
    pub fn simplified(&self, tol: f64) -> Polygon {
        let mut v: Vec<Point> = Vec::with_capacity(self.vertices.len());
        for &p in &self.vertices {
            if v.last().map_or(true, |q: &Point| q.dist(p) > tol) {
                v.push(p);
            }
        }
        while v.len() > 1 && v[0].dist(*v.last().unwrap()) <= tol {
            v.pop();
        }
        if v.len() > 3 {
            let n = v.len();
            let keep: Vec<bool> = (0..n)
                .map(|i| {
                    let a = v[(i + n - 1) % n];
                    let b = v[i];
                    let c = v[(i + 1) % n];
                    let scale = (c - a).norm().max(tol);
                    (b - a).cross(c - b).abs() > tol * scale || (b - a).dot(c - b) < 0.0
                })
                .collect();
            v = v.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
        }
        Polygon::new(v)
    }

    /// Points along the boundary with spacing at most `step`, vertices included.
    pub fn sample_boundary(&self, step: f64) -> Vec<Point> {
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            let len = a.dist(b);
            let k = (len / step).ceil().max(1.0) as usize;
            for j in 0..k {
                out.push(a + (b - a) * (j as f64 / k as f64));
            }
        }
        out
    }

    /// A point strictly inside the polygon: midpoint of the widest chord on
    /// a horizontal line through the middle of the vertical extent.
    pub fn interior_point(&self) -> Option<Point> {
        let mut ys: Vec<f64> = self.vertices.iter().map(|p| p.y).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.dedup();
        let mut best: Option<(f64, Point)> = None;
        // Try lines between consecutive distinct vertex heights, widest band first.
        let mut bands: Vec<(f64, f64)> = ys.windows(2).map(|w| (w[1] - w[0], 0.5 * (w[0] + w[1]))).collect();
        bands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for &(_, y) in bands.iter().take(8) {
            let mut xs: Vec<f64> = Vec::new();
            for (a, b) in self.edges() {
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for pair in xs.chunks(2) {
                if pair.len() == 2 {
                    let width = pair[1] - pair[0];
                    if best.map_or(true, |(bw, _)| width > bw) {
                        best = Some((width, Point::new(0.5 * (pair[0] + pair[1]), y)));
                    }
                }
            }
        }
        best.map(|(_, p)| p)
    }
}

/// Convex hull by monotone chain, counter-clockwise, without collinear points.
pub fn convex_hull(points: &[Point]) -> Polygon {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return Polygon::new(pts);
    }
    let turn = |o: Point, a: Point, b: Point| (a - o).cross(b - o);
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-15 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-15 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Polygon::new(lower)
}

/// Even-odd membership over the union of polygons, with edges bucketed by
/// horizontal bands.
#[derive(Clone, Debug)]
pub struct BandIndex {
    y0: f64,
    height: f64,
    bands: Vec<Vec<(Point, Point)>>,
}

impl BandIndex {
    pub fn new<'a>(polygons: impl IntoIterator<Item = &'a Polygon>) -> Self {
        let edges: Vec<(Point, Point)> =
            polygons.into_iter().flat_map(|p| p.edges().collect::<Vec<_>>()).filter(|(a, b)| a.y != b.y).collect();
        if edges.is_empty() {
            return BandIndex { y0: 0.0, height: 1.0, bands: Vec::new() };
        }
        let lo = edges.iter().map(|(a, b)| a.y.min(b.y)).fold(f64::INFINITY, f64::min);
        let hi = edges.iter().map(|(a, b)| a.y.max(b.y)).fold(-f64::INFINITY, f64::max);
        let count = (edges.len() / 4).clamp(1, 4096);
        let height = (hi - lo) / count as f64;
        let mut bands = vec![Vec::new(); count];
        let band = |y: f64| (((y - lo) / height).floor().max(0.0) as usize).min(count - 1);
        for (a, b) in edges {
            for k in band(a.y.min(b.y))..=band(a.y.max(b.y)) {
                bands[k].push((a, b));
            }
        }
        BandIndex { y0: lo, height, bands }
    }

    pub fn contains(&self, p: Point) -> bool {
        let k = (p.y - self.y0) / self.height;
        if self.bands.is_empty() || !(k >= 0.0 && k < self.bands.len() as f64) {
            return false;
        }
        let mut inside = false;
        for &(a, b) in &self.bands[k as usize] {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// R-tree over the edges of one or more polygons, answering distance to the
/// union of their boundaries.
#[derive(Clone)]
pub struct SegmentIndex {
    tree: RTree<Line<[f64; 2]>>,
}

impl SegmentIndex {
    pub fn new<'a>(polygons: impl IntoIterator<Item = &'a Polygon>) -> Self {
        let mut lines = Vec::new();
        for poly in polygons {
            for (a, b) in poly.edges() {
                lines.push(Line::new(a.arr(), b.arr()));
            }
        }
        SegmentIndex { tree: RTree::bulk_load(lines) }
    }

    pub fn is_empty(&self) -> bool {
        self.tree.size() == 0
    }

    pub fn distance(&self, p: Point) -> f64 {
        match self.tree.nearest_neighbor(&p.arr()) {
            Some(line) => line.distance_2(&p.arr()).sqrt(),
            None => f64::INFINITY,
        }
    }
}
