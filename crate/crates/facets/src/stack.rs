//! Stacks of nested optimal loops and their surface tension as a function
//! of the total area.
//!
//! A type-1 stack has `l - 1` plaquettes and a Wulff shape on top, all of a
//! common radius. A type-2 stack has `l` identical plaquettes. Everything
//! here is in rescaled units where the axis tension is 1 and the box is
//! `[-1, 1]^2`; only the Wulff area `w` enters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segments_cross, Polygon};
use crate::wulff::{plaquette, WulffGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    Empty,
    Type1,
    Type2,
}

impl StackKind {
    pub fn label(self) -> &'static str {
        match self {
            StackKind::Empty => "empty",
            StackKind::Type1 => "type1",
            StackKind::Type2 => "type2",
        }
    }
}

/// A stack of `layers` loops with total area `area`. An infeasible request
/// yields `tau = +inf`, which loses every comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    pub layers: usize,
    pub kind: StackKind,
    pub area: f64,
    pub radius: f64,
    pub tau: f64,
    #[serde(skip)]
    pub w: f64,
}

#[derive(Serialize)]
struct StackRecord<'a> {
    layers: usize,
    kind: &'a str,
    area: f64,
    radius: f64,
    tau: f64,
    per_layer_areas: Vec<f64>,
}

impl Stack {
    pub fn empty() -> Self {
        Stack { layers: 0, kind: StackKind::Empty, area: 0.0, radius: 0.0, tau: 0.0, w: f64::NAN }
    }

    fn infeasible(layers: usize, kind: StackKind, area: f64, w: f64) -> Self {
        Stack { layers, kind, area, radius: f64::NAN, tau: f64::INFINITY, w }
    }

    pub fn is_feasible(&self) -> bool {
        self.tau.is_finite()
    }

    /// Areas of the layers from the bottom up.
    pub fn per_layer_areas(&self) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        let plaq = 4.0 - (4.0 - self.w) * r2;
        match self.kind {
            StackKind::Empty => Vec::new(),
            StackKind::Type2 => vec![plaq; self.layers],
            StackKind::Type1 => {
                let mut v = vec![plaq; self.layers - 1];
                v.push(self.w * r2);
                v
            }
        }
    }

    /// `tau + a^2 / (2 sigma)`.
    pub fn energy(&self, sigma: f64) -> f64 {
        self.tau + self.area * self.area / (2.0 * sigma)
    }

    /// Nested centred polygons, bottom layer first.
    pub fn polygons(&self, wulff: &WulffGeometry) -> Vec<Polygon> {
        match self.kind {
            StackKind::Empty => Vec::new(),
            StackKind::Type2 => vec![plaquette(wulff, self.radius); self.layers],
            StackKind::Type1 => {
                let mut v = vec![plaquette(wulff, self.radius); self.layers - 1];
                v.push(wulff.polygon.scaled(self.radius));
                v
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StackRecord {
            layers: self.layers,
            kind: self.kind.label(),
            area: self.area,
            radius: self.radius,
            tau: self.tau,
            per_layer_areas: self.per_layer_areas(),
        })
        .expect("stack record serializes")
    }
}

/// `4 / (4 - w)`: above this layer count type-1 stacks never win.
pub fn critical_layer_count(w: f64) -> f64 {
    4.0 / (4.0 - w)
}

/// Nudges `w` off the values where a type-1 stack with `l` layers has a
/// degenerate radius formula.
fn guard_degenerate(l: usize, w: f64) -> f64 {
    if (l as f64 - critical_layer_count(w)).abs() < 1e-9 {
        log::warn!("l = {l} sits at the critical layer count for w = {w}; using w - 1e-7");
        w - 1e-7
    } else {
        w
    }
}

/// Area range `[lo, hi]` of type-1 stacks with `l` layers.
pub fn type1_range(l: usize, w: f64) -> (f64, f64) {
    let a = 4.0 * (l as f64 - 1.0);
    let b = l as f64 * w;
    (a.min(b), a.max(b))
}

/// Area range `[lo, hi]` of type-2 stacks with `l` layers.
pub fn type2_range(l: usize, w: f64) -> (f64, f64) {
    (l as f64 * w, 4.0 * l as f64)
}

/// `l - 1` plaquettes plus a Wulff shape of common radius, total area `a`.
pub fn type1_stack(l: usize, a: f64, w: f64) -> Stack {
    if l == 0 {
        return if a == 0.0 { Stack::empty() } else { Stack::infeasible(0, StackKind::Type1, a, w) };
    }
    let w = guard_degenerate(l, w);
    let (lo, hi) = type1_range(l, w);
    if !(lo..=hi).contains(&a) {
        return Stack::infeasible(l, StackKind::Type1, a, w);
    }
    let full = 4.0 * (l as f64 - 1.0);
    let denom = full - l as f64 * w;
    let r = if denom == 0.0 { 1.0 } else { ((full - a) / denom).clamp(0.0, 1.0).sqrt() };
    let lower = (l as f64 - 1.0) * (8.0 - 2.0 * r * (4.0 - w));
    Stack { layers: l, kind: StackKind::Type1, area: a, radius: r, tau: lower + 2.0 * r * w, w }
}

/// `l` identical plaquettes of total area `a`.
pub fn type2_stack(l: usize, a: f64, w: f64) -> Stack {
    if l == 0 {
        return if a == 0.0 { Stack::empty() } else { Stack::infeasible(0, StackKind::Type2, a, w) };
    }
    let (lo, hi) = type2_range(l, w);
    if !(lo..=hi).contains(&a) {
        return Stack::infeasible(l, StackKind::Type2, a, w);
    }
    let lf = l as f64;
    let r = ((4.0 * lf - a) / ((4.0 - w) * lf)).clamp(0.0, 1.0).sqrt();
    Stack { layers: l, kind: StackKind::Type2, area: a, radius: r, tau: lf * (8.0 - 2.0 * r * (4.0 - w)), w }
}

pub fn stack(kind: StackKind, l: usize, a: f64, w: f64) -> Stack {
    match kind {
        StackKind::Empty => type2_stack(0, a, w),
        StackKind::Type1 => type1_stack(l, a, w),
        StackKind::Type2 => type2_stack(l, a, w),
    }
}

/// Cheapest stack of total area `a` with at most `l_max` layers.
pub fn min_tau_stack(a: f64, w: f64, l_max: usize) -> Stack {
    if a == 0.0 {
        return Stack::empty();
    }
    let mut best = Stack::infeasible(0, StackKind::Type2, a, w);
    for l in 1..=l_max {
        for s in [type1_stack(l, a, w), type2_stack(l, a, w)] {
            if s.tau < best.tau {
                best = s;
            }
        }
    }
    best
}

/// The convex objective on the continuous layer/area domain
/// `{0 < a < 4l, a >= l w}`: `-v a + a^2/(2 sigma) + 8 l - 2 sqrt((4l - a)(4 - w) l)`.
pub fn free_energy(v: f64, l: f64, a: f64, w: f64, sigma: f64) -> f64 {
    -v * a + a * a / (2.0 * sigma) + 8.0 * l - 2.0 * ((4.0 * l - a) * (4.0 - w) * l).max(0.0).sqrt()
}

/// `tau(loop) - tau(a)` where `tau(a)` is the cheapest stack of the same area.
pub fn excess_surface_tension(loop_tau: f64, area: f64, w: f64) -> f64 {
    let cap = (area / 4.0).ceil() as usize + 2;
    loop_tau - min_tau_stack(area, w, cap.max(1)).tau
}

/// Nesting depth of each loop in a compatible family: the number of loops
/// whose interior contains it, itself included. Fails on crossing loops.
pub fn nesting_depths(loops: &[Polygon]) -> Result<Vec<usize>> {
    let n = loops.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if loops_cross(&loops[i], &loops[j]) {
                return Err(Error::CrossingLoops(i, j));
            }
        }
    }
    let areas: Vec<f64> = loops.iter().map(Polygon::area).collect();
    let probes: Vec<_> = loops.iter().map(Polygon::interior_point).collect();
    let mut depth = vec![1usize; n];
    for j in 0..n {
        let Some(p) = probes[j] else { continue };
        for i in 0..n {
            if i == j {
                continue;
            }
            let bigger = areas[i] > areas[j] + 1e-12
                || ((areas[i] - areas[j]).abs() <= 1e-12 && i < j);
            if bigger && loops[i].contains(p) {
                depth[j] += 1;
            }
        }
    }
    Ok(depth)
}

fn loops_cross(p: &Polygon, q: &Polygon) -> bool {
    let (bp, bq) = (p.bbox(), q.bbox());
    if bp.max.x < bq.min.x || bq.max.x < bp.min.x || bp.max.y < bq.min.y || bq.max.y < bp.min.y {
        return false;
    }
    p.edges().any(|(a, b)| q.edges().any(|(c, d)| segments_cross(a, b, c, d)))
}

/// `b_l` = area of the set covered by at least `l` loops, for `l = 1, 2, ...`.
pub fn areas_by_level(loops: &[Polygon]) -> Result<Vec<f64>> {
    let depth = nesting_depths(loops)?;
    let top = depth.iter().copied().max().unwrap_or(0);
    let mut b = vec![0.0; top];
    for (poly, d) in loops.iter().zip(depth) {
        b[d - 1] += poly.area();
    }
    Ok(b)
}

/// Proper edge colouring of the complete graph on `n` vertices.
#[derive(Clone, Debug)]
pub struct EdgeColoring {
    pub n: usize,
    pub colors: usize,
    table: Vec<usize>,
}

impl EdgeColoring {
    /// Colour of the edge `{a, b}`.
    pub fn color(&self, a: usize, b: usize) -> usize {
        assert!(a != b && a < self.n && b < self.n, "no edge {{{a}, {b}}}");
        self.table[a * self.n + b]
    }
}

/// `n` colours for odd `n`, `n - 1` for even `n`. For odd `n` place the
/// vertices on a regular polygon and colour every chord by the side it is
/// parallel to; for even `n` colour the first `n - 1` vertices that way and
/// join the last vertex to each other one with the colour missing there.
pub fn edge_color_complete(n: usize) -> Result<EdgeColoring> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 vertices, got {n}")));
    }
    let odd = if n % 2 == 1 { n } else { n - 1 };
    let half = (odd + 1) / 2; // inverse of 2 modulo `odd`
    let parallel_class = |a: usize, b: usize| ((a + b + odd - 1) % odd) * half % odd;
    let mut table = vec![usize::MAX; n * n];
    for a in 0..odd {
        for b in 0..odd {
            if a != b {
                table[a * n + b] = parallel_class(a, b);
            }
        }
    }
    if n % 2 == 0 {
        let last = n - 1;
        for a in 0..odd {
            let missing = parallel_class(a, a);
            table[a * n + last] = missing;
            table[last * n + a] = missing;
        }
    }
    Ok(EdgeColoring { n, colors: odd, table })
}
