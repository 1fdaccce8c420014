//! Wulff shapes, surface tension of closed curves, and the optimal single
//! loop of given area inside the box `[-1, 1]^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, Point, Polygon};
use crate::norm::Norm;

pub const DEFAULT_FACETS: usize = 1024;

/// Polygonal Wulff shape of a norm, with unit half-width along the axes.
#[derive(Clone, Debug)]
pub struct WulffGeometry {
    pub norm: Norm,
    /// Counter-clockwise polygon with unit half-width.
    pub polygon: Polygon,
    /// Area of `polygon`.
    pub w: f64,
    pub facets: usize,
}

/// Intersects `facets` half-planes `x . n_k <= tau(n_k)` with equally spaced
/// normals and rescales so that the half-width along `e1` is 1.
pub fn build_wulff(norm: &Norm, facets: usize) -> Result<WulffGeometry> {
    if facets < 16 || facets % 4 != 0 {
        return Err(Error::InvalidParameter(format!(
            "facet count must be a multiple of 4 and at least 16, got {facets}"
        )));
    }
    let mut poly = Polygon::unit_box();
    for k in 0..facets {
        if k % (facets / 4) == 0 {
            continue;
        }
        let theta = 2.0 * PI * k as f64 / facets as f64;
        poly = poly.clip_halfplane(Point::polar(theta), norm.tau(theta));
    }
    let poly = poly.simplified(1e-13);
    let half_width = poly.vertices.iter().map(|p| p.x.abs()).fold(0.0, f64::max);
    let polygon = poly.scaled(1.0 / half_width).to_ccw();
    let w = polygon.area();
    Ok(WulffGeometry { norm: norm.clone(), polygon, w, facets })
}

/// Sum of edge length times the tension of the edge normal. Zero-length
/// edges contribute nothing.
pub fn curve_surface_tension(norm: &Norm, polygon: &Polygon) -> f64 {
    polygon
        .edges()
        .map(|(a, b)| {
            let d = b - a;
            let len = d.norm();
            if len == 0.0 {
                0.0
            } else {
                len * norm.tau(Point::new(d.y, -d.x).angle())
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Wulff,
    Plaquette,
}

/// Minimal-tension loop of a prescribed area inside `[-1, 1]^2`.
#[derive(Clone, Debug)]
pub struct Shape {
    pub kind: ShapeKind,
    pub area: f64,
    pub radius: f64,
    pub tau: f64,
    pub polygon: Polygon,
}

/// Tension of the optimal loop of area `b` for Wulff area `w` (no polygon).
pub fn optimal_tau(b: f64, w: f64) -> (ShapeKind, f64, f64) {
    if b <= w {
        let r = (b / w).sqrt();
        (ShapeKind::Wulff, r, 2.0 * r * w)
    } else {
        let r = ((4.0 - b) / (4.0 - w)).max(0.0).sqrt();
        (ShapeKind::Plaquette, r, 8.0 - 2.0 * r * (4.0 - w))
    }
}

/// Plaquette of radius `r`: convex hull of four radius-`r` Wulff shapes
/// pushed into the corners of the box. `r = 1` is the Wulff shape itself.
pub fn plaquette(wulff: &WulffGeometry, r: f64) -> Polygon {
    let c = 1.0 - r;
    let small = wulff.polygon.scaled(r);
    let mut pts = Vec::with_capacity(4 * small.len());
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
        let shift = Point::new(sx * c, sy * c);
        pts.extend(small.vertices.iter().map(|&p| p + shift));
    }
    convex_hull(&pts)
}

pub fn optimal_shape(b: f64, wulff: &WulffGeometry) -> Result<Shape> {
    if !(0.0..=4.0).contains(&b) {
        return Err(Error::InvalidParameter(format!("area {b} outside [0, 4]")));
    }
    let (kind, radius, tau) = optimal_tau(b, wulff.w);
    let polygon = match kind {
        ShapeKind::Wulff => wulff.polygon.scaled(radius),
        ShapeKind::Plaquette => plaquette(wulff, radius),
    };
    Ok(Shape { kind, area: b, radius, tau, polygon })
}
