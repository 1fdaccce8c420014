//! Level lines of a height field.
//!
//! The level set `H_k = {h >= k}` (padding cells count as height 0) is
//! bounded by directed dual edges with `H_k` on the right. Where four edges
//! meet at a corner the loop is routed so that the north-west and south-east
//! cells stay connected: arriving eastward it turns south, westward it turns
//! north, southward it turns east and northward it turns west.

use serde::{Deserialize, Serialize};

use super::HeightField;
use crate::error::Result;
use crate::geometry::{Point, Polygon};

const EAST: u8 = 0;
const NORTH: u8 = 1;
const WEST: u8 = 2;
const SOUTH: u8 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contour {
    /// Level `k` of the set `{h >= k}` this loop bounds.
    pub level: i32,
    /// +1 for clockwise loops.
    pub sign: i8,
    /// Corner coordinates in `0..=side`, in traversal order.
    pub corners: Vec<(u16, u16)>,
    /// Interior cells as `iy * side + ix`, sorted.
    pub interior: Vec<u32>,
}

impl Contour {
    /// Number of dual bonds.
    pub fn length(&self) -> usize {
        self.corners.len()
    }

    pub fn area(&self) -> usize {
        self.interior.len()
    }

    /// Vertices in lattice units centred on the box.
    pub fn lattice_vertices(&self, n: usize) -> Vec<[f64; 2]> {
        let off = n as f64 - 0.5;
        self.corners.iter().map(|&(x, y)| [x as f64 - off, y as f64 - off]).collect()
    }

    /// The loop rescaled into `[-1, 1]^2`, collinear corners dropped.
    pub fn polygon(&self, n: usize) -> Polygon {
        let s = 1.0 / n as f64;
        let pts = self.lattice_vertices(n).into_iter().map(|[x, y]| Point::new(x * s, y * s)).collect();
        Polygon::new(pts).simplified(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourClass {
    Small,
    Intermediate,
    Large,
}

/// `Large` if `len >= eps N`, `Small` if `len <= ln(N) / eps`, otherwise
/// `Intermediate`. `Large` wins when the two cutoffs overlap.
pub fn classify_length(len: usize, n: usize, eps: f64) -> ContourClass {
    let len = len as f64;
    if len >= eps * n as f64 {
        ContourClass::Large
    } else if len <= (n as f64).ln() / eps {
        ContourClass::Small
    } else {
        ContourClass::Intermediate
    }
}

/// Serialized form of one contour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourRecord {
    pub sign: i8,
    pub length: usize,
    pub area: usize,
    pub level: i32,
    pub vertices: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ContourClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContourSet {
    pub n: usize,
    pub contours: Vec<Contour>,
    /// One label per contour once classified, empty before.
    pub classes: Vec<ContourClass>,
}

impl ContourSet {
    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    /// Labels every contour.
    pub fn classify(&self, eps: f64) -> ContourSet {
        let classes = self.contours.iter().map(|c| classify_length(c.length(), self.n, eps)).collect();
        ContourSet { n: self.n, contours: self.contours.clone(), classes }
    }

    pub fn count(&self, class: ContourClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn large(&self) -> impl Iterator<Item = &Contour> {
        self.contours.iter().zip(&self.classes).filter(|(_, &c)| c == ContourClass::Large).map(|(g, _)| g)
    }

    /// Sum of `sign * indicator(interior)` over the family.
    pub fn reconstruct(&self) -> Result<HeightField> {
        let mut f = HeightField::flat(self.n)?;
        let side = f.side();
        for c in &self.contours {
            for &cell in &c.interior {
                let (ix, iy) = (cell as usize % side, cell as usize / side);
                let i = f.index(ix, iy);
                f.raw_mut()[i] += c.sign as i32;
            }
        }
        Ok(f)
    }

    /// `sum sign * area`
    pub fn signed_area(&self) -> i64 {
        self.contours.iter().map(|c| c.sign as i64 * c.area() as i64).sum()
    }

    pub fn total_length(&self) -> usize {
        self.contours.iter().map(Contour::length).sum()
    }

    pub fn records(&self) -> Vec<ContourRecord> {
        self.contours
            .iter()
            .enumerate()
            .map(|(i, c)| ContourRecord {
                sign: c.sign,
                length: c.length(),
                area: c.area(),
                level: c.level,
                vertices: c.lattice_vertices(self.n),
                class: self.classes.get(i).copied(),
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.records())?)
    }
}

/// All level lines of `field`, ordered by level then by first corner.
pub fn extract_contours(field: &HeightField) -> ContourSet {
    let (lo, hi) = field.min_max();
    let mut contours = Vec::new();
    let mut tracer = Tracer::new(field.side());
    for k in (lo.min(0) + 1)..=hi.max(0) {
        tracer.trace_level(field, k, &mut contours);
    }
    ContourSet { n: field.n(), contours, classes: Vec::new() }
}

struct Tracer {
    side: usize,
    /// Outgoing edge directions per corner, one bit each.
    out: Vec<u8>,
    used: Vec<u8>,
}

impl Tracer {
    fn new(side: usize) -> Self {
        let corners = (side + 1) * (side + 1);
        Tracer { side, out: vec![0; corners], used: vec![0; corners] }
    }

    fn trace_level(&mut self, field: &HeightField, k: i32, sink: &mut Vec<Contour>) {
        let side = self.side;
        let cw = side + 1;
        let stride = field.stride();
        let h = field.raw();
        self.out.iter_mut().for_each(|m| *m = 0);
        self.used.iter_mut().for_each(|m| *m = 0);

        let mut any = false;
        for iy in 0..side {
            let row = (iy + 1) * stride;
            for cx in 0..=side {
                let l = h[row + cx] >= k;
                let r = h[row + cx + 1] >= k;
                if r && !l {
                    self.out[iy * cw + cx] |= 1 << NORTH;
                    any = true;
                } else if l && !r {
                    self.out[(iy + 1) * cw + cx] |= 1 << SOUTH;
                    any = true;
                }
            }
        }
        for cy in 0..=side {
            for ix in 0..side {
                let b = h[cy * stride + ix + 1] >= k;
                let t = h[(cy + 1) * stride + ix + 1] >= k;
                if b && !t {
                    self.out[cy * cw + ix] |= 1 << EAST;
                } else if t && !b {
                    self.out[cy * cw + ix + 1] |= 1 << WEST;
                }
            }
        }
        if !any {
            return;
        }

        for start in 0..self.out.len() {
            while self.out[start] & !self.used[start] != 0 {
                let free = self.out[start] & !self.used[start];
                let d0 = free.trailing_zeros() as u8;
                sink.push(self.trace_loop(start, d0, k));
            }
        }
    }

    fn trace_loop(&mut self, start: usize, d0: u8, level: i32) -> Contour {
        let cw = self.side + 1;
        let mut corners = Vec::new();
        let mut verticals: Vec<(u32, u32)> = Vec::new();
        let mut twice_area: i64 = 0;
        let (mut c, mut d) = (start, d0);
        loop {
            self.used[c] |= 1 << d;
            let (x, y) = ((c % cw) as i64, (c / cw) as i64);
            corners.push((x as u16, y as u16));
            let (nx, ny) = match d {
                EAST => (x + 1, y),
                NORTH => {
                    verticals.push((y as u32, x as u32));
                    (x, y + 1)
                }
                WEST => (x - 1, y),
                _ => {
                    verticals.push(((y - 1) as u32, x as u32));
                    (x, y - 1)
                }
            };
            twice_area += x * ny - nx * y;
            let next = ny as usize * cw + nx as usize;
            let mask = self.out[next];
            let nd = if mask.count_ones() == 1 {
                mask.trailing_zeros() as u8
            } else {
                match d {
                    EAST => SOUTH,
                    WEST => NORTH,
                    SOUTH => EAST,
                    _ => WEST,
                }
            };
            debug_assert!(mask & (1 << nd) != 0);
            c = next;
            d = nd;
            if c == start && d == d0 {
                break;
            }
        }

        verticals.sort_unstable();
        let mut interior = Vec::new();
        for pair in verticals.chunks_exact(2) {
            debug_assert_eq!(pair[0].0, pair[1].0);
            let row = pair[0].0 * self.side as u32;
            interior.extend((pair[0].1..pair[1].1).map(|ix| row + ix));
        }
        let sign = if twice_area < 0 { 1 } else { -1 };
        Contour { level, sign, corners, interior }
    }
}
