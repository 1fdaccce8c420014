//! Distances between observed level lines and predicted stacks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rstar::RTree;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BandIndex, BBox, Point, Polygon, SegmentIndex};
use crate::lattice::{extract_contours, Contour, HeightField};
use crate::stack::{nesting_depths, Stack};
use crate::wulff::WulffGeometry;

/// Boundary sampling step in box units.
pub const SAMPLE_STEP: f64 = 1e-3;
/// Resolution of the shift search.
pub const SHIFT_STEP: f64 = 2e-3;
/// Spacing of interior sample grids.
pub const INTERIOR_STEP: f64 = 0.02;

/// Coarse sampling used while bounding shifts.
const COARSE_STEP: f64 = 1e-2;
const COARSE_INTERIOR: f64 = 0.05;

fn empty_input() -> Error {
    Error::InvalidParameter("empty point set".into())
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_sets(p: &[Point], q: &[Point]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(empty_input());
    }
    let directed = |a: &[Point], b: &[Point]| {
        let tree = RTree::bulk_load(b.iter().map(|p| [p.x, p.y]).collect());
        a.iter()
            .map(|p| {
                let n = tree.nearest_neighbor(&[p.x, p.y]).expect("nonempty tree");
                p.dist(Point::new(n[0], n[1]))
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(p, q).max(directed(q, p)))
}

/// Hausdorff distance between two closed curves: boundary samples of each
/// against the exact segments of the other.
pub fn hausdorff(p: &Polygon, q: &Polygon) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(empty_input());
    }
    let (ip, iq) = (SegmentIndex::new([p]), SegmentIndex::new([q]));
    let d1 = p.sample_boundary(SAMPLE_STEP).into_iter().map(|x| iq.distance(x)).fold(0.0, f64::max);
    let d2 = q.sample_boundary(SAMPLE_STEP).into_iter().map(|x| ip.distance(x)).fold(0.0, f64::max);
    Ok(d1.max(d2))
}

/// Shifts `x` with `x + template` inside the rectangle `container`.
pub fn admissible_shifts(template: &Polygon, container: &BBox) -> Result<BBox> {
    let b = template.bbox();
    let lo = Point::new(container.min.x - b.min.x, container.min.y - b.min.y);
    let hi = Point::new(container.max.x - b.max.x, container.max.y - b.max.y);
    // allow rounding slack for templates that touch the container
    let slack = 1e-12;
    if lo.x > hi.x + slack || lo.y > hi.y + slack {
        return Err(Error::InvalidParameter("template does not fit in the container".into()));
    }
    Ok(BBox { min: lo, max: Point::new(hi.x.max(lo.x), hi.y.max(lo.y)) })
}

#[derive(Clone, Copy)]
struct Cell {
    lower: f64,
    center: Point,
    half: Point,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.lower == o.lower
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on the lower bound
        o.lower.total_cmp(&self.lower)
    }
}

/// Minimizes a 1-Lipschitz function over the rectangle `range`.
///
/// `fine` is the reported objective and `coarse(x)` must lie within `err`
/// of it. Cells larger than
/// `err` are bounded with the coarse evaluation, smaller ones with the fine
/// one. Refinement stops at half the shift step, then the best point is
/// polished by pattern search.
pub fn minimize_lipschitz(
    range: &BBox,
    coarse: impl Fn(Point) -> f64,
    err: f64,
    fine: impl Fn(Point) -> f64,
) -> (f64, Point) {
    let center = Point::new(0.5 * (range.min.x + range.max.x), 0.5 * (range.min.y + range.max.y));
    let half = Point::new(0.5 * (range.max.x - range.min.x), 0.5 * (range.max.y - range.min.y));
    let mut best = (fine(center), center);
    let mut heap = BinaryHeap::new();
    heap.push(Cell { lower: best.0 - half.norm(), center, half });
    // the fine objective is itself only accurate to about the interior grid
    let tol = 0.5 * INTERIOR_STEP;
    let mut evaluations = 1usize;
    while let Some(cell) = heap.pop() {
        if cell.lower >= best.0 - tol || evaluations > 20_000 {
            break;
        }
        if cell.half.norm() <= 0.5 * SHIFT_STEP {
            continue;
        }
        // split along the longer side, or both when comparable
        let splits: &[(f64, f64)] = if cell.half.x > 2.0 * cell.half.y {
            &[(-0.5, 0.0), (0.5, 0.0)]
        } else if cell.half.y > 2.0 * cell.half.x {
            &[(0.0, -0.5), (0.0, 0.5)]
        } else {
            &[(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]
        };
        let h = Point::new(
            if splits[0].0 != 0.0 { 0.5 * cell.half.x } else { cell.half.x },
            if splits[0].1 != 0.0 { 0.5 * cell.half.y } else { cell.half.y },
        );
        let use_fine = h.norm() <= err;
        for &(sx, sy) in splits {
            let c = Point::new(cell.center.x + sx * cell.half.x, cell.center.y + sy * cell.half.y);
            evaluations += 1;
            let v = if use_fine {
                let v = fine(c);
                if v < best.0 {
                    best = (v, c);
                }
                v
            } else {
                coarse(c) - err
            };
            heap.push(Cell { lower: v - h.norm(), center: c, half: h });
        }
    }

    let clamp = |p: Point| Point::new(p.x.clamp(range.min.x, range.max.x), p.y.clamp(range.min.y, range.max.y));
    let (mut fx, mut x) = best;
    let mut step = 0.5 * SHIFT_STEP;
    while step > 1e-6 {
        let mut moved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let y = clamp(Point::new(x.x + dx * step, x.y + dy * step));
            if y == x {
                continue;
            }
            let fy = fine(y);
            if fy < fx {
                x = y;
                fx = fy;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (fx, x)
}

/// Boundary samples of a curve, with their sampling step.
struct CurveSamples {
    coarse: Vec<Point>,
    fine: Vec<Point>,
    index: SegmentIndex,
}

impl CurveSamples {
    fn new(p: &Polygon) -> Self {
        CurveSamples {
            coarse: p.sample_boundary(COARSE_STEP),
            fine: p.sample_boundary(SAMPLE_STEP),
            index: SegmentIndex::new([p]),
        }
    }
}

/// `min_x hausdorff(p, x + template)` over `x + template` inside `container`.
pub fn best_shift_hausdorff(p: &Polygon, template: &Polygon, container: &BBox) -> Result<(f64, Point)> {
    if p.is_empty() || template.is_empty() {
        return Err(empty_input());
    }
    let range = admissible_shifts(template, container)?;
    let sp = CurveSamples::new(p);
    let st = CurveSamples::new(template);
    let eval = |x: Point, fine: bool| {
        let (a, b) = if fine { (&sp.fine, &st.fine) } else { (&sp.coarse, &st.coarse) };
        let d1 = a.iter().map(|&q| st.index.distance(q - x)).fold(0.0, f64::max);
        let d2 = b.iter().map(|&q| sp.index.distance(q + x)).fold(0.0, f64::max);
        d1.max(d2)
    };
    let found = minimize_lipschitz(&range, |x| eval(x, false), 0.5 * COARSE_STEP, |x| eval(x, true));
    Ok(prefer_origin(&range, found, || eval(Point::ORIGIN, true)))
}

/// Keeps the zero shift when it is admissible and no worse than `found`.
fn prefer_origin(range: &BBox, found: (f64, Point), at_origin: impl Fn() -> f64) -> (f64, Point) {
    let admissible = range.min.x <= 0.0 && range.max.x >= 0.0 && range.min.y <= 0.0 && range.max.y >= 0.0;
    if admissible {
        let d = at_origin();
        if d <= found.0 {
            return (d, Point::ORIGIN);
        }
    }
    found
}

/// A filled planar region: the union of the interiors of disjoint loops.
#[derive(Clone)]
pub struct Region {
    pub loops: Vec<Polygon>,
    index: SegmentIndex,
    bands: BandIndex,
    bbox: BBox,
}

impl Region {
    pub fn new(loops: Vec<Polygon>) -> Self {
        let index = SegmentIndex::new(loops.iter());
        let mut bbox = BBox { min: Point::new(f64::INFINITY, f64::INFINITY), max: Point::new(-f64::INFINITY, -f64::INFINITY) };
        for l in &loops {
            let b = l.bbox();
            bbox.min = Point::new(bbox.min.x.min(b.min.x), bbox.min.y.min(b.min.y));
            bbox.max = Point::new(bbox.max.x.max(b.max.x), bbox.max.y.max(b.max.y));
        }
        let bands = BandIndex::new(loops.iter());
        Region { loops, index, bands, bbox }
    }

    pub fn area(&self) -> f64 {
        self.loops.iter().map(Polygon::area).sum()
    }

    pub fn contains(&self, y: Point) -> bool {
        y.x >= self.bbox.min.x
            && y.x <= self.bbox.max.x
            && y.y >= self.bbox.min.y
            && y.y <= self.bbox.max.y
            && self.bands.contains(y)
    }

    /// Distance from `y` to the region; zero inside.
    pub fn distance(&self, y: Point) -> f64 {
        if self.contains(y) {
            0.0
        } else {
            self.index.distance(y)
        }
    }

    /// Boundary points at spacing `step` and grid points at spacing `grid`.
    pub fn samples(&self, step: f64, grid: f64) -> Vec<Point> {
        let mut out: Vec<Point> = self.loops.iter().flat_map(|l| l.sample_boundary(step)).collect();
        if self.loops.is_empty() {
            return out;
        }
        let x0 = (self.bbox.min.x / grid).ceil() as i64;
        let x1 = (self.bbox.max.x / grid).floor() as i64;
        let y0 = (self.bbox.min.y / grid).ceil() as i64;
        let y1 = (self.bbox.max.y / grid).floor() as i64;
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let y = Point::new(ix as f64 * grid, iy as f64 * grid);
                if self.contains(y) {
                    out.push(y);
                }
            }
        }
        out
    }

    fn translated(&self, x: Point) -> Region {
        Region::new(self.loops.iter().map(|l| l.translated(x)).collect())
    }
}

/// Hausdorff distance between two filled regions (sampled).
pub fn region_hausdorff(a: &Region, b: &Region) -> f64 {
    let d1 = a.samples(SAMPLE_STEP, INTERIOR_STEP).into_iter().map(|y| b.distance(y)).fold(0.0, f64::max);
    let d2 = b.samples(SAMPLE_STEP, INTERIOR_STEP).into_iter().map(|y| a.distance(y)).fold(0.0, f64::max);
    d1.max(d2)
}

/// Predicted layers, outermost first, in box units.
#[derive(Clone, Debug)]
pub struct StackPrediction {
    pub layers: Vec<Polygon>,
}

impl StackPrediction {
    pub fn from_stack(stack: &Stack, wulff: &WulffGeometry) -> Self {
        StackPrediction { layers: stack.polygons(wulff) }
    }

    /// `#{i : y inside layer i}`
    pub fn height(&self, y: Point) -> usize {
        self.layers.iter().filter(|l| l.contains(y)).count()
    }
}

/// Groups nested loops by depth: entry `n` holds the loops at depth `n + 1`.
pub fn observed_levels(loops: &[Polygon]) -> Result<Vec<Vec<Polygon>>> {
    let depth = nesting_depths(loops)?;
    let top = depth.iter().copied().max().unwrap_or(0);
    let mut levels = vec![Vec::new(); top];
    for (l, d) in loops.iter().zip(depth) {
        levels[d - 1].push(l.clone());
    }
    Ok(levels)
}

/// Directed distance from the hypograph of `a` to that of `b`, where level
/// `n` (1-based) of each is the region where the height is at least `n`.
/// The lowest point of column `y` at height `n` reaches level `m <= n` of
/// `b` at cost `sqrt((n - m)^2 + d(y, K_m)^2)`, with `K_0` everything.
fn directed_epigraph(a_samples: &[Vec<Point>], b: &[&Region]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, samples) in a_samples.iter().enumerate() {
        let n = i + 1;
        for &y in samples {
            let mut best = n as f64;
            for m in (1..=n.min(b.len())).rev() {
                let lift = (n - m) as f64;
                if lift >= best {
                    break;
                }
                let d = b[m - 1].distance(y);
                best = best.min(lift.hypot(d));
                if best <= worst {
                    break;
                }
            }
            worst = worst.max(best);
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct EpigraphReport {
    /// Region Hausdorff distance per common layer, the top one shifted.
    pub per_layer_distances: Vec<f64>,
    pub top_shift: [f64; 2],
    pub epigraph_distance: f64,
    /// Observed and predicted layer counts.
    pub layer_counts: [usize; 2],
}

struct EpigraphInput {
    obs: Vec<Region>,
    pred: Vec<Region>,
    obs_coarse: Vec<Vec<Point>>,
    obs_fine: Vec<Vec<Point>>,
    pred_coarse: Vec<Vec<Point>>,
    pred_fine: Vec<Vec<Point>>,
}

impl EpigraphInput {
    fn new(obs: Vec<Region>, pred: Vec<Region>) -> Self {
        let s = |v: &[Region], a, b| v.iter().map(|r| r.samples(a, b)).collect::<Vec<_>>();
        EpigraphInput {
            obs_coarse: s(&obs, COARSE_STEP, COARSE_INTERIOR),
            obs_fine: s(&obs, SAMPLE_STEP, INTERIOR_STEP),
            pred_coarse: s(&pred, COARSE_STEP, COARSE_INTERIOR),
            pred_fine: s(&pred, SAMPLE_STEP, INTERIOR_STEP),
            obs,
            pred,
        }
    }

    /// Distance with the top predicted layer shifted by `x`.
    fn eval(&self, x: Point, fine: bool) -> f64 {
        let top = self.pred.len();
        let shifted = (top > 0 && x != Point::ORIGIN).then(|| self.pred[top - 1].translated(x));
        let pred: Vec<&Region> =
            self.pred.iter().enumerate().map(|(i, r)| if i + 1 == top { shifted.as_ref().unwrap_or(r) } else { r }).collect();
        let obs: Vec<&Region> = self.obs.iter().collect();
        let (os, ps) = if fine { (&self.obs_fine, &self.pred_fine) } else { (&self.obs_coarse, &self.pred_coarse) };
        let moved: Vec<Vec<Point>>;
        let ps = if x != Point::ORIGIN && top > 0 {
            let mut v = ps.clone();
            v[top - 1].iter_mut().for_each(|p| *p = *p + x);
            moved = v;
            &moved
        } else {
            ps
        };
        directed_epigraph(os, &pred).max(directed_epigraph(ps, &obs))
    }
}

/// Sampling error bound of the coarse epigraph evaluation.
fn coarse_error() -> f64 {
    COARSE_INTERIOR.max(COARSE_STEP)
}

/// Epigraph distance between observed nested loops and a predicted stack,
/// minimized over admissible shifts of the top predicted layer.
pub fn epigraph_report(observed: &[Polygon], prediction: &StackPrediction) -> Result<EpigraphReport> {
    let levels = observed_levels(observed)?;
    let obs: Vec<Region> = levels.into_iter().map(Region::new).collect();
    let pred: Vec<Region> = prediction.layers.iter().map(|p| Region::new(vec![p.clone()])).collect();
    let counts = [obs.len(), pred.len()];
    let input = EpigraphInput::new(obs, pred);

    let range = match prediction.layers.last() {
        Some(top) => admissible_shifts(top, &Polygon::unit_box().bbox())?,
        None => BBox { min: Point::ORIGIN, max: Point::ORIGIN },
    };
    let (distance, shift) = if range.min == range.max {
        (input.eval(range.min, true), range.min)
    } else {
        let found = minimize_lipschitz(&range, |x| input.eval(x, false), coarse_error(), |x| input.eval(x, true));
        prefer_origin(&range, found, || input.eval(Point::ORIGIN, true))
    };

    let common = counts[0].min(counts[1]);
    let per_layer_distances = (0..common)
        .map(|i| {
            if i + 1 == counts[1] {
                region_hausdorff(&input.obs[i], &input.pred[i].translated(shift))
            } else {
                region_hausdorff(&input.obs[i], &input.pred[i])
            }
        })
        .collect();
    Ok(EpigraphReport { per_layer_distances, top_shift: [shift.x, shift.y], epigraph_distance: distance, layer_counts: counts })
}

pub fn epigraph_distance(observed: &[Polygon], prediction: &StackPrediction) -> Result<f64> {
    Ok(epigraph_report(observed, prediction)?.epigraph_distance)
}

/// Large level lines of `field`, rescaled into `[-1, 1]^2`.
pub fn large_level_lines(field: &HeightField, eps: f64) -> Vec<Polygon> {
    let set = extract_contours(field).classify(eps);
    set.large().map(|c| c.polygon(field.n())).collect()
}

/// Epigraph distance between the large level lines of `field` and a
/// predicted stack.
pub fn field_epigraph_distance(field: &HeightField, eps: f64, prediction: &StackPrediction) -> Result<f64> {
    epigraph_distance(&large_level_lines(field, eps), prediction)
}

/// Coarse-grained contour: corner positions where the walk first leaves an
/// l1 ball of radius `hop` around the previous kept vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Skeleton {
    pub contour: usize,
    pub hop: usize,
    /// Lattice corner coordinates.
    pub vertices: Vec<(i64, i64)>,
}

impl Skeleton {
    /// Rescaled into `[-1, 1]^2` for a box of half side `n`.
    pub fn polygon(&self, n: usize) -> Polygon {
        let off = n as f64 - 0.5;
        let s = 1.0 / n as f64;
        Polygon::new(self.vertices.iter().map(|&(x, y)| Point::new((x as f64 - off) * s, (y as f64 - off) * s)).collect())
    }
}

/// Skeleton of a contour, starting from its lexicographically smallest
/// corner.
pub fn skeletonize(contour: &Contour, id: usize, hop: usize) -> Result<Skeleton> {
    if hop == 0 {
        return Err(Error::InvalidParameter("hop must be at least 1".into()));
    }
    let path: Vec<(i64, i64)> = contour.corners.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    let Some(start) = (0..path.len()).min_by_key(|&i| path[i]) else {
        return Ok(Skeleton { contour: id, hop, vertices: Vec::new() });
    };
    let mut vertices = vec![path[start]];
    let mut anchor = path[start];
    for k in 1..path.len() {
        let u = path[(start + k) % path.len()];
        if (u.0 - anchor.0).abs() + (u.1 - anchor.1).abs() > hop as i64 {
            vertices.push(u);
            anchor = u;
        }
    }
    Ok(Skeleton { contour: id, hop, vertices })
}
