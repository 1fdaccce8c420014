//! Minimization of `-v a + tau(stack) + a^2 / (2 sigma)` over stacks, the
//! critical slopes where the optimal layer count jumps, and the mapping of
//! those slopes back to the bulk excess `A`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stack::{critical_layer_count, type1_stack, type2_stack, Stack, StackKind};

/// Default cap on the number of layers considered.
pub const DEFAULT_LAYER_CAP: usize = 12;

const AREA_TOL: f64 = 1e-12;
const SLOPE_TOL: f64 = 1e-12;

/// A stack together with its objective value at a fixed slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchMin {
    pub stack: Stack,
    /// `-v a + tau + a^2 / (2 sigma)`
    pub value: f64,
}

fn objective(v: f64, sigma: f64, s: Stack) -> BranchMin {
    BranchMin { stack: s, value: -v * s.area + s.energy(sigma) }
}

/// Bisection for the sign change of an increasing function on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..300 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best type-2 stack with `l` layers at slope `v`.
pub fn minimize_type2(v: f64, w: f64, sigma: f64, l: usize) -> BranchMin {
    if l == 0 {
        return objective(v, sigma, Stack::empty());
    }
    let lf = l as f64;
    let a = if v <= 1.0 + lf * w / sigma {
        lf * w
    } else {
        let slope = |a: f64| ((4.0 - w) / (4.0 - a / lf)).sqrt() + a / sigma - v;
        bisect(lf * w, 4.0 * lf, AREA_TOL, slope)
    };
    objective(v, sigma, type2_stack(l, a.clamp(lf * w, 4.0 * lf), w))
}

/// Best type-1 stack with `l` layers at slope `v`.
///
/// Below the critical layer count the objective is concave then convex in
/// the area. The concave piece ends at the inflection point and starts at
/// `4(l - 1)`, where the stack degenerates into `l - 1` full plaquettes; that
/// endpoint belongs to the type-2 branch with `l - 1` layers and is excluded
/// here, so the minimum is taken over the convex piece only.
pub fn minimize_type1(v: f64, w: f64, sigma: f64, l: usize) -> BranchMin {
    if l == 0 {
        return objective(v, sigma, Stack::empty());
    }
    let w = if (l as f64 - critical_layer_count(w)).abs() < 1e-9 { w - 1e-7 } else { w };
    let full = 4.0 * (l as f64 - 1.0);
    let top = l as f64 * w;
    let eval = |a: f64| objective(v, sigma, type1_stack(l, a, w));
    if top > full {
        // With x = a - 4(l - 1) and d = l w - 4(l - 1) the slope is
        // -v + sqrt(d / x) + a / sigma, convex in x; inflection of the
        // objective at x = (sigma sqrt(d) / 2)^(2/3).
        let d = top - full;
        let slope = |x: f64| -v + (d / x).sqrt() + (full + x) / sigma;
        let xi = (0.5 * sigma * d.sqrt()).powf(2.0 / 3.0);
        if xi >= d || slope(d) <= 0.0 {
            eval(top)
        } else if slope(xi) >= 0.0 {
            eval(full + xi)
        } else {
            eval(full + bisect(xi, d, AREA_TOL, slope))
        }
    } else {
        // Convex on [l w, 4(l - 1)].
        let e = full - top;
        let slope = |a: f64| -v + (e / (full - a)).sqrt() + a / sigma;
        if slope(top) >= 0.0 {
            eval(top)
        } else {
            eval(bisect(top, full, AREA_TOL, slope))
        }
    }
}

pub fn minimize_over_branch(v: f64, w: f64, sigma: f64, l: usize, kind: StackKind) -> BranchMin {
    match kind {
        StackKind::Empty => objective(v, sigma, Stack::empty()),
        StackKind::Type1 => minimize_type1(v, w, sigma, l),
        StackKind::Type2 => minimize_type2(v, w, sigma, l),
    }
}

/// Whether type-1 stacks with `l` layers take part in the competition.
fn type1_admissible(l: usize, w: f64) -> bool {
    (l as f64) < critical_layer_count(w)
}

fn check_inputs(v: f64, w: f64, sigma: f64) -> Result<()> {
    if !(w >= 2.0 && w < 4.0) {
        return Err(Error::InvalidParameter(format!("Wulff area {w} outside [2, 4)")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma}")));
    }
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("slope v = {v}")));
    }
    Ok(())
}

fn better(candidate: &BranchMin, best: &BranchMin) -> bool {
    candidate.value < best.value - 1e-12 * best.value.abs().max(1.0)
}

fn solve(v: f64, w: f64, sigma: f64, l_max: usize, with_type1: bool) -> Result<BranchMin> {
    check_inputs(v, w, sigma)?;
    let candidates = |l: usize| {
        let mut c = vec![minimize_type2(v, w, sigma, l)];
        if with_type1 && type1_admissible(l, w) {
            c.push(minimize_type1(v, w, sigma, l));
        }
        c
    };
    let mut best = objective(v, sigma, Stack::empty());
    for l in 1..=l_max {
        for c in candidates(l) {
            if better(&c, &best) {
                best = c;
            }
        }
    }
    if candidates(l_max + 1).iter().any(|c| better(c, &best)) {
        return Err(Error::LayerCapExceeded(l_max));
    }
    Ok(best)
}

/// Optimal stack at slope `v` among the empty stack, all type-2 stacks and
/// type-1 stacks below the critical layer count. Ties go to fewer layers,
/// then to type-2.
pub fn solve_vp_v(v: f64, w: f64, sigma: f64, l_max: usize) -> Result<BranchMin> {
    solve(v, w, sigma, l_max, true)
}

/// Same as [`solve_vp_v`] with type-1 stacks excluded.
pub fn solve_type2_only(v: f64, w: f64, sigma: f64, l_max: usize) -> Result<BranchMin> {
    solve(v, w, sigma, l_max, false)
}

/// `sigma = D tau_e` and `v = delta / sigma`.
pub fn rescale(delta: f64, d: f64, tau_e: f64) -> (f64, f64) {
    let sigma = d * tau_e;
    (sigma, delta / sigma)
}

/// Optimum of `(delta - a)^2 / (2 D) + tau_e tau(stack)`.
#[derive(Clone, Copy, Debug)]
pub struct DeltaSolution {
    pub stack: Stack,
    pub energy: f64,
}

pub fn solve_vp_delta(delta: f64, d: f64, tau_e: f64, w: f64, l_max: usize) -> Result<DeltaSolution> {
    if !(d > 0.0 && tau_e > 0.0 && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta {delta}, D {d}, tau_e {tau_e}")));
    }
    let (sigma, v) = rescale(delta, d, tau_e);
    let best = solve_vp_v(v, w, sigma, l_max)?;
    Ok(DeltaSolution { stack: best.stack, energy: tau_e * (delta * delta / (2.0 * sigma) + best.value) })
}

/// `E(a) = (delta - a)^2 / (2 D) + tau_e tau(s)` for a given stack.
pub fn delta_energy(delta: f64, d: f64, tau_e: f64, s: &Stack) -> f64 {
    (delta - s.area).powi(2) / (2.0 * d) + tau_e * s.tau
}

/// Slope at which `l` type-2 layers overtake `l - 1` in the type-2 problem.
pub fn critical_slope_type2(l: usize, w: f64, sigma: f64) -> f64 {
    assert!(l >= 1);
    let gap = |v: f64| minimize_type2(v, w, sigma, l - 1).value - minimize_type2(v, w, sigma, l).value;
    let mut hi = 1.0;
    while gap(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect(0.0, hi, SLOPE_TOL * hi.max(1.0), gap)
}

/// `v*_1, ..., v*_{l_max}` of the type-2 problem.
pub fn critical_slopes_type2(w: f64, sigma: f64, l_max: usize) -> Vec<f64> {
    (1..=l_max).map(|l| critical_slope_type2(l, w, sigma)).collect()
}

/// Slope at which a type-1 stack with `l` layers overtakes the best type-2
/// stack with `l - 1` layers.
pub fn critical_slope_type1(l: usize, w: f64, sigma: f64) -> f64 {
    assert!(l >= 1);
    let gap = |v: f64| minimize_type2(v, w, sigma, l - 1).value - minimize_type1(v, w, sigma, l).value;
    let hi = 1.0 + l as f64 * w / sigma;
    bisect(0.0, hi, SLOPE_TOL * hi.max(1.0), gap)
}

/// The top layer of the type-2 optimum at `v*_l` is a Wulff-free plaquette
/// that would rather stick out: `v*_l < 1 + l w / sigma`.
pub fn sticks_out(l: usize, w: f64, sigma: f64, v_star: f64) -> bool {
    (l as f64) < critical_layer_count(w) && v_star < 1.0 + l as f64 * w / sigma
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdRow {
    pub l: usize,
    /// Type-2 problem critical slope.
    pub v_star: f64,
    /// Full-problem slope where a type-1 stack with `l` layers appears.
    pub v_tilde: Option<f64>,
    /// Type-2 problem optimal areas at `v*_l` and `v*_{l+1}`.
    pub a_minus: f64,
    pub a_plus: f64,
    /// Full-problem area right after the `l`-layer stack appears.
    pub a_entry: f64,
    /// Full-problem area right before layer `l + 1` appears.
    pub a_exit: f64,
    /// Full-problem slope where the optimum goes from `l - 1` to `l` layers.
    pub transition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseDiagram {
    pub w: f64,
    pub sigma: f64,
    pub l_max: usize,
    pub k_star: usize,
    pub rows: Vec<ThresholdRow>,
    /// Transition into `l_max + 1` layers.
    pub cap_transition: f64,
}

impl PhaseDiagram {
    pub fn new(w: f64, sigma: f64, l_max: usize) -> Result<Self> {
        check_inputs(0.0, w, sigma)?;
        if l_max == 0 {
            return Err(Error::InvalidParameter("l_max must be positive".into()));
        }
        let v_star: Vec<f64> = (1..=l_max + 1).map(|l| critical_slope_type2(l, w, sigma)).collect();
        // sticking out needs l below the critical layer count, so this
        // terminates whatever the cap
        let mut k_star = 0;
        if w > 2.0 * sigma {
            let slope = |l: usize| v_star.get(l - 1).copied().unwrap_or_else(|| critical_slope_type2(l, w, sigma));
            while sticks_out(k_star + 1, w, sigma, slope(k_star + 1)) {
                k_star += 1;
            }
        }
        let transitions: Vec<f64> = (1..=l_max + 1)
            .map(|l| if l <= k_star { critical_slope_type1(l, w, sigma) } else { v_star[l - 1] })
            .collect();
        let rows = (1..=l_max)
            .map(|l| {
                let entry = if l <= k_star {
                    minimize_type1(transitions[l - 1], w, sigma, l)
                } else {
                    minimize_type2(transitions[l - 1], w, sigma, l)
                };
                ThresholdRow {
                    l,
                    v_star: v_star[l - 1],
                    v_tilde: (l <= k_star).then(|| transitions[l - 1]),
                    a_minus: minimize_type2(v_star[l - 1], w, sigma, l).stack.area,
                    a_plus: minimize_type2(v_star[l], w, sigma, l).stack.area,
                    a_entry: entry.stack.area,
                    a_exit: minimize_type2(transitions[l], w, sigma, l).stack.area,
                    transition: transitions[l - 1],
                }
            })
            .collect();
        Ok(PhaseDiagram { w, sigma, l_max, k_star, rows, cap_transition: transitions[l_max] })
    }

    /// Layer count of the optimum at slope `v`.
    pub fn layers_at(&self, v: f64) -> Result<usize> {
        if v >= self.cap_transition {
            return Err(Error::LayerCapExceeded(self.l_max));
        }
        Ok(self.rows.iter().take_while(|r| r.transition <= v).count())
    }

    /// Optimal stack at slope `v`, read off the transition ladder.
    pub fn optimum(&self, v: f64) -> Result<BranchMin> {
        let l = self.layers_at(v)?;
        Ok(if l == 0 {
            objective(v, self.sigma, Stack::empty())
        } else if l <= self.k_star && v < 1.0 + l as f64 * self.w / self.sigma {
            minimize_type1(v, self.w, self.sigma, l)
        } else {
            minimize_type2(v, self.w, self.sigma, l)
        })
    }

    /// Bulk-excess thresholds `A_l = Delta tau_e D T_l` for `l = 1..=l_max`.
    pub fn excess_thresholds(&self, delta_p: f64, d: f64, tau_e: f64) -> Vec<f64> {
        self.rows.iter().map(|r| delta_p * tau_e * d * r.transition).collect()
    }
}

/// Grid argmin of the slope-`v` objective over every admissible
/// `(l, kind, a)` with `a` on a grid of spacing `step`. Independent of the
/// branch minimizers; used to check them.
pub fn brute_force_oracle(v: f64, w: f64, sigma: f64, l_max: usize, step: f64) -> Result<(usize, StackKind, f64)> {
    check_inputs(v, w, sigma)?;
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::InvalidParameter(format!("grid step {step} must lie in (0, 1e-3]")));
    }
    let mut best = (0usize, StackKind::Empty, 0.0, 0.0);
    for l in 1..=l_max {
        let mut kinds = vec![StackKind::Type2];
        if type1_admissible(l, w) {
            kinds.push(StackKind::Type1);
        }
        for kind in kinds {
            let (lo, hi) = match kind {
                StackKind::Type1 => crate::stack::type1_range(l, w),
                _ => crate::stack::type2_range(l, w),
            };
            let count = ((hi - lo) / step).floor() as usize;
            for i in 0..=count + 1 {
                let a = (lo + i as f64 * step).min(hi);
                let s = crate::stack::stack(kind, l, a, w);
                if !s.is_feasible() {
                    continue;
                }
                let value = -v * a + s.energy(sigma);
                if value < best.3 {
                    best = (l, kind, a, value);
                }
            }
        }
    }
    Ok((best.0, best.1, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn clamped_type2_minimum() {
        let m = minimize_type2(2.0, PI, 1.0, 1);
        assert_eq!(m.stack.area, PI);
    }

    #[test]
    fn first_slope_closed_form() {
        let (w, sigma) = (PI, 1.0);
        let v1 = critical_slope_type2(1, w, sigma);
        assert!((v1 - (2.0 + w / (2.0 * sigma))).abs() < 1e-8);
    }

    #[test]
    fn empty_at_zero_slope() {
        let s = solve_vp_v(0.0, PI, 1.0, 12).unwrap();
        assert_eq!(s.stack.kind, StackKind::Empty);
    }

    #[test]
    fn cap_is_reported() {
        assert!(matches!(solve_vp_v(500.0, PI, 1.0, 3), Err(Error::LayerCapExceeded(3))));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_vp_v(1.0, 4.5, 1.0, 12).is_err());
        assert!(solve_vp_v(1.0, PI, 0.0, 12).is_err());
    }

    #[test]
    fn delta_energy_matches_rescaled_value() {
        let (d, tau_e, w) = (0.7, 2.3, 3.4);
        let sol = solve_vp_delta(9.0, d, tau_e, w, 12).unwrap();
        assert!((sol.energy - delta_energy(9.0, d, tau_e, &sol.stack)).abs() < 1e-9);
    }
}
