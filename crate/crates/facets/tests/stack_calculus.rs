use std::f64::consts::PI;

use facets::geometry::Polygon;
use facets::norm::{make_norm, NormSpec};
use facets::stack::{
    areas_by_level, critical_layer_count, edge_color_complete, excess_surface_tension, free_energy, type1_range,
    type1_stack, type2_range, type2_stack, Stack, StackKind,
};
use facets::wulff::{build_wulff, curve_surface_tension, optimal_shape};
use proptest::prelude::*;

/// Tension of one loop of area `b`, written out from the Wulff/plaquette
/// formulas.
fn loop_tau(b: f64, w: f64) -> f64 {
    if b <= w {
        2.0 * (b * w).sqrt()
    } else {
        8.0 - 2.0 * ((4.0 - w) * (4.0 - b)).sqrt()
    }
}

fn layers_tau(s: &Stack, w: f64) -> f64 {
    s.per_layer_areas().iter().map(|&b| loop_tau(b, w)).sum()
}

#[test]
fn single_layer_type1_is_a_wulff_shape() {
    for a in [0.0, 0.5, 2.0, PI] {
        let s = type1_stack(1, a, PI);
        assert!((s.radius - (a / PI).sqrt()).abs() < 1e-14);
        assert!((s.tau - 2.0 * (a * PI).sqrt()).abs() < 1e-12);
        assert_eq!(s.area, a);
    }
}

#[test]
fn type1_endpoints_for_two_layers() {
    let s = type1_stack(2, 4.0, PI);
    assert_eq!(s.radius, 0.0);
    assert!((s.tau - 8.0).abs() < 1e-12);
    assert!((s.tau - type2_stack(1, 4.0, PI).tau).abs() < 1e-12);

    let s = type1_stack(2, 2.0 * PI, PI);
    assert!((s.radius - 1.0).abs() < 1e-12);
    assert!((s.tau - 4.0 * PI).abs() < 1e-12);
    assert!((s.tau - type2_stack(2, 2.0 * PI, PI).tau).abs() < 1e-12);
}

#[test]
fn type2_examples() {
    for l in 1..6 {
        let s = type2_stack(l, l as f64 * PI, PI);
        assert!((s.radius - 1.0).abs() < 1e-14);
        assert!((s.tau - 2.0 * l as f64 * PI).abs() < 1e-12);
    }
    let s = type2_stack(1, 4.0, PI);
    assert_eq!((s.radius, s.tau), (0.0, 8.0));

    let s = type2_stack(2, 7.0, PI);
    let r = (1.0 / (2.0 * (4.0 - PI))).sqrt();
    assert!((s.radius - r).abs() < 1e-14 && (s.radius - 0.7632).abs() < 1e-4);
    assert!((s.tau - (16.0 - 2.0 * (2.0 * (4.0 - PI)).sqrt())).abs() < 1e-12);
    assert!((s.tau - 13.379).abs() < 1e-3);
    assert!((s.tau - 2.0 * loop_tau(3.5, PI)).abs() < 1e-12);
    assert_eq!(s.per_layer_areas(), vec![3.5, 3.5]);
}

#[test]
fn out_of_range_is_infinite() {
    assert!(type2_stack(2, 6.0, PI).tau.is_infinite());
    assert!(type2_stack(2, 8.5, PI).tau.is_infinite());
    assert!(type1_stack(3, 12.5, PI).tau.is_infinite());
    assert!(!type2_stack(2, 6.0, PI).is_feasible());
}

#[test]
fn endpoint_identities() {
    for w in [2.5, PI, 3.5] {
        for l in 2..=6 {
            let full = 4.0 * (l as f64 - 1.0);
            let d1 = (type1_stack(l, full, w).tau - type2_stack(l - 1, full, w).tau).abs();
            let top = l as f64 * w;
            let d2 = (type1_stack(l, top, w).tau - type2_stack(l, top, w).tau).abs();
            assert!(d1 < 1e-10 && d2 < 1e-10, "w {w}, l {l}: {d1}, {d2}");
        }
    }
}

#[test]
fn type2_derivative_is_inverse_radius() {
    let h = 1e-5;
    for w in [2.5, PI, 3.5] {
        for l in 1..=4 {
            let (lo, hi) = type2_range(l, w);
            for i in 1..100 {
                let a = lo + (hi - lo) * i as f64 / 100.0;
                let slope = (type2_stack(l, a + h, w).tau - type2_stack(l, a - h, w).tau) / (2.0 * h);
                let r = type2_stack(l, a, w).radius;
                assert!((slope * r - 1.0).abs() < 1e-6, "w {w}, l {l}, a {a}");
            }
        }
    }
}

#[test]
fn type1_loses_above_critical_layer_count() {
    for w in [2.5, PI, 3.5] {
        let l_star = critical_layer_count(w);
        for l in (l_star.floor() as usize + 1)..=(l_star.ceil() as usize + 4) {
            let (lo1, hi1) = type1_range(l, w);
            let (lo2, hi2) = type2_range(l, w);
            let (lo, hi) = (lo1.max(lo2), hi1.min(hi2));
            for i in 0..=200 {
                let a = lo + (hi - lo) * i as f64 / 200.0;
                let t1 = type1_stack(l, a, w).tau;
                let t2 = type2_stack(l, a, w).tau;
                assert!(t1 >= t2 - 1e-10, "w {w}, l {l}, a {a}: {t1} < {t2}");
            }
        }
    }
}

#[test]
fn stack_energy_examples() {
    assert_eq!(Stack::empty().energy(1.0), 0.0);
    let e = type2_stack(1, PI, PI).energy(1.0);
    assert!((e - (2.0 * PI + PI * PI / 2.0)).abs() < 1e-12);
    assert!((e - 11.2180).abs() < 1e-4);
    assert!((type2_stack(1, PI, PI).energy(1e15) - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn free_energy_examples() {
    assert_eq!(free_energy(3.0, 0.0, 0.0, PI, 1.0), 0.0);
    assert!((free_energy(0.0, 1.0, PI, PI, 1.0) - 11.2180).abs() < 1e-4);
    let s = type2_stack(3, 10.0, PI);
    let v = 1.7;
    assert!((free_energy(v, 3.0, 10.0, PI, 2.0) - (-v * 10.0 + s.energy(2.0))).abs() < 1e-12);
}

#[test]
fn free_energy_hessian_is_positive_semidefinite() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 100 {
        let w: f64 = rng.gen_range(2.2..3.9);
        let sigma = rng.gen_range(0.3..4.0);
        let v = rng.gen_range(0.0..10.0);
        let l: f64 = rng.gen_range(0.5..6.0);
        let a = l * w + rng.gen_range(0.0..1.0) * l * (4.0 - w);
        let gap = 4.0 * l - a;
        if gap < 0.02 {
            continue;
        }
        checked += 1;
        let h = 1e-3 * gap.min(l);
        let f = |l: f64, a: f64| free_energy(v, l, a, w, sigma);
        let fll = (f(l + h, a) - 2.0 * f(l, a) + f(l - h, a)) / (h * h);
        let faa = (f(l, a + h) - 2.0 * f(l, a) + f(l, a - h)) / (h * h);
        let fla = (f(l + h, a + h) - f(l + h, a - h) - f(l - h, a + h) + f(l - h, a - h)) / (4.0 * h * h);
        // the tension part is 1-homogeneous, so its Hessian is singular and
        // the determinant is a difference of nearly equal products
        let scale = fll.abs().max(faa.abs()).max(1.0);
        assert!(fll >= -1e-5 * scale && faa >= -1e-5 * scale, "{fll} {faa}");
        let det = fll * faa - fla * fla;
        assert!(det >= -1e-4 * (fll * faa + fla * fla), "det {det} at l {l}, a {a}, w {w}");
    }
}

#[test]
fn excess_tension_examples() {
    let g = build_wulff(&make_norm(&NormSpec::euclidean()).unwrap(), 2048).unwrap();
    for b in [0.5, 2.0, 3.6] {
        let shape = optimal_shape(b, &g).unwrap();
        let t = curve_surface_tension(&g.norm, &shape.polygon);
        let omega = excess_surface_tension(t, shape.polygon.area(), g.w);
        assert!(omega.abs() < 1e-3, "b {b}: {omega}");
    }
    let half = Polygon::unit_box().scaled(0.5);
    let t = curve_surface_tension(&g.norm, &half);
    assert!((t - 4.0).abs() < 1e-12);
    let omega = excess_surface_tension(t, half.area(), PI);
    assert!((omega - (4.0 - 2.0 * PI.sqrt())).abs() < 1e-12);
    assert!((omega - 0.4551).abs() < 1e-4);
    let moved = half.translated(facets::geometry::Point::new(0.3, -0.2));
    let omega_moved = excess_surface_tension(curve_surface_tension(&g.norm, &moved), moved.area(), PI);
    assert!((omega - omega_moved).abs() < 1e-12);
}

#[test]
fn areas_by_level_examples() {
    let b = areas_by_level(&[Polygon::rect(0.0, 0.0, 2.0, 1.0)]).unwrap();
    assert_eq!(b, vec![2.0]);
    let b = areas_by_level(&[Polygon::rect(-1.0, -1.0, 0.0, 0.0), Polygon::rect(0.2, 0.0, 1.2, 2.0)]).unwrap();
    assert!((b[0] - 3.0).abs() < 1e-12 && b.len() == 1);
    let b = areas_by_level(&[Polygon::rect(0.0, 0.0, 3.0, 1.0), Polygon::rect(1.0, 0.2, 2.0, 0.8)]).unwrap();
    assert_eq!(b.len(), 2);
    assert!((b[0] - 3.0).abs() < 1e-12 && (b[1] - 0.6).abs() < 1e-12);
    let crossing = [Polygon::rect(0.0, 0.0, 2.0, 1.0), Polygon::rect(1.0, -1.0, 3.0, 0.5)];
    assert!(areas_by_level(&crossing).is_err());
}

#[test]
fn edge_colouring_is_proper_up_to_fifty() {
    assert_eq!(edge_color_complete(2).unwrap().colors, 1);
    assert_eq!(edge_color_complete(3).unwrap().colors, 3);
    assert_eq!(edge_color_complete(4).unwrap().colors, 3);
    assert!(edge_color_complete(1).is_err());
    for n in 2..=50 {
        let c = edge_color_complete(n).unwrap();
        let expected = if n % 2 == 1 { n } else { n - 1 };
        assert_eq!(c.colors, expected, "n = {n}");
        let mut used = vec![false; expected];
        for a in 0..n {
            let mut seen = vec![false; expected];
            for b in 0..n {
                if a == b {
                    continue;
                }
                let k = c.color(a, b);
                assert!(k < expected);
                assert_eq!(k, c.color(b, a));
                assert!(!seen[k], "n = {n}: vertex {a} sees colour {k} twice");
                seen[k] = true;
                used[k] = true;
            }
        }
        assert!(used.iter().all(|&u| u));
    }
}

/// Nested rectangles: each one sits inside the previous, at random offsets.
fn nested_rectangles() -> impl Strategy<Value = Vec<Polygon>> {
    proptest::collection::vec((0.05..0.45f64, 0.05..0.45f64, 0.05..0.45f64, 0.05..0.45f64), 1..5).prop_map(|cuts| {
        let (mut x0, mut y0, mut x1, mut y1) = (-1.0, -1.0, 1.0, 1.0);
        let mut out = Vec::new();
        for (l, b, r, t) in cuts {
            let (w, h) = (x1 - x0, y1 - y0);
            let (nx0, nx1) = (x0 + l * w * 0.5, x1 - r * w * 0.5);
            let (ny0, ny1) = (y0 + b * h * 0.5, y1 - t * h * 0.5);
            (x0, y0, x1, y1) = (nx0, ny0, nx1, ny1);
            out.push(Polygon::rect(x0, y0, x1, y1));
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stack_tau_is_sum_over_layers(w in 2.1..3.95f64, l in 1usize..7, t in 0.0..1.0f64, kind1 in any::<bool>()) {
        let s = if kind1 && (l as f64) != critical_layer_count(w) {
            let (lo, hi) = type1_range(l, w);
            type1_stack(l, lo + t * (hi - lo), w)
        } else {
            let (lo, hi) = type2_range(l, w);
            type2_stack(l, lo + t * (hi - lo), w)
        };
        prop_assert!(s.is_feasible());
        prop_assert!((s.tau - layers_tau(&s, w)).abs() < 1e-9 * s.tau.max(1.0));
        prop_assert!((s.per_layer_areas().iter().sum::<f64>() - s.area).abs() < 1e-9 * s.area.max(1.0));
        let expected_kind = if kind1 && (l as f64) != critical_layer_count(w) { StackKind::Type1 } else { StackKind::Type2 };
        prop_assert_eq!(s.kind, expected_kind);
    }

    #[test]
    fn level_reduction_never_increases_tension(loops in nested_rectangles()) {
        let norm = make_norm(&NormSpec::euclidean()).unwrap();
        let w = PI;
        let b = areas_by_level(&loops).unwrap();
        prop_assert_eq!(b.len(), loops.len());
        let total: f64 = loops.iter().map(Polygon::area).sum();
        prop_assert!((b.iter().sum::<f64>() - total).abs() < 1e-12);
        prop_assert!(b.windows(2).all(|p| p[0] >= p[1]));
        let family_tau: f64 = loops.iter().map(|p| curve_surface_tension(&norm, p)).sum();
        let reduced: f64 = b.iter().map(|&x| loop_tau(x, w)).sum();
        prop_assert!(reduced <= family_tau + 1e-12);
    }
}
