//! `facets phase`: thresholds, optimal stacks along a sweep, branch curves.

use std::fmt::Write as _;
use std::fs;

use facets::phase::{solve_vp_v, PhaseDiagram};
use facets::stack::{critical_layer_count, stack, type1_range, type2_range, StackKind};

use crate::config::{Continuum, ExperimentConfig, SweepVariable};
use crate::provenance::RunDir;

const BRANCH_POINTS: usize = 200;

pub fn run(config: &ExperimentConfig, dir: &RunDir, c: &Continuum) -> anyhow::Result<()> {
    let (w, sigma, l_max) = (c.wulff.w, c.sigma, config.phase.l_max);
    let diagram = PhaseDiagram::new(w, sigma, l_max)?;
    log::info!("w = {w}, sigma = {sigma}, k* = {}", diagram.k_star);

    let excess = c.model.map(|m| diagram.excess_thresholds(m.delta_p, m.diffusivity, m.tau_e));
    let mut out = String::from("ell,v_star,v_tilde,a_minus,a_plus,a_entry,a_exit,transition,A_ell,k_star\n");
    for (i, r) in diagram.rows.iter().enumerate() {
        let v_tilde = r.v_tilde.map(|x| x.to_string()).unwrap_or_default();
        let a_ell = excess.as_ref().map(|e| e[i].to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{v_tilde},{},{},{},{},{},{a_ell},{}",
            r.l, r.v_star, r.a_minus, r.a_plus, r.a_entry, r.a_exit, r.transition, diagram.k_star
        )?;
    }
    fs::write(dir.path("thresholds.csv"), out)?;

    let mut out = String::from("v,ell,kind,a,radius,tau,energy,excess\n");
    if let Some(sweep) = &config.phase.sweep {
        for x in sweep.values() {
            let (v, a) = match (sweep.variable, c.model) {
                (SweepVariable::V, m) => (x, m.map(|m| m.excess(x).to_string()).unwrap_or_default()),
                (SweepVariable::Excess, Some(m)) => (m.slope(x), x.to_string()),
                (SweepVariable::Excess, None) => unreachable!("checked by validation"),
            };
            let best = solve_vp_v(v, w, sigma, l_max)?;
            let s = best.stack;
            writeln!(out, "{v},{},{},{},{},{},{},{a}", s.layers, s.kind.label(), s.area, s.radius, s.tau, best.value)?;
        }
    }
    fs::write(dir.path("phase.csv"), out)?;

    fs::write(dir.path("branches.dat"), branch_curves(w, l_max))?;
    Ok(())
}

/// One gnuplot index block per `(l, kind)`: columns `a tau radius`.
fn branch_curves(w: f64, l_max: usize) -> String {
    let mut out = String::new();
    for l in 1..=l_max {
        let mut kinds = vec![(StackKind::Type2, type2_range(l, w))];
        if (l as f64) < critical_layer_count(w) {
            kinds.insert(0, (StackKind::Type1, type1_range(l, w)));
        }
        for (kind, (lo, hi)) in kinds {
            if hi <= lo {
                continue;
            }
            let _ = writeln!(out, "# ell={l} kind={}\n# a tau radius", kind.label());
            for i in 0..=BRANCH_POINTS {
                let a = lo + (hi - lo) * i as f64 / BRANCH_POINTS as f64;
                let s = stack(kind, l, a, w);
                if s.is_feasible() {
                    let _ = writeln!(out, "{a} {} {}", s.tau, s.radius);
                }
            }
            out.push_str("\n\n");
        }
    }
    out
}
