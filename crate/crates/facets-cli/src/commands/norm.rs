//! `facets norm`: the Wulff polygon and tension profile of a norm.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;

use serde_json::json;

use crate::config::Continuum;
use crate::provenance::{write_json, RunDir};

const TAU_SAMPLES: usize = 720;

pub fn run(dir: &RunDir, c: &Continuum) -> anyhow::Result<()> {
    let g = &c.wulff;
    let mut out = String::from("# x y\n");
    for p in g.polygon.vertices.iter().chain(g.polygon.vertices.first()) {
        writeln!(out, "{} {}", p.x, p.y)?;
    }
    fs::write(dir.path("wulff.dat"), out)?;

    let mut out = String::from("theta,tau\n");
    for i in 0..TAU_SAMPLES {
        let theta = TAU * i as f64 / TAU_SAMPLES as f64;
        writeln!(out, "{theta},{}", g.norm.tau(theta))?;
    }
    fs::write(dir.path("tau.csv"), out)?;

    write_json(
        &dir.path("norm.json"),
        &json!({
            "family": g.norm.family(),
            "spec": g.norm.spec(),
            "facets": g.facets,
            "w": g.w,
            "axis_tension": g.norm.axis_tension(),
            "critical_layer_count": facets::stack::critical_layer_count(g.w),
        }),
    )
}
