//! `facets simulate`: chains over every `(A, replica)` pair, measured
//! against the predicted stack.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use facets::metrics::{field_epigraph_distance, StackPrediction};
use facets::phase::solve_vp_delta;
use facets::stack::Stack;
use facets::sampler::{autocorrelation_time, run_chain_from, write_records_csv, ChainConfig};
use serde::Serialize;

use crate::config::{Continuum, ExperimentConfig};
use crate::provenance::{write_json, RunDir, TOOL_VERSION};
use crate::stats::{histogram, quantiles, Histogram, Quantiles};

#[derive(Clone, Copy)]
struct Job {
    excess_index: usize,
    replica: usize,
    chain: u64,
}

/// Chain `i * replicas + r` for excess `i` and replica `r`.
pub fn jobs(config: &ExperimentConfig) -> Vec<(usize, usize, u64)> {
    let reps = config.chain.replicas;
    (0..config.excess.len())
        .flat_map(|i| (0..reps).map(move |r| (i, r, (i * reps + r) as u64)))
        .collect()
}

#[derive(Serialize)]
struct ChainSummary {
    chain: u64,
    replica: usize,
    dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    records: usize,
    snapshots: usize,
    local_rate: f64,
    monolayer_rate: f64,
    monolayer_attempts: u64,
    /// Integrated autocorrelation time of the volume, in records.
    tau_alpha: f64,
    #[serde(skip)]
    counts: Vec<usize>,
    #[serde(skip)]
    distances: Vec<f64>,
    #[serde(skip)]
    unusable: usize,
}

#[derive(Serialize)]
struct Epigraph {
    /// Snapshots whose large level lines cross and cannot be stacked.
    unusable: usize,
    distance: Option<Quantiles>,
}

#[derive(Serialize)]
struct ExcessSummary {
    excess: f64,
    slope: f64,
    predicted: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction_error: Option<String>,
    large_contours: Histogram,
    epigraph: Epigraph,
    chains: Vec<ChainSummary>,
}

#[derive(Serialize)]
struct Summary {
    tool_version: &'static str,
    config_sha256: String,
    seed: u64,
    failed_chains: usize,
    excess: Vec<ExcessSummary>,
}

pub fn run(config: &ExperimentConfig, dir: &RunDir, c: &Continuum, workers: usize) -> anyhow::Result<()> {
    let scales = c.model.expect("validated model");
    let eps = config.model.as_ref().expect("validated model").eps;
    let l_max = config.phase.l_max;
    let predictions: Vec<Result<(Stack, StackPrediction), String>> = config
        .excess
        .iter()
        .map(|&a| {
            solve_vp_delta(a / scales.delta_p, scales.diffusivity, scales.tau_e, c.wulff.w, l_max)
                .map(|s| (s.stack, StackPrediction::from_stack(&s.stack, &c.wulff)))
                .map_err(|e| e.to_string())
        })
        .collect();

    let jobs: Vec<Job> =
        jobs(config).into_iter().map(|(excess_index, replica, chain)| Job { excess_index, replica, chain }).collect();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ChainSummary>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&job) = jobs.get(k) else { break };
                let a = config.excess[job.excess_index];
                let rel = format!("chains/a{:02}_r{:02}", job.excess_index, job.replica);
                let prediction = predictions[job.excess_index].as_ref().ok().map(|p| &p.1);
                let summary = match run_job(&config.chain_config(a), job, &dir.root.join(&rel), prediction, eps) {
                    Ok(s) => s,
                    Err(e) => {
                        log::error!("chain {} (A = {a}): {e:#}", job.chain);
                        failed(job, format!("{e:#}"))
                    }
                };
                slots.lock().expect("slot lock")[k] = Some(ChainSummary { dir: rel, ..summary });
            });
        }
    });
    let mut done = slots.into_inner().expect("slot lock").into_iter().map(|s| s.expect("every job ran"));

    let mut failed_chains = 0;
    let mut per_excess = Vec::new();
    for (i, &a) in config.excess.iter().enumerate() {
        let chains: Vec<ChainSummary> = done.by_ref().take(config.chain.replicas).collect();
        failed_chains += chains.iter().filter(|s| s.error.is_some()).count();
        let counts: Vec<usize> = chains.iter().flat_map(|s| s.counts.iter().copied()).collect();
        let distances: Vec<f64> = chains.iter().flat_map(|s| s.distances.iter().copied()).collect();
        per_excess.push(ExcessSummary {
            excess: a,
            slope: scales.slope(a),
            predicted: predictions[i].as_ref().ok().map(|p| p.0.to_json()),
            prediction_error: predictions[i].as_ref().err().cloned(),
            large_contours: histogram(&counts),
            epigraph: Epigraph { unusable: chains.iter().map(|s| s.unusable).sum(), distance: quantiles(&distances) },
            chains,
        });
    }
    let summary = Summary {
        tool_version: TOOL_VERSION,
        config_sha256: dir.config_hash.clone().expect("simulate archives its config"),
        seed: config.seed,
        failed_chains,
        excess: per_excess,
    };
    write_json(&dir.path("summary.json"), &summary)?;
    if failed_chains > 0 {
        anyhow::bail!("{failed_chains} of {} chains failed; see summary.json", jobs.len());
    }
    Ok(())
}

fn failed(job: Job, error: String) -> ChainSummary {
    ChainSummary {
        chain: job.chain,
        replica: job.replica,
        dir: String::new(),
        error: Some(error),
        records: 0,
        snapshots: 0,
        local_rate: 0.0,
        monolayer_rate: 0.0,
        monolayer_attempts: 0,
        tau_alpha: 0.0,
        counts: Vec::new(),
        distances: Vec::new(),
        unusable: 0,
    }
}

fn run_job(
    config: &ChainConfig,
    job: Job,
    dir: &Path,
    prediction: Option<&StackPrediction>,
    eps: f64,
) -> anyhow::Result<ChainSummary> {
    let run = run_chain_from(config, job.chain, None)?;
    fs::create_dir_all(dir.join("snapshots")).with_context(|| format!("creating {}", dir.display()))?;
    write_records_csv(&run.records, BufWriter::new(File::create(dir.join("records.csv"))?))?;
    let mut distances = Vec::new();
    let (mut snapshots, mut unusable) = (0, 0);
    for r in &run.records {
        let Some(field) = &r.snapshot else { continue };
        snapshots += 1;
        field.write_csv(BufWriter::new(File::create(dir.join(format!("snapshots/sweep_{:09}.csv", r.sweep)))?))?;
        if let Some(p) = prediction {
            match field_epigraph_distance(field, eps, p) {
                Ok(d) => distances.push(d),
                Err(e) => {
                    log::debug!("chain {} sweep {}: {e}", job.chain, r.sweep);
                    unusable += 1;
                }
            }
        }
    }
    let alpha: Vec<f64> = run.records.iter().map(|r| r.alpha as f64).collect();
    Ok(ChainSummary {
        chain: job.chain,
        replica: job.replica,
        dir: String::new(),
        error: None,
        records: run.records.len(),
        snapshots,
        local_rate: run.stats.local_rate(),
        monolayer_rate: run.stats.global_rate(),
        monolayer_attempts: run.stats.global_attempts,
        tau_alpha: autocorrelation_time(&alpha),
        counts: run.records.iter().map(|r| r.n_large).collect(),
        distances,
        unusable,
    })
}
