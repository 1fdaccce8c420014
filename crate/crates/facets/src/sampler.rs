//! Metropolis chains on height fields targeting
//! `exp(-beta * gradient_sum + bulk_log_tail(alpha))`.
//!
//! Each attempt is either a single-site move (`h(x) -> h(x) +- 1`) or, with
//! probability `proposal_mix / |interior|`, a monolayer move that shifts the
//! whole interior of one level line by `+-1`. On a flat field the monolayer
//! move seeds a uniformly placed square instead. Both moves are corrected by
//! their exact proposal ratios, so each one is reversible on its own.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{extract_contours, make_tail, BulkTail, ContourClass, ContourSet, HeightField, ModelParams, TailMode};

pub type ChainRng = ChaCha8Rng;

/// Stream `chain` of the generator seeded by `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainConfig {
    pub params: ModelParams,
    pub sweeps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tail_mode: TailMode,
    /// Expected number of monolayer attempts per sweep.
    #[serde(default = "default_mix")]
    pub proposal_mix: f64,
    /// Keep a field snapshot every this many sweeps (among recorded sweeps).
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_local")]
    pub local_move: String,
    #[serde(default = "default_global")]
    pub global_move: String,
}

fn one() -> usize {
    1
}
fn default_mix() -> f64 {
    0.2
}
fn default_local() -> String {
    "single_site".into()
}
fn default_global() -> String {
    "monolayer".into()
}

impl ChainConfig {
    pub fn new(params: ModelParams, sweeps: usize, seed: u64) -> Self {
        ChainConfig {
            params,
            sweeps,
            burn_in: 0,
            thinning: 1,
            seed,
            tail_mode: TailMode::Gaussian,
            proposal_mix: default_mix(),
            snapshot_every: None,
            local_move: default_local(),
            global_move: default_global(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.proposal_mix) {
            return Err(Error::InvalidParameter(format!("proposal_mix = {}", self.proposal_mix)));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidParameter("snapshot_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleRecord {
    pub sweep: usize,
    pub alpha: i64,
    pub energy: f64,
    pub n_large: usize,
    #[serde(skip)]
    pub snapshot: Option<HeightField>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MoveStats {
    pub local_attempts: u64,
    pub local_accepts: u64,
    pub global_attempts: u64,
    pub global_accepts: u64,
}

impl MoveStats {
    pub fn local_rate(&self) -> f64 {
        self.local_accepts as f64 / self.local_attempts.max(1) as f64
    }
    pub fn global_rate(&self) -> f64 {
        self.global_accepts as f64 / self.global_attempts.max(1) as f64
    }
}

struct TailCache {
    tail: Box<dyn BulkTail>,
    memo: Option<HashMap<i64, f64>>,
}

impl TailCache {
    fn new(tail: Box<dyn BulkTail>) -> Self {
        let memo = (tail.mode() == TailMode::Exact).then(HashMap::new);
        TailCache { tail, memo }
    }

    fn get(&mut self, alpha: i64) -> f64 {
        match &mut self.memo {
            None => self.tail.log_tail(alpha),
            Some(m) => *m.entry(alpha).or_insert_with(|| self.tail.log_tail(alpha)),
        }
    }
}

/// `next - cur` for log weights, with zero-weight states handled: moving
/// into one is impossible, moving out of one is always accepted.
fn log_weight_change(next: f64, cur: f64) -> f64 {
    if next == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if cur == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        next - cur
    }
}

fn weight_ratio(next: f64, cur: f64) -> f64 {
    log_weight_change(next, cur).exp()
}

/// Bits of the acceptance word consumed before refining.
const LEAD_BITS: i32 = 24;

#[cold]
#[inline(never)]
fn refine(frac: f64, rng: &mut ChainRng) -> bool {
    rng.gen::<f64>() < frac
}

/// Acceptance cutoffs for single-site moves, indexed by direction (up,
/// down) and by the number `c` of neighbours that make the move cost
/// `2c - 4` in gradient. With the acceptance uniform written as
/// `(x + U) / 2^LEAD_BITS`, a move is accepted when `x < cut`, rejected
/// when `x > cut` and decided by `U < frac` when `x == cut`.
#[derive(Clone, Copy, Debug, Default)]
struct FlipCutoffs {
    cut: [[u32; 5]; 2],
    frac: [[f64; 5]; 2],
}

impl FlipCutoffs {
    fn new(beta: f64, ratio_up: f64, ratio_down: f64) -> Self {
        let scale = 2f64.powi(LEAD_BITS);
        let mut t = FlipCutoffs::default();
        for (dir, tail) in [ratio_up, ratio_down].into_iter().enumerate() {
            for c in 0..5 {
                let r = (-beta * (2.0 * c as f64 - 4.0)).exp() * tail * scale;
                if r >= scale {
                    t.cut[dir][c] = 1 << LEAD_BITS;
                } else {
                    let k = r.floor();
                    t.cut[dir][c] = k as u32;
                    t.frac[dir][c] = r - k;
                }
            }
        }
        t
    }

    #[inline(always)]
    fn accept(&self, dir: usize, c: usize, x: u32, rng: &mut ChainRng) -> bool {
        let cut = self.cut[dir][c];
        if x < cut {
            true
        } else if x > cut {
            false
        } else {
            refine(self.frac[dir][c], rng)
        }
    }
}

/// A field with its running gradient sum, signed volume and tail values.
pub struct ChainState {
    params: ModelParams,
    field: HeightField,
    sites: Vec<u32>,
    bound: i32,
    grad: u64,
    alpha: i64,
    tail: TailCache,
    log_tail: f64,
    cutoffs: FlipCutoffs,
    pub stats: MoveStats,
}

impl ChainState {
    pub fn new(params: &ModelParams, mode: TailMode, field: HeightField) -> Result<Self> {
        params.validate()?;
        if field.n() != params.n {
            return Err(Error::InvalidParameter(format!("field has N = {}, params N = {}", field.n(), params.n)));
        }
        let side = field.side();
        let sites = (0..side * side).map(|k| field.index(k % side, k / side) as u32).collect();
        let mut s = ChainState {
            params: params.clone(),
            bound: field.bound(),
            grad: field.gradient_sum(),
            alpha: field.signed_volume(),
            field,
            sites,
            tail: TailCache::new(make_tail(params, mode)?),
            log_tail: 0.0,
            cutoffs: FlipCutoffs::default(),
            stats: MoveStats::default(),
        };
        s.refresh_tail();
        Ok(s)
    }

    pub fn flat(params: &ModelParams, mode: TailMode) -> Result<Self> {
        ChainState::new(params, mode, HeightField::flat(params.n)?)
    }

    #[inline(never)]
    fn refresh_tail(&mut self) {
        self.log_tail = self.tail.get(self.alpha);
        let up = weight_ratio(self.tail.get(self.alpha + 1), self.log_tail);
        let down = weight_ratio(self.tail.get(self.alpha - 1), self.log_tail);
        self.cutoffs = FlipCutoffs::new(self.params.beta, up, down);
    }

    pub fn field(&self) -> &HeightField {
        &self.field
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn gradient_sum(&self) -> u64 {
        self.grad
    }

    pub fn energy(&self) -> f64 {
        self.params.beta * self.grad as f64
    }

    pub fn alpha(&self) -> i64 {
        self.alpha
    }

    pub fn log_weight(&self) -> f64 {
        -self.energy() + self.log_tail
    }

    pub fn sites(&self) -> usize {
        self.sites.len()
    }

    /// Compares the running totals against a full recomputation.
    pub fn verify(&self) -> Result<()> {
        let g = self.field.gradient_sum();
        let a = self.field.signed_volume();
        if g != self.grad || a != self.alpha {
            return Err(Error::InvalidParameter(format!(
                "bookkeeping drift: gradient {} vs {g}, alpha {} vs {a}",
                self.grad, self.alpha
            )));
        }
        Ok(())
    }

    /// Proposes `h(x) -> h(x) +- 1` at interior site `site`.
    pub fn single_site(&mut self, site: usize, up: bool, rng: &mut ChainRng) -> bool {
        let x = rng.next_u32() >> (32 - LEAD_BITS);
        self.stats.local_attempts += 1;
        let idx = self.sites[site] as usize;
        let ok = self.flip(idx, up, x, rng);
        self.stats.local_accepts += ok as u64;
        ok
    }

    /// `attempts` uniformly placed single-site proposals; returns the number
    /// accepted. Each attempt consumes one word: bit 0 picks the direction,
    /// bits 1..20 the column, bits 20..39 the row and the top 24 bits lead
    /// the acceptance uniform.
    pub fn single_site_run(&mut self, attempts: u64, rng: &mut ChainRng) -> u64 {
        const MASK: u64 = (1 << 19) - 1;
        let side = self.field.side() as u64;
        let stride = self.field.stride();
        let mut accepted = 0;
        for _ in 0..attempts {
            let w = rng.next_u64();
            let ix = (((w >> 1) & MASK) * side) >> 19;
            let iy = (((w >> 20) & MASK) * side) >> 19;
            let idx = (iy as usize + 1) * stride + ix as usize + 1;
            accepted += self.flip(idx, w & 1 == 1, (w >> 40) as u32, rng) as u64;
        }
        self.stats.local_attempts += attempts;
        self.stats.local_accepts += accepted;
        accepted
    }

    #[inline(always)]
    fn flip(&mut self, idx: usize, up: bool, x: u32, rng: &mut ChainRng) -> bool {
        let s = self.field.stride();
        let near = &self.field.raw()[idx - s..=idx + s];
        let h = near[s];
        let nh = if up { h + 1 } else { h - 1 };
        if nh.abs() > self.bound {
            return false;
        }
        let ys = [near[s - 1], near[s + 1], near[0], near[2 * s]];
        // each neighbour on the far side of the move adds one to the gradient
        let below = ys.iter().map(|&y| (y <= h) as usize).sum::<usize>();
        let above = ys.iter().map(|&y| (y >= h) as usize).sum::<usize>();
        let c = if up { below } else { above };
        if !self.cutoffs.accept(!up as usize, c, x, rng) {
            return false;
        }
        self.field.raw_mut()[idx] = nh;
        self.grad = (self.grad as i64 + 2 * c as i64 - 4) as u64;
        self.alpha += if up { 1 } else { -1 };
        self.refresh_tail();
        true
    }

    /// A uniformly placed single-site proposal.
    pub fn metropolis_step(&mut self, rng: &mut ChainRng) -> bool {
        let site = rng.gen_range(0..self.sites.len());
        let up = rng.gen::<bool>();
        self.single_site(site, up, rng)
    }

    /// One monolayer proposal.
    pub fn monolayer_step(&mut self, rng: &mut ChainRng) -> bool {
        self.stats.global_attempts += 1;
        let side = self.field.side();
        let contours = extract_contours(&self.field);
        let sign = if rng.gen::<bool>() { 1 } else { -1 };
        let (region, forward) = if contours.is_empty() {
            let l = rng.gen_range(1..=side);
            let x0 = rng.gen_range(0..=side - l);
            let y0 = rng.gen_range(0..=side - l);
            (square_region(side, x0, y0, l), 0.5 * square_probability(side, l))
        } else {
            let g = rng.gen_range(0..contours.len());
            let region = contours.contours[g].interior.clone();
            let m = multiplicity(&contours, &region);
            (region, 0.5 * m as f64 / contours.len() as f64)
        };
        let Some(dg) = region_gradient_change(&self.field, &region, sign) else {
            return false;
        };
        let new_alpha = self.alpha + sign as i64 * region.len() as i64;
        let log_pi = -self.params.beta * dg as f64 + log_weight_change(self.tail.get(new_alpha), self.log_tail);
        let u = rng.gen::<f64>();
        // the reverse proposal probability is at most 1/2
        if u >= (log_pi + (0.5 / forward).ln()).exp() {
            return false;
        }
        shift_region(&mut self.field, &region, sign);
        let new_grad = (self.grad as i64 + dg) as u64;
        let reverse = if new_grad == 0 {
            square_side(side, &region).map_or(0.0, |l| 0.5 * square_probability(side, l))
        } else {
            let after = extract_contours(&self.field);
            0.5 * multiplicity(&after, &region) as f64 / after.len() as f64
        };
        if u < (log_pi + (reverse / forward).ln()).exp() {
            self.grad = new_grad;
            self.alpha = new_alpha;
            self.refresh_tail();
            self.stats.global_accepts += 1;
            true
        } else {
            shift_region(&mut self.field, &region, -sign);
            false
        }
    }
}

/// Cells of the `l x l` square with south-west cell `(x0, y0)`, as
/// `iy * side + ix`, sorted.
pub fn square_region(side: usize, x0: usize, y0: usize, l: usize) -> Vec<u32> {
    let mut r = Vec::with_capacity(l * l);
    for iy in y0..y0 + l {
        for ix in x0..x0 + l {
            r.push((iy * side + ix) as u32);
        }
    }
    r
}

/// Probability of seeding one particular square of side `l`.
pub fn square_probability(side: usize, l: usize) -> f64 {
    let places = (side - l + 1) as f64;
    1.0 / (side as f64 * places * places)
}

/// Side length if `region` (sorted) is a full axis-parallel square.
pub fn square_side(side: usize, region: &[u32]) -> Option<usize> {
    let (first, last) = (*region.first()? as usize, *region.last()? as usize);
    let (x0, y0, x1, y1) = (first % side, first / side, last % side, last / side);
    if x1 < x0 || x1 - x0 != y1 - y0 {
        return None;
    }
    let l = x1 - x0 + 1;
    (region.len() == l * l && region == square_region(side, x0, y0, l).as_slice()).then_some(l)
}

/// Number of contours whose interior equals `region`.
pub fn multiplicity(set: &ContourSet, region: &[u32]) -> usize {
    set.contours.iter().filter(|c| c.interior.len() == region.len() && c.interior == region).count()
}

/// Change of the gradient sum when `region` is shifted by `sign`, or `None`
/// when a height would leave its allowed range.
pub fn region_gradient_change(field: &HeightField, region: &[u32], sign: i32) -> Option<i64> {
    let side = field.side();
    let bound = field.bound();
    let mut inside = vec![false; field.raw().len()];
    for &c in region {
        let i = field.index(c as usize % side, c as usize / side);
        if (field.raw()[i] + sign).abs() > bound {
            return None;
        }
        inside[i] = true;
    }
    let s = field.stride();
    let d = field.raw();
    let mut dg = 0i64;
    for &c in region {
        let i = field.index(c as usize % side, c as usize / side);
        let h = d[i];
        for j in [i - 1, i + 1, i - s, i + s] {
            if !inside[j] {
                dg += ((h + sign - d[j]).abs() - (h - d[j]).abs()) as i64;
            }
        }
    }
    Some(dg)
}

pub fn shift_region(field: &mut HeightField, region: &[u32], sign: i32) {
    let side = field.side();
    for &c in region {
        let i = field.index(c as usize % side, c as usize / side);
        field.raw_mut()[i] += sign;
    }
}

/// One monolayer proposal out of a state, with its probability.
#[derive(Clone, Debug, PartialEq)]
pub struct MonolayerProposal {
    pub region: Vec<u32>,
    pub sign: i32,
    pub probability: f64,
}

/// Every monolayer proposal out of `field`, identical ones merged.
pub fn monolayer_proposals(field: &HeightField) -> Vec<MonolayerProposal> {
    let side = field.side();
    let contours = extract_contours(field);
    let mut out: BTreeMap<(Vec<u32>, i32), f64> = BTreeMap::new();
    if contours.is_empty() {
        for l in 1..=side {
            for y0 in 0..=side - l {
                for x0 in 0..=side - l {
                    let r = square_region(side, x0, y0, l);
                    for sign in [1, -1] {
                        *out.entry((r.clone(), sign)).or_default() += 0.5 * square_probability(side, l);
                    }
                }
            }
        }
    } else {
        let k = contours.len() as f64;
        for c in &contours.contours {
            for sign in [1, -1] {
                *out.entry((c.interior.clone(), sign)).or_default() += 0.5 / k;
            }
        }
    }
    out.into_iter().map(|((region, sign), probability)| MonolayerProposal { region, sign, probability }).collect()
}

/// Metropolis-Hastings acceptance probability of shifting `region` by
/// `sign`, from direct weights of both states.
pub fn monolayer_acceptance(field: &HeightField, params: &ModelParams, mode: TailMode, region: &[u32], sign: i32) -> Result<f64> {
    let tail = make_tail(params, mode)?;
    let forward = monolayer_proposals(field)
        .into_iter()
        .find(|p| p.region == region && p.sign == sign)
        .map_or(0.0, |p| p.probability);
    if forward == 0.0 {
        return Ok(0.0);
    }
    let mut next = field.clone();
    if region_gradient_change(field, region, sign).is_none() {
        return Ok(0.0);
    }
    shift_region(&mut next, region, sign);
    let reverse = monolayer_proposals(&next)
        .into_iter()
        .find(|p| p.region == region && p.sign == -sign)
        .map_or(0.0, |p| p.probability);
    let lw = |f: &HeightField| -params.beta * f.gradient_sum() as f64 + tail.log_tail(f.signed_volume());
    let ratio = weight_ratio(lw(&next), lw(field)) * reverse / forward;
    Ok(ratio.min(1.0))
}

/// A proposal kernel, looked up by name.
pub trait Move: Send + Sync {
    fn name(&self) -> &'static str;

    fn attempt(&self, state: &mut ChainState, rng: &mut ChainRng) -> bool;

    /// `attempts` consecutive attempts; returns the number accepted.
    fn run(&self, state: &mut ChainState, rng: &mut ChainRng, attempts: u64) -> u64 {
        (0..attempts).filter(|_| self.attempt(state, rng)).count() as u64
    }
}

pub struct SingleSiteMove;

impl Move for SingleSiteMove {
    fn name(&self) -> &'static str {
        "single_site"
    }

    fn attempt(&self, state: &mut ChainState, rng: &mut ChainRng) -> bool {
        state.single_site_run(1, rng) == 1
    }

    fn run(&self, state: &mut ChainState, rng: &mut ChainRng, attempts: u64) -> u64 {
        state.single_site_run(attempts, rng)
    }
}

pub struct MonolayerMove;

impl Move for MonolayerMove {
    fn name(&self) -> &'static str {
        "monolayer"
    }

    fn attempt(&self, state: &mut ChainState, rng: &mut ChainRng) -> bool {
        state.monolayer_step(rng)
    }
}

#[derive(Clone, Default)]
pub struct MoveRegistry {
    moves: BTreeMap<String, Arc<dyn Move>>,
}

impl MoveRegistry {
    pub fn with_builtins() -> Self {
        let mut r = MoveRegistry::default();
        r.register(Arc::new(SingleSiteMove));
        r.register(Arc::new(MonolayerMove));
        r
    }

    pub fn register(&mut self, mv: Arc<dyn Move>) {
        self.moves.insert(mv.name().to_string(), mv);
    }

    pub fn names(&self) -> Vec<&str> {
        self.moves.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Move>> {
        self.moves
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownFamily(name.to_string(), self.names().join(", ")))
    }
}

/// Number of large level lines of `field`.
pub fn large_count(field: &HeightField, eps: f64) -> usize {
    extract_contours(field).classify(eps).count(ContourClass::Large)
}

pub struct ChainRun {
    pub chain: u64,
    pub records: Vec<SampleRecord>,
    pub stats: MoveStats,
    pub final_field: HeightField,
}

/// Runs chain 0 from the flat field.
pub fn run_chain(config: &ChainConfig) -> Result<ChainRun> {
    run_chain_from(config, 0, None)
}

/// Runs chain `chain` (its own random stream) from `start` or from flat.
pub fn run_chain_from(config: &ChainConfig, chain: u64, start: Option<&HeightField>) -> Result<ChainRun> {
    config.validate()?;
    let registry = MoveRegistry::with_builtins();
    let local = registry.get(&config.local_move)?;
    let global = registry.get(&config.global_move)?;
    let field = match start {
        Some(f) => f.clone(),
        None => HeightField::flat(config.params.n)?,
    };
    let mut state = ChainState::new(&config.params, config.tail_mode, field)?;
    let mut rng = chain_rng(config.seed, chain);
    let n_sites = state.sites() as u64;
    // Each attempt is global with probability `p`; the run of local attempts
    // before the next global one is geometric.
    let p = config.proposal_mix / n_sites as f64;
    let draw_gap = |rng: &mut ChainRng| -> u64 {
        if p <= 0.0 {
            u64::MAX
        } else if p >= 1.0 {
            0
        } else {
            let g = (-rng.gen::<f64>()).ln_1p() / (-p).ln_1p();
            if g >= u64::MAX as f64 { u64::MAX } else { g as u64 }
        }
    };
    let mut gap = draw_gap(&mut rng);
    let mut records = Vec::new();
    for sweep in 1..=config.sweeps {
        let mut left = n_sites;
        while left > 0 {
            if gap == 0 {
                global.attempt(&mut state, &mut rng);
                gap = draw_gap(&mut rng);
                left -= 1;
            } else {
                let k = gap.min(left);
                local.run(&mut state, &mut rng, k);
                gap -= k;
                left -= k;
            }
        }
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thinning == 0 {
            debug_assert!(state.verify().is_ok());
            let snapshot = config.snapshot_every.filter(|k| sweep % k == 0).map(|_| state.field().clone());
            records.push(SampleRecord {
                sweep,
                alpha: state.alpha(),
                energy: state.energy(),
                n_large: large_count(state.field(), config.params.eps),
                snapshot,
            });
        }
    }
    state.verify()?;
    log::debug!(
        "chain {chain}: local acceptance {:.4}, monolayer acceptance {:.4} over {} attempts",
        state.stats.local_rate(),
        state.stats.global_rate(),
        state.stats.global_attempts
    );
    Ok(ChainRun { chain, records, stats: state.stats, final_field: state.field })
}

/// Runs chains `0..chains` on up to `workers` threads; each chain uses its
/// own stream, so results do not depend on scheduling.
pub fn run_chains(config: &ChainConfig, chains: usize, workers: usize, start: Option<&HeightField>) -> Result<Vec<ChainRun>> {
    config.validate()?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ChainRun>>>> = Mutex::new((0..chains).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, chains.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= chains {
                    break;
                }
                let run = run_chain_from(config, i as u64, start);
                results.lock().expect("result slot poisoned")[i] = Some(run);
            });
        }
    });
    results
        .into_inner()
        .expect("result slot poisoned")
        .into_iter()
        .map(|r| r.expect("every chain ran"))
        .collect()
}

pub fn write_records_csv<W: Write>(records: &[SampleRecord], mut out: W) -> Result<()> {
    writeln!(out, "sweep,alpha,energy,n_large")?;
    for r in records {
        writeln!(out, "{},{},{},{}", r.sweep, r.alpha, r.energy, r.n_large)?;
    }
    Ok(())
}

/// Integrated autocorrelation time with a self-consistent window of five
/// times the running estimate.
pub fn autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n {
        let c = series[..n - lag].iter().zip(&series[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>()
            / (n as f64 * var);
        tau += 2.0 * c;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, beta: f64, excess: f64) -> ModelParams {
        ModelParams { n, beta, p_v: 0.25, p_s: 0.75, excess, eps: 0.25 }
    }

    #[test]
    fn square_helpers() {
        let r = square_region(7, 2, 3, 2);
        assert_eq!(r, vec![23, 24, 30, 31]);
        assert_eq!(square_side(7, &r), Some(2));
        assert_eq!(square_side(7, &[23, 24, 30]), None);
        assert_eq!(square_side(7, &[23, 31]), None);
        let total: f64 = (1..=7).map(|l| square_probability(7, l) * ((8 - l) * (8 - l)) as f64).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn proposal_probabilities_sum_to_one() {
        let f = HeightField::flat(4).unwrap();
        let s: f64 = monolayer_proposals(&f).iter().map(|p| p.probability).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let mut g = f.clone();
        g.set(1, 1, 2).unwrap();
        g.set(5, 5, -1).unwrap();
        let props = monolayer_proposals(&g);
        // levels 1 and 2 over the same cell merge
        assert_eq!(props.len(), 4);
        let s: f64 = props.iter().map(|p| p.probability).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_target_accepts_everything_in_range() {
        let p = ModelParams { beta: 1e-300, excess: -100.0, ..params(4, 1.0, 0.0) };
        let mut s = ChainState::flat(&p, TailMode::Gaussian).unwrap();
        let mut rng = chain_rng(1, 0);
        for _ in 0..1000 {
            let site = rng.gen_range(0..s.sites());
            let idx = s.sites[site] as usize;
            let h = s.field.raw()[idx];
            let up = h < 2;
            assert!(s.single_site(site, up, &mut rng));
        }
    }

    #[test]
    fn out_of_range_proposals_are_rejected() {
        let p = ModelParams { beta: 1e-300, excess: -100.0, ..params(2, 1.0, 0.0) };
        let mut s = ChainState::flat(&p, TailMode::Gaussian).unwrap();
        let mut rng = chain_rng(1, 0);
        assert!(s.single_site(4, true, &mut rng));
        assert!(!s.single_site(4, true, &mut rng));
        assert_eq!(s.field().get(1, 1), 1);
    }

    #[test]
    fn seeded_square_and_inverse_compose_to_identity() {
        let f = HeightField::flat(4).unwrap();
        let r = square_region(7, 1, 2, 3);
        let mut g = f.clone();
        shift_region(&mut g, &r, 1);
        assert_eq!(g.signed_volume(), 9);
        assert!(monolayer_proposals(&g).iter().any(|p| p.region == r && p.sign == -1));
        shift_region(&mut g, &r, -1);
        assert_eq!(g, f);
    }

    #[test]
    fn registry_lookup() {
        let r = MoveRegistry::with_builtins();
        assert_eq!(r.names(), vec!["monolayer", "single_site"]);
        assert!(matches!(r.get("swap"), Err(Error::UnknownFamily(..))));
    }

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::new(params(4, 1.0, 0.0), 10, 0);
        assert!(c.validate().is_ok());
        c.burn_in = 10;
        assert!(c.validate().is_err());
        c.burn_in = 0;
        c.thinning = 0;
        assert!(c.validate().is_err());
        c.thinning = 1;
        c.proposal_mix = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn autocorrelation_of_iid_and_constant() {
        assert_eq!(autocorrelation_time(&[3.0; 50]), 1.0);
        let mut rng = chain_rng(5, 0);
        let xs: Vec<f64> = (0..20000).map(|_| rng.gen::<f64>()).collect();
        assert!(autocorrelation_time(&xs) < 1.3);
    }
}
