//! Log-probability that the bulk holds at least the target number of
//! particles given the interface, as a function of the signed volume.

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

/// Largest box volume accepted by the exact tail.
pub const EXACT_VOLUME_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    #[default]
    Gaussian,
    Exact,
}

impl std::str::FromStr for TailMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(TailMode::Gaussian),
            "exact" => Ok(TailMode::Exact),
            other => Err(Error::InvalidParameter(format!("unknown tail mode `{other}`"))),
        }
    }
}

pub trait BulkTail: Send + Sync {
    fn mode(&self) -> TailMode;
    /// Log tail at signed volume `alpha`.
    fn log_tail(&self, alpha: i64) -> f64;
}

/// `-[(A N^2 - Delta alpha)_+]^2 / (2 N^3 R)`
#[derive(Clone, Debug)]
pub struct GaussianTail {
    target: f64,
    delta_p: f64,
    denom: f64,
}

impl GaussianTail {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.n as f64;
        GaussianTail {
            target: params.excess * n * n,
            delta_p: params.delta_p(),
            denom: 2.0 * n.powi(3) * params.variance_rate(),
        }
    }
}

impl BulkTail for GaussianTail {
    fn mode(&self) -> TailMode {
        TailMode::Gaussian
    }

    fn log_tail(&self, alpha: i64) -> f64 {
        let gap = (self.target - self.delta_p * alpha as f64).max(0.0);
        -gap * gap / self.denom
    }
}

/// Binomial convolution over the vapour volume `V0 - alpha` and the solid
/// volume `V0 + alpha`.
#[derive(Clone, Debug)]
pub struct ExactTail {
    half_volume: i64,
    p_v: f64,
    p_s: f64,
    threshold: i64,
}

impl ExactTail {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let volume = params.volume();
        if volume > EXACT_VOLUME_LIMIT {
            return Err(Error::VolumeTooLarge(volume, EXACT_VOLUME_LIMIT));
        }
        let half = (volume / 2) as i64;
        let n = params.n as f64;
        let threshold = ((params.p_s + params.p_v) * half as f64 + params.excess * n * n).ceil() as i64;
        Ok(ExactTail { half_volume: half, p_v: params.p_v, p_s: params.p_s, threshold })
    }

    pub fn threshold(&self) -> i64 {
        self.threshold
    }
}

impl BulkTail for ExactTail {
    fn mode(&self) -> TailMode {
        TailMode::Exact
    }

    fn log_tail(&self, alpha: i64) -> f64 {
        let vapour = (self.half_volume - alpha).max(0) as u64;
        let solid = (self.half_volume + alpha).max(0) as u64;
        exact_log_tail(vapour, self.p_v, solid, self.p_s, self.threshold)
    }
}

pub fn make_tail(params: &ModelParams, mode: TailMode) -> Result<Box<dyn BulkTail>> {
    Ok(match mode {
        TailMode::Gaussian => Box::new(GaussianTail::new(params)),
        TailMode::Exact => Box::new(ExactTail::new(params)?),
    })
}

pub fn bulk_log_tail(params: &ModelParams, alpha: i64, mode: TailMode) -> Result<f64> {
    Ok(make_tail(params, mode)?.log_tail(alpha))
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log pmf of `Bin(n, p)` at `0..=n`, by the ratio recursion.
fn binomial_log_pmf(n: u64, p: f64) -> Vec<f64> {
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let odds = lp - lq;
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut cur = n as f64 * lq;
    out.push(cur);
    for k in 0..n {
        cur += ((n - k) as f64 / (k + 1) as f64).ln() + odds;
        out.push(cur);
    }
    out
}

/// `log P(Bin(n_v, p_v) + Bin(n_s, p_s) >= t)`.
pub fn exact_log_tail(n_v: u64, p_v: f64, n_s: u64, p_s: f64, t: i64) -> f64 {
    if t <= 0 {
        return 0.0;
    }
    if t as u64 > n_v + n_s {
        return f64::NEG_INFINITY;
    }
    // survival of the solid count, log P(X >= j) for j in 0..=n_s
    let pmf_s = binomial_log_pmf(n_s, p_s);
    let mut surv = vec![f64::NEG_INFINITY; n_s as usize + 2];
    for j in (0..=n_s as usize).rev() {
        surv[j] = log_add(surv[j + 1], pmf_s[j]);
    }
    let pmf_v = binomial_log_pmf(n_v, p_v);
    let mut acc = f64::NEG_INFINITY;
    for (y, &lp) in pmf_v.iter().enumerate() {
        let need = t - y as i64;
        let s = if need <= 0 {
            0.0
        } else if need as u64 > n_s {
            continue;
        } else {
            surv[need as usize]
        };
        acc = log_add(acc, lp + s);
    }
    acc.min(0.0)
}
