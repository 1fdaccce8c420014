//! Shared pieces of the acceptance suite in `tests/acceptance.rs`: the
//! exact law of the N = 2 box and result reporting.

use std::io::Write;

use facets::lattice::{bulk_log_tail, HeightField, ModelParams, TailMode};

/// Number of height fields on the N = 2 box (nine sites, heights -1..=1).
pub const SMALL_BOX_STATES: usize = 19683;

pub fn decode_small(mut code: usize) -> HeightField {
    let mut rows = vec![0; 9];
    for h in rows.iter_mut() {
        *h = (code % 3) as i32 - 1;
        code /= 3;
    }
    HeightField::from_rows(2, &rows).expect("nine heights in range")
}

pub fn encode_small(field: &HeightField) -> usize {
    field.rows().iter().rev().fold(0, |acc, &h| acc * 3 + (h + 1) as usize)
}

/// `-beta * gradient_sum + bulk_log_tail(alpha)`, recomputed from scratch.
pub fn log_weight(field: &HeightField, params: &ModelParams, mode: TailMode) -> f64 {
    let tail = bulk_log_tail(params, field.signed_volume(), mode).expect("tail mode available");
    -params.beta * field.gradient_sum() as f64 + tail
}

/// Normalized target law over every N = 2 field, by enumeration.
pub fn small_box_law(params: &ModelParams) -> Vec<f64> {
    assert_eq!(params.n, 2);
    let lw: Vec<f64> = (0..SMALL_BOX_STATES).map(|c| log_weight(&decode_small(c), params, TailMode::Exact)).collect();
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// One acceptance criterion: named checks, then a single verdict line.
/// Everything is written to stdout in one piece when the criterion
/// finishes, so it shows up even when the test harness captures output and
/// does not interleave with criteria running on other threads.
pub struct Criterion {
    label: String,
    items: Vec<(bool, String)>,
}

impl Criterion {
    pub fn new(label: &str) -> Self {
        Criterion { label: label.to_string(), items: Vec::new() }
    }

    pub fn check(&mut self, pass: bool, detail: impl Into<String>) -> bool {
        self.items.push((pass, detail.into()));
        pass
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|(ok, _)| *ok)
    }

    /// Prints the verdict line and the checks below it; returns the verdict.
    pub fn finish(self, summary: &str) -> bool {
        let pass = self.passed();
        let mut text = format!("{} {}: {summary}\n", self.label, if pass { "PASS" } else { "FAIL" });
        for (ok, detail) in &self.items {
            text += &format!("    [{}] {detail}\n", if *ok { "ok" } else { "FAIL" });
        }
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(text.as_bytes());
        let _ = out.flush();
        pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_roundtrip() {
        for c in [0, 1, 777, SMALL_BOX_STATES - 1] {
            assert_eq!(encode_small(&decode_small(c)), c);
        }
    }

    #[test]
    fn law_is_normalized() {
        let p = ModelParams { n: 2, beta: 1.0, p_v: 0.2, p_s: 0.7, excess: 0.5, eps: 0.5 };
        let law = small_box_law(&p);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(total_variation(&law, &law), 0.0);
    }
}
