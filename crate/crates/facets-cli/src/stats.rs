use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub count: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantiles; `None` for an empty sample.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let x = q * (v.len() - 1) as f64;
        let (i, t) = (x.floor() as usize, x.fract());
        if i + 1 < v.len() { v[i] + t * (v[i + 1] - v[i]) } else { v[i] }
    };
    Some(Quantiles { count: v.len(), min: v[0], q25: at(0.25), median: at(0.5), q75: at(0.75), max: v[v.len() - 1] })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub count: usize,
    pub samples: usize,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    /// Most frequent count; ties go to the smaller one.
    pub modal_count: Option<usize>,
    pub modal_frequency: f64,
}

pub fn histogram(counts: &[usize]) -> Histogram {
    let top = counts.iter().copied().max().map_or(0, |m| m + 1);
    let mut tally = vec![0usize; top];
    counts.iter().for_each(|&c| tally[c] += 1);
    let total = counts.len().max(1) as f64;
    let bins: Vec<HistogramBin> = tally
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(count, &k)| HistogramBin { count, samples: k, frequency: k as f64 / total })
        .collect();
    let modal = bins.iter().fold(None::<&HistogramBin>, |best, b| match best {
        Some(m) if m.samples >= b.samples => Some(m),
        _ => Some(b),
    });
    Histogram { modal_count: modal.map(|b| b.count), modal_frequency: modal.map_or(0.0, |b| b.frequency), bins }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_of_five() {
        let q = quantiles(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((q.min, q.q25, q.median, q.q75, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(quantiles(&[0.5, 1.5]).unwrap().median, 1.0);
        assert!(quantiles(&[]).is_none());
    }

    #[test]
    fn histogram_mode_prefers_smaller_count_on_ties() {
        let h = histogram(&[2, 0, 2, 0, 1]);
        assert_eq!(h.modal_count, Some(0));
        assert_eq!(h.bins.len(), 3);
        assert!((h.modal_frequency - 0.4).abs() < 1e-15);
        assert_eq!(histogram(&[]).modal_count, None);
    }
}
