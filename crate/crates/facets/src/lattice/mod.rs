//! Height fields on the box `{-N..N}^2` with zero boundary, their energy,
//! level-line contours and the bulk tail weight.

mod contour;
mod tail;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use contour::{
    classify_length, extract_contours, ContourClass, Contour, ContourSet, ContourRecord,
};
pub use tail::{bulk_log_tail, exact_log_tail, make_tail, BulkTail, ExactTail, GaussianTail, TailMode, EXACT_VOLUME_LIMIT};

/// Physical parameters of the lattice model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Half side of the box; must be even.
    pub n: usize,
    pub beta: f64,
    pub p_v: f64,
    pub p_s: f64,
    /// Bulk excess `A`.
    pub excess: f64,
    /// Large-contour threshold coefficient.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    0.25
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("N must be even and positive, got {}", self.n)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {}", self.beta)));
        }
        if !(0.0 < self.p_v && self.p_v < self.p_s && self.p_s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < p_v < p_s < 1, got p_v = {}, p_s = {}",
                self.p_v, self.p_s
            )));
        }
        if !self.excess.is_finite() {
            return Err(Error::InvalidParameter(format!("A = {}", self.excess)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {}", self.eps)));
        }
        Ok(())
    }

    /// `p_s - p_v`
    pub fn delta_p(&self) -> f64 {
        self.p_s - self.p_v
    }

    /// `2 (p_s (1 - p_s) + p_v (1 - p_v))`
    pub fn variance_rate(&self) -> f64 {
        2.0 * (self.p_s * (1.0 - self.p_s) + self.p_v * (1.0 - self.p_v))
    }

    /// Diffusivity `R / Delta^2`.
    pub fn diffusivity(&self) -> f64 {
        self.variance_rate() / self.delta_p().powi(2)
    }

    /// Rescaled excess `A / Delta`.
    pub fn scaled_excess(&self) -> f64 {
        self.excess / self.delta_p()
    }

    /// Number of interior sites `(2N - 1)^2`.
    pub fn interior_sites(&self) -> usize {
        (2 * self.n - 1).pow(2)
    }

    /// Total bulk volume `|interior| * N`; half of it sits on each side of
    /// the flat interface.
    pub fn volume(&self) -> u64 {
        (self.interior_sites() * self.n) as u64
    }
}

/// Integer heights on the interior of the box, stored with a one-cell ring
/// of zeros so that every interior cell has four stored neighbours.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightField {
    n: usize,
    side: usize,
    stride: usize,
    data: Vec<i32>,
}

impl HeightField {
    pub fn flat(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("N must be even and positive, got {n}")));
        }
        let side = 2 * n - 1;
        let stride = side + 2;
        Ok(HeightField { n, side, stride, data: vec![0; stride * stride] })
    }

    /// Builds a field from row-major interior heights, south row first.
    pub fn from_rows(n: usize, heights: &[i32]) -> Result<Self> {
        let mut f = HeightField::flat(n)?;
        if heights.len() != f.sites() {
            return Err(Error::InvalidParameter(format!(
                "expected {} heights, got {}",
                f.sites(),
                heights.len()
            )));
        }
        for (i, &h) in heights.iter().enumerate() {
            f.set(i % f.side, i / f.side, h)?;
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Interior side length `2N - 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.side * self.side
    }

    /// Largest allowed `|h|`.
    pub fn bound(&self) -> i32 {
        (self.n / 2) as i32
    }

    /// Stride of the padded storage.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Padded storage index of interior cell `(ix, iy)`.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        (iy + 1) * self.stride + ix + 1
    }

    /// Interior coordinates of a padded index.
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.stride - 1, idx / self.stride - 1)
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> i32 {
        self.data[self.index(ix, iy)]
    }

    /// Height of a padded cell, zero on the ring; accepts `-1..=side`.
    #[inline]
    pub fn get_padded(&self, ix: isize, iy: isize) -> i32 {
        self.data[((iy + 1) as usize) * self.stride + (ix + 1) as usize]
    }

    pub fn set(&mut self, ix: usize, iy: usize, h: i32) -> Result<()> {
        if ix >= self.side || iy >= self.side {
            return Err(Error::InvalidParameter(format!("cell ({ix}, {iy}) outside the box")));
        }
        if h.abs() > self.bound() {
            return Err(Error::InvalidParameter(format!("height {h} exceeds {}", self.bound())));
        }
        let i = self.index(ix, iy);
        self.data[i] = h;
        Ok(())
    }

    /// Raw padded storage.
    pub fn raw(&self) -> &[i32] {
        &self.data
    }

    /// Mutable raw padded storage; callers keep the ring at zero and the
    /// heights within bounds.
    pub fn raw_mut(&mut self) -> &mut [i32] {
        &mut self.data
    }

    /// Interior heights, row-major, south row first.
    pub fn rows(&self) -> Vec<i32> {
        let mut v = Vec::with_capacity(self.sites());
        for iy in 0..self.side {
            for ix in 0..self.side {
                v.push(self.get(ix, iy));
            }
        }
        v
    }

    pub fn is_flat(&self) -> bool {
        self.data.iter().all(|&h| h == 0)
    }

    pub fn min_max(&self) -> (i32, i32) {
        let lo = self.data.iter().copied().min().unwrap_or(0);
        let hi = self.data.iter().copied().max().unwrap_or(0);
        (lo, hi)
    }

    /// `sum |h(x) - h(y)|` over nearest-neighbour pairs, boundary included.
    pub fn gradient_sum(&self) -> u64 {
        let s = self.stride;
        let mut total = 0u64;
        for iy in 0..=self.side {
            for ix in 0..=self.side {
                let i = iy * s + ix;
                // bonds to the east and to the north of padded cell (ix, iy)
                total += (self.data[i] - self.data[i + 1]).unsigned_abs() as u64;
                total += (self.data[i] - self.data[i + s]).unsigned_abs() as u64;
            }
        }
        total
    }

    /// `beta * gradient_sum`.
    pub fn sos_energy(&self, beta: f64) -> f64 {
        beta * self.gradient_sum() as f64
    }

    /// `alpha = sum h`.
    pub fn signed_volume(&self) -> i64 {
        self.data.iter().map(|&h| h as i64).sum()
    }

    pub fn negated(&self) -> HeightField {
        let mut f = self.clone();
        f.data.iter_mut().for_each(|h| *h = -*h);
        f
    }

    /// CSV grid with a `N=<n>` header; the first data row is the north edge.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N={}", self.n)?;
        for iy in (0..self.side).rev() {
            let row: Vec<String> = (0..self.side).map(|ix| self.get(ix, iy).to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty height field".into()))??;
        let n: usize = header
            .trim()
            .strip_prefix("N=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?;
        let mut f = HeightField::flat(n)?;
        let mut rows: Vec<Vec<i32>> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<i32>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
                .collect::<Result<Vec<i32>>>()?;
            if row.len() != f.side {
                return Err(Error::Parse(format!("row of length {} in a box of side {}", row.len(), f.side)));
            }
            rows.push(row);
        }
        if rows.len() != f.side {
            return Err(Error::Parse(format!("{} rows in a box of side {}", rows.len(), f.side)));
        }
        for (r, row) in rows.iter().enumerate() {
            let iy = f.side - 1 - r;
            for (ix, &h) in row.iter().enumerate() {
                f.set(ix, iy, h).map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        Ok(f)
    }
}
