//! Anisotropic surface tensions with the symmetries of the square lattice.
//!
//! A [`Norm`] is built by name through a [`NormRegistry`]; each family
//! supplies an unnormalized angular profile and the norm divides it by its
//! value along the lattice axis, so `tau(0) == 1`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Configuration of a norm: family name plus the parameters that family reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub family: String,
    /// Inverse temperature, used by `killed_walk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Inline `(theta, value)` table, used by `sampled`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    /// Plain-text `theta,value` file, used by `sampled` when `table` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
}

impl NormSpec {
    pub fn euclidean() -> Self {
        NormSpec { family: "euclidean".into(), beta: None, table: None, table_path: None }
    }

    pub fn killed_walk(beta: f64) -> Self {
        NormSpec { family: "killed_walk".into(), beta: Some(beta), table: None, table_path: None }
    }

    pub fn sampled(table: Vec<(f64, f64)>) -> Self {
        NormSpec { family: "sampled".into(), beta: None, table: Some(table), table_path: None }
    }
}

/// Unnormalized tension as a function of the normal angle.
pub trait TensionProfile: Send + Sync + fmt::Debug {
    fn raw(&self, theta: f64) -> f64;
}

/// A named constructor of tension profiles.
pub trait NormFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, spec: &NormSpec) -> Result<Box<dyn TensionProfile>>;
}

/// Normalized surface tension. Cheap to clone.
#[derive(Clone)]
pub struct Norm {
    spec: NormSpec,
    profile: Arc<dyn TensionProfile>,
    axis: f64,
}

impl fmt::Debug for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Norm").field("family", &self.spec.family).field("axis", &self.axis).finish()
    }
}

impl Norm {
    /// Normalized tension in the direction with normal angle `theta`.
    pub fn tau(&self, theta: f64) -> f64 {
        self.profile.raw(theta) / self.axis
    }

    /// Positively homogeneous extension `|v| tau(angle(v))`.
    pub fn tau_vec(&self, v: Point) -> f64 {
        let r = v.norm();
        if r == 0.0 {
            0.0
        } else {
            r * self.tau(v.angle())
        }
    }

    /// Unnormalized tension along a lattice axis.
    pub fn axis_tension(&self) -> f64 {
        self.axis
    }

    pub fn family(&self) -> &str {
        &self.spec.family
    }

    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }
}

/// Name -> family table.
pub struct NormRegistry {
    families: BTreeMap<&'static str, Box<dyn NormFamily>>,
}

impl NormRegistry {
    pub fn empty() -> Self {
        NormRegistry { families: BTreeMap::new() }
    }

    /// Registry holding `euclidean`, `killed_walk` and `sampled`.
    pub fn with_builtins() -> Self {
        let mut r = NormRegistry::empty();
        r.register(Box::new(EuclideanFamily));
        r.register(Box::new(KilledWalkFamily));
        r.register(Box::new(SampledFamily));
        r
    }

    pub fn register(&mut self, family: Box<dyn NormFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.keys().copied().collect()
    }

    pub fn build(&self, spec: &NormSpec) -> Result<Norm> {
        let family = self.families.get(spec.family.as_str()).ok_or_else(|| {
            Error::UnknownFamily(spec.family.clone(), self.names().join(", "))
        })?;
        let profile: Arc<dyn TensionProfile> = Arc::from(family.build(spec)?);
        let axis = profile.raw(0.0);
        if !(axis.is_finite() && axis > 0.0) {
            return Err(Error::NotANorm(format!("axis tension {axis}")));
        }
        Ok(Norm { spec: spec.clone(), profile, axis })
    }
}

/// Builds a norm from the built-in families.
pub fn make_norm(spec: &NormSpec) -> Result<Norm> {
    NormRegistry::with_builtins().build(spec)
}

/// Folds an angle into `[0, pi/4]` using the symmetries of the square.
pub fn fundamental_angle(theta: f64) -> f64 {
    let phi = theta.rem_euclid(FRAC_PI_2);
    if phi > FRAC_PI_4 {
        FRAC_PI_2 - phi
    } else {
        phi
    }
}

#[derive(Debug)]
struct Isotropic;

impl TensionProfile for Isotropic {
    fn raw(&self, _theta: f64) -> f64 {
        1.0
    }
}

struct EuclideanFamily;

impl NormFamily for EuclideanFamily {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn build(&self, _spec: &NormSpec) -> Result<Box<dyn TensionProfile>> {
        Ok(Box::new(Isotropic))
    }
}

/// Support function of the convex set `{u : 2z (cosh u1 + cosh u2) <= 1}`
/// with `z = exp(-beta)`.
#[derive(Debug)]
pub struct KilledWalk {
    /// `1 / (2z)`
    level: f64,
    /// Largest first coordinate on the boundary.
    t_max: f64,
}

impl KilledWalk {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 2.0 * LN_2) {
            return Err(Error::InvalidParameter(format!(
                "killed_walk needs beta > ln 4, got {beta}"
            )));
        }
        let level = 0.5 * beta.exp();
        Ok(KilledWalk { level, t_max: (level - 1.0).acosh() })
    }

    /// Second boundary coordinate as a function of the first.
    fn upper(&self, t: f64) -> f64 {
        (self.level - t.cosh()).max(1.0).acosh()
    }
}

impl TensionProfile for KilledWalk {
    fn raw(&self, theta: f64) -> f64 {
        let c = theta.cos().abs();
        let s = theta.sin().abs();
        if s == 0.0 {
            return self.t_max * c;
        }
        if c == 0.0 {
            return self.t_max * s;
        }
        // The supporting point has gradient (sinh u1, sinh u2) parallel to (c, s).
        let (mut lo, mut hi) = (0.0, self.t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if c * self.upper(mid).sinh() - s * mid.sinh() > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        t * c + self.upper(t) * s
    }
}

struct KilledWalkFamily;

impl NormFamily for KilledWalkFamily {
    fn name(&self) -> &'static str {
        "killed_walk"
    }

    fn build(&self, spec: &NormSpec) -> Result<Box<dyn TensionProfile>> {
        let beta = spec
            .beta
            .ok_or_else(|| Error::InvalidParameter("killed_walk needs `beta`".into()))?;
        Ok(Box::new(KilledWalk::new(beta)?))
    }
}

/// Profile given by samples on `[0, pi/4]` and extended by symmetry.
/// Between neighbouring sample directions the homogeneous extension is
/// linear, so the Wulff shape is a polygon with one edge per sample.
#[derive(Debug)]
pub struct SampledProfile {
    angles: Vec<f64>,
    values: Vec<f64>,
}

impl SampledProfile {
    /// Builds the profile from `(theta, value)` pairs. Angles anywhere on the
    /// circle are folded into `[0, pi/4]`; folded duplicates must agree.
    pub fn new(table: &[(f64, f64)]) -> Result<Self> {
        let mut folded: Vec<(f64, f64, f64)> = Vec::with_capacity(table.len());
        for &(theta, value) in table {
            if !(theta.is_finite() && value.is_finite() && value > 0.0) {
                return Err(Error::NotANorm(format!("entry ({theta}, {value})")));
            }
            folded.push((fundamental_angle(theta), value, theta));
        }
        folded.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut angles: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (phi, value, theta) in folded {
            if let Some(&last) = angles.last() {
                if (phi - last).abs() < 1e-9 {
                    let prev = *values.last().unwrap();
                    if (prev - value).abs() > 1e-9 * prev.max(value) {
                        return Err(Error::AsymmetricTable(format!(
                            "theta = {theta} maps onto {phi} with {value}, already {prev}"
                        )));
                    }
                    continue;
                }
            }
            angles.push(phi);
            values.push(value);
        }
        if angles.first().map_or(true, |&a| a > 1e-9) {
            return Err(Error::InvalidParameter("tension table must contain theta = 0".into()));
        }
        angles[0] = 0.0;
        // Mirror onto [0, pi/2] so every query falls between two nodes.
        let n = angles.len();
        for i in (0..n).rev() {
            let m = FRAC_PI_2 - angles[i];
            if m - angles[angles.len() - 1] > 1e-12 {
                angles.push(m);
                values.push(values[i]);
            }
        }
        let profile = SampledProfile { angles, values };
        profile.check_triangle_inequality()?;
        Ok(profile)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SampledProfile::new(&parse_table(&text)?)
    }

    fn check_triangle_inequality(&self) -> Result<()> {
        let k = 256;
        let dirs: Vec<Point> = (0..k)
            .map(|i| Point::polar(2.0 * std::f64::consts::PI * i as f64 / k as f64))
            .collect();
        let f = |v: Point| v.norm() * self.raw(v.angle());
        for &u in &dirs {
            for &v in &dirs {
                let lhs = f(u + v);
                let rhs = f(u) + f(v);
                if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::NotANorm(format!(
                        "triangle inequality fails for directions {:.4} and {:.4}",
                        u.angle(),
                        v.angle()
                    )));
                }
            }
        }
        Ok(())
    }
}

impl TensionProfile for SampledProfile {
    fn raw(&self, theta: f64) -> f64 {
        let phi = fundamental_angle(theta);
        let i = self.angles.partition_point(|&a| a <= phi).clamp(1, self.angles.len() - 1);
        let (a0, a1) = (self.angles[i - 1], self.angles[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        (v0 * (a1 - phi).sin() + v1 * (phi - a0).sin()) / (a1 - a0).sin()
    }
}

/// Parses `theta,value` lines; blank lines, `#` comments and a non-numeric
/// header line are skipped.
pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty());
        let (a, b) = (parts.next(), parts.next());
        match (a.map(str::parse::<f64>), b.map(str::parse::<f64>)) {
            (Some(Ok(t)), Some(Ok(v))) => out.push((t, v)),
            _ if out.is_empty() && lineno == 0 => continue,
            _ => return Err(Error::Parse(format!("line {}: `{line}`", lineno + 1))),
        }
    }
    Ok(out)
}

struct SampledFamily;

impl NormFamily for SampledFamily {
    fn name(&self) -> &'static str {
        "sampled"
    }

    fn build(&self, spec: &NormSpec) -> Result<Box<dyn TensionProfile>> {
        match (&spec.table, &spec.table_path) {
            (Some(t), _) => Ok(Box::new(SampledProfile::new(t)?)),
            (None, Some(p)) => Ok(Box::new(SampledProfile::from_file(p)?)),
            (None, None) => Err(Error::InvalidParameter(
                "sampled needs `table` or `table_path`".into(),
            )),
        }
    }
}
