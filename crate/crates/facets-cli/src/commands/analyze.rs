//! `facets analyze`: level-line statistics of saved height fields.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use facets::geometry::Polygon;
use facets::lattice::HeightField;
use facets::metrics::{epigraph_report, large_level_lines, StackPrediction};
use facets::stack::areas_by_level;
use serde::{Deserialize, Serialize};

use crate::config::config_error;
use crate::provenance::{write_json, RunDir};
use crate::stats::{histogram, quantiles, Histogram, Quantiles};

/// Prediction file: layers outermost first, in `[-1, 1]^2` box units.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionFile {
    pub layers: Vec<Polygon>,
}

pub fn load_prediction(path: &Path) -> anyhow::Result<StackPrediction> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let p: PredictionFile = serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    Ok(StackPrediction { layers: p.layers })
}

#[derive(Serialize)]
struct SnapshotReport {
    file: String,
    n: usize,
    large_contours: usize,
    /// Areas of the nested large level lines, outermost level first.
    #[serde(skip_serializing_if = "Option::is_none")]
    areas_by_level: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epigraph_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Skipped {
    file: String,
    reason: String,
}

#[derive(Serialize)]
struct Report {
    snapshot_dir: String,
    eps: f64,
    snapshots: usize,
    skipped: Vec<Skipped>,
    large_contours: Histogram,
    epigraph_distance: Option<Quantiles>,
    per_snapshot: Vec<SnapshotReport>,
}

/// `*.csv` files under `dir`, sorted by path.
fn snapshot_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(config_error(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn run(dir: &RunDir, snapshots: &Path, eps: f64, prediction: Option<&StackPrediction>) -> anyhow::Result<()> {
    let files = snapshot_files(snapshots)?;
    let mut per_snapshot = Vec::new();
    let mut skipped = Vec::new();
    for path in files {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let field = match File::open(&path).map_err(facets::Error::from).and_then(|f| HeightField::read_csv(BufReader::new(f))) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped.push(Skipped { file: name, reason: e.to_string() });
                continue;
            }
        };
        let loops = large_level_lines(&field, eps);
        let mut rep = SnapshotReport {
            file: name,
            n: field.n(),
            large_contours: loops.len(),
            areas_by_level: None,
            epigraph_distance: None,
            error: None,
        };
        match areas_by_level(&loops) {
            Ok(a) => rep.areas_by_level = Some(a),
            Err(e) => rep.error = Some(e.to_string()),
        }
        if let (Some(p), None) = (prediction, &rep.error) {
            match epigraph_report(&loops, p) {
                Ok(r) => rep.epigraph_distance = Some(r.epigraph_distance),
                Err(e) => rep.error = Some(e.to_string()),
            }
        }
        per_snapshot.push(rep);
    }
    if !skipped.is_empty() {
        log::warn!("{} corrupt snapshot(s) skipped", skipped.len());
    }
    let counts: Vec<usize> = per_snapshot.iter().map(|r| r.large_contours).collect();
    let distances: Vec<f64> = per_snapshot.iter().filter_map(|r| r.epigraph_distance).collect();
    let report = Report {
        snapshot_dir: snapshots.display().to_string(),
        eps,
        snapshots: per_snapshot.len(),
        skipped,
        large_contours: histogram(&counts),
        epigraph_distance: quantiles(&distances),
        per_snapshot,
    };
    write_json(&dir.path("report.json"), &report)
}
