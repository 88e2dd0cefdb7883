//! Sweep execution and CSV output.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::cli::config::Config;
use crate::cli::CliError;
use crate::error::Error;
use crate::phy::{simulate, LinkScenario};

pub const RESULTS_HEADER: [&str; 11] = [
    "scenario_id",
    "link_id",
    "filter",
    "axis",
    "axis_value",
    "ber",
    "sinr_db",
    "focusing_ratio",
    "peak_power",
    "threshold",
    "seed",
];

const SUMMARY_HEADER: [&str; 9] =
    ["filter", "axis", "axis_value", "rows", "bits", "bit_errors", "mean_ber", "ber_ci95_half_width", "mean_sinr_db"];

/// One link at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub link_id: String,
    pub filter: String,
    pub axis: String,
    pub axis_value: f64,
    pub ber: f64,
    pub sinr_db: f64,
    pub focusing_ratio: Option<f64>,
    pub peak_power: f64,
    pub threshold: f64,
    pub seed: u64,
    pub bits: usize,
    pub bit_errors: usize,
}

pub(crate) struct Point {
    scenario_id: String,
    filter: String,
    axis_value: Option<f64>,
    scenario: LinkScenario,
}

/// Expands the sweep into scenarios: axis values x recipes x seed repeats.
pub(crate) fn plan(cfg: &Config) -> Result<Vec<Point>, CliError> {
    let matrices: Vec<ChannelMatrix> = (0..cfg.repeats()).map(|r| cfg.channel_matrix(r)).collect::<Result<_, _>>()?;
    let mut points = Vec::new();
    for value in cfg.axis_values() {
        for recipe in &cfg.recipes {
            for (rep, m) in matrices.iter().enumerate() {
                let scenario = cfg.scenario(m, recipe, value, rep as u32)?;
                let filter = recipe.to_string();
                points.push(Point { scenario_id: cfg.point_label(filter.clone(), value), filter, axis_value: value, scenario });
            }
        }
    }
    Ok(points)
}

fn run_point(p: &Point, axis: &str) -> Result<Vec<ResultRow>, CliError> {
    let res = simulate(&p.scenario).map_err(|e| {
        let msg = format!("{}: {e}", p.scenario_id);
        match e {
            Error::Numerical(_) | Error::ZeroEnergy => CliError::Numerical(msg),
            _ => CliError::Config(msg),
        }
    })?;
    Ok(res
        .links
        .iter()
        .map(|l| ResultRow {
            scenario_id: p.scenario_id.clone(),
            link_id: format!("{}->{}", l.tx, l.rx),
            filter: p.filter.clone(),
            axis: axis.to_owned(),
            axis_value: p.axis_value.unwrap_or(0.0),
            ber: l.ber,
            sinr_db: l.sinr.sinr_db,
            focusing_ratio: l.focusing.map(|f| f.ratio),
            peak_power: l.peak_power,
            threshold: l.threshold,
            seed: p.scenario.bit_seed,
            bits: l.bits.len(),
            bit_errors: l.bit_errors,
        })
        .collect())
}

/// Runs every sweep point on `jobs` threads. Rows come back in plan order,
/// so the output does not depend on the thread count.
pub fn run_config(cfg: &Config, jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let points = plan(cfg)?;
    let axis = cfg.axis_label();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    let per_point: Vec<Result<Vec<ResultRow>, CliError>> =
        pool.install(|| points.par_iter().map(|p| run_point(p, axis)).collect());
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

fn float(v: f64) -> String {
    format!("{v:e}")
}

pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.link_id.clone(),
            r.filter.clone(),
            r.axis.clone(),
            r.axis_value.to_string(),
            float(r.ber),
            float(r.sinr_db),
            r.focusing_ratio.map(float).unwrap_or_default(),
            float(r.peak_power),
            float(r.threshold),
            r.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Pooled BER per (filter, axis value), with a normal-approximation 95%
/// half width.
pub fn summary_csv(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut groups: Vec<((String, String, f64), Vec<&ResultRow>)> = Vec::new();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in rows {
        let key = (r.filter.clone(), r.axis_value.to_string());
        let i = *index.entry(key).or_insert_with(|| {
            groups.push(((r.filter.clone(), r.axis.clone(), r.axis_value), Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(r);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    for ((filter, axis, value), members) in &groups {
        let bits: usize = members.iter().map(|r| r.bits).sum();
        let errors: usize = members.iter().map(|r| r.bit_errors).sum();
        let p = errors as f64 / bits as f64;
        let half = 1.96 * (p * (1.0 - p) / bits as f64).sqrt();
        let sinr = members.iter().map(|r| r.sinr_db).sum::<f64>() / members.len() as f64;
        w.write_record([
            filter.clone(),
            axis.clone(),
            value.to_string(),
            members.len().to_string(),
            bits.to_string(),
            errors.to_string(),
            float(p),
            float(half),
            float(sinr),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes through a temporary sibling file and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}
