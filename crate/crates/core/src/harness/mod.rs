//! Experiment runner: grid sweeps over SNR, tradeoff weight, chi and channel
//! draws, written out as CSV files plus a manifest.
//!
//! Runs fan out over a rayon pool. Results are collected in grid order, so the
//! files do not depend on scheduling. Wall-clock times go to a separate
//! `*_timing.csv` file so every other file is byte-reproducible.

mod config;
mod frontier;

pub use config::{
    default_snr_grid, default_w_grid, derive_seed, ChannelKind, ExperimentConfig, ScenarioConfig,
    SolverConfig, DEFAULT_NOISE_DBW,
};
pub use frontier::{
    dominance_excess, max_relative_gap, relative_area_difference, Frontier, FrontierPoint,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::model::{Approach, PrecoderSet, RateReport};
use crate::optimizer::{run_method, IterationRecord, Method, RunTrace};

pub const SWEEP_SCHEMA: &str = "rsma-sweep/1";
pub const PRECODER_SCHEMA: &str = "rsma-precoder/1";
pub const TRACE_SCHEMA: &str = "rsma-trace/1";
pub const TIMING_SCHEMA: &str = "rsma-timing/1";
pub const MANIFEST_SCHEMA: &str = "rsma-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Tradeoff,
    EeVsSnr,
    Convergence,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::EeVsSnr => "ee-vs-snr",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Sweep => "sweep",
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::EeVsSnr => "ee_vs_snr",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Sweep => "sweep",
        }
    }

    /// Built-in configuration used when no config file is given.
    pub fn default_config(self) -> ExperimentConfig {
        match self {
            ExperimentKind::Tradeoff => {
                let mut cfg = ExperimentConfig::new(ScenarioConfig::geometric(4, &["0", "pi/9"]));
                cfg.snr_db = vec![25.0];
                cfg.approaches = vec![Approach::WeightedSum, Approach::WeightedPower];
                cfg.trials = 1;
                cfg
            }
            ExperimentKind::EeVsSnr => {
                let mut cfg = ExperimentConfig::new(ScenarioConfig::geometric(4, &["0", "pi/9"]));
                cfg.snr_db = default_snr_grid();
                cfg.w = vec![1.0];
                cfg.methods = vec![Method::RsGcp, Method::NoRsGcp, Method::RsDMmse];
                cfg.trials = 1;
                cfg
            }
            ExperimentKind::Convergence => {
                let mut cfg =
                    ExperimentConfig::new(ScenarioConfig::geometric(4, &["0", "pi/9", "2pi/9"]));
                cfg.snr_db = vec![20.0];
                cfg.w = vec![0.5];
                cfg.methods = Method::ALL.to_vec();
                cfg.trials = 1;
                cfg
            }
            ExperimentKind::Sweep => {
                let mut cfg = ExperimentConfig::new(ScenarioConfig::cscg(4, 2));
                cfg.snr_db = default_snr_grid();
                cfg.w = vec![0.0, 0.5, 1.0];
                cfg
            }
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tradeoff" => Ok(ExperimentKind::Tradeoff),
            "ee-vs-snr" => Ok(ExperimentKind::EeVsSnr),
            "convergence" => Ok(ExperimentKind::Convergence),
            "sweep" => Ok(ExperimentKind::Sweep),
            other => Err(Error::Parse(format!("unknown experiment {other:?}"))),
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub approach: Approach,
    pub method: Method,
    pub snr_db: f64,
    pub chi: f64,
    pub w: f64,
    pub trial: usize,
    pub seed: u64,
}

/// Channel seed of a trial. It is shared by every method, weight, SNR and chi
/// value, so all of them see the same draw.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[trial as u64])
}

/// Every job of the grid in output order.
pub fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &approach in &cfg.approaches {
        for &method in &cfg.methods {
            for &snr_db in &cfg.snr_db {
                for chi in cfg.chi_grid() {
                    for &w in &cfg.w {
                        for trial in 0..cfg.effective_trials() {
                            out.push(Job {
                                approach,
                                method,
                                snr_db,
                                chi,
                                w,
                                trial,
                                seed: trial_seed(cfg.seed, trial),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn scenario_for(cfg: &ExperimentConfig, job: &Job) -> Result<Scenario> {
    cfg.scenario.scenario(job.snr_db, job.chi, job.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema: String,
    pub row: usize,
    pub experiment: String,
    pub method: String,
    pub approach: String,
    pub w: f64,
    pub snr_db: f64,
    pub chi: f64,
    pub trial: usize,
    pub seed: u64,
    pub se_bits: f64,
    pub ee: f64,
    pub transmit_power_w: f64,
    pub objective: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub status: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderRecord {
    pub schema: String,
    pub row: usize,
    pub column: usize,
    pub antenna: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema: String,
    pub row: usize,
    pub method: String,
    pub iteration: usize,
    pub surrogate_objective: f64,
    pub true_objective: f64,
    pub se_bits: f64,
    pub ee: f64,
    pub transmit_power_w: f64,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub schema: String,
    pub row: usize,
    pub method: String,
    pub iterations: usize,
    pub wall_ms: f64,
}

/// Result of one grid job.
#[derive(Debug, Clone)]
pub struct JobResult {
    pub job: Job,
    pub record: SweepRecord,
    pub precoders: PrecoderSet,
    pub trace: RunTrace,
}

fn run_job(cfg: &ExperimentConfig, kind: ExperimentKind, row: usize, job: Job, record_trace: bool) -> Result<JobResult> {
    let s = scenario_for(cfg, &job)?;
    let opts = cfg.solver.run_options(record_trace);
    let trace = run_method(job.method, job.approach, job.w, &s, &opts)?;
    // reported figures always come from the model, not from solver internals
    let report = RateReport::evaluate(&trace.final_precoders, &s)?;
    let detail = match &trace.status {
        crate::optimizer::RunStatus::SolverFailure(msg) => msg.clone(),
        _ => String::new(),
    };
    let record = SweepRecord {
        schema: SWEEP_SCHEMA.into(),
        row,
        experiment: kind.name().into(),
        method: job.method.name().into(),
        approach: job.approach.name().into(),
        w: job.w,
        snr_db: job.snr_db,
        chi: job.chi,
        trial: job.trial,
        seed: job.seed,
        se_bits: report.sum_se_bits,
        ee: report.ee,
        transmit_power_w: report.transmit_power_w,
        objective: trace.final_objective,
        iterations: trace.iterations,
        outer_iterations: trace.outer_iterations,
        status: trace.status.label().into(),
        detail,
    };
    Ok(JobResult {
        job,
        record,
        precoders: trace.final_precoders.clone(),
        trace,
    })
}

/// Runs every job of the grid without touching the filesystem.
pub fn run_grid(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Vec<JobResult>> {
    cfg.validate()?;
    let record_trace = kind == ExperimentKind::Convergence;
    let jobs = match kind {
        // one run per method on the first grid point
        ExperimentKind::Convergence => {
            let mut seen = Vec::new();
            jobs(cfg)
                .into_iter()
                .filter(|j| {
                    let key = (j.approach, j.method);
                    if seen.contains(&key) {
                        false
                    } else {
                        seen.push(key);
                        true
                    }
                })
                .collect()
        }
        _ => jobs(cfg),
    };
    jobs.into_par_iter()
        .enumerate()
        .map(|(row, job)| run_job(cfg, kind, row, job, record_trace))
        .collect()
}

/// Files written by one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub kind: ExperimentKind,
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub failures: usize,
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(|e| Error::io(path, e))
}

fn precoder_rows(results: &[JobResult]) -> Vec<PrecoderRecord> {
    let mut out = Vec::new();
    for r in results {
        let m = r.precoders.matrix();
        for column in 0..m.ncols() {
            for antenna in 0..m.nrows() {
                let z = m[(antenna, column)];
                out.push(PrecoderRecord {
                    schema: PRECODER_SCHEMA.into(),
                    row: r.record.row,
                    column,
                    antenna,
                    re: z.re,
                    im: z.im,
                });
            }
        }
    }
    out
}

fn trace_rows(results: &[JobResult]) -> Vec<TraceRecord> {
    let mut out = Vec::new();
    for r in results {
        for rec in &r.trace.records {
            out.push(trace_row(r.record.row, &r.trace.method, rec));
        }
    }
    out
}

fn trace_row(row: usize, method: &str, rec: &IterationRecord) -> TraceRecord {
    TraceRecord {
        schema: TRACE_SCHEMA.into(),
        row,
        method: method.into(),
        iteration: rec.iteration,
        surrogate_objective: rec.surrogate_objective,
        true_objective: rec.true_objective,
        se_bits: rec.se_bits,
        ee: rec.ee,
        transmit_power_w: rec.transmit_power_w,
        lambda: rec.lambda,
    }
}

/// Reads back the precoder of every row from a precoder CSV.
pub fn read_precoders(path: &Path) -> Result<BTreeMap<usize, PrecoderSet>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut entries: BTreeMap<usize, Vec<PrecoderRecord>> = BTreeMap::new();
    for rec in rd.deserialize::<PrecoderRecord>() {
        let rec = rec?;
        entries.entry(rec.row).or_default().push(rec);
    }
    let mut out = BTreeMap::new();
    for (row, recs) in entries {
        let nt = recs.iter().map(|r| r.antenna).max().unwrap_or(0) + 1;
        let cols = recs.iter().map(|r| r.column).max().unwrap_or(0) + 1;
        let mut m = crate::CMatrix::zeros(nt, cols);
        for r in recs {
            m[(r.antenna, r.column)] = num_complex::Complex64::new(r.re, r.im);
        }
        out.insert(row, PrecoderSet::new(m)?);
    }
    Ok(out)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    experiment: String,
    master_seed: u64,
    trial_seeds: Vec<u64>,
    files: Vec<String>,
    rows: usize,
    failures: usize,
    config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    schema: String,
    experiments: Vec<ManifestEntry>,
}

fn update_manifest(dir: &Path, entry: ManifestEntry) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest = match std::fs::read_to_string(&path) {
        Ok(text) => toml::from_str::<Manifest>(&text).map_err(|e| Error::Parse(e.to_string()))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest {
            schema: MANIFEST_SCHEMA.into(),
            experiments: Vec::new(),
        },
        Err(e) => return Err(Error::io(&path, e)),
    };
    manifest.experiments.retain(|e| e.experiment != entry.experiment);
    manifest.experiments.push(entry);
    manifest.experiments.sort_by(|a, b| a.experiment.cmp(&b.experiment));
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Runs an experiment and writes its files into `out_dir`. The directory is
/// checked for writability before any solve starts.
pub fn run_experiment(cfg: &ExperimentConfig, kind: ExperimentKind, out_dir: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    ensure_writable(out_dir)?;
    let results = run_grid(cfg, kind)?;
    let stem = kind.file_stem();
    let mut files = Vec::new();

    let main = out_dir.join(format!("{stem}.csv"));
    let records: Vec<SweepRecord> = results.iter().map(|r| r.record.clone()).collect();
    write_csv(&main, &records)?;
    files.push(main);

    let pre = out_dir.join(format!("{stem}_precoders.csv"));
    write_csv(&pre, &precoder_rows(&results))?;
    files.push(pre);

    if kind == ExperimentKind::Convergence {
        let tr = out_dir.join(format!("{stem}_traces.csv"));
        write_csv(&tr, &trace_rows(&results))?;
        files.push(tr);
    }

    let timing: Vec<TimingRecord> = results
        .iter()
        .map(|r| TimingRecord {
            schema: TIMING_SCHEMA.into(),
            row: r.record.row,
            method: r.record.method.clone(),
            iterations: r.record.iterations,
            wall_ms: r.trace.elapsed_ms.unwrap_or(f64::NAN),
        })
        .collect();
    let tm = out_dir.join(format!("{stem}_timing.csv"));
    write_csv(&tm, &timing)?;
    files.push(tm);

    let failures = records.iter().filter(|r| r.status == "solver_failure").count();
    let names = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let manifest = update_manifest(
        out_dir,
        ManifestEntry {
            experiment: kind.name().into(),
            master_seed: cfg.seed,
            trial_seeds: (0..cfg.effective_trials()).map(|t| trial_seed(cfg.seed, t)).collect(),
            files: names,
            rows: records.len(),
            failures,
            config: cfg.clone(),
        },
    )?;
    files.push(manifest);
    Ok(ExperimentSummary {
        kind,
        files,
        rows: records.len(),
        failures,
    })
}

/// Sweeps `w` for one method and approach at a single grid point and returns
/// the resulting SE-EE curve.
pub fn pareto_frontier(
    cfg: &ExperimentConfig,
    approach: Approach,
    method: Method,
    snr_db: f64,
    trial: usize,
) -> Result<Frontier> {
    let mut sub = cfg.clone();
    sub.approaches = vec![approach];
    sub.methods = vec![method];
    sub.snr_db = vec![snr_db];
    sub.chi = vec![cfg.chi_grid()[0]];
    let results = run_grid(&sub, ExperimentKind::Tradeoff)?;
    let points = results
        .iter()
        .filter(|r| r.job.trial == trial)
        .map(|r| FrontierPoint {
            w: r.job.w,
            se: r.record.se_bits,
            ee: r.record.ee,
        })
        .collect();
    Ok(Frontier::new(format!("{}/{}", method.name(), approach.name()), points))
}
