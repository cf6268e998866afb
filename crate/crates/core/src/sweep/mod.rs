//! Grid sweeps over codecs × budgets × seeds and their CSV / SVG outputs.

mod config;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codecs::CodecSpec;
use crate::data::{make_synthetic_quadrants, Dataset};
use crate::error::{Error, Result};
use crate::protocol::{aggregate_runs, run_experiment, split_nc, RunReport, TaskStream};
use crate::rng::derive_rng;
use crate::types::ByteBudget;

pub use config::{
    parse_budget, parse_codec, DatasetConfig, ExperimentConfig, OutputConfig, ProtocolConfig,
};
pub use svg::{line_chart, Series};

pub const RESULTS_FILE: &str = "results.csv";
pub const CURVES_FILE: &str = "task_curves.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MEMORY_PLOT_FILE: &str = "accuracy_vs_memory.svg";
pub const TOTAL_BYTES_PLOT_FILE: &str = "accuracy_vs_total_bytes.svg";

/// Environment variable capping the worker threads of a sweep.
pub const THREADS_ENV: &str = "REHEARSAL_THREADS";

/// One line of `results.csv`: the final state of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub codec: String,
    pub budget_bytes: usize,
    pub seed: u64,
    /// Index of the last task completed.
    pub task_index: usize,
    pub accuracy: f64,
    pub final_accuracy: f64,
    pub buffer_instances: usize,
    pub buffer_bytes: usize,
    pub param_bytes: usize,
    pub total_bytes: usize,
    pub wall_seconds: Option<f64>,
    /// Empty on success.
    pub error: String,
}

impl ResultRow {
    fn from_report(r: &RunReport, wall_seconds: Option<f64>) -> Self {
        ResultRow {
            codec: r.codec.clone(),
            budget_bytes: r.budget_bytes,
            seed: r.seed,
            task_index: r.task_accuracies.len().saturating_sub(1),
            accuracy: r.final_accuracy,
            final_accuracy: r.final_accuracy,
            buffer_instances: r.buffer_instances,
            buffer_bytes: r.buffer_bytes,
            param_bytes: r.param_bytes,
            total_bytes: r.total_bytes,
            wall_seconds,
            error: String::new(),
        }
    }

    fn failed(
        codec: String,
        budget_bytes: usize,
        seed: u64,
        err: &Error,
        wall_seconds: Option<f64>,
    ) -> Self {
        ResultRow {
            codec,
            budget_bytes,
            seed,
            task_index: 0,
            accuracy: f64::NAN,
            final_accuracy: f64::NAN,
            buffer_instances: 0,
            buffer_bytes: 0,
            param_bytes: 0,
            total_bytes: 0,
            wall_seconds,
            error: err.to_string(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }

    fn as_report(&self) -> RunReport {
        RunReport {
            seed: self.seed,
            codec: self.codec.clone(),
            budget_bytes: self.budget_bytes,
            task_accuracies: Vec::new(),
            final_accuracy: self.final_accuracy,
            task_epochs: Vec::new(),
            instance_bytes: 0,
            buffer_instances: self.buffer_instances,
            buffer_bytes: self.buffer_bytes,
            param_bytes: self.param_bytes,
            total_bytes: self.total_bytes,
        }
    }
}

/// One line of `task_curves.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub codec: String,
    pub budget_bytes: usize,
    pub seed: u64,
    pub task_index: usize,
    pub accuracy: f64,
    pub epochs: usize,
}

/// One line of `summary.csv`: a (codec, budget) cell over its successful runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub codec: String,
    pub budget_bytes: usize,
    pub runs: usize,
    pub failed: usize,
    pub mean_final_accuracy: f64,
    pub std_final_accuracy: f64,
    pub buffer_instances: usize,
    pub buffer_bytes: usize,
    pub param_bytes: usize,
    pub total_bytes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub results: Vec<ResultRow>,
    pub curves: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
}

pub fn load_dataset(cfg: &DatasetConfig, base_seed: u64) -> Result<Dataset> {
    match cfg {
        DatasetConfig::Mnist { dir } => Dataset::mnist(dir),
        DatasetConfig::Synthetic {
            n_per_class,
            size,
            noise_std,
        } => make_synthetic_quadrants(
            *n_per_class,
            *size,
            *noise_std,
            &mut derive_rng(base_seed, "dataset"),
        ),
    }
}

/// Task stream for one seed. Every codec and budget of that seed sees the same split.
pub fn stream_for_seed(
    dataset: &Dataset,
    protocol: &ProtocolConfig,
    seed: u64,
) -> Result<TaskStream> {
    split_nc(
        dataset,
        protocol.num_tasks,
        protocol.classes_per_task,
        &mut derive_rng(seed, "split"),
    )
}

/// Runs one configuration. A random projection takes its seed from the run seed.
pub fn run_single(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    codec: &CodecSpec,
    budget: usize,
    seed: u64,
) -> Result<RunReport> {
    let stream = stream_for_seed(dataset, &cfg.protocol, seed)?;
    run_experiment(
        &stream,
        &codec.clone().with_seed(seed),
        ByteBudget::new(budget)?,
        &cfg.training,
        &dataset.test,
        seed,
    )
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs the whole grid on an already loaded dataset. Failed runs become rows
/// with a non-empty `error` instead of aborting the sweep.
pub fn run_grid(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let codecs = cfg.codecs()?;
    let budgets = cfg.budgets()?;
    let seeds: Vec<u64> = cfg.seeds().collect();
    let streams: Vec<Result<TaskStream>> = seeds
        .iter()
        .map(|&s| stream_for_seed(dataset, &cfg.protocol, s))
        .collect();
    let mut cells = Vec::new();
    for ci in 0..codecs.len() {
        for bi in 0..budgets.len() {
            for si in 0..seeds.len() {
                cells.push((ci, bi, si));
            }
        }
    }
    let timed = cfg.output.record_wall_time;
    let outcomes: Vec<(ResultRow, Vec<CurveRow>)> = thread_pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(ci, bi, si)| {
                let seed = seeds[si];
                let spec = codecs[ci].clone().with_seed(seed);
                let start = Instant::now();
                let run = streams[si]
                    .as_ref()
                    .map_err(|e| Error::Config(e.to_string()))
                    .and_then(|stream| {
                        run_experiment(
                            stream,
                            &spec,
                            ByteBudget::new(budgets[bi])?,
                            &cfg.training,
                            &dataset.test,
                            seed,
                        )
                    });
                let wall = timed.then(|| start.elapsed().as_secs_f64());
                // Label rows with the configured codec text so runs of one cell group together.
                let label = codecs[ci].to_string();
                match run {
                    Ok(report) => {
                        let curves = report
                            .task_accuracies
                            .iter()
                            .zip(&report.task_epochs)
                            .enumerate()
                            .map(|(t, (&accuracy, &epochs))| CurveRow {
                                codec: label.clone(),
                                budget_bytes: report.budget_bytes,
                                seed,
                                task_index: t,
                                accuracy,
                                epochs,
                            })
                            .collect();
                        let mut row = ResultRow::from_report(&report, wall);
                        row.codec = label;
                        (row, curves)
                    }
                    Err(e) => (
                        ResultRow::failed(label, budgets[bi], seed, &e, wall),
                        Vec::new(),
                    ),
                }
            })
            .collect()
    });
    let (results, curves): (Vec<ResultRow>, Vec<Vec<CurveRow>>) = outcomes.into_iter().unzip();
    let curves = curves.into_iter().flatten().collect();
    let summary = summarize(&results)?;
    Ok(SweepOutput {
        results,
        curves,
        summary,
    })
}

/// Loads the dataset, runs the grid and writes every output file.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let dataset = load_dataset(&cfg.dataset, cfg.protocol.base_seed)?;
    let out = run_grid(&dataset, cfg)?;
    write_outputs(&cfg.output.dir, &out)?;
    Ok(out)
}

/// Groups rows by (codec, budget) in first-appearance order and aggregates
/// the successful runs of each group.
pub fn summarize(results: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in results {
        let key = (r.codec.clone(), r.budget_bytes);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let group = &groups[&key];
        let ok: Vec<RunReport> = group
            .iter()
            .filter(|r| r.is_ok())
            .map(|r| r.as_report())
            .collect();
        let failed = group.len() - ok.len();
        let (mean, std) = match aggregate_runs(&ok) {
            Ok(a) => (a.mean, a.std),
            Err(Error::Empty(_)) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        let first = ok.first();
        rows.push(SummaryRow {
            codec: key.0,
            budget_bytes: key.1,
            runs: ok.len(),
            failed,
            mean_final_accuracy: mean,
            std_final_accuracy: std,
            buffer_instances: first.map_or(0, |r| r.buffer_instances),
            buffer_bytes: first.map_or(0, |r| r.buffer_bytes),
            param_bytes: first.map_or(0, |r| r.param_bytes),
            total_bytes: first.map_or(0, |r| r.total_bytes),
        });
    }
    Ok(rows)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn write_outputs(dir: &Path, out: &SweepOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join(RESULTS_FILE), &out.results)?;
    write_csv(&dir.join(CURVES_FILE), &out.curves)?;
    write_report_files(dir, &out.summary)
}

/// Writes `summary.csv` and both plots.
pub fn write_report_files(dir: &Path, summary: &[SummaryRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join(SUMMARY_FILE), summary)?;
    let write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write(MEMORY_PLOT_FILE, memory_plot(summary))?;
    write(TOTAL_BYTES_PLOT_FILE, total_bytes_plot(summary))
}

/// Rebuilds `summary.csv` and the plots from an existing `results.csv`.
/// Outputs go next to the input unless `out_dir` is given.
pub fn report(input: &Path, out_dir: Option<&Path>) -> Result<Vec<SummaryRow>> {
    let rows = read_results(input)?;
    let summary = summarize(&rows)?;
    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    write_report_files(&dir, &summary)?;
    Ok(summary)
}

fn series_by<F>(summary: &[SummaryRow], name: F, x: fn(&SummaryRow) -> f64) -> Vec<Series>
where
    F: Fn(&SummaryRow) -> String,
{
    let mut out: Vec<Series> = Vec::new();
    for r in summary
        .iter()
        .filter(|r| r.runs > 0 && r.mean_final_accuracy.is_finite())
    {
        let n = name(r);
        let point = (x(r), r.mean_final_accuracy);
        match out.iter_mut().find(|s| s.name == n) {
            Some(s) => s.points.push(point),
            None => out.push(Series {
                name: n,
                points: vec![point],
            }),
        }
    }
    for s in &mut out {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

/// Accuracy against number of stored instances, one line per budget.
fn memory_plot(summary: &[SummaryRow]) -> String {
    let series = series_by(
        summary,
        |r| format!("{} B", r.budget_bytes),
        |r| r.buffer_instances as f64,
    );
    line_chart(
        "Final accuracy vs. instances in memory",
        "instances stored",
        "final accuracy",
        &series,
    )
}

/// Accuracy against buffer plus parameter bytes, one line per codec.
fn total_bytes_plot(summary: &[SummaryRow]) -> String {
    let series = series_by(summary, |r| r.codec.clone(), |r| r.total_bytes as f64);
    line_chart(
        "Final accuracy vs. total bytes",
        "buffer + parameter bytes",
        "final accuracy",
        &series,
    )
}
