//! `simulate`, `fuse` and `metrics` subcommands.
//!
//! Each command has a `Result`-returning core and a `cmd_*` wrapper that
//! prints to the given streams and maps errors onto exit codes
//! (0 success, 1 runtime failure, 2 invalid input).

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{
    error_series, replay, run_estimators, summaries, TrajectoryRecord,
};
use crate::harness::log::{format_summary, read_log, write_error_series, write_log};
use crate::metrics::{Source, Summary};
use crate::world::run_world;

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct FuseArgs {
    pub input: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
}

/// Per-run outcome of a simulation batch.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub index: usize,
    pub seed: u64,
    pub rows: Vec<TrajectoryRecord>,
    pub summaries: BTreeMap<Source, Summary>,
    /// IPS samples that failed to trilaterate, as `(t, reason)`.
    pub fix_failures: Vec<(f64, String)>,
}

/// Simulates and evaluates run `index` of a batch (seed `config.seed + index`).
pub fn simulate_run(config: &ExperimentConfig, index: usize) -> Result<RunResult> {
    let seed = config.seed.wrapping_add(index as u64);
    let trace = run_world(&config.world, seed)?;
    let rows = run_estimators(&trace, &config.filter)?;
    let summaries = summaries(&rows)?;
    Ok(RunResult {
        index,
        seed,
        rows,
        summaries,
        fix_failures: trace
            .fix_failures
            .iter()
            .map(|(t, e)| (*t, e.to_string()))
            .collect(),
    })
}

/// Runs `config.runs` independent simulations in parallel, ordered by index.
pub fn simulate_batch(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    (0..config.runs)
        .into_par_iter()
        .map(|i| simulate_run(config, i))
        .collect()
}

/// Mean of each summary statistic across runs.
pub fn mean_summaries(runs: &[RunResult]) -> BTreeMap<Source, Summary> {
    let mut acc: BTreeMap<Source, (Summary, usize)> = BTreeMap::new();
    for run in runs {
        for (src, s) in &run.summaries {
            let e = acc.entry(*src).or_insert((
                Summary {
                    max: 0.0,
                    rmse: 0.0,
                    final_error: 0.0,
                },
                0,
            ));
            e.0.max += s.max;
            e.0.rmse += s.rmse;
            e.0.final_error += s.final_error;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(src, (s, n))| {
            let n = n as f64;
            (
                src,
                Summary {
                    max: s.max / n,
                    rmse: s.rmse / n,
                    final_error: s.final_error / n,
                },
            )
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))
}

fn write_outputs(dir: &Path, suffix: &str, rows: &[TrajectoryRecord]) -> Result<()> {
    write_log(create(&dir.join(format!("trajectory{suffix}.csv")))?, rows)?;
    write_error_series(
        create(&dir.join(format!("errors{suffix}.csv")))?,
        &error_series(rows)?,
    )
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Runs the experiment(s) and writes logs; returns the summary text.
pub fn simulate(args: &SimulateArgs) -> Result<(String, Vec<RunResult>)> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(runs) = args.runs {
        if runs == 0 {
            return Err(Error::Config {
                field: "--runs".into(),
                message: "must be >= 1".into(),
            });
        }
        config.runs = runs;
    }
    prepare_dir(&args.out)?;
    let runs = simulate_batch(&config)?;

    let summary = if let [single] = runs.as_slice() {
        write_outputs(&args.out, "", &single.rows)?;
        format_summary(&single.summaries)
    } else {
        let mut table = create(&args.out.join("runs.csv"))?;
        writeln!(table, "run,seed,estimator,max_m,rmse_m,final_m")?;
        for run in &runs {
            write_outputs(&args.out, &format!("_run{:04}", run.index), &run.rows)?;
            for (src, s) in &run.summaries {
                writeln!(
                    table,
                    "{},{},{},{},{},{}",
                    run.index, run.seed, src, s.max, s.rmse, s.final_error
                )?;
            }
        }
        table.flush()?;
        format!(
            "mean over {} runs (seeds {}..={})\n{}",
            runs.len(),
            config.seed,
            config.seed.wrapping_add(runs.len() as u64 - 1),
            format_summary(&mean_summaries(&runs))
        )
    };
    fs::write(args.out.join("summary.txt"), &summary)?;
    Ok((summary, runs))
}

/// Re-runs odometry and the EKF over a recorded log with a new filter config.
pub fn fuse(args: &FuseArgs) -> Result<(String, Vec<TrajectoryRecord>)> {
    let rows = read_log(BufReader::new(open(&args.input)?))?;
    let config = ExperimentConfig::load(&args.config)?;
    let start = rows[0].truth;
    let rows = replay(rows, start, &config.filter)?;
    prepare_dir(&args.out)?;
    write_outputs(&args.out, "", &rows)?;
    let summary = format_summary(&summaries(&rows)?);
    fs::write(args.out.join("summary.txt"), &summary)?;
    Ok((summary, rows))
}

/// Summary table of a recorded log.
pub fn metrics(input: &Path) -> Result<String> {
    let rows = read_log(BufReader::new(open(input)?))?;
    Ok(format_summary(&summaries(&rows)?))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Parse {
        row: 0,
        message: format!("cannot open {}: {e}", path.display()),
    })
}

fn report(err: &Error, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {err}");
    err.exit_code()
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match simulate(args) {
        Ok((summary, runs)) => {
            for run in &runs {
                for (t, why) in &run.fix_failures {
                    let _ = writeln!(
                        stderr,
                        "warning: run {} dropped fix at t={t}: {why}",
                        run.index
                    );
                }
            }
            let _ = write!(stdout, "{summary}");
            0
        }
        Err(e) => report(&e, stderr),
    }
}

pub fn cmd_fuse(args: &FuseArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match fuse(args) {
        Ok((summary, _)) => {
            let _ = write!(stdout, "{summary}");
            0
        }
        Err(e) => report(&e, stderr),
    }
}

pub fn cmd_metrics(input: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match metrics(input) {
        Ok(summary) => {
            let _ = write!(stdout, "{summary}");
            0
        }
        Err(e) => report(&e, stderr),
    }
}
