//! Running the solver on model files and collecting results.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certification::{check_duality, check_files, CertificationError, GapReport, GapStatus};
use crate::clock::Clock;
use crate::interactions::{enumerate_universe_with, InteractionUniverse, UniverseError};
use crate::lower_bound::{parse_certificate_file, write_certificate_file, CertificateFileError};
use crate::model::{parse_dimacs, parse_model_file, simplify, FeatureModel, ModelError};
use crate::mutex::MutexLevel;
use crate::sample::{parse_sample_file, write_sample_file, Sample, SampleFileError};
use crate::upper_bound::{samplns, IterationRecord, Mode, SamplnsConfig, SamplnsError, SampleViolation};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const UNSAT_MODEL: u8 = 3;
    pub const BAD_INPUT: u8 = 4;
    pub const VERIFICATION_FAILED: u8 = 5;
    pub const HASH_MISMATCH: u8 = 6;
    pub const SAMPLE_INVALID: u8 = 7;
    pub const MUTEX_VIOLATION: u8 = 8;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error("{path}: {source}")]
    SampleFile { path: PathBuf, source: SampleFileError },
    #[error("{path}: {source}")]
    CertificateFile { path: PathBuf, source: CertificateFileError },
    #[error("interaction strength {0} is not supported (use --allow-high-strength for t >= 3)")]
    Strength(usize),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Search(#[from] SamplnsError),
    #[error(transparent)]
    Certification(#[from] CertificationError),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Model { source, .. } => match source {
                ModelError::Unsatisfiable | ModelError::EmptyClause { .. } => exit::UNSAT_MODEL,
                ModelError::Io(_) => exit::FAILURE,
                _ => exit::BAD_INPUT,
            },
            HarnessError::Io { .. } => exit::FAILURE,
            HarnessError::SampleFile { .. } | HarnessError::CertificateFile { .. } | HarnessError::Strength(_) => {
                exit::BAD_INPUT
            }
            HarnessError::Universe(_) | HarnessError::Search(_) => exit::VERIFICATION_FAILED,
            HarnessError::Certification(e) => match e {
                CertificationError::ModelMismatch { .. }
                | CertificationError::HashMismatch { .. }
                | CertificationError::StrengthMismatch { .. } => exit::HASH_MISMATCH,
                CertificationError::Sample(_) => exit::SAMPLE_INVALID,
                CertificationError::Certificate(_) | CertificationError::BoundExceedsSample { .. } => {
                    exit::MUTEX_VIOLATION
                }
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Model names end up in single-token file headers.
fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    if s.is_empty() {
        "model".into()
    } else {
        s
    }
}

/// Reads a JSON model document (`.json`) or DIMACS (anything else). DIMACS
/// models are named after the file stem.
pub fn load_model(path: &Path) -> Result<FeatureModel, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        parse_model_file(file)
    } else {
        parse_dimacs(file)
    };
    let model = parsed.map_err(|source| HarnessError::Model {
        path: path.to_path_buf(),
        source,
    })?;
    let name = if is_json {
        model.name().to_string()
    } else {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    };
    Ok(model.with_name(sanitize(&name)))
}

pub fn check_strength(t: usize, allow_high: bool) -> Result<(), HarnessError> {
    if t == 0 || (t >= 3 && !allow_high) {
        Err(HarnessError::Strength(t))
    } else {
        Ok(())
    }
}

/// Options shared by `sample` and `bench`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t: usize,
    pub time_limit: f64,
    pub iteration_time_limit: f64,
    pub seed: u64,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub repeat: usize,
    pub simplify: bool,
    pub mutex_level: MutexLevel,
    pub max_iterations: Option<usize>,
    /// Permits t >= 3, whose universe grows as n^t.
    pub allow_high_strength: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t: 2,
            time_limit: 900.0,
            iteration_time_limit: 60.0,
            seed: 0,
            mode: Mode::Deterministic,
            output_dir: PathBuf::from("."),
            repeat: 1,
            simplify: false,
            mutex_level: MutexLevel::L0,
            max_iterations: None,
            allow_high_strength: false,
        }
    }
}

impl RunConfig {
    pub fn samplns_config(&self, seed: u64) -> SamplnsConfig {
        let mut c = SamplnsConfig {
            time_limit: self.time_limit,
            mutex_level: self.mutex_level,
            mode: self.mode,
            seed,
            max_iterations: self.max_iterations,
            ..SamplnsConfig::default()
        };
        c.tuning.iteration_time_limit = self.iteration_time_limit;
        c.lb_tuning.iteration_time_limit = self.iteration_time_limit * 0.1;
        c
    }
}

/// Everything recorded about one run; persisted as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub hash: String,
    pub n_features: usize,
    pub n_clauses: usize,
    pub t: usize,
    pub seed: u64,
    pub mode: Mode,
    pub initial_size: usize,
    pub ub: usize,
    pub lb: usize,
    pub ratio: f64,
    pub status: GapStatus,
    pub t_last_ub_s: f64,
    pub t_last_lb_s: f64,
    pub elapsed_s: f64,
    pub iterations: Vec<IterationRecord>,
}

/// Artifacts of one verified run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: GapReport,
    pub record: RunRecord,
    pub sample_file: String,
    pub certificate_file: String,
}

/// Enumerates, optimizes, and re-verifies one model. In deterministic mode
/// all times are work-clock seconds from the start of the run; otherwise
/// they are wall seconds on `clock`.
pub fn run_model(model: &FeatureModel, config: &RunConfig, seed: u64, clock: &Clock) -> Result<RunOutcome, HarnessError> {
    let clock = match config.mode {
        Mode::Deterministic => Clock::work(),
        Mode::Parallel => clock.clone(),
    };
    let simplified;
    let solve_model = if config.simplify {
        simplified = simplify(model).map_err(|source| HarnessError::Model {
            path: PathBuf::from(model.name()),
            source,
        })?;
        &simplified
    } else {
        model
    };
    let universe = enumerate_universe_with(solve_model, config.t, None, &clock)?;
    let result = samplns(solve_model, &universe, &config.samplns_config(seed), &clock)?;
    let report = check_duality(&result.sample, result.lower_bound.members(), model, &universe)?
        .with_times(result.t_last_ub, result.t_last_lb);
    let record = RunRecord {
        model: report.model.clone(),
        hash: report.hash.clone(),
        n_features: model.n_features(),
        n_clauses: model.clauses().len(),
        t: config.t,
        seed,
        mode: config.mode,
        initial_size: result.initial_size,
        ub: report.ub,
        lb: report.lb,
        ratio: report.ratio,
        status: report.status,
        t_last_ub_s: report.t_last_ub_s,
        t_last_lb_s: report.t_last_lb_s,
        elapsed_s: result.elapsed,
        iterations: result.history.clone(),
    };
    Ok(RunOutcome {
        sample_file: write_sample_file(model.name(), &report.hash, &result.sample),
        certificate_file: write_certificate_file(model.name(), &report.hash, config.t, &result.lower_bound),
        report,
        record,
    })
}

/// Paths of the artifacts written for a model.
pub fn artifact_paths(dir: &Path, model: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{model}.sample")),
        dir.join(format!("{model}.lbcert")),
        dir.join(format!("{model}.report.json")),
    )
}

fn run_record_path(dir: &Path, model: &str, run: usize) -> PathBuf {
    dir.join("runs").join(format!("{model}.{run}.json"))
}

/// `sample`: runs `config.repeat` times with the same seed, writes the
/// per-run records and the artifacts of the best run, and returns every
/// report.
pub fn cmd_sample(model_path: &Path, config: &RunConfig, clock: &Clock) -> Result<Vec<GapReport>, HarnessError> {
    check_strength(config.t, config.allow_high_strength)?;
    let model = load_model(model_path)?;
    let mut reports = Vec::new();
    let mut best: Option<RunOutcome> = None;
    for run in 0..config.repeat.max(1) {
        let outcome = run_model(&model, config, config.seed, clock)?;
        let json = serde_json::to_string_pretty(&outcome.record).expect("record serializes");
        write(&run_record_path(&config.output_dir, model.name(), run), &json)?;
        reports.push(outcome.report.clone());
        let better = best
            .as_ref()
            .is_none_or(|b| (outcome.report.ub, std::cmp::Reverse(outcome.report.lb)) < (b.report.ub, std::cmp::Reverse(b.report.lb)));
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one run");
    let (sample_path, cert_path, report_path) = artifact_paths(&config.output_dir, model.name());
    write(&sample_path, &best.sample_file)?;
    write(&cert_path, &best.certificate_file)?;
    write(&report_path, &best.report.to_json())?;
    Ok(reports)
}

/// `verify`: checks a sample file and a certificate file against a model.
pub fn cmd_verify(sample_path: &Path, cert_path: &Path, model_path: &Path) -> Result<GapReport, HarnessError> {
    let model = load_model(model_path)?;
    let sample = parse_sample_file(&read(sample_path)?).map_err(|source| HarnessError::SampleFile {
        path: sample_path.to_path_buf(),
        source,
    })?;
    let cert = parse_certificate_file(&read(cert_path)?).map_err(|source| HarnessError::CertificateFile {
        path: cert_path.to_path_buf(),
        source,
    })?;
    if cert.t == 0 {
        return Err(HarnessError::Strength(0));
    }
    let universe = enumerate_universe_with(&model, cert.t, None, &Clock::wall())?;
    Ok(check_files(&sample, &cert, &model, &universe)?)
}

/// Coverage fraction after each prefix of a seeded shuffle of `sample`,
/// starting with the empty prefix.
pub fn coverage_curve(sample: &Sample, universe: &InteractionUniverse, seed: u64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let total = universe.len();
    let mut covered = FixedBitSet::with_capacity(total);
    let fraction = |c: &FixedBitSet| {
        if total == 0 {
            1.0
        } else {
            c.count_ones(..) as f64 / total as f64
        }
    };
    let mut out = vec![if total == 0 { 1.0 } else { 0.0 }];
    for i in order {
        universe.for_each_covered(&sample.configurations()[i], |v| covered.insert(v));
        out.push(fraction(&covered));
    }
    out
}

pub fn curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("index,coverage_fraction\n");
    for (i, f) in curve.iter().enumerate() {
        out.push_str(&format!("{i},{f}\n"));
    }
    out
}

/// `coverage-curve`: CSV for the sample file against the model.
pub fn cmd_coverage_curve(sample_path: &Path, model_path: &Path, seed: u64) -> Result<String, HarnessError> {
    let model = load_model(model_path)?;
    let file = parse_sample_file(&read(sample_path)?).map_err(|source| HarnessError::SampleFile {
        path: sample_path.to_path_buf(),
        source,
    })?;
    if let Some((index, _)) = file
        .sample
        .iter()
        .enumerate()
        .find(|(_, c)| !model.is_valid_configuration(c).unwrap_or(false))
    {
        return Err(CertificationError::Sample(SampleViolation::InvalidConfiguration {
            index,
            config: file.sample.configurations()[index].clone(),
        })
        .into());
    }
    let universe = enumerate_universe_with(&model, 2, None, &Clock::wall())?;
    Ok(curve_csv(&coverage_curve(&file.sample, &universe, seed)))
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub n_features: usize,
    pub n_clauses: usize,
    pub runs: usize,
    /// Mean size of the greedy initial sample.
    pub baseline: f64,
    pub ub_mean: f64,
    pub ub_min: usize,
    pub lb_mean: f64,
    pub lb_max: usize,
    pub savings_pct: f64,
    /// Best sample size over best bound.
    pub ratio: f64,
    pub t_ub_mean: f64,
    pub t_lb_mean: f64,
    pub failure: Option<String>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Aggregates run records of one model. `records` must be nonempty.
pub fn aggregate(records: &[RunRecord]) -> BenchRow {
    let first = &records[0];
    let baseline = mean(records.iter().map(|r| r.initial_size as f64));
    let ub_mean = mean(records.iter().map(|r| r.ub as f64));
    let ub_min = records.iter().map(|r| r.ub).min().unwrap_or(0);
    let lb_max = records.iter().map(|r| r.lb).max().unwrap_or(0);
    BenchRow {
        model: first.model.clone(),
        n_features: first.n_features,
        n_clauses: first.n_clauses,
        runs: records.len(),
        baseline,
        ub_mean,
        ub_min,
        lb_mean: mean(records.iter().map(|r| r.lb as f64)),
        lb_max,
        savings_pct: if baseline > 0.0 {
            100.0 * (baseline - ub_mean) / baseline
        } else {
            0.0
        },
        ratio: if lb_max == 0 {
            if ub_min == 0 {
                1.0
            } else {
                ub_min as f64
            }
        } else {
            ub_min as f64 / lb_max as f64
        },
        t_ub_mean: mean(records.iter().map(|r| r.t_last_ub_s)),
        t_lb_mean: mean(records.iter().map(|r| r.t_last_lb_s)),
        failure: None,
    }
}

fn failed_row(model: &str, message: String) -> BenchRow {
    BenchRow {
        model: model.to_string(),
        n_features: 0,
        n_clauses: 0,
        runs: 0,
        baseline: 0.0,
        ub_mean: 0.0,
        ub_min: 0,
        lb_mean: 0.0,
        lb_max: 0,
        savings_pct: 0.0,
        ratio: 0.0,
        t_ub_mean: 0.0,
        t_lb_mean: 0.0,
        failure: Some(message),
    }
}

pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "| model | \\|F\\| | \\|D\\| | Baseline | UB mean (min) | LB mean (max) | savings % | UB/LB | time to bounds (s) |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        match &r.failure {
            Some(msg) => out.push_str(&format!("| {} | | | | failed: {} | | | | |\n", r.model, msg.replace('|', "/"))),
            None => out.push_str(&format!(
                "| {} | {} | {} | {:.1} | {:.1} ({}) | {:.1} ({}) | {:.1} | {:.2} | {:.1} / {:.1} |\n",
                r.model,
                r.n_features,
                r.n_clauses,
                r.baseline,
                r.ub_mean,
                r.ub_min,
                r.lb_mean,
                r.lb_max,
                r.savings_pct,
                r.ratio,
                r.t_ub_mean,
                r.t_lb_mean
            )),
        }
    }
    out
}

/// Model files of a corpus directory, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "cnf" | "dimacs" | "json"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// `bench`: every model of `dir`, `config.repeat` runs each with seeds
/// `seed, seed + 1, ...`. Per-run records go to `<out>/runs/`; a failing
/// model becomes a failed row.
pub fn cmd_bench(dir: &Path, config: &RunConfig, clock: &Clock) -> Result<Vec<BenchRow>, HarnessError> {
    let mut rows = Vec::new();
    for path in corpus_files(dir)? {
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let outcome = (|| -> Result<BenchRow, HarnessError> {
            check_strength(config.t, config.allow_high_strength)?;
            let model = load_model(&path)?;
            let mut records = Vec::new();
            for run in 0..config.repeat.max(1) {
                let seed = config.seed.wrapping_add(run as u64);
                let outcome = run_model(&model, config, seed, clock)?;
                let json = serde_json::to_string_pretty(&outcome.record).expect("record serializes");
                write(&run_record_path(&config.output_dir, model.name(), run), &json)?;
                records.push(outcome.record);
            }
            Ok(aggregate(&records))
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                rows.push(failed_row(&label, e.to_string()));
            }
        }
    }
    write(&config.output_dir.join("bench.md"), &render_table(&rows))?;
    write(
        &config.output_dir.join("bench.json"),
        &serde_json::to_string_pretty(&rows).expect("rows serialize"),
    )?;
    Ok(rows)
}

/// Loads every per-run record below `dir/runs`, sorted by file name.
pub fn load_run_records(dir: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let runs = dir.join("runs");
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs)
        .map_err(io_err(&runs))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = read(p)?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Io {
                path: p.clone(),
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            })
        })
        .collect()
}
