//! Experiment orchestration and result tables.
//!
//! An experiment is the product instances x scenario sets x algorithms x
//! alphas x repetitions. Every cell gets a seed hashed from the master seed
//! and the cell coordinates, runs once, and is appended to
//! `records.jsonl` in the output directory as soon as it finishes. Cells
//! already present in that file are skipped, so an interrupted experiment
//! resumes where it stopped.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{meets_alpha, scenario_weights};
use crate::instance::Instance;
use crate::packing::{validate_alpha, PackIterativeConfig};
use crate::pipeline::{run_pipeline, Algorithm, PipelineConfig, PipelineOutcome};
use crate::scenario::{generate_scenarios, ScenarioSet, SetLabel};
use crate::seed;
use crate::stats::{dunn_bonferroni, SampleGroup};
use crate::tour::TourSearchConfig;

pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Vec<PathBuf>,
    pub scenario_sets: Vec<SetLabel>,
    /// Pre-generated scenario files, run in addition to `scenario_sets`.
    pub scenario_files: Vec<PathBuf>,
    pub delta: f64,
    pub alphas: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub repetitions: usize,
    pub budget_seconds: f64,
    pub max_restarts: Option<u64>,
    pub max_iterations: Option<u64>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
    pub significance: f64,
    pub tour: TourSearchConfig,
    pub pack: PackIterativeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instances: Vec::new(),
            scenario_sets: vec![SetLabel::A, SetLabel::B, SetLabel::C],
            scenario_files: Vec::new(),
            delta: 20.0,
            alphas: vec![0.8, 0.9],
            algorithms: Algorithm::ALL.to_vec(),
            repetitions: 30,
            budget_seconds: 600.0,
            max_restarts: None,
            max_iterations: None,
            master_seed: 0,
            output_dir: PathBuf::from("results"),
            workers: None,
            significance: 0.05,
            tour: TourSearchConfig::default(),
            pack: PackIterativeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config. Relative paths are taken relative to the file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.instances.iter_mut().for_each(rebase);
        config.scenario_files.iter_mut().for_each(rebase);
        rebase(&mut config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.instances.is_empty() {
            return bad("no instances given");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms given");
        }
        if self.alphas.is_empty() {
            return bad("no alphas given");
        }
        if self.scenario_sets.is_empty() && self.scenario_files.is_empty() {
            return bad("no scenario sets given");
        }
        if self.scenario_sets.contains(&SetLabel::Custom) {
            return bad("custom scenario sets must come from scenario_files");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if !(self.budget_seconds > 0.0) {
            return bad("budget_seconds must be positive");
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be non-negative");
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return bad("significance must lie in (0, 1)");
        }
        self.alphas.iter().try_for_each(|a| validate_alpha(*a))?;
        self.tour.validate()?;
        self.pack.validate()
    }
}

/// One finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub scenario_set: String,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub repetition: usize,
    pub seed: u64,
    pub expected_z: f64,
    pub feasibility_rate: f64,
    /// Total packed weight under each scenario.
    pub plan_weights: Vec<f64>,
    pub wall_clock_seconds: f64,
    /// Restarts (S5/C5) or iterations (EA).
    pub steps: u64,
    pub fallback_empty_plan: bool,
    /// 1-based city order.
    pub tour: Vec<usize>,
    /// 1-based indices of the packed items.
    pub picked_items: Vec<usize>,
}

impl RunRecord {
    pub fn cell(&self) -> CellKey {
        CellKey::new(&self.instance, &self.scenario_set, self.algorithm, self.alpha, self.repetition)
    }

    /// The persisted-record invariant: the plan meets `alpha` or is the empty fallback.
    pub fn satisfies_constraint(&self) -> bool {
        meets_alpha(self.feasibility_rate, self.alpha) || self.fallback_empty_plan
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub instance: String,
    pub scenario_set: String,
    pub algorithm: Algorithm,
    /// `alpha` formatted with `{}`; floats are not `Eq`.
    pub alpha: String,
    pub repetition: usize,
}

impl CellKey {
    pub fn new(instance: &str, scenario_set: &str, algorithm: Algorithm, alpha: f64, repetition: usize) -> Self {
        Self {
            instance: instance.to_string(),
            scenario_set: scenario_set.to_string(),
            algorithm,
            alpha: format!("{alpha}"),
            repetition,
        }
    }

    pub fn seed(&self, master: u64) -> u64 {
        let text = format!(
            "{}\u{0}{}\u{0}{}\u{0}{}\u{0}{}",
            self.instance, self.scenario_set, self.algorithm, self.alpha, self.repetition
        );
        seed::hash_bytes(master, text.as_bytes())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    /// All records of the experiment, including ones found from earlier runs.
    pub records: Vec<RunRecord>,
    /// Cells executed by this call.
    pub executed: usize,
    /// Inputs that could not be loaded.
    pub failures: Vec<String>,
}

struct Job<'a> {
    key: CellKey,
    instance: &'a Instance,
    scenarios: &'a ScenarioSet,
    alpha: f64,
}

/// Reads a records log. Accepts the log file itself or the directory holding it.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = if path.is_dir() { path.join(RECORDS_FILE) } else { path.to_path_buf() };
    let reader = BufReader::new(File::open(&file)?);
    let mut records = Vec::new();
    let mut lines = reader.lines().peekable();
    while let Some(line) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => records.push(r),
            // A torn final line from an interrupted run is dropped; anything else is corruption.
            Err(e) if lines.peek().is_none() => log::warn!("ignoring truncated last record: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(records)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let log_path = config.output_dir.join(RECORDS_FILE);
    let mut existing = if log_path.exists() { load_records(&log_path)? } else { Vec::new() };
    let done: HashSet<CellKey> = existing.iter().map(RunRecord::cell).collect();

    let mut outcome = ExperimentOutcome::default();
    let mut loaded: Vec<(Instance, Vec<(String, ScenarioSet)>)> = Vec::new();
    for path in &config.instances {
        let instance = match Instance::from_path(path) {
            Ok(i) => i,
            Err(e) => {
                log::error!("skipping instance {}: {e}", path.display());
                outcome.failures.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let mut sets = Vec::new();
        for &label in &config.scenario_sets {
            sets.push((label.to_string(), generate_scenarios(&instance, config.delta, label)?));
        }
        for file in &config.scenario_files {
            match ScenarioSet::from_path(file) {
                Ok(set) if set.num_items() == instance.num_items() => {
                    let name = match set.label() {
                        SetLabel::Custom => file.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                        label => label.to_string(),
                    };
                    sets.push((name, set));
                }
                Ok(_) => {
                    log::error!("scenario file {} does not match {}", file.display(), instance.name());
                    outcome.failures.push(format!("{}: item count mismatch", file.display()));
                }
                Err(e) => {
                    log::error!("skipping scenario file {}: {e}", file.display());
                    outcome.failures.push(format!("{}: {e}", file.display()));
                }
            }
        }
        loaded.push((instance, sets));
    }

    let mut jobs = Vec::new();
    for (instance, sets) in &loaded {
        for (set_name, scenarios) in sets {
            for &algorithm in &config.algorithms {
                for &alpha in &config.alphas {
                    for rep in 0..config.repetitions {
                        let key = CellKey::new(instance.name(), set_name, algorithm, alpha, rep);
                        if !done.contains(&key) {
                            jobs.push(Job { key, instance, scenarios, alpha });
                        }
                    }
                }
            }
        }
    }

    let log_file = Mutex::new(OpenOptions::new().create(true).append(true).open(&log_path)?);
    let fresh = Mutex::new(Vec::with_capacity(jobs.len()));
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if first_error.lock().unwrap().is_some() {
                    break;
                }
                let result = execute(config, job).and_then(|record| {
                    let mut line = serde_json::to_string(&record)?;
                    line.push('\n');
                    let mut file = log_file.lock().unwrap();
                    file.write_all(line.as_bytes())?;
                    file.flush()?;
                    Ok(record)
                });
                match result {
                    Ok(record) => fresh.lock().unwrap().push(record),
                    Err(e) => {
                        first_error.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }

    let fresh = fresh.into_inner().unwrap();
    outcome.executed = fresh.len();
    existing.extend(fresh);
    existing.sort_by_key(RunRecord::cell);
    outcome.records = existing;
    Ok(outcome)
}

fn execute(config: &ExperimentConfig, job: &Job<'_>) -> Result<RunRecord> {
    let seed = job.key.seed(config.master_seed);
    let pipeline = PipelineConfig {
        max_restarts: config.max_restarts,
        max_iterations: config.max_iterations,
        tour: config.tour,
        pack: config.pack,
        ..PipelineConfig::new(job.key.algorithm, job.alpha, config.budget_seconds, seed)
    };
    let out = run_pipeline(job.instance, job.scenarios, &pipeline)?;
    log::info!(
        "{} {} {} alpha={} rep={}: {:.2}",
        job.key.instance,
        job.key.scenario_set,
        job.key.algorithm,
        job.alpha,
        job.key.repetition,
        out.evaluation.expected_z
    );
    Ok(make_record(&job.key, job.alpha, seed, job.scenarios, &out))
}

/// Packs a pipeline result into a record for `key`.
pub fn make_record(key: &CellKey, alpha: f64, seed: u64, scenarios: &ScenarioSet, out: &PipelineOutcome) -> RunRecord {
    RunRecord {
        instance: key.instance.clone(),
        scenario_set: key.scenario_set.clone(),
        algorithm: key.algorithm,
        alpha,
        repetition: key.repetition,
        seed,
        expected_z: out.evaluation.expected_z,
        feasibility_rate: out.evaluation.feasibility_rate,
        plan_weights: scenario_weights(scenarios, &out.solution.plan),
        wall_clock_seconds: out.elapsed.as_secs_f64(),
        steps: out.steps,
        fallback_empty_plan: out.is_empty_plan(),
        tour: out.solution.tour.iter().map(|c| c + 1).collect(),
        picked_items: out.solution.picked().map(|i| i + 1).collect(),
    }
}

/// Summary of one (instance, alpha, scenario set, algorithm) cell group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub alpha: f64,
    pub scenario_set: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub stat: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Builds the result table. Within each (instance, alpha, scenario set)
/// group the algorithms are compared with Dunn's test; the stat column lists
/// the verdict against every other algorithm as `n(v)`, where `n` is the
/// algorithm number and `v` is `+`, `-`, `*`, or `n/a` when that algorithm
/// has no records in the group.
pub fn report(records: &[RunRecord], significance: f64) -> Result<Report> {
    type GroupKey = (String, String, String);
    let mut groups: BTreeMap<GroupKey, BTreeMap<Algorithm, Vec<f64>>> = BTreeMap::new();
    let mut alphas: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        let alpha = format!("{}", r.alpha);
        alphas.insert(alpha.clone(), r.alpha);
        groups
            .entry((r.instance.clone(), alpha, r.scenario_set.clone()))
            .or_default()
            .entry(r.algorithm)
            .or_default()
            .push(r.expected_z);
    }

    let mut rows = Vec::new();
    for ((instance, alpha, set), by_alg) in &groups {
        let present: Vec<Algorithm> = by_alg.keys().copied().collect();
        let comparison = if present.len() >= 2 {
            let samples: Vec<SampleGroup> = by_alg
                .iter()
                .map(|(a, v)| SampleGroup::new(a.to_string(), v.clone()))
                .collect();
            Some(dunn_bonferroni(&samples, significance)?)
        } else {
            None
        };
        for (row_idx, (&algorithm, values)) in by_alg.iter().enumerate() {
            let (mean, std) = mean_and_std(values);
            let stat = Algorithm::ALL
                .iter()
                .filter(|&&other| other != algorithm)
                .map(|&other| {
                    let verdict = match (present.iter().position(|a| *a == other), &comparison) {
                        (Some(col), Some(cmp)) => cmp.verdict(row_idx, col).symbol().to_string(),
                        _ => "n/a".to_string(),
                    };
                    format!("{}({verdict})", other.number())
                })
                .collect::<Vec<_>>()
                .join(" ");
            rows.push(ReportRow {
                instance: instance.clone(),
                alpha: alphas[alpha],
                scenario_set: set.clone(),
                algorithm,
                runs: values.len(),
                mean,
                std,
                stat,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then_with(|| a.instance.cmp(&b.instance))
            .then_with(|| a.algorithm.cmp(&b.algorithm))
            .then_with(|| a.scenario_set.cmp(&b.scenario_set))
    });
    Ok(Report { rows })
}

/// `mean | std | stat` with two decimals.
pub fn format_cell(mean: f64, std: f64, stat: &str) -> String {
    format!("{mean:.2} | {std:.2} | {stat}")
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,alpha,scenario_set,algorithm,runs,mean,std,stat\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.instance, r.alpha, r.scenario_set, r.algorithm, r.runs, r.mean, r.std, r.stat
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("report rows serialize")
    }

    /// One aligned table per alpha: a row per (instance, algorithm) and a
    /// `mean | std | stat` column triple per scenario set.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let alphas: Vec<f64> = {
            let mut seen: Vec<f64> = Vec::new();
            for r in &self.rows {
                if !seen.contains(&r.alpha) {
                    seen.push(r.alpha);
                }
            }
            seen
        };
        for (block, alpha) in alphas.iter().enumerate() {
            let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.alpha == *alpha).collect();
            let sets: BTreeSet<&str> = rows.iter().map(|r| r.scenario_set.as_str()).collect();
            let mut lines: Vec<Vec<String>> = Vec::new();
            let mut header = vec!["Instance".to_string(), "Algorithm".to_string()];
            for set in &sets {
                header.extend([format!("Set {set} mean"), "std".into(), "stat".into()]);
            }
            lines.push(header);

            let mut keys: Vec<(&str, Algorithm)> = Vec::new();
            for r in &rows {
                if !keys.contains(&(r.instance.as_str(), r.algorithm)) {
                    keys.push((r.instance.as_str(), r.algorithm));
                }
            }
            let mut last_instance = None;
            for (instance, algorithm) in keys {
                let shown = if last_instance == Some(instance) { "" } else { instance };
                last_instance = Some(instance);
                let mut line = vec![
                    shown.to_string(),
                    format!("{} ({})", algorithm.display_name(), algorithm.number()),
                ];
                for set in &sets {
                    match rows
                        .iter()
                        .find(|r| r.instance == instance && r.algorithm == algorithm && r.scenario_set == *set)
                    {
                        Some(r) => line.extend([format!("{:.2}", r.mean), format!("{:.2}", r.std), r.stat.clone()]),
                        None => line.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
                    }
                }
                lines.push(line);
            }

            let columns = lines[0].len();
            let widths: Vec<usize> = (0..columns)
                .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
                .collect();
            if block > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "alpha = {alpha}");
            for (i, line) in lines.iter().enumerate() {
                let cells: Vec<String> = line
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (cell, w))| {
                        // Mean and std columns are right-aligned.
                        if c >= 2 && (c - 2) % 3 != 2 && i > 0 {
                            format!("{cell:>w$}")
                        } else {
                            format!("{cell:<w$}")
                        }
                    })
                    .collect();
                let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
                if i == 0 {
                    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                    let _ = writeln!(out, "{}", rule.join("-+-"));
                }
            }
        }
        out
    }
}
