use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ttp_ws::harness::{self, CellKey, ExperimentConfig};
use ttp_ws::pipeline::{run_pipeline, Algorithm, PipelineConfig};
use ttp_ws::{generate_scenarios, Error, Instance, ScenarioSet, SetLabel};

const USAGE: u8 = 1;
const INPUT: u8 = 2;
const INVARIANT: u8 = 3;

/// Chance-constrained travelling thief solver under weighted scenarios.
#[derive(Parser)]
#[command(name = "ttpws", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the five weight scenarios of an instance as JSON.
    GenScenarios {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        delta: f64,
        #[arg(long)]
        set: SetLabel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm once and print the result record as JSON.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        algorithm: Algorithm,
        #[arg(long)]
        alpha: f64,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 600.0)]
        budget: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop S5/C5 after this many restarts.
        #[arg(long)]
        max_restarts: Option<u64>,
        /// Stop the EA after this many iterations.
        #[arg(long)]
        max_iterations: Option<u64>,
    },
    /// Run or resume an experiment described by a TOML file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarize the records of an experiment.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, default_value_t = 0.05)]
        significance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

/// Errors reading user files map to the input code; bad parameters to usage.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => USAGE,
            Error::Overweight { .. } => INVARIANT,
            Error::Parse { .. } | Error::Scenario(_) | Error::Io(_) | Error::Json(_) => INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

fn input<T>(path: &std::path::Path, r: ttp_ws::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::new(INPUT, format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenScenarios { instance, delta, set, out } => {
            if set == SetLabel::Custom {
                return Err(Failure::new(USAGE, "--set must be A, B or C"));
            }
            let inst = input(&instance, Instance::from_path(&instance))?;
            let scenarios = generate_scenarios(&inst, delta, set)?;
            input(&out, std::fs::write(&out, scenarios.to_json()).map_err(Error::from))?;
        }
        Command::Solve { instance, scenarios, algorithm, alpha, budget, seed, max_restarts, max_iterations } => {
            let inst = input(&instance, Instance::from_path(&instance))?;
            let set = input(&scenarios, ScenarioSet::from_path(&scenarios))?;
            if set.num_items() != inst.num_items() {
                return Err(Failure::new(
                    INPUT,
                    format!("{} has {} items, the instance has {}", scenarios.display(), set.num_items(), inst.num_items()),
                ));
            }
            let config = PipelineConfig {
                max_restarts,
                max_iterations,
                ..PipelineConfig::new(algorithm, alpha, budget, seed)
            };
            let out = run_pipeline(&inst, &set, &config)?;
            let key = CellKey::new(inst.name(), &set.label().to_string(), algorithm, alpha, 0);
            let record = harness::make_record(&key, alpha, seed, &set, &out);
            if !record.satisfies_constraint() {
                return Err(Failure::new(INVARIANT, "solver returned a plan below alpha"));
            }
            println!("{}", serde_json::to_string(&record).map_err(Error::from)?);
        }
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::from_path(&config).map_err(|e| match e {
                Error::Io(_) | Error::Config(_) => Failure::new(INPUT, format!("{}: {e}", config.display())),
                other => other.into(),
            })?;
            let outcome = harness::run_experiment(&cfg)?;
            eprintln!(
                "{} cells run, {} records in {}",
                outcome.executed,
                outcome.records.len(),
                cfg.output_dir.join(harness::RECORDS_FILE).display()
            );
            let bad = outcome.records.iter().filter(|r| !r.satisfies_constraint()).count();
            if bad > 0 {
                return Err(Failure::new(INVARIANT, format!("{bad} records fall below their alpha")));
            }
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("skipped {f}");
                }
                if outcome.records.is_empty() {
                    return Err(Failure::new(INPUT, "no instance could be loaded"));
                }
            }
        }
        Command::Report { records, format, significance } => {
            if !(significance > 0.0 && significance < 1.0) {
                return Err(Failure::new(USAGE, "--significance must lie in (0, 1)"));
            }
            let recs = input(&records, harness::load_records(&records))?;
            if recs.is_empty() {
                return Err(Failure::new(INPUT, format!("{} holds no records", records.display())));
            }
            let table = harness::report(&recs, significance)?;
            match format {
                Format::Csv => print!("{}", table.to_csv()),
                Format::Json => println!("{}", table.to_json()),
                Format::Text => print!("{}", table.to_text()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
