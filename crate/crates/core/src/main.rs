use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eigensense::detectors::DetectorKind;
use eigensense::harness::{self, Calibration, Emit, Experiment, ExperimentSpec, Overrides};
use eigensense::rmt::{cnd_s0_law, marginal, LawCache};
use eigensense::signal::Scenario;
use eigensense::{SenseError, ValueCase};

/// Fixed-K eigenvalue detectors: limit laws, thresholds and Monte Carlo checks.
#[derive(Parser)]
#[command(name = "eigensense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical vs theoretical CDF of the regulated statistic.
    Cdf(Flags),
    /// Thresholds per target false-alarm probability.
    Threshold(Flags),
    /// Detection probability per target false-alarm probability.
    Detect(Flags),
    /// Detection experiment over a grid of SNR values.
    Sweep(Flags),
    /// Pre-build and cache limit-law tables.
    Tables(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML experiment file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<Emit>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// real or complex.
    #[arg(long)]
    case: Option<ValueCase>,
    /// s0 or s1.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// med or cnd.
    #[arg(long)]
    detector: Option<DetectorKind>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Comma-separated target false-alarm probabilities.
    #[arg(long, value_delimiter = ',')]
    pfa: Option<Vec<f64>>,
    #[arg(long)]
    runs: Option<usize>,
    /// Tracy-Widom input: gamma:<shape>:<scale>:<shift> or table:<path>.
    #[arg(long)]
    tw: Option<String>,
    /// simulated or theory.
    #[arg(long)]
    calibration: Option<Calibration>,
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    /// Also record wall time in the output metadata.
    #[arg(long)]
    wall_time: bool,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            format: self.format,
            k: self.k,
            n: self.n,
            case: self.case,
            scenario: self.scenario,
            detector: self.detector,
            snr_db: self.snr_db,
            pfa: self.pfa.clone(),
            runs: self.runs,
            tw_source: self.tw.clone(),
            calibration: self.calibration,
            cache_dir: self.cache_dir.clone(),
        }
    }

    fn spec(&self, experiment: Experiment) -> eigensense::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => ExperimentSpec::new(experiment),
        };
        spec.experiment = experiment;
        self.overrides().apply(&mut spec);
        spec.validate()?;
        Ok(spec)
    }
}

fn run_experiment(flags: &Flags, experiment: Experiment) -> eigensense::Result<()> {
    let spec = flags.spec(experiment)?;
    eprintln!(
        "eigensense: {} {} K={} N={} {} seed={} runs={}",
        experiment.as_str(),
        spec.detector.as_str(),
        spec.k,
        spec.n,
        spec.case.as_str(),
        spec.seed,
        spec.n_runs
    );
    let result = harness::run_experiment(&spec)?;
    match &spec.output_path {
        Some(path) if flags.wall_time => {
            harness::emit(&result, spec.emit, Some(path))?;
            let side = harness::sidecar_path(path);
            let text = match spec.emit {
                Emit::Csv => harness::metadata_json(&result, true)?,
                Emit::Json => harness::result_json(&result, true)?,
            };
            let target = if spec.emit == Emit::Csv { side } else { path.clone() };
            std::fs::write(&target, text).map_err(|source| SenseError::Io { path: target, source })?;
        }
        path => harness::emit(&result, spec.emit, path.as_deref())?,
    }
    for (key, value) in &result.metadata.stats {
        eprintln!("  {key} = {}", harness::g12(*value));
    }
    eprintln!("eigensense: {} records in {:.2} s", result.records.len(), result.metadata.wall_time_s);
    Ok(())
}

fn build_tables(flags: &Flags) -> eigensense::Result<()> {
    let spec = flags.spec(Experiment::Cdf)?;
    let dir = spec
        .cache_dir
        .clone()
        .ok_or_else(|| SenseError::config("cache_dir", "tables needs --cache-dir or cache_dir in the config"))?;
    std::fs::create_dir_all(&dir).map_err(|source| SenseError::Io { path: dir.clone(), source })?;
    LawCache::global().set_disk_dir(Some(dir.clone()));
    let k = spec.k;
    let mut built = vec![marginal(k, 1, spec.case)?];
    if k > 1 {
        built.push(marginal(k, k, spec.case)?);
        built.push(cnd_s0_law(k, spec.case)?);
    }
    for t in built {
        eprintln!(
            "eigensense: {} in {}",
            LawCache::file_name(t.meta().law, spec.case),
            dir.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Cdf(f) => run_experiment(f, Experiment::Cdf),
        Command::Threshold(f) => run_experiment(f, Experiment::Threshold),
        Command::Detect(f) => run_experiment(f, Experiment::Detection),
        Command::Sweep(f) => run_experiment(f, Experiment::Sweep),
        Command::Tables(f) => build_tables(f),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eigensense: error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
