use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phc_rtlos::experiments::{
    compliance_sweep, merge_summaries, read_summary, run_scenario, write_mape_csv, write_mape_markdown,
    write_scenario_outputs, write_sweep, RunOptions, ScenarioConfig,
};
use phc_rtlos::rthfa::{effective_lambda, write_lambda_trace, CalibrationSettings, Predictor, PredictorKind};
use phc_rtlos::simml::{read_dataset, train_and_evaluate, TrainSettings};
use phc_rtlos::{Error, Result};

/// Primary-health-centre network simulation with real-time facility assignment.
#[derive(Parser, Debug)]
#[command(name = "phc-rtlos", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file (TOML); the built-in two-facility baseline when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; replication i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Output directory; defaults to the scenario's, then `out/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replications; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scenario without assignment.
    Simulate,
    /// Run the scenario with real-time facility assignment.
    Assign {
        #[arg(long)]
        predictor: Option<PredictorKind>,
        #[arg(long)]
        compliance: Option<f64>,
        /// Fitted model for the simml predictor.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Record decision-time features and realized stays to `dataset.csv`.
    Dataset,
    /// Fit the nearest-neighbour model and score it against the analytical predictor.
    TrainEval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Keep outlying stays.
        #[arg(long)]
        no_outlier_filter: bool,
    },
    /// Fit effective interarrival times window by window.
    Calibrate {
        /// Policy driving the windows; the scenario's when omitted.
        #[arg(long)]
        predictor: Option<PredictorKind>,
    },
    /// Repeat the scenario at several compliance rates.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.75, 0.5, 0.25])]
        rates: Vec<f64>,
    },
    /// Merge `summary.csv` files from run directories into one markdown table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn scenario(global: &Global) -> Result<ScenarioConfig> {
    let mut cfg = match &global.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = global.reps {
        cfg.replications = reps;
    }
    Ok(cfg)
}

fn out_dir(global: &Global, cfg: &ScenarioConfig) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn options(global: &Global) -> RunOptions {
    RunOptions { jobs: global.jobs, ..RunOptions::default() }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn print_file(path: &Path) -> Result<()> {
    io::stdout().write_all(&fs::read(path)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate => {
            let cfg = ScenarioConfig { predictor: PredictorKind::None, ..scenario(g)? };
            let dir = out_dir(g, &cfg);
            let result = run_scenario(&cfg, options(g))?;
            write_scenario_outputs(&dir, &cfg.name, &result)?;
            print_file(&dir.join("summary.md"))
        }
        Command::Assign { predictor, compliance, model } => {
            let mut cfg = scenario(g)?;
            cfg.predictor = predictor.unwrap_or(cfg.predictor);
            cfg.compliance = compliance.unwrap_or(cfg.compliance);
            cfg.model = model.or(cfg.model);
            if cfg.predictor == PredictorKind::None {
                return Err(Error::Config("assign needs a predictor (actual, aqt or simml)".into()));
            }
            let dir = out_dir(g, &cfg);
            let result = run_scenario(&cfg, RunOptions { decisions: true, ..options(g) })?;
            write_scenario_outputs(&dir, &cfg.name, &result)?;
            print_file(&dir.join("summary.md"))
        }
        Command::Dataset => {
            let cfg = scenario(g)?;
            let dir = out_dir(g, &cfg);
            let result = run_scenario(&cfg, RunOptions { dataset: true, ..options(g) })?;
            write_scenario_outputs(&dir, &cfg.name, &result)?;
            println!("{} samples written to {}", result.samples.len(), dir.join("dataset.csv").display());
            Ok(())
        }
        Command::TrainEval { dataset, k, train_fraction, split_seed, no_outlier_filter } => {
            let samples = read_dataset(BufReader::new(File::open(&dataset)?))?;
            let settings = TrainSettings { k, train_fraction, seed: split_seed, iqr_filter: !no_outlier_filter };
            let report = train_and_evaluate(&samples, settings)?;
            let dir = g.out.clone().unwrap_or_else(|| dataset.parent().unwrap_or(Path::new(".")).to_path_buf());
            fs::create_dir_all(&dir)?;
            report.model.save(&dir.join("model.json"))?;
            write_mape_csv(create(&dir.join("mape.csv"))?, &report)?;
            let mut md = create(&dir.join("mape.md"))?;
            write_mape_markdown(&mut md, &report)?;
            md.flush()?;
            print_file(&dir.join("mape.md"))
        }
        Command::Calibrate { predictor } => {
            let cfg = scenario(g)?;
            let kind = predictor.or(cfg.calibration_predictor).unwrap_or(cfg.predictor);
            if kind == PredictorKind::None {
                return Err(Error::Config("calibration needs a predictor (actual, aqt or simml)".into()));
            }
            let model = if kind == PredictorKind::Simml {
                let path = cfg.model.as_ref().ok_or_else(|| Error::Config("the simml predictor needs `model`".into()))?;
                Some(std::sync::Arc::new(phc_rtlos::simml::KnnModel::load(path)?))
            } else {
                None
            };
            cfg.validate()?;
            let settings = cfg.calibration.clone().unwrap_or_else(CalibrationSettings::default);
            let cal = effective_lambda(&cfg.network(kind), settings, Predictor::new(kind, model)?, cfg.seed)?;
            let dir = out_dir(g, &cfg);
            write_lambda_trace(create(&dir.join("lambda_trace.csv"))?, &cal)?;
            println!(
                "effective interarrival times {:?} ({} after {} windows)",
                cal.lambda_eff,
                if cal.converged { "converged" } else { "not converged" },
                cal.trace.len()
            );
            Ok(())
        }
        Command::Sweep { rates } => {
            let cfg = scenario(g)?;
            if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Config(format!("compliance rate {r} outside [0, 1]")));
            }
            let sweep = compliance_sweep(&cfg, &rates, options(g))?;
            let dir = out_dir(g, &cfg);
            write_sweep(create(&dir.join("sweep.csv"))?, &sweep, &cfg.facility_names())?;
            print_file(&dir.join("sweep.csv"))
        }
        Command::Report { runs } => {
            let tables = runs
                .iter()
                .map(|dir| {
                    let label = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
                    read_summary(&label, BufReader::new(File::open(dir.join("summary.csv"))?))
                })
                .collect::<Result<Vec<_>>>()?;
            match &g.out {
                Some(dir) => {
                    let mut out = create(&dir.join("report.md"))?;
                    merge_summaries(&mut out, &tables)?;
                    out.flush()?;
                    print_file(&dir.join("report.md"))
                }
                None => merge_summaries(io::stdout().lock(), &tables),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
