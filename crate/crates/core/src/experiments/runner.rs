use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::config::ScenarioConfig;
use crate::experiments::outcomes::{metric_names, replication_metrics, write_outcomes, OutcomeStats};
use crate::rthfa::{
    effective_lambda, run_network, write_decisions, write_lambda_trace, AssignmentDecision, LambdaCalibration, Predictor,
    PredictorKind,
};
use crate::simml::{samples_from_records, write_dataset, KnnModel, Sample};

/// What to keep besides the outcome row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; zero lets the pool decide.
    pub jobs: usize,
    /// Keep the assignment audit of the first replication.
    pub decisions: bool,
    /// Keep feature/label samples of every replication.
    pub dataset: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, decisions: false, dataset: false }
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationOutput {
    pub seed: u64,
    pub metrics: Vec<f64>,
    pub calibration: Option<LambdaCalibration>,
    pub decisions: Vec<AssignmentDecision>,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub facilities: Vec<String>,
    pub names: Vec<String>,
    /// Seed and outcome row per replication, in index order.
    pub rows: Vec<(u64, Vec<f64>)>,
    pub stats: OutcomeStats,
    /// Calibration of the first replication.
    pub calibration: Option<LambdaCalibration>,
    /// Audit of the first replication.
    pub decisions: Vec<AssignmentDecision>,
    pub samples: Vec<Sample>,
}

fn needs_model(scenario: &ScenarioConfig) -> bool {
    scenario.predictor == PredictorKind::Simml
        || (scenario.calibration.is_some() && scenario.calibration_predictor == Some(PredictorKind::Simml))
}

/// Loads the fitted model when the scenario uses the learned predictor.
pub fn load_model(scenario: &ScenarioConfig) -> Result<Option<Arc<KnnModel>>> {
    if !needs_model(scenario) {
        return Ok(None);
    }
    let path = scenario
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("the simml predictor needs `model = <path>`".into()))?;
    Ok(Some(Arc::new(KnnModel::load(path)?)))
}

/// One replication seeded with `seed + index`.
///
/// With calibration configured, effective interarrival times are either
/// fitted online during warm-up or, when `calibration_predictor` names a
/// different policy, fitted beforehand under that policy and frozen.
pub fn run_replication(
    scenario: &ScenarioConfig,
    index: usize,
    model: Option<Arc<KnnModel>>,
    options: RunOptions,
) -> Result<ReplicationOutput> {
    let seed = scenario.seed.wrapping_add(index as u64);
    let mut net = scenario.network(scenario.predictor);
    net.collect_decisions = options.decisions && index == 0;
    net.collect_features = options.dataset;
    let mut calibration = None;
    let mut online = false;
    if let (Some(settings), true) = (&scenario.calibration, scenario.predictor != PredictorKind::None) {
        let source = scenario.calibration_predictor.unwrap_or(scenario.predictor);
        if source == scenario.predictor {
            net.calibration = Some(settings.clone());
            online = true;
        } else {
            let cal = effective_lambda(&scenario.network(source), settings.clone(), Predictor::new(source, model.clone())?, seed)?;
            net.initial_interarrivals = Some(cal.lambda_eff.clone());
            calibration = Some(cal);
        }
    }
    let predictor = Predictor::new(scenario.predictor, model)?;
    let settings = net.calibration.clone();
    let run = run_network(Arc::new(net), predictor, seed)?;
    if online {
        calibration = Some(LambdaCalibration {
            settings: settings.expect("online calibration has settings"),
            initial: run.initial_interarrivals.clone(),
            trace: run.lambda_trace.clone(),
            converged: run.converged_at.is_some(),
            lambda_eff: run.interarrivals.clone(),
        });
    }
    let samples = if options.dataset { samples_from_records(&run.records) } else { Vec::new() };
    Ok(ReplicationOutput {
        seed,
        metrics: replication_metrics(&run),
        calibration,
        decisions: run.decisions,
        samples,
    })
}

/// Runs every replication and aggregates in index order.
pub fn run_scenario(scenario: &ScenarioConfig, options: RunOptions) -> Result<ScenarioResult> {
    scenario.validate()?;
    let model = load_model(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::Data(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<ReplicationOutput>> = pool.install(|| {
        (0..scenario.replications)
            .into_par_iter()
            .map(|i| run_replication(scenario, i, model.clone(), options))
            .collect()
    });
    let mut rows = Vec::with_capacity(outputs.len());
    let mut calibration = None;
    let mut decisions = Vec::new();
    let mut samples = Vec::new();
    for (index, out) in in_order(outputs)?.into_iter().enumerate() {
        if index == 0 {
            calibration = out.calibration;
            decisions = out.decisions;
        }
        samples.extend(out.samples);
        rows.push((out.seed, out.metrics));
    }
    let facilities = scenario.facility_names();
    let names = metric_names(&facilities);
    let metrics: Vec<Vec<f64>> = rows.iter().map(|(_, r)| r.clone()).collect();
    let stats = OutcomeStats::from_rows(names.clone(), &metrics)?;
    Ok(ScenarioResult { facilities, names, rows, stats, calibration, decisions, samples })
}

/// Fails with the index of the first failed replication.
fn in_order(outputs: Vec<Result<ReplicationOutput>>) -> Result<Vec<ReplicationOutput>> {
    outputs
        .into_iter()
        .enumerate()
        .map(|(index, out)| out.map_err(|e| Error::Replication { index, source: Box::new(e) }))
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `outcomes.csv`, `summary.csv`, `summary.md` and, when present,
/// `assignments.csv`, `lambda_trace.csv` and `dataset.csv`.
pub fn write_scenario_outputs(dir: &Path, title: &str, result: &ScenarioResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_outcomes(create(dir, "outcomes.csv")?, &result.names, &result.rows)?;
    result.stats.write_csv(create(dir, "summary.csv")?)?;
    let mut md = create(dir, "summary.md")?;
    result.stats.write_markdown(&mut md, title, &result.facilities)?;
    md.flush()?;
    if !result.decisions.is_empty() {
        write_decisions(create(dir, "assignments.csv")?, &result.decisions, result.facilities.len())?;
    }
    if let Some(cal) = &result.calibration {
        write_lambda_trace(create(dir, "lambda_trace.csv")?, cal)?;
    }
    if !result.samples.is_empty() {
        let mut out = create(dir, "dataset.csv")?;
        write_dataset(&mut out, &result.samples)?;
        out.flush()?;
    }
    Ok(())
}

/// One aggregated run per compliance rate.
pub fn compliance_sweep(scenario: &ScenarioConfig, rates: &[f64], options: RunOptions) -> Result<Vec<(f64, OutcomeStats)>> {
    rates
        .iter()
        .map(|&rate| {
            let cfg = ScenarioConfig { compliance: rate, ..scenario.clone() };
            Ok((rate, run_scenario(&cfg, RunOptions { decisions: false, dataset: false, ..options })?.stats))
        })
        .collect()
}

/// Plot-ready gaps and per-facility stays by compliance rate.
pub fn write_sweep<W: Write>(out: W, sweep: &[(f64, OutcomeStats)], facilities: &[String]) -> Result<()> {
    let mut columns = vec!["dnet_rho_doc".to_string(), "dnet_w_opd".to_string(), "dnet_los".to_string()];
    let los = metric_names(facilities).into_iter().filter(|n| n.ends_with("_los") && !n.starts_with("dnet_"));
    columns.extend(los);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rate".to_string()];
    for c in &columns {
        header.push(c.clone());
        header.push(format!("{c}_sd"));
    }
    w.write_record(&header)?;
    for (rate, stats) in sweep {
        let mut row = vec![rate.to_string()];
        for c in &columns {
            let (m, s) = stats.get(c).ok_or_else(|| Error::Data(format!("missing metric {c}")))?;
            row.push(m.to_string());
            row.push(s.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
