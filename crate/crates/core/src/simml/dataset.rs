use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::phc::{PatientRecord, StationId};
use crate::simml::features::{FEATURE_COUNT, FEATURE_NAMES, SCHEMA_VERSION};
use crate::simml::knn::KnnModel;
use crate::simml::metrics::{iqr_keep, mape, train_test_split};

pub const LABEL_COLUMN: &str = "label_los_min";

/// Station sequence an outpatient actually followed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoutingCase {
    /// Screening, doctor, pharmacy.
    ScreenedNoLab = 1,
    /// Screening, doctor, laboratory, pharmacy.
    ScreenedLab = 2,
    /// Doctor, laboratory, pharmacy.
    DirectLab = 3,
    /// Doctor, pharmacy.
    DirectNoLab = 4,
}

impl RoutingCase {
    pub const ALL: [RoutingCase; 4] = [
        RoutingCase::ScreenedNoLab,
        RoutingCase::ScreenedLab,
        RoutingCase::DirectLab,
        RoutingCase::DirectNoLab,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        RoutingCase::ALL.into_iter().find(|c| c.number() == n)
    }

    pub fn of(record: &PatientRecord) -> Self {
        let ncd = record.visit(StationId::NcdNurse).is_some();
        let lab = record.visit(StationId::Laboratory).is_some();
        match (ncd, lab) {
            (true, false) => RoutingCase::ScreenedNoLab,
            (true, true) => RoutingCase::ScreenedLab,
            (false, true) => RoutingCase::DirectLab,
            (false, false) => RoutingCase::DirectNoLab,
        }
    }
}

/// One completed outpatient visit with its decision-time features.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub patient: u64,
    pub facility: usize,
    pub arrival: f64,
    pub case: RoutingCase,
    pub features: Vec<f64>,
    pub label: f64,
    /// Realized wait plus service per station, absent where not visited.
    pub station_actual: [Option<f64>; 4],
    /// Analytical prediction per station for the route actually taken.
    pub aqt_station: [f64; 4],
}

impl Sample {
    pub fn aqt_total(&self) -> f64 {
        self.aqt_station.iter().sum()
    }
}

/// Samples for every finished record carrying decision-time features.
pub fn samples_from_records(records: &[PatientRecord]) -> Vec<Sample> {
    records
        .iter()
        .filter_map(|r| {
            let features = r.decision_features.clone()?;
            let label = r.los()?;
            Some(Sample {
                patient: r.id,
                facility: r.visited,
                arrival: r.arrival,
                case: RoutingCase::of(r),
                features,
                label,
                station_actual: StationId::ALL.map(|s| r.visit(s).map(|v| v.sojourn())),
                aqt_station: r.aqt_prediction.unwrap_or([f64::NAN; 4]),
            })
        })
        .collect()
}

fn aux_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["patient", "facility", "arrival", "case"].map(String::from).to_vec();
    cols.extend(StationId::ALL.map(|s| format!("{}_actual", s.label())));
    cols.extend(StationId::ALL.map(|s| format!("{}_aqt", s.label())));
    cols
}

/// CSV with a version comment, feature columns, the label, then bookkeeping columns.
pub fn write_dataset<W: Write>(mut out: W, samples: &[Sample]) -> Result<()> {
    writeln!(out, "# phc-rtlos dataset schema {SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    header.push(LABEL_COLUMN.into());
    header.extend(aux_columns());
    w.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.features.iter().map(f64::to_string).collect();
        row.push(s.label.to_string());
        row.extend([
            s.patient.to_string(),
            s.facility.to_string(),
            s.arrival.to_string(),
            s.case.number().to_string(),
        ]);
        row.extend(s.station_actual.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        row.extend(s.aqt_station.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<Sample>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = r.headers()?.clone();
    let expected: Vec<String> = FEATURE_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once(LABEL_COLUMN.to_string()))
        .chain(aux_columns())
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Data(format!("dataset header does not match schema {SCHEMA_VERSION}")));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Data(format!("bad number `{s}`"))) };
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let features = (0..FEATURE_COUNT).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
        let base = FEATURE_COUNT + 1;
        let case = rec[base + 3]
            .parse::<u8>()
            .ok()
            .and_then(RoutingCase::from_number)
            .ok_or_else(|| Error::Data(format!("bad routing case `{}`", &rec[base + 3])))?;
        let mut station_actual = [None; 4];
        let mut aqt_station = [0.0; 4];
        for i in 0..4 {
            let cell = &rec[base + 4 + i];
            station_actual[i] = if cell.is_empty() { None } else { Some(num(cell)?) };
            aqt_station[i] = num(&rec[base + 8 + i])?;
        }
        samples.push(Sample {
            patient: rec[base].parse().map_err(|_| Error::Data("bad patient id".into()))?,
            facility: rec[base + 1].parse().map_err(|_| Error::Data("bad facility".into()))?,
            arrival: num(&rec[base + 2])?,
            case,
            features,
            label: num(&rec[FEATURE_COUNT])?,
            station_actual,
            aqt_station,
        });
    }
    Ok(samples)
}

/// MAPE per routing case and per station; `None` marks an empty stratum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapeTable {
    pub overall: Option<f64>,
    /// Indexed by routing case number minus one.
    pub flow: [Option<f64>; 4],
    /// Indexed by station.
    pub station: [Option<f64>; 4],
}

fn mape_where(actual: impl Iterator<Item = Option<(f64, f64)>>) -> Result<Option<f64>> {
    let (a, p): (Vec<f64>, Vec<f64>) = actual.flatten().unzip();
    if a.is_empty() {
        Ok(None)
    } else {
        mape(&a, &p).map(Some)
    }
}

/// Flow-wise MAPE of total predictions.
pub fn evaluate_flowwise(samples: &[Sample], predictions: &[f64]) -> Result<(Option<f64>, [Option<f64>; 4])> {
    if samples.len() != predictions.len() {
        return Err(Error::Data("one prediction per sample required".into()));
    }
    let pairs = || samples.iter().zip(predictions).map(|(s, &p)| (s, (s.label, p)));
    let overall = mape_where(pairs().map(|(_, ap)| Some(ap)))?;
    let mut flow = [None; 4];
    for case in RoutingCase::ALL {
        flow[case.number() as usize - 1] = mape_where(pairs().map(|(s, ap)| (s.case == case).then_some(ap)))?;
    }
    Ok((overall, flow))
}

/// Station-wise MAPE; only samples that visited a station count for it.
pub fn evaluate_stationwise(samples: &[Sample], predictions: &[[f64; 4]]) -> Result<[Option<f64>; 4]> {
    if samples.len() != predictions.len() {
        return Err(Error::Data("one prediction per sample required".into()));
    }
    let mut out = [None; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = mape_where(samples.iter().zip(predictions).map(|(s, p)| s.station_actual[i].map(|a| (a, p[i]))))?;
    }
    Ok(out)
}

/// Training settings for the nearest-neighbour predictor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub k: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub iqr_filter: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings { k: 2, train_fraction: 0.75, seed: 0, iqr_filter: true }
    }
}

#[derive(Clone, Debug)]
pub struct TrainEvalReport {
    pub samples: usize,
    pub kept: usize,
    pub train: usize,
    pub test: usize,
    pub knn: MapeTable,
    pub aqt: MapeTable,
    /// Model of total length of stay, fitted on the training rows.
    pub model: KnnModel,
}

/// Filters outliers, splits, fits total and per-station models, and scores
/// both the fitted models and the analytical predictions on the test rows.
pub fn train_and_evaluate(samples: &[Sample], settings: TrainSettings) -> Result<TrainEvalReport> {
    if samples.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let kept: Vec<&Sample> = if settings.iqr_filter {
        iqr_keep(&labels)?.into_iter().map(|i| &samples[i]).collect()
    } else {
        samples.iter().collect()
    };
    let (train_idx, test_idx) = train_test_split(kept.len(), settings.train_fraction, settings.seed);
    if train_idx.len() < settings.k || test_idx.is_empty() {
        return Err(Error::Data(format!(
            "{} samples are too few for k = {} with train fraction {}",
            kept.len(),
            settings.k,
            settings.train_fraction
        )));
    }
    let train: Vec<&Sample> = train_idx.iter().map(|&i| kept[i]).collect();
    let test: Vec<Sample> = test_idx.iter().map(|&i| kept[i].clone()).collect();
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let model = KnnModel::fit(
        train.iter().map(|s| s.features.clone()).collect(),
        train.iter().map(|s| s.label).collect(),
        settings.k,
        names.clone(),
    )?;
    let knn_total: Vec<f64> = test.iter().map(|s| model.predict(&s.features)).collect();
    let mut knn_station = vec![[f64::NAN; 4]; test.len()];
    for st in 0..4 {
        let rows: Vec<&&Sample> = train.iter().filter(|s| s.station_actual[st].is_some()).collect();
        if rows.len() < settings.k {
            continue;
        }
        let station_model = KnnModel::fit(
            rows.iter().map(|s| s.features.clone()).collect(),
            rows.iter().map(|s| s.station_actual[st].expect("filtered")).collect(),
            settings.k,
            names.clone(),
        )?;
        for (pred, s) in knn_station.iter_mut().zip(&test) {
            if s.station_actual[st].is_some() {
                pred[st] = station_model.predict(&s.features);
            }
        }
    }
    let (overall, flow) = evaluate_flowwise(&test, &knn_total)?;
    let knn = MapeTable { overall, flow, station: evaluate_stationwise(&test, &knn_station)? };
    let aqt_total: Vec<f64> = test.iter().map(Sample::aqt_total).collect();
    let aqt_station: Vec<[f64; 4]> = test.iter().map(|s| s.aqt_station).collect();
    let (overall, flow) = evaluate_flowwise(&test, &aqt_total)?;
    let aqt = MapeTable { overall, flow, station: evaluate_stationwise(&test, &aqt_station)? };
    Ok(TrainEvalReport {
        samples: samples.len(),
        kept: kept.len(),
        train: train.len(),
        test: test.len(),
        knn,
        aqt,
        model,
    })
}
