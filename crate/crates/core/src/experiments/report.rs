use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::phc::StationId;
use crate::simml::{MapeTable, RoutingCase, TrainEvalReport};

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Long-format accuracy table: predictor, stratum kind, stratum, MAPE in percent.
///
/// Empty strata are written with an empty MAPE field.
pub fn write_mape_csv<W: Write>(out: W, report: &TrainEvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["predictor", "stratum", "key", "mape_pct"])?;
    for (name, table) in [("knn", &report.knn), ("aqt", &report.aqt)] {
        for (stratum, key, value) in mape_rows(table) {
            w.write_record([name, stratum, &key, &cell(value)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn mape_rows(table: &MapeTable) -> Vec<(&'static str, String, Option<f64>)> {
    let mut rows = vec![("overall", "all".to_string(), table.overall)];
    for case in RoutingCase::ALL {
        rows.push(("case", case.number().to_string(), table.flow[case.number() as usize - 1]));
    }
    for s in StationId::ALL {
        rows.push(("station", s.label().to_string(), table.station[s.index()]));
    }
    rows
}

pub fn write_mape_markdown<W: Write>(mut out: W, report: &TrainEvalReport) -> Result<()> {
    writeln!(
        out,
        "{} samples, {} after outlier filter, {} train / {} test.\n",
        report.samples, report.kept, report.train, report.test
    )?;
    writeln!(out, "| stratum | KNN MAPE % | AQT MAPE % |\n|---|---|---|")?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    for ((stratum, key, knn), (_, _, aqt)) in mape_rows(&report.knn).into_iter().zip(mape_rows(&report.aqt)) {
        writeln!(out, "| {stratum} {key} | {} | {} |", fmt(knn), fmt(aqt))?;
    }
    Ok(())
}

/// A `summary.csv` labelled by the run it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryTable {
    pub label: String,
    pub rows: Vec<(String, f64, f64)>,
}

pub fn read_summary<R: Read>(label: &str, input: R) -> Result<SummaryTable> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != ["metric", "mean", "sd"] {
        return Err(Error::Data(format!("{label}: not a summary file")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i].parse::<f64>().map_err(|e| Error::Data(format!("{label}: {}: {e}", &rec[0])))
        };
        rows.push((rec[0].to_string(), num(1)?, num(2)?));
    }
    Ok(SummaryTable { label: label.to_string(), rows })
}

/// Side-by-side markdown of several summaries; metrics keep first-seen order.
pub fn merge_summaries<W: Write>(mut out: W, tables: &[SummaryTable]) -> Result<()> {
    let mut metrics: Vec<&str> = Vec::new();
    for t in tables {
        for (m, _, _) in &t.rows {
            if !metrics.contains(&m.as_str()) {
                metrics.push(m);
            }
        }
    }
    write!(out, "| metric |")?;
    for t in tables {
        write!(out, " {} |", t.label)?;
    }
    writeln!(out, "\n|---|{}", "---|".repeat(tables.len()))?;
    for m in metrics {
        write!(out, "| {m} |")?;
        for t in tables {
            match t.rows.iter().find(|r| r.0 == m) {
                Some((_, mean, sd)) => write!(out, " {mean:.3} ({sd:.3}) |")?,
                None => write!(out, " - |")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
