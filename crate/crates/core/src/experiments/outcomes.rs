use std::io::Write;

use crate::error::{Error, Result};
use crate::phc::{PatientRecord, StationId};
use crate::rthfa::NetworkRun;

/// Utilization and wait column stems per station.
const STATION_COLUMNS: [(&str, &str); 4] = [("rho_ncd", "w_ncd"), ("rho_doc", "w_opd"), ("rho_lab", "w_lab"), ("rho_phar", "w_phar")];

/// Percentage gap between the largest and smallest value.
///
/// Zero when fewer than two values are given or the largest is not positive.
pub fn delta_net(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        (max - min).abs() / max * 100.0
    } else {
        0.0
    }
}

/// Percentage of patients served somewhere other than their preferred facility.
pub fn beta_diverted<'a>(records: impl IntoIterator<Item = &'a PatientRecord>) -> f64 {
    let (mut moved, mut n) = (0u64, 0u64);
    for r in records {
        n += 1;
        moved += u64::from(r.visited != r.preferred);
    }
    if n == 0 {
        0.0
    } else {
        100.0 * moved as f64 / n as f64
    }
}

fn mean_or_zero(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Column names of one replication row, in the order of [`replication_metrics`].
pub fn metric_names(facilities: &[String]) -> Vec<String> {
    let mut names = Vec::new();
    for f in facilities {
        let f = column_stem(f);
        for (rho, _) in STATION_COLUMNS {
            names.push(format!("{f}_{rho}"));
        }
        for (_, w) in STATION_COLUMNS {
            names.push(format!("{f}_{w}"));
        }
        names.push(format!("{f}_los"));
        names.push(format!("{f}_patients"));
    }
    names.push("beta".into());
    for (rho, _) in STATION_COLUMNS {
        names.push(format!("dnet_{rho}"));
    }
    for (_, w) in STATION_COLUMNS {
        names.push(format!("dnet_{w}"));
    }
    names.push("dnet_los".into());
    names.push("predictor_failures".into());
    names
}

fn column_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

/// Outcomes of one replication over patients arriving after warm-up.
pub fn replication_metrics(run: &NetworkRun) -> Vec<f64> {
    let m = run.utilization.len();
    let mut rho = vec![[0.0; 4]; m];
    let mut wait = vec![[0.0; 4]; m];
    let mut los = vec![0.0; m];
    let mut out = Vec::new();
    for j in 0..m {
        let here = || run.records.iter().filter(move |r| r.visited == j);
        rho[j] = run.utilization[j];
        for s in StationId::ALL {
            wait[j][s.index()] = mean_or_zero(here().filter_map(|r| r.visit(s).map(|v| v.wait())));
        }
        los[j] = mean_or_zero(here().filter_map(PatientRecord::los));
        out.extend(rho[j]);
        out.extend(wait[j]);
        out.push(los[j]);
        out.push(here().count() as f64);
    }
    out.push(beta_diverted(&run.records));
    for s in 0..4 {
        out.push(delta_net(&rho.iter().map(|r| r[s]).collect::<Vec<_>>()));
    }
    for s in 0..4 {
        out.push(delta_net(&wait.iter().map(|w| w[s]).collect::<Vec<_>>()));
    }
    out.push(delta_net(&los));
    out.push(run.predictor_failures as f64);
    out
}

/// Mean and sample standard deviation of each metric across replications.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub replications: usize,
}

impl OutcomeStats {
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("no replications to aggregate".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(Error::Data(format!("row has {} values for {} metrics", bad.len(), names.len())));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; names.len()];
        let mut sd = vec![0.0; names.len()];
        for (i, (m, s)) in mean.iter_mut().zip(&mut sd).enumerate() {
            *m = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            if rows.len() > 1 {
                *s = (rows.iter().map(|r| (r[i] - *m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            }
        }
        Ok(OutcomeStats { names, mean, sd, replications: rows.len() })
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.mean[i], self.sd[i]))
    }

    pub fn mean_of(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |(m, _)| m)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "mean", "sd"])?;
        for i in 0..self.names.len() {
            w.write_record([self.names[i].clone(), self.mean[i].to_string(), self.sd[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Table with one row per outcome, one column per facility and the gap column.
    pub fn write_markdown<W: Write>(&self, mut out: W, title: &str, facilities: &[String]) -> Result<()> {
        let cell = |name: &str| match self.get(name) {
            Some((m, s)) => format!("{m:.3} ({s:.3})"),
            None => "-".into(),
        };
        writeln!(out, "## {title}\n")?;
        writeln!(out, "{} replications, mean (SD).\n", self.replications)?;
        write!(out, "| outcome |")?;
        for f in facilities {
            write!(out, " {f} |")?;
        }
        writeln!(out, " gap % |")?;
        writeln!(out, "|---|{}---|", "---|".repeat(facilities.len()))?;
        let rows = STATION_COLUMNS.iter().map(|c| c.0).chain(STATION_COLUMNS.iter().map(|c| c.1)).chain(["los"]);
        for stem in rows {
            write!(out, "| {stem} |")?;
            for f in facilities {
                write!(out, " {} |", cell(&format!("{}_{stem}", column_stem(f))))?;
            }
            writeln!(out, " {} |", cell(&format!("dnet_{stem}")))?;
        }
        writeln!(out, "\ndiverted %: {}\n", cell("beta"))?;
        Ok(())
    }
}

/// Per-replication rows with their seeds.
pub fn write_outcomes<W: Write>(out: W, names: &[String], rows: &[(u64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replication", "seed"].into_iter().map(String::from).chain(names.iter().cloned()))?;
    for (i, (seed, row)) in rows.iter().enumerate() {
        w.write_record([i.to_string(), seed.to_string()].into_iter().chain(row.iter().map(f64::to_string)))?;
    }
    w.flush()?;
    Ok(())
}
