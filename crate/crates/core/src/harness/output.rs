//! CSV output.
//!
//! `metrics.csv` holds one row per (sweep point, metric) with columns
//! `sweep_var, value, metric, mean, ci95, trials`; `ci95` is empty when fewer
//! than two samples contributed. `roc.csv` holds the full curves with columns
//! `sweep_var, value, zeta, pmd, pfa`.

use super::ExperimentResult;
use crate::error::{Error, Result};
use crate::metrics::MeanCi;
use std::collections::HashMap;
use std::path::Path;

pub const METRICS_COLUMNS: [&str; 6] = ["sweep_var", "value", "metric", "mean", "ci95", "trials"];
pub const ROC_COLUMNS: [&str; 5] = ["sweep_var", "value", "zeta", "pmd", "pfa"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub sweep_var: String,
    pub value: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub ci95: Option<f64>,
    pub trials: usize,
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn metric_rows(result: &ExperimentResult) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for p in &result.points {
        let r = &p.report;
        let mut push = |metric: &str, mean: Option<f64>, ci95: Option<f64>, trials: usize| {
            rows.push(MetricRow { sweep_var: result.sweep_var.clone(), value: p.value.clone(), metric: metric.into(), mean, ci95, trials });
        };
        let mut stat = |metric: &str, m: &MeanCi| push(metric, m.mean(), m.ci95(), m.count());
        stat("pmd", &r.pmd);
        stat("pfa", &r.pfa);
        stat("nmse_embb", &r.nmse_embb);
        stat("nmse_mtd", &r.nmse_mtd);
        stat("solver_iterations", &r.solver_iterations);
        push("p_out", (r.outage_pairs > 0).then_some(r.p_out), r.p_out_ci, r.outage_pairs);
        push("zeta", r.zeta, None, r.trials);
        push("failed_trials", Some(r.failed as f64), None, r.trials + r.failed);
    }
    rows
}

pub fn write_metrics_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_COLUMNS)?;
    for r in metric_rows(result) {
        w.write_record([r.sweep_var, r.value, r.metric, fmt(r.mean), fmt(r.ci95), r.trials.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ROC_COLUMNS)?;
    for p in &result.points {
        for pt in &p.report.roc {
            w.write_record([result.sweep_var.clone(), p.value.clone(), pt.zeta.to_string(), pt.pmd.to_string(), pt.pfa.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows of a CSV file keyed by the named columns, which must all be present.
pub fn read_table(path: &Path, required: &[&str]) -> Result<Vec<HashMap<String, String>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let missing: Vec<&str> = required.iter().copied().filter(|c| !headers.iter().any(|h| h == c)).collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!("{} lacks column(s) {}", path.display(), missing.join(", "))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(headers.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
    }
    Ok(out)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Schema(format!("non-numeric entry '{s}'")))
        }
    };
    read_table(path, &METRICS_COLUMNS)?
        .into_iter()
        .map(|m| {
            Ok(MetricRow {
                sweep_var: m["sweep_var"].clone(),
                value: m["value"].clone(),
                metric: m["metric"].clone(),
                mean: parse(&m["mean"])?,
                ci95: parse(&m["ci95"])?,
                trials: m["trials"].parse().map_err(|_| Error::Schema(format!("bad trial count '{}'", m["trials"])))?,
            })
        })
        .collect()
}
