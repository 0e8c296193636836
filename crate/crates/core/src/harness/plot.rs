//! SVG rendering of experiment CSV files. Pure presentation: no metric is
//! computed here.

use super::output::{read_metrics_csv, read_table, ROC_COLUMNS};
use crate::error::{Error, Result};
use plotters::prelude::*;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// PMD against PFA, one curve per sweep value (reads `roc.csv`).
    Roc,
    /// eMBB and MTD NMSE against the sweep value (reads `metrics.csv`).
    Nmse,
    /// PMD against the sweep value (reads `metrics.csv`).
    Pmd,
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "roc" => Ok(Self::Roc),
            "nmse" => Ok(Self::Nmse),
            "pmd" => Ok(Self::Pmd),
            _ => Err(Error::Config(format!("unknown plot kind '{s}'"))),
        }
    }
}

impl PlotKind {
    fn suffix(self) -> &'static str {
        match self {
            Self::Roc => "roc",
            Self::Nmse => "nmse",
            Self::Pmd => "pmd",
        }
    }
}

/// Floor for log axes so exact zeros stay visible.
const LOG_FLOOR: f64 = 1e-4;

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn render(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> Result<()> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::Schema("nothing to plot".into()));
    }
    let fx = |x: f64| if log_x { x.max(LOG_FLOOR).log10() } else { x };
    let fy = |y: f64| y.max(LOG_FLOOR).log10();
    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(fx(p.0)), b.max(fx(p.0))));
    let (mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(fy(p.1)), b.max(fy(p.1))));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    let x_fmt = |v: &f64| if log_x { format!("1e{v:.1}") } else { format!("{v:.3}") };
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(format!("log10 {y_label}"))
        .x_label_formatter(&x_fmt)
        .draw()
        .map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(s.points.iter().map(|p| (fx(p.0), fy(p.1))), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Schema(format!("non-numeric entry '{s}'")))
}

/// Renders `csv` as an SVG next to it (`<stem>_<kind>.svg`) and returns the
/// image path.
pub fn plot_csv(csv: &Path, kind: PlotKind) -> Result<PathBuf> {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let out = csv.with_file_name(format!("{stem}_{}.svg", kind.suffix()));
    match kind {
        PlotKind::Roc => {
            let rows = read_table(csv, &ROC_COLUMNS)?;
            let mut series: Vec<Series> = Vec::new();
            let var = rows.first().map(|r| r["sweep_var"].clone()).unwrap_or_default();
            for r in &rows {
                let label = if r["value"].is_empty() { "base".to_string() } else { format!("{var} = {}", r["value"]) };
                let pt = (num(&r["pfa"])?, num(&r["pmd"])?);
                match series.iter_mut().find(|s| s.label == label) {
                    Some(s) => s.points.push(pt),
                    None => series.push(Series { label, points: vec![pt] }),
                }
            }
            render(&out, "ROC", "PFA", "PMD", &series, true)?;
        }
        PlotKind::Nmse | PlotKind::Pmd => {
            let rows = read_metrics_csv(csv)?;
            let wanted: &[&str] = if kind == PlotKind::Nmse { &["nmse_embb", "nmse_mtd"] } else { &["pmd"] };
            let var = rows.first().map(|r| r.sweep_var.clone()).unwrap_or_default();
            let mut series = Vec::new();
            for &metric in wanted {
                let mut points = Vec::new();
                for r in rows.iter().filter(|r| r.metric == metric) {
                    if let Some(m) = r.mean {
                        points.push((num(&r.value)?, m));
                    }
                }
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                if !points.is_empty() {
                    series.push(Series { label: metric.to_string(), points });
                }
            }
            let y = if kind == PlotKind::Nmse { "NMSE" } else { "PMD" };
            render(&out, &format!("{y} vs {var}"), &var, y, &series, false)?;
        }
    }
    Ok(out)
}
