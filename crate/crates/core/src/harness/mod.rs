//! Experiment orchestration: sweeps, parallel trials, aggregation, output.

pub mod output;
pub mod plot;
pub mod trial;

pub use trial::{run_trial, TrialOutput};

use crate::channel::{place_devices, DevicePlacement};
use crate::codebook_io;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_at, outage_probability, pmd_at_pfa, roc_curve, MeanCi, RocPoint};
use crate::rng::{stream, Domain};
use crate::scalar::Real;
use crate::waveform::{generate_codebook, Codebook};
use rayon::prelude::*;
use std::any::Any;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COEXIST_OUT_DIR";

/// One sweep axis and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Name written to the `sweep_var` column.
    pub axis: String,
    /// Configuration key the values are applied to.
    pub key: String,
    pub values: Vec<String>,
}

fn axis_key(axis: &str) -> Option<&'static str> {
    Some(match axis {
        "snr_e" | "snr_embb" | "snr_embb_db" => "snr_embb_db",
        "snr_n" | "snr_mtd" | "snr_mtd_db" => "snr_mtd_db",
        "L" | "pilot_len" => "pilot_len",
        "M" | "antennas" => "antennas",
        "Q" | "q_messages" => "q_messages",
        "eps" | "epsilon" => "epsilon",
        "E" | "n_embb" => "n_embb",
        "N" | "n_mtds" => "n_mtds",
        "T" | "coherence_len" => "coherence_len",
        _ => return None,
    })
}

impl Sweep {
    pub fn new(axis: &str, values: Vec<String>) -> Result<Self> {
        let key = match axis_key(axis) {
            Some(k) => k.to_string(),
            None => {
                // any other configuration key may be swept as well
                NetworkConfig::desk().set(axis, values.first().map(String::as_str).unwrap_or(""))?;
                axis.to_string()
            }
        };
        if values.is_empty() {
            return Err(Error::Config(format!("sweep over {axis} has no values")));
        }
        Ok(Self { axis: axis.to_string(), key, values })
    }

    /// Parses `AXIS=v1,v2,...`.
    pub fn parse(arg: &str) -> Result<Self> {
        let (axis, vals) = arg.split_once('=').ok_or_else(|| Error::Config(format!("sweep '{arg}' is not AXIS=v1,v2,...")))?;
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        Self::new(axis.trim(), values)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: NetworkConfig,
    pub sweep: Option<Sweep>,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl ExperimentPlan {
    pub fn new(base: NetworkConfig) -> Self {
        Self { base, sweep: None, out_dir: None, plot: false, jobs: 1 }
    }

    pub fn with_sweep(mut self, sweep: Sweep) -> Self {
        self.sweep = Some(sweep);
        self
    }

    /// Configuration for every sweep point, validated.
    pub fn points(&self) -> Result<Vec<(String, NetworkConfig)>> {
        let mut out = Vec::new();
        match &self.sweep {
            None => {
                self.base.validate()?;
                out.push((String::new(), self.base.clone()));
            }
            Some(sw) => {
                if sw.values.is_empty() {
                    return Err(Error::Config("empty sweep".into()));
                }
                for v in &sw.values {
                    let mut cfg = self.base.clone();
                    cfg.set(&sw.key, v)?;
                    cfg.validate().map_err(|e| Error::Config(format!("{}={v}: {e}", sw.axis)))?;
                    out.push((v.clone(), cfg));
                }
            }
        }
        Ok(out)
    }

    pub fn sweep_var(&self) -> &str {
        self.sweep.as_ref().map_or("none", |s| s.axis.as_str())
    }
}

/// Aggregated metrics for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub trials: usize,
    pub failed: usize,
    /// Threshold meeting the false-alarm target.
    pub zeta: Option<f64>,
    pub pmd: MeanCi,
    pub pfa: MeanCi,
    pub nmse_embb: MeanCi,
    pub nmse_mtd: MeanCi,
    pub p_out: f64,
    pub p_out_ci: Option<f64>,
    pub outage_pairs: usize,
    pub solver_iterations: MeanCi,
    pub roc: Vec<RocPoint>,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub value: String,
    pub config: NetworkConfig,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub sweep_var: String,
    pub points: Vec<PointResult>,
}

type CacheMap = HashMap<String, Arc<dyn Any + Send + Sync>>;

fn cache() -> &'static Mutex<CacheMap> {
    static CACHE: OnceLock<Mutex<CacheMap>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn codebook_key<R: Real>(cfg: &NetworkConfig, index: u64) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{:?}|{}|{:?}|{index}",
        std::any::type_name::<R>(),
        cfg.coherence_len,
        cfg.pilot_len,
        cfg.n_embb,
        cfg.n_mtds,
        cfg.q_messages,
        cfg.kappa,
        cfg.chi,
        cfg.pool_cap,
        cfg.shared_pool,
        cfg.pilots,
        cfg.seed,
        cfg.codebook_file,
    )
}

/// Codebook for a configuration, memoised per process. `index` selects an
/// independent draw (0 is the shared per-point codebook).
pub fn codebook_for<R: Real>(cfg: &NetworkConfig, index: u64) -> Result<Arc<Codebook<R>>> {
    let key = codebook_key::<R>(cfg, index);
    if let Some(hit) = cache().lock().expect("codebook cache poisoned").get(&key) {
        if let Ok(cb) = Arc::clone(hit).downcast::<Codebook<R>>() {
            return Ok(cb);
        }
    }
    let cb = match (&cfg.codebook_file, index) {
        (Some(path), 0) => codebook_io::read::<R>(path)?,
        _ => generate_codebook::<R, _>(cfg, cfg.seed, &mut stream(cfg.seed, Domain::Codebook, index))?,
    };
    let cb = Arc::new(cb);
    cache().lock().expect("codebook cache poisoned").insert(key, cb.clone());
    Ok(cb)
}

/// Placement shared by every trial when `freeze_placement` is set.
pub fn frozen_placement(cfg: &NetworkConfig) -> Result<Option<DevicePlacement>> {
    if cfg.freeze_placement {
        Ok(Some(place_devices(cfg, &mut stream(cfg.seed, Domain::Calibration, 0))?))
    } else {
        Ok(None)
    }
}

/// Runs all trials of one configuration in trial order.
pub fn run_point<R: Real>(cfg: &NetworkConfig, jobs: usize) -> Result<(Vec<TrialOutput>, usize)> {
    let cb = codebook_for::<R>(cfg, 0)?;
    let frozen = frozen_placement(cfg)?;
    let work = |i: usize| -> Result<TrialOutput> {
        if cfg.regenerate_codebook {
            let fresh = codebook_for::<R>(cfg, 1 + i as u64)?;
            run_trial(cfg, &fresh, frozen.as_ref(), i)
        } else {
            run_trial(cfg, &cb, frozen.as_ref(), i)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<TrialOutput>> = pool.install(|| (0..cfg.trials).into_par_iter().map(work).collect());
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = 0;
    for r in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => {
                log::warn!("{e}");
                failed += 1;
            }
        }
    }
    if failed * 100 > cfg.trials {
        return Err(Error::Domain(format!("{failed} of {} trials failed", cfg.trials)));
    }
    Ok((ok, failed))
}

/// Aggregates trial outputs; `pfa_target` fixes the operating threshold.
pub fn aggregate(trials: &[TrialOutput], failed: usize, pfa_target: f64) -> Result<MetricsReport> {
    let scores: Vec<_> = trials.iter().map(|t| t.scores.clone()).collect();
    let roc = if scores.is_empty() { Vec::new() } else { roc_curve(&scores, None)? };
    let zeta = pmd_at_pfa(&roc, pfa_target).map(|p| p.zeta);
    let (pmd, pfa) = match zeta {
        Some(z) => evaluate_at(&scores, z),
        None => (MeanCi::default(), MeanCi::default()),
    };
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let nmse_embb = MeanCi::from_values(trials.iter().filter_map(|t| mean(&t.embb.nmse)));
    let nmse_mtd = MeanCi::from_values(trials.iter().filter_map(|t| mean(&t.mtd_nmse)));
    let masks: Vec<Vec<bool>> = trials.iter().map(|t| t.embb.decoded.clone()).collect();
    let (p_out, p_out_ci) = outage_probability(&masks);
    let outage_pairs = masks.iter().map(Vec::len).sum();
    let solver_iterations = MeanCi::from_values(trials.iter().map(|t| t.solver_iterations as f64));
    Ok(MetricsReport {
        trials: trials.len(),
        failed,
        zeta,
        pmd,
        pfa,
        nmse_embb,
        nmse_mtd,
        p_out,
        p_out_ci,
        outage_pairs,
        solver_iterations,
        roc,
    })
}

/// Runs every sweep point, writes `metrics.csv` and `roc.csv` (and plots when
/// requested) into the output directory if one is set.
pub fn run_experiment<R: Real>(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let mut points = Vec::new();
    for (value, cfg) in plan.points()? {
        log::info!("{} = {:?}: {} trials", plan.sweep_var(), value, cfg.trials);
        let (trials, failed) = run_point::<R>(&cfg, plan.jobs)?;
        let report = aggregate(&trials, failed, cfg.pfa_target)?;
        points.push(PointResult { value, config: cfg, report });
    }
    let result = ExperimentResult { sweep_var: plan.sweep_var().to_string(), points };
    if let Some(dir) = &plan.out_dir {
        std::fs::create_dir_all(dir)?;
        let metrics = dir.join("metrics.csv");
        let roc = dir.join("roc.csv");
        output::write_metrics_csv(&metrics, &result)?;
        output::write_roc_csv(&roc, &result)?;
        std::fs::write(dir.join("config.cfg"), plan.base.to_config_string())?;
        if plan.plot {
            plot::plot_csv(&roc, plot::PlotKind::Roc)?;
            if plan.sweep.is_some() && result.points.iter().all(|p| p.value.parse::<f64>().is_ok()) {
                plot::plot_csv(&metrics, plot::PlotKind::Nmse)?;
                plot::plot_csv(&metrics, plot::PlotKind::Pmd)?;
            }
        }
    }
    Ok(result)
}
