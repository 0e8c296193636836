//! One Monte-Carlo trial: draw, synthesize, eMBB chain, SIC, MTD recovery.

use crate::channel::{draw_activity, draw_channels, place_devices, Activity, DevicePlacement};
use crate::config::{NetworkConfig, SolverKind};
use crate::embb::{self, ReceivedBlock, SinrInputs};
use crate::error::{Error, Result};
use crate::metrics::{nmse, TrialScores};
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::{lit, CMat, Cx, Real};
use crate::solvers::{solve, SolverParams};
use crate::waveform::Codebook;

/// eMBB-side results; independent of the MTD solver.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbbOutcome {
    pub sinr: Vec<f64>,
    pub decoded: Vec<bool>,
    /// Per-device `‖h − ĥ‖² / ‖h‖²`.
    pub nmse: Vec<f64>,
    /// Analytic per-antenna error variance.
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub index: usize,
    pub embb: EmbbOutcome,
    pub activity: Activity,
    pub scores: TrialScores,
    /// NMSE of recovered MTD channels over transmitted rows.
    pub mtd_nmse: Vec<f64>,
    pub solver_iterations: usize,
    pub solver_converged: bool,
}

/// Intermediate state handed to the solver.
pub struct Prepared<R: Real> {
    pub embb: EmbbOutcome,
    pub activity: Activity,
    pub block: ReceivedBlock<R>,
    /// True row-sparse MTD signal matrix.
    pub x: CMat<R>,
    pub gamma_min: f64,
    pub p_max: f64,
}

/// Solver parameters in whitened units (noise power 1).
pub fn solver_params(cfg: &NetworkConfig, placement_gain: f64, trial_seed: u64) -> SolverParams {
    let nq = cfg.n_sequences();
    let xi = (cfg.epsilon / cfg.q_messages as f64).clamp(1e-9, 1.0 - 1e-9);
    let mut p = SolverParams::new(nq, xi, placement_gain / cfg.noise_w, 1.0);
    p.delta = cfg.solver.tol;
    p.t_max = cfg.solver.t_max;
    p.mu = cfg.solver.mu;
    p.rho_admm = cfg.solver.rho;
    p.se_samples = cfg.solver.se_samples;
    p.se_seed = trial_seed;
    p.k_max = Some(cfg.solver.k_max.unwrap_or_else(|| ((2.0 * cfg.epsilon * cfg.n_mtds as f64).ceil() as usize).max(1)));
    p
}

/// Everything up to and including SIC.
pub fn prepare<R: Real>(cfg: &NetworkConfig, cb: &Codebook<R>, frozen: Option<&DevicePlacement>, index: usize) -> Result<Prepared<R>> {
    let mut rng = stream(cfg.seed, Domain::Trial, index as u64);
    let placement = match frozen {
        Some(p) => p.clone(),
        None => place_devices(cfg, &mut rng)?,
    };
    let channels = draw_channels::<R, _>(cfg, &placement, &mut rng);
    let activity = draw_activity(cfg, &mut rng);
    let (t, l, e, m) = (cfg.coherence_len, cfg.pilot_len, cfg.n_embb, cfg.antennas);
    if cb.coherence_len() != t || cb.pilot_len() != l || cb.n_embb() != e || cb.n_sequences() != cfg.n_sequences() {
        return Err(Error::Dimension("codebook does not match the configuration".into()));
    }
    let payload = embb::qpsk_payload::<R, _>(t - l, e, &mut rng);
    let s_embb = embb::embb_sequences(&cb.psi, &payload)?;
    let x = embb::mtd_signal_matrix(&channels.g, &activity.alpha_seq, cfg.q_messages)?;
    let sigma2 = cfg.noise_w;
    let noise = CMat::from_fn(t, m, |_, _| complex_normal::<R, _>(&mut rng, sigma2));
    let rho = vec![cfg.rho_max_w; e];
    let ybar = embb::synthesize_received(&cb.s, &x, &s_embb, &rho, &channels.h, &noise)?;
    let block = ReceivedBlock::new(ybar, l, sigma2, payload);

    let mut hhat = CMat::<R>::zeros(e, m);
    let mut xi = Vec::with_capacity(e);
    let yp = block.yp();
    for k in 0..e {
        let psi = cb.psi.column(k).into_owned();
        let psi_norm2 = psi.norm_squared();
        let y_e = embb::correlate_pilot(&yp, &psi)?;
        let (h, x_e) = embb::mmse_estimate(&y_e, rho[k], placement.beta[k], sigma2, crate::scalar::to_f64(psi_norm2));
        hhat.row_mut(k).copy_from(&h.transpose());
        xi.push(x_e);
    }
    let embb = if e > 0 {
        let scaled = CMat::from_fn(e, m, |k, j| hhat[(k, j)].scale(lit(rho[k].sqrt())));
        let comb = embb::mmse_combiner(&scaled, sigma2)?;
        let inputs = SinrInputs { s_embb: &s_embb, rho: &rho, h: &channels.h, hhat: &hhat, s_mtd: &cb.s, x: &x, noise: &noise, pilot_len: l };
        let sinr = embb::sinr(&inputs, &comb)?;
        let r = embb::transmit_rate(cfg);
        let decoded: Vec<bool> = sinr.iter().map(|&g| embb::outage_decision(g, r)).collect();
        let rows: Vec<usize> = (0..e).collect();
        let n = nmse(&channels.h, &hhat, &rows)?;
        EmbbOutcome { sinr, decoded, nmse: n.per_row, xi }
    } else {
        EmbbOutcome { sinr: Vec::new(), decoded: Vec::new(), nmse: Vec::new(), xi }
    };
    let block = embb::sic(&block, &s_embb, &rho, &hhat, &embb.decoded)?;
    Ok(Prepared { embb, activity, block, x, gamma_min: placement.gamma_min, p_max: cfg.p_max_w })
}

/// Runs the MTD solver on a prepared trial.
pub fn finish<R: Real>(cfg: &NetworkConfig, cb: &Codebook<R>, prep: Prepared<R>, kind: SolverKind, index: usize) -> Result<TrialOutput> {
    let sigma = cfg.noise_w.sqrt();
    let inv = Cx::new(lit::<R>(1.0 / sigma), R::zero());
    let y = prep.block.y.map(|z| z * inv);
    let params = solver_params(cfg, prep.p_max * prep.gamma_min, cfg.seed ^ (index as u64).rotate_left(17));
    let est = solve(kind, &y, &cb.s, &params)?;
    let scores = TrialScores::new(&est.xbar, cfg.q_messages, &prep.activity.q_choice)?;
    let xhat = est.xhat.map(|z| z.scale(lit(sigma)));
    let mtd_nmse = nmse(&prep.x, &xhat, &prep.activity.transmitted())?.per_row;
    Ok(TrialOutput {
        index,
        embb: prep.embb,
        activity: prep.activity,
        scores,
        mtd_nmse,
        solver_iterations: est.iterations,
        solver_converged: est.converged,
    })
}

/// Full pipeline for trial `index` of the configuration's seed.
pub fn run_trial<R: Real>(cfg: &NetworkConfig, cb: &Codebook<R>, frozen: Option<&DevicePlacement>, index: usize) -> Result<TrialOutput> {
    let wrap = |e: Error| Error::Trial { index, source: Box::new(e) };
    let prep = prepare(cfg, cb, frozen, index).map_err(wrap)?;
    finish(cfg, cb, prep, cfg.solver.kind, index).map_err(wrap)
}
