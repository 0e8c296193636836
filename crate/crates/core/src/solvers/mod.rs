//! Row-sparse multiple-measurement-vector recovery of `X` from `Y = S X + W`.
//!
//! All solvers share [`SolverParams`] and return a [`SparseEstimate`]. Row
//! scores are ℓ2 norms of the recovered rows; [`detect_sequences`] turns them
//! into at most one detected message per device.

mod admm;
mod amp;
mod sbl;
mod somp;

pub use admm::{admm_l21, l21_objective};
pub use amp::{amp_decode, spike_slab_denoise};
pub use sbl::{em_sbl, type2_cost};
pub use somp::somp;

use crate::config::SolverKind;
use crate::error::{Error, Result};
use crate::scalar::{to_f64, CMat, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Convergence tolerance Δ.
    pub delta: f64,
    pub t_max: usize,
    /// ℓ2,1 weight; `None` picks the default group-lasso scaling.
    pub mu: Option<f64>,
    pub rho_admm: f64,
    /// Prior activity per sequence, ε / Q.
    pub xi: f64,
    /// Slab variance per sequence.
    pub gamma_priors: Vec<f64>,
    pub sigma2: f64,
    /// Monte-Carlo draws for AMP's sampled state evolution; 0 uses the
    /// empirical residual covariance.
    pub se_samples: usize,
    pub se_seed: u64,
    /// SOMP support cap; `None` allows up to `min(T, NQ)`.
    pub k_max: Option<usize>,
}

impl SolverParams {
    /// Defaults for an `nq`-column dictionary with equal slab variances.
    pub fn new(nq: usize, xi: f64, slab: f64, sigma2: f64) -> Self {
        Self {
            delta: 1e-4,
            t_max: 200,
            mu: None,
            rho_admm: 1.0,
            xi,
            gamma_priors: vec![slab; nq],
            sigma2,
            se_samples: 0,
            se_seed: 0,
            k_max: None,
        }
    }

    pub fn validate(&self, nq: usize) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be at least 1".into()));
        }
        if !(self.rho_admm > 0.0) || self.mu.is_some_and(|m| !(m > 0.0)) {
            return Err(Error::Config("mu and rho must be positive".into()));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::Config(format!("prior density {} outside (0, 1)", self.xi)));
        }
        if self.gamma_priors.len() != nq || self.gamma_priors.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::Config("need one positive prior variance per sequence".into()));
        }
        if self.sigma2 < 0.0 {
            return Err(Error::Config("noise power must be non-negative".into()));
        }
        if self.k_max == Some(0) {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }

    /// Default ℓ2,1 weight `σ sqrt(2 ln NQ) ‖Y‖_F / sqrt(T M)`.
    pub fn default_mu(&self, y_frob: f64, t: usize, m: usize, nq: usize) -> f64 {
        let mu = self.sigma2.sqrt() * (2.0 * (nq.max(2) as f64).ln()).sqrt() * y_frob / ((t * m) as f64).sqrt();
        if mu > 0.0 {
            mu
        } else {
            f64::MIN_POSITIVE
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate<R: Real> {
    /// `NQ × M` row-sparse estimate.
    pub xhat: CMat<R>,
    /// ℓ2 norm of each row of `xhat`.
    pub xbar: Vec<f64>,
    /// Detected sequences, empty until [`SparseEstimate::detect`] is called.
    pub alpha_hat: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the stopping metric.
    pub residual_norm: f64,
    /// Objective per iteration where the solver has one (ADMM, SBL).
    pub objective_trace: Vec<f64>,
}

impl<R: Real> SparseEstimate<R> {
    pub fn new(xhat: CMat<R>, iterations: usize, converged: bool, residual_norm: f64, objective_trace: Vec<f64>) -> Self {
        let xbar = row_norms(&xhat);
        Self { xhat, xbar, alpha_hat: Vec::new(), iterations, converged, residual_norm, objective_trace }
    }

    pub fn detect(&mut self, zeta: f64, q: usize) {
        self.alpha_hat = detect_sequences(&self.xbar, zeta, q);
    }
}

pub fn row_norms<R: Real>(x: &CMat<R>) -> Vec<f64> {
    (0..x.nrows()).map(|i| to_f64(crate::linalg::row_norm2(x, i)).sqrt()).collect()
}

/// Per-device thresholding: device `n` is declared to have sent message
/// `argmax_q xbar[nQ + q]` (lowest `q` on ties) iff that score is `≥ ζ`.
pub fn detect_sequences(xbar: &[f64], zeta: f64, q: usize) -> Vec<bool> {
    let mut out = vec![false; xbar.len()];
    if q == 0 {
        return out;
    }
    for (n, block) in xbar.chunks(q).enumerate() {
        let (best, score) = block_max(block);
        if score >= zeta {
            out[n * q + best] = true;
        }
    }
    out
}

/// Argmax and max of a score block, lowest index on ties.
pub fn block_max(block: &[f64]) -> (usize, f64) {
    block.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
}

/// Runs the selected solver.
pub fn solve<R: Real>(kind: SolverKind, y: &CMat<R>, s: &CMat<R>, params: &SolverParams) -> Result<SparseEstimate<R>> {
    if y.nrows() != s.nrows() {
        return Err(Error::Dimension(format!("Y has {} rows, S has {}", y.nrows(), s.nrows())));
    }
    params.validate(s.ncols())?;
    match kind {
        SolverKind::Amp => amp_decode(y, s, params),
        SolverKind::Admm => admm_l21(y, s, params),
        SolverKind::Sbl => em_sbl(y, s, params),
        SolverKind::Somp => somp(y, s, params),
    }
}
