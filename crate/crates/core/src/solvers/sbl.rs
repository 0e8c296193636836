use super::{SolverParams, SparseEstimate};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{abs2, lit, to_f64, CMat, Cx, Real};

const PRUNE: f64 = 1e-12;

/// `Σ_y = σ² I + S diag(α) S^H` restricted to the unpruned columns.
fn marginal_cov<R: Real>(s: &CMat<R>, alpha: &[f64], keep: &[usize], sigma2: f64) -> CMat<R> {
    let t = s.nrows();
    let sa = CMat::from_fn(t, keep.len(), |r, c| s[(r, keep[c])]);
    let scaled = CMat::from_fn(t, keep.len(), |r, c| sa[(r, c)].scale(lit(alpha[keep[c]])));
    let mut cov = if keep.is_empty() { CMat::zeros(t, t) } else { linalg::mul_bh(&scaled, &sa) };
    for i in 0..t {
        cov[(i, i)] += Cx::new(lit(sigma2), R::zero());
    }
    cov
}

/// Type-II cost `M log|Σ_y| + tr(Σ_y^{-1} Y Y^H)`, the negative log marginal
/// likelihood of the `M` snapshots up to constants.
pub fn type2_cost<R: Real>(y: &CMat<R>, s: &CMat<R>, alpha: &[f64], sigma2: f64) -> Result<f64> {
    let keep: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0).collect();
    let cov = marginal_cov(s, alpha, &keep, sigma2);
    let chol = linalg::cholesky(cov).ok_or_else(|| Error::Domain("marginal covariance not positive definite".into()))?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().take(y.nrows()).map(|d| 2.0 * to_f64(d.re).ln()).sum();
    let solved = chol.solve(y);
    let quad: f64 = y.iter().zip(solved.iter()).map(|(a, b)| to_f64((a.conj() * b).re)).sum();
    Ok(y.ncols() as f64 * logdet + quad)
}

/// EM sparse Bayesian learning with per-row variances `α`.
pub fn em_sbl<R: Real>(y: &CMat<R>, s: &CMat<R>, p: &SolverParams) -> Result<SparseEstimate<R>> {
    if !(p.sigma2 > 0.0) {
        return Err(Error::Domain("EM-SBL needs positive noise power".into()));
    }
    let (t, m) = (y.nrows(), y.ncols());
    let nq = s.ncols();
    let mut alpha: Vec<f64> = p.gamma_priors.clone();
    let mut x = CMat::<R>::zeros(nq, m);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut last = f64::INFINITY;
    while iterations < p.t_max {
        iterations += 1;
        let keep: Vec<usize> = (0..nq).filter(|&i| alpha[i] > 0.0).collect();
        let cov = marginal_cov(s, &alpha, &keep, p.sigma2);
        let chol = linalg::cholesky(cov).ok_or_else(|| Error::Domain("marginal covariance not positive definite".into()))?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().take(t).map(|d| 2.0 * to_f64(d.re).ln()).sum();
        let kinv = chol.inverse();
        let ky = linalg::mul(&kinv, y);
        let quad: f64 = y.iter().zip(ky.iter()).map(|(a, b)| to_f64((a.conj() * b).re)).sum();
        trace.push(m as f64 * logdet + quad);

        let sa = CMat::from_fn(t, keep.len(), |r, c| s[(r, keep[c])]);
        // posterior mean rows: α_i s_i^H Σ_y^{-1} Y
        let shky = linalg::mul_ah(&sa, &ky);
        let ks = linalg::mul(&kinv, &sa);
        let mut next = vec![0.0; nq];
        x.fill(Cx::new(R::zero(), R::zero()));
        for (c, &i) in keep.iter().enumerate() {
            let a = alpha[i];
            let ar = lit::<R>(a);
            let mut row2 = 0.0;
            for j in 0..m {
                let v = shky[(c, j)].scale(ar);
                x[(i, j)] = v;
                row2 += to_f64(abs2(v));
            }
            // F_ii = α − α² s^H Σ_y^{-1} s
            let quad_s: f64 = (0..t).map(|r| to_f64((sa[(r, c)].conj() * ks[(r, c)]).re)).sum();
            let f = (a - a * a * quad_s).max(0.0);
            let val = row2 / m as f64 + f;
            next[i] = if val < PRUNE { 0.0 } else { val };
        }
        let num: f64 = next.iter().zip(&alpha).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        alpha = next;
        last = if den > 0.0 { num / den } else { 0.0 };
        if last < p.delta {
            converged = true;
            break;
        }
    }
    Ok(SparseEstimate::new(x, iterations, converged, last, trace))
}
