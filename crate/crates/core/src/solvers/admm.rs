use super::{SolverParams, SparseEstimate};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{lit, to_f64, CMat, Cx, Real};

/// `½‖Y − S X‖_F² + μ Σ_i ‖x_i‖₂`.
pub fn l21_objective<R: Real>(y: &CMat<R>, s: &CMat<R>, x: &CMat<R>, mu: f64) -> f64 {
    let fit = to_f64(linalg::frob2(&(y - linalg::mul(s, x))));
    let group: f64 = super::row_norms(x).iter().sum();
    0.5 * fit + mu * group
}

/// ADMM for the ℓ2,1-regularised least-squares problem with splitting
/// `X = Z`. The returned estimate is the row-sparse iterate `X`.
pub fn admm_l21<R: Real>(y: &CMat<R>, s: &CMat<R>, p: &SolverParams) -> Result<SparseEstimate<R>> {
    let (t, m) = (y.nrows(), y.ncols());
    let nq = s.ncols();
    let rho = p.rho_admm;
    let mu = p.mu.unwrap_or_else(|| p.default_mu(to_f64(linalg::frob(y)), t, m, nq));
    let rho_r = lit::<R>(rho);
    let inv_rho = lit::<R>(1.0 / rho);
    let thresh = mu / rho;

    // (S^H S + ρI)^{-1} b = (b − S^H (S S^H + ρI)^{-1} S b) / ρ
    let mut gram = linalg::mul_bh(s, s);
    for i in 0..t {
        gram[(i, i)] += Cx::new(rho_r, R::zero());
    }
    let k = linalg::hpd_inverse(gram).ok_or_else(|| Error::Domain("ADMM system not positive definite".into()))?;
    let shy = linalg::mul_ah(s, y);

    let mut x = CMat::<R>::zeros(nq, m);
    let mut z = CMat::<R>::zeros(nq, m);
    let mut lam = CMat::<R>::zeros(nq, m);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut last = f64::INFINITY;
    while iterations < p.t_max {
        iterations += 1;
        let b = &shy + x.map(|v| v.scale(rho_r)) + &lam;
        let sb = linalg::mul(s, &b);
        let z_new = (&b - linalg::mul_ah(s, &linalg::mul(&k, &sb))).map(|v| v.scale(inv_rho));
        let c = &z_new - lam.map(|v| v.scale(inv_rho));
        for i in 0..nq {
            let norm = to_f64(linalg::row_norm2(&c, i)).sqrt();
            let gain = if norm > thresh { lit::<R>(1.0 - thresh / norm) } else { R::zero() };
            for j in 0..m {
                x[(i, j)] = c[(i, j)].scale(gain);
            }
        }
        lam += (&x - &z_new).map(|v| v.scale(rho_r));
        last = to_f64(linalg::frob(&(&z_new - &z)));
        z = z_new;
        trace.push(l21_objective(y, s, &x, mu));
        if last < p.delta {
            converged = true;
            break;
        }
    }
    Ok(SparseEstimate::new(x, iterations, converged, last, trace))
}
