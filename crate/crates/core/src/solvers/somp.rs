use super::{SolverParams, SparseEstimate};
use crate::error::Result;
use crate::linalg;
use crate::scalar::{abs2, lit, to_f64, CMat, Cx, Real};

/// Least squares on the selected columns; falls back to a small ridge when the
/// submatrix is numerically rank deficient.
fn refit<R: Real>(sh: &CMat<R>, y: &CMat<R>) -> CMat<R> {
    let qr = sh.clone().qr();
    let rdiag = qr.r().diagonal();
    let max = rdiag.iter().fold(0.0f64, |m, d| m.max(to_f64(abs2(*d).sqrt())));
    let min = rdiag.iter().fold(f64::INFINITY, |m, d| m.min(to_f64(abs2(*d).sqrt())));
    if max > 0.0 && min > 1e-10 * max {
        let rhs = linalg::mul_ah(&qr.q(), y);
        if let Some(x) = qr.r().solve_upper_triangular(&rhs) {
            return x;
        }
    }
    let mut gram = linalg::mul_ah(sh, sh);
    for i in 0..gram.nrows() {
        gram[(i, i)] += Cx::new(lit(1e-10), R::zero());
    }
    let rhs = linalg::mul_ah(sh, y);
    linalg::cholesky(gram).map(|c| c.solve(&rhs)).unwrap_or_else(|| CMat::zeros(sh.ncols(), y.ncols()))
}

/// Simultaneous orthogonal matching pursuit.
pub fn somp<R: Real>(y: &CMat<R>, s: &CMat<R>, p: &SolverParams) -> Result<SparseEstimate<R>> {
    let (t, m) = (y.nrows(), y.ncols());
    let nq = s.ncols();
    let k_max = p.k_max.unwrap_or(t.min(nq)).min(nq);
    let col_norm: Vec<f64> = s.column_iter().map(|c| to_f64(c.norm())).collect();
    let y_norm = to_f64(linalg::frob(y));
    let mut support: Vec<usize> = Vec::new();
    let mut chosen = vec![false; nq];
    let mut r = y.clone();
    let mut r_norm = y_norm;
    let mut coef = CMat::<R>::zeros(0, m);
    let mut converged = false;
    let mut last = if y_norm > 0.0 { 1.0 } else { 0.0 };
    if y_norm == 0.0 {
        return Ok(SparseEstimate::new(CMat::zeros(nq, m), 0, true, 0.0, Vec::new()));
    }
    while support.len() < k_max.min(p.t_max) {
        let g = linalg::mul_ah(s, &r);
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for j in (0..nq).filter(|&j| !chosen[j] && col_norm[j] > 0.0) {
            let l1: f64 = g.row(j).iter().map(|z| to_f64(abs2(*z).sqrt())).sum();
            let score = l1 / col_norm[j];
            if score > best.1 {
                best = (j, score);
            }
        }
        if best.0 == usize::MAX {
            break;
        }
        support.push(best.0);
        chosen[best.0] = true;
        let sh = CMat::from_fn(t, support.len(), |r, c| s[(r, support[c])]);
        coef = refit(&sh, y);
        r = y - linalg::mul(&sh, &coef);
        let new_norm = to_f64(linalg::frob(&r));
        let rel_change = (r_norm - new_norm) / r_norm.max(f64::MIN_POSITIVE);
        last = new_norm / y_norm;
        r_norm = new_norm;
        if last <= p.delta || rel_change < p.delta {
            converged = true;
            break;
        }
    }
    if support.len() >= k_max {
        converged = true;
    }
    let mut x = CMat::zeros(nq, m);
    for (c, &i) in support.iter().enumerate() {
        x.row_mut(i).copy_from(&coef.row(c));
    }
    Ok(SparseEstimate::new(x, support.len(), converged, last, Vec::new()))
}
