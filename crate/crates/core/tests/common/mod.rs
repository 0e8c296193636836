#![allow(dead_code)]

use coexist_core::rng::{complex_normal, stream, Domain};
use coexist_core::{CMat, Cx};

/// Dictionary with i.i.d. Gaussian entries and unit-norm columns.
pub fn unit_dictionary(t: usize, nq: usize, seed: u64) -> CMat<f64> {
    let mut g = stream(seed, Domain::Calibration, 100);
    let mut s = CMat::from_fn(t, nq, |_, _| complex_normal::<f64, _>(&mut g, 1.0));
    for mut c in s.column_iter_mut() {
        let n = c.norm();
        c.unscale_mut(n);
    }
    s
}

/// Row-sparse `nq × m` matrix with unit-variance entries on `support`.
pub fn sparse_rows(nq: usize, m: usize, support: &[usize], seed: u64) -> CMat<f64> {
    let mut g = stream(seed, Domain::Calibration, 101);
    let mut x = CMat::zeros(nq, m);
    for &i in support {
        for j in 0..m {
            x[(i, j)] = complex_normal(&mut g, 1.0);
        }
    }
    x
}

/// `k` distinct indices below `n`.
pub fn random_support(n: usize, k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::index::sample;
    let mut g = stream(seed, Domain::Calibration, 102);
    let mut v = sample(&mut g, n, k).into_vec();
    v.sort_unstable();
    v
}

pub fn noise(t: usize, m: usize, var: f64, seed: u64) -> CMat<f64> {
    let mut g = stream(seed, Domain::Calibration, 103);
    CMat::from_fn(t, m, |_, _| complex_normal(&mut g, var))
}

fn ls_residual(y: &CMat<f64>, s: &CMat<f64>, cols: &[usize]) -> f64 {
    if cols.is_empty() {
        return y.norm();
    }
    let sub = CMat::from_fn(s.nrows(), cols.len(), |r, c| s[(r, cols[c])]);
    let x = sub.clone().svd(true, true).solve(y, 1e-12).expect("svd solve");
    (y - sub * x).norm()
}

/// Least-squares best support of size at most `k_max`, scanning all subsets.
/// The smallest subset whose residual is within `rel_tol·‖Y‖` of zero wins;
/// otherwise the subset with the least residual.
pub fn exhaustive_support(y: &CMat<f64>, s: &CMat<f64>, k_max: usize, rel_tol: f64) -> Vec<usize> {
    let nq = s.ncols();
    let scale = y.norm().max(f64::MIN_POSITIVE);
    let mut best = (f64::INFINITY, Vec::new());
    let mut all: Vec<Vec<usize>> = vec![Vec::new()];
    for k in 1..=k_max {
        all.extend(combinations(nq, k));
    }
    for sub in all {
        let r = ls_residual(y, s, &sub);
        if r <= rel_tol * scale {
            return sub;
        }
        if r < best.0 {
            best = (r, sub);
        }
    }
    best.1
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Rows whose norm is at least `frac` of the largest row norm.
pub fn support_of(xbar: &[f64], frac: f64) -> Vec<usize> {
    let max = xbar.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    (0..xbar.len()).filter(|&i| xbar[i] >= frac * max).collect()
}

pub fn cmat(rows: usize, cols: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> CMat<f64> {
    CMat::from_fn(rows, cols, |r, c| {
        let (re, im) = f(r, c);
        Cx::new(re, im)
    })
}
