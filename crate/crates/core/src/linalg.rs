//! Dense complex kernels.
//!
//! Complex products are routed through four real GEMMs so that `f32`/`f64`
//! hit nalgebra's blocked `matrixmultiply` kernels instead of the generic
//! scalar loop.

use crate::scalar::{abs2, CMat, Cx, Real};
use nalgebra::{Cholesky, DMatrix, Dyn};

fn split<R: Real>(a: &CMat<R>) -> (DMatrix<R>, DMatrix<R>) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

fn join<R: Real>(re: DMatrix<R>, im: &DMatrix<R>) -> CMat<R> {
    re.zip_map(im, |r, i| Cx::new(r, i))
}

fn mul_split<R: Real>(ar: &DMatrix<R>, ai: &DMatrix<R>, br: &DMatrix<R>, bi: &DMatrix<R>, conj_a: bool) -> CMat<R> {
    let (m, n) = (ar.nrows(), br.ncols());
    let mut re = DMatrix::<R>::zeros(m, n);
    let mut im = DMatrix::<R>::zeros(m, n);
    let (one, zero) = (R::one(), R::zero());
    // conj(A)·B = (Ar − iAi)(Br + iBi)
    let sign = if conj_a { -one } else { one };
    re.gemm(one, ar, br, zero);
    re.gemm(-sign, ai, bi, one);
    im.gemm(one, ar, bi, zero);
    im.gemm(sign, ai, br, one);
    join(re, &im)
}

/// `A · B`.
pub fn mul<R: Real>(a: &CMat<R>, b: &CMat<R>) -> CMat<R> {
    assert_eq!(a.ncols(), b.nrows(), "mul: inner dimensions differ");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    mul_split(&ar, &ai, &br, &bi, false)
}

/// `A^H · B`.
pub fn mul_ah<R: Real>(a: &CMat<R>, b: &CMat<R>) -> CMat<R> {
    assert_eq!(a.nrows(), b.nrows(), "mul_ah: row counts differ");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    mul_split(&ar.transpose(), &ai.transpose(), &br, &bi, true)
}

/// `A · B^H`.
pub fn mul_bh<R: Real>(a: &CMat<R>, b: &CMat<R>) -> CMat<R> {
    assert_eq!(a.ncols(), b.ncols(), "mul_bh: column counts differ");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    // A·conj(B)^T = (Ar + iAi)(Br^T − iBi^T)
    let brt = br.transpose();
    let bit = bi.transpose().map(|x| -x);
    mul_split(&ar, &ai, &brt, &bit, false)
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky<R: Real>(a: CMat<R>) -> Option<Cholesky<Cx<R>, Dyn>> {
    Cholesky::new(a)
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hpd_inverse<R: Real>(a: CMat<R>) -> Option<CMat<R>> {
    cholesky(a).map(|c| c.inverse())
}

pub fn frob2<R: Real>(a: &CMat<R>) -> R {
    a.iter().fold(R::zero(), |acc, z| acc + abs2(*z))
}

pub fn frob<R: Real>(a: &CMat<R>) -> R {
    frob2(a).sqrt()
}

/// Squared ℓ2 norm of row `i`.
pub fn row_norm2<R: Real>(a: &CMat<R>, i: usize) -> R {
    a.row(i).iter().fold(R::zero(), |acc, z| acc + abs2(*z))
}
