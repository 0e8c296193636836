use super::{SolverParams, SparseEstimate};
use crate::error::Result;
use crate::linalg;
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::{abs2, lit, to_f64, CMat, CVec, Cx, Real};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

/// Noise covariance in its eigenbasis, `Σ = U diag(λ) U^H`.
struct NoiseModel<R: Real> {
    u: CMat<R>,
    lambda: Vec<R>,
}

impl<R: Real> NoiseModel<R> {
    fn new(sigma: CMat<R>, floor: R) -> Self {
        let eig = SymmetricEigen::new(sigma);
        let lambda = eig.eigenvalues.iter().map(|&l| l.max(floor)).collect();
        Self { u: eig.eigenvectors, lambda }
    }
}

/// Spike-and-slab MMSE denoiser for one row observed in the eigenbasis.
/// Returns the denoised row (eigenbasis) and the slab posterior probability.
fn denoise_rotated<R: Real>(vt: &[Cx<R>], lambda: &[R], gamma: R, log_prior_odds: R) -> (Vec<Cx<R>>, R) {
    let mut q = R::zero();
    let mut logdet = R::zero();
    for (v, &l) in vt.iter().zip(lambda) {
        q += abs2(*v) * gamma / (l * (gamma + l));
        logdet += (R::one() + gamma / l).ln();
    }
    let expo = log_prior_odds + logdet - q;
    // logistic in a stable form
    let pi = if expo > R::zero() {
        let e = (-expo).exp();
        e / (R::one() + e)
    } else {
        R::one() / (R::one() + expo.exp())
    };
    let eta = vt.iter().zip(lambda).map(|(v, &l)| v.scale(pi * gamma / (gamma + l))).collect();
    (eta, pi)
}

/// Spike-and-slab MMSE denoiser `η(v)` for prior `(1 − ξ) δ_0 + ξ CN(0, γ I)`
/// and Gaussian noise `CN(0, Σ)`.
pub fn spike_slab_denoise<R: Real>(v: &CVec<R>, sigma: &CMat<R>, gamma: f64, xi: f64) -> CVec<R> {
    let model = NoiseModel::new(sigma.clone(), lit(f64::from(f32::MIN_POSITIVE)));
    let vt: Vec<Cx<R>> = (model.u.adjoint() * v).iter().copied().collect();
    let (eta, _) = denoise_rotated(&vt, &model.lambda, lit(gamma), lit(((1.0 - xi) / xi).ln()));
    &model.u * CVec::from_vec(eta)
}

/// AMP with the spike-and-slab MMSE denoiser and a matrix Onsager term.
pub fn amp_decode<R: Real>(y: &CMat<R>, s: &CMat<R>, p: &SolverParams) -> Result<SparseEstimate<R>> {
    let (t, m) = (y.nrows(), y.ncols());
    let nq = s.ncols();
    let log_odds: R = lit(((1.0 - p.xi) / p.xi).ln());
    let gammas: Vec<R> = p.gamma_priors.iter().map(|&g| lit(g)).collect();
    let inv_t = lit::<R>(1.0 / t as f64);
    let mut se_rng = stream(p.se_seed, Domain::StateEvolution, 0);

    let mut x = CMat::<R>::zeros(nq, m);
    let mut r = y.clone();
    let y_scale = to_f64(linalg::frob2(y)) / (t * m).max(1) as f64;
    // no residual estimate exists yet, start from the isotropic energy level
    let mut sigma = CMat::<R>::identity(m, m).map(|z| z.scale(lit(y_scale.max(p.sigma2))));
    let mut iterations = 0;
    let mut converged = false;
    let mut last = f64::INFINITY;
    // relative floor keeps the eigenbasis well defined when the residual vanishes
    let floor = lit::<R>((p.sigma2 * 1e-6).max(y_scale * 1e-14).max(f64::from(f32::MIN_POSITIVE)));

    while iterations < p.t_max {
        iterations += 1;
        let model = NoiseModel::new(sigma.clone(), floor);
        let v = linalg::mul_ah(s, &r) + &x;
        // rows of V·conj(U) are the rotated observations (U^H v)^T
        let vt = linalg::mul(&v, &model.u.map(|z| z.conj()));
        let mut eta_t = CMat::<R>::zeros(nq, m);
        let mut jac = CMat::<R>::zeros(m, m);
        let mut row = vec![Cx::new(R::zero(), R::zero()); m];
        for i in 0..nq {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = vt[(i, k)];
            }
            let g = gammas[i];
            let (eta, pi) = denoise_rotated(&row, &model.lambda, g, log_odds);
            for (k, e) in eta.iter().enumerate() {
                eta_t[(i, k)] = *e;
            }
            if pi <= R::zero() {
                continue;
            }
            let c = g * pi * (R::one() - pi);
            for a in 0..m {
                let la = model.lambda[a];
                jac[(a, a)] += Cx::new(pi * g / (g + la), R::zero());
                if c > R::zero() {
                    let left = row[a].scale(c / (g + la));
                    for b in 0..m {
                        let lb = model.lambda[b];
                        jac[(a, b)] += left * row[b].conj().scale(g / (lb * (g + lb)));
                    }
                }
            }
        }
        let x_new = linalg::mul(&eta_t, &model.u.transpose());
        let jac_full = &model.u * jac * model.u.adjoint();
        let onsager = linalg::mul(&r, &jac_full.transpose()).map(|z| z.scale(inv_t));
        let r_new = y - linalg::mul(s, &x_new) + onsager;
        if !r_new.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            log::debug!("AMP diverged at iteration {iterations}");
            break;
        }
        let change = to_f64(linalg::frob(&(&r_new - &r)));
        sigma = if p.se_samples > 0 {
            sampled_state_evolution(&model, &gammas, p, nq, t, &mut se_rng)
        } else {
            empirical_cov(&r_new, inv_t)
        };
        x = x_new;
        r = r_new;
        last = change;
        if change < p.delta {
            converged = true;
            break;
        }
    }
    Ok(SparseEstimate::new(x, iterations, converged, last, Vec::new()))
}

/// `R^T R^* / T`: covariance of the rows of `R` viewed as column vectors.
fn empirical_cov<R: Real>(r: &CMat<R>, inv_t: R) -> CMat<R> {
    linalg::mul_ah(r, r).map(|z| z.conj().scale(inv_t))
}

/// `σ² I + (NQ / T) E[(η(x + w) − x)(η(x + w) − x)^H]` by Monte Carlo over the
/// prior, with `w ~ CN(0, Σ)` drawn in the current eigenbasis.
fn sampled_state_evolution<R: Real, G: Rng>(
    model: &NoiseModel<R>,
    gammas: &[R],
    p: &SolverParams,
    nq: usize,
    t: usize,
    rng: &mut G,
) -> CMat<R> {
    let m = model.lambda.len();
    let log_odds: R = lit(((1.0 - p.xi) / p.xi).ln());
    let mut acc = DMatrix::<Cx<R>>::zeros(m, m);
    for _ in 0..p.se_samples {
        let g = gammas[rng.gen_range(0..nq)];
        let active = rng.gen_bool(p.xi);
        // eigenbasis is unitary, so draw x and w there directly
        let xt: Vec<Cx<R>> = (0..m).map(|_| if active { complex_normal(rng, to_f64(g)) } else { Cx::new(R::zero(), R::zero()) }).collect();
        let obs: Vec<Cx<R>> = (0..m).map(|k| xt[k] + complex_normal::<R, _>(rng, to_f64(model.lambda[k]))).collect();
        let (eta, _) = denoise_rotated(&obs, &model.lambda, g, log_odds);
        let err = CVec::from_iterator(m, eta.iter().zip(&xt).map(|(a, b)| *a - *b));
        acc += &err * err.adjoint();
    }
    let scale = lit::<R>(nq as f64 / (t as f64 * p.se_samples as f64));
    let mut out = &model.u * acc.map(|z| z.scale(scale)) * model.u.adjoint();
    for k in 0..m {
        out[(k, k)] += Cx::new(lit(p.sigma2), R::zero());
    }
    out
}
