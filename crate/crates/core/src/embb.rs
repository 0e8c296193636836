//! eMBB receive chain: block synthesis, pilot correlation, per-antenna LMMSE
//! channel estimation, MMSE combining, SINR and outage, and SIC.

use crate::config::{NetworkConfig, RateMode};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{abs2, lit, to_f64, CMat, CVec, Cx, Real};
use rand::Rng;

/// Unit-power QPSK payload, `len × e`.
pub fn qpsk_payload<R: Real, G: Rng + ?Sized>(len: usize, e: usize, rng: &mut G) -> CMat<R> {
    let a = lit::<R>(std::f64::consts::FRAC_1_SQRT_2);
    CMat::from_fn(len, e, |_, _| {
        let re = if rng.gen::<bool>() { a } else { -a };
        let im = if rng.gen::<bool>() { a } else { -a };
        Cx::new(re, im)
    })
}

/// Full eMBB sequences `[ψ_e; φ_e]`, `T × E`.
pub fn embb_sequences<R: Real>(psi: &CMat<R>, payload: &CMat<R>) -> Result<CMat<R>> {
    if psi.ncols() != payload.ncols() {
        return Err(Error::Dimension(format!("{} pilots but {} payload streams", psi.ncols(), payload.ncols())));
    }
    let (l, p) = (psi.nrows(), payload.nrows());
    let mut s = CMat::zeros(l + p, psi.ncols());
    s.rows_mut(0, l).copy_from(psi);
    s.rows_mut(l, p).copy_from(payload);
    Ok(s)
}

/// Row-sparse MTD matrix `X` (`NQ × M`): row `n·Q + q` is `g_n^T` when device
/// `n` sends message `q`, zero otherwise.
pub fn mtd_signal_matrix<R: Real>(g: &CMat<R>, alpha_seq: &[bool], q: usize) -> Result<CMat<R>> {
    if alpha_seq.len() != g.nrows() * q {
        return Err(Error::Dimension(format!("{} sequence flags for {} devices × {q} messages", alpha_seq.len(), g.nrows())));
    }
    let mut x = CMat::zeros(alpha_seq.len(), g.ncols());
    for (c, _) in alpha_seq.iter().enumerate().filter(|(_, &a)| a) {
        x.row_mut(c).copy_from(&g.row(c / q));
    }
    Ok(x)
}

/// `Ȳ = S X + Σ_e sqrt(ρ_e) s_e h_e^T + N`.
pub fn synthesize_received<R: Real>(
    s_mtd: &CMat<R>,
    x: &CMat<R>,
    s_embb: &CMat<R>,
    rho: &[f64],
    h: &CMat<R>,
    noise: &CMat<R>,
) -> Result<CMat<R>> {
    let (t, m) = (noise.nrows(), noise.ncols());
    if s_mtd.nrows() != t || s_mtd.ncols() != x.nrows() || x.ncols() != m {
        return Err(Error::Dimension("MTD sequences, signals and noise disagree".into()));
    }
    if s_embb.nrows() != t || s_embb.ncols() != h.nrows() || h.ncols() != m || rho.len() != h.nrows() {
        return Err(Error::Dimension("eMBB sequences, powers, channels and noise disagree".into()));
    }
    let mut y = linalg::mul(s_mtd, x) + noise;
    for (e, &p) in rho.iter().enumerate() {
        let outer = s_embb.column(e) * h.row(e);
        y += outer * Cx::new(lit::<R>(p.sqrt()), R::zero());
    }
    Ok(y)
}

/// Received coherence block and its post-SIC residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock<R: Real> {
    pub ybar: CMat<R>,
    /// Residual after removing decoded eMBB devices.
    pub y: CMat<R>,
    pub pilot_len: usize,
    pub noise_power: f64,
    /// `(T - L) × E` transmitted payload symbols.
    pub embb_payload: CMat<R>,
    pub decoded_mask: Vec<bool>,
}

impl<R: Real> ReceivedBlock<R> {
    pub fn new(ybar: CMat<R>, pilot_len: usize, noise_power: f64, embb_payload: CMat<R>) -> Self {
        let e = embb_payload.ncols();
        Self { y: ybar.clone(), ybar, pilot_len, noise_power, embb_payload, decoded_mask: vec![false; e] }
    }

    /// Pilot-phase slice, first `L` rows of `Ȳ`.
    pub fn yp(&self) -> CMat<R> {
        self.ybar.rows(0, self.pilot_len).into_owned()
    }
}

/// `y_e = Y_p^T ψ_e^*`.
pub fn correlate_pilot<R: Real>(yp: &CMat<R>, psi_e: &CVec<R>) -> Result<CVec<R>> {
    if yp.nrows() != psi_e.len() {
        return Err(Error::Dimension(format!("pilot slice has {} rows, pilot length {}", yp.nrows(), psi_e.len())));
    }
    Ok(yp.transpose() * psi_e.conjugate())
}

/// Per-antenna LMMSE estimate of `h_e` from `y_e = sqrt(ρ)‖ψ‖² h_e + w`,
/// `w ~ CN(0, ‖ψ‖² σ² I)`. Returns the estimate and the error variance per
/// antenna.
pub fn mmse_estimate<R: Real>(y_e: &CVec<R>, rho: f64, beta: f64, sigma2: f64, psi_norm2: f64) -> (CVec<R>, f64) {
    let a = rho.sqrt() * psi_norm2;
    let s2 = psi_norm2 * sigma2;
    let den = a * a * beta + s2;
    if den <= 0.0 {
        return (CVec::zeros(y_e.len()), beta);
    }
    let gain = a * beta / den;
    let xi = (beta - a * a * beta * beta / den).clamp(0.0, beta);
    (y_e.scale(lit(gain)), xi)
}

/// `ω_e = (σ² I + Σ_{j≠e} ĥ_j ĥ_j^H)^{-1} ĥ_e` for every row of `hhat`
/// (`E × M`, row `e` is `ĥ_e^T`). Returns the combiners as rows.
pub fn mmse_combiner<R: Real>(hhat: &CMat<R>, sigma2: f64) -> Result<CMat<R>> {
    let (e, m) = (hhat.nrows(), hhat.ncols());
    if e == 0 {
        return Err(Error::Config("combining needs at least one eMBB device".into()));
    }
    if sigma2 <= 0.0 {
        return Err(Error::Domain("combiner needs positive noise power".into()));
    }
    // columns are ĥ_e
    let hc = hhat.transpose();
    let full = &hc * hc.adjoint();
    let mut out = CMat::zeros(e, m);
    for k in 0..e {
        let hk = hc.column(k).into_owned();
        let mut a = &full - &hk * hk.adjoint();
        for i in 0..m {
            a[(i, i)] += Cx::new(lit(sigma2), R::zero());
        }
        let chol = linalg::cholesky(a).ok_or_else(|| Error::Domain("combiner system not positive definite".into()))?;
        out.row_mut(k).copy_from(&chol.solve(&hk).transpose());
    }
    Ok(out)
}

/// Everything needed to evaluate the post-combining SINR of each eMBB.
pub struct SinrInputs<'a, R: Real> {
    /// `T × E` eMBB sequences.
    pub s_embb: &'a CMat<R>,
    pub rho: &'a [f64],
    /// True channels, `E × M`.
    pub h: &'a CMat<R>,
    /// Estimates, `E × M`.
    pub hhat: &'a CMat<R>,
    /// `T × NQ` MTD sequences.
    pub s_mtd: &'a CMat<R>,
    /// Row-sparse MTD signals, `NQ × M`.
    pub x: &'a CMat<R>,
    /// Noise realization, `T × M`.
    pub noise: &'a CMat<R>,
    pub pilot_len: usize,
}

/// Γ_e over the payload slots with combiners given as rows (`E × M`).
///
/// Desired power is `ρ_e Σ_k |ω^H ĥ_e s_e[k]|²`. The denominator adds each
/// active MTD, every other eMBB through its true channel, the estimation error
/// `h_e - ĥ_e`, and the combined noise realization.
pub fn sinr<R: Real>(inp: &SinrInputs<'_, R>, combiners: &CMat<R>) -> Result<Vec<f64>> {
    let t = inp.noise.nrows();
    let l = inp.pilot_len;
    if l >= t || inp.s_embb.nrows() != t || inp.s_mtd.nrows() != t || combiners.shape() != inp.hhat.shape() {
        return Err(Error::Dimension("SINR inputs disagree".into()));
    }
    let energy = |s: &CMat<R>, c: usize| -> f64 { (l..t).map(|k| to_f64(abs2(s[(k, c)]))).sum() };
    let proj = |w: &CVec<R>, row: nalgebra::RowDVector<Cx<R>>| -> f64 {
        let mut acc = Cx::new(R::zero(), R::zero());
        for (a, b) in w.iter().zip(row.iter()) {
            acc += a.conj() * b;
        }
        to_f64(abs2(acc))
    };
    let active: Vec<usize> = (0..inp.x.nrows()).filter(|&c| inp.x.row(c).iter().any(|z| abs2(*z) > R::zero())).collect();
    let e_count = inp.h.nrows();
    let mut out = Vec::with_capacity(e_count);
    for e in 0..e_count {
        let w: CVec<R> = combiners.row(e).transpose();
        let ee = energy(inp.s_embb, e);
        let desired = inp.rho[e] * proj(&w, inp.hhat.row(e).into_owned()) * ee;
        let mut den = 0.0;
        for &c in &active {
            den += proj(&w, inp.x.row(c).into_owned()) * energy(inp.s_mtd, c);
        }
        for j in (0..e_count).filter(|&j| j != e) {
            den += inp.rho[j] * proj(&w, inp.h.row(j).into_owned()) * energy(inp.s_embb, j);
        }
        let err = inp.h.row(e) - inp.hhat.row(e);
        den += inp.rho[e] * proj(&w, err) * ee;
        for k in l..t {
            den += proj(&w, inp.noise.row(k).into_owned());
        }
        out.push(if den > 0.0 { desired / den } else { f64::INFINITY });
    }
    Ok(out)
}

/// eMBB transmit rate: `b / (T - L)` bits per channel use, or the literal
/// `b / ((T - L) T_s)` when selected.
pub fn transmit_rate(cfg: &NetworkConfig) -> f64 {
    let slots = cfg.payload_len() as f64;
    match cfg.rate_mode {
        RateMode::Bpcu => cfg.bits / slots,
        RateMode::Literal => cfg.bits / (slots * cfg.symbol_s),
    }
}

pub fn outage_threshold(r: f64) -> f64 {
    2f64.powf(r) - 1.0
}

/// Decoded iff `Γ ≥ 2^r − 1` (boundary counts as decoded).
pub fn outage_decision(gamma: f64, r: f64) -> bool {
    gamma >= outage_threshold(r)
}

/// Recomputes the residual from `Ȳ`, removing `sqrt(ρ_e) s_e ĥ_e^T` over all
/// `T` slots for every decoded device.
pub fn sic<R: Real>(block: &ReceivedBlock<R>, s_embb: &CMat<R>, rho: &[f64], hhat: &CMat<R>, decoded: &[bool]) -> Result<ReceivedBlock<R>> {
    if decoded.len() != hhat.nrows() || s_embb.ncols() != hhat.nrows() || rho.len() != hhat.nrows() {
        return Err(Error::Dimension("SIC mask, estimates and sequences disagree".into()));
    }
    let mut y = block.ybar.clone();
    for e in (0..decoded.len()).filter(|&e| decoded[e]) {
        y -= s_embb.column(e) * hhat.row(e) * Cx::new(lit::<R>(rho[e].sqrt()), R::zero());
    }
    Ok(ReceivedBlock { y, decoded_mask: decoded.to_vec(), ..block.clone() })
}

/// Per-device residual power `Σ_k ρ_e |s_e[k]|² ‖h_e − ĥ_e‖²` left after SIC.
pub fn sic_residual_power<R: Real>(s_embb: &CMat<R>, rho: &[f64], h: &CMat<R>, hhat: &CMat<R>, e: usize) -> f64 {
    let energy: f64 = s_embb.column(e).iter().map(|z| to_f64(abs2(*z))).sum();
    let err: f64 = (h.row(e) - hhat.row(e)).iter().map(|z| to_f64(abs2(*z))).sum();
    rho[e] * energy * err
}

/// Real helper: `|ω^H v|²` summed over rows of `block` restricted to `rows`.
pub fn projected_power<R: Real>(w: &CVec<R>, block: &CMat<R>, rows: std::ops::Range<usize>) -> f64 {
    let p: CVec<R> = block.rows(rows.start, rows.len()) * w.conjugate();
    p.iter().map(|z| to_f64(abs2(*z))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream, Domain};
    use crate::waveform::{assign_pilots, build_headers, hadamard_complex};

    fn randm(r: usize, c: usize, var: f64, seed: u64) -> CMat<f64> {
        let mut g = stream(seed, Domain::Trial, 99);
        CMat::from_fn(r, c, |_, _| complex_normal(&mut g, var))
    }

    #[test]
    fn noiseless_embb_only_block() {
        let h = hadamard_complex::<f64>(8).unwrap();
        let (psi, _) = assign_pilots(&h, 2).unwrap();
        let pay = qpsk_payload::<f64, _>(8, 2, &mut stream(1, Domain::Trial, 0));
        let se = embb_sequences(&psi, &pay).unwrap();
        let hh = randm(2, 4, 1.0, 1);
        let smtd = randm(16, 6, 1.0, 2);
        let x = CMat::zeros(6, 4);
        let y = synthesize_received(&smtd, &x, &se, &[0.5, 2.0], &hh, &CMat::zeros(16, 4)).unwrap();
        let want = se.column(0) * hh.row(0) * Cx::new(0.5f64.sqrt(), 0.0) + se.column(1) * hh.row(1) * Cx::new(2f64.sqrt(), 0.0);
        assert!((y - want).norm() < 1e-12);
        let zero = synthesize_received(&CMat::zeros(16, 6), &x, &CMat::zeros(16, 2), &[0.0, 0.0], &CMat::zeros(2, 4), &CMat::zeros(16, 4)).unwrap();
        assert_eq!(zero.norm(), 0.0);
        assert!(synthesize_received(&smtd, &x, &se, &[1.0], &hh, &CMat::zeros(16, 4)).is_err());
    }

    #[test]
    fn single_mtd_block_is_rank_one() {
        let smtd = randm(16, 6, 1.0, 3);
        let g = randm(3, 4, 1.0, 4);
        let x = mtd_signal_matrix(&g, &[false, false, false, true, false, false], 2).unwrap();
        let y = synthesize_received(&smtd, &x, &CMat::zeros(16, 0), &[], &CMat::zeros(0, 4), &CMat::zeros(16, 4)).unwrap();
        let sv = y.singular_values();
        assert!(sv[0] > 1e-3);
        assert!(sv.iter().skip(1).all(|&s| s < 1e-10 * sv[0]));
    }

    #[test]
    fn pilot_correlation_rejects_other_pilots_and_headers() {
        let h = hadamard_complex::<f64>(16).unwrap();
        let (psi, b) = assign_pilots(&h, 2).unwrap();
        let hd = build_headers(&b, 3, 5, &mut stream(2, Domain::Codebook, 0)).unwrap();
        let hh = randm(2, 4, 1.0, 5);
        let g = randm(5, 4, 1.0, 6);
        let yp = psi.column(0) * hh.row(0) * Cx::new(0.7, 0.0) + psi.column(1) * hh.row(1) + &hd.v * &g;
        let y0 = correlate_pilot(&yp, &psi.column(0).into_owned()).unwrap();
        let want = hh.row(0).transpose() * Cx::new(0.7 * 16.0, 0.0);
        assert!((y0 - want).norm() < 1e-10);
        let only_mtd = correlate_pilot(&(&hd.v * &g), &psi.column(1).into_owned()).unwrap();
        assert!(only_mtd.norm() < 1e-10);
    }

    #[test]
    fn estimator_limits() {
        let y = CVec::from_element(4, Cx::new(1.0f64, 0.0));
        let (hz, xi) = mmse_estimate(&y, 0.0, 2.0, 1.0, 8.0);
        assert_eq!(hz.norm(), 0.0);
        assert_eq!(xi, 2.0);
        let (hn, xi) = mmse_estimate(&y.scale(8.0 * 0.5), 0.25, 2.0, 0.0, 8.0);
        assert!((hn - &y).norm() < 1e-12);
        assert!(xi.abs() < 1e-12);
        let (_, xi_short) = mmse_estimate(&y, 1.0, 1.0, 1.0, 4.0);
        let (_, xi_long) = mmse_estimate(&y, 1.0, 1.0, 1.0, 32.0);
        assert!(xi_long < xi_short && xi_short < 1.0);
    }

    #[test]
    fn estimator_error_matches_monte_carlo() {
        let (rho, beta, sigma2, l): (f64, f64, f64, f64) = (0.3, 1.7, 2.0, 4.0);
        let mut g = stream(8, Domain::Trial, 1);
        let trials = 10_000;
        let mut acc = 0.0;
        let mut xi = 0.0;
        for _ in 0..trials {
            let h = CVec::<f64>::from_fn(4, |_, _| complex_normal(&mut g, beta));
            let w = CVec::<f64>::from_fn(4, |_, _| complex_normal(&mut g, l * sigma2));
            let y = h.scale(rho.sqrt() * l) + w;
            let (hh, x) = mmse_estimate(&y, rho, beta, sigma2, l);
            xi = x;
            acc += (hh - h).norm_squared() / 4.0;
        }
        let emp = acc / trials as f64;
        assert!((emp / xi - 1.0).abs() < 0.03, "empirical {emp}, analytic {xi}");
    }

    #[test]
    fn combiner_special_cases() {
        let h1 = randm(1, 6, 1.0, 9);
        let w = mmse_combiner(&h1, 0.5).unwrap();
        assert!((w.clone() - h1.scale(2.0)).norm() < 1e-12);
        // orthogonal interferer leaves the matched filter direction
        let mut h2 = CMat::<f64>::zeros(2, 4);
        h2[(0, 0)] = Cx::new(1.0, 0.5);
        h2[(0, 1)] = Cx::new(-0.3, 0.0);
        h2[(1, 2)] = Cx::new(2.0, 0.0);
        h2[(1, 3)] = Cx::new(0.0, 1.0);
        let w2 = mmse_combiner(&h2, 0.7).unwrap();
        assert!((w2.row(0) - h2.row(0).scale(1.0 / 0.7)).norm() < 1e-12);
        let scaled = {
            let mut s = h2.clone();
            s.row_mut(0).scale_mut(3.0);
            s
        };
        let w3 = mmse_combiner(&scaled, 0.7).unwrap();
        assert!((w3.row(0) - w2.row(0).scale(3.0)).norm() < 1e-12);
        assert!(mmse_combiner(&h2, 0.0).is_err());
        assert!(mmse_combiner(&CMat::<f64>::zeros(0, 4), 1.0).is_err());
    }

    fn sinr_setup(m: usize, sigma2: f64, seed: u64) -> f64 {
        let (t, l) = (24, 8);
        let h = hadamard_complex::<f64>(l).unwrap();
        let (psi, _) = assign_pilots(&h, 1).unwrap();
        let mut g = stream(seed, Domain::Trial, 5);
        let pay = qpsk_payload::<f64, _>(t - l, 1, &mut g);
        let se = embb_sequences(&psi, &pay).unwrap();
        let hh = CMat::from_fn(1, m, |_, _| complex_normal(&mut g, 1.0));
        let noise = CMat::from_fn(t, m, |_, _| complex_normal(&mut g, sigma2));
        let w = mmse_combiner(&hh, sigma2).unwrap();
        let smtd = CMat::zeros(t, 0);
        let x = CMat::zeros(0, m);
        let inp = SinrInputs { s_embb: &se, rho: &[1.0], h: &hh, hhat: &hh, s_mtd: &smtd, x: &x, noise: &noise, pilot_len: l };
        sinr(&inp, &w).unwrap()[0]
    }

    #[test]
    fn matched_filter_sinr_grows_with_antennas() {
        let mean = |m: usize| (0..400).map(|s| sinr_setup(m, 1.0, s)).sum::<f64>() / 400.0;
        let v: Vec<f64> = [8, 16, 32, 64].iter().map(|&m| mean(m)).collect();
        for (w, m) in v.iter().zip([8.0, 16.0, 32.0, 64.0]) {
            // E[Γ] = ρ‖h‖²/σ² ≈ M for unit power and variance
            assert!((w / m - 1.0).abs() < 0.15, "M = {m}: {w}");
        }
    }

    #[test]
    fn doubling_noise_halves_sinr() {
        let a: f64 = (0..400).map(|s| sinr_setup(16, 1.0, s)).sum();
        let b: f64 = (0..400).map(|s| sinr_setup(16, 2.0, s)).sum();
        assert!((a / b - 2.0).abs() < 0.1, "ratio {}", a / b);
    }

    #[test]
    fn outage_boundaries() {
        let r = 128.0 / 224.0;
        assert!((outage_threshold(r) - 0.4866).abs() < 1e-3);
        assert!(outage_decision(outage_threshold(r), r));
        assert!(!outage_decision(outage_threshold(r) - 1e-12, r));
        assert!(outage_decision(1e-300, 0.0));
        let cfg = NetworkConfig::full();
        assert!((transmit_rate(&cfg) - r).abs() < 1e-15);
        let mut lit_cfg = cfg.clone();
        lit_cfg.rate_mode = RateMode::Literal;
        assert!((transmit_rate(&lit_cfg) - 35_714.29).abs() < 0.01);
    }

    #[test]
    fn sic_cancellation_and_idempotence() {
        let h = hadamard_complex::<f64>(8).unwrap();
        let (psi, _) = assign_pilots(&h, 2).unwrap();
        let pay = qpsk_payload::<f64, _>(8, 2, &mut stream(3, Domain::Trial, 0));
        let se = embb_sequences(&psi, &pay).unwrap();
        let hh = randm(2, 4, 1.0, 11);
        let noise = randm(16, 4, 0.01, 12);
        let rho = [0.4, 1.1];
        let y = synthesize_received(&CMat::zeros(16, 0), &CMat::zeros(0, 4), &se, &rho, &hh, &noise).unwrap();
        let block = ReceivedBlock::new(y, 8, 0.01, pay);
        let none = sic(&block, &se, &rho, &hh, &[false, false]).unwrap();
        assert_eq!(none.y, block.ybar);
        let all = sic(&block, &se, &rho, &hh, &[true, true]).unwrap();
        assert!((&all.y - &noise).norm() < 1e-12);
        let twice = sic(&all, &se, &rho, &hh, &[true, true]).unwrap();
        assert_eq!(twice.y, all.y);
        assert_eq!(block.yp(), block.ybar.rows(0, 8).into_owned());
    }

    #[test]
    fn imperfect_sic_residual_power() {
        let h = hadamard_complex::<f64>(8).unwrap();
        let (psi, _) = assign_pilots(&h, 1).unwrap();
        let mut g = stream(21, Domain::Trial, 0);
        let (mut emp, mut pred) = (0.0, 0.0);
        for _ in 0..2000 {
            let pay = qpsk_payload::<f64, _>(8, 1, &mut g);
            let se = embb_sequences(&psi, &pay).unwrap();
            let hh = CMat::from_fn(1, 4, |_, _| complex_normal(&mut g, 1.0));
            let est = &hh + CMat::from_fn(1, 4, |_, _| complex_normal(&mut g, 0.05));
            let y = synthesize_received(&CMat::zeros(16, 0), &CMat::zeros(0, 4), &se, &[0.8], &hh, &CMat::zeros(16, 4)).unwrap();
            let out = sic(&ReceivedBlock::new(y, 8, 0.0, pay), &se, &[0.8], &est, &[true]).unwrap();
            emp += out.y.norm_squared();
            pred += sic_residual_power(&se, &[0.8], &hh, &est, 0);
        }
        assert!((emp / pred - 1.0).abs() < 0.05);
    }

    #[test]
    fn projected_power_matches_direct() {
        let b = randm(5, 3, 1.0, 30);
        let w = CVec::from_fn(3, |i, _| Cx::new(i as f64, 1.0));
        let direct: f64 = (1..4).map(|k| b.row(k).iter().zip(w.iter()).map(|(x, y)| y.conj() * x).sum::<Cx<f64>>().norm_sqr()).sum();
        assert!((projected_power(&w, &b, 1..4) - direct).abs() < 1e-12);
    }
}
