//! Joint eMBB pilot and MTD codebook design.
//!
//! Pilots are the first `E` columns of an `L × L` complex Hadamard matrix. The
//! remaining `L - E` columns span the header space: every MTD header is a
//! non-negative combination of `z` of them, so headers are orthogonal to all
//! pilots by construction. Message bodies are picked from a candidate pool by
//! greedy minimum cross-correlation.

use crate::config::{NetworkConfig, PilotKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::complex_normal;
use crate::scalar::{abs2, lit, CMat, Cx, Real};
use rand::seq::index;
use rand::Rng;
use std::collections::HashSet;

/// Complex Hadamard matrix of order `l` with QPSK-valued, unit-modulus entries.
///
/// Sylvester construction rotated by `e^{jπ/4}`, so `H^H H = l I`.
pub fn hadamard_complex<R: Real>(l: usize) -> Result<CMat<R>> {
    if l == 0 || !l.is_power_of_two() {
        return Err(Error::UnsupportedSize(l));
    }
    let phase = Cx::new(lit::<R>(std::f64::consts::FRAC_1_SQRT_2), lit(std::f64::consts::FRAC_1_SQRT_2));
    Ok(CMat::from_fn(l, l, |i, j| {
        // Sylvester: sign is (-1)^{popcount(i & j)}
        if (i & j).count_ones() % 2 == 0 {
            phase
        } else {
            -phase
        }
    }))
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Probability that two devices draw the same `z`-subset of `L - E` sequences.
pub fn collision_probability(l: usize, e: usize, z: usize) -> f64 {
    1.0 / binomial(l - e, z) as f64
}

/// Collision targets are quoted to three significant digits, so a probability
/// that rounds to the target satisfies it.
pub fn meets_collision_target(p: f64, chi: f64) -> bool {
    if p <= chi {
        return true;
    }
    let rounded: f64 = format!("{p:.2e}").parse().unwrap_or(p);
    rounded <= chi
}

/// Smallest header combination size `z` meeting the collision target `chi`.
pub fn solve_z(l: usize, e: usize, chi: f64) -> Result<usize> {
    if l <= e {
        return Err(Error::Config(format!("need L ({l}) > E ({e})")));
    }
    if !(chi > 0.0 && chi <= 1.0) {
        return Err(Error::Config(format!("collision target {chi} outside (0, 1]")));
    }
    let free = l - e;
    let z_hi = (free / 2).max(1);
    for z in 1..=z_hi {
        if meets_collision_target(collision_probability(l, e, z), chi) {
            return Ok(z);
        }
    }
    Err(Error::Infeasible { min_collision: collision_probability(l, e, z_hi), z: z_hi })
}

/// Splits the Hadamard basis into pilots (first `E` columns) and the header
/// basis `B` (remaining `L - E` columns).
pub fn assign_pilots<R: Real>(hadamard: &CMat<R>, e: usize) -> Result<(CMat<R>, CMat<R>)> {
    let l = hadamard.ncols();
    if e >= l {
        return Err(Error::Config(format!("need E ({e}) < L ({l})")));
    }
    Ok((hadamard.columns(0, e).into_owned(), hadamard.columns(e, l - e).into_owned()))
}

/// MTD headers built from random subsets of the header basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Headers<R: Real> {
    /// `L × N`, column `n` is `v_n`.
    pub v: CMat<R>,
    /// Per-device subset, as column indices into `B` (sorted).
    pub pi: Vec<Vec<usize>>,
    /// Per-device combining weights aligned with `pi`.
    pub vartheta: Vec<Vec<R>>,
}

pub fn build_headers<R: Real, G: Rng + ?Sized>(basis: &CMat<R>, z: usize, n: usize, rng: &mut G) -> Result<Headers<R>> {
    let width = basis.ncols();
    if z == 0 || z > width {
        return Err(Error::Config(format!("combination size z = {z} not in 1..={width}")));
    }
    let mut v = CMat::zeros(basis.nrows(), n);
    let mut pi = Vec::with_capacity(n);
    let mut vartheta = Vec::with_capacity(n);
    for dev in 0..n {
        let mut subset = index::sample(rng, width, z).into_vec();
        subset.sort_unstable();
        // uniform on (0, 1]
        let weights: Vec<R> = (0..z).map(|_| lit(1.0 - rng.gen::<f64>())).collect();
        let mut col = v.column_mut(dev);
        for (&idx, &w) in subset.iter().zip(&weights) {
            col.axpy(Cx::new(w, R::zero()), &basis.column(idx), Cx::new(R::one(), R::zero()));
        }
        pi.push(subset);
        vartheta.push(weights);
    }
    Ok(Headers { v, pi, vartheta })
}

/// Candidate message rows and their pairwise cross-correlation.
#[derive(Debug, Clone)]
pub struct CandidatePool<R: Real> {
    /// `P × len` rows drawn from the κ-PSK alphabet.
    pub rows: CMat<R>,
    /// `P × P` magnitudes `|u_i^H u_j|`, diagonal set to `+∞`.
    pub theta: nalgebra::DMatrix<R>,
}

/// κ-PSK symbol `e^{j 2π k / κ}`.
pub fn psk_symbol<R: Real>(k: usize, kappa: usize) -> Cx<R> {
    let ang = 2.0 * std::f64::consts::PI * k as f64 / kappa as f64;
    let (s, c) = ang.sin_cos();
    // snap exact axis points so κ = 2, 4 produce exact ±1, ±j
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Cx::new(lit(snap(c)), lit(snap(s)))
}

/// Builds the candidate pool: exhaustive when `κ^len ≤ cap`, otherwise `cap`
/// distinct rows sampled uniformly from the alphabet space.
pub fn candidate_pool<R: Real, G: Rng + ?Sized>(len: usize, kappa: usize, cap: usize, rng: &mut G) -> Result<CandidatePool<R>> {
    if kappa < 2 {
        return Err(Error::Config("alphabet order must be at least 2".into()));
    }
    if cap == 0 || len == 0 {
        return Err(Error::Config("candidate pool needs positive cap and length".into()));
    }
    let exhaustive = (len as f64) * (kappa as f64).ln() <= (cap as f64).ln() + 1e-9;
    let digits: Vec<Vec<usize>> = if exhaustive {
        let total = kappa.pow(len as u32);
        (0..total)
            .map(|mut idx| {
                let mut d = vec![0; len];
                for slot in d.iter_mut().rev() {
                    *slot = idx % kappa;
                    idx /= kappa;
                }
                d
            })
            .collect()
    } else {
        let mut seen = HashSet::with_capacity(cap);
        let mut out = Vec::with_capacity(cap);
        while out.len() < cap {
            let d: Vec<usize> = (0..len).map(|_| rng.gen_range(0..kappa)).collect();
            if seen.insert(d.clone()) {
                out.push(d);
            }
        }
        out
    };
    let rows: CMat<R> = CMat::from_fn(digits.len(), len, |i, j| psk_symbol(digits[i][j], kappa));
    let gram = linalg::mul_bh(&rows, &rows);
    let mut theta = gram.map(|z| abs2(z).sqrt());
    theta.fill_diagonal(R::max_value().unwrap_or_else(|| lit(f64::MAX)));
    Ok(CandidatePool { rows, theta })
}

/// Greedy minimum-correlation selection of `q` distinct pool rows.
///
/// The first pick is the row `i*` of the globally least-correlated pair
/// `(i*, j)`, `i > j`, ties resolved by smallest `(i, j)`. Each further pick is
/// the unused row whose worst correlation with the rows already chosen is
/// smallest (lowest index on ties), so for `q = 2` the result is exactly the
/// least-correlated pair. Chosen rows leave the candidate set.
pub fn select_messages<R: Real>(pool: &CandidatePool<R>, q: usize) -> Result<Vec<usize>> {
    let p = pool.rows.nrows();
    if q > p {
        return Err(Error::Config(format!("candidate pool has {p} rows, need {q}")));
    }
    if q == 0 {
        return Ok(Vec::new());
    }
    if p == 1 {
        return Ok(vec![0]);
    }
    let theta = &pool.theta;
    let mut best = (R::max_value().unwrap_or_else(|| lit(f64::MAX)), 1usize, 0usize);
    for i in 1..p {
        for j in 0..i {
            if theta[(i, j)] < best.0 {
                best = (theta[(i, j)], i, j);
            }
        }
    }
    let mut chosen = vec![best.1];
    let mut used = vec![false; p];
    used[best.1] = true;
    // worst-case correlation of each candidate against the chosen set
    let mut worst: Vec<R> = (0..p).map(|k| theta[(k, best.1)]).collect();
    while chosen.len() < q {
        let (k, _) = (0..p)
            .filter(|&k| !used[k])
            .map(|k| (k, worst[k]))
            .fold((usize::MAX, R::max_value().unwrap_or_else(|| lit(f64::MAX))), |acc, (k, w)| {
                if acc.0 == usize::MAX || w < acc.1 {
                    (k, w)
                } else {
                    acc
                }
            });
        used[k] = true;
        chosen.push(k);
        for (c, w) in worst.iter_mut().enumerate() {
            if theta[(c, k)] > *w {
                *w = theta[(c, k)];
            }
        }
    }
    Ok(chosen)
}

/// Message bodies for one device: `(T - L) × Q`, column `q` is `u^q`.
pub fn generate_messages<R: Real, G: Rng + ?Sized>(
    t: usize,
    l: usize,
    q: usize,
    kappa: usize,
    pool_cap: usize,
    rng: &mut G,
) -> Result<CMat<R>> {
    if l >= t {
        return Err(Error::Config(format!("no payload slots: T = {t}, L = {l}")));
    }
    let pool = candidate_pool::<R, G>(t - l, kappa, pool_cap, rng)?;
    let picks = select_messages(&pool, q)?;
    Ok(CMat::from_fn(t - l, q, |k, c| pool.rows[(picks[c], k)]))
}

/// Pilots, headers, messages and the assembled sensing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<R: Real> {
    /// `L × E` pilots, column `e` is `ψ_e`.
    pub psi: CMat<R>,
    /// `L × N` headers before sequence normalisation.
    pub v: CMat<R>,
    /// `(T - L) × NQ` message bodies before normalisation.
    pub u: CMat<R>,
    /// `T × NQ` unit-norm sensing matrix; column `n·Q + q` is `s_n^q`.
    pub s: CMat<R>,
    pub q: usize,
    pub z: usize,
    pub kappa: usize,
    pub pi: Vec<Vec<usize>>,
    pub vartheta: Vec<Vec<R>>,
    pub seed: u64,
}

impl<R: Real> Codebook<R> {
    pub fn pilot_len(&self) -> usize {
        self.psi.nrows()
    }
    pub fn coherence_len(&self) -> usize {
        self.s.nrows()
    }
    pub fn n_embb(&self) -> usize {
        self.psi.ncols()
    }
    pub fn n_mtds(&self) -> usize {
        self.v.ncols()
    }
    pub fn n_sequences(&self) -> usize {
        self.s.ncols()
    }

    /// Largest `|S[0..L, c]^H ψ_e|` over all columns and pilots.
    pub fn header_pilot_leakage(&self) -> R {
        let l = self.pilot_len();
        if self.n_embb() == 0 {
            return R::zero();
        }
        let heads = self.s.rows(0, l).into_owned();
        let c = linalg::mul_ah(&heads, &self.psi);
        c.iter().fold(R::zero(), |m, z| m.max(abs2(*z).sqrt()))
    }

    /// Largest `|ψ_i^H ψ_j|`, `i ≠ j`.
    pub fn pilot_cross_correlation(&self) -> R {
        let g = self.psi.adjoint() * &self.psi;
        let mut m = R::zero();
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i != j {
                    m = m.max(abs2(g[(i, j)]).sqrt());
                }
            }
        }
        m
    }
}

/// Stacks `[v_n; u_n^q]` into column `n·Q + q` and scales each to unit norm.
pub fn assemble_codebook<R: Real>(psi: CMat<R>, v: CMat<R>, u: CMat<R>, q: usize) -> Result<Codebook<R>> {
    let l = v.nrows();
    let n = v.ncols();
    if psi.nrows() != l {
        return Err(Error::Dimension(format!("pilots have {} rows, headers {l}", psi.nrows())));
    }
    if q == 0 || u.ncols() != n * q {
        return Err(Error::Dimension(format!("messages have {} columns, expected N·Q = {}", u.ncols(), n * q)));
    }
    let t = l + u.nrows();
    let mut s = CMat::zeros(t, n * q);
    for dev in 0..n {
        for k in 0..q {
            let c = dev * q + k;
            let mut col = s.column_mut(c);
            col.rows_mut(0, l).copy_from(&v.column(dev));
            col.rows_mut(l, t - l).copy_from(&u.column(c));
            let norm = col.iter().fold(R::zero(), |a, z| a + abs2(*z)).sqrt();
            if norm > R::zero() {
                col.unscale_mut(norm);
            }
        }
    }
    Ok(Codebook { psi, v, u, s, q, z: 0, kappa: 0, pi: Vec::new(), vartheta: Vec::new(), seed: 0 })
}

/// Full codebook for a scenario.
///
/// When the collision target cannot be met (short pilots), the combination
/// size that minimises the collision probability is used instead.
pub fn generate_codebook<R: Real, G: Rng + ?Sized>(cfg: &NetworkConfig, seed: u64, rng: &mut G) -> Result<Codebook<R>> {
    let (l, e, n, q, t) = (cfg.pilot_len, cfg.n_embb, cfg.n_mtds, cfg.q_messages, cfg.coherence_len);
    if l >= t {
        return Err(Error::Config(format!("MTD codebook needs payload slots: T = {t}, L = {l}")));
    }
    let z = match solve_z(l, e, cfg.chi) {
        Ok(z) => z,
        Err(Error::Infeasible { min_collision, z }) => {
            log::warn!("collision target {} unreachable for L = {l}, E = {e}; using z = {z} (p = {min_collision:.3e})", cfg.chi);
            z
        }
        Err(err) => return Err(err),
    };
    let (psi, headers) = match cfg.pilots {
        PilotKind::Hadamard => {
            let h = hadamard_complex::<R>(l)?;
            let (psi, basis) = assign_pilots(&h, e)?;
            (psi, build_headers(&basis, z, n, rng)?)
        }
        PilotKind::Gaussian => {
            let psi = CMat::from_fn(l, e, |_, _| complex_normal(rng, 1.0));
            let v = CMat::from_fn(l, n, |_, _| complex_normal(rng, 1.0));
            (psi, Headers { v, pi: vec![Vec::new(); n], vartheta: vec![Vec::new(); n] })
        }
    };
    let mut u = CMat::zeros(t - l, n * q);
    let shared = if cfg.shared_pool {
        Some(generate_messages::<R, G>(t, l, q, cfg.kappa, cfg.pool_cap, rng)?)
    } else {
        None
    };
    for dev in 0..n {
        let msgs = match &shared {
            Some(m) => m.clone(),
            None => generate_messages::<R, G>(t, l, q, cfg.kappa, cfg.pool_cap, rng)?,
        };
        u.columns_mut(dev * q, q).copy_from(&msgs);
    }
    let mut cb = assemble_codebook(psi, headers.v, u, q)?;
    cb.z = z;
    cb.kappa = cfg.kappa;
    cb.pi = headers.pi;
    cb.vartheta = headers.vartheta;
    cb.seed = seed;
    Ok(cb)
}
