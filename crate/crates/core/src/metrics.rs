//! Sequence-level detection metrics, channel-estimate NMSE and eMBB outage.

use crate::error::{Error, Result};
use crate::scalar::{abs2, to_f64, CMat, Real};
use crate::solvers::block_max;

/// Normal-approximation 95% half-width multiplier.
pub const Z95: f64 = 1.959963984540054;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanCi {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanCi {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Self::default();
        values.into_iter().for_each(|v| acc.push(v));
        acc
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    /// 95% half-width; absent with fewer than two samples.
    pub fn ci95(&self) -> Option<f64> {
        (self.n > 1).then(|| Z95 * (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt())
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        Some((self.mean()? - self.ci95()?, self.mean()? + self.ci95()?))
    }
}

/// True when the 95% intervals of `a` and `b` do not overlap and `a` lies below.
pub fn separated_below(a: &MeanCi, b: &MeanCi) -> bool {
    match (a.interval(), b.interval()) {
        (Some((_, a_hi)), Some((b_lo, _))) => a_hi < b_lo,
        _ => false,
    }
}

/// Per-trial sequence-level miss and false-alarm rates. `pmd` is absent
/// without transmitted sequences; `pfa` is absent when every sequence was sent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRates {
    pub pmd: Option<f64>,
    pub pfa: Option<f64>,
}

pub fn pmd_pfa(alpha_true: &[bool], alpha_hat: &[bool]) -> Result<DetectionRates> {
    if alpha_true.len() != alpha_hat.len() {
        return Err(Error::Dimension(format!("{} truth flags vs {} decisions", alpha_true.len(), alpha_hat.len())));
    }
    let k = alpha_true.iter().filter(|&&a| a).count();
    let nq = alpha_true.len();
    let misses = alpha_true.iter().zip(alpha_hat).filter(|(&a, &h)| a && !h).count();
    let false_alarms = alpha_true.iter().zip(alpha_hat).filter(|(&a, &h)| !a && h).count();
    if nq == k {
        log::warn!("every sequence transmitted; false-alarm rate undefined");
    }
    Ok(DetectionRates {
        pmd: (k > 0).then(|| misses as f64 / k as f64),
        pfa: (nq > k).then(|| false_alarms as f64 / (nq - k) as f64),
    })
}

/// Per-device scores of one trial, reduced to what thresholding needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScores {
    /// Maximum score over each device's message block.
    pub score: Vec<f64>,
    /// Message attaining the maximum (lowest index on ties).
    pub argmax: Vec<usize>,
    /// Message actually sent, if any.
    pub truth: Vec<Option<usize>>,
    pub q: usize,
}

impl TrialScores {
    pub fn new(xbar: &[f64], q: usize, truth: &[Option<usize>]) -> Result<Self> {
        if q == 0 || xbar.len() != truth.len() * q {
            return Err(Error::Dimension(format!("{} scores for {} devices with Q = {q}", xbar.len(), truth.len())));
        }
        let (argmax, score) = xbar.chunks(q).map(block_max).unzip();
        Ok(Self { score, argmax, truth: truth.to_vec(), q })
    }

    pub fn active(&self) -> usize {
        self.truth.iter().filter(|t| t.is_some()).count()
    }

    fn inactive_sequences(&self) -> usize {
        self.truth.len() * self.q - self.active()
    }

    /// Detection rates at threshold `zeta`. A device detected with the wrong
    /// message counts as one miss and one false alarm.
    pub fn rates(&self, zeta: f64) -> DetectionRates {
        let k = self.active();
        let mut misses = k;
        let mut fa = 0;
        for ((s, a), t) in self.score.iter().zip(&self.argmax).zip(&self.truth) {
            if *s >= zeta {
                if *t == Some(*a) {
                    misses -= 1;
                } else {
                    fa += 1;
                }
            }
        }
        let inactive = self.inactive_sequences();
        DetectionRates {
            pmd: (k > 0).then(|| misses as f64 / k as f64),
            pfa: (inactive > 0).then(|| fa as f64 / inactive as f64),
        }
    }
}

/// Trial-averaged rates with 95% half-widths at one threshold.
pub fn evaluate_at(trials: &[TrialScores], zeta: f64) -> (MeanCi, MeanCi) {
    let mut pmd = MeanCi::default();
    let mut pfa = MeanCi::default();
    for t in trials {
        let r = t.rates(zeta);
        if let Some(v) = r.pmd {
            pmd.push(v);
        }
        if let Some(v) = r.pfa {
            pfa.push(v);
        }
    }
    (pmd, pfa)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub zeta: f64,
    pub pmd: f64,
    pub pfa: f64,
}

/// ROC over every distinct pooled score (plus a threshold above the maximum),
/// averaging per-trial rates. Sorted by increasing `pfa`. With `grid` set the
/// curve is thinned to about that many points, keeping both endpoints.
pub fn roc_curve(trials: &[TrialScores], grid: Option<usize>) -> Result<Vec<RocPoint>> {
    let mut pool: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in trials.iter().enumerate() {
        for (d, &s) in t.score.iter().enumerate() {
            pool.push((s, ti, d));
        }
    }
    if pool.is_empty() {
        return Err(Error::Domain("ROC needs at least one score".into()));
    }
    pool.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let n_pmd = trials.iter().filter(|t| t.active() > 0).count();
    let n_pfa = trials.iter().filter(|t| t.inactive_sequences() > 0).count();
    let mut pmd = if n_pmd > 0 { 1.0 } else { 0.0 };
    let mut pfa = 0.0;
    let mut out = vec![RocPoint { zeta: pool[0].0 + pool[0].0.abs().max(1.0), pmd, pfa }];
    let mut i = 0;
    while i < pool.len() {
        let zeta = pool[i].0;
        while i < pool.len() && pool[i].0 == zeta {
            let (_, ti, d) = pool[i];
            let t = &trials[ti];
            if t.truth[d] == Some(t.argmax[d]) {
                pmd -= 1.0 / (t.active() as f64 * n_pmd as f64);
            } else {
                pfa += 1.0 / (t.inactive_sequences() as f64 * n_pfa as f64);
            }
            i += 1;
        }
        out.push(RocPoint { zeta, pmd: pmd.max(0.0), pfa: pfa.min(1.0) });
    }
    if let Some(g) = grid.filter(|&g| g >= 2 && g < out.len()) {
        let last = out.len() - 1;
        let thinned: Vec<RocPoint> = (0..g).map(|k| out[k * last / (g - 1)]).collect();
        out = thinned;
    }
    Ok(out)
}

/// Smallest PMD on the curve among points with `pfa ≤ target`, and the
/// threshold attaining it.
pub fn pmd_at_pfa(roc: &[RocPoint], target: f64) -> Option<RocPoint> {
    roc.iter()
        .filter(|p| p.pfa <= target)
        .fold(None, |best: Option<RocPoint>, p| match best {
            Some(b) if b.pmd < p.pmd || (b.pmd == p.pmd && b.zeta >= p.zeta) => Some(b),
            _ => Some(*p),
        })
}

/// Mean relative error over the rows in `rows`. Rows whose truth has zero
/// norm are skipped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Nmse {
    pub per_row: Vec<f64>,
    pub excluded: usize,
}

impl Nmse {
    pub fn mean(&self) -> Option<f64> {
        (!self.per_row.is_empty()).then(|| self.per_row.iter().sum::<f64>() / self.per_row.len() as f64)
    }
}

pub fn nmse<R: Real>(truth: &CMat<R>, est: &CMat<R>, rows: &[usize]) -> Result<Nmse> {
    if truth.shape() != est.shape() {
        return Err(Error::Dimension("NMSE inputs differ in shape".into()));
    }
    let mut per_row = Vec::with_capacity(rows.len());
    let mut excluded = 0;
    for &i in rows {
        let den: f64 = truth.row(i).iter().map(|z| to_f64(abs2(*z))).sum();
        if den == 0.0 {
            excluded += 1;
            continue;
        }
        let num: f64 = truth.row(i).iter().zip(est.row(i).iter()).map(|(a, b)| to_f64(abs2(*a - *b))).sum();
        per_row.push(num / den);
    }
    Ok(Nmse { per_row, excluded })
}

/// Fraction of (trial, device) pairs in outage with its binomial 95% half-width.
pub fn outage_probability(decoded: &[Vec<bool>]) -> (f64, Option<f64>) {
    let n: usize = decoded.iter().map(Vec::len).sum();
    if n == 0 {
        return (0.0, None);
    }
    let out = decoded.iter().flatten().filter(|&&d| !d).count() as f64 / n as f64;
    let ci = (n > 1).then(|| Z95 * (out * (1.0 - out) / n as f64).sqrt());
    (out, ci)
}
