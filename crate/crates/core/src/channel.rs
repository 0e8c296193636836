//! Large-scale fading, power control and per-trial channel/activity synthesis.

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::scalar::{CMat, Real};
use rand::Rng;

/// Path loss in dB for a distance in km.
pub fn path_loss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d_km} km")));
    }
    Ok(130.0 + 37.6 * d_km.log10())
}

/// Linear large-scale coefficient for a loss in dB.
pub fn db_to_linear_loss(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Power-controlled MTD transmit power: received power `p·γ` equals `p_max·γ_min`.
pub fn uplink_power_mtd(gamma_n: f64, gamma_min: f64, p_max: f64) -> Result<f64> {
    if !(gamma_min > 0.0) {
        return Err(Error::Config(format!("gamma_min must be positive, got {gamma_min}")));
    }
    if gamma_n < gamma_min {
        return Err(Error::Config(format!(
            "device coefficient {gamma_n:e} below edge coefficient {gamma_min:e}: placement outside the cell"
        )));
    }
    Ok(p_max * gamma_min / gamma_n)
}

/// Average received SNR in dB, `10 log10(p·g/σ²)`.
pub fn average_snr_db(power: f64, coefficient: f64, sigma2: f64) -> Result<f64> {
    if !(power > 0.0 && coefficient > 0.0 && sigma2 > 0.0) {
        return Err(Error::Domain("SNR inputs must be positive".into()));
    }
    Ok(10.0 * (power * coefficient / sigma2).log10())
}

/// Edge coefficient that yields `snr_db` at transmit power `power`.
pub fn edge_coefficient_for_snr(snr_db: f64, power: f64, sigma2: f64) -> f64 {
    sigma2 * 10f64.powf(snr_db / 10.0) / power
}

/// Device distances and large-scale coefficients for one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct DevicePlacement {
    pub embb_km: Vec<f64>,
    pub mtd_km: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta_min: f64,
    pub gamma_min: f64,
    /// Power-controlled MTD transmit powers.
    pub p_ul: Vec<f64>,
}

impl DevicePlacement {
    /// Received power of every MTD, identical across devices.
    pub fn mtd_received_power(&self) -> f64 {
        self.p_ul[0] * self.gamma[0]
    }
}

/// Draws a placement uniformly over the annulus `[min_radius, cell_radius]`.
///
/// Coefficients are anchored so that a device at the cell edge sees exactly
/// the configured average SNR; closer devices gain the path-loss difference.
pub fn place_devices<G: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut G) -> Result<DevicePlacement> {
    let beta_min = edge_coefficient_for_snr(cfg.snr_embb_db, cfg.rho_max_w, cfg.noise_w);
    let gamma_min = edge_coefficient_for_snr(cfg.snr_mtd_db, cfg.p_max_w, cfg.noise_w);
    let edge_db = path_loss_db(cfg.cell_radius_m / 1000.0)?;
    let (r0, r1) = (cfg.min_radius_m, cfg.cell_radius_m);
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.gen();
                (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt() / 1000.0
            })
            .collect()
    };
    let embb_km = draw(cfg.n_embb);
    let mtd_km = draw(cfg.n_mtds);
    let relative = |d: f64| -> Result<f64> { Ok(db_to_linear_loss(path_loss_db(d)? - edge_db)) };
    let beta = embb_km.iter().map(|&d| relative(d).map(|r| beta_min * r)).collect::<Result<Vec<_>>>()?;
    let gamma = mtd_km.iter().map(|&d| relative(d).map(|r| gamma_min * r)).collect::<Result<Vec<_>>>()?;
    let p_ul = gamma.iter().map(|&g| uplink_power_mtd(g, gamma_min, cfg.p_max_w)).collect::<Result<Vec<_>>>()?;
    Ok(DevicePlacement { embb_km, mtd_km, beta, gamma, beta_min, gamma_min, p_ul })
}

/// Small-scale channels for one coherence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels<R: Real> {
    /// `E × M`, row `e` is `h_e^T`.
    pub h: CMat<R>,
    /// `N × M`, row `n` is `g̃_n^T`.
    pub g_tilde: CMat<R>,
    /// `N × M` effective channels `sqrt(p_n) g̃_n`.
    pub g: CMat<R>,
}

/// Activity of the MTD population in one coherence interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activity {
    pub alpha: Vec<bool>,
    /// Message index (0-based) for active devices.
    pub q_choice: Vec<Option<usize>>,
    /// Flat `N·Q` sequence indicators, entry `n·Q + q`.
    pub alpha_seq: Vec<bool>,
}

impl Activity {
    pub fn active_count(&self) -> usize {
        self.alpha.iter().filter(|&&a| a).count()
    }

    /// Flat indices of transmitted sequences.
    pub fn transmitted(&self) -> Vec<usize> {
        self.alpha_seq.iter().enumerate().filter_map(|(i, &a)| a.then_some(i)).collect()
    }
}

/// Everything random about one trial before the receiver runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<R: Real> {
    pub channels: Channels<R>,
    pub activity: Activity,
}

pub fn draw_channels<R: Real, G: Rng + ?Sized>(
    cfg: &NetworkConfig,
    placement: &DevicePlacement,
    rng: &mut G,
) -> Channels<R> {
    let m = cfg.antennas;
    let h = CMat::from_fn(cfg.n_embb, m, |e, _| complex_normal(rng, placement.beta[e]));
    let g_tilde = CMat::from_fn(cfg.n_mtds, m, |n, _| complex_normal(rng, placement.gamma[n]));
    let mut g = g_tilde.clone();
    for (n, mut row) in g.row_iter_mut().enumerate() {
        let s = crate::scalar::lit::<R>(placement.p_ul[n].sqrt());
        row.iter_mut().for_each(|z| *z = z.scale(s));
    }
    Channels { h, g_tilde, g }
}

pub fn draw_activity<G: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut G) -> Activity {
    let q = cfg.q_messages;
    let mut alpha = Vec::with_capacity(cfg.n_mtds);
    let mut q_choice = Vec::with_capacity(cfg.n_mtds);
    let mut alpha_seq = vec![false; cfg.n_mtds * q];
    for n in 0..cfg.n_mtds {
        let active = rng.gen_bool(cfg.epsilon);
        alpha.push(active);
        if active {
            let choice = rng.gen_range(0..q);
            alpha_seq[n * q + choice] = true;
            q_choice.push(Some(choice));
        } else {
            q_choice.push(None);
        }
    }
    Activity { alpha, q_choice, alpha_seq }
}
