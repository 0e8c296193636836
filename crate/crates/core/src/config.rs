//! Scenario configuration.
//!
//! Physical constants stay in `f64`; the numeric core converts at the point of
//! use. Files are plain `key = value` text, one entry per line, `#` comments.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Amp,
    Admm,
    Sbl,
    Somp,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Amp, SolverKind::Admm, SolverKind::Sbl, SolverKind::Somp];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Amp => "amp",
            SolverKind::Admm => "admm",
            SolverKind::Sbl => "sbl",
            SolverKind::Somp => "somp",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amp" => Ok(SolverKind::Amp),
            "admm" | "l21" | "admm-l21" => Ok(SolverKind::Admm),
            "sbl" | "em-sbl" => Ok(SolverKind::Sbl),
            "somp" | "omp" => Ok(SolverKind::Somp),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

/// How the eMBB transmit rate is derived from the payload size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// `r = b / (T - L)` bits per channel use.
    Bpcu,
    /// `r = b / ((T - L) Ts)`, literally including the symbol duration.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotKind {
    /// Hadamard pilots with headers confined to the orthogonal complement.
    Hadamard,
    /// i.i.d. Gaussian pilots and headers (no orthogonality), benchmark only.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub tol: f64,
    pub t_max: usize,
    /// ℓ2,1 weight; `None` selects the data-driven default.
    pub mu: Option<f64>,
    pub rho: f64,
    /// SOMP support cap; `None` selects `ceil(2 ε N)`.
    pub k_max: Option<usize>,
    /// AMP state-evolution samples; 0 uses the empirical residual covariance.
    pub se_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { kind: SolverKind::Sbl, tol: 1e-4, t_max: 200, mu: None, rho: 1.0, k_max: None, se_samples: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_mtds: usize,
    pub n_embb: usize,
    pub antennas: usize,
    pub coherence_len: usize,
    pub pilot_len: usize,
    pub q_messages: usize,
    pub epsilon: f64,
    pub kappa: usize,
    pub chi: f64,
    pub p_max_w: f64,
    pub rho_max_w: f64,
    pub noise_w: f64,
    pub cell_radius_m: f64,
    pub min_radius_m: f64,
    pub bits: f64,
    pub symbol_s: f64,
    pub seed: u64,
    pub trials: usize,
    pub snr_mtd_db: f64,
    pub snr_embb_db: f64,
    pub pool_cap: usize,
    pub shared_pool: bool,
    pub pilots: PilotKind,
    pub rate_mode: RateMode,
    pub freeze_placement: bool,
    pub regenerate_codebook: bool,
    pub pfa_target: f64,
    /// Pinned codebook; generated from `seed` when absent.
    pub codebook_file: Option<PathBuf>,
    pub solver: SolverConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl NetworkConfig {
    /// Full-scale scenario.
    pub fn full() -> Self {
        Self {
            n_mtds: 1000,
            n_embb: 4,
            antennas: 32,
            coherence_len: 256,
            pilot_len: 32,
            q_messages: 2,
            epsilon: 0.01,
            kappa: 4,
            chi: 1e-6,
            p_max_w: 0.1,
            rho_max_w: 0.1,
            noise_w: 2e-13,
            cell_radius_m: 250.0,
            min_radius_m: 35.0,
            bits: 128.0,
            symbol_s: 16e-6,
            seed: 1,
            trials: 1000,
            snr_mtd_db: 5.0,
            snr_embb_db: 25.0,
            pool_cap: 4096,
            shared_pool: false,
            pilots: PilotKind::Hadamard,
            rate_mode: RateMode::Bpcu,
            freeze_placement: false,
            regenerate_codebook: false,
            pfa_target: 1e-3,
            codebook_file: None,
            solver: SolverConfig::default(),
        }
    }

    /// Reduced scenario that runs in minutes on a single core.
    pub fn desk() -> Self {
        Self {
            n_mtds: 200,
            antennas: 16,
            coherence_len: 128,
            trials: 200,
            pool_cap: 512,
            solver: SolverConfig { t_max: 50, ..SolverConfig::default() },
            ..Self::full()
        }
    }

    /// Total number of candidate sequences `N·Q`.
    pub fn n_sequences(&self) -> usize {
        self.n_mtds * self.q_messages
    }

    /// Payload length `T - L`.
    pub fn payload_len(&self) -> usize {
        self.coherence_len - self.pilot_len
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_mtds == 0 {
            return bad("n_mtds must be at least 1".into());
        }
        if self.n_embb >= self.pilot_len {
            return bad(format!("need n_embb ({}) < pilot_len ({})", self.n_embb, self.pilot_len));
        }
        if self.pilot_len >= self.coherence_len {
            return bad(format!("need pilot_len ({}) < coherence_len ({})", self.pilot_len, self.coherence_len));
        }
        if !self.pilot_len.is_power_of_two() {
            return bad(format!("pilot_len {} is not a power of two", self.pilot_len));
        }
        if self.q_messages == 0 {
            return bad("q_messages must be at least 1".into());
        }
        if self.antennas == 0 {
            return bad("antennas must be at least 1".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} outside [0, 1)", self.epsilon));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return bad(format!("chi {} outside (0, 1]", self.chi));
        }
        if self.kappa < 2 {
            return bad("kappa must be at least 2".into());
        }
        for (name, v) in [
            ("p_max_w", self.p_max_w),
            ("rho_max_w", self.rho_max_w),
            ("noise_w", self.noise_w),
            ("cell_radius_m", self.cell_radius_m),
            ("min_radius_m", self.min_radius_m),
            ("bits", self.bits),
            ("symbol_s", self.symbol_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.min_radius_m >= self.cell_radius_m {
            return bad("min_radius_m must be below cell_radius_m".into());
        }
        if !(self.pfa_target > 0.0 && self.pfa_target < 1.0) {
            return bad(format!("pfa_target {} outside (0, 1)", self.pfa_target));
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || s.t_max == 0 || !(s.rho > 0.0) {
            return bad("solver needs tol > 0, t_max >= 1, rho > 0".into());
        }
        if let Some(mu) = s.mu {
            if !(mu > 0.0) {
                return bad("mu must be positive".into());
            }
        }
        if s.k_max == Some(0) {
            return bad("k_max must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines on top of the full-scale defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::full();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: format!("expected key = value, got '{line}'") })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one configuration key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse::<T>().map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(Error::Config(format!("invalid boolean '{v}' for {key}"))),
            }
        }
        match key {
            "n_mtds" => self.n_mtds = num(key, value)?,
            "n_embb" => self.n_embb = num(key, value)?,
            "antennas" => self.antennas = num(key, value)?,
            "coherence_len" => self.coherence_len = num(key, value)?,
            "pilot_len" => self.pilot_len = num(key, value)?,
            "q_messages" => self.q_messages = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "chi" => self.chi = num(key, value)?,
            "p_max_w" => self.p_max_w = num(key, value)?,
            "rho_max_w" => self.rho_max_w = num(key, value)?,
            "noise_w" => self.noise_w = num(key, value)?,
            "cell_radius_m" => self.cell_radius_m = num(key, value)?,
            "min_radius_m" => self.min_radius_m = num(key, value)?,
            "bits" => self.bits = num(key, value)?,
            "symbol_s" => self.symbol_s = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "snr_mtd_db" => self.snr_mtd_db = num(key, value)?,
            "snr_embb_db" => self.snr_embb_db = num(key, value)?,
            "pool_cap" => self.pool_cap = num(key, value)?,
            "shared_pool" => self.shared_pool = flag(key, value)?,
            "freeze_placement" => self.freeze_placement = flag(key, value)?,
            "regenerate_codebook" => self.regenerate_codebook = flag(key, value)?,
            "pfa_target" => self.pfa_target = num(key, value)?,
            "codebook_file" => self.codebook_file = if value.is_empty() || value == "none" { None } else { Some(PathBuf::from(value)) },
            "pilots" => {
                self.pilots = match value.to_ascii_lowercase().as_str() {
                    "hadamard" => PilotKind::Hadamard,
                    "gaussian" => PilotKind::Gaussian,
                    _ => return Err(Error::Config(format!("unknown pilot kind '{value}'"))),
                }
            }
            "rate_mode" => {
                self.rate_mode = match value.to_ascii_lowercase().as_str() {
                    "bpcu" => RateMode::Bpcu,
                    "literal" => RateMode::Literal,
                    _ => return Err(Error::Config(format!("unknown rate mode '{value}'"))),
                }
            }
            "solver" => self.solver.kind = value.parse()?,
            "tol" => self.solver.tol = num(key, value)?,
            "t_max" => self.solver.t_max = num(key, value)?,
            "mu" => self.solver.mu = if value == "auto" { None } else { Some(num(key, value)?) },
            "rho" => self.solver.rho = num(key, value)?,
            "k_max" => self.solver.k_max = if value == "auto" { None } else { Some(num(key, value)?) },
            "se_samples" => self.solver.se_samples = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Renders the configuration in the same `key = value` format `parse` reads.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let s_ = &mut s;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s_, "{k} = {v}");
        };
        put("n_mtds", self.n_mtds.to_string());
        put("n_embb", self.n_embb.to_string());
        put("antennas", self.antennas.to_string());
        put("coherence_len", self.coherence_len.to_string());
        put("pilot_len", self.pilot_len.to_string());
        put("q_messages", self.q_messages.to_string());
        put("epsilon", self.epsilon.to_string());
        put("kappa", self.kappa.to_string());
        put("chi", self.chi.to_string());
        put("p_max_w", self.p_max_w.to_string());
        put("rho_max_w", self.rho_max_w.to_string());
        put("noise_w", self.noise_w.to_string());
        put("cell_radius_m", self.cell_radius_m.to_string());
        put("min_radius_m", self.min_radius_m.to_string());
        put("bits", self.bits.to_string());
        put("symbol_s", self.symbol_s.to_string());
        put("seed", self.seed.to_string());
        put("trials", self.trials.to_string());
        put("snr_mtd_db", self.snr_mtd_db.to_string());
        put("snr_embb_db", self.snr_embb_db.to_string());
        put("pool_cap", self.pool_cap.to_string());
        put("shared_pool", self.shared_pool.to_string());
        put("freeze_placement", self.freeze_placement.to_string());
        put("regenerate_codebook", self.regenerate_codebook.to_string());
        put("pfa_target", self.pfa_target.to_string());
        put("codebook_file", self.codebook_file.as_ref().map_or("none".into(), |p| p.display().to_string()));
        put("pilots", match self.pilots {
            PilotKind::Hadamard => "hadamard".into(),
            PilotKind::Gaussian => "gaussian".into(),
        });
        put("rate_mode", match self.rate_mode {
            RateMode::Bpcu => "bpcu".into(),
            RateMode::Literal => "literal".into(),
        });
        put("solver", self.solver.kind.name().into());
        put("tol", self.solver.tol.to_string());
        put("t_max", self.solver.t_max.to_string());
        put("mu", self.solver.mu.map_or("auto".into(), |m| m.to_string()));
        put("rho", self.solver.rho.to_string());
        put("k_max", self.solver.k_max.map_or("auto".into(), |k| k.to_string()));
        put("se_samples", self.solver.se_samples.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_names_and_overrides_defaults() {
        let text = "# desk\nn_mtds = 200\nantennas=16\ncoherence_len = 128\nsolver = somp\ntol = 1e-5\nmu = 0.5\n";
        let cfg = NetworkConfig::parse(text).unwrap();
        assert_eq!(cfg.n_mtds, 200);
        assert_eq!(cfg.antennas, 16);
        assert_eq!(cfg.coherence_len, 128);
        assert_eq!(cfg.solver.kind, SolverKind::Somp);
        assert_eq!(cfg.solver.tol, 1e-5);
        assert_eq!(cfg.solver.mu, Some(0.5));
        assert_eq!(cfg.pilot_len, 32);
    }

    #[test]
    fn rejects_unknown_keys_with_line_number() {
        let err = NetworkConfig::parse("n_mtds = 10\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn enforces_invariants() {
        for text in ["pilot_len = 24", "n_embb = 32", "epsilon = 1.0", "noise_w = 0", "q_messages = 0", "pilot_len = 512"] {
            assert!(NetworkConfig::parse(text).is_err(), "{text} should be rejected");
        }
    }

    #[test]
    fn config_string_roundtrips() {
        let mut cfg = NetworkConfig::desk();
        cfg.solver.k_max = Some(7);
        cfg.rate_mode = RateMode::Literal;
        let back = NetworkConfig::parse(&cfg.to_config_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
