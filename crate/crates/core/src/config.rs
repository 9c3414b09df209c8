//! Experiment parameterization.
//!
//! A [`ScenarioConfig`] can be read from a plain `key = value` text file and
//! any field can be overridden afterwards by name (the CLI forwards
//! `--key value` pairs to [`ScenarioConfig::set`]).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PathLossModel;
use crate::units::{db_to_linear, dbm_to_watts};

/// How the inter-cell large-scale ratios are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContaminationMode {
    /// Every cross link carries `xi_sq / L` of the serving-link power.
    ExplicitXiSq,
    /// Cross-link ratios follow from a random hexagonal deployment.
    Geometric,
}

impl FromStr for ContaminationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit_xi_sq" | "explicit" => Ok(Self::ExplicitXiSq),
            "geometric" => Ok(Self::Geometric),
            other => Err(Error::config(
                "contamination_mode",
                format!("unknown mode `{other}` (expected explicit_xi_sq | geometric)"),
            )),
        }
    }
}

impl ContaminationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ExplicitXiSq => "explicit_xi_sq",
            Self::Geometric => "geometric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// L, number of neighboring cells around the desired one.
    pub neighbor_cells: usize,
    /// N, users per cell; also the number of RF chains per BS.
    pub users: usize,
    /// M, BS antennas per RF chain.
    pub bs_antennas: usize,
    /// P, antennas per user.
    pub ue_antennas: usize,
    /// E_P in Watts. `None` derives it from the power budget.
    pub pilot_energy: Option<f64>,
    /// E_s in Watts. `None` derives it from the power budget.
    pub symbol_energy: Option<f64>,
    pub max_tx_power_dbm: f64,
    pub bs_antenna_gain_dbi: f64,
    pub varsigma_intra: f64,
    pub varsigma_inter_ul: f64,
    pub varsigma_inter_dl: f64,
    pub n_clusters: usize,
    pub xi_sq: Option<f64>,
    pub contamination_mode: ContaminationMode,
    pub alpha_pl: f64,
    pub varrho_pl: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub temperature_k: f64,
    pub isd_m: f64,
    /// Users closer than this to their BS are re-drawn.
    pub d_min_m: f64,
    /// Distance whose path loss every served user is power-controlled to.
    pub ref_distance_m: f64,
    /// BS receiver noise power; `None` uses thermal noise.
    pub noise_bs_w: Option<f64>,
    /// User receiver noise power; `None` uses thermal noise.
    pub noise_ms_w: Option<f64>,
    /// Std of a Gaussian error added to the cosine of each estimated AoA.
    pub aoa_error_std: f64,
    /// Estimates with a larger condition number are rejected.
    pub cond_limit: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            neighbor_cells: 6,
            users: 10,
            bs_antennas: 128,
            ue_antennas: 10,
            pilot_energy: None,
            symbol_energy: None,
            max_tx_power_dbm: 46.0,
            bs_antenna_gain_dbi: 14.0,
            varsigma_intra: 4.0,
            varsigma_inter_ul: 2.0,
            varsigma_inter_dl: 2.0,
            n_clusters: 8,
            xi_sq: Some(0.01),
            contamination_mode: ContaminationMode::ExplicitXiSq,
            alpha_pl: 1.9,
            varrho_pl: 20.0,
            carrier_hz: 28e9,
            bandwidth_hz: 250e6,
            temperature_k: 300.0,
            isd_m: 200.0,
            d_min_m: 10.0,
            ref_distance_m: 100.0,
            noise_bs_w: None,
            noise_ms_w: None,
            aoa_error_std: 0.0,
            cond_limit: 1e8,
            trials: 500,
            seed: 1,
        }
    }
}

/// Canonical key order used for serialization and fingerprinting.
pub const KEYS: &[&str] = &[
    "neighbor_cells",
    "users",
    "bs_antennas",
    "ue_antennas",
    "pilot_energy",
    "symbol_energy",
    "max_tx_power_dbm",
    "bs_antenna_gain_dbi",
    "varsigma_intra",
    "varsigma_inter_ul",
    "varsigma_inter_dl",
    "n_clusters",
    "xi_sq",
    "contamination_mode",
    "alpha_pl",
    "varrho_pl",
    "carrier_hz",
    "bandwidth_hz",
    "temperature_k",
    "isd_m",
    "d_min_m",
    "ref_distance_m",
    "noise_bs_w",
    "noise_ms_w",
    "aoa_error_std",
    "cond_limit",
    "trials",
    "seed",
];

fn canonical_key(key: &str) -> String {
    let k = key.trim().trim_start_matches("--").replace('-', "_");
    match k.as_str() {
        "L" | "l" => "neighbor_cells".into(),
        "N" | "n" | "n_rf" | "N_RF" => "users".into(),
        "M" | "m" => "bs_antennas".into(),
        "P" | "p" => "ue_antennas".into(),
        "E_P" | "e_p" => "pilot_energy".into(),
        "E_s" | "e_s" => "symbol_energy".into(),
        _ => k.to_ascii_lowercase(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", value.trim())))
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "auto" | "none" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| format!("{x:?}"))
}

impl ScenarioConfig {
    /// Set one field by name. Accepts the short aliases `L`, `N`, `M`, `P`,
    /// `E_P`, `E_s` and `-` in place of `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical_key(key);
        let k = key.as_str();
        match k {
            "neighbor_cells" => self.neighbor_cells = parse(k, value)?,
            "users" => self.users = parse(k, value)?,
            "bs_antennas" => self.bs_antennas = parse(k, value)?,
            "ue_antennas" => self.ue_antennas = parse(k, value)?,
            "pilot_energy" => self.pilot_energy = parse_opt(k, value)?,
            "symbol_energy" => self.symbol_energy = parse_opt(k, value)?,
            "max_tx_power_dbm" => self.max_tx_power_dbm = parse(k, value)?,
            "bs_antenna_gain_dbi" => self.bs_antenna_gain_dbi = parse(k, value)?,
            "varsigma_intra" => self.varsigma_intra = parse(k, value)?,
            "varsigma_inter_ul" => self.varsigma_inter_ul = parse(k, value)?,
            "varsigma_inter_dl" => self.varsigma_inter_dl = parse(k, value)?,
            "varsigma_inter" => {
                self.varsigma_inter_ul = parse(k, value)?;
                self.varsigma_inter_dl = self.varsigma_inter_ul;
            }
            "n_clusters" => self.n_clusters = parse(k, value)?,
            "xi_sq" => self.xi_sq = parse_opt(k, value)?,
            "contamination_mode" => self.contamination_mode = value.parse()?,
            "alpha_pl" => self.alpha_pl = parse(k, value)?,
            "varrho_pl" => self.varrho_pl = parse(k, value)?,
            "carrier_hz" => self.carrier_hz = parse(k, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse(k, value)?,
            "temperature_k" => self.temperature_k = parse(k, value)?,
            "isd_m" => self.isd_m = parse(k, value)?,
            "d_min_m" => self.d_min_m = parse(k, value)?,
            "ref_distance_m" => self.ref_distance_m = parse(k, value)?,
            "noise_bs_w" => self.noise_bs_w = parse_opt(k, value)?,
            "noise_ms_w" => self.noise_ms_w = parse_opt(k, value)?,
            "aoa_error_std" => self.aoa_error_std = parse(k, value)?,
            "cond_limit" => self.cond_limit = parse(k, value)?,
            "trials" => self.trials = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            _ => return Err(Error::config(k, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn is_key(key: &str) -> bool {
        let k = canonical_key(key);
        KEYS.contains(&k.as_str()) || k == "varsigma_inter"
    }

    /// Parse `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match canonical_key(key).as_str() {
            "neighbor_cells" => self.neighbor_cells.to_string(),
            "users" => self.users.to_string(),
            "bs_antennas" => self.bs_antennas.to_string(),
            "ue_antennas" => self.ue_antennas.to_string(),
            "pilot_energy" => fmt_opt(self.pilot_energy),
            "symbol_energy" => fmt_opt(self.symbol_energy),
            "max_tx_power_dbm" => format!("{:?}", self.max_tx_power_dbm),
            "bs_antenna_gain_dbi" => format!("{:?}", self.bs_antenna_gain_dbi),
            "varsigma_intra" => format!("{:?}", self.varsigma_intra),
            "varsigma_inter_ul" => format!("{:?}", self.varsigma_inter_ul),
            "varsigma_inter_dl" => format!("{:?}", self.varsigma_inter_dl),
            "n_clusters" => self.n_clusters.to_string(),
            "xi_sq" => fmt_opt(self.xi_sq),
            "contamination_mode" => self.contamination_mode.as_str().to_string(),
            "alpha_pl" => format!("{:?}", self.alpha_pl),
            "varrho_pl" => format!("{:?}", self.varrho_pl),
            "carrier_hz" => format!("{:?}", self.carrier_hz),
            "bandwidth_hz" => format!("{:?}", self.bandwidth_hz),
            "temperature_k" => format!("{:?}", self.temperature_k),
            "isd_m" => format!("{:?}", self.isd_m),
            "d_min_m" => format!("{:?}", self.d_min_m),
            "ref_distance_m" => format!("{:?}", self.ref_distance_m),
            "noise_bs_w" => fmt_opt(self.noise_bs_w),
            "noise_ms_w" => fmt_opt(self.noise_ms_w),
            "aoa_error_std" => format!("{:?}", self.aoa_error_std),
            "cond_limit" => format!("{:?}", self.cond_limit),
            "trials" => self.trials.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Serialize every field in canonical order; parses back to `self`.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }

    /// Short hex digest of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_kv_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        if self.neighbor_cells < 1 {
            return Err(Error::config("neighbor_cells", "need at least one neighbor cell"));
        }
        if self.users < 1 {
            return Err(Error::config("users", "need at least one user per cell"));
        }
        if self.bs_antennas < self.users {
            return Err(Error::config(
                "bs_antennas",
                format!("M = {} must be at least N = {}", self.bs_antennas, self.users),
            ));
        }
        if self.ue_antennas < 1 {
            return Err(Error::config("ue_antennas", "need at least one antenna"));
        }
        if self.n_clusters < 1 {
            return Err(Error::config("n_clusters", "need at least one cluster"));
        }
        for (key, v) in [
            ("varsigma_intra", self.varsigma_intra),
            ("varsigma_inter_ul", self.varsigma_inter_ul),
            ("varsigma_inter_dl", self.varsigma_inter_dl),
        ] {
            if !(v >= 0.0) {
                return Err(Error::config(key, format!("power ratio must be >= 0, got {v}")));
            }
        }
        if let Some(e) = self.pilot_energy {
            positive("pilot_energy", e)?;
        }
        if let Some(e) = self.symbol_energy {
            positive("symbol_energy", e)?;
        }
        match (self.contamination_mode, self.xi_sq) {
            (ContaminationMode::ExplicitXiSq, None) => {
                return Err(Error::config("xi_sq", "explicit_xi_sq mode needs xi_sq"))
            }
            (_, Some(x)) if !(x >= 0.0) => {
                return Err(Error::config("xi_sq", format!("must be >= 0, got {x}")))
            }
            _ => {}
        }
        positive("carrier_hz", self.carrier_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("temperature_k", self.temperature_k)?;
        positive("isd_m", self.isd_m)?;
        positive("ref_distance_m", self.ref_distance_m)?;
        positive("cond_limit", self.cond_limit)?;
        if !(self.d_min_m >= 0.0) || self.d_min_m >= self.isd_m / 2.0 {
            return Err(Error::config("d_min_m", "must lie in [0, isd/2)"));
        }
        if !(self.aoa_error_std >= 0.0) {
            return Err(Error::config("aoa_error_std", "must be >= 0"));
        }
        if let Some(n) = self.noise_bs_w {
            positive("noise_bs_w", n)?;
        }
        if let Some(n) = self.noise_ms_w {
            positive("noise_ms_w", n)?;
        }
        if self.trials < 1 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        Ok(())
    }

    pub fn path_loss_model(&self) -> PathLossModel {
        PathLossModel {
            alpha: self.alpha_pl,
            varrho: self.varrho_pl,
            carrier_hz: self.carrier_hz,
        }
    }

    /// Total radiated downlink power budget (BS power times antenna gain).
    pub fn power_budget(&self) -> f64 {
        dbm_to_watts(self.max_tx_power_dbm) * db_to_linear(self.bs_antenna_gain_dbi)
    }

    /// E_s: total downlink symbol energy after the unit-power digital precoder.
    pub fn symbol_energy(&self) -> f64 {
        self.symbol_energy.unwrap_or_else(|| self.power_budget())
    }

    /// E_P: each user's share of the budget, spread over the N pilot slots
    /// by its unit-norm pilot sequence.
    pub fn pilot_energy(&self) -> f64 {
        self.pilot_energy
            .unwrap_or_else(|| self.power_budget() / self.users as f64)
    }

    pub fn thermal_noise(&self) -> f64 {
        crate::geometry::noise_power(self.bandwidth_hz, self.temperature_k)
    }

    pub fn noise_bs(&self) -> f64 {
        self.noise_bs_w.unwrap_or_else(|| self.thermal_noise())
    }

    pub fn noise_ms(&self) -> f64 {
        self.noise_ms_w.unwrap_or_else(|| self.thermal_noise())
    }

    /// Common large-scale gain of every served user after long-term power
    /// control.
    pub fn serving_gain(&self) -> f64 {
        self.path_loss_model()
            .gain(self.ref_distance_m)
            .expect("ref_distance_m validated positive")
    }

    pub fn xi_sq_or_zero(&self) -> f64 {
        self.xi_sq.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.set("M", "64").unwrap();
        cfg.set("--xi-sq", "0.2").unwrap();
        cfg.set("pilot_energy", "3.5").unwrap();
        cfg.set("contamination_mode", "geometric").unwrap();
        let back = ScenarioConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.fingerprint(), cfg.fingerprint());
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = ScenarioConfig::from_kv_str("# header\n\nM = 32 # inline\nP=4\n").unwrap();
        assert_eq!(cfg.bs_antennas, 32);
        assert_eq!(cfg.ue_antennas, 4);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ScenarioConfig::from_kv_str("M = 32\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = ScenarioConfig::from_kv_str("M = x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(ScenarioConfig::default().set("nonsense", "1").is_err());
    }

    #[test]
    fn fingerprint_tracks_changes() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn validation_rules() {
        let ok = ScenarioConfig::default();
        ok.validate().unwrap();

        let mut c = ok.clone();
        c.bs_antennas = 4;
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.xi_sq = None;
        assert!(c.validate().is_err());
        c.contamination_mode = ContaminationMode::Geometric;
        c.validate().unwrap();

        let mut c = ok.clone();
        c.varsigma_inter_ul = -1.0;
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.neighbor_cells = 0;
        assert!(c.validate().is_err());

        let mut c = ok;
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn derived_energies() {
        let cfg = ScenarioConfig::default();
        let budget = dbm_to_watts(46.0) * db_to_linear(14.0);
        assert!((cfg.symbol_energy() - budget).abs() < 1e-9);
        assert!((cfg.pilot_energy() - budget / 10.0).abs() < 1e-9);
        assert!((cfg.thermal_noise() - 250e6 * 1.38e-23 * 300.0).abs() < 1e-24);
    }
}
