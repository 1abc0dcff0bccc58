use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{
    dbm_to_watts, dbw_to_watts, geometric_channels, parse_angle, random_cscg_channels,
    snr_db_to_pmax, GeometricChannelConfig, Scenario, DEFAULT_SPACING_OVER_WAVELENGTH,
};
use crate::error::{Error, Result};
use crate::model::Approach;
use crate::optimizer::{Method, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Geometric,
    Cscg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ChannelKind,
    #[serde(default = "default_nt")]
    pub nt: usize,
    /// User count for random channels; geometric channels take it from `angles`.
    #[serde(default)]
    pub users: Option<usize>,
    /// Angles of departure, radians or multiples of pi such as `"pi/9"`.
    #[serde(default)]
    pub angles: Vec<String>,
    #[serde(default)]
    pub gains: Vec<f64>,
    #[serde(default = "default_spacing")]
    pub spacing_over_wavelength: f64,
    /// Noise power per user in dBW. Exclusive with `noise_dbm`.
    #[serde(default)]
    pub noise_dbw: Option<f64>,
    #[serde(default)]
    pub noise_dbm: Option<f64>,
    #[serde(default = "default_circuit_dbw")]
    pub circuit_dbw: f64,
    #[serde(default = "default_chi")]
    pub chi: f64,
}

fn default_nt() -> usize {
    4
}
fn default_spacing() -> f64 {
    DEFAULT_SPACING_OVER_WAVELENGTH
}
fn default_circuit_dbw() -> f64 {
    5.0
}
fn default_chi() -> f64 {
    0.1
}

pub const DEFAULT_NOISE_DBW: f64 = -20.0;

impl ScenarioConfig {
    pub fn geometric(nt: usize, angles: &[&str]) -> Self {
        Self {
            kind: ChannelKind::Geometric,
            nt,
            users: None,
            angles: angles.iter().map(|a| a.to_string()).collect(),
            gains: Vec::new(),
            spacing_over_wavelength: DEFAULT_SPACING_OVER_WAVELENGTH,
            noise_dbw: None,
            noise_dbm: None,
            circuit_dbw: default_circuit_dbw(),
            chi: default_chi(),
        }
    }

    pub fn cscg(nt: usize, users: usize) -> Self {
        Self {
            kind: ChannelKind::Cscg,
            users: Some(users),
            angles: Vec::new(),
            ..Self::geometric(nt, &[])
        }
    }

    pub fn noise_watts(&self) -> Result<f64> {
        match (self.noise_dbw, self.noise_dbm) {
            (Some(_), Some(_)) => Err(Error::invalid("give noise_dbw or noise_dbm, not both")),
            (Some(dbw), None) => Ok(dbw_to_watts(dbw)),
            (None, Some(dbm)) => Ok(dbm_to_watts(dbm)),
            (None, None) => Ok(dbw_to_watts(DEFAULT_NOISE_DBW)),
        }
    }

    pub fn users(&self) -> Result<usize> {
        match self.kind {
            ChannelKind::Geometric => Ok(self.angles.len()),
            ChannelKind::Cscg => self
                .users
                .ok_or_else(|| Error::invalid("random channels need `users`")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 {
            return Err(Error::invalid("nt must be at least 1"));
        }
        if self.users()? == 0 {
            return Err(Error::invalid("scenario needs at least one user"));
        }
        if self.kind == ChannelKind::Geometric {
            for a in &self.angles {
                parse_angle(a)?;
            }
            if !self.gains.is_empty() && self.gains.len() != self.angles.len() {
                return Err(Error::invalid("gains and angles differ in length"));
            }
        }
        if !(self.chi >= 0.0) {
            return Err(Error::invalid("chi must be non-negative"));
        }
        self.noise_watts()?;
        Ok(())
    }

    /// Channel matrix for one trial. Geometric channels ignore the seed.
    pub fn channels(&self, seed: u64) -> Result<crate::CMatrix> {
        match self.kind {
            ChannelKind::Geometric => {
                let angles = self
                    .angles
                    .iter()
                    .map(|a| parse_angle(a))
                    .collect::<Result<Vec<_>>>()?;
                let gains = if self.gains.is_empty() {
                    vec![1.0; angles.len()]
                } else {
                    self.gains.clone()
                };
                geometric_channels(&GeometricChannelConfig {
                    nt: self.nt,
                    angles,
                    gains,
                    spacing_over_wavelength: self.spacing_over_wavelength,
                })
            }
            ChannelKind::Cscg => random_cscg_channels(self.nt, self.users()?, seed),
        }
    }

    pub fn scenario(&self, snr_db: f64, chi: f64, seed: u64) -> Result<Scenario> {
        let sigma2 = self.noise_watts()?;
        Scenario::uniform_noise(
            self.channels(seed)?,
            sigma2,
            snr_db_to_pmax(snr_db, sigma2),
            dbw_to_watts(self.circuit_dbw),
            chi,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_w_grid")]
    pub w: Vec<f64>,
    /// Rate-dependent power slopes to sweep; empty means the scenario value.
    #[serde(default)]
    pub chi: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_approaches")]
    pub approaches: Vec<Approach>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub solver_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = RunOptions::default();
        Self {
            tol: o.tol,
            max_iters: o.max_iters,
            solver_tol: o.solver_tol,
        }
    }
}

impl SolverConfig {
    pub fn run_options(&self, record_trace: bool) -> RunOptions {
        RunOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            record_trace,
            timer: true,
            solver_tol: self.solver_tol,
        }
    }
}

fn default_snr() -> Vec<f64> {
    vec![20.0]
}

/// `0, 0.1, ..., 1.0`.
pub fn default_w_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// `0, 5, ..., 40` dB.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

fn default_methods() -> Vec<Method> {
    vec![Method::RsGcp, Method::NoRsGcp]
}
fn default_approaches() -> Vec<Approach> {
    vec![Approach::WeightedSum]
}
fn default_trials() -> usize {
    50
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self {
            scenario,
            snr_db: default_snr(),
            w: default_w_grid(),
            chi: Vec::new(),
            methods: default_methods(),
            approaches: default_approaches(),
            trials: default_trials(),
            seed: 0,
            solver: SolverConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The chi values to sweep.
    pub fn chi_grid(&self) -> Vec<f64> {
        if self.chi.is_empty() {
            vec![self.scenario.chi]
        } else {
            self.chi.clone()
        }
    }

    /// Random channels get `trials` draws; a geometric channel is a single instance.
    pub fn effective_trials(&self) -> usize {
        match self.scenario.kind {
            ChannelKind::Geometric => 1,
            ChannelKind::Cscg => self.trials,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.snr_db.is_empty() || self.w.is_empty() || self.methods.is_empty() || self.approaches.is_empty() {
            return Err(Error::invalid("snr, w, method and approach grids must be non-empty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.seed > MAX_SEED {
            return Err(Error::invalid(format!("seed must not exceed {MAX_SEED}")));
        }
        if let Some(w) = self.w.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("weight {w} outside [0, 1]")));
        }
        if self.chi.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::invalid("chi values must be non-negative"));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr values must be finite"));
        }
        self.solver.run_options(false).validate()
    }
}

/// Largest seed; seeds stay representable as TOML integers.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// SplitMix64 finalizer over the master seed and the given parts, masked to [`MAX_SEED`].
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut z = master;
    for &p in parts.iter().chain(std::iter::once(&(parts.len() as u64))) {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z & MAX_SEED
}
