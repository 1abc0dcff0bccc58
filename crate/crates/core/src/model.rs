//! Exact rate, power and efficiency evaluation for rate-split precoders.
//!
//! Rates are returned in nats/s/Hz; only [`sum_se`] and the efficiency
//! metrics convert to bits. The rate-dependent circuit term `chi` multiplies
//! the bit-unit spectral efficiency.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::CMatrix;

/// The precoder family `[f_c, f_1, ..., f_K]` stored as an `Nt x (K+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    f: CMatrix,
}

impl PrecoderSet {
    pub fn new(f: CMatrix) -> Result<Self> {
        if f.ncols() < 2 || f.nrows() == 0 {
            return Err(Error::invalid(
                "precoder set needs one common and at least one private column",
            ));
        }
        if f.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("precoder entries must be finite"));
        }
        Ok(Self { f })
    }

    pub fn zeros(nt: usize, users: usize) -> Self {
        Self {
            f: DMatrix::zeros(nt, users + 1),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.f
    }

    pub fn into_matrix(self) -> CMatrix {
        self.f
    }

    pub fn nt(&self) -> usize {
        self.f.nrows()
    }

    pub fn users(&self) -> usize {
        self.f.ncols() - 1
    }

    pub fn common(&self) -> nalgebra::DVectorView<'_, Complex64> {
        self.f.column(0)
    }

    /// Private precoder of user `k` (0-based).
    pub fn private(&self, k: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.f.column(k + 1)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.f.norm_squared()
    }

    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.frobenius_sq() <= p_max + FEASIBILITY_SLACK
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            f: self.f.map(|z| z * alpha),
        }
    }

    fn check(&self, s: &Scenario) -> Result<()> {
        if self.nt() != s.nt() || self.users() != s.users() {
            return Err(Error::Contract(format!(
                "precoder is {}x{} but scenario has Nt={} K={}",
                self.nt(),
                self.f.ncols(),
                s.nt(),
                s.users()
            )));
        }
        Ok(())
    }
}

pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Received signal power `|h_k^H f_col|^2`.
pub(crate) fn received_power(s: &Scenario, f: &PrecoderSet, user: usize, col: usize) -> f64 {
    s.channel(user).dotc(&f.matrix().column(col)).norm_sqr()
}

/// `sigma_k^2 + sum_{i != k} |h_k^H f_i|^2`, private streams only.
pub(crate) fn private_interference(s: &Scenario, f: &PrecoderSet, user: usize) -> f64 {
    let mut acc = s.noise(user);
    for i in 0..s.users() {
        if i != user {
            acc += received_power(s, f, user, i + 1);
        }
    }
    acc
}

/// `sigma_k^2 + sum_{i in K} |h_k^H f_i|^2`: every private stream interferes
/// with the common stream.
pub(crate) fn common_interference(s: &Scenario, f: &PrecoderSet, user: usize) -> f64 {
    private_interference(s, f, user) + received_power(s, f, user, user + 1)
}

/// Private-stream SINR at user `k`.
pub fn private_sinr(f: &PrecoderSet, s: &Scenario, k: usize) -> f64 {
    received_power(s, f, k, k + 1) / private_interference(s, f, k)
}

/// Common-stream SINR at user `k` before SIC.
pub fn common_sinr(f: &PrecoderSet, s: &Scenario, k: usize) -> f64 {
    received_power(s, f, k, 0) / common_interference(s, f, k)
}

/// Private rate of user `k` in nats/s/Hz. The common stream has already been
/// removed by SIC, so only the other private streams interfere.
pub fn private_rate(f: &PrecoderSet, s: &Scenario, k: usize) -> f64 {
    private_sinr(f, s, k).ln_1p()
}

/// Rate at which user `k` can decode the common stream, nats/s/Hz.
pub fn common_rate_at_user(f: &PrecoderSet, s: &Scenario, k: usize) -> f64 {
    common_sinr(f, s, k).ln_1p()
}

/// Sum spectral efficiency in bit/s/Hz.
pub fn sum_se(f: &PrecoderSet, s: &Scenario) -> f64 {
    let k = s.users();
    let common = (0..k)
        .map(|u| common_rate_at_user(f, s, u))
        .fold(f64::INFINITY, f64::min);
    let private: f64 = (0..k).map(|u| private_rate(f, s, u)).sum();
    (common + private) / LN_2
}

/// Total consumed power `||F||_F^2 + P_c + chi * SE`.
pub fn total_power(f: &PrecoderSet, s: &Scenario, se_bits: f64) -> Result<f64> {
    if se_bits < 0.0 || se_bits.is_nan() {
        return Err(Error::Contract(format!(
            "spectral efficiency must be non-negative, got {se_bits}"
        )));
    }
    Ok(f.frobenius_sq() + s.p_circuit() + s.chi() * se_bits)
}

/// Energy efficiency in (bit/s/Hz)/W.
pub fn energy_efficiency(f: &PrecoderSet, s: &Scenario) -> f64 {
    let se = sum_se(f, s);
    se / (f.frobenius_sq() + s.p_circuit() + s.chi() * se)
}

/// How the two objectives are collapsed into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    /// `w * EE + (1 - w) * SE / P_c`.
    WeightedSum,
    /// `SE / (w (||F||^2 + chi SE) + P_c)`.
    WeightedPower,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::WeightedSum => "weighted_sum",
            Approach::WeightedPower => "weighted_power",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "weighted_sum" | "ws" => Ok(Approach::WeightedSum),
            "weighted_power" | "wp" => Ok(Approach::WeightedPower),
            other => Err(Error::Parse(format!("unknown approach {other:?}"))),
        }
    }
}

pub(crate) fn check_weight(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid(format!("weight w={w} outside [0, 1]")));
    }
    Ok(())
}

/// Scalarized tradeoff objective. `normalization` is the constant dividing SE
/// in the weighted-sum form; `None` uses the circuit power.
pub fn scalarized_objective_with(
    approach: Approach,
    w: f64,
    f: &PrecoderSet,
    s: &Scenario,
    normalization: Option<f64>,
) -> Result<f64> {
    check_weight(w)?;
    let se = sum_se(f, s);
    let value = match approach {
        Approach::WeightedSum => {
            let norm = normalization.unwrap_or_else(|| s.p_circuit());
            let ee = se / total_power(f, s, se)?;
            w * ee + (1.0 - w) * se / norm
        }
        Approach::WeightedPower => {
            se / (w * (f.frobenius_sq() + s.chi() * se) + s.p_circuit())
        }
    };
    Ok(value)
}

pub fn scalarized_objective(approach: Approach, w: f64, f: &PrecoderSet, s: &Scenario) -> Result<f64> {
    scalarized_objective_with(approach, w, f, s, None)
}

/// Every rate and power figure for one precoder set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub private_nats: Vec<f64>,
    pub common_per_user_nats: Vec<f64>,
    pub common_nats: f64,
    pub sum_se_bits: f64,
    pub transmit_power_w: f64,
    pub total_power_w: f64,
    pub ee: f64,
}

impl RateReport {
    pub fn evaluate(f: &PrecoderSet, s: &Scenario) -> Result<Self> {
        f.check(s)?;
        let k = s.users();
        let private_nats: Vec<f64> = (0..k).map(|u| private_rate(f, s, u)).collect();
        let common_per_user_nats: Vec<f64> =
            (0..k).map(|u| common_rate_at_user(f, s, u)).collect();
        let common_nats = common_per_user_nats
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let sum_se_bits = (common_nats + private_nats.iter().sum::<f64>()) / LN_2;
        let total_power_w = total_power(f, s, sum_se_bits)?;
        Ok(Self {
            private_nats,
            common_per_user_nats,
            common_nats,
            sum_se_bits,
            transmit_power_w: f.frobenius_sq(),
            total_power_w,
            ee: sum_se_bits / total_power_w,
        })
    }

    /// Rate vector `[r_c, r_1, ..., r_K]` in nats.
    pub fn rate_vector(&self) -> Vec<f64> {
        std::iter::once(self.common_nats)
            .chain(self.private_nats.iter().copied())
            .collect()
    }
}
