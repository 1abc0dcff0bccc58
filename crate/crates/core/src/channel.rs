//! Channel generation and unit conversion.
//!
//! Two channel families are supported: the deterministic uniform-linear-array
//! geometric model, where each user is described by an angle of departure and
//! a gain, and i.i.d. circularly-symmetric complex Gaussian (CSCG) channels for
//! Monte Carlo runs. All powers are carried in linear watts.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::CMatrix;

/// One problem instance: channels, noise, power budget and circuit-power constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    channels: CMatrix,
    noise: Vec<f64>,
    p_max: f64,
    p_circuit: f64,
    chi: f64,
    pub labels: BTreeMap<String, String>,
}

impl Scenario {
    /// `channels` is `Nt x K` with column `k` holding `h_k`. `noise` holds one
    /// noise power per user (W). `chi` is in W per bit/s/Hz.
    pub fn new(
        channels: CMatrix,
        noise: Vec<f64>,
        p_max: f64,
        p_circuit: f64,
        chi: f64,
    ) -> Result<Self> {
        if channels.nrows() == 0 || channels.ncols() == 0 {
            return Err(Error::invalid("scenario needs Nt >= 1 and K >= 1"));
        }
        if noise.len() != channels.ncols() {
            return Err(Error::invalid(format!(
                "{} noise powers for {} users",
                noise.len(),
                channels.ncols()
            )));
        }
        if noise.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise powers must be positive"));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::invalid("p_max must be positive"));
        }
        if !(p_circuit > 0.0 && p_circuit.is_finite()) {
            return Err(Error::invalid("circuit power must be positive"));
        }
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(Error::invalid("chi must be non-negative"));
        }
        if channels.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Err(Error::invalid("channel entries must be finite"));
        }
        Ok(Self {
            channels,
            noise,
            p_max,
            p_circuit,
            chi,
            labels: BTreeMap::new(),
        })
    }

    /// Same noise power at every user.
    pub fn uniform_noise(
        channels: CMatrix,
        noise: f64,
        p_max: f64,
        p_circuit: f64,
        chi: f64,
    ) -> Result<Self> {
        let k = channels.ncols();
        Self::new(channels, vec![noise; k], p_max, p_circuit, chi)
    }

    pub fn with_label(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.labels.insert(key.into(), value.into());
        self
    }

    pub fn with_chi(&self, chi: f64) -> Result<Self> {
        let mut s = Self::new(
            self.channels.clone(),
            self.noise.clone(),
            self.p_max,
            self.p_circuit,
            chi,
        )?;
        s.labels = self.labels.clone();
        Ok(s)
    }

    pub fn with_p_max(&self, p_max: f64) -> Result<Self> {
        let mut s = Self::new(
            self.channels.clone(),
            self.noise.clone(),
            p_max,
            self.p_circuit,
            self.chi,
        )?;
        s.labels = self.labels.clone();
        Ok(s)
    }

    /// Number of transmit antennas.
    pub fn nt(&self) -> usize {
        self.channels.nrows()
    }

    /// Number of users.
    pub fn users(&self) -> usize {
        self.channels.ncols()
    }

    pub fn channels(&self) -> &CMatrix {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.channels.column(k)
    }

    pub fn noise(&self, k: usize) -> f64 {
        self.noise[k]
    }

    pub fn noise_powers(&self) -> &[f64] {
        &self.noise
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn p_circuit(&self) -> f64 {
        self.p_circuit
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }
}

/// Geometric (uniform linear array) channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricChannelConfig {
    pub nt: usize,
    /// Angle of departure per user, radians.
    pub angles: Vec<f64>,
    /// Channel gain per user.
    pub gains: Vec<f64>,
    /// Antenna spacing over carrier wavelength.
    pub spacing_over_wavelength: f64,
}

impl GeometricChannelConfig {
    /// Unit gains and half-wavelength spacing.
    pub fn unit_gains(nt: usize, angles: Vec<f64>) -> Self {
        let gains = vec![1.0; angles.len()];
        Self {
            nt,
            angles,
            gains,
            spacing_over_wavelength: DEFAULT_SPACING_OVER_WAVELENGTH,
        }
    }
}

pub const DEFAULT_SPACING_OVER_WAVELENGTH: f64 = 0.5;

/// Builds the `Nt x K` geometric channel matrix.
///
/// Column `k` is `nu_k * [1, e^{j 2 pi (d/lambda) cos(theta_k)}, ..., e^{j 2 pi (d/lambda) (Nt-1) cos(theta_k)}]^T`.
pub fn geometric_channels(cfg: &GeometricChannelConfig) -> Result<CMatrix> {
    let k = cfg.angles.len();
    if cfg.nt == 0 || k == 0 {
        return Err(Error::invalid("geometric channel needs Nt >= 1 and K >= 1"));
    }
    if cfg.gains.len() != k {
        return Err(Error::invalid(format!(
            "{} angles but {} gains",
            k,
            cfg.gains.len()
        )));
    }
    if !(cfg.spacing_over_wavelength > 0.0) {
        return Err(Error::invalid("antenna spacing must be positive"));
    }
    Ok(DMatrix::from_fn(cfg.nt, k, |n, user| {
        let phase = 2.0 * PI * cfg.spacing_over_wavelength * n as f64 * cfg.angles[user].cos();
        Complex64::from_polar(cfg.gains[user], phase)
    }))
}

/// Deterministic i.i.d. CSCG channels with unit variance per entry.
pub fn random_cscg_channels(nt: usize, k: usize, seed: u64) -> Result<CMatrix> {
    if nt == 0 || k == 0 {
        return Err(Error::invalid("random channel needs Nt >= 1 and K >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill keeps the draw order stable across shapes
    let mut m = DMatrix::zeros(nt, k);
    for user in 0..k {
        for n in 0..nt {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            m[(n, user)] = Complex64::new(re * scale, im * scale);
        }
    }
    Ok(m)
}

pub fn snr_db_to_pmax(snr_db: f64, sigma2: f64) -> f64 {
    sigma2 * 10f64.powf(snr_db / 10.0)
}

pub fn pmax_to_snr_db(p_max: f64, sigma2: f64) -> f64 {
    10.0 * (p_max / sigma2).log10()
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Parses an angle written either as a plain number of radians or as a
/// multiple of pi: `pi/9`, `2pi/9`, `2*pi/9`, `-pi/6`, `0.5pi`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    let bad = || Error::Parse(format!("cannot parse angle {text:?}"));
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coeff = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let value = if tail.is_empty() {
        coeff * PI
    } else if let Some(d) = tail.strip_prefix('/') {
        let d: f64 = d.parse().map_err(|_| bad())?;
        if d == 0.0 {
            return Err(bad());
        }
        coeff * PI / d
    } else if let Some(m) = tail.strip_prefix('*') {
        coeff * PI * m.parse::<f64>().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn broadside_zero_angle_alternates() {
        let cfg = GeometricChannelConfig::unit_gains(4, vec![0.0]);
        let h = geometric_channels(&cfg).unwrap();
        for (n, expected) in [1.0, -1.0, 1.0, -1.0].iter().enumerate() {
            assert_abs_diff_eq!(h[(n, 0)].re, *expected, epsilon = 1e-12);
            assert_abs_diff_eq!(h[(n, 0)].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn endfire_half_pi_is_all_ones() {
        let cfg = GeometricChannelConfig::unit_gains(5, vec![PI / 2.0]);
        let h = geometric_channels(&cfg).unwrap();
        for n in 0..5 {
            assert_abs_diff_eq!(h[(n, 0)].re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(h[(n, 0)].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cross_correlation_matches_direct_sum() {
        let cfg = GeometricChannelConfig::unit_gains(4, vec![0.0, PI / 9.0]);
        let h = geometric_channels(&cfg).unwrap();
        // oracle: sum_n exp(-j pi n cos 0) exp(j pi n cos(pi/9))
        let mut re = 0.0;
        let mut im = 0.0;
        for n in 0..4 {
            let phase = PI * n as f64 * ((PI / 9.0).cos() - 1.0);
            re += phase.cos();
            im += phase.sin();
        }
        let oracle = (re * re + im * im).sqrt();
        let inner = h.column(0).dotc(&h.column(1)).norm();
        assert_abs_diff_eq!(inner, oracle, epsilon = 1e-12);
    }

    #[test]
    fn geometric_rejects_empty_and_mismatch() {
        let empty = GeometricChannelConfig::unit_gains(4, vec![]);
        assert!(geometric_channels(&empty).is_err());
        let no_antennas = GeometricChannelConfig::unit_gains(0, vec![0.1]);
        assert!(geometric_channels(&no_antennas).is_err());
        let mut mismatch = GeometricChannelConfig::unit_gains(2, vec![0.1, 0.2]);
        mismatch.gains.pop();
        assert!(geometric_channels(&mismatch).is_err());
    }

    #[test]
    fn constant_modulus_and_conjugate_symmetry() {
        let cfg = GeometricChannelConfig {
            nt: 6,
            angles: vec![0.3, -0.3],
            gains: vec![0.7, 0.7],
            spacing_over_wavelength: 0.37,
        };
        let h = geometric_channels(&cfg).unwrap();
        for n in 0..6 {
            assert_abs_diff_eq!(h[(n, 0)].norm(), 0.7, epsilon = 1e-12);
            // cos is even, so theta and -theta give the same column
            assert_eq!(h[(n, 0)], h[(n, 1)]);
        }
    }

    #[test]
    fn cscg_is_deterministic() {
        let a = random_cscg_channels(4, 3, 99).unwrap();
        let b = random_cscg_channels(4, 3, 99).unwrap();
        let c = random_cscg_channels(4, 3, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cscg_second_moment_and_independence() {
        let n = 100_000;
        let h = random_cscg_channels(2, n / 2, 7).unwrap();
        let power: f64 = h.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        assert!((power - 1.0).abs() < 0.02, "mean power {power}");

        let pairs = random_cscg_channels(2, n, 8).unwrap();
        let mut corr = Complex64::new(0.0, 0.0);
        for col in 0..n {
            corr += pairs[(0, col)] * pairs[(1, col)].conj();
        }
        corr /= n as f64;
        assert!(corr.norm() < 0.02, "cross correlation {corr}");
    }

    #[test]
    fn snr_conversion() {
        assert_abs_diff_eq!(snr_db_to_pmax(20.0, 0.01), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(snr_db_to_pmax(0.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(snr_db_to_pmax(25.0, 0.01), 3.1623, epsilon = 1e-4);
        for s in [-10.0, 0.0, 7.5, 25.0, 40.0] {
            let p = snr_db_to_pmax(s, 0.01);
            assert_abs_diff_eq!(pmax_to_snr_db(p, 0.01), s, epsilon = 1e-12);
        }
    }

    #[test]
    fn decibel_units() {
        assert_abs_diff_eq!(dbw_to_watts(5.0), 3.1622776601683795, epsilon = 1e-12);
        assert_abs_diff_eq!(dbm_to_watts(-20.0), 1e-5, epsilon = 1e-18);
        assert_abs_diff_eq!(dbw_to_watts(-20.0), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn angle_parsing() {
        assert_abs_diff_eq!(parse_angle("pi/9").unwrap(), PI / 9.0);
        assert_abs_diff_eq!(parse_angle("2pi/9").unwrap(), 2.0 * PI / 9.0);
        assert_abs_diff_eq!(parse_angle("2*pi/9").unwrap(), 2.0 * PI / 9.0);
        assert_abs_diff_eq!(parse_angle(" -pi / 6 ").unwrap(), -PI / 6.0);
        assert_abs_diff_eq!(parse_angle("PI").unwrap(), PI);
        assert_abs_diff_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert_abs_diff_eq!(parse_angle("0").unwrap(), 0.0);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("tau").is_err());
    }

    #[test]
    fn scenario_invariants() {
        let h = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(Scenario::uniform_noise(h.clone(), 0.01, 1.0, 3.0, 0.1).is_ok());
        assert!(Scenario::uniform_noise(h.clone(), 0.0, 1.0, 3.0, 0.1).is_err());
        assert!(Scenario::uniform_noise(h.clone(), 0.01, 0.0, 3.0, 0.1).is_err());
        assert!(Scenario::uniform_noise(h.clone(), 0.01, 1.0, 0.0, 0.1).is_err());
        assert!(Scenario::uniform_noise(h.clone(), 0.01, 1.0, 3.0, -0.1).is_err());
        assert!(Scenario::new(h, vec![0.01], 1.0, 3.0, 0.1).is_err());
    }
}
