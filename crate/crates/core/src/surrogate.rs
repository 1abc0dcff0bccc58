//! Concave minorants used by the successive convex approximation.
//!
//! Each bound is built at an expansion point (`F^n`, or `(x^n, y^n)` for the
//! quadratic-over-linear term) and touches the exact function there:
//!
//! * [`PhiCoeffs`]: linearization of the jointly convex `x^2 / y`.
//! * [`Lb1Coeffs`]: first-order bound on the whole log-rate, written as a
//!   constant plus a linear term minus a convex quadratic in `F`.
//! * [`Lb2Coeffs`]: bound on the SINR fraction alone; the outer `ln(1 + .)` is
//!   kept exact by the conic layer.
//! * [`WmmseCoeffs`]: the same rate bound as `Lb1Coeffs`, reached through the
//!   MMSE equalizer and MSE weight. Kept as an independent route for checking.
//!
//! All rates are in nats.

use num_complex::Complex64;

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::model::{common_interference, private_interference, PrecoderSet};
use crate::CVector;

/// A rate term: the private stream of a user, or the common stream as decoded
/// by a given user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Private(usize),
    Common(usize),
}

impl Stream {
    pub fn user(self) -> usize {
        match self {
            Stream::Private(k) | Stream::Common(k) => k,
        }
    }

    /// Column of the precoder matrix carrying this stream.
    pub fn column(self) -> usize {
        match self {
            Stream::Private(k) => k + 1,
            Stream::Common(_) => 0,
        }
    }

    /// Columns whose received power forms the MSE denominator of this stream:
    /// all private columns for a private stream, every column for the common one.
    pub fn mse_columns(self, users: usize) -> std::ops::RangeInclusive<usize> {
        match self {
            Stream::Private(_) => 1..=users,
            Stream::Common(_) => 0..=users,
        }
    }

    /// Columns that act as interference in the SINR of this stream.
    pub fn interference_columns(self, users: usize) -> Vec<usize> {
        match self {
            Stream::Private(k) => (1..=users).filter(|&c| c != k + 1).collect(),
            Stream::Common(_) => (1..=users).collect(),
        }
    }

    /// Exact SINR of this stream.
    pub fn sinr(self, f: &PrecoderSet, s: &Scenario) -> f64 {
        match self {
            Stream::Private(k) => crate::model::private_sinr(f, s, k),
            Stream::Common(k) => crate::model::common_sinr(f, s, k),
        }
    }

    /// Exact rate in nats.
    pub fn rate(self, f: &PrecoderSet, s: &Scenario) -> f64 {
        self.sinr(f, s).ln_1p()
    }

    fn interference_plus_noise(self, f: &PrecoderSet, s: &Scenario) -> f64 {
        match self {
            Stream::Private(k) => private_interference(s, f, k),
            Stream::Common(k) => common_interference(s, f, k),
        }
    }
}

fn h_dot(s: &Scenario, user: usize, f: &PrecoderSet, col: usize) -> Complex64 {
    s.channel(user).dotc(&f.matrix().column(col))
}

/// Linear minorant `phi(x, y) = slope_x * x + slope_y * y` of `x^2 / y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCoeffs {
    pub slope_x: f64,
    pub slope_y: f64,
}

pub fn phi_coeffs(x_n: f64, y_n: f64) -> Result<PhiCoeffs> {
    if !(y_n > 0.0) || !y_n.is_finite() {
        return Err(Error::Domain(format!("phi expansion needs y > 0, got {y_n}")));
    }
    if !(x_n >= 0.0) || !x_n.is_finite() {
        return Err(Error::Domain(format!("phi expansion needs x >= 0, got {x_n}")));
    }
    let ratio = x_n / y_n;
    Ok(PhiCoeffs {
        slope_x: 2.0 * ratio,
        slope_y: -ratio * ratio,
    })
}

impl PhiCoeffs {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.slope_x * x + self.slope_y * y
    }
}

/// Rate minorant `const + 2 Re{a b^H f_s} - a sum_i |b^H f_i|^2`, the sum
/// running over [`Stream::mse_columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct Lb1Coeffs {
    pub stream: Stream,
    pub a: f64,
    pub b: CVector,
    pub constant: f64,
}

pub fn lb1_coeffs(f_n: &PrecoderSet, s: &Scenario, stream: Stream) -> Lb1Coeffs {
    let k = stream.user();
    let h = s.channel(k);
    let signal = h_dot(s, k, f_n, stream.column());
    let r_minus = stream.interference_plus_noise(f_n, s);
    let r_total = r_minus + signal.norm_sqr();
    let a = 1.0 + signal.norm_sqr() / r_minus;
    let b: CVector = h.map(|z| z * (signal / r_total));
    let rate = (signal.norm_sqr() / r_minus).ln_1p();

    let linear = 2.0 * a * b.dotc(&f_n.matrix().column(stream.column())).re;
    let quad: f64 = stream
        .mse_columns(s.users())
        .map(|c| b.dotc(&f_n.matrix().column(c)).norm_sqr())
        .sum();
    Lb1Coeffs {
        stream,
        a,
        b,
        constant: rate - linear + a * quad,
    }
}

pub fn lb1_eval(coeffs: &Lb1Coeffs, f: &PrecoderSet) -> f64 {
    let users = f.users();
    let m = f.matrix();
    let linear = 2.0 * coeffs.a * coeffs.b.dotc(&m.column(coeffs.stream.column())).re;
    let quad: f64 = coeffs
        .stream
        .mse_columns(users)
        .map(|c| coeffs.b.dotc(&m.column(c)).norm_sqr())
        .sum();
    coeffs.constant + linear - coeffs.a * quad
}

/// SINR minorant `Gamma(F) = 2 Re{lin^H f_s} - quad_weight * r(F)`, where
/// `r(F)` is the noise plus the interference seen by the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Lb2Coeffs {
    pub stream: Stream,
    pub lin: CVector,
    pub quad_weight: f64,
    pub channel: CVector,
    pub noise: f64,
}

pub fn lb2_coeffs(f_n: &PrecoderSet, s: &Scenario, stream: Stream) -> Lb2Coeffs {
    let k = stream.user();
    let h = s.channel(k);
    // Both the private and the common forms expand around the stream's own
    // precoder, f_k^n or f_c^n.
    let signal = h_dot(s, k, f_n, stream.column());
    let r_n = stream.interference_plus_noise(f_n, s);
    let ratio = signal / r_n;
    Lb2Coeffs {
        stream,
        lin: h.map(|z| z * ratio),
        quad_weight: ratio.norm_sqr(),
        channel: h.into_owned(),
        noise: s.noise(k),
    }
}

impl Lb2Coeffs {
    /// Noise plus interference at `f` for this stream.
    pub fn interference_plus_noise(&self, f: &PrecoderSet) -> f64 {
        let m = f.matrix();
        self.noise
            + self
                .stream
                .interference_columns(f.users())
                .into_iter()
                .map(|c| self.channel.dotc(&m.column(c)).norm_sqr())
                .sum::<f64>()
    }
}

pub fn lb2_eval(coeffs: &Lb2Coeffs, f: &PrecoderSet) -> f64 {
    let linear = 2.0 * coeffs.lin.dotc(&f.matrix().column(coeffs.stream.column())).re;
    linear - coeffs.quad_weight * coeffs.interference_plus_noise(f)
}

/// MMSE equalizer, MSE and constant of the WMMSE rate bound.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseCoeffs {
    pub stream: Stream,
    pub equalizer: Complex64,
    /// MSE at the expansion point, in `(0, 1]`.
    pub mse: f64,
    pub constant: f64,
    pub channel: CVector,
    pub noise: f64,
}

pub fn wmmse_coeffs(f_n: &PrecoderSet, s: &Scenario, stream: Stream) -> WmmseCoeffs {
    let k = stream.user();
    let signal = h_dot(s, k, f_n, stream.column());
    let noise = s.noise(k);
    let r_total = stream.interference_plus_noise(f_n, s) + signal.norm_sqr();
    let equalizer = signal / r_total;
    let mse = 1.0 - signal.norm_sqr() / r_total;
    let constant = -mse.ln() + 1.0 - noise * equalizer.norm_sqr() / mse - 1.0 / mse;
    WmmseCoeffs {
        stream,
        equalizer,
        mse,
        constant,
        channel: s.channel(k).into_owned(),
        noise,
    }
}

impl WmmseCoeffs {
    /// MSE weight `1 / q`; plays the role of `a` in [`Lb1Coeffs`].
    pub fn weight(&self) -> f64 {
        1.0 / self.mse
    }

    /// `h * w`; plays the role of `b` in [`Lb1Coeffs`].
    pub fn direction(&self) -> CVector {
        self.channel.map(|z| z * self.equalizer)
    }
}

/// Evaluates `const + 1 - e(F)/q` written with the equalizer: the MSE
/// `e = r |w|^2 - 2 Re{w^* h^H f_s} + 1` divided by the MSE weight.
pub fn wmmse_eval(coeffs: &WmmseCoeffs, f: &PrecoderSet) -> f64 {
    let m = f.matrix();
    let w = coeffs.equalizer;
    let cross = (w.conj() * coeffs.channel.dotc(&m.column(coeffs.stream.column()))).re;
    let received: f64 = coeffs
        .stream
        .mse_columns(f.users())
        .map(|c| coeffs.channel.dotc(&m.column(c)).norm_sqr())
        .sum();
    coeffs.constant + 2.0 * cross / coeffs.mse - received * w.norm_sqr() / coeffs.mse
}
