#![allow(dead_code)]

use std::f64::consts::PI;

use rsma::channel::{geometric_channels, random_cscg_channels, GeometricChannelConfig, Scenario};
use rsma::harness::derive_seed;

pub const SIGMA2: f64 = 0.01;
pub const CHI: f64 = 0.1;

pub fn p_circuit() -> f64 {
    10f64.powf(0.5)
}

pub fn geometric(angles: &[f64], snr_db: f64) -> Scenario {
    let h = geometric_channels(&GeometricChannelConfig::unit_gains(4, angles.to_vec())).unwrap();
    Scenario::uniform_noise(h, SIGMA2, SIGMA2 * 10f64.powf(snr_db / 10.0), p_circuit(), CHI).unwrap()
}

pub fn two_user(snr_db: f64) -> Scenario {
    geometric(&[0.0, PI / 9.0], snr_db)
}

pub fn three_user(snr_db: f64) -> Scenario {
    geometric(&[0.0, PI / 9.0, 2.0 * PI / 9.0], snr_db)
}

/// Random CSCG scenario `i` of a fixed family: Nt = 4, K cycling through
/// 2..=4, SNR 20 dB.
pub fn random_scenario(i: usize) -> Scenario {
    random_scenario_at(i, 20.0)
}

pub fn random_scenario_at(i: usize, snr_db: f64) -> Scenario {
    let users = 2 + i % 3;
    let h = random_cscg_channels(4, users, derive_seed(2024, &[i as u64])).unwrap();
    Scenario::uniform_noise(h, SIGMA2, SIGMA2 * 10f64.powf(snr_db / 10.0), p_circuit(), CHI).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi.abs().max(f64::MIN_POSITIVE)
}

pub mod probes {
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use rsma::channel::Scenario;
    use rsma::model::PrecoderSet;
    use rsma::surrogate::{
        lb1_coeffs, lb1_eval, lb2_coeffs, lb2_eval, phi_coeffs, Stream,
    };
    use rsma::CMatrix;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Gaussian precoder rescaled to the given Frobenius power.
    pub fn random_precoder(rng: &mut ChaCha8Rng, nt: usize, users: usize, power: f64) -> PrecoderSet {
        let m = CMatrix::from_fn(nt, users + 1, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm = m.norm_squared();
        PrecoderSet::new(m * Complex64::from((power / norm).sqrt())).unwrap()
    }

    fn perturbed(f: &PrecoderSet, coord: usize, delta: f64) -> PrecoderSet {
        let mut m = f.matrix().clone();
        let (nt, entry) = (m.nrows(), coord / 2);
        let z = &mut m[(entry % nt, entry / nt)];
        if coord % 2 == 0 {
            z.re += delta;
        } else {
            z.im += delta;
        }
        PrecoderSet::new(m).unwrap()
    }

    /// Central-difference gradient over the real and imaginary parts of
    /// every precoder entry.
    pub fn fd_gradient(g: impl Fn(&PrecoderSet) -> f64, at: &PrecoderSet, h: f64) -> Vec<f64> {
        (0..2 * at.matrix().len())
            .map(|c| (g(&perturbed(at, c, h)) - g(&perturbed(at, c, -h))) / (2.0 * h))
            .collect()
    }

    pub fn streams(users: usize) -> Vec<Stream> {
        (0..users)
            .map(Stream::Private)
            .chain((0..users).map(Stream::Common))
            .collect()
    }

    /// Worst figures of one bound over a set of expansion and sample points.
    #[derive(Debug, Default, Clone, Copy)]
    pub struct Report {
        pub tangency: f64,
        pub violations: usize,
        pub gradient: f64,
        pub samples: usize,
    }

    impl Report {
        fn merge(&mut self, tangency: f64, gradient: f64) {
            self.tangency = self.tangency.max(tangency);
            self.gradient = self.gradient.max(gradient);
        }
    }

    /// Rounding allowance when comparing a bound against the exact value.
    pub fn rounding(exact: f64) -> f64 {
        1e-12 * (1.0 + exact.abs())
    }

    fn grad_gap(a: &[f64], b: &[f64]) -> f64 {
        let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    fn sample_points(rng: &mut ChaCha8Rng, s: &Scenario, f_n: &PrecoderSet, count: usize) -> Vec<PrecoderSet> {
        (0..count)
            .map(|i| {
                if i % 2 == 0 {
                    let power = s.p_max() * 2.0 * rng.gen::<f64>();
                    random_precoder(rng, s.nt(), s.users(), power)
                } else {
                    let scale = 10f64.powf(-6.0 + 6.0 * rng.gen::<f64>()) * s.p_max();
                    let d = random_precoder(rng, s.nt(), s.users(), scale);
                    PrecoderSet::new(f_n.matrix() + d.matrix()).unwrap()
                }
            })
            .collect()
    }

    pub fn lb1_report(s: &Scenario, f_n: &PrecoderSet, rng: &mut ChaCha8Rng, samples: usize) -> Report {
        let mut rep = Report::default();
        let points = sample_points(rng, s, f_n, samples);
        for stream in streams(s.users()) {
            let c = lb1_coeffs(f_n, s, stream);
            let exact = stream.rate(f_n, s);
            let g_bound = fd_gradient(|f| lb1_eval(&c, f), f_n, 1e-6);
            let g_exact = fd_gradient(|f| stream.rate(f, s), f_n, 1e-6);
            rep.merge((lb1_eval(&c, f_n) - exact).abs(), grad_gap(&g_bound, &g_exact));
            for p in &points {
                let r = stream.rate(p, s);
                if lb1_eval(&c, p) > r + rounding(r) {
                    rep.violations += 1;
                }
                rep.samples += 1;
            }
        }
        rep
    }

    pub fn lb2_report(s: &Scenario, f_n: &PrecoderSet, rng: &mut ChaCha8Rng, samples: usize) -> Report {
        let mut rep = Report::default();
        let points = sample_points(rng, s, f_n, samples);
        for stream in streams(s.users()) {
            let c = lb2_coeffs(f_n, s, stream);
            let exact = stream.sinr(f_n, s);
            let g_bound = fd_gradient(|f| lb2_eval(&c, f), f_n, 1e-6);
            let g_exact = fd_gradient(|f| stream.sinr(f, s), f_n, 1e-6);
            rep.merge(
                (lb2_eval(&c, f_n) - exact).abs() / (1.0 + exact.abs()),
                grad_gap(&g_bound, &g_exact),
            );
            for p in &points {
                let v = stream.sinr(p, s);
                if lb2_eval(&c, p) > v + rounding(v) {
                    rep.violations += 1;
                }
                rep.samples += 1;
            }
        }
        rep
    }

    pub fn phi_report(rng: &mut ChaCha8Rng, samples: usize) -> Report {
        let mut rep = Report::default();
        let x_n = 5.0 * rng.gen::<f64>();
        let y_n = 0.1 + 10.0 * rng.gen::<f64>();
        let c = phi_coeffs(x_n, y_n).unwrap();
        let q = |x: f64, y: f64| x * x / y;
        let h = 1e-6;
        let gx = (q(x_n + h, y_n) - q(x_n - h, y_n)) / (2.0 * h);
        let gy = (q(x_n, y_n + h) - q(x_n, y_n - h)) / (2.0 * h);
        let bx = (c.eval(x_n + h, y_n) - c.eval(x_n - h, y_n)) / (2.0 * h);
        let by = (c.eval(x_n, y_n + h) - c.eval(x_n, y_n - h)) / (2.0 * h);
        rep.merge((c.eval(x_n, y_n) - q(x_n, y_n)).abs(), grad_gap(&[gx, gy], &[bx, by]));
        for _ in 0..samples {
            let x = 10.0 * rng.gen::<f64>();
            let y = 1e-3 + 20.0 * rng.gen::<f64>();
            let v = q(x, y);
            if c.eval(x, y) > v + rounding(v) {
                rep.violations += 1;
            }
            rep.samples += 1;
        }
        rep
    }
}
