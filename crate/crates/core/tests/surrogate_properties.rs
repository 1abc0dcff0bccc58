mod common;

use common::probes::{lb1_report, lb2_report, phi_report, random_precoder, rng, streams};
use common::random_scenario;
use proptest::prelude::*;
use rsma::surrogate::{lb1_coeffs, lb1_eval, wmmse_coeffs, wmmse_eval};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lb1_touches_and_minorizes_the_rate(scenario in 0usize..20, seed in any::<u64>(), load in 0.05f64..1.0) {
        let s = random_scenario(scenario);
        let mut r = rng(seed);
        let f_n = random_precoder(&mut r, s.nt(), s.users(), load * s.p_max());
        let rep = lb1_report(&s, &f_n, &mut r, 50);
        prop_assert!(rep.tangency <= 1e-9, "tangency {}", rep.tangency);
        prop_assert_eq!(rep.violations, 0);
        prop_assert!(rep.gradient <= 1e-5, "gradient {}", rep.gradient);
    }

    #[test]
    fn lb2_touches_and_minorizes_the_sinr(scenario in 0usize..20, seed in any::<u64>(), load in 0.05f64..1.0) {
        let s = random_scenario(scenario);
        let mut r = rng(seed);
        let f_n = random_precoder(&mut r, s.nt(), s.users(), load * s.p_max());
        let rep = lb2_report(&s, &f_n, &mut r, 50);
        prop_assert!(rep.tangency <= 1e-9, "tangency {}", rep.tangency);
        prop_assert_eq!(rep.violations, 0);
        prop_assert!(rep.gradient <= 1e-5, "gradient {}", rep.gradient);
    }

    #[test]
    fn phi_touches_and_minorizes_quadratic_over_linear(seed in any::<u64>()) {
        let rep = phi_report(&mut rng(seed), 200);
        prop_assert!(rep.tangency <= 1e-9);
        prop_assert_eq!(rep.violations, 0);
        prop_assert!(rep.gradient <= 1e-5);
    }

    #[test]
    fn mmse_route_gives_the_same_rate_bound(scenario in 0usize..20, seed in any::<u64>()) {
        let s = random_scenario(scenario);
        let mut r = rng(seed);
        let f_n = random_precoder(&mut r, s.nt(), s.users(), s.p_max());
        let probe = random_precoder(&mut r, s.nt(), s.users(), 0.5 * s.p_max());
        for stream in streams(s.users()) {
            let a = lb1_coeffs(&f_n, &s, stream);
            let b = wmmse_coeffs(&f_n, &s, stream);
            prop_assert!((a.a - b.weight()).abs() <= 1e-10 * a.a.max(1.0));
            let dir = b.direction();
            for (x, y) in a.b.iter().zip(dir.iter()) {
                prop_assert!((x - y).norm() <= 1e-10);
            }
            prop_assert!((a.constant - b.constant).abs() <= 1e-9);
            let (u, v) = (lb1_eval(&a, &probe), wmmse_eval(&b, &probe));
            prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
        }
    }
}

#[test]
fn bound_is_tight_only_at_the_expansion_point() {
    let s = random_scenario(3);
    let mut r = rng(7);
    let f_n = random_precoder(&mut r, s.nt(), s.users(), s.p_max());
    let other = random_precoder(&mut r, s.nt(), s.users(), s.p_max());
    for stream in streams(s.users()) {
        let c = lb1_coeffs(&f_n, &s, stream);
        assert!(lb1_eval(&c, &other) < stream.rate(&other, &s));
    }
}
