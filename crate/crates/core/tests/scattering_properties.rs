use metaoptics::{kappa, reflection, refractive_index, transmission, Complex64, ScatteringAmplitudes};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn evanescent_reflection_is_unimodular(a in 1e-3f64..1e12, frac in 1e-9f64..1.0) {
        let k = a * frac;
        prop_assume!(k < a);
        let r = reflection(k, a).unwrap();
        prop_assert!((r.norm() - 1.0).abs() < 1e-12, "|R| = {}", r.norm());
    }

    #[test]
    fn propagating_flux_is_conserved(a in 1e-3f64..1e12, ratio in 1.0f64..1e3) {
        let k = a * ratio;
        prop_assume!(k > a);
        let s = ScatteringAmplitudes::new(k, a).unwrap();
        let total = s.reflected_flux() + s.transmitted_flux();
        prop_assert!((total - 1.0).abs() < 1e-12, "|R|^2 + k'/k |T|^2 = {total}");
    }

    #[test]
    fn index_squared_matches_energy_ratio(a in 1e-3f64..1e12, ratio in 1e-6f64..1e3) {
        let k = a * ratio;
        let n = refractive_index(k, a).unwrap();
        let expect = 1.0 - (a / k) * (a / k);
        let err = (n * n - expect).norm();
        prop_assert!(err <= 8.0 * f64::EPSILON * expect.abs().max(1.0), "n^2 - (1 - a^2/k^2) = {err:e}");
    }

    #[test]
    fn reflection_is_transmission_minus_one(a in 1e-3f64..1e12, ratio in 1e-6f64..1e3) {
        let k = a * ratio;
        let t = transmission(k, a).unwrap();
        let r = reflection(k, a).unwrap();
        prop_assert!((1.0 + r - t).norm() <= 4.0 * f64::EPSILON * t.norm());
    }

    /// The one-sided limits meet at k = a; the gap closes like sqrt(|k - a|).
    #[test]
    fn amplitudes_are_continuous_at_branch_point(a in 1e-3f64..1e12, rel in 1e-12f64..1e-4) {
        let below = transmission(a * (1.0 - rel), a).unwrap();
        let above = transmission(a * (1.0 + rel), a).unwrap();
        let gap = (below - above).norm();
        prop_assert!(gap <= 6.0 * rel.sqrt(), "gap {gap:e} at relative offset {rel:e}");
    }
}

#[test]
fn transmission_at_branch_point_is_exactly_two() {
    for a in [1e-3, 1.0, 2.244e9, 1e12] {
        assert_eq!(transmission(a, a).unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(kappa(a, a).unwrap(), Complex64::new(0.0, 0.0));
    }
}

#[test]
fn frozen_decay_constants() {
    // sqrt(1.02^2 - 1) = 0.200997512422418 and sqrt(1.44 - 1) = 0.663324958071080.
    let k0 = 2.244e9;
    let kap = kappa(k0, 1.02 * k0).unwrap();
    assert!((kap.re / k0 - 0.200_997_512_422_418).abs() < 1e-12);
    assert_eq!(kap.im, 0.0);
    let kap = kappa(1.2, 1.0).unwrap();
    assert_eq!(kap.re, 0.0);
    assert!((kap.im + 0.663_324_958_071_080).abs() < 1e-12);
}
