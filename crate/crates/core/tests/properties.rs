use proptest::prelude::*;

use gammalab::gamma::{cd_terms, condb_residual};
use gammalab::geometry::{canonical_constants, CDConstants};
use gammalab::heat::{cc_distance, mc_semigroup, McSettings};
use gammalab::jet::TestFunction;
use gammalab::model_zoo::{build_heisenberg, model_by_name};
use gammalab::verify::schedule::{builtin_schedules, check_schedule_on, li_yau_exponent};
use gammalab::verify::{verdict, Verdict};

fn point3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::Fail => 0,
        Verdict::Inconclusive => 1,
        Verdict::Pass => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn verdict_monotone_in_margin(m in -10.0f64..10.0, dm in 0.0f64..5.0, tol in 0.0f64..1.0, err in 0.0f64..3.0) {
        prop_assert!(rank(verdict(m + dm, tol, err)) >= rank(verdict(m, tol, err)));
        prop_assert_eq!(verdict(m, tol, err) == Verdict::Pass, m >= -tol);
    }

    #[test]
    fn cd_inequality_on_heisenberg(seed in any::<u64>(), x in point3(), log_ell in -1.5f64..1.5) {
        let h = build_heisenberg();
        let k = h.declared_constants().unwrap();
        let f = TestFunction::random_polynomial(3, 4, seed);
        let t = cd_terms(&h, &f, &x, 10f64.powf(log_ell), &k).unwrap();
        prop_assert!(t.residual() >= -1e-9 * t.scale(), "{t:?}");
    }

    #[test]
    fn condition_b_on_free_nilpotent(seed in any::<u64>(), x in prop::collection::vec(-0.5f64..0.5, 6)) {
        let m = model_by_name("free_nilpotent_3").unwrap();
        let f = TestFunction::random_polynomial(6, 3, seed);
        prop_assert!(condb_residual(&m, &f, &x).unwrap().abs() <= 1e-11);
    }

    #[test]
    fn heisenberg_distance_is_a_metric(x in point3(), y in point3(), z in point3()) {
        let h = build_heisenberg();
        let dxy = cc_distance(&h, &x, &y).unwrap();
        let dyx = cc_distance(&h, &y, &x).unwrap();
        let dxz = cc_distance(&h, &x, &z).unwrap().value;
        let dzy = cc_distance(&h, &z, &y).unwrap().value;
        prop_assert!((dxy.value - dyx.value).abs() <= 1e-8 * (1.0 + dxy.value));
        prop_assert!(dxy.value <= dxz + dzy + 1e-8);
        prop_assert!(dxy.lower <= dxy.value + 1e-12 && dxy.value <= dxy.upper + 1e-12);
    }

    #[test]
    fn heisenberg_distance_is_left_invariant(g in point3(), x in point3(), y in point3()) {
        let h = build_heisenberg();
        let r = h.realization();
        let d = cc_distance(&h, &x, &y).unwrap().value;
        let moved = cc_distance(&h, &r.mul(&g, &x).unwrap(), &r.mul(&g, &y).unwrap()).unwrap().value;
        prop_assert!((d - moved).abs() <= 1e-7 * (1.0 + d), "{d} vs {moved}");
    }

    #[test]
    fn li_yau_exponent_positive(beta in 1.001f64..1.999) {
        prop_assert!(li_yau_exponent(beta) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn monte_carlo_is_seed_deterministic(seed in any::<u64>(), x in point3(), t in 0.1f64..1.0) {
        let h = build_heisenberg();
        let f = TestFunction::random_polynomial(3, 2, seed);
        let s = McSettings::new(1000, 10, seed);
        let a = mc_semigroup(&h, &f, &x, t, &s).unwrap();
        let b = mc_semigroup(&h, &f, &x, t, &s).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.error.to_bits(), b.error.to_bits());
        let one = mc_semigroup(&h, &TestFunction::constant(3, 1.0), &x, t, &s).unwrap();
        prop_assert_eq!(one.value, 1.0);
    }

    #[test]
    fn builtin_schedules_admissible_for_any_constants(
        rho1 in 0.0f64..3.0,
        rho20 in 0.05f64..2.0,
        n in 2usize..6,
        horizon in 0.2f64..3.0,
    ) {
        // Nonnegative curvature with ρ₂,₁ = 0, the setting of the shipped step-2 models.
        let (_, base) = canonical_constants(&build_heisenberg()).unwrap();
        let k = CDConstants { n, rho1, rho20, rho21: 0.0, ..base };
        let (schedules, _) = builtin_schedules(&k, horizon);
        for s in &schedules {
            let r = check_schedule_on(s, &k, 256).unwrap();
            prop_assert!(r.passed(), "{} with {k:?}: {r:?}", s.name);
        }
    }
}

#[test]
fn li_yau_schedule_with_small_vertical_constant() {
    // Large cancelling terms: β = 1.1 gives a = (T − t)^10 while 1/ℓ ~ 1/ρ₂.
    let (_, base) = canonical_constants(&build_heisenberg()).unwrap();
    let k = CDConstants { rho1: 0.0, rho20: 0.05, rho21: 0.0, ..base };
    let (schedules, _) = builtin_schedules(&k, 2.7758095884814042);
    for s in &schedules {
        assert!(check_schedule_on(s, &k, 256).unwrap().passed(), "{}", s.name);
    }
}
