use maxent_core::integration::{composite_rule, log2_integral, qmc_rule, vdc_sequence, RuleKind};
use maxent_core::SupportInterval;
use proptest::prelude::*;

/// Simpson is exact for cubics; compare against the antiderivative.
#[test]
fn simpson_integrates_random_cubics() {
    let support = SupportInterval::new(-1.5, 2.5).unwrap();
    let rule = composite_rule(support, 101, RuleKind::Simpson).unwrap();
    let coeffs = [
        [1.0, -2.0, 0.5, 3.0],
        [0.0, 0.0, 0.0, 1.0],
        [-4.0, 1.0, 1.0, -0.25],
    ];
    for c in coeffs {
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let anti = |x: f64| {
            c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0
        };
        let exact = anti(2.5) - anti(-1.5);
        assert!((rule.integrate(f) - exact).abs() <= 1e-12 * exact.abs().max(1.0));
    }
}

#[test]
fn midpoint_is_exact_for_lines() {
    let rule = composite_rule(SupportInterval::unit(), 7, RuleKind::Midpoint).unwrap();
    assert!((rule.integrate(|x| 3.0 * x - 1.0) - 0.5).abs() < 1e-14);
}

#[test]
fn qmc_rule_converges_on_smooth_integrand() {
    let exact = 1.0 - (-1.0f64).exp();
    let coarse = qmc_rule(SupportInterval::unit(), 64, 2).unwrap();
    let fine = qmc_rule(SupportInterval::unit(), 4096, 2).unwrap();
    let e1 = (coarse.integrate(|x| (-x).exp()) - exact).abs();
    let e2 = (fine.integrate(|x| (-x).exp()) - exact).abs();
    assert!(e2 < e1 && e2 < 1e-3);
}

proptest! {
    #[test]
    fn log2_integral_is_shift_equivariant(g in prop::collection::vec(-50.0..50.0f64, 33),
                                          shift in -1e3..1e3f64) {
        let rule = composite_rule(SupportInterval::unit(), 33, RuleKind::Simpson).unwrap();
        let base = log2_integral(&g, &rule).unwrap();
        let moved: Vec<f64> = g.iter().map(|v| v + shift).collect();
        let out = log2_integral(&moved, &rule).unwrap();
        prop_assert!((out - base - shift).abs() <= 1e-12 * (1.0 + shift.abs()));
    }

    #[test]
    fn van_der_corput_points_lie_in_unit_interval(n in 1usize..2000, base in prop::sample::select(vec![2u64, 3, 5, 7])) {
        let pts = vdc_sequence(n, base).unwrap();
        prop_assert_eq!(pts.len(), n);
        prop_assert!(pts.iter().all(|p| (0.0..1.0).contains(p)));
    }
}
