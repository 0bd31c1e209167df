use fkdrift_core::field::{ConstantScalar, ScalarField, SmoothBump};
use fkdrift_core::kato::{builtin_drift, divergence_probe, kato_norm, BuiltinParams, KatoBudget, KatoEstimate, KatoParams, ParamValue};
use proptest::prelude::*;

fn norm(f: &dyn ScalarField, c: f64, h: f64) -> KatoEstimate {
    let e = kato_norm(f, &KatoParams::new(c, h).unwrap(), &KatoBudget::default()).unwrap();
    assert!(!e.diverged);
    e
}

fn drift(name: &str, params: &[(&str, f64)]) -> fkdrift_core::field::DriftField {
    let mut p = BuiltinParams::new();
    for (k, v) in params {
        p.insert(k.to_string(), ParamValue::Number(*v));
    }
    builtin_drift(name, 3, &p).unwrap()
}

fn slack(a: &KatoEstimate, b: &KatoEstimate) -> f64 {
    a.error + b.error + 1e-9 * (a.value + b.value)
}

#[test]
fn horizon_subadditivity() {
    for b in [drift("radial_singular", &[]), drift("smooth_gaussian", &[("sigma", 0.3)]), drift("example_f", &[])] {
        let f = b.magnitude();
        let l = 0.02;
        let base = norm(&f, 0.25, l);
        for n in [2, 3, 4] {
            let big = norm(&f, 0.25, n as f64 * l);
            assert!(
                big.value <= n as f64 * base.value + big.error + n as f64 * base.error,
                "{}: N at {n}l = {} > {n} x {}",
                b.label(),
                big.value,
                base.value
            );
        }
    }
}

#[test]
fn monotone_in_horizon_and_exponent() {
    for b in [drift("radial_singular", &[]), drift("smooth_gaussian", &[])] {
        let f = b.magnitude();
        let cs = [0.2, 0.25, 0.3];
        let hs = [0.05, 0.1, 0.2];
        let table: Vec<Vec<KatoEstimate>> = cs.iter().map(|&c| hs.iter().map(|&h| norm(&f, c, h)).collect()).collect();
        for i in 0..3 {
            for j in 0..3 {
                if j + 1 < 3 {
                    let (a, b) = (&table[i][j], &table[i][j + 1]);
                    assert!(b.value + slack(a, b) >= a.value, "not nondecreasing in h");
                }
                if i + 1 < 3 {
                    let (a, b) = (&table[i][j], &table[i + 1][j]);
                    assert!(b.value <= a.value + slack(a, b), "not nonincreasing in c");
                }
            }
        }
    }
}

#[test]
fn scaling_is_linear() {
    let f = drift("smooth_gaussian", &[]).magnitude();
    let base = norm(&f, 0.25, 0.1);
    for m in [0.5, 2.0, 10.0] {
        let g = drift("smooth_gaussian", &[("amplitude", m)]).magnitude();
        let e = norm(&g, 0.25, 0.1);
        assert!((e.value - m * base.value).abs() <= e.error + m * base.error + 1e-9 * e.value, "M = {m}");
    }
}

#[test]
fn divergence_bounds_increase_geometrically() {
    let f = drift("example_f_reversed", &[]).magnitude();
    let rep = divergence_probe(&f, &KatoParams::new(0.25, 0.01).unwrap(), 0.0, 8).unwrap();
    let b = rep.bounds();
    assert!(b.len() >= 6);
    for w in b.windows(2) {
        assert!(w[1] > 1.1 * w[0], "bounds {b:?}");
    }
    assert!(rep.diverged);
}

#[test]
fn forward_example_is_not_flagged() {
    let f = drift("example_f", &[]).magnitude();
    let rep = divergence_probe(&f, &KatoParams::new(0.25, 0.01).unwrap(), 1.0, 8).unwrap();
    assert!(!rep.diverged, "bounds {:?}", rep.bounds());
}

#[test]
fn zero_field_has_zero_norm() {
    let e = norm(&ConstantScalar::new(3, 0.0), 0.25, 0.1);
    assert_eq!(e.value, 0.0);
}

#[test]
fn rejects_bad_parameters() {
    assert!(KatoParams::new(0.0, 0.1).is_err());
    assert!(KatoParams::new(0.25, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_field_closed_form(c in 0.05f64..1.0, h in 1e-3f64..0.5, m in 0.1f64..5.0) {
        let e = norm(&ConstantScalar::new(3, m), c, h);
        let exact = m * 2.0 * (std::f64::consts::PI / c).powf(1.5) * h.sqrt();
        prop_assert!((e.value - exact).abs() <= 1e-6 * exact, "{} vs {}", e.value, exact);
    }

    #[test]
    fn bump_bounded_by_constant_envelope(c in 0.1f64..0.5, h in 0.01f64..0.3, amp in 0.1f64..3.0) {
        // 0 ≤ f ≤ ‖f‖∞ pointwise, so the norm is at most that of the constant.
        let f = SmoothBump::new(amp, 0.5, vec![0.1, 0.0, -0.2], 0.3, 0.6);
        let e = norm(&f, c, h);
        let cap = amp * 2.0 * (std::f64::consts::PI / c).powf(1.5) * h.sqrt();
        prop_assert!(e.value >= 0.0 && e.value <= cap * (1.0 + 1e-6) + e.error);
    }
}
