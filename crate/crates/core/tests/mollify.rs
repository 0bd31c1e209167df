use fkdrift_core::field::DriftField;
use fkdrift_core::kato::{builtin_drift, BuiltinParams, KatoBudget, KatoParams, ParamValue};
use fkdrift_core::mollify::{convergence_audit, mollify_auto, mollify_drift, CompactSet, Mollifier, MollifyOptions};
use proptest::prelude::*;

const EPS1: f64 = 0.25;

fn radial_singular() -> DriftField {
    builtin_drift("radial_singular", 3, &BuiltinParams::new()).unwrap()
}

fn gaussian(amplitude: f64, tc: f64) -> DriftField {
    let mut p = BuiltinParams::new();
    p.insert("amplitude".into(), ParamValue::Number(amplitude));
    p.insert("tc".into(), ParamValue::Number(tc));
    p.insert("sigma".into(), ParamValue::Number(0.2));
    builtin_drift("smooth_gaussian", 3, &p).unwrap()
}

/// Mass of `φ_n` on R⁴ as `|S³| ∫ φ_n(r e₁) r³ dr` by Simpson's rule.
fn radial_mass(m: &Mollifier) -> f64 {
    let rho = m.support_radius();
    let n = 20_000;
    let h = rho / n as f64;
    let f = |r: f64| m.value(&[r, 0.0, 0.0, 0.0]) * r.powi(3);
    let mut acc = f(0.0) + f(rho);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    2.0 * std::f64::consts::PI.powi(2) * acc * h / 3.0
}

#[test]
fn mollifier_has_unit_mass() {
    for n in [1, 2, 4, 8, 16, 64] {
        let m = Mollifier::new(EPS1, n, 3).unwrap();
        let mass = radial_mass(&m);
        assert!((mass - 1.0).abs() < 1e-6, "n = {n}: mass {mass}");
        assert!((m.support_radius() - EPS1 / (2.0 * n as f64)).abs() < 1e-15);
    }
}

#[test]
fn mollified_drift_vanishes_outside_dilated_support() {
    let b = radial_singular();
    let sb = b.support().unwrap();
    for n in [2, 8] {
        let bn = mollify_drift(&b, n, EPS1, &MollifyOptions::default()).unwrap();
        let rho = EPS1 / (2.0 * n as f64);
        let mid = 0.5 * (sb.t[0] + sb.t[1]);
        let outside = [
            (sb.t[0] - 1.01 * rho, vec![0.0, 0.0, 0.0]),
            (sb.t[1] + 1.01 * rho, vec![0.1, 0.0, 0.0]),
            (mid, vec![sb.hi[0] + 1.01 * rho, 0.0, 0.0]),
            (mid, vec![0.0, sb.lo[1] - 1.01 * rho, 0.0]),
        ];
        for (t, y) in outside {
            assert!(bn.eval_vec(t, &y).iter().all(|v| *v == 0.0), "n = {n} at t = {t}, y = {y:?}");
        }
        assert!(bn.eval_vec(mid, &[0.05, 0.0, 0.0]).iter().any(|v| *v != 0.0));
    }
}

#[test]
fn singular_peak_grows_like_n_to_the_gamma() {
    // radial_singular has γ = 1/2 by default.
    let b = radial_singular();
    let t = 0.375;
    let peak = |n: usize| -> f64 {
        let bn = mollify_drift(&b, n, EPS1, &MollifyOptions { nodes: 13 }).unwrap();
        (0..=20)
            .map(|i| {
                let r = 0.06 * i as f64 / 20.0;
                let v = bn.eval_vec(t, &[r, 0.0, 0.0]);
                v.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    };
    let sups: Vec<f64> = [2, 4, 8, 16].iter().map(|&n| peak(n)).collect();
    assert!(sups.iter().all(|s| s.is_finite() && *s > 0.0));
    for w in sups.windows(2) {
        assert!(w[1] <= w[0] * 2f64.sqrt() * 1.05, "sups {sups:?}");
    }
}

#[test]
fn tabulated_route_agrees_with_direct_convolution() {
    let b = radial_singular();
    let direct = mollify_drift(&b, 4, EPS1, &MollifyOptions { nodes: 13 }).unwrap();
    let table = mollify_auto(&b, 4, EPS1).unwrap();
    for (t, y) in [(0.3, [0.2, 0.1, 0.0]), (0.4, [0.0, -0.5, 0.3]), (0.45, [0.6, 0.0, 0.1])] {
        let a = direct.eval_vec(t, &y);
        let c = table.eval_vec(t, &y);
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = a.iter().zip(&c).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-2 * na, "t = {t}: {a:?} vs {c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mollification_is_linear(
        a in -3.0f64..3.0,
        t in 0.2f64..0.8,
        y in prop::array::uniform3(-0.5f64..0.5),
    ) {
        let (b1, b2) = (gaussian(1.0, 0.45), gaussian(0.7, 0.55));
        let opts = MollifyOptions::default();
        let lhs = mollify_drift(&DriftField::combination(vec![(a, b1.clone()), (1.0, b2.clone())]), 4, EPS1, &opts).unwrap();
        let m1 = mollify_drift(&b1, 4, EPS1, &opts).unwrap();
        let m2 = mollify_drift(&b2, 4, EPS1, &opts).unwrap();
        let l = lhs.eval_vec(t, &y);
        let (r1, r2) = (m1.eval_vec(t, &y), m2.eval_vec(t, &y));
        for j in 0..3 {
            let r = a * r1[j] + r2[j];
            prop_assert!((l[j] - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }
}

#[test]
fn singular_difference_norms_decrease() {
    let b = radial_singular();
    let k = CompactSet {
        t: [0.25, 0.5],
        radius: 3f64.sqrt(),
    };
    let kp = KatoParams::new(0.25, 2.0 * EPS1).unwrap();
    let r = convergence_audit(&b, &[2, 4, 8], &k, EPS1, &kp, &KatoBudget::default()).unwrap();
    for e in &r.estimates {
        assert!(!e.diverged && e.value > 0.0 && e.error < 0.05 * e.value, "{e:?}");
    }
    for w in r.estimates.windows(2) {
        assert!(w[1].value + w[1].error < w[0].value - w[0].error, "{:?}", r.estimates);
    }
    assert!(r.monotone);
    let p = r.decay_exponent.unwrap();
    assert!(p > 0.0, "decay exponent {p}");
}

#[test]
fn convergence_audit_rejects_unordered_orders() {
    let k = CompactSet {
        t: [0.25, 0.5],
        radius: 1.0,
    };
    let kp = KatoParams::new(0.25, 0.5).unwrap();
    assert!(convergence_audit(&radial_singular(), &[4, 2], &k, EPS1, &kp, &KatoBudget::default()).is_err());
}
