use std::sync::Arc;

use fkdrift_core::field::{ConstantScalar, DriftField, ScalarField, SmoothBump, SupportBox};
use fkdrift_core::kato::{builtin_drift, BuiltinParams, KatoBudget, ParamValue, DEFAULT_RADIAL_AMPLITUDE};
use fkdrift_core::kernel::{KernelParams, SpaceTimePoint};
use fkdrift_core::mollify::mollify_auto;
use fkdrift_core::resolvent::{
    evaluate_series, neumann_series, resolvent_apply, smallness_check, GridSpec, NeumannOptions, ResolventBudget,
};
use fkdrift_core::Error;
use proptest::prelude::*;

const EPS1: f64 = 0.25;

fn kernel() -> KernelParams {
    KernelParams::new(3, 0.25).unwrap()
}

fn radial(amplitude: f64) -> DriftField {
    let mut p = BuiltinParams::new();
    p.insert("amplitude".into(), ParamValue::Number(amplitude));
    builtin_drift("radial_singular", 3, &p).unwrap()
}

fn small_grid(depth: usize) -> NeumannOptions {
    NeumannOptions {
        depth,
        grid: GridSpec {
            time_nodes: 9,
            space_nodes: 9,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn bump() -> Arc<dyn ScalarField> {
    Arc::new(SmoothBump::new(1.0, 0.5, vec![0.0; 3], 0.45, 1.5))
}

#[test]
fn zero_drift_series_is_the_resolvent() {
    let g = bump();
    let r = neumann_series(&DriftField::zero(3), g.clone(), 1.0, &kernel(), EPS1, &small_grid(3)).unwrap();
    assert!(r.term_norms()[1..].iter().all(|v| *v == 0.0), "{:?}", r.term_norms());
    for p in [SpaceTimePoint::origin(0.0, 3), SpaceTimePoint::new(0.4, vec![0.3, -0.2, 0.1]).unwrap()] {
        let v = evaluate_series(&r, &p).unwrap();
        let direct = resolvent_apply(g.as_ref(), 1.0, &p, &ResolventBudget::default()).unwrap();
        assert!((v.value - direct.value).abs() <= v.error - v.tail + direct.error + 1e-12, "{v:?} vs {direct:?}");
    }
}

#[test]
fn constant_source_gives_inverse_rate() {
    let g: Arc<dyn ScalarField> = Arc::new(ConstantScalar::new(3, 1.0));
    let r = neumann_series(&DriftField::zero(3), g, 2.0, &kernel(), EPS1, &small_grid(2)).unwrap();
    let v = evaluate_series(&r, &SpaceTimePoint::origin(0.1, 3)).unwrap();
    assert!((v.value - 0.5).abs() < 1e-12, "{v:?}");
}

#[test]
fn large_drift_is_refused_with_report() {
    let b = mollify_auto(&radial(1e3), 8, EPS1).unwrap();
    match neumann_series(&b, bump(), 1.0, &kernel(), EPS1, &small_grid(2)) {
        Err(Error::Smallness(rep)) => {
            assert!(!rep.satisfied);
            assert!(rep.norm_2eps.value > rep.threshold);
        }
        other => panic!("expected a smallness refusal, got {:?}", other.map(|r| r.summary)),
    }
}

#[test]
fn smallness_threshold_uses_kappa_and_c1() {
    let rep = smallness_check(&radial(DEFAULT_RADIAL_AMPLITUDE), &kernel(), EPS1, &KatoBudget::default()).unwrap();
    let c1 = fkdrift_core::kernel::grad_envelope_constant(&kernel());
    assert!((rep.threshold - 1.0 / (2.0 * 3f64.powf(1.5) * c1)).abs() < 1e-15);
    assert!(rep.satisfied);
}

#[test]
fn deeper_truncation_stays_within_tail() {
    let b = mollify_auto(&radial(DEFAULT_RADIAL_AMPLITUDE), 8, EPS1).unwrap();
    let full = neumann_series(&b, bump(), 1.0, &kernel(), EPS1, &small_grid(4)).unwrap();
    let cut = full.truncated(2);
    assert_eq!(cut.depth(), 2);
    assert!(cut.tail_bound() > full.tail_bound());
    for p in [SpaceTimePoint::origin(0.0, 3), SpaceTimePoint::new(0.3, vec![0.1, 0.0, 0.2]).unwrap()] {
        let a = evaluate_series(&cut, &p).unwrap();
        let z = evaluate_series(&full, &p).unwrap();
        let quad = (a.error - a.tail) + (z.error - z.tail);
        assert!((a.value - z.value).abs() <= cut.tail_bound() + quad, "{} vs {}", a.value, z.value);
    }
}

#[test]
fn occupation_resolvent_decays_in_lambda() {
    let b = mollify_auto(&radial(DEFAULT_RADIAL_AMPLITUDE), 8, EPS1).unwrap();
    let g: Arc<dyn ScalarField> = Arc::new(b.magnitude());
    let bx = SupportBox::cube([0.1, 0.65], &[0.0; 3], 1.1);
    let opts = NeumannOptions {
        grid_box: Some(bx),
        ..small_grid(2)
    };
    let p = SpaceTimePoint::origin(0.2, 3);
    let vals: Vec<f64> = [1.0, 4.0, 16.0, 64.0]
        .iter()
        .map(|&l| evaluate_series(&neumann_series(&b, g.clone(), l, &kernel(), EPS1, &opts).unwrap(), &p).unwrap().value)
        .collect();
    for w in vals.windows(2) {
        assert!(w[1] < w[0], "{vals:?}");
    }
    assert!(vals[3] < 0.2 * vals[0], "{vals:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resolvent_is_positive_and_contractive(
        amp in 0.1f64..5.0,
        tc in 0.2f64..1.5,
        xc in prop::array::uniform3(-1.0f64..1.0),
        rt in 0.05f64..0.5,
        rx in 0.2f64..1.5,
        s in 0.0f64..1.0,
        x in prop::array::uniform3(-1.5f64..1.5),
        lambda in 0.25f64..16.0,
    ) {
        let g = SmoothBump::new(amp, tc, xc.to_vec(), rt, rx);
        let r = resolvent_apply(&g, lambda, &SpaceTimePoint::new(s, x.to_vec()).unwrap(), &ResolventBudget::default()).unwrap();
        prop_assert!(r.value >= -r.error);
        prop_assert!(lambda * r.value <= amp + lambda * r.error);
    }

    #[test]
    fn constant_has_resolvent_inverse_rate(c in -3.0f64..3.0, lambda in 0.1f64..50.0, s in 0.0f64..2.0) {
        let r = resolvent_apply(&ConstantScalar::new(3, c), lambda, &SpaceTimePoint::origin(s, 3), &ResolventBudget::default()).unwrap();
        prop_assert!((r.value - c / lambda).abs() <= 1e-10 * (c / lambda).abs() + r.error);
    }
}
