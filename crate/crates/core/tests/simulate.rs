use fkdrift_core::field::{DriftField, SmoothBump};
use fkdrift_core::kato::{builtin_drift, BuiltinParams};
use fkdrift_core::kernel::SpaceTimePoint;
use fkdrift_core::resolvent::{resolvent_apply, ResolventBudget};
use fkdrift_core::simulate::{
    discounted_functional, euler_paths, modulus_diagnostic, modulus_window_bound, read_ensemble, write_ensemble, SimConfig,
};
use fkdrift_core::Error;
use proptest::prelude::*;

fn gaussian_drift() -> DriftField {
    builtin_drift("smooth_gaussian", 3, &BuiltinParams::new()).unwrap()
}

fn config(n_paths: usize, seed: u64, drift: DriftField) -> SimConfig {
    SimConfig::new(SpaceTimePoint::origin(0.0, 3), 1.0, 0.02, n_paths, seed, drift)
}

#[test]
fn identical_across_thread_counts() {
    let cfg = config(500, 3, gaussian_drift());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| euler_paths(&cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.paths, b.paths);
    assert_eq!(a.occupation, b.occupation);
    assert_ne!(euler_paths(&cfg.with_seed(4)).unwrap().paths, a.paths);
}

#[test]
fn regenerated_paths_match_stored_ones() {
    let cfg = config(200, 5, gaussian_drift());
    let stored = euler_paths(&cfg).unwrap();
    let mut lean = cfg.clone();
    lean.store_limit = 0;
    let regen = euler_paths(&lean).unwrap();
    assert!(regen.paths.is_none());
    let a = stored.map_paths(|_, st| st.to_vec());
    let b = regen.map_paths(|_, st| st.to_vec());
    assert_eq!(a, b);
    assert_eq!(stored.occupation, regen.occupation);
}

#[test]
fn record_round_trip() {
    let cfg = config(64, 6, gaussian_drift());
    let ens = euler_paths(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.bin");
    write_ensemble(&ens, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_ensemble(std::fs::File::open(&path).unwrap(), gaussian_drift()).unwrap();
    assert_eq!(back.paths, ens.paths);
    assert_eq!(back.occupation, ens.occupation);
    assert_eq!(back.times, ens.times);
    assert_eq!((back.seed, back.dt, back.refine), (ens.seed, ens.dt, ens.refine));
    assert!(read_ensemble(&b"not a record at all"[..], gaussian_drift()).is_err());
}

#[test]
fn singular_drift_is_refused() {
    let b = builtin_drift("radial_singular", 3, &BuiltinParams::new()).unwrap();
    assert!(matches!(euler_paths(&config(10, 1, b)), Err(Error::Config(_))));
}

#[test]
fn short_horizon_is_refused() {
    let g = SmoothBump::new(1.0, 2.0, vec![0.0; 3], 1.5, 1.0);
    let ens = euler_paths(&config(10, 1, DriftField::zero(3))).unwrap();
    assert!(matches!(discounted_functional(&ens, &g, 1.0), Err(Error::Horizon(_))));
}

#[test]
fn zero_drift_functional_matches_quadrature() {
    // With b ≡ 0 the discounted functional is R^λg, computed here by quadrature.
    let g = SmoothBump::new(1.0, 0.5, vec![0.2, 0.0, 0.0], 0.4, 1.0);
    let mut cfg = config(40_000, 8, DriftField::zero(3));
    cfg.dt = 5e-3;
    let ens = euler_paths(&cfg).unwrap();
    let mc = discounted_functional(&ens, &g, 2.0).unwrap();
    let q = resolvent_apply(&g, 2.0, &ens.start, &ResolventBudget::default()).unwrap();
    assert!((mc.mean - q.value).abs() <= 4.0 * mc.se + q.error, "{mc:?} vs {q:?}");
}

#[test]
fn modulus_shrinks_with_window_and_respects_gaussian_bound() {
    let mut cfg = config(20_000, 9, DriftField::zero(3));
    cfg.dt = 1.0 / 256.0;
    let ens = euler_paths(&cfg).unwrap();
    let beta = 1.0;
    let mut last = f64::INFINITY;
    for delta in [0.25, 0.125, 0.0625, 0.03125] {
        let m = modulus_diagnostic(&ens, beta, delta).unwrap();
        assert!(m.probability <= last, "not decreasing at delta = {delta}");
        assert!(m.start_probability <= m.probability);
        let bound = modulus_window_bound(3, beta, delta, 1.0);
        assert!(m.probability <= bound + 3.0 * m.se, "delta {delta}: {} > {bound}", m.probability);
        last = m.probability;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn same_seed_same_paths(seed in any::<u64>(), n in 1usize..50, refine in 0u32..3) {
        let mut cfg = config(n, seed, gaussian_drift());
        cfg.refine = refine;
        let a = euler_paths(&cfg).unwrap();
        let b = euler_paths(&cfg).unwrap();
        prop_assert_eq!(a.paths, b.paths);
        prop_assert_eq!(a.times.len(), cfg.steps() + 1);
        prop_assert!((a.times.last().unwrap() - cfg.horizon).abs() < 1e-12);
    }
}
