//! Acceptance criteria AC1 to AC12. Each test prints one `PASS`/`FAIL` line
//! straight to stderr so the verdicts appear even when output is captured.
//! Tests take a shared lock so wall-clock limits are measured without
//! contention from the other criteria.

use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use fkdrift_core::field::{DriftField, ScalarField, SmoothBump, SupportBox, TimeSlab, ConstantScalar};
use fkdrift_core::kato::{
    builtin_drift, divergence_probe, kato_norm, membership_profile, BuiltinParams, KatoBudget, KatoParams, Membership, ParamValue,
    DEFAULT_RADIAL_AMPLITUDE,
};
use fkdrift_core::kernel::{grad_envelope, grad_envelope_constant, heat_kernel_grad, minimal_grad_constant, KernelParams, SpaceTimePoint};
use fkdrift_core::mollify::{contraction_audit, mollify_auto};
use fkdrift_core::resolvent::{
    evaluate_series, neumann_series, resolvent_apply, resolvent_grad, GridSpec, NeumannOptions, NeumannSeriesResult, ResolventBudget,
};
use fkdrift_core::simulate::{
    defect_bias, discounted_functional, euler_paths, occupation_decay, resolvent_identity_residual, zero_drift_law, BumpTest, PathEnsemble,
    SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = 3;
const ALPHA: f64 = 0.25;
const EPS1: f64 = 0.25;
const LAMBDA: f64 = 1.0;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "AC{id} {verdict}: {detail}");
    assert!(pass, "AC{id} failed: {detail}");
}

fn kernel() -> KernelParams {
    KernelParams::new(D, ALPHA).unwrap()
}

fn default_drift() -> DriftField {
    let mut p = BuiltinParams::new();
    p.insert("amplitude".into(), ParamValue::Number(DEFAULT_RADIAL_AMPLITUDE));
    builtin_drift("radial_singular", D, &p).unwrap()
}

fn mollified(n: usize) -> DriftField {
    mollify_auto(&default_drift(), n, EPS1).unwrap()
}

fn bump() -> Arc<dyn ScalarField> {
    Arc::new(SmoothBump::new(1.0, 0.5, vec![0.0; D], 0.45, 1.5))
}

/// Default-grid Neumann series of the n = 8 drift, shared by AC6 and AC7.
fn series_n8() -> &'static (NeumannSeriesResult, Duration) {
    static S: OnceLock<(NeumannSeriesResult, Duration)> = OnceLock::new();
    S.get_or_init(|| {
        let t = Instant::now();
        let r = neumann_series(&mollified(8), bump(), LAMBDA, &kernel(), EPS1, &NeumannOptions::default()).unwrap();
        (r, t.elapsed())
    })
}

/// Ensemble of the n = 8 drift, shared by AC7 and AC8.
fn ensemble_n8() -> &'static PathEnsemble {
    static E: OnceLock<PathEnsemble> = OnceLock::new();
    E.get_or_init(|| {
        let cfg = SimConfig::new(SpaceTimePoint::origin(0.0, D), 1.0, 4e-3, 200_000, 7, mollified(8));
        euler_paths(&cfg).unwrap()
    })
}

#[test]
fn ac01_constant_field_kato_norm() {
    let _g = serial();
    let t = Instant::now();
    let (c, h) = (0.25, 0.01);
    let est = kato_norm(&ConstantScalar::new(D, 1.0), &KatoParams::new(c, h).unwrap(), &KatoBudget::default()).unwrap();
    let elapsed = t.elapsed();
    let exact = 2.0 * (std::f64::consts::PI / c).powf(1.5) * h.sqrt();
    let rel = (est.value - exact).abs() / exact;
    report(
        1,
        rel <= 5e-3 && elapsed < Duration::from_secs(10),
        format!("N = {:.8} vs {exact:.8}, rel err {rel:.2e}, {elapsed:.2?}", est.value),
    );
}

#[test]
fn ac02_divergence_detection() {
    let _g = serial();
    let p = BuiltinParams::new();
    let f = builtin_drift("example_f", D, &p).unwrap().magnitude();
    let fr = builtin_drift("example_f_reversed", D, &p).unwrap().magnitude();
    let budget = KatoBudget::default();
    let kp = KatoParams::new(0.25, 1e-4).unwrap();
    let forward = kato_norm(&f, &kp, &budget).unwrap();
    let probe = divergence_probe(&fr, &kp, 0.0, 8).unwrap();
    let hs = [0.1, 0.03, 0.01, 3e-3, 1e-3, 1e-4];
    let prof_f = membership_profile(&f, 0.25, &hs, &budget).unwrap();
    let prof_r = membership_profile(&fr, 0.25, &hs, &budget).unwrap();
    let exceeded = probe.last_bound() > 10.0 * (forward.value + forward.error);
    let pass = !forward.diverged && exceeded && prof_r.verdict == Membership::NonMember && prof_f.verdict == Membership::Member;
    report(
        2,
        pass,
        format!(
            "probe bound {:.2} vs 10 x N(f) = {:.2} at h = 1e-4; f {:?}, reversed {:?}",
            probe.last_bound(),
            10.0 * forward.value,
            prof_f.verdict,
            prof_r.verdict
        ),
    );
}

#[test]
fn ac03_mollifier_contraction() {
    let _g = serial();
    let b = default_drift();
    let kp = KatoParams::new(ALPHA, 2.0 * EPS1).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2, 4, 8] {
        let r = contraction_audit(&b, n, EPS1, &kp, &KatoBudget::default(), true).unwrap();
        pass &= r.pass;
        let worst = r
            .components
            .iter()
            .filter(|c| c.norm_b.value > 0.0)
            .map(|c| c.norm_bn.value / c.norm_b.value)
            .fold(0.0, f64::max);
        parts.push(format!("n={n} ratio {:.4} (kappa {:.3}) worst component {worst:.4}", r.ratio, r.kappa));
    }
    report(3, pass, parts.join("; "));
}

#[test]
fn ac04_gradient_envelope() {
    let _g = serial();
    let kp = kernel();
    let c1 = minimal_grad_constant(&kp);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let s = rng.gen_range(0.0..1.0);
        let tau = 10f64.powf(rng.gen_range(-4.0..1.0));
        let x: Vec<f64> = (0..D).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let scale = rng.gen_range(0.0..6.0) * tau.sqrt();
        let dir: Vec<f64> = (0..D).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + scale * u / dn).collect();
        let r2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let p = SpaceTimePoint::new(s, x).unwrap();
        let q = SpaceTimePoint::new(s + tau, y).unwrap();
        let g = heat_kernel_grad(&p, &q).unwrap();
        let mag = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let env = grad_envelope(&kp, tau, r2);
        let ratio = mag / (c1 * env);
        worst = worst.max(ratio);
        if ratio > 1.0 + 1e-12 {
            violations += 1;
        }
    }
    report(4, violations == 0, format!("10000 points, C1 = {c1:.6}, {violations} violations, max ratio {worst:.6}"));
}

#[test]
fn ac05_lemma_bounds() {
    let _g = serial();
    let b = builtin_drift("radial_singular", D, &BuiltinParams::new()).unwrap();
    let mag = b.magnitude();
    let c1 = grad_envelope_constant(&kernel());
    let bud = ResolventBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pass = true;
    let mut parts = Vec::new();
    for h in [0.05, 0.1, 0.2] {
        let slab = [0.25, 0.25 + h];
        let f = TimeSlab { inner: &mag, t: slab };
        let n = kato_norm(&f, &KatoParams::new(ALPHA, h).unwrap(), &KatoBudget::default()).unwrap();
        let (mut wv, mut wg): (f64, f64) = (0.0, 0.0);
        for i in 0..20 {
            // Half the probes sit on the singular centre just before or inside the slab.
            let s = rng.gen_range(slab[0] - 0.1..slab[1]);
            let x: Vec<f64> = if i % 2 == 0 {
                (0..D).map(|_| rng.gen_range(-0.05..0.05)).collect()
            } else {
                (0..D).map(|_| rng.gen_range(-1.0..1.0)).collect()
            };
            let p = SpaceTimePoint::new(s, x).unwrap();
            let v = resolvent_apply(&f, LAMBDA, &p, &bud).unwrap();
            let g = resolvent_grad(&f, LAMBDA, &p, &bud).unwrap();
            wv = wv.max(v.value.abs() / n.value);
            wg = wg.max(g.norm() / (c1 * n.value));
        }
        pass &= !n.diverged && wv <= 1.02 && wg <= 1.02;
        parts.push(format!("h={h}: N = {:.3}, max |R f|/N {wv:.4}, max |grad R f|/(C1 N) {wg:.4}", n.value));
    }
    report(5, pass, parts.join("; "));
}

#[test]
fn ac06_geometric_decay() {
    let _g = serial();
    let (r, elapsed) = series_n8();
    let sm = &r.summary.smallness;
    let rel_margin = sm.margin / sm.threshold;
    let ratios = r.summary.ratios();
    let worst = ratios.iter().take(11).cloned().fold(0.0, f64::max);
    let pass = sm.satisfied && rel_margin >= 0.5 && ratios.len() >= 11 && worst <= 0.55 && *elapsed < Duration::from_secs(300);
    report(
        6,
        pass,
        format!(
            "smallness margin {:.0}%, max ratio k<=10 {worst:.3e}, ratios {:?}, built in {elapsed:.1?}",
            100.0 * rel_margin,
            ratios.iter().take(4).map(|x| format!("{x:.2e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn ac07_laplace_match() {
    let _g = serial();
    let t = Instant::now();
    let (r, built) = series_n8();
    let ens = ensemble_n8();
    let mc = discounted_functional(ens, bump().as_ref(), LAMBDA).unwrap();
    let sv = evaluate_series(r, &ens.start).unwrap();
    let gap = (mc.mean - sv.value).abs();
    let allowed = 3.0 * (mc.se + mc.truncation + sv.error + sv.tail);
    let elapsed = t.elapsed() + *built;
    report(
        7,
        gap <= allowed && elapsed < Duration::from_secs(600),
        format!(
            "MC {:.6} +- {:.2e}, series {:.6} (err {:.2e}, tail {:.2e}), gap {gap:.2e} <= {allowed:.2e}, {elapsed:.1?}",
            mc.mean, mc.se, sv.value, sv.error, sv.tail
        ),
    );
}

#[test]
fn ac08_resolvent_identity() {
    let _g = serial();
    let res = resolvent_identity_residual(ensemble_n8(), &mollified(8), bump(), LAMBDA, &ResolventBudget::default()).unwrap();
    report(
        8,
        res.within(3.0),
        format!("residual {:.2e}, se {:.2e}, deterministic bound {:.2e}", res.residual, res.se, res.bias_bound),
    );
}

#[test]
fn ac09_martingale_defect() {
    let _g = serial();
    let f = BumpTest::new(vec![0.0; D], 1.5, 1.0);
    let checkpoints = [0.25, 0.5, 0.75, 1.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, drift) in [("zero", DriftField::zero(D)), ("b_8", mollified(8))] {
        let cfg = SimConfig::new(SpaceTimePoint::origin(0.0, D), 1.0, 0.016, 100_000, 9, drift);
        let rep = defect_bias(&cfg, &f, &checkpoints, 3).unwrap();
        let ok = rep.within(0, 3.0) && rep.within(1, 3.0) && rep.shrink[0] >= 1.5;
        pass &= ok;
        let max_defect = rep.curves[0].mean.iter().map(|m| m.abs()).fold(0.0, f64::max);
        parts.push(format!("{name}: max |defect| {max_defect:.2e} at dt {}, shrink {:.2}", rep.dts[0], rep.shrink[0]));
    }
    report(9, pass, parts.join("; "));
}

#[test]
fn ac10_occupation_decay() {
    let _g = serial();
    let family = vec![(8, mollified(8)), (16, mollified(16))];
    let template = SimConfig::new(SpaceTimePoint::origin(0.0, D), 1.0, 4e-3, 100_000, 10, DriftField::zero(D));
    let table = occupation_decay(&family, &[1.0, 4.0, 16.0], &template).unwrap();
    let decreasing = table.rows.iter().all(|r| r.strictly_decreasing);
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "n={} [{}]",
                r.order,
                r.values.iter().map(|v| format!("{:.4e}", v.mean)).collect::<Vec<_>>().join(", ")
            )
        })
        .collect();
    report(
        10,
        decreasing && table.max_spread_z <= 3.0,
        format!("{}; max spread {:.2} SE", rows.join("; "), table.max_spread_z),
    );
}

#[test]
fn ac11_mollification_convergence() {
    let _g = serial();
    let b = default_drift();
    let kp = kernel();
    let g = bump();
    let opts = NeumannOptions {
        depth: 2,
        grid: GridSpec {
            time_nodes: 9,
            space_nodes: 9,
            ..Default::default()
        },
        grid_box: Some(SupportBox::cube([0.1875, 0.5625], &[0.0; D], 1.0625)),
        ..Default::default()
    };
    let probes: Vec<SpaceTimePoint> = (0..10)
        .map(|i| SpaceTimePoint::new(0.04 * i as f64, vec![0.1 * (i % 3) as f64, 0.05 * (i % 2) as f64, -0.1]).unwrap())
        .collect();
    // Term 0 is R^λg for every drift, so gaps and errors cover terms 1.. only.
    let eval = |drift: &DriftField| -> Vec<(f64, f64)> {
        let r = neumann_series(drift, g.clone(), LAMBDA, &kp, EPS1, &opts).unwrap();
        probes
            .iter()
            .map(|p| {
                let v = evaluate_series(&r, p).unwrap();
                (v.terms[1..].iter().sum(), v.term_errors[1..].iter().sum())
            })
            .collect()
    };
    let base = eval(&b);
    let mut gaps: Vec<Vec<(f64, f64)>> = Vec::new();
    for n in [2, 4, 8, 16] {
        let v = eval(&mollify_auto(&b, n, EPS1).unwrap());
        gaps.push(v.iter().zip(&base).map(|(a, z)| ((a.0 - z.0).abs(), a.1 + z.1)).collect());
    }
    let mut monotone = true;
    for w in gaps.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            monotone &= b.0 <= a.0 + a.1 + b.1;
        }
    }
    let max_gap: Vec<f64> = gaps.iter().map(|v| v.iter().map(|x| x.0).fold(0.0, f64::max)).collect();
    let max_err = gaps.iter().flatten().map(|x| x.1).fold(0.0, f64::max);
    report(
        11,
        monotone && max_gap[3] < max_gap[0],
        format!(
            "max gap over 10 probes for n = 2, 4, 8, 16: {}; largest combined error {max_err:.1e}",
            max_gap.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

#[test]
fn ac12_zero_drift_law() {
    let _g = serial();
    let cfg = SimConfig::new(SpaceTimePoint::origin(0.0, D), 1.0, 0.01, 100_000, 12, DriftField::zero(D));
    let law = zero_drift_law(&euler_paths(&cfg).unwrap());
    report(
        12,
        law.frobenius_rel_error <= 0.05,
        format!("Frobenius relative error {:.4}", law.frobenius_rel_error),
    );
}
