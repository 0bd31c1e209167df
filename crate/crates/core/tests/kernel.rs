use fkdrift_core::kernel::{
    grad_envelope, heat_kernel, heat_kernel_grad, minimal_grad_constant, resolvent_grad_constant, KernelParams, SpaceTimePoint,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(s: f64, x: &[f64]) -> SpaceTimePoint {
    SpaceTimePoint::new(s, x.to_vec()).unwrap()
}

/// Composite trapezoid over the cube `center ± half` in three dimensions.
fn cube_integral(center: &[f64; 3], half: f64, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 2.0 * half / n as f64;
    let w = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    let mut y = [0.0; 3];
    for i in 0..=n {
        y[0] = center[0] - half + i as f64 * h;
        for j in 0..=n {
            y[1] = center[1] - half + j as f64 * h;
            for k in 0..=n {
                y[2] = center[2] - half + k as f64 * h;
                acc += w(i) * w(j) * w(k) * f(&y);
            }
        }
    }
    acc * h * h * h
}

#[test]
fn kernel_factorises_into_one_dimensional_gaussians() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let tau: f64 = rng.gen_range(1e-3..5.0);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let oracle: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (-(a - b) * (a - b) / (2.0 * tau)).exp() / (2.0 * std::f64::consts::PI * tau).sqrt())
            .product();
        let v = heat_kernel(&pt(0.2, &x), &pt(0.2 + tau, &y)).unwrap();
        assert!((v - oracle).abs() <= 1e-13 * oracle + 1e-300, "{v} vs {oracle}");
    }
}

#[test]
fn kernel_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let tau: f64 = rng.gen_range(0.01..2.0);
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let p = pt(0.0, &x);
        let mass = cube_integral(&x, 9.0 * tau.sqrt(), 60, |y| heat_kernel(&p, &pt(tau, y)).unwrap());
        assert!((mass - 1.0).abs() < 1e-6, "tau {tau}: mass {mass}");
    }
}

#[test]
fn chapman_kolmogorov() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let s = rng.gen_range(0.0..0.5);
        let u = s + rng.gen_range(0.05..1.0);
        let t = u + rng.gen_range(0.05..1.0);
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        // The integrand in z is Gaussian with this mean and variance.
        let (a, b) = (u - s, t - u);
        let mean: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| xi + a / (a + b) * (yi - xi)).collect();
        let sd = (a * b / (a + b)).sqrt();
        let (p, q) = (pt(s, &x), pt(t, &y));
        let lhs = cube_integral(&[mean[0], mean[1], mean[2]], 9.0 * sd, 64, |z| {
            let mid = pt(u, z);
            heat_kernel(&p, &mid).unwrap() * heat_kernel(&mid, &q).unwrap()
        });
        let rhs = heat_kernel(&p, &q).unwrap();
        assert!((lhs - rhs).abs() <= 1e-5 * rhs, "{lhs} vs {rhs}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let tau: f64 = rng.gen_range(0.01..3.0);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = heat_kernel_grad(&pt(0.0, &x), &pt(tau, &y)).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-4 * tau.sqrt();
        for j in 0..3 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (heat_kernel(&pt(0.0, &a), &pt(tau, &y)).unwrap() - heat_kernel(&pt(0.0, &b), &pt(tau, &y)).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * norm + 1e-300, "axis {j}: {fd} vs {}", g[j]);
        }
    }
}

#[test]
fn c_lambda_matches_integrated_envelope() {
    let kp = KernelParams::new(3, 0.25).unwrap();
    let c1 = fkdrift_core::kernel::grad_envelope_constant(&kp);
    for lambda in [0.5, 1.0, 4.0] {
        // ∫ e^{-λτ} ∫ C₁ τ^{-2} e^{-α|y|²/τ} dy dτ, space first in closed form
        // (π τ/α)^{3/2}, time by midpoint rule in u = √τ.
        let n = 200_000;
        let top = (60.0 / lambda as f64).sqrt();
        let du = top / n as f64;
        let time: f64 = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) * du;
                2.0 * (-lambda * u * u).exp() * du
            })
            .sum();
        let oracle = c1 * (std::f64::consts::PI / 0.25f64).powf(1.5) * time;
        let c = resolvent_grad_constant(&kp, lambda).unwrap();
        assert!((c - oracle).abs() < 1e-8 * oracle, "{c} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_dominates_gradient(
        d in 3usize..7,
        alpha in 0.02f64..0.49,
        log_tau in -5.0f64..1.5,
        z in 0.0f64..8.0,
    ) {
        let kp = KernelParams::new(d, alpha).unwrap();
        let tau = 10f64.powf(log_tau);
        let mut y = vec![0.0; d];
        y[0] = z * tau.sqrt();
        let g = heat_kernel_grad(&SpaceTimePoint::origin(0.0, d), &pt(tau, &y)).unwrap();
        let mag = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = minimal_grad_constant(&kp) * grad_envelope(&kp, tau, y[0] * y[0]);
        prop_assert!(mag <= bound * (1.0 + 1e-12), "{} > {}", mag, bound);
    }

    #[test]
    fn minimal_constant_is_attained(d in 3usize..7, alpha in 0.02f64..0.49) {
        // The ratio |∇p|/envelope peaks at |x - y|² = τ/(1 - 2α).
        let kp = KernelParams::new(d, alpha).unwrap();
        let tau = 0.3;
        let r = (tau / (1.0 - 2.0 * alpha)).sqrt();
        let mut y = vec![0.0; d];
        y[0] = r;
        let g = heat_kernel_grad(&SpaceTimePoint::origin(0.0, d), &pt(tau, &y)).unwrap();
        let ratio = g[0].abs() / grad_envelope(&kp, tau, r * r);
        prop_assert!((ratio / minimal_grad_constant(&kp) - 1.0).abs() < 1e-12);
    }
}
