//! Space-time resolvent `R^λ f(s,x) = ∫_s^∞ e^{-λ(t-s)} ∫ p(s,x;t,y) f(t,y) dy dt`,
//! its gradient, the drift operator `B = b·∇R^λ` and the Neumann series
//! `S^λ g = Σ_k R^λ (B R^λ)^k g`.

mod neumann;
pub(crate) mod tensor;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::field::{Angular, DriftField, ScalarField, SupportBox};
use crate::kato::radial::{angular_cos_mean, angular_mean_scaled};
use crate::kato::{kato_norm, KatoBudget, KatoEstimate, KatoParams};
use crate::kernel::{grad_envelope_constant, KernelParams, SpaceTimePoint};
use crate::quad::{self, adaptive, adaptive_vec, Tolerance};

pub use neumann::{
    drift_multiply_grid, evaluate_series, neumann_series, GriddedDriftApplied, GridSpec, NeumannOptions, NeumannSeriesResult, NeumannSummary, SelfCheck,
    SeriesValue,
};

/// Quadrature budget of point evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventBudget {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Per-axis order of the spatial product rule for closed-form fields.
    pub spatial_order: usize,
    /// Time integrals without compact support stop at `λτ = decay_cut`.
    pub decay_cut: f64,
    /// Gauss–Legendre nodes per time cell for grid-backed fields.
    pub grid_nodes: usize,
}

impl Default for ResolventBudget {
    fn default() -> Self {
        ResolventBudget {
            rel_tol: 1e-7,
            abs_tol: 1e-13,
            max_intervals: 200,
            spatial_order: 12,
            decay_cut: 40.0,
            grid_nodes: 10,
        }
    }
}

/// Scalar value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Gradient with a componentwise error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradEstimate {
    pub value: Vec<f64>,
    pub error: f64,
}

impl GradEstimate {
    pub fn norm(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    /// `N^{α,+}_{2ε₁}(|b|)`.
    pub norm_2eps: KatoEstimate,
    /// `1/(2κC₁)` with `κ = d^{3/2}`.
    pub threshold: f64,
    pub margin: f64,
    pub satisfied: bool,
    pub diagnostic: Option<String>,
}

/// Check `N^{α,+}_{2ε₁}(|b|) < 1/(2κC₁)`.
pub fn smallness_check(b: &DriftField, kernel: &KernelParams, eps1: f64, budget: &KatoBudget) -> Result<SmallnessReport> {
    if !(eps1 > 0.0 && eps1 < 0.5) {
        return Err(config(format!("eps1 must lie in (0, 1/2), got {eps1}")));
    }
    if b.dim() != kernel.d {
        return Err(config("drift dimension does not match kernel dimension"));
    }
    let kappa = (kernel.d as f64).powf(1.5);
    let threshold = 1.0 / (2.0 * kappa * grad_envelope_constant(kernel));
    let est = kato_norm(&b.magnitude(), &KatoParams::new(kernel.alpha, 2.0 * eps1)?, budget)?;
    let diagnostic = est
        .diverged
        .then(|| format!("N(|b|) diverges at horizon {}: probe bound {:.4e}", 2.0 * eps1, est.value));
    Ok(SmallnessReport {
        satisfied: !est.diverged && est.value + est.error < threshold,
        margin: threshold - est.value,
        threshold,
        norm_2eps: est,
        diagnostic,
    })
}

/// Spatial Gaussian average at one time, for the point-evaluation routes.
enum Route<'a> {
    Constant(f64),
    Radial {
        center: Vec<f64>,
        profile: Arc<dyn crate::field::Profile>,
    },
    Product {
        f: &'a dyn ScalarField,
        support: Option<SupportBox>,
    },
}

struct AxisRule {
    y: Vec<f64>,
    w: Vec<f64>,
    wg: Vec<f64>,
}

const WINDOW: f64 = 8.6;

fn axis_rule(x: f64, sigma: f64, bounds: Option<(f64, f64)>, n: usize) -> Option<AxisRule> {
    let (a, b) = (x - WINDOW * sigma, x + WINDOW * sigma);
    match bounds {
        Some((lo, hi)) if a < lo || b > hi => {
            let (lo, hi) = (a.max(lo), b.min(hi));
            if hi <= lo {
                return None;
            }
            let panels = ((hi - lo) / (4.3 * sigma)).ceil().clamp(1.0, 4.0) as usize;
            let mut r = AxisRule {
                y: Vec::new(),
                w: Vec::new(),
                wg: Vec::new(),
            };
            for (y, w) in quad::composite_legendre(n, lo, hi, &[], panels) {
                let z = (y - x) / sigma;
                let wd = w * quad::normal_pdf(z) / sigma;
                r.y.push(y);
                r.w.push(wd);
                r.wg.push(wd * z / sigma);
            }
            Some(r)
        }
        _ => {
            let rule = quad::hermite_normal(n);
            Some(AxisRule {
                y: rule.iter().map(|(z, _)| x + sigma * z).collect(),
                w: rule.iter().map(|(_, w)| *w).collect(),
                wg: rule.iter().map(|(z, w)| w * z / sigma).collect(),
            })
        }
    }
}

/// `E[f(t, x+σZ)]` and `∇_x` of it by a per-axis product rule; `out = [v, ∇v]`.
fn product_average(f: &dyn ScalarField, support: &Option<SupportBox>, t: f64, x: &[f64], sigma: f64, n: usize, grad: bool, out: &mut [f64]) {
    out.fill(0.0);
    let d = x.len();
    let mut rules = Vec::with_capacity(d);
    for j in 0..d {
        let bounds = support.as_ref().map(|b| (b.lo[j], b.hi[j]));
        match axis_rule(x[j], sigma, bounds, n) {
            Some(r) => rules.push(r),
            None => return,
        }
    }
    let mut idx = vec![0usize; d];
    let mut y = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for j in 0..d {
            y[j] = rules[j].y[idx[j]];
            w *= rules[j].w[idx[j]];
        }
        let v = f.value(t, &y);
        if v != 0.0 && v.is_finite() {
            out[0] += w * v;
            if grad {
                for j in 0..d {
                    let mut wp = rules[j].wg[idx[j]];
                    for (k, r) in rules.iter().enumerate() {
                        if k != j {
                            wp *= r.w[idx[k]];
                        }
                    }
                    out[1 + j] += wp * v;
                }
            }
        }
        let mut j = 0;
        loop {
            if j == d {
                return;
            }
            idx[j] += 1;
            if idx[j] < rules[j].y.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Radial route: `[v, ∂_e v]` where `e` points from the center to `x`.
fn radial_average(profile: &dyn crate::field::Profile, d: usize, a: f64, t: f64, sigma: f64, grad: bool) -> (f64, f64) {
    let s2 = sigma * sigma;
    let lo = (a - WINDOW * sigma).max(0.0);
    let hi = a + WINDOW * sigma;
    let mut breaks = profile.radial_breaks(t);
    breaks.push(a);
    let norm = quad::sphere_area(d) * (2.0 * std::f64::consts::PI * s2).powf(-0.5 * d as f64);
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-10,
        max_intervals: 200,
    };
    let v = adaptive(
        |rho| {
            let psi = profile.value(t, rho);
            if psi == 0.0 || !psi.is_finite() {
                return 0.0;
            }
            let beta = a * rho / s2;
            rho.powi(d as i32 - 1) * psi * (-(rho - a) * (rho - a) / (2.0 * s2)).exp() * angular_mean_scaled(d, Angular::Uniform, beta)
        },
        lo,
        hi,
        &breaks,
        tol,
    );
    let g = if grad && a > 0.0 {
        adaptive(
            |rho| {
                let psi = profile.value(t, rho);
                if psi == 0.0 || !psi.is_finite() {
                    return 0.0;
                }
                let beta = a * rho / s2;
                let m = angular_mean_scaled(d, Angular::Uniform, beta);
                let mc = angular_cos_mean(d, beta);
                rho.powi(d as i32 - 1) * psi * (-(rho - a) * (rho - a) / (2.0 * s2)).exp() * (rho * mc - a * m) / s2
            },
            lo,
            hi,
            &breaks,
            tol,
        )
        .value
    } else {
        0.0
    };
    (norm * v.value, norm * g)
}

fn time_window(f: &dyn ScalarField, lambda: f64, s: f64, budget: &ResolventBudget) -> Result<(f64, f64, f64)> {
    let cut = budget.decay_cut / lambda;
    let (lo, hi) = match f.support() {
        Some(b) => ((b.t[0] - s).max(0.0), (b.t[1] - s).min(cut)),
        None => (0.0, cut),
    };
    let clipped = f.support().map_or(true, |b| b.t[1] - s > cut);
    let tail = if clipped {
        let sup = f
            .sup_norm()
            .ok_or_else(|| config("field without time support must declare a sup norm"))?;
        sup * (-budget.decay_cut).exp() / lambda
    } else {
        0.0
    };
    Ok((lo, hi, tail))
}

/// Components `[R f, ∂_1 R f, …]` (gradient only when requested) and an error bound.
fn resolve(f: &dyn ScalarField, lambda: f64, p: &SpaceTimePoint, budget: &ResolventBudget, grad: bool) -> Result<(Vec<f64>, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    let d = f.dim();
    if p.x.len() != d {
        return Err(config("evaluation point dimension does not match field"));
    }
    if let Some(g) = f.as_grid() {
        let out = tensor::smooth_grid(g, lambda, &tensor::Targets::point(p), budget.grid_nodes, grad);
        let mut v = vec![out.values[0]];
        if grad {
            v.extend(&out.grads);
        }
        return Ok((v, out.error));
    }
    let route = if let Some(m) = f.constant_value() {
        Route::Constant(m)
    } else if let Some(r) = f.radial().filter(|r| r.angular == Angular::Uniform) {
        Route::Radial {
            center: r.center,
            profile: r.profile,
        }
    } else {
        Route::Product { f, support: f.support() }
    };
    let (lo, hi, tail) = time_window(f, lambda, p.s, budget)?;
    if hi <= lo {
        return Ok((vec![0.0; if grad { d + 1 } else { 1 }], tail));
    }
    let mut ub: Vec<f64> = f
        .time_breaks()
        .into_iter()
        .filter(|&t| t > p.s + lo && t < p.s + hi)
        .map(|t| (t - p.s).sqrt())
        .collect();
    ub.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_out = if grad { d + 1 } else { 1 };
    // The last component integrates the discrepancy between two spatial orders.
    let m = n_out + 1;
    let n_hi = budget.spatial_order.max(3);
    let n_lo = ((7 * n_hi) / 10).max(2);
    let (radial_a, radial_e) = match &route {
        Route::Radial { center, .. } => {
            let diff: Vec<f64> = p.x.iter().zip(center).map(|(x, c)| x - c).collect();
            let a = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            let e = if a > 0.0 { diff.iter().map(|v| v / a).collect() } else { vec![0.0; d] };
            (a, e)
        }
        _ => (0.0, Vec::new()),
    };
    let mut hi_buf = vec![0.0; d + 1];
    let mut lo_buf = vec![0.0; d + 1];
    let integrand = |u: f64, out: &mut [f64]| {
        out.fill(0.0);
        let tau = u * u;
        let t = p.s + tau;
        let w = 2.0 * u * (-lambda * tau).exp();
        if w == 0.0 || u == 0.0 {
            return;
        }
        match &route {
            Route::Constant(c) => out[0] = w * c,
            Route::Radial { profile, .. } => {
                let (v, g) = radial_average(profile.as_ref(), d, radial_a, t, u, grad);
                out[0] = w * v;
                if grad {
                    for j in 0..d {
                        out[1 + j] = w * g * radial_e[j];
                    }
                }
            }
            Route::Product { f, support } => {
                product_average(*f, support, t, &p.x, u, n_hi, grad, &mut hi_buf);
                product_average(*f, support, t, &p.x, u, n_lo, grad, &mut lo_buf);
                let mut disc = 0.0f64;
                for k in 0..n_out {
                    out[k] = w * hi_buf[k];
                    disc = disc.max((hi_buf[k] - lo_buf[k]).abs());
                }
                out[n_out] = w * disc;
            }
        }
    };
    let tol = Tolerance {
        abs: budget.abs_tol,
        rel: budget.rel_tol,
        max_intervals: budget.max_intervals,
    };
    let (v, e) = adaptive_vec(integrand, m, lo.sqrt(), hi.sqrt(), &ub, tol);
    let err = e[..n_out].iter().fold(0.0f64, |a, b| a.max(*b)) + v[n_out].abs() + tail;
    Ok((v[..n_out].to_vec(), err))
}

/// `R^λ f(p)`.
pub fn resolvent_apply(f: &dyn ScalarField, lambda: f64, p: &SpaceTimePoint, budget: &ResolventBudget) -> Result<Estimate> {
    let (v, e) = resolve(f, lambda, p, budget, false)?;
    Ok(Estimate { value: v[0], error: e })
}

/// `∇_x R^λ f(p)`, integrating against the exact kernel gradient.
pub fn resolvent_grad(f: &dyn ScalarField, lambda: f64, p: &SpaceTimePoint, budget: &ResolventBudget) -> Result<GradEstimate> {
    let (v, e) = resolve(f, lambda, p, budget, true)?;
    Ok(GradEstimate {
        value: v[1..].to_vec(),
        error: e,
    })
}

/// `(s, x) ↦ b(s, x)·∇R^λ g(s, x)`, supported on `supp(b)`.
pub struct DriftApplied {
    b: DriftField,
    g: Arc<dyn ScalarField>,
    lambda: f64,
    budget: ResolventBudget,
}

impl ScalarField for DriftApplied {
    fn dim(&self) -> usize {
        self.b.dim()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        let bv = self.b.eval_vec(t, y);
        if bv.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let p = SpaceTimePoint { s: t, x: y.to_vec() };
        match resolvent_grad(self.g.as_ref(), self.lambda, &p, &self.budget) {
            Ok(gr) => bv.iter().zip(&gr.value).map(|(a, b)| a * b).sum(),
            Err(_) => f64::NAN,
        }
    }
    fn support(&self) -> Option<SupportBox> {
        self.b.support()
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.b.time_breaks()
    }
    fn sup_norm(&self) -> Option<f64> {
        if self.b.sup_norm() == Some(0.0) || self.g.constant_value().is_some() {
            Some(0.0)
        } else {
            None
        }
    }
}

/// The drift operator `B R^λ g = b·∇R^λ g`.
pub fn drift_multiply(b: &DriftField, g: Arc<dyn ScalarField>, lambda: f64, budget: &ResolventBudget) -> Result<DriftApplied> {
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if b.dim() != g.dim() {
        return Err(config("drift and field dimensions differ"));
    }
    Ok(DriftApplied {
        b: b.clone(),
        g,
        lambda,
        budget: *budget,
    })
}

impl From<SmallnessReport> for Error {
    fn from(r: SmallnessReport) -> Self {
        Error::Smallness(Box::new(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ConstantScalar, SmoothBump};

    #[test]
    fn constant_field_gives_inverse_rate() {
        let f = ConstantScalar::new(3, 1.0);
        let r = resolvent_apply(&f, 2.0, &SpaceTimePoint::origin(0.3, 3), &ResolventBudget::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12 + r.error, "{r:?}");
        let g = resolvent_grad(&f, 2.0, &SpaceTimePoint::origin(0.3, 3), &ResolventBudget::default()).unwrap();
        assert!(g.norm() == 0.0);
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let f = ConstantScalar::new(3, 1.0);
        assert!(matches!(
            resolvent_apply(&f, 0.0, &SpaceTimePoint::origin(0.0, 3), &ResolventBudget::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bump_gradient_matches_central_difference() {
        let f = SmoothBump::new(1.0, 0.5, vec![0.2, 0.0, -0.1], 0.4, 1.0);
        let bud = ResolventBudget::default();
        let p = SpaceTimePoint::new(0.3, vec![0.1, 0.3, 0.0]).unwrap();
        let g = resolvent_grad(&f, 1.0, &p, &bud).unwrap();
        let h = 1e-3;
        for j in 0..3 {
            let mut a = p.clone();
            let mut b = p.clone();
            a.x[j] += h;
            b.x[j] -= h;
            let fd = (resolvent_apply(&f, 1.0, &a, &bud).unwrap().value - resolvent_apply(&f, 1.0, &b, &bud).unwrap().value) / (2.0 * h);
            assert!((fd - g.value[j]).abs() <= 1e-4 * g.norm(), "axis {j}: {fd} vs {}", g.value[j]);
        }
    }
}
