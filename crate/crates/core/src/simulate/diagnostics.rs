use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{euler_paths, mean_se, PathEnsemble, SimConfig};
use crate::error::{config, domain, Error, Result};
use crate::field::{DriftField, ScalarField};
use crate::resolvent::{drift_multiply_grid, resolvent_apply, Estimate, GridSpec, ResolventBudget};

/// Default horizon requirement: the truncated tail `e^{-λ(T-s)}‖g‖_∞/λ` must
/// stay below this fraction of `‖g‖_∞/λ`.
pub const TRUNCATION_FRACTION: f64 = 1e-2;

/// Monte Carlo mean with its standard error and deterministic truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub truncation: f64,
    pub n_paths: usize,
}

fn truncation_bound(g: &dyn ScalarField, lambda: f64, s: f64, horizon: f64) -> Result<f64> {
    let sup = g
        .sup_norm()
        .ok_or_else(|| config("g must be bounded with a declared sup norm"))?;
    if sup == 0.0 || g.support().is_some_and(|b| b.t[1] <= horizon) {
        return Ok(0.0);
    }
    Ok((-lambda * (horizon - s)).exp() * sup / lambda)
}

/// Per-path trapezoidal `∫_s^T e^{-λ(t-s)} g(t, X_t) dt`.
fn path_integral(g: &dyn ScalarField, lambda: f64, ens: &PathEnsemble, states: &[f64]) -> f64 {
    let d = ens.d;
    let s = ens.start.s;
    let mut acc = 0.0;
    let mut prev = g.value(s, &states[..d]);
    for k in 1..ens.times.len() {
        let t = ens.times[k];
        let cur = (-lambda * (t - s)).exp() * g.value(t, &states[k * d..(k + 1) * d]);
        acc += 0.5 * (prev + cur);
        prev = cur;
    }
    acc * ens.dt
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("lambda must be positive, got {lambda}")))
    }
}

/// `E[∫_s^∞ e^{-λ(t-s)} g(t, X_t) dt]` truncated at the horizon, refusing
/// horizons whose truncation exceeds `fraction · ‖g‖_∞/λ`.
pub fn discounted_functional_with(ens: &PathEnsemble, g: &dyn ScalarField, lambda: f64, fraction: f64) -> Result<McEstimate> {
    check_lambda(lambda)?;
    if g.dim() != ens.d {
        return Err(config("field and ensemble dimensions differ"));
    }
    let truncation = truncation_bound(g, lambda, ens.start.s, ens.horizon())?;
    let sup = g.sup_norm().unwrap_or(0.0);
    if truncation > fraction * sup / lambda {
        let need = (1.0 / fraction).ln() / lambda;
        return Err(Error::Horizon(format!(
            "truncation bound {truncation:.3e} at T - s = {:.3}; lambda = {lambda} needs T - s >= {need:.3}",
            ens.horizon() - ens.start.s
        )));
    }
    let v = ens.map_paths(|_, st| path_integral(g, lambda, ens, st));
    let (mean, se) = mean_se(&v);
    Ok(McEstimate {
        mean,
        se,
        truncation,
        n_paths: ens.n_paths,
    })
}

/// [`discounted_functional_with`] at [`TRUNCATION_FRACTION`].
pub fn discounted_functional(ens: &PathEnsemble, g: &dyn ScalarField, lambda: f64) -> Result<McEstimate> {
    discounted_functional_with(ens, g, lambda, TRUNCATION_FRACTION)
}

/// `S_n^λ f - R^λ f - S_n^λ B_n R^λ f` at the ensemble's start point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// Monte Carlo `S_n^λ f`.
    pub s_f: McEstimate,
    /// Quadrature `R^λ f`.
    pub r_f: Estimate,
    /// Monte Carlo `S_n^λ (B_n R^λ f)` on the same paths.
    pub correction: McEstimate,
    pub residual: f64,
    /// Standard error of the per-path difference of the two functionals.
    pub se: f64,
    /// Quadrature, tabulation and truncation contributions.
    pub bias_bound: f64,
}

impl IdentityResidual {
    pub fn within(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.se + self.bias_bound
    }
}

/// Residual of `S_n^λ f - R^λ f = S_n^λ B_n R^λ f` with both Monte Carlo
/// terms taken from the same ensemble.
pub fn resolvent_identity_residual(
    ens: &PathEnsemble,
    b_n: &DriftField,
    g: Arc<dyn ScalarField>,
    lambda: f64,
    budget: &ResolventBudget,
) -> Result<IdentityResidual> {
    check_lambda(lambda)?;
    let zero = McEstimate {
        mean: 0.0,
        se: 0.0,
        truncation: 0.0,
        n_paths: ens.n_paths,
    };
    if g.sup_norm() == Some(0.0) {
        return Ok(IdentityResidual {
            s_f: zero,
            r_f: Estimate { value: 0.0, error: 0.0 },
            correction: zero,
            residual: 0.0,
            se: 0.0,
            bias_bound: 0.0,
        });
    }
    let r_f = resolvent_apply(g.as_ref(), lambda, &ens.start, budget)?;
    let bg = drift_multiply_grid(b_n, g.as_ref(), lambda, &GridSpec::default(), ens.seed)?;
    let t_f = truncation_bound(g.as_ref(), lambda, ens.start.s, ens.horizon())?;
    let t_c = if b_n.sup_norm() == Some(0.0) {
        0.0
    } else {
        truncation_bound(&bg, lambda, ens.start.s, ens.horizon()).unwrap_or(f64::INFINITY)
    };
    let sup = g.sup_norm().unwrap_or(0.0);
    if t_f > TRUNCATION_FRACTION * sup / lambda {
        return Err(Error::Horizon(format!("truncation bound {t_f:.3e} for lambda = {lambda}")));
    }
    let pairs = ens.map_paths(|_, st| {
        let f = path_integral(g.as_ref(), lambda, ens, st);
        let c = path_integral(&bg, lambda, ens, st);
        [f, c]
    });
    let fs: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
    let cs: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p[0] - p[1]).collect();
    let abs_c: Vec<f64> = cs.iter().map(|c| c.abs()).collect();
    let (mf, sf) = mean_se(&fs);
    let (mc, sc) = mean_se(&cs);
    let (md, sd) = mean_se(&diff);
    let (mabs, _) = mean_se(&abs_c);
    let bias_bound = r_f.error + bg.interpolation_error * mabs + bg.quadrature_error / lambda + t_f + t_c;
    Ok(IdentityResidual {
        s_f: McEstimate {
            mean: mf,
            se: sf,
            truncation: t_f,
            n_paths: ens.n_paths,
        },
        r_f,
        correction: McEstimate {
            mean: mc,
            se: sc,
            truncation: t_c,
            n_paths: ens.n_paths,
        },
        residual: md - r_f.value,
        se: sd,
        bias_bound,
    })
}

/// A `C²` test function on `R^d` with compact support.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], out: &mut [f64]);
    fn laplacian(&self, x: &[f64]) -> f64;
}

/// `A exp(1 - 1/(1 - |x-c|²/R²))` on `|x - c| < R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpTest {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl BumpTest {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        BumpTest {
            center,
            radius,
            amplitude,
        }
    }

    /// `(u, e)` with `u = |x-c|²/R²` and `e = A exp(1 - 1/(1-u))`.
    fn core(&self, x: &[f64]) -> Option<(f64, f64)> {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum();
        let u = r2 / (self.radius * self.radius);
        (u < 1.0).then(|| (u, self.amplitude * (1.0 - 1.0 / (1.0 - u)).exp()))
    }
}

impl TestFunction for BumpTest {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.core(x).map_or(0.0, |(_, e)| e)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self.core(x) {
            None => out.fill(0.0),
            Some((u, e)) => {
                // ∇e = e · (-(1-u)^{-2}) · 2(x-c)/R².
                let k = -e / (1.0 - u).powi(2) * 2.0 / (self.radius * self.radius);
                for ((o, a), c) in out.iter_mut().zip(x).zip(&self.center) {
                    *o = k * (a - c);
                }
            }
        }
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let Some((u, e)) = self.core(x) else { return 0.0 };
        // e = A exp(φ(u)), φ' = -(1-u)^{-2}, φ'' = -2(1-u)^{-3}, ∇u = 2(x-c)/R².
        let r2 = self.radius * self.radius;
        let d = self.center.len() as f64;
        let p1 = -1.0 / (1.0 - u).powi(2);
        let p2 = -2.0 / (1.0 - u).powi(3);
        let grad_u2 = 4.0 * u / r2;
        let lap_u = 2.0 * d / r2;
        e * ((p2 + p1 * p1) * grad_u2 + p1 * lap_u)
    }
}

/// Martingale defects `E[f(X_t) - f(X_s) - ∫_s^t (½Δf + b·∇f)(u, X_u) du]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefectCurve {
    /// Grid times nearest to the requested checkpoints.
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub dt: f64,
    /// `n_paths × checkpoints`, path-major.
    #[serde(skip)]
    pub per_path: Vec<f64>,
}

/// Defects at `checkpoints`, with the generator integral taken by the
/// left-endpoint rule of the Euler scheme.
pub fn martingale_defect(ens: &PathEnsemble, f: &dyn TestFunction, checkpoints: &[f64]) -> Result<DefectCurve> {
    if f.dim() != ens.d {
        return Err(config("test function and ensemble dimensions differ"));
    }
    let s = ens.start.s;
    let mut idx = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        if !(t > s && t <= ens.horizon() + 1e-12) {
            return Err(domain(format!("checkpoint {t} lies outside ({s}, {}]", ens.horizon())));
        }
        idx.push((((t - s) / ens.dt).round() as usize).clamp(1, ens.steps()));
    }
    let d = ens.d;
    let nc = idx.len();
    let last = idx.iter().copied().max().unwrap_or(0);
    let rows = ens.map_paths(|_, st| {
        let f0 = f.value(&st[..d]);
        let mut bv = vec![0.0; d];
        let mut gv = vec![0.0; d];
        let mut integral = Vec::with_capacity(last + 1);
        integral.push(0.0);
        let mut acc = 0.0;
        for k in 0..last {
            let x = &st[k * d..(k + 1) * d];
            ens.drift().eval(ens.times[k], x, &mut bv);
            f.grad(x, &mut gv);
            let bg: f64 = bv.iter().zip(&gv).map(|(a, b)| a * b).sum();
            acc += (0.5 * f.laplacian(x) + bg) * ens.dt;
            integral.push(acc);
        }
        idx.iter()
            .map(|&k| f.value(&st[k * d..(k + 1) * d]) - f0 - integral[k])
            .collect::<Vec<f64>>()
    });
    let per_path: Vec<f64> = rows.into_iter().flatten().collect();
    let mut mean = Vec::with_capacity(nc);
    let mut se = Vec::with_capacity(nc);
    for c in 0..nc {
        let col: Vec<f64> = per_path.iter().skip(c).step_by(nc).copied().collect();
        let (m, e) = mean_se(&col);
        mean.push(m);
        se.push(e);
    }
    Ok(DefectCurve {
        times: idx.iter().map(|&k| ens.times[k]).collect(),
        mean,
        se,
        dt: ens.dt,
        per_path,
    })
}

/// Defects on coupled ensembles at `dt, dt/2, …` and their paired differences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BiasReport {
    pub dts: Vec<f64>,
    pub curves: Vec<DefectCurve>,
    /// `D(dt_l) - D(dt_{l+1})` per checkpoint.
    pub diff_mean: Vec<Vec<f64>>,
    pub diff_se: Vec<Vec<f64>>,
    /// First-order Richardson bias `2 (D(dt_l) - D(dt_{l+1}))` of level `l`.
    pub bias: Vec<Vec<f64>>,
    /// `Σ|diff_l| / Σ|diff_{l+1}|`: how much the bias shrinks per halving.
    pub shrink: Vec<f64>,
}

impl BiasReport {
    /// Whether every defect of level `l` lies within `k` standard errors plus
    /// the measured bias (itself widened by `k` of its standard errors).
    pub fn within(&self, l: usize, k: f64) -> bool {
        let Some(bias) = self.bias.get(l) else { return false };
        let c = &self.curves[l];
        c.mean
            .iter()
            .zip(&c.se)
            .enumerate()
            .all(|(i, (m, s))| m.abs() <= k * s + bias[i].abs() + 2.0 * k * self.diff_se[l][i])
    }
}

/// Martingale defects at `levels ≥ 3` successive halvings of `cfg.dt`,
/// all driven by the same Brownian paths.
pub fn defect_bias(cfg: &SimConfig, f: &dyn TestFunction, checkpoints: &[f64], levels: usize) -> Result<BiasReport> {
    if levels < 3 {
        return Err(config("bias measurement needs at least three step sizes"));
    }
    let mut curves = Vec::with_capacity(levels);
    for l in 0..levels {
        let ens = euler_paths(&cfg.refined(l as u32))?;
        curves.push(martingale_defect(&ens, f, checkpoints)?);
    }
    let nc = checkpoints.len();
    let mut diff_mean = Vec::new();
    let mut diff_se = Vec::new();
    for l in 0..levels - 1 {
        let (a, b) = (&curves[l].per_path, &curves[l + 1].per_path);
        let mut dm = Vec::with_capacity(nc);
        let mut ds = Vec::with_capacity(nc);
        for c in 0..nc {
            let col: Vec<f64> = a
                .iter()
                .zip(b)
                .skip(c)
                .step_by(nc)
                .map(|(x, y)| x - y)
                .collect();
            let (m, e) = mean_se(&col);
            dm.push(m);
            ds.push(e);
        }
        diff_mean.push(dm);
        diff_se.push(ds);
    }
    let bias = diff_mean.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
    let shrink = (0..levels - 2)
        .map(|l| {
            let a: f64 = diff_mean[l].iter().map(|x| x.abs()).sum();
            let b: f64 = diff_mean[l + 1].iter().map(|x| x.abs()).sum();
            if b > 0.0 {
                a / b
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(BiasReport {
        dts: curves.iter().map(|c| c.dt).collect(),
        curves,
        diff_mean,
        diff_se,
        bias,
        shrink,
    })
}

/// Path oscillation statistics over windows of length `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub beta: f64,
    pub delta: f64,
    pub window_steps: usize,
    /// `P(sup_{|t-t'| ≤ δ} |X_t - X_{t'}| > β)` over the whole horizon.
    pub probability: f64,
    pub se: f64,
    /// `P(sup_{s ≤ t ≤ s+δ} |X_t - x| > β)`.
    pub start_probability: f64,
    pub start_se: f64,
}

/// Empirical exceedance probabilities of the windowed oscillation.
pub fn modulus_diagnostic(ens: &PathEnsemble, beta: f64, delta: f64) -> Result<ModulusReport> {
    if !(beta > 0.0) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    if !(delta >= ens.dt * (1.0 - 1e-9)) {
        return Err(domain(format!("delta {delta} is shorter than the step {}", ens.dt)));
    }
    let m = ((delta / ens.dt) + 1e-9).floor() as usize;
    let d = ens.d;
    let n = ens.times.len();
    let b2 = beta * beta;
    let rows = ens.map_paths(|_, st| {
        let dist2 = |a: usize, b: usize| -> f64 {
            (0..d).map(|j| (st[a * d + j] - st[b * d + j]).powi(2)).sum()
        };
        let start = (1..=m.min(n - 1)).any(|k| dist2(k, 0) > b2);
        let any = start || (0..n).any(|k| (k + 1..=(k + m).min(n - 1)).any(|j| dist2(j, k) > b2));
        [any as u8 as f64, start as u8 as f64]
    });
    let a: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let s: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let (p, pse) = mean_se(&a);
    let (q, qse) = mean_se(&s);
    Ok(ModulusReport {
        beta,
        delta,
        window_steps: m,
        probability: p,
        se: pse,
        start_probability: q,
        start_se: qse,
    })
}

fn normal_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Reflection-principle bound on `P(sup_{u ≤ δ} |W_u| > β)` for Brownian
/// motion in R^d: some coordinate must exceed `β/√d`.
pub fn modulus_start_bound(d: usize, beta: f64, delta: f64) -> f64 {
    let c = beta / (d as f64).sqrt();
    (4.0 * d as f64 * normal_tail(c / delta.sqrt())).min(1.0)
}

/// Bound on `P(sup_{|t-t'| ≤ δ, t,t' ∈ [0,T]} |W_t - W_{t'}| > β)`: every such
/// pair lies in one of `⌈T/δ⌉` windows of length `2δ`, where the path must
/// leave the ball of radius `β/2` about the window's start.
pub fn modulus_window_bound(d: usize, beta: f64, delta: f64, span: f64) -> f64 {
    let windows = (span / delta).ceil();
    (windows * modulus_start_bound(d, 0.5 * beta, 2.0 * delta)).min(1.0)
}

/// Summary of the per-path occupation integrals `∫|b(u, X_u)| du`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationStats {
    pub mean: f64,
    pub median: f64,
    pub q99: f64,
    pub max: f64,
}

impl OccupationStats {
    pub fn of(ens: &PathEnsemble) -> Self {
        let mut v = ens.occupation.clone();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        OccupationStats {
            mean: mean_se(&v).0,
            median: q(0.5),
            q99: q(0.99),
            max: *v.last().unwrap(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationRow {
    pub order: usize,
    /// `E[∫ e^{-λ(t-s)} |b_n(t, X_t)| dt]` per λ.
    pub values: Vec<McEstimate>,
    pub strictly_decreasing: bool,
    pub occupation: OccupationStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationTable {
    pub lambdas: Vec<f64>,
    pub rows: Vec<OccupationRow>,
    /// Largest `|v_i - v_{i+1}| / √(se_i² + se_{i+1}²)` between consecutive
    /// orders at equal λ.
    pub max_spread_z: f64,
}

/// Discounted occupation of `|b_n|` for each `(n, b_n)`, every order on its
/// own independent noise.
pub fn occupation_decay(family: &[(usize, DriftField)], lambdas: &[f64], template: &SimConfig) -> Result<OccupationTable> {
    for &l in lambdas {
        check_lambda(l)?;
    }
    let mut rows = Vec::with_capacity(family.len());
    for (i, (n, b)) in family.iter().enumerate() {
        let cfg = template
            .with_drift(b.clone())
            .with_seed(template.seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        let ens = euler_paths(&cfg)?;
        let mag = b.magnitude();
        let mut values = Vec::with_capacity(lambdas.len());
        if b.sup_norm() == Some(0.0) {
            values.resize(
                lambdas.len(),
                McEstimate {
                    mean: 0.0,
                    se: 0.0,
                    truncation: 0.0,
                    n_paths: ens.n_paths,
                },
            );
        } else {
            for &l in lambdas {
                values.push(discounted_functional(&ens, &mag, l)?);
            }
        }
        let strictly_decreasing = values.windows(2).all(|w| w[1].mean < w[0].mean);
        rows.push(OccupationRow {
            order: *n,
            values,
            strictly_decreasing,
            occupation: OccupationStats::of(&ens),
        });
    }
    let mut max_spread_z: f64 = 0.0;
    for w in rows.windows(2) {
        for (a, b) in w[0].values.iter().zip(&w[1].values) {
            let se = (a.se * a.se + b.se * b.se).sqrt();
            let diff = (a.mean - b.mean).abs();
            let z = if se > 0.0 {
                diff / se
            } else if diff > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_spread_z = max_spread_z.max(z);
        }
    }
    Ok(OccupationTable {
        lambdas: lambdas.to_vec(),
        rows,
        max_spread_z,
    })
}

/// Mean and covariance of `X_T - x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalMoments {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// `d × d`, row-major.
    pub covariance: Vec<f64>,
}

pub fn terminal_moments(ens: &PathEnsemble) -> TerminalMoments {
    let d = ens.d;
    let n = ens.steps();
    let disp: Vec<Vec<f64>> = ens.map_paths(|_, st| (0..d).map(|j| st[n * d + j] - ens.start.x[j]).collect());
    let mut mean = Vec::with_capacity(d);
    let mut mean_se_v = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = disp.iter().map(|v| v[j]).collect();
        let (m, e) = mean_se(&col);
        mean.push(m);
        mean_se_v.push(e);
    }
    let denom = (disp.len().max(2) - 1) as f64;
    let mut covariance = vec![0.0; d * d];
    for a in 0..d {
        for b in a..d {
            let prods: Vec<f64> = disp.iter().map(|v| (v[a] - mean[a]) * (v[b] - mean[b])).collect();
            let c = crate::quad::pairwise_sum(&prods) / denom;
            covariance[a * d + b] = c;
            covariance[b * d + a] = c;
        }
    }
    TerminalMoments {
        mean,
        mean_se: mean_se_v,
        covariance,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroDriftLaw {
    pub moments: TerminalMoments,
    /// `‖C - (T-s) I‖_F / ‖(T-s) I‖_F`.
    pub frobenius_rel_error: f64,
}

pub fn zero_drift_law(ens: &PathEnsemble) -> ZeroDriftLaw {
    let moments = terminal_moments(ens);
    let d = ens.d;
    let span = ens.horizon() - ens.start.s;
    let mut num = 0.0;
    for a in 0..d {
        for b in 0..d {
            let target = if a == b { span } else { 0.0 };
            num += (moments.covariance[a * d + b] - target).powi(2);
        }
    }
    let den = span * span * d as f64;
    ZeroDriftLaw {
        moments,
        frobenius_rel_error: (num / den).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_differences() {
        let f = BumpTest::new(vec![0.1, -0.2, 0.3], 1.3, 2.0);
        let x = [0.4, 0.1, -0.2];
        let h = 1e-4;
        let mut g = [0.0; 3];
        f.grad(&x, &mut g);
        let mut lap = 0.0;
        for j in 0..3 {
            let mut p = x;
            let mut m = x;
            p[j] += h;
            m[j] -= h;
            let fd = (f.value(&p) - f.value(&m)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "{fd} {}", g[j]);
            lap += (f.value(&p) - 2.0 * f.value(&x) + f.value(&m)) / (h * h);
        }
        assert!((lap - f.laplacian(&x)).abs() < 1e-5, "{lap} {}", f.laplacian(&x));
    }

    #[test]
    fn window_bound_dominates_start_bound() {
        let a = modulus_start_bound(3, 1.0, 0.01);
        let b = modulus_window_bound(3, 1.0, 0.01, 1.0);
        assert!(a <= b && b <= 1.0);
        assert!(modulus_start_bound(3, 1.0, 0.005) < a);
    }
}
