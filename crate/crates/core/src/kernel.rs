//! Gaussian transition density of Brownian motion, its gradient, and the
//! envelope constants derived from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Space-time point `(s, x)` with `s ≥ 0` and finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub s: f64,
    pub x: Vec<f64>,
}

impl SpaceTimePoint {
    pub fn new(s: f64, x: Vec<f64>) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(domain(format!("time must be finite and non-negative, got {s}")));
        }
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(domain("space coordinates must be finite"));
        }
        Ok(SpaceTimePoint { s, x })
    }

    /// `(s, 0)` in dimension `d`.
    pub fn origin(s: f64, d: usize) -> Self {
        SpaceTimePoint { s, x: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Dimension and envelope decay exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub d: usize,
    pub alpha: f64,
}

impl KernelParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d < 3 {
            return Err(domain(format!("dimension must be at least 3, got {d}")));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
        }
        Ok(KernelParams { d, alpha })
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { d: 3, alpha: 0.25 }
    }
}

/// Floor applied to the gradient envelope constant.
pub const C1_FLOOR: f64 = 1.0 + 1.0 / (1u64 << 20) as f64;

/// `ln p` for elapsed time `tau` and squared distance `r2`.
#[inline]
pub fn log_heat_kernel(d: usize, tau: f64, r2: f64) -> f64 {
    -0.5 * d as f64 * (2.0 * PI * tau).ln() - r2 / (2.0 * tau)
}

fn check_order(p: &SpaceTimePoint, q: &SpaceTimePoint) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(domain("points have different dimensions"));
    }
    let tau = q.s - p.s;
    if !(tau > 0.0) {
        return Err(domain(format!("kernel requires t > s, got s = {}, t = {}", p.s, q.s)));
    }
    Ok(tau)
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `p(s, x; t, y)`.
pub fn heat_kernel(p: &SpaceTimePoint, q: &SpaceTimePoint) -> Result<f64> {
    let tau = check_order(p, q)?;
    Ok(log_heat_kernel(p.dim(), tau, dist2(&p.x, &q.x)).exp())
}

/// `∇_x p(s, x; t, y) = ((y - x)/(t - s)) p`.
pub fn heat_kernel_grad(p: &SpaceTimePoint, q: &SpaceTimePoint) -> Result<Vec<f64>> {
    let tau = check_order(p, q)?;
    let k = log_heat_kernel(p.dim(), tau, dist2(&p.x, &q.x)).exp();
    Ok(p.x.iter().zip(&q.x).map(|(a, b)| (b - a) / tau * k).collect())
}

/// `(t - s)^{-(d+1)/2} exp(-α |x - y|²/(t - s))`, without the constant.
#[inline]
pub fn grad_envelope(params: &KernelParams, tau: f64, r2: f64) -> f64 {
    (-0.5 * (params.d as f64 + 1.0) * tau.ln() - params.alpha * r2 / tau).exp()
}

/// Smallest `C` with `|∇p| ≤ C · envelope`, before flooring.
pub fn minimal_grad_constant(params: &KernelParams) -> f64 {
    (2.0 * PI).powf(-0.5 * params.d as f64) * (2.0 * std::f64::consts::E * (0.5 - params.alpha)).powf(-0.5)
}

/// Gradient envelope constant `C₁`, floored at `1 + 2^{-20}`.
pub fn grad_envelope_constant(params: &KernelParams) -> f64 {
    minimal_grad_constant(params).max(C1_FLOOR)
}

/// `C_λ = C₁ (π/α)^{d/2} (π/λ)^{1/2}`.
pub fn resolvent_grad_constant(params: &KernelParams, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(grad_envelope_constant(params) * (PI / params.alpha).powf(0.5 * params.d as f64) * (PI / lambda).sqrt())
}

/// The constants `C₁` and `λ ↦ C_λ` for one parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub params: KernelParams,
    pub c1: f64,
}

impl EnvelopeConstants {
    pub fn new(params: KernelParams) -> Self {
        EnvelopeConstants {
            params,
            c1: grad_envelope_constant(&params),
        }
    }

    pub fn c_lambda(&self, lambda: f64) -> Result<f64> {
        resolvent_grad_constant(&self.params, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_value_d3() {
        let p = SpaceTimePoint::origin(0.0, 3);
        let q = SpaceTimePoint::origin(1.0, 3);
        assert!((heat_kernel(&p, &q).unwrap() - 0.063_493_635_934_240_97).abs() < 1e-15);
    }

    #[test]
    fn rejects_reversed_time() {
        let p = SpaceTimePoint::origin(1.0, 3);
        let q = SpaceTimePoint::origin(1.0, 3);
        assert!(heat_kernel(&p, &q).is_err());
        assert!(heat_kernel_grad(&q, &p).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(2, 0.25).is_err());
        assert!(KernelParams::new(3, 0.5).is_err());
        assert!(KernelParams::new(3, 0.0).is_err());
        assert!(KernelParams::new(4, 0.1).is_ok());
    }

    #[test]
    fn far_tail_does_not_underflow_to_nan() {
        let p = SpaceTimePoint::origin(0.0, 3);
        let q = SpaceTimePoint::new(1e-3, vec![10.0, 0.0, 0.0]).unwrap();
        let v = heat_kernel(&p, &q).unwrap();
        assert!(v == 0.0 || v.is_finite());
        assert!(heat_kernel_grad(&p, &q).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn c_lambda_scaling() {
        let k = KernelParams::default();
        let a = resolvent_grad_constant(&k, 1.0).unwrap();
        let b = resolvent_grad_constant(&k, 2.0).unwrap();
        assert!((b - a / 2f64.sqrt()).abs() < 1e-12 * a);
        assert!(resolvent_grad_constant(&k, 0.0).is_err());
    }
}
