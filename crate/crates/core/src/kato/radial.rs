//! Inner integrals of radially structured fields, computed in spherical
//! coordinates about the field's center.

use std::cell::Cell;

use crate::field::{Angular, Radial};
use crate::quad::{self, adaptive, Quad, Tolerance};

/// Spherical mean of `A(ω) exp(β (ω·e - 1))` over the unit sphere in R^d.
pub(crate) fn angular_mean_scaled(d: usize, angular: Angular, beta: f64) -> f64 {
    if d == 3 {
        return match angular {
            Angular::Uniform => {
                if beta <= 0.0 {
                    1.0
                } else {
                    -(-2.0 * beta).exp_m1() / (2.0 * beta)
                }
            }
            Angular::AbsCos(_) => {
                if beta < 0.05 {
                    let b2 = beta * beta;
                    (0.5 + b2 / 8.0 + b2 * b2 / 144.0 + b2 * b2 * b2 / 5760.0) * (-beta).exp()
                } else {
                    let e1 = (-beta).exp();
                    let e2 = e1 * e1;
                    let ib = 1.0 / beta;
                    let ib2 = ib * ib;
                    0.5 * ((ib - ib2) + e1 * ib2 + e1 * ib2 - e2 * (ib + ib2))
                }
            }
        };
    }
    let w = |th: f64| th.sin().powi(d as i32 - 2);
    let a = |th: f64| match angular {
        Angular::Uniform => 1.0,
        Angular::AbsCos(_) => th.cos().abs(),
    };
    let tol = Tolerance::new(0.0, 1e-11);
    let mut breaks = vec![0.5 * std::f64::consts::PI];
    if beta > 1.0 {
        breaks.push((1.0 / beta.sqrt()).min(3.0));
        breaks.push((6.0 / beta.sqrt()).min(3.1));
    }
    let num = adaptive(|th| w(th) * a(th) * (beta * (th.cos() - 1.0)).exp(), 0.0, std::f64::consts::PI, &breaks, tol);
    let den = adaptive(w, 0.0, std::f64::consts::PI, &[], tol);
    num.value / den.value
}

/// Spherical mean of `ω·e · exp(β (ω·e - 1))` over the unit sphere in R^d.
pub(crate) fn angular_cos_mean(d: usize, beta: f64) -> f64 {
    if d == 3 {
        if beta < 0.5 {
            let b2 = beta * beta;
            return (-beta).exp() * beta * (1.0 / 3.0 + b2 * (1.0 / 30.0 + b2 * (1.0 / 840.0 + b2 * (1.0 / 45360.0 + b2 / 3991680.0))));
        }
        let ib = 1.0 / beta;
        let ib2 = ib * ib;
        return 0.5 * ((ib - ib2) + (-2.0 * beta).exp() * (ib + ib2));
    }
    let w = |th: f64| th.sin().powi(d as i32 - 2);
    let tol = Tolerance::new(0.0, 1e-11);
    let mut breaks = vec![0.5 * std::f64::consts::PI];
    if beta > 1.0 {
        breaks.push((1.0 / beta.sqrt()).min(3.0));
        breaks.push((6.0 / beta.sqrt()).min(3.1));
    }
    let num = adaptive(|th| w(th) * th.cos() * (beta * (th.cos() - 1.0)).exp(), 0.0, std::f64::consts::PI, &breaks, tol);
    let den = adaptive(w, 0.0, std::f64::consts::PI, &[], tol);
    num.value / den.value
}

/// Radial integration problem for one field, exponent and horizon.
pub(crate) struct RadialProblem<'a> {
    pub rad: &'a Radial,
    pub d: usize,
    pub c: f64,
    pub h: f64,
    area: f64,
}

/// Relative truncation radius of the Gaussian factor: `exp(-37) ≈ 8.5e-17`.
const GAUSS_CUT: f64 = 37.0;

impl<'a> RadialProblem<'a> {
    pub fn new(rad: &'a Radial, d: usize, c: f64, h: f64) -> Self {
        RadialProblem {
            rad,
            d,
            c,
            h,
            area: quad::sphere_area(d),
        }
    }

    /// `∫ e^{-c|y-x|²/τ} |f(t, y)| dy` for `x` at distance `a` from the center
    /// (on the distinguished axis for angular factors).
    fn spatial(&self, t: f64, tau: f64, a: f64, tol: Tolerance, rel_err: &Cell<f64>) -> f64 {
        let half = (GAUSS_CUT / self.c * tau).sqrt();
        let lo = (a - half).max(0.0);
        let hi = a + half;
        let mut breaks = self.rad.profile.radial_breaks(t);
        breaks.push(a);
        let d = self.d;
        let c = self.c;
        let ang = self.rad.angular;
        let q = adaptive(
            |rho| {
                let psi = self.rad.profile.value(t, rho).abs();
                if psi == 0.0 || rho == 0.0 {
                    return 0.0;
                }
                let beta = 2.0 * c * a * rho / tau;
                let g = (-c * (rho - a) * (rho - a) / tau).exp();
                rho.powi(d as i32 - 1) * psi * angular_mean_scaled(d, ang, beta) * g
            },
            lo,
            hi,
            &breaks,
            tol,
        );
        if q.value != 0.0 {
            rel_err.set(rel_err.get().max(q.error / q.value.abs()));
        }
        self.area * q.value
    }

    /// Inner integral at base time `s` and distance `a`.
    pub fn inner(&self, s: f64, a: f64, outer: Tolerance, inner: Tolerance) -> Quad {
        let root_h = self.h.sqrt();
        let mut ub: Vec<f64> = self
            .rad
            .profile
            .time_breaks()
            .into_iter()
            .filter(|&tb| tb > s && tb < s + self.h)
            .map(|tb| (tb - s).sqrt())
            .collect();
        ub.retain(|u| *u > 0.0 && *u < root_h);
        let rel_err = Cell::new(0.0f64);
        let d = self.d as i32;
        let q = adaptive(
            |u| {
                let tau = u * u;
                let sp = self.spatial(s + tau, tau, a, inner, &rel_err);
                if sp == 0.0 {
                    0.0
                } else {
                    2.0 * sp * u.powi(-d)
                }
            },
            0.0,
            root_h,
            &ub,
            outer,
        );
        Quad {
            value: q.value,
            error: q.error + rel_err.get() * q.value.abs(),
            evals: q.evals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d3_closed_forms_match_generic_route() {
        for &beta in &[0.0, 0.01, 0.3, 2.0, 40.0] {
            for ang in [Angular::Uniform, Angular::AbsCos(0)] {
                let closed = angular_mean_scaled(3, ang, beta);
                // Generic route evaluated through the θ-integral directly.
                let w = |th: f64| th.sin();
                let a = |th: f64| match ang {
                    Angular::Uniform => 1.0,
                    Angular::AbsCos(_) => th.cos().abs(),
                };
                let num = adaptive(
                    |th| w(th) * a(th) * (beta * (th.cos() - 1.0)).exp(),
                    0.0,
                    std::f64::consts::PI,
                    &[std::f64::consts::FRAC_PI_2],
                    Tolerance::new(0.0, 1e-12),
                );
                let ref_value = num.value / 2.0;
                assert!(
                    (closed - ref_value).abs() < 1e-9 * ref_value.max(1e-300),
                    "beta={beta} {ang:?}: {closed} vs {ref_value}"
                );
            }
        }
    }

    #[test]
    fn cos_mean_matches_theta_integral() {
        for &beta in &[0.0, 1e-3, 0.2, 0.49, 0.51, 3.0, 200.0] {
            let closed = angular_cos_mean(3, beta);
            let num = adaptive(
                |th| th.sin() * th.cos() * (beta * (th.cos() - 1.0)).exp(),
                0.0,
                std::f64::consts::PI,
                &[std::f64::consts::FRAC_PI_2, 0.1],
                Tolerance::new(1e-16, 1e-13),
            );
            let r = num.value / 2.0;
            assert!((closed - r).abs() <= 1e-10 * r.abs() + 1e-15, "beta={beta}: {closed} vs {r}");
            let generic = angular_cos_mean(4, beta);
            assert!(generic.is_finite());
        }
    }
}
