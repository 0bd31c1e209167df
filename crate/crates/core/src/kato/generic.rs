//! Inner integrals of general fields by product Gauss–Hermite quadrature in
//! the scaled variable `z = (y - x)/√(t - s)`.

use crate::field::ScalarField;
use crate::quad::{self, adaptive, Quad, Tolerance};

pub(crate) struct GenericProblem<'a> {
    pub f: &'a dyn ScalarField,
    pub d: usize,
    pub c: f64,
    pub h: f64,
}

impl GenericProblem<'_> {
    /// `∫ e^{-c|z|²} |f(t, x + u z)| dz` with an order-`n` product rule.
    fn spatial(&self, t: f64, u: f64, x: &[f64], n: usize) -> f64 {
        let rule = quad::hermite_normal(n);
        let scale = u / (2.0 * self.c).sqrt();
        let d = self.d;
        let mut idx = vec![0usize; d];
        let mut y = x.to_vec();
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for j in 0..d {
                let (node, wt) = rule[idx[j]];
                y[j] = x[j] + scale * node;
                w *= wt;
            }
            acc += w * self.f.value(t, &y).abs();
            let mut j = 0;
            loop {
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
                j += 1;
                if j == d {
                    return acc * (std::f64::consts::PI / self.c).powf(0.5 * d as f64);
                }
            }
        }
    }

    pub fn inner(&self, s: f64, x: &[f64], n: usize, tol: Tolerance) -> Quad {
        let root_h = self.h.sqrt();
        let ub: Vec<f64> = self
            .f
            .time_breaks()
            .into_iter()
            .filter(|&tb| tb > s && tb < s + self.h)
            .map(|tb| (tb - s).sqrt())
            .collect();
        adaptive(|u| 2.0 * self.spatial(s + u * u, u, x, n), 0.0, root_h, &ub, tol)
    }
}
