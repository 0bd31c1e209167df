//! Resolvent of multilinear grid fields. The spatial Gaussian average of each
//! hat basis function has a closed form, so only the time integral is
//! discretized; all targets of a tensor lattice are handled by separable
//! mode products.

use rayon::prelude::*;

use crate::field::{Grid, GridScalar, UniformAxis};
use crate::kernel::SpaceTimePoint;
use crate::quad::{legendre_on, normal_mass, normal_pdf};

/// Tensor lattice of evaluation points `s × x_0 × … × x_{d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Targets {
    pub s: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

impl Targets {
    pub fn from_grid(g: &Grid) -> Self {
        Targets {
            s: g.t.nodes(),
            x: g.x.iter().map(|a| a.nodes()).collect(),
        }
    }

    pub fn point(p: &SpaceTimePoint) -> Self {
        Targets {
            s: vec![p.s],
            x: p.x.iter().map(|&v| vec![v]).collect(),
        }
    }

    pub fn space_len(&self) -> usize {
        self.x.iter().map(Vec::len).product()
    }

    pub fn len(&self) -> usize {
        self.s.len() * self.space_len()
    }
}

pub(crate) struct TensorOut {
    /// Target-major values, `s` slowest and the last space axis fastest.
    pub values: Vec<f64>,
    /// `len × d` gradients, empty unless requested.
    pub grads: Vec<f64>,
    /// Largest difference between the primary and a lower-order time rule.
    pub error: f64,
}

const Z_CUT: f64 = 9.0;

/// `(E[L(x+σZ) 1_{[a,b]}], ∂_x E[…])` for `L(y) = α + c1 (y - x)`.
#[inline]
fn piece(a: f64, b: f64, x: f64, alpha: f64, c1: f64, sigma: f64) -> (f64, f64) {
    let za = (a - x) / sigma;
    let zb = (b - x) / sigma;
    if za > Z_CUT || zb < -Z_CUT {
        return (0.0, 0.0);
    }
    let za = za.max(-40.0);
    let zb = zb.min(40.0);
    let pa = normal_pdf(za);
    let pb = normal_pdf(zb);
    let mass = normal_mass(za, zb);
    let m = alpha * mass + c1 * sigma * (pa - pb);
    let g = (alpha * (pa - pb) + c1 * sigma * (mass + za * pa - zb * pb)) / sigma;
    (m, g)
}

/// Row-major `xs.len() × n` matrices of Gaussian hat moments and their
/// `x`-derivatives. The interpolant vanishes outside the axis range.
pub(crate) fn hat_moments(axis: &UniformAxis, xs: &[f64], sigma: f64, val: &mut Vec<f64>, grad: &mut Vec<f64>) {
    let n = axis.n;
    val.clear();
    val.resize(xs.len() * n, 0.0);
    grad.clear();
    grad.resize(xs.len() * n, 0.0);
    let h = (axis.hi - axis.lo) / (n - 1) as f64;
    let reach = Z_CUT * sigma + h;
    for (r, &x) in xs.iter().enumerate() {
        let lo_k = (((x - reach - axis.lo) / h).floor().max(0.0) as usize).min(n - 1);
        let hi_k = (((x + reach - axis.lo) / h).ceil().max(0.0) as usize).min(n - 1);
        if x + reach < axis.lo || x - reach > axis.hi {
            continue;
        }
        for k in lo_k..=hi_k {
            let xk = axis.node(k);
            let mut m = 0.0;
            let mut g = 0.0;
            if k > 0 {
                let a = axis.node(k - 1);
                let (pm, pg) = piece(a, xk, x, (x - a) / h, 1.0 / h, sigma);
                m += pm;
                g += pg;
            }
            if k + 1 < n {
                let b = axis.node(k + 1);
                let (pm, pg) = piece(xk, b, x, (b - x) / h, -1.0 / h, sigma);
                m += pm;
                g += pg;
            }
            val[r * n + k] = m;
            grad[r * n + k] = g;
        }
    }
}

/// Mode-`axis` product of a row-major tensor with a `rows × shape[axis]` matrix.
fn mode_product(data: &[f64], shape: &[usize], axis: usize, mat: &[f64], rows: usize, out: &mut Vec<f64>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n = shape[axis];
    out.clear();
    out.resize(outer * rows * inner, 0.0);
    for o in 0..outer {
        let src = &data[o * n * inner..(o + 1) * n * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let row = &mat[r * n..(r + 1) * n];
            let d = &mut dst[r * inner..(r + 1) * inner];
            for (k, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let s = &src[k * inner..(k + 1) * inner];
                for (a, b) in d.iter_mut().zip(s) {
                    *a += w * b;
                }
            }
        }
    }
}

/// Contract `slice` along every axis, using `swap` (if any) in place of `vals[swap]`.
fn chain(slice: &[f64], shape: &[usize], vals: &[Vec<f64>], grads: &[Vec<f64>], rows: &[usize], swap: Option<usize>) -> Vec<f64> {
    let mut cur = slice.to_vec();
    let mut sh = shape.to_vec();
    let mut buf = Vec::new();
    for j in 0..shape.len() {
        let m = if swap == Some(j) { &grads[j] } else { &vals[j] };
        mode_product(&cur, &sh, j, m, rows[j], &mut buf);
        sh[j] = rows[j];
        std::mem::swap(&mut cur, &mut buf);
    }
    cur
}

fn time_panels(src: &Grid, s: f64) -> Vec<(f64, f64)> {
    let (t_lo, t_hi) = (src.t.lo, src.t.hi);
    if t_hi <= s {
        return Vec::new();
    }
    let mut cuts = vec![(t_lo - s).max(0.0).sqrt()];
    for t in src.t.nodes() {
        if t > s && t > t_lo && t < t_hi {
            cuts.push((t - s).sqrt());
        }
    }
    cuts.push((t_hi - s).sqrt());
    cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
}

struct Accum {
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
}

fn integrate_s(src: &GridScalar, lambda: f64, s: f64, xs: &[Vec<f64>], q: usize, want_grad: bool) -> Accum {
    let d = xs.len();
    let rows: Vec<usize> = xs.iter().map(Vec::len).collect();
    let m: usize = rows.iter().product();
    let shape: Vec<usize> = src.grid.x.iter().map(|a| a.n).collect();
    let slice_len: usize = shape.iter().product();
    let mut acc = Accum {
        values: vec![0.0; m],
        grads: if want_grad { vec![vec![0.0; m]; d] } else { Vec::new() },
    };
    let mut vals = vec![Vec::new(); d];
    let mut grads = vec![Vec::new(); d];
    let mut slice = vec![0.0; slice_len];
    for (ua, ub) in time_panels(&src.grid, s) {
        for (u, w) in legendre_on(q, ua, ub) {
            let tau = u * u;
            let Some((i, f)) = src.grid.t.locate(s + tau) else { continue };
            let weight = w * 2.0 * u * (-lambda * tau).exp();
            if weight == 0.0 {
                continue;
            }
            let a = &src.values[i * slice_len..(i + 1) * slice_len];
            let b = &src.values[(i + 1) * slice_len..(i + 2).min(src.grid.t.n) * slice_len];
            if b.len() == slice_len {
                for ((o, x), y) in slice.iter_mut().zip(a).zip(b) {
                    *o = (1.0 - f) * x + f * y;
                }
            } else {
                slice.copy_from_slice(a);
            }
            for j in 0..d {
                hat_moments(&src.grid.x[j], &xs[j], u, &mut vals[j], &mut grads[j]);
            }
            let v = chain(&slice, &shape, &vals, &grads, &rows, None);
            for (o, x) in acc.values.iter_mut().zip(&v) {
                *o += weight * x;
            }
            if want_grad {
                for j in 0..d {
                    let g = chain(&slice, &shape, &vals, &grads, &rows, Some(j));
                    for (o, x) in acc.grads[j].iter_mut().zip(&g) {
                        *o += weight * x;
                    }
                }
            }
        }
    }
    acc
}

/// `R^λ src` (and optionally `∇R^λ src`) at every target, exact in space and
/// `q`-point Gauss–Legendre in `u = √τ` on each time cell of the source grid.
pub(crate) fn smooth_grid(src: &GridScalar, lambda: f64, targets: &Targets, q: usize, want_grad: bool) -> TensorOut {
    let d = targets.x.len();
    let m = targets.space_len();
    let q_low = (q.saturating_sub(2)).max(2);
    let per_s: Vec<(Accum, Vec<f64>)> = targets
        .s
        .par_iter()
        .map(|&s| {
            let hi = integrate_s(src, lambda, s, &targets.x, q, want_grad);
            let lo = integrate_s(src, lambda, s, &targets.x, q_low, false);
            (hi, lo.values)
        })
        .collect();
    let mut values = Vec::with_capacity(targets.len());
    let mut grads = if want_grad { Vec::with_capacity(targets.len() * d) } else { Vec::new() };
    let mut error = 0.0f64;
    for (acc, low) in per_s {
        for (k, v) in acc.values.iter().enumerate() {
            error = error.max((v - low[k]).abs());
        }
        values.extend(&acc.values);
        if want_grad {
            for k in 0..m {
                for j in 0..d {
                    grads.push(acc.grads[j][k]);
                }
            }
        }
    }
    TensorOut { values, grads, error }
}
