use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::{smooth_grid, Targets};
use super::{resolvent_apply, smallness_check, ResolventBudget, SmallnessReport};
use crate::error::{config, domain, Error, Result};
use crate::field::{DriftField, Grid, GridScalar, GridVector, ScalarField, SupportBox};
use crate::kato::KatoBudget;
use crate::kernel::{EnvelopeConstants, KernelParams, SpaceTimePoint};

/// Resolution of the materialized iterates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Time nodes of the iterate grid over `supp(b)`.
    pub time_nodes: usize,
    /// Nodes per space axis of the iterate grid.
    pub space_nodes: usize,
    /// Time nodes of the grid on which a closed-form `g` is sampled.
    pub source_time_nodes: usize,
    pub source_space_nodes: usize,
    /// Nodes per axis of the probe lattice used for term sup-norms.
    pub lattice_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            time_nodes: 17,
            space_nodes: 17,
            source_time_nodes: 33,
            source_space_nodes: 33,
            lattice_nodes: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannOptions {
    /// Truncation depth `K`: terms `0..=K` are kept.
    pub depth: usize,
    pub grid: GridSpec,
    /// Box of the iterate grid; `supp(b)`'s box when absent. Must contain
    /// `supp(b)`. A shared box keeps grids identical across a family `b_n`.
    pub grid_box: Option<SupportBox>,
    /// Gauss–Legendre nodes per time cell while building iterates.
    pub time_nodes_per_cell: usize,
    pub self_check_points: usize,
    /// Largest accepted [`SelfCheck::series_impact`].
    pub self_check_tol: f64,
    pub seed: u64,
    pub kato: KatoBudget,
    pub resolvent: ResolventBudget,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        NeumannOptions {
            depth: 12,
            grid: GridSpec::default(),
            grid_box: None,
            time_nodes_per_cell: 6,
            self_check_points: 50,
            self_check_tol: 0.02,
            seed: 0x5eed,
            kato: KatoBudget::default(),
            resolvent: ResolventBudget::default(),
        }
    }
}

/// Interpolated versus directly computed iterate `h = (BR^λ)^k g` at random
/// points of the grid box.
///
/// The direct value is `b(p)·∇R^λh_{k-1}(p)`. `rel_l2` and `sup_rel` compare
/// it with the multilinear interpolant of the nodal iterate, which is what
/// the next resolvent application integrates. `factor_rel_l2` interpolates
/// only the smooth factor `∇R^λh_{k-1}` and keeps `b` exact, isolating the
/// grid's resolution of the drift itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub level: usize,
    /// Points at which the drift was finite.
    pub points: usize,
    pub rel_l2: f64,
    /// Largest error over the points divided by the largest direct value.
    pub sup_rel: f64,
    pub factor_rel_l2: f64,
    pub max_abs_err: f64,
    /// `sup_rel · term_norms[k] / term_norms[0]`: the largest relative shift
    /// of the series this iterate's interpolation can cause. Gated against
    /// the self-check tolerance.
    pub series_impact: f64,
}

/// Serializable part of a [`NeumannSeriesResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannSummary {
    pub lambda: f64,
    pub depth: usize,
    /// Sup of `|R^λ(BR^λ)^k g|` over grid nodes and the probe lattice.
    pub term_norms: Vec<f64>,
    /// `C_λ ‖g‖_∞ 2^{-K}`.
    pub tail_bound: f64,
    pub c_lambda: f64,
    pub g_sup: f64,
    pub smallness: SmallnessReport,
    pub grid: Option<Grid>,
    pub self_checks: Vec<SelfCheck>,
    /// Largest time-quadrature discrepancy seen while building iterates.
    pub quadrature_error: f64,
    /// Drift values at grid nodes that were not finite and were set to zero.
    pub dropped_nodes: usize,
}

impl NeumannSummary {
    /// `term_norms[k+1] / term_norms[k]`, zero once a term vanishes.
    pub fn ratios(&self) -> Vec<f64> {
        self.term_norms
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }
}

pub struct NeumannSeriesResult {
    pub summary: NeumannSummary,
    /// `(BR^λ)^k g` for `k = 1..=K` on the iterate grid.
    pub iterates: Vec<GridScalar>,
    g: Arc<dyn ScalarField>,
    budget: ResolventBudget,
}

impl NeumannSeriesResult {
    pub fn term_norms(&self) -> &[f64] {
        &self.summary.term_norms
    }

    pub fn tail_bound(&self) -> f64 {
        self.summary.tail_bound
    }

    pub fn depth(&self) -> usize {
        self.summary.depth
    }

    /// The same series cut at a smaller depth.
    pub fn truncated(&self, depth: usize) -> NeumannSeriesResult {
        let k = depth.min(self.summary.depth);
        let mut summary = self.summary.clone();
        summary.depth = k;
        summary.term_norms.truncate(k + 1);
        summary.tail_bound = summary.c_lambda * summary.g_sup * 0.5f64.powi(k as i32);
        NeumannSeriesResult {
            summary,
            iterates: self.iterates.iter().take(k).cloned().collect(),
            g: self.g.clone(),
            budget: self.budget,
        }
    }
}

/// Value of `S^λ g` at a point with its uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Quadrature, interpolation and tail contributions combined.
    pub error: f64,
    pub tail: f64,
    pub terms: Vec<f64>,
    /// Quadrature plus interpolation error of each term.
    pub term_errors: Vec<f64>,
}

fn union_box(a: &SupportBox, b: Option<&SupportBox>) -> SupportBox {
    match b {
        None => a.clone(),
        Some(b) => SupportBox {
            t: [a.t[0].min(b.t[0]), a.t[1].max(b.t[1])],
            lo: a.lo.iter().zip(&b.lo).map(|(x, y)| x.min(*y)).collect(),
            hi: a.hi.iter().zip(&b.hi).map(|(x, y)| x.max(*y)).collect(),
        },
    }
}

fn lattice(bx: &SupportBox, n: usize) -> Targets {
    let n = n.max(2);
    let span = bx.t[1] - bx.t[0];
    let lin = |a: f64, b: f64| (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
    let pad: f64 = bx.lo.iter().zip(&bx.hi).map(|(a, b)| 0.125 * (b - a)).fold(0.0, f64::max);
    Targets {
        s: lin(bx.t[0] - 0.25 * span, bx.t[1]),
        x: bx.lo.iter().zip(&bx.hi).map(|(a, b)| lin(a - pad, b + pad)).collect(),
    }
}

/// `g` on a grid: itself when grid-backed, `None` when constant, else sampled
/// on the source resolution over its support.
pub(crate) fn source_grid(g: &dyn ScalarField, spec: &GridSpec) -> Result<Option<GridScalar>> {
    if g.constant_value().is_some() {
        return Ok(None);
    }
    if let Some(gg) = g.as_grid() {
        return Ok(Some(gg.clone()));
    }
    let sb = g
        .support()
        .ok_or_else(|| config("g must be constant or have compact support"))?;
    let gr = Grid::over(&sb, spec.source_time_nodes, spec.source_space_nodes);
    Ok(Some(GridScalar::sample(gr, &|t, y| g.value(t, y))))
}

/// `b·∇R^λg` with `∇R^λg` tabulated on a grid over `supp(b)` and `b` exact.
pub struct GriddedDriftApplied {
    b: DriftField,
    grad: Option<GridVector>,
    /// Sup-relative error of the tabulated product at random points.
    pub interpolation_error: f64,
    /// Time-quadrature discrepancy of the tabulation.
    pub quadrature_error: f64,
}

impl ScalarField for GriddedDriftApplied {
    fn dim(&self) -> usize {
        self.b.dim()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        let Some(grad) = &self.grad else { return 0.0 };
        let d = self.b.dim();
        let mut bv = vec![0.0; d];
        self.b.eval(t, y, &mut bv);
        if bv.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let mut gv = vec![0.0; d];
        grad.eval(t, y, &mut gv);
        bv.iter().zip(&gv).map(|(a, b)| a * b).sum()
    }
    fn support(&self) -> Option<SupportBox> {
        self.b.support()
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.b.time_breaks()
    }
    fn sup_norm(&self) -> Option<f64> {
        let Some(grad) = &self.grad else { return Some(0.0) };
        let gmax = grad.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.b.sup_norm().map(|bs| bs * gmax * (self.b.dim() as f64).sqrt())
    }
}

/// Tabulated drift operator for bulk pointwise use, e.g. along simulated paths.
pub fn drift_multiply_grid(
    b: &DriftField,
    g: &dyn ScalarField,
    lambda: f64,
    spec: &GridSpec,
    seed: u64,
) -> Result<GriddedDriftApplied> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    let d = b.dim();
    if g.dim() != d {
        return Err(config("drift and field dimensions differ"));
    }
    let empty = GriddedDriftApplied {
        b: b.clone(),
        grad: None,
        interpolation_error: 0.0,
        quadrature_error: 0.0,
    };
    if b.sup_norm() == Some(0.0) {
        return Ok(empty);
    }
    let Some(src) = source_grid(g, spec)? else { return Ok(empty) };
    let bb = b.support().ok_or_else(|| config("drift must have compact support"))?;
    let grid = Grid::over(&bb, spec.time_nodes, spec.space_nodes);
    let q = NeumannOptions::default().time_nodes_per_cell;
    let out = smooth_grid(&src, lambda, &Targets::from_grid(&grid), q, true);
    let grad = GridVector {
        grid: grid.clone(),
        values: out.grads,
    };
    let gbox = grid.support();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<SpaceTimePoint> = (0..50)
        .map(|_| SpaceTimePoint {
            s: rng.gen_range(gbox.t[0]..=gbox.t[1]),
            x: (0..d).map(|j| rng.gen_range(gbox.lo[j]..=gbox.hi[j])).collect(),
        })
        .collect();
    let rows: Vec<[f64; 2]> = pts
        .par_iter()
        .filter_map(|p| {
            let bv = b.eval_vec(p.s, &p.x);
            if !bv.iter().all(|v| v.is_finite()) {
                return None;
            }
            let direct = smooth_grid(&src, lambda, &Targets::point(p), q + 2, true).grads;
            let mut gi = vec![0.0; d];
            grad.eval(p.s, &p.x, &mut gi);
            let dot = |g: &[f64]| bv.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
            Some([dot(&direct), dot(&gi)])
        })
        .collect();
    let sup = rows.iter().fold(0.0f64, |m, r| m.max(r[0].abs()));
    let err = rows.iter().fold(0.0f64, |m, r| m.max((r[1] - r[0]).abs()));
    Ok(GriddedDriftApplied {
        b: b.clone(),
        grad: Some(grad),
        interpolation_error: if sup > 0.0 { err / sup } else { 0.0 },
        quadrature_error: out.error,
    })
}

/// Build `S^λ g` up to depth `K` for a drift passing the smallness check.
pub fn neumann_series(
    b: &DriftField,
    g: Arc<dyn ScalarField>,
    lambda: f64,
    kernel: &KernelParams,
    eps1: f64,
    opts: &NeumannOptions,
) -> Result<NeumannSeriesResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if opts.depth < 1 {
        return Err(config("truncation depth must be at least 1"));
    }
    let d = b.dim();
    if g.dim() != d || kernel.d != d {
        return Err(config("drift, field and kernel dimensions differ"));
    }
    let smallness = smallness_check(b, kernel, eps1, &opts.kato)?;
    if !smallness.satisfied {
        return Err(Error::Smallness(Box::new(smallness)));
    }
    let c_lambda = EnvelopeConstants::new(*kernel).c_lambda(lambda)?;
    let g_sup = g
        .sup_norm()
        .ok_or_else(|| config("g must be bounded with a declared sup norm"))?;
    let k_max = opts.depth;
    let tail_bound = c_lambda * g_sup * 0.5f64.powi(k_max as i32);
    let q = opts.time_nodes_per_cell.max(3);

    let mut summary = NeumannSummary {
        lambda,
        depth: k_max,
        term_norms: vec![0.0; k_max + 1],
        tail_bound,
        c_lambda,
        g_sup,
        smallness,
        grid: None,
        self_checks: Vec::new(),
        quadrature_error: 0.0,
        dropped_nodes: 0,
    };

    let src0 = source_grid(g.as_ref(), &opts.grid)?;

    let b_zero = b.sup_norm() == Some(0.0);
    let b_box = if b_zero {
        None
    } else {
        Some(
            b.support()
                .ok_or_else(|| config("drift must have compact support"))?,
        )
    };

    // Term 0 norm.
    let lat_box = match (&b_box, g.support()) {
        (Some(bb), gs) => Some(union_box(bb, gs.as_ref())),
        (None, Some(gs)) => Some(gs),
        (None, None) => None,
    };
    match (&src0, g.constant_value()) {
        (_, Some(m)) => summary.term_norms[0] = m.abs() / lambda,
        (Some(src), None) => {
            if let Some(lb) = &lat_box {
                let out = smooth_grid(src, lambda, &lattice(lb, opts.grid.lattice_nodes), q, false);
                summary.quadrature_error = summary.quadrature_error.max(out.error);
                summary.term_norms[0] = out.values.iter().fold(0.0, |m, v| m.max(v.abs()));
            }
        }
        (None, None) => unreachable!(),
    }

    let (Some(bb), Some(src0)) = (b_box, src0) else {
        return Ok(NeumannSeriesResult {
            summary,
            iterates: Vec::new(),
            g,
            budget: opts.resolvent,
        });
    };

    let gbox_spec = match &opts.grid_box {
        None => bb.clone(),
        Some(gb) => {
            let inside = gb.t[0] <= bb.t[0]
                && gb.t[1] >= bb.t[1]
                && gb.lo.iter().zip(&bb.lo).all(|(a, b)| a <= b)
                && gb.hi.iter().zip(&bb.hi).all(|(a, b)| a >= b);
            if !inside || gb.dim() != d {
                return Err(config("the iterate grid box must contain the drift's support"));
            }
            gb.clone()
        }
    };
    let grid = Grid::over(&gbox_spec, opts.grid.time_nodes, opts.grid.space_nodes);
    let n_nodes = grid.len();
    let mut bvals = vec![0.0; n_nodes * d];
    let mut dropped = 0;
    {
        let mut y = vec![0.0; d];
        let mut out = vec![0.0; d];
        for k in 0..n_nodes {
            let t = grid.node(k, &mut y);
            b.eval(t, &y, &mut out);
            if out.iter().all(|v| v.is_finite()) {
                bvals[k * d..(k + 1) * d].copy_from_slice(&out);
            } else {
                dropped += 1;
            }
        }
    }
    summary.dropped_nodes = dropped;
    let node_targets = Targets::from_grid(&grid);
    let lat = lattice(lat_box.as_ref().unwrap_or(&bb), opts.grid.lattice_nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let gbox = grid.support();

    let mut iterates: Vec<GridScalar> = Vec::with_capacity(k_max);
    for k in 0..=k_max {
        let src = if k == 0 { &src0 } else { &iterates[k - 1] };
        let want_grad = k < k_max;
        let on_grid = smooth_grid(src, lambda, &node_targets, q, want_grad);
        summary.quadrature_error = summary.quadrature_error.max(on_grid.error);
        if k > 0 {
            let lat_out = smooth_grid(src, lambda, &lat, q, false);
            summary.quadrature_error = summary.quadrature_error.max(lat_out.error);
            let m = on_grid
                .values
                .iter()
                .chain(&lat_out.values)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            summary.term_norms[k] = m;
        } else if !on_grid.values.is_empty() {
            let m = on_grid.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            summary.term_norms[0] = summary.term_norms[0].max(m);
        }
        if !want_grad {
            break;
        }
        let values: Vec<f64> = (0..n_nodes)
            .map(|i| {
                bvals[i * d..(i + 1) * d]
                    .iter()
                    .zip(&on_grid.grads[i * d..(i + 1) * d])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let next = GridScalar {
            grid: grid.clone(),
            values,
        };
        let grad_grid = GridVector {
            grid: grid.clone(),
            values: on_grid.grads,
        };

        // Interpolated iterate against direct evaluation at random points.
        let pts: Vec<SpaceTimePoint> = (0..opts.self_check_points)
            .map(|_| SpaceTimePoint {
                s: rng.gen_range(gbox.t[0]..=gbox.t[1]),
                x: (0..d).map(|j| rng.gen_range(gbox.lo[j]..=gbox.hi[j])).collect(),
            })
            .collect();
        let rows: Vec<[f64; 3]> = pts
            .par_iter()
            .filter_map(|p| {
                let bv = b.eval_vec(p.s, &p.x);
                if !bv.iter().all(|v| v.is_finite()) {
                    return None;
                }
                let direct_grad = smooth_grid(src, lambda, &Targets::point(p), q + 2, true).grads;
                let mut gi = vec![0.0; d];
                grad_grid.eval(p.s, &p.x, &mut gi);
                let dot = |g: &[f64]| bv.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                Some([dot(&direct_grad), dot(&gi), next.value(p.s, &p.x)])
            })
            .collect();
        let den: f64 = rows.iter().map(|r| r[0] * r[0]).sum();
        let sup: f64 = rows.iter().fold(0.0, |m, r| m.max(r[0].abs()));
        let rel = |i: usize| {
            if den > 0.0 {
                (rows.iter().map(|r| (r[i] - r[0]).powi(2)).sum::<f64>() / den).sqrt()
            } else {
                0.0
            }
        };
        let max_err = rows.iter().fold(0.0f64, |m, r| m.max((r[2] - r[0]).abs()));
        summary.self_checks.push(SelfCheck {
            level: k + 1,
            points: rows.len(),
            rel_l2: rel(2),
            sup_rel: if sup > 0.0 { max_err / sup } else { 0.0 },
            factor_rel_l2: rel(1),
            max_abs_err: max_err,
            series_impact: 0.0,
        });
        iterates.push(next);
    }
    let lead = summary.term_norms[0];
    for c in summary.self_checks.iter_mut() {
        let share = if lead > 0.0 { summary.term_norms[c.level] / lead } else { 0.0 };
        c.series_impact = c.sup_rel * share;
    }
    if let Some(c) = summary.self_checks.iter().find(|c| c.series_impact > opts.self_check_tol) {
        return Err(Error::Resolution(format!(
            "iterate {} misses its interpolation self-check: sup-relative error {:.3e} at a term share of {:.3e} \
             shifts the series by {:.3e} of its leading term (> {:.3e}) on a {}x{}^{} grid",
            c.level,
            c.sup_rel,
            c.series_impact / c.sup_rel.max(f64::MIN_POSITIVE),
            c.series_impact,
            opts.self_check_tol,
            opts.grid.time_nodes,
            opts.grid.space_nodes,
            d
        )));
    }
    summary.grid = Some(grid);
    Ok(NeumannSeriesResult {
        summary,
        iterates,
        g,
        budget: opts.resolvent,
    })
}

/// `Σ_k R^λ(BR^λ)^k g` at `p`; the error adds per-term quadrature errors,
/// the iterates' measured interpolation error and the geometric tail.
pub fn evaluate_series(result: &NeumannSeriesResult, p: &SpaceTimePoint) -> Result<SeriesValue> {
    let lambda = result.summary.lambda;
    let t0 = resolvent_apply(result.g.as_ref(), lambda, p, &result.budget)?;
    let mut terms = vec![t0.value];
    let mut term_errors = vec![t0.error];
    for (k, h) in result.iterates.iter().enumerate() {
        let out = smooth_grid(h, lambda, &Targets::point(p), result.budget.grid_nodes, false);
        let v = out.values[0];
        let rep = result.summary.self_checks.get(k).map_or(0.0, |c| c.sup_rel);
        term_errors.push(out.error + rep * v.abs());
        terms.push(v);
    }
    let tail = result.summary.tail_bound;
    Ok(SeriesValue {
        value: terms.iter().sum(),
        error: term_errors.iter().sum::<f64>() + tail,
        tail,
        terms,
        term_errors,
    })
}
