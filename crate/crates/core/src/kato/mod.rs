//! Forward-Kato norms
//!
//! `N^{c,+}_h(f) = sup_{(s,x)} ∫_s^{s+h} ∫ (t-s)^{-(d+1)/2} e^{-c|y-x|²/(t-s)} |f(t,y)| dy dt`
//!
//! estimated as a maximum over a seeded candidate set of base points, plus
//! class-membership profiles, a divergence detector and builtin drifts.

mod builtin;
mod generic;
mod probe;
pub(crate) mod radial;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use builtin::{builtin_drift, BuiltinParams, ParamValue, BUILTIN_DRIFTS, DEFAULT_RADIAL_AMPLITUDE};
pub use probe::{divergence_probe, divergence_probe_at, ProbeLevel, ProbeOptions, ProbeReport};

use crate::error::{domain, Result};
use crate::field::{Angular, ScalarField, SupportBox};
use crate::kernel::SpaceTimePoint;
use crate::quad::{halton, Quad, Tolerance, PRIMES};
use generic::GenericProblem;
use radial::RadialProblem;

pub(crate) use builtin::RadialDrift;

/// Exponent `c` and horizon `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatoParams {
    pub c: f64,
    pub h: f64,
}

impl KatoParams {
    pub fn new(c: f64, h: f64) -> Result<Self> {
        let p = KatoParams { c, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(domain(format!("kato exponent c must be positive, got {}", self.c)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(domain(format!("kato horizon h must be positive, got {}", self.h)));
        }
        Ok(())
    }
}

/// Quadrature and search budget for [`kato_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatoBudget {
    /// Relative tolerance of the final evaluation.
    pub rel_tol: f64,
    /// Quasirandom base points added to the candidate lattice.
    pub halton_points: usize,
    /// Candidates refined by coordinate descent.
    pub refine_top: usize,
    /// Coordinate-descent rounds per refined candidate.
    pub refine_rounds: usize,
    /// Per-axis Gauss–Hermite order of the final evaluation for non-radial fields.
    pub gh_order: usize,
    /// Refinement levels of the divergence probe run at declared singularities.
    pub probe_levels: usize,
    pub probe: ProbeOptions,
}

impl Default for KatoBudget {
    fn default() -> Self {
        KatoBudget {
            rel_tol: 1e-7,
            halton_points: 64,
            refine_top: 3,
            refine_rounds: 24,
            gh_order: 20,
            probe_levels: 8,
            probe: ProbeOptions::default(),
        }
    }
}

impl KatoBudget {
    /// Cheaper settings for screening and tests.
    pub fn fast() -> Self {
        KatoBudget {
            rel_tol: 1e-5,
            halton_points: 24,
            refine_top: 2,
            refine_rounds: 12,
            gh_order: 12,
            ..Default::default()
        }
    }
}

/// Estimate of `N^{c,+}_h(f)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatoEstimate {
    pub value: f64,
    pub error: f64,
    pub diverged: bool,
    pub base_points: Vec<SpaceTimePoint>,
    pub probe: Option<ProbeReport>,
}

impl KatoEstimate {
    pub fn zero() -> Self {
        KatoEstimate {
            value: 0.0,
            error: 0.0,
            diverged: false,
            base_points: Vec::new(),
            probe: None,
        }
    }
}

/// Inner integral at a single base point.
pub fn kato_inner(f: &dyn ScalarField, params: &KatoParams, p: &SpaceTimePoint, budget: &KatoBudget) -> Result<Quad> {
    params.validate()?;
    let d = f.dim();
    if let Some(rad) = f.radial() {
        let prob = RadialProblem::new(&rad, d, params.c, params.h);
        let (a, on_axis) = axis_distance(&rad, &p.x);
        if on_axis {
            return Ok(prob.inner(p.s, a, outer_tol(budget.rel_tol), inner_tol(budget.rel_tol)));
        }
    }
    let prob = GenericProblem { f, d, c: params.c, h: params.h };
    Ok(generic_final(&prob, p.s, &p.x, budget))
}

fn axis_distance(rad: &crate::field::Radial, x: &[f64]) -> (f64, bool) {
    let diff: Vec<f64> = x.iter().zip(&rad.center).map(|(a, b)| a - b).collect();
    let a = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    match rad.angular {
        Angular::Uniform => (a, true),
        Angular::AbsCos(i) => {
            let off: f64 = diff.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v * v).sum();
            (a, off <= 1e-24 * a.max(1.0))
        }
    }
}

fn outer_tol(rel: f64) -> Tolerance {
    Tolerance {
        abs: 0.0,
        rel,
        max_intervals: 600,
    }
}

fn inner_tol(rel: f64) -> Tolerance {
    Tolerance {
        abs: 0.0,
        rel: (rel * 1e-2).max(1e-12),
        max_intervals: 200,
    }
}

fn generic_final(prob: &GenericProblem<'_>, s: f64, x: &[f64], budget: &KatoBudget) -> Quad {
    // Even orders keep nodes off the base point, where declared singularities sit.
    let n = (budget.gh_order.max(4) + 1) & !1;
    let tol = Tolerance {
        abs: 0.0,
        rel: budget.rel_tol.max(1e-7),
        max_intervals: 120,
    };
    let hi = prob.inner(s, x, n, tol);
    let lo = prob.inner(s, x, ((n * 7 / 10) & !1).max(4), tol);
    Quad {
        value: hi.value,
        error: hi.error + (hi.value - lo.value).abs(),
        evals: hi.evals + lo.evals,
    }
}

/// Maximize `eval` over the candidates and refine the best by coordinate descent.
fn maximize<F>(cands: Vec<Vec<f64>>, lo: &[f64], hi: &[f64], steps: &[f64], budget: &KatoBudget, eval: F) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let clip = |p: &mut Vec<f64>| {
        for (j, v) in p.iter_mut().enumerate() {
            *v = v.clamp(lo[j], hi[j]);
        }
    };
    let mut scored: Vec<(Vec<f64>, f64)> = cands
        .into_par_iter()
        .map(|mut p| {
            clip(&mut p);
            let v = eval(&p);
            (p, v)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = scored.first().cloned().unwrap_or((lo.to_vec(), 0.0));
    for (start, v0) in scored.into_iter().take(budget.refine_top.max(1)) {
        let mut cur = start;
        let mut cv = v0;
        let mut st = steps.to_vec();
        for _ in 0..budget.refine_rounds {
            let mut improved = false;
            for j in 0..cur.len() {
                if st[j] <= 0.0 {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    let mut q = cur.clone();
                    q[j] += sign * st[j];
                    clip(&mut q);
                    if q == cur {
                        continue;
                    }
                    let v = eval(&q);
                    if v > cv {
                        cur = q;
                        cv = v;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                st.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        if cv > best.1 {
            best = (cur, cv);
        }
    }
    best
}

/// `N^{c,+}_h(|f|)`, maximized over a seeded candidate set.
pub fn kato_norm(f: &dyn ScalarField, params: &KatoParams, budget: &KatoBudget) -> Result<KatoEstimate> {
    params.validate()?;
    if !(budget.rel_tol > 0.0) {
        return Err(domain("quadrature budget must be positive"));
    }
    if f.sup_norm() == Some(0.0) {
        return Ok(KatoEstimate::zero());
    }
    // Declared singularities are probed first; a certified divergence ends the search.
    let mut probes = Vec::new();
    for locus in f.singular_loci() {
        let rep = divergence_probe_at(f, params, &locus, budget.probe_levels.max(2), &budget.probe)?;
        if rep.diverged {
            return Ok(KatoEstimate {
                value: rep.last_bound(),
                error: 0.0,
                diverged: true,
                base_points: vec![locus],
                probe: Some(rep),
            });
        }
        probes.push(rep);
    }
    let mut est = match f.radial() {
        Some(rad) => radial_norm(f, &rad, params, budget),
        None => generic_norm(f, params, budget),
    };
    est.probe = probes.into_iter().max_by(|a, b| a.last_bound().total_cmp(&b.last_bound()));
    Ok(est)
}

fn time_candidates(breaks: &[f64], h: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut ts = vec![lo, hi, 0.5 * (lo + hi)];
    for &tb in breaks {
        ts.push(tb);
        for j in 0..10 {
            ts.push(tb - h * 0.5f64.powi(j));
        }
        ts.push(tb - 0.75 * h);
    }
    ts.retain(|t| t.is_finite() && *t >= lo && *t <= hi);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts
}

fn radial_norm(f: &dyn ScalarField, rad: &crate::field::Radial, params: &KatoParams, budget: &KatoBudget) -> KatoEstimate {
    let d = f.dim();
    let prob = RadialProblem::new(rad, d, params.c, params.h);
    let tb: Vec<f64> = rad.profile.time_breaks().into_iter().filter(|t| t.is_finite()).collect();
    let (s_lo, s_hi) = if tb.is_empty() {
        (0.0, 0.0)
    } else {
        let mn = tb.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = tb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ((mn - params.h).max(0.0), mx.max(0.0))
    };
    let mut r_max: f64 = 0.0;
    for t in [s_lo, 0.5 * (s_lo + s_hi), s_hi].iter().chain(tb.iter()) {
        for r in rad.profile.radial_breaks(*t) {
            if r.is_finite() {
                r_max = r_max.max(r);
            }
        }
    }
    if r_max == 0.0 {
        r_max = 1.0;
    }
    let a_cands = vec![0.0, r_max / 8.0, r_max / 4.0, r_max / 2.0, r_max];
    let ts = time_candidates(&tb, params.h, s_lo, s_hi);
    let mut cands = Vec::new();
    for &s in &ts {
        for &a in &a_cands {
            cands.push(vec![s, a]);
        }
    }
    for i in 1..=budget.halton_points {
        cands.push(vec![s_lo + (s_hi - s_lo) * halton(i, 2), r_max * halton(i, 3)]);
    }
    let screen_o = Tolerance {
        abs: 0.0,
        rel: 1e-4,
        max_intervals: 150,
    };
    let screen_i = Tolerance {
        abs: 0.0,
        rel: 1e-6,
        max_intervals: 100,
    };
    let lo = [s_lo, 0.0];
    let hi = [s_hi, r_max];
    let steps = [((s_hi - s_lo) / 16.0).max(params.h / 32.0).min(s_hi - s_lo), r_max / 16.0];
    let (best, _) = maximize(cands, &lo, &hi, &steps, budget, |p| prob.inner(p[0], p[1], screen_o, screen_i).value);
    let q = prob.inner(best[0], best[1], outer_tol(budget.rel_tol), inner_tol(budget.rel_tol));
    let mut x = rad.center.clone();
    let axis = match rad.angular {
        Angular::Uniform => 0,
        Angular::AbsCos(i) => i,
    };
    x[axis] += best[1];
    KatoEstimate {
        value: q.value,
        error: q.error,
        diverged: false,
        base_points: vec![SpaceTimePoint { s: best[0], x }],
        probe: None,
    }
}

fn generic_norm(f: &dyn ScalarField, params: &KatoParams, budget: &KatoBudget) -> KatoEstimate {
    let d = f.dim();
    let h = params.h;
    let sb = f
        .support()
        .unwrap_or_else(|| SupportBox::cube([0.0, 1.0], &vec![0.0; d], 1.0));
    let s_lo = (sb.t[0] - h).max(0.0);
    let s_hi = sb.t[1].max(0.0);
    let prob = GenericProblem { f, d, c: params.c, h };
    let mut tb = f.time_breaks();
    tb.extend(sb.t);
    let ts = time_candidates(&tb, h, s_lo, s_hi);
    let mut cands = Vec::new();
    let n_lat = 3usize.pow(d as u32);
    for &s in &ts {
        for k in 0..n_lat {
            let mut x = Vec::with_capacity(d + 1);
            x.push(s);
            let mut m = k;
            for j in 0..d {
                let frac = (m % 3) as f64 * 0.5;
                m /= 3;
                x.push(sb.lo[j] + frac * (sb.hi[j] - sb.lo[j]));
            }
            cands.push(x);
        }
    }
    for l in f.singular_loci() {
        let mut x = vec![l.s];
        x.extend(&l.x);
        cands.push(x);
    }
    for i in 1..=budget.halton_points {
        let mut x = vec![s_lo + (s_hi - s_lo) * halton(i, PRIMES[0])];
        for j in 0..d {
            x.push(sb.lo[j] + (sb.hi[j] - sb.lo[j]) * halton(i, PRIMES[j + 1]));
        }
        cands.push(x);
    }
    let mut lo = vec![s_lo];
    lo.extend(&sb.lo);
    let mut hi = vec![s_hi];
    hi.extend(&sb.hi);
    let mut steps = vec![((s_hi - s_lo) / 16.0).max(h / 32.0).min(s_hi - s_lo)];
    steps.extend(sb.lo.iter().zip(&sb.hi).map(|(a, b)| (b - a) / 16.0));
    let screen = Tolerance {
        abs: 0.0,
        rel: 1e-3,
        max_intervals: 24,
    };
    let n_screen = 8;
    let (best, _) = maximize(cands, &lo, &hi, &steps, budget, |p| prob.inner(p[0], &p[1..], n_screen, screen).value);
    let q = generic_final(&prob, best[0], &best[1..], budget);
    KatoEstimate {
        value: q.value,
        error: q.error,
        diverged: false,
        base_points: vec![SpaceTimePoint {
            s: best[0],
            x: best[1..].to_vec(),
        }],
        probe: None,
    }
}

/// Class-membership verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipProfile {
    pub horizons: Vec<f64>,
    pub estimates: Vec<KatoEstimate>,
    /// Least-squares slope of `ln N_h` against `ln h`.
    pub exponent: Option<f64>,
    pub verdict: Membership,
}

/// Norms along a strictly decreasing sequence of horizons, with a verdict.
pub fn membership_profile(f: &dyn ScalarField, c: f64, hs: &[f64], budget: &KatoBudget) -> Result<MembershipProfile> {
    if hs.is_empty() {
        return Err(domain("horizon sequence is empty"));
    }
    if hs.iter().any(|h| !(*h > 0.0)) || hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("horizons must be positive and strictly decreasing"));
    }
    let mut estimates = Vec::with_capacity(hs.len());
    for &h in hs {
        estimates.push(kato_norm(f, &KatoParams::new(c, h)?, budget)?);
    }
    let any_div = estimates.iter().any(|e| e.diverged);
    let all_zero = estimates.iter().all(|e| e.value == 0.0);
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(&estimates)
        .filter(|(_, e)| e.value > 0.0)
        .map(|(h, e)| (h.ln(), e.value.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let non_increasing = estimates
        .windows(2)
        .all(|w| w[1].value <= w[0].value + w[0].error + w[1].error);
    let verdict = if any_div {
        Membership::NonMember
    } else if all_zero || (non_increasing && exponent.map_or(false, |e| e > 0.0)) {
        Membership::Member
    } else {
        Membership::Inconclusive
    };
    Ok(MembershipProfile {
        horizons: hs.to_vec(),
        estimates,
        exponent,
        verdict,
    })
}
