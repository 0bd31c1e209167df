//! Certified lower bounds on the inner forward-Kato integral at a fixed base
//! point, used to detect non-integrable singularities.

use serde::{Deserialize, Serialize};

use super::KatoParams;
use crate::error::{domain, Result};
use crate::field::{Angular, ScalarField};
use crate::kernel::SpaceTimePoint;
use crate::quad::{self, adaptive, Tolerance};

/// Tuning of [`divergence_probe_at`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Bound above which a non-plateaued sequence is declared divergent.
    pub threshold: f64,
    /// Geometric sub-boxes per dyadic time interval.
    pub sub_boxes: usize,
    /// Number of shells in the scaled spatial variable.
    pub shells: usize,
    /// Relative last increment below which the sequence counts as a plateau.
    pub plateau_rel: f64,
    /// Resolved dyadic intervals needed before the harmonic-decay test applies.
    pub min_tail_depth: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            threshold: 1e3,
            sub_boxes: 16,
            shells: 96,
            plateau_rel: 1e-3,
            min_tail_depth: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub level: usize,
    /// Number of dyadic time intervals below `h` covered at this level.
    pub depth: usize,
    pub tau_min: f64,
    pub bound: f64,
    /// The requested depth was clipped by the resolvable time floor.
    pub floor_reached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub s_star: f64,
    pub x_star: Vec<f64>,
    pub levels: Vec<ProbeLevel>,
    pub diverged: bool,
    pub plateau: bool,
    /// False when infima were estimated by sampling rather than known exactly.
    pub certified: bool,
    pub threshold: f64,
}

impl ProbeReport {
    pub fn bounds(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.bound).collect()
    }

    pub fn last_bound(&self) -> f64 {
        self.levels.last().map(|l| l.bound).unwrap_or(0.0)
    }
}

/// Probe at `(s_star, x*)` where `x*` is the field's radial center, or the
/// origin when the field has no radial structure.
pub fn divergence_probe(f: &dyn ScalarField, params: &KatoParams, s_star: f64, levels: usize) -> Result<ProbeReport> {
    let x = f.radial().map(|r| r.center).unwrap_or_else(|| vec![0.0; f.dim()]);
    divergence_probe_at(f, params, &SpaceTimePoint { s: s_star, x }, levels, &ProbeOptions::default())
}

pub fn divergence_probe_at(
    f: &dyn ScalarField,
    params: &KatoParams,
    p: &SpaceTimePoint,
    levels: usize,
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    params.validate()?;
    if levels < 2 {
        return Err(domain("divergence probe needs at least 2 refinement levels"));
    }
    let d = f.dim();
    let (c, h) = (params.c, params.h);
    let s = p.s;
    let floor = (s.abs() * 1e-13).max(1e-300);
    let d_max = ((h / floor).log2().floor() as usize).max(1);
    let depth = |l: usize| -> usize { 1usize.checked_shl(l as u32 + 1).unwrap_or(usize::MAX) };
    let d_needed = depth(levels).min(d_max);

    let z_max = (40.0 / c).sqrt();
    let nz = opts.shells;
    let area = quad::sphere_area(d);
    let edges: Vec<f64> = (0..=nz).map(|j| z_max * j as f64 / nz as f64).collect();
    let masses: Vec<f64> = edges
        .windows(2)
        .map(|w| {
            area * adaptive(
                |z| z.powi(d as i32 - 1) * (-c * z * z).exp(),
                w[0],
                w[1],
                &[],
                Tolerance::new(0.0, 1e-13),
            )
            .value
        })
        .collect();

    let radial = f.radial().filter(|r| r.angular == Angular::Uniform);
    let a = radial
        .as_ref()
        .map(|r| r.center.iter().zip(&p.x).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
        .unwrap_or(0.0);
    let mut certified = true;

    let mut infimum = |ta: f64, tb: f64, za: f64, zb: f64| -> f64 {
        let (sa, sb) = (ta.sqrt(), tb.sqrt());
        if let Some(r) = &radial {
            let r_lo = (sa * za - a).max(a - sb * zb).max(0.0);
            let r_hi = a + sb * zb;
            if let Some(v) = r.profile.abs_infimum([s + ta, s + tb], [r_lo, r_hi]) {
                return v;
            }
        }
        certified = false;
        let mut m = f64::INFINITY;
        let mut y = p.x.clone();
        for &tau in &[ta, 0.5 * (ta + tb), tb] {
            let rt = tau.sqrt();
            for &z in &[za, 0.5 * (za + zb), zb] {
                for j in 0..d {
                    for sign in [-1.0, 1.0] {
                        y.copy_from_slice(&p.x);
                        y[j] += sign * rt * z;
                        m = m.min(f.value(s + tau, &y).abs());
                    }
                }
            }
        }
        if m.is_finite() {
            m
        } else {
            0.0
        }
    };

    let m = opts.sub_boxes.max(1);
    let mut per_dyadic = Vec::with_capacity(d_needed);
    for k in 0..d_needed {
        let top = h * 0.5f64.powi(k as i32);
        let mut acc = 0.0;
        for i in 0..m {
            let tb = top * 2f64.powf(-(i as f64) / m as f64);
            let ta = top * 2f64.powf(-((i + 1) as f64) / m as f64);
            let time_weight = 2.0 * (tb.sqrt() - ta.sqrt());
            let mut space = 0.0;
            for j in 0..nz {
                let inf = infimum(ta, tb, edges[j], edges[j + 1]);
                if inf > 0.0 {
                    space += masses[j] * inf;
                }
            }
            acc += time_weight * space;
        }
        per_dyadic.push(acc);
    }

    let mut out = Vec::with_capacity(levels);
    let mut cum = 0.0;
    let mut done = 0;
    for l in 1..=levels {
        let want = depth(l);
        let dl = want.min(d_max);
        while done < dl {
            cum += per_dyadic[done];
            done += 1;
        }
        out.push(ProbeLevel {
            level: l,
            depth: dl,
            tau_min: h * 0.5f64.powi(dl as i32),
            bound: cum,
            floor_reached: want > d_max,
        });
    }

    let valid: Vec<f64> = out.iter().filter(|l| !l.floor_reached).map(|l| l.bound).collect();
    let n = valid.len();
    let last = out.last().map(|l| l.bound).unwrap_or(0.0);
    let plateau = if n >= 2 {
        let inc = valid[n - 1] - valid[n - 2];
        valid[n - 1] == 0.0 || inc <= opts.plateau_rel * valid[n - 1]
    } else {
        last == 0.0
    };
    // Per-dyadic contributions c_k decaying no faster than 1/k signal a
    // divergent (logarithmic or slower) tail; integrable power singularities
    // decay geometrically in k.
    let kk = per_dyadic.len();
    let non_decaying = kk >= opts.min_tail_depth.max(4) && {
        let weighted = |r: std::ops::Range<usize>| {
            let len = r.len() as f64;
            r.map(|k| (k + 1) as f64 * per_dyadic[k]).sum::<f64>() / len
        };
        let a = weighted(kk / 4..kk / 2);
        let b = weighted(kk / 2..kk);
        a > 0.0 && b >= 0.5 * a
    };
    let diverged = !plateau && (last > opts.threshold || non_decaying);

    Ok(ProbeReport {
        s_star: s,
        x_star: p.x.clone(),
        levels: out,
        diverged,
        plateau,
        certified,
        threshold: opts.threshold,
    })
}
