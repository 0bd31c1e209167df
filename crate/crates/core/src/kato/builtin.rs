//! Builtin drifts, all radially structured about a center except `constant`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::field::{Direction, DriftField, Profile, SupportBox, VectorField};
use crate::kernel::SpaceTimePoint;

/// Amplitude of `radial_singular` used by the default scenario. It keeps
/// `N^{1/4,+}_{1/2}` of the unmollified drift near 35% of the smallness threshold in d = 3.
pub const DEFAULT_RADIAL_AMPLITUDE: f64 = 4e-4;

/// Names and one-line descriptions of the builtin drifts.
pub const BUILTIN_DRIFTS: &[(&str, &str)] = &[
    ("zero", "b = 0"),
    ("constant", "b = v on a box (params: vector, t0, t1, half_width)"),
    (
        "radial_singular",
        "b = M y/|y|^(1+gamma) on |y| <= radius, t in [t0, t1] (params: amplitude, gamma, radius, t0, t1)",
    ),
    (
        "lpq_bump",
        "b = M |t-t0|^(-a) |y|^(-b) e1 on |t-t0| <= width, |y| <= radius (params: amplitude, a, b, t0, width, radius)",
    ),
    (
        "example_f",
        "b = e1 / ((1-t)^(1/2) ln(1/(1-t))) on 1/2 <= t < 1, |y| <= k (1-t)^(1/2) (params: radius_factor, default 3d)",
    ),
    ("example_f_reversed", "time reversal t -> 1-t of example_f (params: radius_factor)"),
    (
        "smooth_gaussian",
        "b = M exp(-|y|^2/(2 sigma^2) - (t-tc)^2/(2 sigma_t^2)) e1, cut at 6 sigma (params: amplitude, sigma, tc, sigma_t)",
    ),
];

/// A parameter value: a number or a list of numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

pub type BuiltinParams = BTreeMap<String, ParamValue>;

struct Params<'a> {
    name: &'a str,
    map: &'a BuiltinParams,
}

impl Params<'_> {
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(config(format!(
                    "unknown parameter '{k}' for drift '{}' (allowed: {})",
                    self.name,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn num(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(_) => Err(config(format!("parameter '{key}' of drift '{}' must be a finite number", self.name))),
        }
    }

    fn list(&self, key: &str, d: usize) -> Result<Option<Vec<f64>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(ParamValue::List(v)) if v.len() == d && v.iter().all(|x| x.is_finite()) => Ok(Some(v.clone())),
            Some(ParamValue::Number(x)) if d == 1 => Ok(Some(vec![*x])),
            Some(_) => Err(config(format!(
                "parameter '{key}' of drift '{}' must be a list of {d} finite numbers",
                self.name
            ))),
        }
    }
}

/// Construct a builtin drift in dimension `d`.
pub fn builtin_drift(name: &str, d: usize, params: &BuiltinParams) -> Result<DriftField> {
    if d == 0 {
        return Err(config("dimension must be positive"));
    }
    let p = Params { name, map: params };
    let e1 = {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    };
    match name {
        "zero" => {
            p.check_keys(&[])?;
            Ok(DriftField::zero(d))
        }
        "constant" => {
            p.check_keys(&["vector", "t0", "t1", "half_width"])?;
            let v = p.list("vector", d)?.unwrap_or_else(|| e1.clone());
            let t0 = p.num("t0", 0.0)?;
            let t1 = p.num("t1", 1.0)?;
            let hw = p.num("half_width", 1.0)?;
            if !(t1 > t0) || !(hw > 0.0) {
                return Err(config("constant drift needs t1 > t0 and half_width > 0"));
            }
            let support = SupportBox::cube([t0, t1], &vec![0.0; d], hw);
            Ok(DriftField::new(ConstantDrift { v, support }, "constant", true))
        }
        "radial_singular" => {
            p.check_keys(&["amplitude", "gamma", "radius", "t0", "t1"])?;
            let m = p.num("amplitude", 1.0)?;
            let gamma = p.num("gamma", 0.5)?;
            let radius = p.num("radius", 1.0)?;
            let t0 = p.num("t0", 0.25)?;
            let t1 = p.num("t1", 0.5)?;
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(config(format!("radial_singular needs gamma in (0, 1), got {gamma}")));
            }
            if !(radius > 0.0) || !(t1 > t0) || t0 < 0.0 {
                return Err(config("radial_singular needs radius > 0 and 0 <= t0 < t1"));
            }
            let prof = PowerProfile {
                m,
                t_exp: 0.0,
                r_exp: gamma,
                t_center: t0,
                window: [t0, t1],
                radius,
            };
            Ok(radial_drift(prof, d, radius, Direction::Outward, vec![SpaceTimePoint::origin(t0, d)], "radial_singular", false))
        }
        "lpq_bump" => {
            p.check_keys(&["amplitude", "a", "b", "t0", "width", "radius"])?;
            let m = p.num("amplitude", 1.0)?;
            let a = p.num("a", 0.2)?;
            let b = p.num("b", 0.5)?;
            let t0 = p.num("t0", 0.5)?;
            let w = p.num("width", 0.25)?;
            let radius = p.num("radius", 1.0)?;
            // |t|^-a |y|^-b lies in L^q_t L^p_x for q < 1/a, p < d/b; some pair with
            // d/(2p) + 1/q < 1/2 exists iff b/2 + a < 1/2.
            if !(a >= 0.0 && b >= 0.0 && b / 2.0 + a < 0.5) {
                return Err(config(format!("lpq_bump needs a, b >= 0 and b/2 + a < 1/2, got a = {a}, b = {b}")));
            }
            if !(w > 0.0 && radius > 0.0 && t0 - w >= 0.0) {
                return Err(config("lpq_bump needs width > 0, radius > 0 and t0 - width >= 0"));
            }
            let prof = PowerProfile {
                m,
                t_exp: a,
                r_exp: b,
                t_center: t0,
                window: [t0 - w, t0 + w],
                radius,
            };
            Ok(radial_drift(prof, d, radius, Direction::Fixed(e1), vec![SpaceTimePoint::origin(t0, d)], "lpq_bump", false))
        }
        "example_f" | "example_f_reversed" => {
            p.check_keys(&["radius_factor"])?;
            let k = p.num("radius_factor", 3.0 * d as f64)?;
            if !(k > 0.0) {
                return Err(config("radius_factor must be positive"));
            }
            let reversed = name == "example_f_reversed";
            let prof = ExampleProfile { k, reversed };
            let locus = SpaceTimePoint::origin(if reversed { 0.0 } else { 1.0 }, d);
            Ok(radial_drift(prof, d, k * 0.5f64.sqrt(), Direction::Fixed(e1), vec![locus], name, false))
        }
        "smooth_gaussian" => {
            p.check_keys(&["amplitude", "sigma", "tc", "sigma_t"])?;
            let m = p.num("amplitude", 1.0)?;
            let sigma = p.num("sigma", 0.1)?;
            let tc = p.num("tc", 0.5)?;
            let sigma_t = p.num("sigma_t", 0.05)?;
            if !(sigma > 0.0 && sigma_t > 0.0) || tc - 6.0 * sigma_t < 0.0 {
                return Err(config("smooth_gaussian needs sigma, sigma_t > 0 and tc >= 6 sigma_t"));
            }
            let prof = GaussProfile { m, sigma, tc, sigma_t };
            Ok(radial_drift(prof, d, 6.0 * sigma, Direction::Fixed(e1), Vec::new(), "smooth_gaussian", true))
        }
        other => Err(config(format!(
            "unknown drift '{other}' (known: {})",
            BUILTIN_DRIFTS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn radial_drift(
    prof: impl Profile + 'static,
    d: usize,
    radius: f64,
    direction: Direction,
    loci: Vec<SpaceTimePoint>,
    label: &str,
    smooth: bool,
) -> DriftField {
    let tb = prof.time_breaks();
    let t0 = tb.iter().cloned().fold(f64::INFINITY, f64::min);
    let t1 = tb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center = vec![0.0; d];
    let support = SupportBox::cube([t0, t1], &center, radius);
    DriftField::new(
        RadialDrift {
            center,
            profile: Arc::new(prof),
            direction,
            support,
            loci,
        },
        label,
        smooth,
    )
}

/// `b(t, y) = ψ(t, |y - c|) e(y)` zero outside a support box.
pub(crate) struct RadialDrift {
    pub center: Vec<f64>,
    pub profile: Arc<dyn Profile>,
    pub direction: Direction,
    pub support: SupportBox,
    pub loci: Vec<SpaceTimePoint>,
}

impl VectorField for RadialDrift {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if !self.support.contains(t, y) {
            return;
        }
        let mut r2 = 0.0;
        for (a, c) in y.iter().zip(&self.center) {
            r2 += (a - c) * (a - c);
        }
        let r = r2.sqrt();
        match &self.direction {
            Direction::Outward => {
                if r == 0.0 {
                    return;
                }
                let v = self.profile.value(t, r);
                if v == 0.0 {
                    return;
                }
                let k = v / r;
                for ((o, a), c) in out.iter_mut().zip(y).zip(&self.center) {
                    *o = k * (a - c);
                }
            }
            Direction::Fixed(e) => {
                let v = self.profile.value(t, r);
                if v == 0.0 {
                    return;
                }
                for (o, ei) in out.iter_mut().zip(e) {
                    *o = v * ei;
                }
            }
        }
    }
    fn support(&self) -> Option<SupportBox> {
        Some(self.support.clone())
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.profile.time_breaks()
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.loci.clone()
    }
    fn radial(&self) -> Option<(Vec<f64>, Arc<dyn Profile>, Direction)> {
        Some((self.center.clone(), self.profile.clone(), self.direction.clone()))
    }
    fn sup_norm(&self) -> Option<f64> {
        self.profile.abs_sup()
    }
}

struct ConstantDrift {
    v: Vec<f64>,
    support: SupportBox,
}

impl VectorField for ConstantDrift {
    fn dim(&self) -> usize {
        self.v.len()
    }
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        if self.support.contains(t, y) {
            out.copy_from_slice(&self.v);
        } else {
            out.fill(0.0);
        }
    }
    fn support(&self) -> Option<SupportBox> {
        Some(self.support.clone())
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(self.v.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

/// `m |t - t_c|^{-t_exp} r^{-r_exp}` on `t ∈ window`, `r ≤ radius`.
struct PowerProfile {
    m: f64,
    t_exp: f64,
    r_exp: f64,
    t_center: f64,
    window: [f64; 2],
    radius: f64,
}

impl PowerProfile {
    fn time_factor(&self, t: f64) -> f64 {
        if self.t_exp == 0.0 {
            1.0
        } else {
            (t - self.t_center).abs().powf(-self.t_exp)
        }
    }
}

impl Profile for PowerProfile {
    fn value(&self, t: f64, r: f64) -> f64 {
        if t < self.window[0] || t > self.window[1] || r > self.radius {
            return 0.0;
        }
        self.m * self.time_factor(t) * r.powf(-self.r_exp)
    }
    fn time_breaks(&self) -> Vec<f64> {
        let mut b = vec![self.window[0], self.window[1]];
        if self.t_exp != 0.0 {
            b.push(self.t_center);
        }
        b
    }
    fn radial_breaks(&self, _t: f64) -> Vec<f64> {
        vec![self.radius]
    }
    fn abs_infimum(&self, t: [f64; 2], r: [f64; 2]) -> Option<f64> {
        if t[0] < self.window[0] || t[1] > self.window[1] || r[1] > self.radius {
            return Some(0.0);
        }
        // |t - t_c|^{-a} is smallest at the endpoint farthest from t_c.
        let far = (t[0] - self.t_center).abs().max((t[1] - self.t_center).abs());
        let tf = if self.t_exp == 0.0 { 1.0 } else { far.powf(-self.t_exp) };
        Some(self.m.abs() * tf * r[1].powf(-self.r_exp))
    }
    fn abs_sup(&self) -> Option<f64> {
        if self.m == 0.0 {
            Some(0.0)
        } else {
            None
        }
    }
}

/// `g(w) = 1/(√w ln(1/w))` on `|y| ≤ k √w`, with `w = 1 - t` (forward) or `w = t` (reversed).
struct ExampleProfile {
    k: f64,
    reversed: bool,
}

fn example_g(w: f64) -> f64 {
    -1.0 / (w.sqrt() * w.ln())
}

impl ExampleProfile {
    /// `w` for time `t`, `None` outside the active time range.
    fn w(&self, t: f64) -> Option<f64> {
        if self.reversed {
            (t > 0.0 && t <= 0.5).then_some(t)
        } else {
            (t >= 0.5 && t < 1.0).then_some(1.0 - t)
        }
    }
}

impl Profile for ExampleProfile {
    fn value(&self, t: f64, r: f64) -> f64 {
        match self.w(t) {
            Some(w) if r <= self.k * w.sqrt() => example_g(w),
            _ => 0.0,
        }
    }
    fn time_breaks(&self) -> Vec<f64> {
        if self.reversed {
            vec![0.0, 0.5]
        } else {
            vec![0.5, 1.0]
        }
    }
    fn radial_breaks(&self, t: f64) -> Vec<f64> {
        match self.w(t) {
            Some(w) => vec![self.k * w.sqrt()],
            None => Vec::new(),
        }
    }
    fn abs_infimum(&self, t: [f64; 2], r: [f64; 2]) -> Option<f64> {
        let (wa, wb) = match (self.w(t[0]), self.w(t[1])) {
            (Some(a), Some(b)) => (a.min(b), a.max(b)),
            _ => return Some(0.0),
        };
        if r[1] > self.k * wa.sqrt() {
            return Some(0.0);
        }
        // g decreases on (0, e^{-2}] and increases on [e^{-2}, 1/2].
        let wm = (-2.0f64).exp();
        let v = if wa <= wm && wm <= wb {
            example_g(wm)
        } else {
            example_g(wa).min(example_g(wb))
        };
        Some(v)
    }
}

struct GaussProfile {
    m: f64,
    sigma: f64,
    tc: f64,
    sigma_t: f64,
}

impl Profile for GaussProfile {
    fn value(&self, t: f64, r: f64) -> f64 {
        let dt = t - self.tc;
        if r > 6.0 * self.sigma || dt.abs() > 6.0 * self.sigma_t {
            return 0.0;
        }
        self.m * (-(r * r) / (2.0 * self.sigma * self.sigma) - dt * dt / (2.0 * self.sigma_t * self.sigma_t)).exp()
    }
    fn time_breaks(&self) -> Vec<f64> {
        vec![self.tc - 6.0 * self.sigma_t, self.tc + 6.0 * self.sigma_t]
    }
    fn radial_breaks(&self, _t: f64) -> Vec<f64> {
        vec![6.0 * self.sigma]
    }
    fn abs_infimum(&self, t: [f64; 2], r: [f64; 2]) -> Option<f64> {
        let far = (t[0] - self.tc).abs().max((t[1] - self.tc).abs());
        if r[1] > 6.0 * self.sigma || far > 6.0 * self.sigma_t {
            return Some(0.0);
        }
        Some(self.m.abs() * (-(r[1] * r[1]) / (2.0 * self.sigma * self.sigma) - far * far / (2.0 * self.sigma_t * self.sigma_t)).exp())
    }
    fn abs_sup(&self) -> Option<f64> {
        Some(self.m.abs())
    }
    fn length_scales(&self) -> (f64, f64) {
        (self.sigma_t, self.sigma)
    }
}
