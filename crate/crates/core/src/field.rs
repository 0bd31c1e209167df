//! Space-time fields: drifts, scalar fields, support boxes and grid backings.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::kernel::SpaceTimePoint;

/// Axis-aligned closed box `[t0, t1] × Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub t: [f64; 2],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SupportBox {
    pub fn new(t: [f64; 2], lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        SupportBox { t, lo, hi }
    }

    /// Cube of half-width `half` about `center` over the time interval `t`.
    pub fn cube(t: [f64; 2], center: &[f64], half: f64) -> Self {
        SupportBox {
            t,
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, t: f64, y: &[f64]) -> bool {
        t >= self.t[0]
            && t <= self.t[1]
            && y.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn dilate(&self, r: f64) -> Self {
        SupportBox {
            t: [self.t[0] - r, self.t[1] + r],
            lo: self.lo.iter().map(|a| a - r).collect(),
            hi: self.hi.iter().map(|b| b + r).collect(),
        }
    }

    pub fn intersect(&self, o: &SupportBox) -> Option<SupportBox> {
        let t = [self.t[0].max(o.t[0]), self.t[1].min(o.t[1])];
        let lo: Vec<f64> = self.lo.iter().zip(&o.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&o.hi).map(|(a, b)| a.min(*b)).collect();
        if t[0] > t[1] || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            None
        } else {
            Some(SupportBox { t, lo, hi })
        }
    }

    pub fn center(&self) -> (f64, Vec<f64>) {
        (
            0.5 * (self.t[0] + self.t[1]),
            self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect(),
        )
    }

    /// Squared Euclidean distance from `y` to the spatial box.
    pub fn space_dist2(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&a, &b))| {
                let e = if v < a {
                    a - v
                } else if v > b {
                    v - b
                } else {
                    0.0
                };
                e * e
            })
            .sum()
    }

    /// Euclidean distance in R^{d+1} from `(t, y)` to the box.
    pub fn distance(&self, t: f64, y: &[f64]) -> f64 {
        let et = if t < self.t[0] {
            self.t[0] - t
        } else if t > self.t[1] {
            t - self.t[1]
        } else {
            0.0
        };
        (et * et + self.space_dist2(y)).sqrt()
    }

    /// Largest distance from `c` to a point of the spatial box.
    pub fn max_radius_from(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&a, &b))| (v - a).abs().max((b - v).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Radial profile `ψ(t, r)` of a field that depends on space only through
/// the distance `r` to a center.
pub trait Profile: Send + Sync {
    fn value(&self, t: f64, r: f64) -> f64;
    /// Times where `ψ` is discontinuous or singular.
    fn time_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Radii where `ψ(t, ·)` is discontinuous or singular.
    fn radial_breaks(&self, _t: f64) -> Vec<f64> {
        Vec::new()
    }
    /// Exact infimum of `|ψ|` over a time range and radius range, when known.
    fn abs_infimum(&self, _t: [f64; 2], _r: [f64; 2]) -> Option<f64> {
        None
    }
    /// Supremum of `|ψ|`, `None` when unbounded or unknown.
    fn abs_sup(&self) -> Option<f64> {
        None
    }
    /// Time and radial length scales of smooth variation (infinite if none).
    fn length_scales(&self) -> (f64, f64) {
        (f64::INFINITY, f64::INFINITY)
    }
}

/// Angular factor multiplying a radial profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angular {
    /// Purely radial field.
    Uniform,
    /// `|ω_i|` where `ω` is the unit vector from the center.
    AbsCos(usize),
}

/// Radial structure of a scalar field: `f(t, y) = ψ(t, |y - c|) · A(ω)`.
#[derive(Clone)]
pub struct Radial {
    pub center: Vec<f64>,
    pub profile: Arc<dyn Profile>,
    pub angular: Angular,
}

impl fmt::Debug for Radial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Radial")
            .field("center", &self.center)
            .field("angular", &self.angular)
            .finish()
    }
}

/// Direction of a radially structured drift `b = ψ(t, |y - c|) · e(y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Direction {
    /// `e(y) = (y - c)/|y - c|`.
    Outward,
    /// Constant unit vector.
    Fixed(Vec<f64>),
}

/// Scalar space-time field.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, y: &[f64]) -> f64;
    fn support(&self) -> Option<SupportBox> {
        None
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.support().map(|b| b.t.to_vec()).unwrap_or_default()
    }
    /// Points where the field is unbounded.
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        Vec::new()
    }
    fn radial(&self) -> Option<Radial> {
        None
    }
    fn sup_norm(&self) -> Option<f64> {
        None
    }
    /// Value of a field known to be constant everywhere.
    fn constant_value(&self) -> Option<f64> {
        None
    }
    /// Grid backing, when the field is a multilinear interpolant.
    fn as_grid(&self) -> Option<&GridScalar> {
        None
    }
}

/// Vector space-time field.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]);
    fn support(&self) -> Option<SupportBox> {
        None
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.support().map(|b| b.t.to_vec()).unwrap_or_default()
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        Vec::new()
    }
    /// Radial structure `b = ψ(t, |y - c|) e(y)`, if any.
    fn radial(&self) -> Option<(Vec<f64>, Arc<dyn Profile>, Direction)> {
        None
    }
    /// Supremum of `|b|`.
    fn sup_norm(&self) -> Option<f64> {
        None
    }
}

/// A drift `b(t, y)` together with its label and smoothness flag.
#[derive(Clone)]
pub struct DriftField {
    inner: Arc<dyn VectorField>,
    label: String,
    smooth: bool,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("label", &self.label)
            .field("smooth", &self.smooth)
            .field("support", &self.support())
            .finish()
    }
}

impl DriftField {
    pub fn new(inner: impl VectorField + 'static, label: impl Into<String>, smooth: bool) -> Self {
        Self::from_arc(Arc::new(inner), label, smooth)
    }

    pub fn from_arc(inner: Arc<dyn VectorField>, label: impl Into<String>, smooth: bool) -> Self {
        DriftField {
            inner,
            label: label.into(),
            smooth,
        }
    }

    pub fn zero(d: usize) -> Self {
        Self::new(ZeroDrift { d }, "zero", true)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn inner(&self) -> &Arc<dyn VectorField> {
        &self.inner
    }

    pub fn support(&self) -> Option<SupportBox> {
        self.inner.support()
    }

    pub fn time_breaks(&self) -> Vec<f64> {
        self.inner.time_breaks()
    }

    pub fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.inner.singular_loci()
    }

    pub fn radial(&self) -> Option<(Vec<f64>, Arc<dyn Profile>, Direction)> {
        self.inner.radial()
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.inner.sup_norm()
    }

    /// Evaluate into `out`; zero outside the declared support.
    #[inline]
    pub fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.inner.eval(t, y, out)
    }

    pub fn eval_vec(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(t, y, &mut out);
        out
    }

    /// Scalar field `|b|`.
    pub fn magnitude(&self) -> Magnitude {
        Magnitude(self.clone())
    }

    /// Scalar field `b^i`.
    pub fn component(&self, i: usize) -> Component {
        assert!(i < self.dim());
        Component(self.clone(), i)
    }

    /// `a · b`.
    pub fn scaled(&self, a: f64) -> DriftField {
        let label = format!("{}*{}", a, self.label);
        DriftField::new(Combination { terms: vec![(a, self.clone())] }, label, self.smooth)
    }

    /// `Σ a_k b_k`.
    pub fn combination(terms: Vec<(f64, DriftField)>) -> DriftField {
        assert!(!terms.is_empty());
        let smooth = terms.iter().all(|(_, b)| b.smooth);
        let label = terms
            .iter()
            .map(|(a, b)| format!("{}*{}", a, b.label))
            .collect::<Vec<_>>()
            .join("+");
        DriftField::new(Combination { terms }, label, smooth)
    }

    /// Replace the smoothness flag.
    pub fn with_smooth(mut self, smooth: bool) -> Self {
        self.smooth = smooth;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

struct ZeroDrift {
    d: usize,
}

impl VectorField for ZeroDrift {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, _t: f64, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn support(&self) -> Option<SupportBox> {
        Some(SupportBox::cube([0.0, 0.0], &vec![0.0; self.d], 0.0))
    }
    fn radial(&self) -> Option<(Vec<f64>, Arc<dyn Profile>, Direction)> {
        let mut e = vec![0.0; self.d];
        e[0] = 1.0;
        Some((vec![0.0; self.d], Arc::new(ScaledProfile(0.0, Arc::new(UnitProfile))), Direction::Fixed(e)))
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(0.0)
    }
}

struct UnitProfile;

impl Profile for UnitProfile {
    fn value(&self, _t: f64, _r: f64) -> f64 {
        1.0
    }
    fn abs_infimum(&self, _t: [f64; 2], _r: [f64; 2]) -> Option<f64> {
        Some(1.0)
    }
    fn abs_sup(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `a · ψ`.
pub struct ScaledProfile(pub f64, pub Arc<dyn Profile>);

impl Profile for ScaledProfile {
    fn value(&self, t: f64, r: f64) -> f64 {
        if self.0 == 0.0 {
            0.0
        } else {
            self.0 * self.1.value(t, r)
        }
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.1.time_breaks()
    }
    fn radial_breaks(&self, t: f64) -> Vec<f64> {
        self.1.radial_breaks(t)
    }
    fn abs_infimum(&self, t: [f64; 2], r: [f64; 2]) -> Option<f64> {
        if self.0 == 0.0 {
            return Some(0.0);
        }
        self.1.abs_infimum(t, r).map(|v| v * self.0.abs())
    }
    fn abs_sup(&self) -> Option<f64> {
        if self.0 == 0.0 {
            return Some(0.0);
        }
        self.1.abs_sup().map(|v| v * self.0.abs())
    }
}

/// `|ψ|`.
struct AbsProfile(Arc<dyn Profile>);

impl Profile for AbsProfile {
    fn value(&self, t: f64, r: f64) -> f64 {
        self.0.value(t, r).abs()
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }
    fn radial_breaks(&self, t: f64) -> Vec<f64> {
        self.0.radial_breaks(t)
    }
    fn abs_infimum(&self, t: [f64; 2], r: [f64; 2]) -> Option<f64> {
        self.0.abs_infimum(t, r)
    }
    fn abs_sup(&self) -> Option<f64> {
        self.0.abs_sup()
    }
}

struct Combination {
    terms: Vec<(f64, DriftField)>,
}

impl VectorField for Combination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; out.len()];
        for (a, b) in &self.terms {
            b.eval(t, y, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += a * v;
            }
        }
    }
    fn support(&self) -> Option<SupportBox> {
        let mut acc: Option<SupportBox> = None;
        for (_, b) in &self.terms {
            let s = b.support()?;
            acc = Some(match acc {
                None => s,
                Some(a) => SupportBox {
                    t: [a.t[0].min(s.t[0]), a.t[1].max(s.t[1])],
                    lo: a.lo.iter().zip(&s.lo).map(|(x, y)| x.min(*y)).collect(),
                    hi: a.hi.iter().zip(&s.hi).map(|(x, y)| x.max(*y)).collect(),
                },
            });
        }
        acc
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.terms.iter().flat_map(|(_, b)| b.time_breaks()).collect()
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.terms
            .iter()
            .filter(|(a, _)| *a != 0.0)
            .flat_map(|(_, b)| b.singular_loci())
            .collect()
    }
    fn radial(&self) -> Option<(Vec<f64>, Arc<dyn Profile>, Direction)> {
        if self.terms.len() != 1 {
            return None;
        }
        let (a, b) = &self.terms[0];
        let (c, p, dir) = b.radial()?;
        Some((c, Arc::new(ScaledProfile(*a, p)), dir))
    }
    fn sup_norm(&self) -> Option<f64> {
        let mut s = 0.0;
        for (a, b) in &self.terms {
            s += a.abs() * b.sup_norm()?;
        }
        Some(s)
    }
}

/// `|b|` as a scalar field.
#[derive(Clone, Debug)]
pub struct Magnitude(pub DriftField);

impl ScalarField for Magnitude {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        let mut out = [0.0; 16];
        let d = self.0.dim();
        if d <= 16 {
            self.0.eval(t, y, &mut out[..d]);
            out[..d].iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            self.0.eval_vec(t, y).iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }
    fn support(&self) -> Option<SupportBox> {
        self.0.support()
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.0.singular_loci()
    }
    fn radial(&self) -> Option<Radial> {
        let (center, profile, dir) = self.0.radial()?;
        let profile: Arc<dyn Profile> = match dir {
            Direction::Outward => Arc::new(AbsProfile(profile)),
            Direction::Fixed(e) => {
                let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                Arc::new(AbsProfile(Arc::new(ScaledProfile(n, profile))))
            }
        };
        Some(Radial {
            center,
            profile,
            angular: Angular::Uniform,
        })
    }
    fn sup_norm(&self) -> Option<f64> {
        self.0.sup_norm()
    }
}

/// Component `b^i` as a scalar field.
#[derive(Clone, Debug)]
pub struct Component(pub DriftField, pub usize);

impl ScalarField for Component {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        let mut out = [0.0; 16];
        let d = self.0.dim();
        if d <= 16 {
            self.0.eval(t, y, &mut out[..d]);
            out[self.1]
        } else {
            self.0.eval_vec(t, y)[self.1]
        }
    }
    fn support(&self) -> Option<SupportBox> {
        self.0.support()
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.0.singular_loci()
    }
    fn radial(&self) -> Option<Radial> {
        let (center, profile, dir) = self.0.radial()?;
        Some(match dir {
            Direction::Outward => Radial {
                center,
                profile,
                angular: Angular::AbsCos(self.1),
            },
            Direction::Fixed(e) => Radial {
                center,
                profile: Arc::new(ScaledProfile(e[self.1], profile)),
                angular: Angular::Uniform,
            },
        })
    }
    fn sup_norm(&self) -> Option<f64> {
        self.0.sup_norm()
    }
}

/// `M` on an optional support box, `0` outside it.
#[derive(Clone, Debug)]
pub struct ConstantScalar {
    pub d: usize,
    pub value: f64,
    pub support: Option<SupportBox>,
}

impl ConstantScalar {
    pub fn new(d: usize, value: f64) -> Self {
        ConstantScalar { d, value, support: None }
    }

    pub fn on(d: usize, value: f64, support: SupportBox) -> Self {
        ConstantScalar {
            d,
            value,
            support: Some(support),
        }
    }
}

impl ScalarField for ConstantScalar {
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        match &self.support {
            Some(b) if !b.contains(t, y) => 0.0,
            _ => self.value,
        }
    }
    fn support(&self) -> Option<SupportBox> {
        self.support.clone()
    }
    fn radial(&self) -> Option<Radial> {
        if self.support.is_some() {
            return None;
        }
        Some(Radial {
            center: vec![0.0; self.d],
            profile: Arc::new(ScaledProfile(self.value, Arc::new(UnitProfile))),
            angular: Angular::Uniform,
        })
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(self.value.abs())
    }
    fn constant_value(&self) -> Option<f64> {
        self.support.is_none().then_some(self.value)
    }
}

/// Smooth space-time bump `A · exp(1 - 1/(1 - q))`, `q = ((t-tc)/rt)² + |y-xc|²/ry²`,
/// with peak value `A` at the center.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothBump {
    pub amplitude: f64,
    pub t_center: f64,
    pub x_center: Vec<f64>,
    pub t_radius: f64,
    pub x_radius: f64,
}

impl SmoothBump {
    pub fn new(amplitude: f64, t_center: f64, x_center: Vec<f64>, t_radius: f64, x_radius: f64) -> Self {
        SmoothBump {
            amplitude,
            t_center,
            x_center,
            t_radius,
            x_radius,
        }
    }
}

impl ScalarField for SmoothBump {
    fn dim(&self) -> usize {
        self.x_center.len()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        let dt = (t - self.t_center) / self.t_radius;
        let mut q = dt * dt;
        for (a, c) in y.iter().zip(&self.x_center) {
            let e = (a - c) / self.x_radius;
            q += e * e;
        }
        if q >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - q)).exp()
        }
    }
    fn support(&self) -> Option<SupportBox> {
        Some(SupportBox {
            t: [self.t_center - self.t_radius, self.t_center + self.t_radius],
            lo: self.x_center.iter().map(|c| c - self.x_radius).collect(),
            hi: self.x_center.iter().map(|c| c + self.x_radius).collect(),
        })
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(self.amplitude.abs())
    }
}

/// Scalar field from a closure.
pub struct FnScalar<F> {
    d: usize,
    f: F,
    support: Option<SupportBox>,
    sup: Option<f64>,
}

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> FnScalar<F> {
    pub fn new(d: usize, f: F) -> Self {
        FnScalar {
            d,
            f,
            support: None,
            sup: None,
        }
    }

    pub fn with_support(mut self, s: SupportBox) -> Self {
        self.support = Some(s);
        self
    }

    pub fn with_sup(mut self, s: f64) -> Self {
        self.sup = Some(s);
        self
    }
}

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> ScalarField for FnScalar<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        match &self.support {
            Some(b) if !b.contains(t, y) => 0.0,
            _ => (self.f)(t, y),
        }
    }
    fn support(&self) -> Option<SupportBox> {
        self.support.clone()
    }
    fn sup_norm(&self) -> Option<f64> {
        self.sup
    }
}

/// Scalar field restricted to a time slab `[t0, t1]`.
pub struct TimeSlab<'a> {
    pub inner: &'a dyn ScalarField,
    pub t: [f64; 2],
}

struct SlabProfile {
    inner: Arc<dyn Profile>,
    t: [f64; 2],
}

impl Profile for SlabProfile {
    fn value(&self, t: f64, r: f64) -> f64 {
        if t < self.t[0] || t > self.t[1] {
            0.0
        } else {
            self.inner.value(t, r)
        }
    }
    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.inner.time_breaks();
        b.extend(self.t);
        b
    }
    fn radial_breaks(&self, t: f64) -> Vec<f64> {
        self.inner.radial_breaks(t)
    }
    fn abs_infimum(&self, t: [f64; 2], r: [f64; 2]) -> Option<f64> {
        if t[0] < self.t[0] || t[1] > self.t[1] {
            return Some(0.0);
        }
        self.inner.abs_infimum(t, r)
    }
    fn abs_sup(&self) -> Option<f64> {
        self.inner.abs_sup()
    }
}

impl ScalarField for TimeSlab<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        if t < self.t[0] || t > self.t[1] {
            0.0
        } else {
            self.inner.value(t, y)
        }
    }
    fn support(&self) -> Option<SupportBox> {
        match self.inner.support() {
            Some(mut b) => {
                b.t = [b.t[0].max(self.t[0]), b.t[1].min(self.t[1])];
                Some(b)
            }
            None => None,
        }
    }
    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.inner.time_breaks();
        b.extend(self.t);
        b
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.inner
            .singular_loci()
            .into_iter()
            .filter(|p| p.s >= self.t[0] && p.s <= self.t[1])
            .collect()
    }
    fn radial(&self) -> Option<Radial> {
        let r = self.inner.radial()?;
        Some(Radial {
            center: r.center,
            profile: Arc::new(SlabProfile { inner: r.profile, t: self.t }),
            angular: r.angular,
        })
    }
    fn sup_norm(&self) -> Option<f64> {
        self.inner.sup_norm()
    }
}

/// Scalar field `ψ(t, |y - c|)` with an explicit support box.
#[derive(Clone)]
pub struct RadialScalar {
    pub center: Vec<f64>,
    pub profile: Arc<dyn Profile>,
    pub support: Option<SupportBox>,
    pub loci: Vec<SpaceTimePoint>,
}

impl ScalarField for RadialScalar {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        if let Some(b) = &self.support {
            if !b.contains(t, y) {
                return 0.0;
            }
        }
        let r = y.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
        self.profile.value(t, r)
    }
    fn support(&self) -> Option<SupportBox> {
        self.support.clone()
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.profile.time_breaks()
    }
    fn singular_loci(&self) -> Vec<SpaceTimePoint> {
        self.loci.clone()
    }
    fn radial(&self) -> Option<Radial> {
        Some(Radial {
            center: self.center.clone(),
            profile: self.profile.clone(),
            angular: Angular::Uniform,
        })
    }
    fn sup_norm(&self) -> Option<f64> {
        self.profile.abs_sup()
    }
}

/// Uniformly spaced axis with `n ≥ 2` nodes on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl UniformAxis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi >= lo);
        UniformAxis { lo, hi, n }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Cell index and fractional offset, `None` outside `[lo, hi]`.
    #[inline]
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let w = self.hi - self.lo;
        if w == 0.0 {
            return Some((0, 0.0));
        }
        let p = (x - self.lo) / w * (self.n - 1) as f64;
        let i = (p.floor() as usize).min(self.n - 2);
        Some((i, (p - i as f64).clamp(0.0, 1.0)))
    }
}

/// Tensor grid over a space-time box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t: UniformAxis,
    pub x: Vec<UniformAxis>,
}

impl Grid {
    pub fn over(b: &SupportBox, nt: usize, nx: usize) -> Self {
        Grid {
            t: UniformAxis::new(b.t[0], b.t[1], nt),
            x: b.lo.iter().zip(&b.hi).map(|(&a, &c)| UniformAxis::new(a, c, nx)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn len(&self) -> usize {
        self.t.n * self.x.iter().map(|a| a.n).product::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn support(&self) -> SupportBox {
        SupportBox {
            t: [self.t.lo, self.t.hi],
            lo: self.x.iter().map(|a| a.lo).collect(),
            hi: self.x.iter().map(|a| a.hi).collect(),
        }
    }

    /// Node at flat index `k` (time-major, last space axis fastest).
    pub fn node(&self, mut k: usize, y: &mut [f64]) -> f64 {
        for j in (0..self.x.len()).rev() {
            let n = self.x[j].n;
            y[j] = self.x[j].node(k % n);
            k /= n;
        }
        self.t.node(k)
    }

    /// Visit the multilinear stencil at `(t, y)`; returns false outside the grid.
    #[inline]
    pub fn stencil<F: FnMut(usize, f64)>(&self, t: f64, y: &[f64], mut visit: F) -> bool {
        let d = self.x.len();
        let mut idx = [0usize; 9];
        let mut frac = [0f64; 9];
        let mut strides = [0usize; 9];
        let Some((i, f)) = self.t.locate(t) else { return false };
        idx[0] = i;
        frac[0] = f;
        for j in 0..d {
            let Some((i, f)) = self.x[j].locate(y[j]) else { return false };
            idx[j + 1] = i;
            frac[j + 1] = f;
        }
        let mut s = 1;
        for j in (0..d).rev() {
            strides[j + 1] = s;
            s *= self.x[j].n;
        }
        strides[0] = s;
        for mask in 0..(1usize << (d + 1)) {
            let mut w = 1.0;
            let mut k = 0;
            for a in 0..=d {
                let hi = (mask >> a) & 1 == 1;
                let fa = frac[a];
                w *= if hi { fa } else { 1.0 - fa };
                k += (idx[a] + hi as usize) * strides[a];
            }
            if w != 0.0 {
                visit(k, w);
            }
        }
        true
    }
}

/// Grid-backed scalar field, zero outside the grid box.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridScalar {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridScalar {
    pub fn sample(grid: Grid, f: &(dyn Fn(f64, &[f64]) -> f64 + Sync)) -> Self {
        use rayon::prelude::*;
        let d = grid.dim();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let mut y = vec![0.0; d];
                let t = grid.node(k, &mut y);
                f(t, &y)
            })
            .collect();
        GridScalar { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ScalarField for GridScalar {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn value(&self, t: f64, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        if self.grid.stencil(t, y, |k, w| acc += w * self.values[k]) {
            acc
        } else {
            0.0
        }
    }
    fn support(&self) -> Option<SupportBox> {
        Some(self.grid.support())
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(self.max_abs())
    }
    fn as_grid(&self) -> Option<&GridScalar> {
        Some(self)
    }
}

/// Grid-backed vector field, zero outside the grid box.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridVector {
    pub grid: Grid,
    /// `len × d`, node-major.
    pub values: Vec<f64>,
}

impl GridVector {
    #[inline]
    pub fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = self.grid.dim();
        self.grid.stencil(t, y, |k, w| {
            for (j, o) in out.iter_mut().enumerate() {
                *o += w * self.values[k * d + j];
            }
        });
    }
}

impl VectorField for GridVector {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        GridVector::eval(self, t, y, out)
    }
    fn support(&self) -> Option<SupportBox> {
        Some(self.grid.support())
    }
}

/// Sorted, strictly increasing node list with linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub nodes: Vec<f64>,
}

impl Axis {
    pub fn new(mut nodes: Vec<f64>) -> Self {
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
        assert!(nodes.len() >= 2);
        Axis { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.nodes.len();
        if !(x >= self.nodes[0] && x <= self.nodes[n - 1]) {
            return None;
        }
        let i = self.nodes.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        Some((i, ((x - a) / (b - a)).clamp(0.0, 1.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_interpolation_is_exact_for_multilinear() {
        let b = SupportBox::cube([0.0, 1.0], &[0.0, 0.0, 0.0], 1.0);
        let g = GridScalar::sample(Grid::over(&b, 3, 4), &|t, y| 1.0 + 2.0 * t - y[0] + 0.5 * y[1] * y[2] + t * y[2]);
        for &(t, y) in &[(0.3, [0.1, -0.7, 0.2]), (1.0, [1.0, 1.0, -1.0]), (0.0, [-1.0, 0.5, 0.5])] {
            let exact = 1.0 + 2.0 * t - y[0] + 0.5 * y[1] * y[2] + t * y[2];
            assert!((g.value(t, &y) - exact).abs() < 1e-12);
        }
        assert_eq!(g.value(1.1, &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn axis_locate() {
        let a = Axis::new(vec![0.0, 0.1, 0.5, 2.0]);
        assert_eq!(a.locate(0.3).unwrap().0, 1);
        assert!((a.locate(0.3).unwrap().1 - 0.5).abs() < 1e-12);
        assert_eq!(a.locate(2.0).unwrap(), (2, 1.0));
        assert!(a.locate(2.1).is_none());
    }

    #[test]
    fn support_dilation_and_distance() {
        let b = SupportBox::cube([0.0, 1.0], &[0.0, 0.0], 1.0);
        assert!((b.distance(2.0, &[0.0, 3.0]) - 5f64.sqrt()).abs() < 1e-12);
        assert!(b.dilate(0.5).contains(1.5, &[1.5, -1.5]));
    }
}
