//! Quadrature rules: cached Gauss–Legendre and Gauss–Hermite nodes, and a
//! globally adaptive Gauss–Kronrod integrator on finite intervals.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};

/// Node/weight pairs.
pub type Rule = Arc<Vec<(f64, f64)>>;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Legendre,
    Normal,
}

fn cached(family: Family, n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<(Family, usize), Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&(family, n)) {
        return r.clone();
    }
    let mut pairs: Vec<(f64, f64)> = match family {
        Family::Legendre => {
            if n == 1 {
                vec![(0.0, 2.0)]
            } else {
                GaussLegendre::new(n)
                    .expect("legendre order >= 2")
                    .into_node_weight_pairs()
            }
        }
        Family::Normal => {
            if n == 1 {
                vec![(0.0, 1.0)]
            } else {
                let s = std::f64::consts::PI.sqrt();
                GaussHermite::new(n)
                    .expect("hermite order >= 2")
                    .into_node_weight_pairs()
                    .into_iter()
                    .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / s))
                    .collect()
            }
        }
    };
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let rule = Arc::new(pairs);
    cache.lock().unwrap().insert((family, n), rule.clone());
    rule
}

/// Gauss–Legendre rule on [-1, 1].
pub fn legendre(n: usize) -> Rule {
    cached(Family::Legendre, n.max(1))
}

/// Rule for `E[f(Z)]` with `Z ~ N(0, 1)`.
pub fn hermite_normal(n: usize) -> Rule {
    cached(Family::Normal, n.max(1))
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    legendre(n).iter().map(|&(x, w)| (m + h * x, h * w)).collect()
}

/// Composite Gauss–Legendre over `[a, b]` split at the given interior points.
pub fn composite_legendre(n: usize, a: f64, b: f64, breaks: &[f64], panels: usize) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.extend(inner);
    cuts.push(b);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let p = panels.max(1);
        let step = (hi - lo) / p as f64;
        for k in 0..p {
            let l = lo + step * k as f64;
            let r = if k + 1 == p { hi } else { l + step };
            out.extend(legendre_on(n, l, r));
        }
    }
    out
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a one-dimensional adaptive integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Tolerances and limits for [`adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-8,
            max_intervals: 400,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive G7/K15 integration of `f` over `[a, b]`, with the
/// interval pre-split at `breaks`. The error is `|K15 - G7|` summed over panels.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Quad {
    if !(b > a) {
        return Quad::default();
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in cuts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evals += 15;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= tol.abs.max(tol.rel * value.abs()) || heap.len() >= tol.max_intervals {
            return Quad { value, error, evals };
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Interval exhausted at machine precision; keep it and stop.
            heap.push(worst);
            let value: f64 = heap.iter().map(|p| p.value).sum();
            let error: f64 = heap.iter().map(|p| p.error).sum();
            return Quad { value, error, evals };
        }
        for (l, r) in [(worst.a, m), (m, worst.b)] {
            let (v, e) = gk15(&mut f, l, r);
            evals += 15;
            heap.push(Panel {
                a: l,
                b: r,
                value: v,
                error: e,
            });
        }
    }
}

struct VecPanel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    key: f64,
}

impl PartialEq for VecPanel {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for VecPanel {}
impl PartialOrd for VecPanel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for VecPanel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.total_cmp(&o.key)
    }
}

fn gk15_vec<F: FnMut(f64, &mut [f64])>(f: &mut F, m: usize, a: f64, b: f64, buf: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; m];
    let mut g = vec![0.0; m];
    f(c, buf);
    for i in 0..m {
        k[i] += WGK[7] * buf[i];
        g[i] += WG[3] * buf[i];
    }
    for j in 0..7 {
        let x = h * XGK[j];
        for side in [-1.0, 1.0] {
            f(c + side * x, buf);
            for i in 0..m {
                k[i] += WGK[j] * buf[i];
                if j % 2 == 1 {
                    g[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let err = k.iter().zip(&g).map(|(a, b)| ((a - b) * h).abs()).collect();
    (k.into_iter().map(|v| v * h).collect(), err)
}

/// Vector-valued version of [`adaptive`] for `m` components integrated on
/// shared panels. Convergence is judged on the largest component; returns
/// per-component values and error estimates.
pub fn adaptive_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    m: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> (Vec<f64>, Vec<f64>) {
    if !(b > a) || m == 0 {
        return (vec![0.0; m], vec![0.0; m]);
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);
    let mut buf = vec![0.0; m];
    let mut heap = BinaryHeap::new();
    let key = |e: &[f64]| e.iter().fold(0.0f64, |s, v| s.max(*v));
    for w in cuts.windows(2) {
        let (v, e) = gk15_vec(&mut f, m, w[0], w[1], &mut buf);
        heap.push(VecPanel {
            a: w[0],
            b: w[1],
            key: key(&e),
            value: v,
            error: e,
        });
    }
    let totals = |heap: &BinaryHeap<VecPanel>| {
        let mut v = vec![0.0; m];
        let mut e = vec![0.0; m];
        for p in heap.iter() {
            for i in 0..m {
                v[i] += p.value[i];
                e[i] += p.error[i];
            }
        }
        (v, e)
    };
    loop {
        let (v, e) = totals(&heap);
        let scale = v.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let err = key(&e);
        if err <= tol.abs.max(tol.rel * scale) || heap.len() >= tol.max_intervals {
            return (v, e);
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            return totals(&heap);
        }
        for (l, r) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15_vec(&mut f, m, l, r, &mut buf);
            heap.push(VecPanel {
                a: l,
                b: r,
                key: key(&e),
                value: v,
                error: e,
            });
        }
    }
}

/// `Φ(b) - Φ(a)` for the standard normal distribution, accurate in both tails.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    use std::f64::consts::FRAC_1_SQRT_2;
    if a >= b {
        return 0.0;
    }
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * (libm::erfc(-a * FRAC_1_SQRT_2) + libm::erfc(b * FRAC_1_SQRT_2))
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    const C: f64 = 0.398_942_280_401_432_7;
    C * (-0.5 * z * z).exp()
}

/// Radical inverse of `index` in base `base` (Halton sequence).
pub fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// First primes, used as Halton bases.
pub const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Pairwise (cascade) summation, independent of any parallel partitioning.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let m = xs.len() / 2;
    pairwise_sum(&xs[..m]) + pairwise_sum(&xs[m..])
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Gamma function for positive half-integers and integers.
pub fn gamma(x: f64) -> f64 {
    // Only used at x = k/2; recurse down to Γ(1) or Γ(1/2).
    if (x - 1.0).abs() < 1e-12 {
        1.0
    } else if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else if x > 1.0 {
        (x - 1.0) * gamma(x - 1.0)
    } else {
        panic!("gamma only supports positive half-integers")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = legendre_on(5, 0.0, 2.0);
        let v: f64 = r.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn hermite_normal_moments() {
        let r = hermite_normal(10);
        let m0: f64 = r.iter().map(|&(_, w)| w).sum();
        let m2: f64 = r.iter().map(|&(x, w)| w * x * x).sum();
        let m4: f64 = r.iter().map(|&(x, w)| w * x.powi(4)).sum();
        assert!((m0 - 1.0).abs() < 1e-12);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let q = adaptive(|x: f64| x.powf(-0.5), 0.0, 1.0, &[], Tolerance::new(1e-10, 1e-10));
        assert!((q.value - 2.0).abs() < 1e-7, "{q:?}");
    }

    #[test]
    fn adaptive_respects_breaks() {
        let q = adaptive(|x: f64| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &[0.3], Tolerance::default());
        assert!((q.value - 0.3).abs() < 1e-14);
    }

    #[test]
    fn adaptive_vec_matches_scalar() {
        let (v, e) = adaptive_vec(
            |x, out| {
                out[0] = x.sqrt();
                out[1] = (3.0 * x).cos();
            },
            2,
            0.0,
            2.0,
            &[],
            Tolerance::new(1e-12, 1e-12),
        );
        assert!((v[0] - 2.0 * 2f64.powf(1.5) / 3.0).abs() < 1e-9, "{v:?} {e:?}");
        assert!((v[1] - 6f64.sin() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normal_mass_tails() {
        assert!((normal_mass(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-14);
        let far = normal_mass(10.0, 11.0);
        assert!((far - 7.619_661_958_203_076e-24).abs() < 1e-36, "{far}");
        assert!((normal_mass(-11.0, -10.0) - far).abs() < 1e-36);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }
}
