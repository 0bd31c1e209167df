//! Euler–Maruyama simulation of `dX = b(t, X) dt + dW` under smooth drifts
//! and Monte Carlo estimators built on the resulting ensembles.
//!
//! Noise is drawn from ChaCha8 streams keyed by `(seed, path, level)`: level 0
//! supplies the coarse Brownian increments and level `l` the Brownian-bridge
//! midpoints that refine them `l` times. Ensembles at `dt / 2^l` are thereby
//! coupled to the coarse one, and a path never depends on how paths are
//! distributed over threads.

mod diagnostics;
mod record;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{config, domain, Result};
use crate::field::DriftField;
use crate::kernel::SpaceTimePoint;
use crate::quad::pairwise_sum;

pub use diagnostics::{
    defect_bias, discounted_functional, discounted_functional_with, martingale_defect, modulus_diagnostic,
    modulus_start_bound, modulus_window_bound, occupation_decay, resolvent_identity_residual, terminal_moments,
    zero_drift_law, BiasReport, BumpTest, DefectCurve, IdentityResidual, McEstimate, ModulusReport,
    OccupationRow, OccupationStats, OccupationTable, TerminalMoments, TestFunction, ZeroDriftLaw,
    TRUNCATION_FRACTION,
};
pub use record::{read_ensemble, write_ensemble, RECORD_VERSION};

/// Deepest Brownian-bridge refinement; streams per path are `MAX_REFINE + 1`.
pub const MAX_REFINE: u32 = 7;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub start: SpaceTimePoint,
    /// Final time `T`.
    pub horizon: f64,
    /// Coarse step; the simulated step is `dt / 2^refine`.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub drift: DriftField,
    pub refine: u32,
    /// Ensembles with more state values than this are regenerated on demand
    /// instead of stored.
    pub store_limit: usize,
}

impl SimConfig {
    pub fn new(start: SpaceTimePoint, horizon: f64, dt: f64, n_paths: usize, seed: u64, drift: DriftField) -> Self {
        SimConfig {
            start,
            horizon,
            dt,
            n_paths,
            seed,
            drift,
            refine: 0,
            store_limit: 50_000_000,
        }
    }

    /// The same noise refined `levels` more times.
    pub fn refined(&self, levels: u32) -> Self {
        let mut c = self.clone();
        c.refine += levels;
        c
    }

    pub fn with_drift(&self, drift: DriftField) -> Self {
        let mut c = self.clone();
        c.drift = drift;
        c
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > self.start.s) || !self.horizon.is_finite() {
            return Err(config(format!(
                "horizon {} must exceed the start time {}",
                self.horizon, self.start.s
            )));
        }
        if self.n_paths == 0 {
            return Err(config("n_paths must be at least 1"));
        }
        if self.refine > MAX_REFINE {
            return Err(config(format!("refinement level must be at most {MAX_REFINE}")));
        }
        if self.drift.dim() != self.start.dim() {
            return Err(config("drift and start point dimensions differ"));
        }
        if !self.drift.is_smooth() {
            return Err(config(format!(
                "drift '{}' is not smooth; mollify it before simulating",
                self.drift.label()
            )));
        }
        Ok(())
    }

    fn coarse_steps(&self) -> usize {
        (((self.horizon - self.start.s) / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Simulated step count.
    pub fn steps(&self) -> usize {
        self.coarse_steps() << self.refine
    }

    /// Simulated step, adjusted so the steps end exactly at the horizon.
    pub fn step(&self) -> f64 {
        (self.horizon - self.start.s) / self.steps() as f64
    }
}

/// Simulated paths, stored or regenerable from their seed.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub d: usize,
    pub start: SpaceTimePoint,
    /// Simulated step.
    pub dt: f64,
    pub refine: u32,
    pub n_paths: usize,
    pub seed: u64,
    /// Shared time grid `t_0 = s, …, t_N = T`.
    pub times: Vec<f64>,
    /// `∫|b(u, X_u)| du` per path, left-endpoint Riemann sum.
    pub occupation: Vec<f64>,
    /// `n_paths × (steps+1) × d`, path-major, when within the storage limit.
    pub paths: Option<Vec<f64>>,
    /// Worker threads available when the ensemble was generated. Results do
    /// not depend on it.
    pub threads: usize,
    drift: DriftField,
}

fn stream(seed: u64, path: usize, level: u32) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(path as u64 * (MAX_REFINE as u64 + 1) + level as u64);
    r
}

/// Brownian increments of one path, coarse step by coarse step.
struct Noise {
    rngs: Vec<ChaCha8Rng>,
    coarse: f64,
    d: usize,
    /// `d × 2^refine`, coordinate-major.
    buf: Vec<f64>,
    tmp: Vec<f64>,
}

impl Noise {
    fn new(seed: u64, path: usize, refine: u32, coarse: f64, d: usize) -> Self {
        Noise {
            rngs: (0..=refine).map(|l| stream(seed, path, l)).collect(),
            coarse,
            d,
            buf: vec![0.0; d << refine],
            tmp: vec![0.0; d << refine],
        }
    }

    /// Fill `buf` with the fine increments of the next coarse step.
    fn next(&mut self) {
        let m = 1usize << (self.rngs.len() - 1);
        for j in 0..self.d {
            let z: f64 = StandardNormal.sample(&mut self.rngs[0]);
            self.buf[j * m] = self.coarse.sqrt() * z;
        }
        let mut len = self.coarse;
        let mut count = 1;
        for l in 1..self.rngs.len() {
            let half_sd = 0.5 * len.sqrt();
            for j in 0..self.d {
                for i in 0..count {
                    let w = self.buf[j * m + i];
                    let z: f64 = StandardNormal.sample(&mut self.rngs[l]);
                    let left = 0.5 * w + half_sd * z;
                    self.tmp[2 * i] = left;
                    self.tmp[2 * i + 1] = w - left;
                }
                self.buf[j * m..j * m + 2 * count].copy_from_slice(&self.tmp[..2 * count]);
            }
            count *= 2;
            len *= 0.5;
        }
    }
}

struct Generator<'a> {
    drift: &'a DriftField,
    start: &'a SpaceTimePoint,
    seed: u64,
    refine: u32,
    coarse_steps: usize,
    h: f64,
}

impl Generator<'_> {
    /// Simulate path `i` into `states` (`(steps+1) × d`); returns its occupation integral.
    fn run(&self, i: usize, states: &mut [f64]) -> f64 {
        let d = self.start.dim();
        let per = 1usize << self.refine;
        let mut noise = Noise::new(self.seed, i, self.refine, self.h * per as f64, d);
        states[..d].copy_from_slice(&self.start.x);
        let mut bv = vec![0.0; d];
        let mut occ = Vec::with_capacity(self.coarse_steps * per);
        let mut k = 0;
        for _ in 0..self.coarse_steps {
            noise.next();
            for f in 0..per {
                let t = self.start.s + k as f64 * self.h;
                let (cur, next) = states[k * d..(k + 2) * d].split_at_mut(d);
                self.drift.eval(t, cur, &mut bv);
                occ.push(bv.iter().map(|v| v * v).sum::<f64>().sqrt() * self.h);
                for j in 0..d {
                    next[j] = cur[j] + bv[j] * self.h + noise.buf[j * per + f];
                }
                k += 1;
            }
        }
        pairwise_sum(&occ)
    }
}

impl PathEnsemble {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn drift(&self) -> &DriftField {
        &self.drift
    }

    /// States of a stored path, `(steps+1) × d`.
    pub fn path(&self, i: usize) -> Option<&[f64]> {
        let len = self.times.len() * self.d;
        self.paths.as_ref().map(|p| &p[i * len..(i + 1) * len])
    }

    fn generator(&self) -> Generator<'_> {
        Generator {
            drift: &self.drift,
            start: &self.start,
            seed: self.seed,
            refine: self.refine,
            coarse_steps: self.steps() >> self.refine,
            h: self.dt,
        }
    }

    /// `f(i, states)` for every path, in path order. Unstored paths are
    /// regenerated bit-identically.
    pub fn map_paths<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync,
    {
        let len = self.times.len() * self.d;
        match &self.paths {
            Some(p) => p.par_chunks(len).enumerate().map(|(i, s)| f(i, s)).collect(),
            None => {
                let g = self.generator();
                (0..self.n_paths)
                    .into_par_iter()
                    .map_init(
                        || vec![0.0; len],
                        |buf, i| {
                            g.run(i, buf);
                            f(i, buf)
                        },
                    )
                    .collect()
            }
        }
    }
}

/// Simulate `cfg.n_paths` Euler–Maruyama paths
/// `X_{k+1} = X_k + b(t_k, X_k) dt + ΔW_k`.
pub fn euler_paths(cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    let d = cfg.start.dim();
    let steps = cfg.steps();
    let h = cfg.step();
    let times: Vec<f64> = (0..=steps).map(|k| cfg.start.s + k as f64 * h).collect();
    let len = (steps + 1) * d;
    let gen = Generator {
        drift: &cfg.drift,
        start: &cfg.start,
        seed: cfg.seed,
        refine: cfg.refine,
        coarse_steps: cfg.coarse_steps(),
        h,
    };
    let store = cfg.n_paths.saturating_mul(len) <= cfg.store_limit;
    let (paths, occupation) = if store {
        let mut data = vec![0.0; cfg.n_paths * len];
        let occ: Vec<f64> = data
            .par_chunks_mut(len)
            .enumerate()
            .map(|(i, s)| gen.run(i, s))
            .collect();
        (Some(data), occ)
    } else {
        let occ = (0..cfg.n_paths)
            .into_par_iter()
            .map_init(|| vec![0.0; len], |buf, i| gen.run(i, buf))
            .collect();
        (None, occ)
    };
    if let Some(i) = occupation.iter().position(|v: &f64| !v.is_finite()) {
        return Err(domain(format!("path {i} has a non-finite occupation integral")));
    }
    Ok(PathEnsemble {
        d,
        start: cfg.start.clone(),
        dt: h,
        refine: cfg.refine,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        times,
        occupation,
        paths,
        threads: rayon::current_num_threads(),
        drift: cfg.drift.clone(),
    })
}

/// Sample mean and its standard error, by pairwise summation.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(v) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
