//! Scenario documents (TOML) and their validation.

use fkdrift_core::field::{DriftField, SmoothBump};
use fkdrift_core::kato::{builtin_drift, BuiltinParams, ParamValue, DEFAULT_RADIAL_AMPLITUDE};
use fkdrift_core::kernel::{KernelParams, SpaceTimePoint};
use fkdrift_core::resolvent::GridSpec;
use serde::{Deserialize, Serialize};

use crate::checks::ALL_CHECKS;
use crate::RunnerError;

/// One run's full parameter set. Every field has a default, so an empty
/// document is a valid scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub name: String,
    pub d: usize,
    pub alpha: f64,
    pub eps1: f64,
    pub drift: DriftSpec,
    pub kato: KatoSection,
    pub mollify: MollifySection,
    pub resolvent: ResolventSection,
    pub simulation: SimulationSection,
    /// Check identifiers; empty means every check.
    pub checks: Vec<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "default".into(),
            d: 3,
            alpha: 0.25,
            eps1: 0.25,
            drift: DriftSpec::default(),
            kato: KatoSection::default(),
            mollify: MollifySection::default(),
            resolvent: ResolventSection::default(),
            simulation: SimulationSection::default(),
            checks: Vec::new(),
        }
    }
}

/// A builtin drift, its parameters and the mollification order used by the
/// resolvent and simulation checks.
///
/// Without a `[drift]` table the scenario uses `radial_singular` at the small
/// default amplitude. Inside a `[drift]` table omitted parameters take the
/// builtin's own defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    #[serde(default = "default_drift_name")]
    pub name: String,
    #[serde(default)]
    pub params: BuiltinParams,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_drift_name() -> String {
    "radial_singular".into()
}

fn default_order() -> usize {
    8
}

impl Default for DriftSpec {
    fn default() -> Self {
        let mut params = BuiltinParams::new();
        params.insert("amplitude".into(), ParamValue::Number(DEFAULT_RADIAL_AMPLITUDE));
        DriftSpec {
            name: default_drift_name(),
            params,
            order: default_order(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatoSection {
    /// Exponent `c`; `alpha` when absent.
    pub c: Option<f64>,
    /// Strictly decreasing horizons of the membership profile.
    pub horizons: Vec<f64>,
    /// Expected verdict, `member` or `non-member`. Without it any conclusive
    /// verdict passes.
    pub expect: Option<String>,
    /// Base horizon `l` of the subadditivity check.
    pub subadditivity_base: f64,
}

impl Default for KatoSection {
    fn default() -> Self {
        KatoSection {
            c: None,
            horizons: vec![0.1, 0.03, 0.01, 3e-3, 1e-3, 1e-4],
            expect: None,
            subadditivity_base: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifySection {
    /// Orders of the contraction and convergence audits.
    pub orders: Vec<usize>,
}

impl Default for MollifySection {
    fn default() -> Self {
        MollifySection { orders: vec![2, 4, 8] }
    }
}

/// The smooth bump `g` fed to the resolvent and the Monte Carlo functionals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSpec {
    pub amplitude: f64,
    pub t_center: f64,
    /// Origin when absent.
    pub x_center: Option<Vec<f64>>,
    pub t_radius: f64,
    pub x_radius: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            amplitude: 1.0,
            t_center: 0.5,
            x_center: None,
            t_radius: 0.45,
            x_radius: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventSection {
    pub lambda: Vec<f64>,
    pub depth: usize,
    pub grid: GridSpec,
    pub source: SourceSpec,
}

impl Default for ResolventSection {
    fn default() -> Self {
        ResolventSection {
            lambda: vec![1.0],
            depth: 12,
            grid: GridSpec::default(),
            source: SourceSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub start_time: f64,
    /// Origin when absent.
    pub start: Option<Vec<f64>>,
    /// Coarsest step of the martingale-defect check.
    pub defect_dt: f64,
    pub defect_levels: usize,
    pub checkpoints: Vec<f64>,
    pub occupation_lambdas: Vec<f64>,
    pub modulus_beta: f64,
    pub modulus_deltas: Vec<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            dt: 1e-3,
            n_paths: 100_000,
            horizon: 1.0,
            seed: 0,
            start_time: 0.0,
            start: None,
            defect_dt: 1.0 / 64.0,
            defect_levels: 3,
            checkpoints: vec![0.25, 0.5, 0.75, 1.0],
            occupation_lambdas: vec![1.0, 4.0, 16.0],
            modulus_beta: 1.0,
            modulus_deltas: vec![0.25, 0.125, 0.0625],
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunnerError {
    RunnerError::Invalid(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), RunnerError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, RunnerError> {
    let sc: Scenario = toml::from_str(text).map_err(|e| RunnerError::Parse(e.to_string()))?;
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    pub fn kato_c(&self) -> f64 {
        self.kato.c.unwrap_or(self.alpha)
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams {
            d: self.d,
            alpha: self.alpha,
        }
    }

    pub fn start(&self) -> SpaceTimePoint {
        SpaceTimePoint {
            s: self.simulation.start_time,
            x: self.simulation.start.clone().unwrap_or_else(|| vec![0.0; self.d]),
        }
    }

    pub fn source(&self) -> SmoothBump {
        let s = &self.resolvent.source;
        SmoothBump::new(
            s.amplitude,
            s.t_center,
            s.x_center.clone().unwrap_or_else(|| vec![0.0; self.d]),
            s.t_radius,
            s.x_radius,
        )
    }

    /// The raw (unmollified) drift.
    pub fn build_drift(&self) -> Result<DriftField, RunnerError> {
        if self.drift.name == "zero" {
            if !self.drift.params.is_empty() {
                return Err(invalid("drift 'zero' takes no parameters"));
            }
            return Ok(DriftField::zero(self.d));
        }
        builtin_drift(&self.drift.name, self.d, &self.drift.params).map_err(|e| invalid(e.to_string()))
    }

    /// Check identifiers in execution order.
    pub fn ordered_checks(&self) -> Vec<&'static str> {
        ALL_CHECKS
            .iter()
            .map(|(id, _)| *id)
            .filter(|id| self.checks.is_empty() || self.checks.iter().any(|c| c == id))
            .collect()
    }

    /// Every downstream parameter constraint, checked before any computation.
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.d < 3 {
            return Err(invalid(format!(
                "d must be at least 3, got {}: the drift class and its norms are set up for d >= 3",
                self.d
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1/2), got {}: the Gaussian gradient envelope exp(-alpha|x-y|^2/(t-s)) needs alpha < 1/2",
                self.alpha
            )));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 0.5) {
            return Err(invalid(format!(
                "eps1 must lie in (0, 1/2), got {}: the smallness condition is stated on the horizon 2*eps1 < 1",
                self.eps1
            )));
        }
        for c in &self.checks {
            if !ALL_CHECKS.iter().any(|(id, _)| id == c) {
                return Err(invalid(format!("unknown check '{c}' (see list-checks)")));
            }
        }
        self.build_drift()?;
        if self.drift.order == 0 {
            return Err(invalid("drift.order must be at least 1"));
        }
        let k = &self.kato;
        positive("kato.c", self.kato_c())?;
        positive("kato.subadditivity_base", k.subadditivity_base)?;
        if k.horizons.is_empty() {
            return Err(invalid("kato.horizons must not be empty"));
        }
        for h in &k.horizons {
            positive("kato.horizons entries", *h)?;
        }
        if k.horizons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("kato.horizons must be strictly decreasing"));
        }
        if let Some(e) = &k.expect {
            if e != "member" && e != "non-member" {
                return Err(invalid(format!("kato.expect must be 'member' or 'non-member', got '{e}'")));
            }
        }
        let m = &self.mollify.orders;
        if m.is_empty() || m[0] == 0 || m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("mollify.orders must be positive and strictly increasing"));
        }
        let r = &self.resolvent;
        if r.lambda.is_empty() {
            return Err(invalid("resolvent.lambda must not be empty"));
        }
        for l in &r.lambda {
            positive("resolvent.lambda entries", *l)?;
        }
        if r.depth < 1 {
            return Err(invalid("resolvent.depth must be at least 1"));
        }
        let g = &r.grid;
        if g.time_nodes < 2 || g.space_nodes < 2 || g.source_time_nodes < 2 || g.source_space_nodes < 2 || g.lattice_nodes < 2 {
            return Err(invalid("resolvent.grid node counts must be at least 2"));
        }
        positive("resolvent.source.t_radius", r.source.t_radius)?;
        positive("resolvent.source.x_radius", r.source.x_radius)?;
        if !r.source.amplitude.is_finite() {
            return Err(invalid("resolvent.source.amplitude must be finite"));
        }
        if r.source.x_center.as_ref().is_some_and(|x| x.len() != self.d) {
            return Err(invalid("resolvent.source.x_center must have d entries"));
        }
        let s = &self.simulation;
        positive("simulation.dt", s.dt)?;
        positive("simulation.defect_dt", s.defect_dt)?;
        positive("simulation.modulus_beta", s.modulus_beta)?;
        if s.n_paths == 0 {
            return Err(invalid("simulation.n_paths must be at least 1"));
        }
        if !(s.start_time >= 0.0 && s.start_time.is_finite()) {
            return Err(invalid("simulation.start_time must be finite and non-negative"));
        }
        if !(s.horizon > s.start_time && s.horizon.is_finite()) {
            return Err(invalid("simulation.horizon must exceed simulation.start_time"));
        }
        if s.start.as_ref().is_some_and(|x| x.len() != self.d) {
            return Err(invalid("simulation.start must have d entries"));
        }
        if s.defect_levels < 3 {
            return Err(invalid("simulation.defect_levels must be at least 3"));
        }
        if s.checkpoints.is_empty() || s.checkpoints.iter().any(|t| !(*t > s.start_time && *t <= s.horizon)) {
            return Err(invalid("simulation.checkpoints must lie in (start_time, horizon]"));
        }
        if s.occupation_lambdas.len() < 2 {
            return Err(invalid("simulation.occupation_lambdas needs at least two rates"));
        }
        for l in &s.occupation_lambdas {
            positive("simulation.occupation_lambdas entries", *l)?;
        }
        if s.modulus_deltas.is_empty() {
            return Err(invalid("simulation.modulus_deltas must not be empty"));
        }
        for d in &s.modulus_deltas {
            positive("simulation.modulus_deltas entries", *d)?;
        }
        KernelParams::new(self.d, self.alpha).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}
