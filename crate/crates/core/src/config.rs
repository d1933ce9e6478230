//! JSON experiment configuration.
//!
//! Unknown fields anywhere in the document are errors.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::coupling::EnvelopeForm;
use crate::envelope::{EnvelopePair, StateGrid};
use crate::hazard::{GeneralizedIntensity, RateFn};
use crate::kernel::{
    ElementPhase, ElementSlots, IntensityField, IntensitySlot, Modulator, PhaseTag, SwitchingPolicy, SystemState,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: e.to_string(),
    }
}

/// Built-in hazard families.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HazardSpec {
    Zero,
    Constant { rate: f64 },
    Hyperbolic { gamma: f64 },
    Weibull { shape: f64, scale: f64 },
    Piecewise { breakpoints: Vec<f64>, rates: Vec<f64> },
}

impl HazardSpec {
    pub fn rate_fn(&self) -> RateFn {
        match self.clone() {
            HazardSpec::Zero => RateFn::Zero,
            HazardSpec::Constant { rate } => RateFn::Constant { rate },
            HazardSpec::Hyperbolic { gamma } => RateFn::Hyperbolic { gamma },
            HazardSpec::Weibull { shape, scale } => RateFn::Weibull { shape, scale },
            HazardSpec::Piecewise { breakpoints, rates } => RateFn::Piecewise { breakpoints, rates },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub location: f64,
    /// Probability mass of the jump.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySpec {
    pub hazard: HazardSpec,
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub support_bound: Option<f64>,
}

impl IntensitySpec {
    pub fn build(&self) -> crate::Result<GeneralizedIntensity> {
        let rate = self.hazard.rate_fn();
        let jumps: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.location, a.mass)).collect();
        let gi = GeneralizedIntensity::from_jumps(&jumps, rate)?;
        match self.support_bound {
            None => Ok(gi),
            Some(b) => {
                let bound = gi.support_bound().map_or(b, |own| own.min(b));
                GeneralizedIntensity::new(gi.continuous_part().clone(), gi.atoms().to_vec(), Some(bound))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorSpec {
    #[serde(default = "one")]
    pub other_working: f64,
    #[serde(default = "one")]
    pub other_under_repair: f64,
    #[serde(default = "one")]
    pub other_switching_to_work: f64,
    #[serde(default = "one")]
    pub other_switching_to_repair: f64,
    #[serde(default)]
    pub clock_threshold: Option<f64>,
    #[serde(default = "one")]
    pub after_threshold: f64,
}

fn one() -> f64 {
    1.0
}

impl ModulatorSpec {
    pub fn build(&self) -> Modulator {
        Modulator {
            phase_factors: [
                self.other_working,
                self.other_under_repair,
                self.other_switching_to_work,
                self.other_switching_to_repair,
            ],
            clock_threshold: self.clock_threshold,
            after_threshold: self.after_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub phi: HazardSpec,
    pub q: HazardSpec,
    pub k: u32,
    pub epsilon: f64,
    #[serde(default)]
    pub t_delay: f64,
}

impl EnvelopeSpec {
    pub fn build(&self) -> crate::Result<EnvelopePair> {
        EnvelopePair::new(self.phi.rate_fn(), self.q.rate_fn(), self.k, self.epsilon, self.t_delay)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub intensity: IntensitySpec,
    #[serde(default)]
    pub modulator: Option<ModulatorSpec>,
    #[serde(default)]
    pub envelope: Option<EnvelopeSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub working: SlotSpec,
    pub under_repair: SlotSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub element1: ElementSpec,
    pub element2: ElementSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSpec {
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub to_repair: Option<IntensitySpec>,
    #[serde(default)]
    pub to_work: Option<IntensitySpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub phases: [PhaseTag; 2],
    #[serde(default)]
    pub clocks: [f64; 2],
    #[serde(default)]
    pub remaining_delays: [f64; 2],
}

impl StateSpec {
    pub fn build(&self) -> SystemState {
        let phase = |j: usize| ElementPhase {
            tag: self.phases[j],
            remaining_delay: self.remaining_delays[j],
        };
        SystemState::new([phase(0), phase(1)], self.clocks)
    }
}

fn both_working() -> StateSpec {
    StateSpec {
        phases: [PhaseTag::Working; 2],
        clocks: [0.0; 2],
        remaining_delays: [0.0; 2],
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: f64,
    #[serde(default = "one_rep")]
    pub replications: usize,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default)]
    pub time_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "both_working")]
    pub initial: StateSpec,
    /// Grid for the envelope check; defaults to 40 clocks up to 100.
    #[serde(default)]
    pub check_grid: Option<GridSpec>,
}

fn one_rep() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub initial_a: StateSpec,
    pub initial_b: StateSpec,
    pub form: EnvelopeForm,
    pub fit_window: [f64; 2],
    /// Time copy B runs alone before the pair starts.
    #[serde(default)]
    pub warm_up_b: f64,
    /// Defaults to `run.horizon`.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Defaults to `run.replications`.
    #[serde(default)]
    pub replications: Option<usize>,
    /// Defaults to `run.time_grid`.
    #[serde(default)]
    pub time_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub switching: SwitchingSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Everything a command needs, checked and built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub field: IntensityField,
    pub policy: SwitchingPolicy,
    pub initial: SystemState,
    pub check_grid: StateGrid,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn build(self) -> Result<Experiment, ConfigError> {
        let slot = |name: &str, s: &SlotSpec| -> Result<IntensitySlot, ConfigError> {
            let gi = s
                .intensity
                .build()
                .map_err(|e| field_err(&format!("{name}.intensity"), e))?;
            let mut slot = IntensitySlot::new(gi);
            if let Some(m) = &s.modulator {
                let m = m.build();
                m.validate().map_err(|e| field_err(&format!("{name}.modulator"), e))?;
                slot = slot.with_modulator(m);
            }
            if let Some(env) = &s.envelope {
                let env = env.build().map_err(|e| field_err(&format!("{name}.envelope"), e))?;
                slot = slot.with_envelope(env);
            }
            Ok(slot)
        };
        let el = |name: &str, e: &ElementSpec| -> Result<ElementSlots, ConfigError> {
            Ok(ElementSlots {
                working: slot(&format!("model.{name}.working"), &e.working)?,
                repair: slot(&format!("model.{name}.under_repair"), &e.under_repair)?,
            })
        };
        let field = IntensityField::new([
            el("element1", &self.model.element1)?,
            el("element2", &self.model.element2)?,
        ])
        .map_err(|e| field_err("model", e))?;

        let policy = self.switching.build()?;
        let initial = self.run.initial.build();
        initial
            .validate(policy.bound())
            .map_err(|e| field_err("run.initial", e))?;
        if !(self.run.horizon.is_finite() && self.run.horizon >= 0.0) {
            return Err(field_err("run.horizon", "must be finite and >= 0"));
        }
        if !(self.run.burn_in >= 0.0 && (self.run.burn_in < self.run.horizon || self.run.horizon == 0.0)) {
            return Err(field_err("run.burn_in", "must lie in [0, horizon)"));
        }
        if self.run.replications == 0 {
            return Err(field_err("run.replications", "must be >= 1"));
        }
        if self.run.time_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(field_err("run.time_grid", "values must be finite and >= 0"));
        }
        if let Some(c) = &self.coupling {
            for (name, s) in [
                ("coupling.initial_a", &c.initial_a),
                ("coupling.initial_b", &c.initial_b),
            ] {
                s.build().validate(policy.bound()).map_err(|e| field_err(name, e))?;
            }
            if !(c.warm_up_b.is_finite() && c.warm_up_b >= 0.0) {
                return Err(field_err("coupling.warm_up_b", "must be finite and >= 0"));
            }
            if !(c.fit_window[0] <= c.fit_window[1]) {
                return Err(field_err("coupling.fit_window", "needs lo <= hi"));
            }
        }
        let check_grid = match &self.run.check_grid {
            Some(g) if g.max > 0.0 && g.points >= 4 => StateGrid::standard(g.max, g.points),
            Some(_) => return Err(field_err("run.check_grid", "needs max > 0 and points >= 4")),
            None => StateGrid::standard(100.0, 40),
        };
        Ok(Experiment {
            config: self,
            field,
            policy,
            initial,
            check_grid,
        })
    }
}

impl SwitchingSpec {
    /// Delay laws without a support bound of their own are cut at `bound`.
    pub fn build(&self) -> Result<SwitchingPolicy, ConfigError> {
        let has_laws = self.to_repair.is_some() || self.to_work.is_some();
        let Some(bound) = self.bound else {
            if has_laws {
                return Err(field_err("switching.bound", "required when delay laws are given"));
            }
            return Ok(SwitchingPolicy::instantaneous());
        };
        if bound == 0.0 {
            return Ok(SwitchingPolicy::instantaneous());
        }
        let law = |name: &str, spec: &Option<IntensitySpec>| -> Result<GeneralizedIntensity, ConfigError> {
            let spec = spec
                .as_ref()
                .ok_or_else(|| field_err(&format!("switching.{name}"), "required when bound > 0"))?;
            let mut spec = spec.clone();
            if spec.support_bound.is_none() {
                spec.support_bound = Some(bound);
            }
            spec.build().map_err(|e| field_err(&format!("switching.{name}"), e))
        };
        SwitchingPolicy::new(
            law("to_repair", &self.to_repair)?,
            law("to_work", &self.to_work)?,
            bound,
        )
        .map_err(|e| field_err("switching", e))
    }
}
