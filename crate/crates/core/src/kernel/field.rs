use crate::envelope::{check_condition_a, ConditionAReport, EnvelopePair, GridPoint, StateGrid};
use crate::error::{Error, Result};
use crate::hazard::GeneralizedIntensity;
use crate::kernel::state::PhaseTag;

/// Multiplier applied to a slot's continuous hazard, depending on the other
/// element's phase and, past an optional threshold, on its clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulator {
    /// Factor per other-element phase, indexed like [`PhaseTag::ALL`].
    pub phase_factors: [f64; 4],
    /// Once the other element's clock reaches this value the factor is
    /// additionally multiplied by `after_threshold`.
    pub clock_threshold: Option<f64>,
    pub after_threshold: f64,
}

impl Default for Modulator {
    fn default() -> Self {
        Self {
            phase_factors: [1.0; 4],
            clock_threshold: None,
            after_threshold: 1.0,
        }
    }
}

fn phase_index(tag: PhaseTag) -> usize {
    match tag {
        PhaseTag::Working => 0,
        PhaseTag::UnderRepair => 1,
        PhaseTag::SwitchingToWork => 2,
        PhaseTag::SwitchingToRepair => 3,
    }
}

impl Modulator {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !self.phase_factors.iter().all(|&v| ok(v)) || !ok(self.after_threshold) {
            return Err(Error::InvalidField("modulator factors must be finite and > 0".into()));
        }
        if self.clock_threshold.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidField("modulator threshold must be >= 0".into()));
        }
        Ok(())
    }

    /// Factor for one other phase, all other phases left at 1.
    pub fn when_other(tag: PhaseTag, factor: f64) -> Self {
        let mut m = Self::default();
        m.phase_factors[phase_index(tag)] = factor;
        m
    }

    pub fn factor(&self, other: PhaseTag, other_clock: f64) -> f64 {
        let base = self.phase_factors[phase_index(other)];
        match self.clock_threshold {
            Some(t) if other_clock >= t => base * self.after_threshold,
            _ => base,
        }
    }

    /// Offset `u > 0` at which the factor changes while the other clock
    /// advances from `other_clock`.
    pub(crate) fn change_after(&self, other_clock: f64) -> Option<f64> {
        self.clock_threshold
            .filter(|&t| t > other_clock && self.after_threshold != 1.0)
            .map(|t| t - other_clock)
    }

    /// Depends on nothing but the other element's phase.
    pub fn is_status_only(&self) -> bool {
        self.clock_threshold.is_none() || self.after_threshold == 1.0
    }

    pub fn bounds(&self) -> (f64, f64) {
        let lo = self.phase_factors.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.phase_factors.iter().copied().fold(0.0, f64::max);
        let a = self.after_threshold;
        if self.clock_threshold.is_some() {
            (lo.min(lo * a), hi.max(hi * a))
        } else {
            (lo, hi)
        }
    }
}

/// Hazard description for one element in one base status.
#[derive(Debug, Clone)]
pub struct IntensitySlot {
    pub intensity: GeneralizedIntensity,
    pub modulator: Modulator,
    pub envelope: Option<EnvelopePair>,
}

impl IntensitySlot {
    pub fn new(intensity: GeneralizedIntensity) -> Self {
        Self {
            intensity,
            modulator: Modulator::default(),
            envelope: None,
        }
    }

    pub fn with_modulator(mut self, modulator: Modulator) -> Self {
        self.modulator = modulator;
        self
    }

    pub fn with_envelope(mut self, envelope: EnvelopePair) -> Self {
        self.envelope = Some(envelope);
        self
    }

    /// Continuous hazard at a grid point.
    pub fn hazard(&self, p: &GridPoint) -> f64 {
        self.intensity.continuous_part().rate(p.own_clock) * self.modulator.factor(p.other_phase, p.other_clock)
    }
}

/// Failure and repair slots of one element.
#[derive(Debug, Clone)]
pub struct ElementSlots {
    pub working: IntensitySlot,
    pub repair: IntensitySlot,
}

/// Map from (element, status, full state) to hazard.
#[derive(Debug, Clone)]
pub struct IntensityField {
    pub elements: [ElementSlots; 2],
}

impl IntensityField {
    pub fn new(elements: [ElementSlots; 2]) -> Result<Self> {
        for e in &elements {
            e.working.modulator.validate()?;
            e.repair.modulator.validate()?;
        }
        Ok(Self { elements })
    }

    /// Both elements share the same failure and repair slots.
    pub fn symmetric(working: IntensitySlot, repair: IntensitySlot) -> Result<Self> {
        let e = ElementSlots { working, repair };
        Self::new([e.clone(), e])
    }

    /// Constant failure rate `lambda` and repair rate `mu` on both elements.
    pub fn constant(lambda: f64, mu: f64) -> Result<Self> {
        Self::symmetric(
            IntensitySlot::new(GeneralizedIntensity::exponential(lambda)),
            IntensitySlot::new(GeneralizedIntensity::exponential(mu)),
        )
    }

    /// Slot used by `element` in phase `tag`; `None` for switching phases.
    pub fn slot(&self, element: usize, tag: PhaseTag) -> Option<&IntensitySlot> {
        match tag {
            PhaseTag::Working => Some(&self.elements[element].working),
            PhaseTag::UnderRepair => Some(&self.elements[element].repair),
            _ => None,
        }
    }

    /// The four slots as `(element, tag, slot)`.
    pub fn slots(&self) -> impl Iterator<Item = (usize, PhaseTag, &IntensitySlot)> {
        self.elements.iter().enumerate().flat_map(|(j, e)| {
            [
                (j, PhaseTag::Working, &e.working),
                (j, PhaseTag::UnderRepair, &e.repair),
            ]
        })
    }

    /// Runs the envelope check on every slot that declares an envelope.
    pub fn check_envelopes(&self, grid: &StateGrid) -> Vec<(usize, PhaseTag, ConditionAReport)> {
        self.slots()
            .filter_map(|(j, tag, slot)| {
                slot.envelope
                    .as_ref()
                    .map(|env| (j, tag, check_condition_a(|p| slot.hazard(p), env, grid)))
            })
            .collect()
    }

    /// Rejects the field when any declared envelope is violated on `grid`.
    pub fn ensure_envelopes(&self, grid: &StateGrid) -> Result<()> {
        for (j, tag, report) in self.check_envelopes(grid) {
            if !report.pass() {
                return Err(Error::InvalidField(format!(
                    "element {} {tag}: hazard leaves its envelope at {} grid points",
                    j + 1,
                    report.violations.len()
                )));
            }
        }
        Ok(())
    }
}
