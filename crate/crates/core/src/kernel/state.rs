use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase of one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTag {
    Working,
    UnderRepair,
    SwitchingToWork,
    SwitchingToRepair,
}

impl PhaseTag {
    pub const ALL: [PhaseTag; 4] = [
        PhaseTag::Working,
        PhaseTag::UnderRepair,
        PhaseTag::SwitchingToWork,
        PhaseTag::SwitchingToRepair,
    ];

    pub fn is_switching(self) -> bool {
        matches!(self, PhaseTag::SwitchingToWork | PhaseTag::SwitchingToRepair)
    }

    /// Base status carrying a hazard: `Some(1)` working, `Some(0)` repair.
    pub fn status(self) -> Option<usize> {
        match self {
            PhaseTag::Working => Some(1),
            PhaseTag::UnderRepair => Some(0),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseTag::Working => "working",
            PhaseTag::UnderRepair => "under_repair",
            PhaseTag::SwitchingToWork => "switching_to_work",
            PhaseTag::SwitchingToRepair => "switching_to_repair",
        }
    }

    /// Next phase in the cycle, skipping the switching phase on a zero delay.
    pub(crate) fn successor(self, delay: f64) -> PhaseTag {
        match (self, delay > 0.0) {
            (PhaseTag::Working, true) => PhaseTag::SwitchingToRepair,
            (PhaseTag::Working, false) => PhaseTag::UnderRepair,
            (PhaseTag::SwitchingToRepair, _) => PhaseTag::UnderRepair,
            (PhaseTag::UnderRepair, true) => PhaseTag::SwitchingToWork,
            (PhaseTag::UnderRepair, false) => PhaseTag::Working,
            (PhaseTag::SwitchingToWork, _) => PhaseTag::Working,
        }
    }
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPhase {
    pub tag: PhaseTag,
    /// Time left before a switching phase ends; `0` outside switching.
    pub remaining_delay: f64,
}

impl ElementPhase {
    pub fn working() -> Self {
        Self {
            tag: PhaseTag::Working,
            remaining_delay: 0.0,
        }
    }

    pub fn under_repair() -> Self {
        Self {
            tag: PhaseTag::UnderRepair,
            remaining_delay: 0.0,
        }
    }

    pub fn switching(tag: PhaseTag, remaining_delay: f64) -> Self {
        Self { tag, remaining_delay }
    }
}

/// Full state `(phase₁, clock₁; phase₂, clock₂)` at `wall_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub phases: [ElementPhase; 2],
    pub clocks: [f64; 2],
    pub wall_time: f64,
}

impl SystemState {
    pub fn new(phases: [ElementPhase; 2], clocks: [f64; 2]) -> Self {
        Self {
            phases,
            clocks,
            wall_time: 0.0,
        }
    }

    pub fn both_working() -> Self {
        Self::new([ElementPhase::working(); 2], [0.0; 2])
    }

    pub fn both_under_repair() -> Self {
        Self::new([ElementPhase::under_repair(); 2], [0.0; 2])
    }

    pub fn tags(&self) -> [PhaseTag; 2] {
        [self.phases[0].tag, self.phases[1].tag]
    }

    pub fn validate(&self, delay_bound: f64) -> Result<()> {
        for (j, (p, &c)) in self.phases.iter().zip(&self.clocks).enumerate() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidState(format!("element {} clock {c} must be >= 0", j + 1)));
            }
            if p.tag.is_switching() {
                if !(p.remaining_delay > 0.0 && p.remaining_delay <= delay_bound) {
                    return Err(Error::InvalidState(format!(
                        "element {} remaining delay {} must lie in (0, {delay_bound}]",
                        j + 1,
                        p.remaining_delay
                    )));
                }
            } else if p.remaining_delay != 0.0 {
                return Err(Error::InvalidState(format!(
                    "element {} carries a delay outside a switching phase",
                    j + 1
                )));
            }
        }
        if !(self.wall_time.is_finite() && self.wall_time >= 0.0) {
            return Err(Error::InvalidState("wall time must be >= 0".into()));
        }
        Ok(())
    }

    /// Same phases and clocks up to `tol`; wall time is not compared.
    pub fn matches(&self, other: &SystemState, tol: f64) -> bool {
        self.phases
            .iter()
            .zip(&other.phases)
            .all(|(a, b)| a.tag == b.tag && (a.remaining_delay - b.remaining_delay).abs() <= tol)
            && self.clocks.iter().zip(&other.clocks).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// True iff some element is working; switching phases do not count.
    pub fn is_available(&self) -> bool {
        self.phases.iter().any(|p| p.tag == PhaseTag::Working)
    }

    /// Moves both clocks forward by `u` without any transition.
    pub(crate) fn drift(&mut self, u: f64) {
        for (p, c) in self.phases.iter_mut().zip(self.clocks.iter_mut()) {
            *c += u;
            if p.tag.is_switching() {
                p.remaining_delay = (p.remaining_delay - u).max(0.0);
            }
        }
        self.wall_time += u;
    }
}

/// `true` iff at least one element has phase tag `Working`.
pub fn availability_indicator(state: &SystemState) -> bool {
    state.is_available()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(a: ElementPhase, b: ElementPhase) -> SystemState {
        SystemState::new([a, b], [1.0, 2.0])
    }

    #[test]
    fn availability_cases() {
        assert!(!availability_indicator(&st(
            ElementPhase::under_repair(),
            ElementPhase::under_repair()
        )));
        assert!(availability_indicator(&st(
            ElementPhase::working(),
            ElementPhase::under_repair()
        )));
        let sw = ElementPhase::switching(PhaseTag::SwitchingToWork, 0.1);
        assert!(!availability_indicator(&st(sw, ElementPhase::under_repair())));
    }

    #[test]
    fn successor_cycle() {
        let mut tag = PhaseTag::Working;
        let mut seen = vec![tag];
        for _ in 0..4 {
            tag = tag.successor(0.5);
            seen.push(tag);
        }
        assert_eq!(
            seen,
            vec![
                PhaseTag::Working,
                PhaseTag::SwitchingToRepair,
                PhaseTag::UnderRepair,
                PhaseTag::SwitchingToWork,
                PhaseTag::Working
            ]
        );
        assert_eq!(PhaseTag::Working.successor(0.0), PhaseTag::UnderRepair);
        assert_eq!(PhaseTag::UnderRepair.successor(0.0), PhaseTag::Working);
    }

    #[test]
    fn validation() {
        let mut s = SystemState::both_working();
        assert!(s.validate(0.0).is_ok());
        s.phases[0] = ElementPhase::switching(PhaseTag::SwitchingToRepair, 0.5);
        assert!(s.validate(0.2).is_err());
        assert!(s.validate(0.5).is_ok());
        s.clocks[1] = -1.0;
        assert!(s.validate(0.5).is_err());
    }
}
