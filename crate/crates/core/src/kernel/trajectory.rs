//! Recorded event lists and what can be read back from them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::process::transition;
use crate::kernel::state::{PhaseTag, SystemState};

/// One phase change of one element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub wall_time: f64,
    /// 0-based element index.
    pub element: usize,
    pub from: PhaseTag,
    pub to: PhaseTag,
    /// Clock of the firing element just before the change.
    pub clock_at_event: f64,
    /// Switching delay started by this event, `0` if none.
    pub delay: f64,
}

impl Event {
    /// `from->to`, as written to `events.csv`.
    pub fn transition_label(&self) -> String {
        format!("{}->{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    initial: SystemState,
    events: Vec<Event>,
    horizon: f64,
}

impl Trajectory {
    pub fn new(initial: SystemState, events: Vec<Event>, horizon: f64) -> Self {
        Self {
            initial,
            events,
            horizon,
        }
    }

    pub fn initial(&self) -> &SystemState {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// State at time `t`, right-continuous at event times.
    pub fn state_at(&self, t: f64) -> Result<SystemState> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let mut state = self.initial;
        for ev in self.events.iter().take_while(|e| e.wall_time <= t) {
            advance_to(&mut state, ev.wall_time);
            transition(&mut state, ev.element, ev.delay);
        }
        advance_to(&mut state, t);
        Ok(state)
    }

    /// Piecewise-constant path as `(start, state at start)`; each state holds
    /// until the next start or the horizon.
    pub fn segments(&self) -> Vec<(f64, SystemState)> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut state = self.initial;
        out.push((0.0, state));
        for ev in &self.events {
            advance_to(&mut state, ev.wall_time);
            transition(&mut state, ev.element, ev.delay);
            out.push((ev.wall_time, state));
        }
        out
    }

    /// Time spent in each status pair over `[from, horizon]`, ordered
    /// (1,1), (1,0), (0,1), (0,0); switching counts as status 0.
    pub fn status_occupancy(&self, from: f64) -> [f64; 4] {
        let mut occ = [0.0; 4];
        let segs = self.segments();
        for (i, (start, state)) in segs.iter().enumerate() {
            let end = segs.get(i + 1).map_or(self.horizon, |s| s.0);
            let len = end.min(self.horizon) - start.max(from);
            if len > 0.0 {
                occ[status_index(state)] += len;
            }
        }
        occ
    }

    /// Fraction of `[burn_in, horizon]` during which some element works.
    pub fn longrun_availability(&self, burn_in: f64) -> Result<f64> {
        if !(burn_in >= 0.0 && burn_in < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "burn-in {burn_in} must lie in [0, horizon {})",
                self.horizon
            )));
        }
        let occ = self.status_occupancy(burn_in);
        Ok((occ[0] + occ[1] + occ[2]) / (self.horizon - burn_in))
    }
}

/// Index of the status pair in (1,1), (1,0), (0,1), (0,0) order.
pub fn status_index(state: &SystemState) -> usize {
    let up = |j: usize| state.phases[j].tag == PhaseTag::Working;
    match (up(0), up(1)) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

fn advance_to(state: &mut SystemState, t: f64) {
    let u = t - state.wall_time;
    if u > 0.0 {
        state.drift(u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::state::ElementPhase;

    fn ev(t: f64, element: usize, from: PhaseTag, to: PhaseTag) -> Event {
        Event {
            wall_time: t,
            element,
            from,
            to,
            clock_at_event: 0.0,
            delay: 0.0,
        }
    }

    fn alternating() -> Trajectory {
        // element 2 never works, element 1 is up one unit and down one unit
        let init = SystemState::new([ElementPhase::working(), ElementPhase::under_repair()], [0.0, 0.0]);
        let mut events = Vec::new();
        for i in 0..5 {
            let t = 2.0 * i as f64;
            events.push(ev(t + 1.0, 0, PhaseTag::Working, PhaseTag::UnderRepair));
            events.push(ev(t + 2.0, 0, PhaseTag::UnderRepair, PhaseTag::Working));
        }
        events.pop();
        Trajectory::new(init, events, 10.0)
    }

    #[test]
    fn alternation_gives_half() {
        assert!((alternating().longrun_availability(0.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn always_working() {
        let tr = Trajectory::new(SystemState::both_working(), vec![], 5.0);
        assert_eq!(tr.longrun_availability(1.0).unwrap(), 1.0);
    }

    #[test]
    fn state_reconstruction() {
        let tr = alternating();
        assert_eq!(tr.state_at(0.0).unwrap(), *tr.initial());
        let mid = tr.state_at(1.25).unwrap();
        assert_eq!(mid.phases[0].tag, PhaseTag::UnderRepair);
        assert!((mid.clocks[0] - 0.25).abs() < 1e-12);
        assert!((mid.clocks[1] - 1.25).abs() < 1e-12);
        let at = tr.state_at(2.0).unwrap();
        assert_eq!(at.phases[0].tag, PhaseTag::Working);
        assert_eq!(at.clocks[0], 0.0);
        assert!(tr.state_at(10.5).is_err());
    }

    #[test]
    fn switching_delay_replays() {
        let init = SystemState::both_working();
        let e = Event {
            wall_time: 1.0,
            element: 1,
            from: PhaseTag::Working,
            to: PhaseTag::SwitchingToRepair,
            clock_at_event: 1.0,
            delay: 0.5,
        };
        let tr = Trajectory::new(init, vec![e], 3.0);
        let s = tr.state_at(1.2).unwrap();
        assert_eq!(s.phases[1].tag, PhaseTag::SwitchingToRepair);
        assert!((s.phases[1].remaining_delay - 0.3).abs() < 1e-12);
        assert_eq!(e.transition_label(), "working->switching_to_repair");
    }
}
