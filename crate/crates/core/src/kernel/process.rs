//! Event-by-event evolution of the full state.

use rand::Rng;

use crate::engine::{next_event, Channel, Outcome, SEARCH_HORIZON};
use crate::error::{Error, Result};
use crate::hazard::GeneralizedIntensity;
use crate::kernel::field::{IntensityField, Modulator};
use crate::kernel::state::{ElementPhase, PhaseTag, SystemState};
use crate::kernel::switching::SwitchingPolicy;
use crate::kernel::trajectory::{Event, Trajectory};

#[derive(Clone)]
/// Hazard of one element along the common time offset, with both clocks
/// advancing together.
pub(crate) struct ElementChannel<'a> {
    pub(crate) gi: &'a GeneralizedIntensity,
    pub(crate) modulator: &'a Modulator,
    pub(crate) clock: f64,
    pub(crate) other_tag: PhaseTag,
    pub(crate) other_clock: f64,
    with_atoms: bool,
}

impl<'a> ElementChannel<'a> {
    /// Channel of `element` in `state`, or `None` while it is switching.
    pub(crate) fn of(field: &'a IntensityField, state: &SystemState, element: usize) -> Option<Self> {
        let other = 1 - element;
        let slot = field.slot(element, state.phases[element].tag)?;
        Some(Self {
            gi: &slot.intensity,
            modulator: &slot.modulator,
            clock: state.clocks[element],
            other_tag: state.phases[other].tag,
            other_clock: state.clocks[other],
            with_atoms: true,
        })
    }

    pub(crate) fn with_atoms(mut self, on: bool) -> Self {
        self.with_atoms = on;
        self
    }

    pub(crate) fn factor_on(&self, u0: f64, u1: f64) -> f64 {
        // midpoint keeps the threshold comparison away from rounding at the ends
        self.modulator
            .factor(self.other_tag, self.other_clock + 0.5 * (u0 + u1))
    }
}

impl Channel for ElementChannel<'_> {
    fn rate(&self, u: f64) -> f64 {
        self.gi.continuous_part().rate(self.clock + u) * self.modulator.factor(self.other_tag, self.other_clock + u)
    }

    fn cumulative(&self, u0: f64, u1: f64) -> Result<f64> {
        if !(u1 > u0) {
            return Ok(0.0);
        }
        let cont = self.gi.continuous_part();
        let piece = |a: f64, b: f64| -> Result<f64> {
            Ok(self.factor_on(a, b) * cont.cumulative_between(self.clock + a, self.clock + b)?)
        };
        match self.modulator.change_after(self.other_clock) {
            Some(uc) if uc > u0 && uc < u1 => Ok(piece(u0, uc)? + piece(uc, u1)?),
            _ => piece(u0, u1),
        }
    }

    fn atoms(&self, out: &mut Vec<(f64, f64)>) {
        if self.with_atoms {
            out.extend(
                self.gi
                    .atoms_from(self.clock)
                    .map(|a| ((a.location - self.clock).max(0.0), a.weight)),
            );
        }
    }

    fn breaks(&self, out: &mut Vec<f64>) {
        out.extend(self.modulator.change_after(self.other_clock));
        let c = self.clock;
        out.extend(
            self.gi
                .continuous_part()
                .discontinuities(c, f64::INFINITY)
                .into_iter()
                .map(|b| b - c),
        );
    }
}

/// Puts `element` into the phase following its current one, with the given
/// switching delay, and returns the event record.
pub(crate) fn transition(state: &mut SystemState, element: usize, delay: f64) -> Event {
    let from = state.phases[element].tag;
    let to = if from.is_switching() {
        from.successor(0.0)
    } else {
        from.successor(delay)
    };
    let delay = if to.is_switching() { delay } else { 0.0 };
    let event = Event {
        wall_time: state.wall_time,
        element,
        from,
        to,
        clock_at_event: state.clocks[element],
        delay,
    };
    state.phases[element] = if to.is_switching() {
        ElementPhase::switching(to, delay)
    } else {
        ElementPhase {
            tag: to,
            remaining_delay: 0.0,
        }
    };
    state.clocks[element] = 0.0;
    event
}

/// Remaining switching delays, `INFINITY` where an element is not switching.
pub(crate) fn expiries(state: &SystemState) -> [f64; 2] {
    let rem = |p: &ElementPhase| {
        if p.tag.is_switching() {
            p.remaining_delay
        } else {
            f64::INFINITY
        }
    };
    [rem(&state.phases[0]), rem(&state.phases[1])]
}

/// Next transition within `limit` time units, if any.
pub fn advance_within<R: Rng + ?Sized>(
    state: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    limit: f64,
    rng: &mut R,
) -> Result<Option<(SystemState, Event)>> {
    let mut elements = Vec::with_capacity(2);
    let mut channels: Vec<ElementChannel<'_>> = Vec::with_capacity(2);
    for j in 0..2 {
        if let Some(ch) = ElementChannel::of(field, state, j) {
            elements.push(j);
            channels.push(ch);
        }
    }
    let dyn_channels: Vec<&dyn Channel> = channels.iter().map(|c| c as &dyn Channel).collect();
    let Some(step) = next_event(&dyn_channels, &expiries(state), limit, rng)? else {
        return Ok(None);
    };
    let mut next = *state;
    next.drift(step.offset);
    let (element, delay) = match step.outcome {
        Outcome::Expiry(j) => (j, 0.0),
        Outcome::Hazard { channel, .. } => {
            let j = elements[channel];
            (j, policy.sample_delay(next.phases[j].tag, rng)?)
        }
    };
    let event = transition(&mut next, element, delay);
    Ok(Some((next, event)))
}

/// Next transition of the process; errors when none can occur.
pub fn advance<R: Rng + ?Sized>(
    state: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    rng: &mut R,
) -> Result<(f64, SystemState, Event)> {
    match advance_within(state, field, policy, f64::INFINITY, rng)? {
        Some((next, event)) => Ok((event.wall_time, next, event)),
        None => Err(Error::MassDeficient(format!(
            "no event within {SEARCH_HORIZON:e} time units"
        ))),
    }
}

/// All transitions in `[0, horizon]` starting from `initial`.
pub fn simulate<R: Rng + ?Sized>(
    initial: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    initial.validate(policy.bound())?;
    let mut initial = *initial;
    initial.wall_time = 0.0;
    let events = simulate_from(&initial, field, policy, horizon, rng)?;
    Ok(Trajectory::new(initial, events, horizon))
}

/// Events after `state.wall_time` up to `horizon`.
pub(crate) fn simulate_from<R: Rng + ?Sized>(
    state: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<Event>> {
    let mut state = *state;
    let mut events = Vec::new();
    while let Some((next, event)) = advance_within(&state, field, policy, horizon - state.wall_time, rng)? {
        events.push(event);
        state = next;
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::RateFn;
    use crate::kernel::field::IntensitySlot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn slot(gi: GeneralizedIntensity) -> IntensitySlot {
        IntensitySlot::new(gi)
    }

    fn field_of(w1: GeneralizedIntensity, w2: GeneralizedIntensity) -> IntensityField {
        use crate::kernel::field::ElementSlots;
        let rep = GeneralizedIntensity::exponential(1.0);
        IntensityField::new([
            ElementSlots {
                working: slot(w1),
                repair: slot(rep.clone()),
            },
            ElementSlots {
                working: slot(w2),
                repair: slot(rep),
            },
        ])
        .unwrap()
    }

    #[test]
    fn competing_constant_hazards() {
        let field = IntensityField::constant(1.0, 1.0).unwrap();
        let policy = SwitchingPolicy::instantaneous();
        let s0 = SystemState::both_working();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40_000;
        let mut first = 0;
        let mut mean = 0.0;
        for _ in 0..n {
            let (t, _, ev) = advance(&s0, &field, &policy, &mut rng).unwrap();
            mean += t;
            if ev.element == 0 {
                first += 1;
            }
        }
        assert!((mean / n as f64 - 0.5).abs() < 0.01);
        assert!((first as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_atom_fires_exactly() {
        let det = GeneralizedIntensity::deterministic(1.0).unwrap();
        let zero = GeneralizedIntensity::continuous(RateFn::Zero).unwrap();
        let field = field_of(det, zero);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t, next, ev) = advance(
            &SystemState::both_working(),
            &field,
            &SwitchingPolicy::instantaneous(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(ev.element, 0);
        assert_eq!(next.phases[0].tag, PhaseTag::UnderRepair);
        assert_eq!(next.clocks, [0.0, 1.0]);
    }

    #[test]
    fn coincident_atoms_fire_in_index_order() {
        let det = GeneralizedIntensity::deterministic(1.0).unwrap();
        let field = field_of(det.clone(), det);
        let policy = SwitchingPolicy::instantaneous();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t1, s1, e1) = advance(&SystemState::both_working(), &field, &policy, &mut rng).unwrap();
        let (t2, _, e2) = advance(&s1, &field, &policy, &mut rng).unwrap();
        assert_eq!((t1, e1.element), (1.0, 0));
        assert_eq!((t2, e2.element), (1.0, 1));
    }

    #[test]
    fn hyperbolic_attribution_odds() {
        // both clocks advance together, so the 2:1 hazard ratio holds at every
        // instant and element 1 fires first with probability 2/3
        let a = GeneralizedIntensity::continuous(RateFn::hyperbolic(2.0)).unwrap();
        let b = GeneralizedIntensity::continuous(RateFn::hyperbolic(1.0)).unwrap();
        let field = field_of(a, b);
        let policy = SwitchingPolicy::instantaneous();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200_000;
        let wins = (0..n)
            .filter(|_| {
                advance(&SystemState::both_working(), &field, &policy, &mut rng)
                    .unwrap()
                    .2
                    .element
                    == 0
            })
            .count();
        let p = wins as f64 / n as f64;
        assert!((p - 2.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn horizon_zero_is_empty() {
        let field = IntensityField::constant(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = simulate(
            &SystemState::both_working(),
            &field,
            &SwitchingPolicy::instantaneous(),
            0.0,
            &mut rng,
        )
        .unwrap();
        assert!(tr.events().is_empty());
        assert_eq!(tr.state_at(0.0).unwrap(), SystemState::both_working());
    }

    #[test]
    fn zero_hazard_errors_on_advance() {
        let z = GeneralizedIntensity::continuous(RateFn::Zero).unwrap();
        let field = IntensityField::symmetric(slot(z.clone()), slot(z)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = advance(
            &SystemState::both_working(),
            &field,
            &SwitchingPolicy::instantaneous(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::MassDeficient(_))));
    }

    #[test]
    fn modulator_threshold_changes_rate() {
        // element 1 fails at rate 1 until element 2's clock reaches 1, then at rate 3
        let m = Modulator {
            clock_threshold: Some(1.0),
            after_threshold: 3.0,
            ..Modulator::default()
        };
        let w = slot(GeneralizedIntensity::exponential(1.0)).with_modulator(m);
        let z = slot(GeneralizedIntensity::continuous(RateFn::Zero).unwrap());
        let field = IntensityField::new([
            crate::kernel::field::ElementSlots {
                working: w,
                repair: z.clone(),
            },
            crate::kernel::field::ElementSlots {
                working: z.clone(),
                repair: z,
            },
        ])
        .unwrap();
        let ch = ElementChannel::of(&field, &SystemState::both_working(), 0).unwrap();
        assert!((ch.cumulative(0.0, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(ch.rate(0.5), 1.0);
        assert_eq!(ch.rate(1.5), 3.0);
    }
}
