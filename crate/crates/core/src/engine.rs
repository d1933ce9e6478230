//! Next-event search over competing hazard channels.
//!
//! Every channel has a continuous rate along the common time offset `u` and
//! may carry atoms (jumps of its cumulative hazard) at fixed offsets. One
//! standard exponential mark `E` is drawn per step and the first offset at
//! which the summed cumulative hazard reaches `E` is located. Deterministic
//! expiries (switching delays) compete with the hazards.
//!
//! At a single instant the order is: continuous crossing, then expiries, then
//! atoms in channel order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hazard::standard_exponential;
use crate::solve::invert_nondecreasing;

/// Offset beyond which an unbounded search gives up.
pub(crate) const SEARCH_HORIZON: f64 = 1e12;

pub(crate) trait Channel {
    fn rate(&self, u: f64) -> f64;
    fn cumulative(&self, u0: f64, u1: f64) -> Result<f64>;
    /// Appends `(offset, weight)` atoms with `offset >= 0`; weight may be
    /// infinite.
    fn atoms(&self, out: &mut Vec<(f64, f64)>);
    /// Offsets where the rate jumps; used only to place segment ends.
    fn breaks(&self, _out: &mut Vec<f64>) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Hazard { channel: usize, atom: bool },
    Expiry(usize),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub offset: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    Break,
    Expiry(usize),
    Atom(usize, f64),
}

impl Stop {
    fn rank(&self) -> (u8, usize) {
        match *self {
            Stop::Break => (0, 0),
            Stop::Expiry(i) => (1, i),
            Stop::Atom(c, _) => (2, c),
        }
    }
}

/// Finds the next event no later than `limit`; `Ok(None)` when nothing
/// happens up to `limit`.
pub(crate) fn next_event<R: Rng + ?Sized>(
    channels: &[&dyn Channel],
    expiries: &[f64],
    limit: f64,
    rng: &mut R,
) -> Result<Option<Step>> {
    let mark = standard_exponential(rng);
    let mut stops: Vec<(f64, Stop)> = Vec::new();
    let mut buf = Vec::new();
    for (c, ch) in channels.iter().enumerate() {
        buf.clear();
        ch.atoms(&mut buf);
        stops.extend(buf.iter().map(|&(u, w)| (u, Stop::Atom(c, w))));
        let mut br = Vec::new();
        ch.breaks(&mut br);
        stops.extend(br.into_iter().filter(|&u| u > 0.0).map(|u| (u, Stop::Break)));
    }
    for (i, &u) in expiries.iter().enumerate() {
        if u.is_finite() {
            stops.push((u, Stop::Expiry(i)));
        }
    }
    stops.retain(|&(u, _)| u <= limit);
    stops.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.rank().cmp(&b.1.rank())));

    let total = |u0: f64, u1: f64| -> Result<f64> {
        let mut acc = 0.0;
        for ch in channels {
            acc += ch.cumulative(u0, u1)?;
        }
        Ok(acc)
    };

    let mut acc = 0.0;
    let mut prev = 0.0;
    for &(u, stop) in &stops {
        if u > prev {
            let piece = total(prev, u)?;
            if acc + piece >= mark {
                return crossing(channels, prev, u, mark - acc, rng).map(Some);
            }
            acc += piece;
            prev = u;
        }
        match stop {
            Stop::Break => {}
            Stop::Expiry(i) => {
                return Ok(Some(Step {
                    offset: u,
                    outcome: Outcome::Expiry(i),
                }))
            }
            Stop::Atom(c, w) => {
                if w.is_infinite() || acc + w >= mark {
                    return Ok(Some(Step {
                        offset: u,
                        outcome: Outcome::Hazard { channel: c, atom: true },
                    }));
                }
                acc += w;
            }
        }
    }

    // open tail after the last stop
    let end = limit.min(SEARCH_HORIZON);
    let mut width = initial_width(channels, prev, mark - acc);
    while prev < end {
        let next = (prev + width).min(end);
        let piece = total(prev, next)?;
        if acc + piece >= mark {
            return crossing(channels, prev, next, mark - acc, rng).map(Some);
        }
        acc += piece;
        prev = next;
        width *= 2.0;
    }
    if limit > SEARCH_HORIZON {
        return Err(Error::MassDeficient(format!(
            "no event within {SEARCH_HORIZON:e} time units"
        )));
    }
    Ok(None)
}

fn initial_width(channels: &[&dyn Channel], at: f64, need: f64) -> f64 {
    let r: f64 = channels.iter().map(|c| c.rate(at)).sum();
    if r.is_finite() && r > 0.0 {
        (1.5 * need / r).clamp(1e-6, 1e3)
    } else {
        1.0
    }
}

fn crossing<R: Rng + ?Sized>(channels: &[&dyn Channel], lo: f64, hi: f64, need: f64, rng: &mut R) -> Result<Step> {
    let u = invert_nondecreasing(
        |x| {
            let mut acc = 0.0;
            for ch in channels {
                acc += ch.cumulative(lo, x)?;
            }
            Ok(acc)
        },
        |x| channels.iter().map(|c| c.rate(x)).sum(),
        lo,
        hi,
        need,
    )?;
    let mut weights: Vec<f64> = channels.iter().map(|c| c.rate(u)).collect();
    if weights.iter().any(|w| !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
        let from = lo.max(u - 1e-9 * u.max(1.0));
        weights = channels
            .iter()
            .map(|c| c.cumulative(from, u))
            .collect::<Result<Vec<_>>>()?;
    }
    let sum: f64 = weights.iter().sum();
    let pick: f64 = rng.random::<f64>() * sum;
    let mut acc = 0.0;
    let mut channel = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if pick < acc {
            channel = i;
            break;
        }
    }
    Ok(Step {
        offset: u,
        outcome: Outcome::Hazard { channel, atom: false },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Const(f64, Vec<(f64, f64)>);
    impl Channel for Const {
        fn rate(&self, _u: f64) -> f64 {
            self.0
        }
        fn cumulative(&self, u0: f64, u1: f64) -> Result<f64> {
            Ok(self.0 * (u1 - u0).max(0.0))
        }
        fn atoms(&self, out: &mut Vec<(f64, f64)>) {
            out.extend(&self.1);
        }
    }

    #[test]
    fn competing_exponentials() {
        let a = Const(1.0, vec![]);
        let b = Const(3.0, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut first = 0;
        let mut mean = 0.0;
        for _ in 0..n {
            let s = next_event(&[&a, &b], &[], f64::INFINITY, &mut rng).unwrap().unwrap();
            mean += s.offset;
            if s.outcome
                == (Outcome::Hazard {
                    channel: 0,
                    atom: false,
                })
            {
                first += 1;
            }
        }
        assert!((first as f64 / n as f64 - 0.25).abs() < 0.015);
        assert!((mean / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn infinite_atom_fires() {
        let a = Const(0.0, vec![(1.0, f64::INFINITY)]);
        let b = Const(0.0, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = next_event(&[&b, &a], &[], f64::INFINITY, &mut rng).unwrap().unwrap();
        assert_eq!(s.offset, 1.0);
        assert_eq!(s.outcome, Outcome::Hazard { channel: 1, atom: true });
    }

    #[test]
    fn expiry_precedes_atom_at_same_instant() {
        let a = Const(0.0, vec![(1.0, f64::INFINITY)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = next_event(&[&a], &[1.0], f64::INFINITY, &mut rng).unwrap().unwrap();
        assert_eq!(s.outcome, Outcome::Expiry(0));
    }

    #[test]
    fn limit_and_deficit() {
        let z = Const(0.0, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(next_event(&[&z], &[], 10.0, &mut rng).unwrap().is_none());
        assert!(matches!(
            next_event(&[&z], &[], f64::INFINITY, &mut rng),
            Err(Error::MassDeficient(_))
        ));
    }
}
