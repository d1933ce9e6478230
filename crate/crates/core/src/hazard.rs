//! Lifetime distributions given by generalized intensities.
//!
//! A [`GeneralizedIntensity`] is a continuous hazard rate plus a finite list
//! of atoms. The cumulative hazard is
//!
//! ```text
//! H(s) = ∫₀ˢ λ(v) dv + Σ_{aᵢ ≤ s} wᵢ,        F(s) = 1 − exp(−H(s))
//! ```
//!
//! so an atom of weight `w` at `a` carries probability mass
//! `S(a−)·(1 − e^{−w})`. An optional support bound `B` forces `H = ∞` from
//! `B` on, which is how deterministic and bounded delays are expressed.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::solve::invert_nondecreasing;

/// Continuous part of a hazard, as a function of elapsed time `s ≥ 0`.
#[derive(Clone)]
pub enum RateFn {
    Zero,
    Constant {
        rate: f64,
    },
    /// `gamma / (1 + s)`
    Hyperbolic {
        gamma: f64,
    },
    /// `(shape/scale) (s/scale)^(shape-1)`
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// `rates[i]` on `[breakpoints[i], breakpoints[i+1])`, the last rate
    /// extending to infinity. `breakpoints[0]` must be `0`.
    Piecewise {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
    /// Arbitrary rate; cumulative values come from adaptive quadrature.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Zero => write!(f, "Zero"),
            RateFn::Constant { rate } => write!(f, "Constant({rate})"),
            RateFn::Hyperbolic { gamma } => write!(f, "Hyperbolic({gamma})"),
            RateFn::Weibull { shape, scale } => write!(f, "Weibull({shape}, {scale})"),
            RateFn::Piecewise { breakpoints, rates } => {
                write!(f, "Piecewise({breakpoints:?}, {rates:?})")
            }
            RateFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl RateFn {
    pub fn constant(rate: f64) -> Self {
        RateFn::Constant { rate }
    }

    pub fn hyperbolic(gamma: f64) -> Self {
        RateFn::Hyperbolic { gamma }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        RateFn::Custom(Arc::new(f))
    }

    /// Step function that is `0` before `at` and `rate` afterwards.
    pub fn delayed(at: f64, rate: f64) -> Self {
        RateFn::Piecewise {
            breakpoints: vec![0.0, at],
            rates: vec![0.0, rate],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidIntensity(msg));
        match self {
            RateFn::Zero | RateFn::Custom(_) => Ok(()),
            RateFn::Constant { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return bad(format!("constant rate must be finite and >= 0, got {rate}"));
                }
                Ok(())
            }
            RateFn::Hyperbolic { gamma } => {
                if !(gamma.is_finite() && *gamma >= 0.0) {
                    return bad(format!("hyperbolic gamma must be finite and >= 0, got {gamma}"));
                }
                Ok(())
            }
            RateFn::Weibull { shape, scale } => {
                if !(shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0) {
                    return bad(format!("weibull needs shape, scale > 0, got {shape}, {scale}"));
                }
                Ok(())
            }
            RateFn::Piecewise { breakpoints, rates } => {
                if breakpoints.is_empty() || breakpoints.len() != rates.len() {
                    return bad("piecewise needs one rate per breakpoint".into());
                }
                if breakpoints[0] != 0.0 {
                    return bad("piecewise breakpoints must start at 0".into());
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return bad("piecewise breakpoints must be finite and strictly increasing".into());
                }
                if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return bad("piecewise rates must be finite and >= 0".into());
                }
                Ok(())
            }
        }
    }

    pub fn rate(&self, s: f64) -> f64 {
        match self {
            RateFn::Zero => 0.0,
            RateFn::Constant { rate } => *rate,
            RateFn::Hyperbolic { gamma } => gamma / (1.0 + s),
            RateFn::Weibull { shape, scale } => {
                if *shape == 1.0 {
                    1.0 / scale
                } else {
                    shape / scale * (s / scale).powf(shape - 1.0)
                }
            }
            RateFn::Piecewise { breakpoints, rates } => {
                let idx = breakpoints.partition_point(|&b| b <= s).saturating_sub(1);
                rates[idx]
            }
            RateFn::Custom(f) => f(s),
        }
    }

    /// True when the rate is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            RateFn::Zero => true,
            RateFn::Constant { rate } => *rate == 0.0,
            RateFn::Hyperbolic { gamma } => *gamma == 0.0,
            RateFn::Piecewise { rates, .. } => rates.iter().all(|&r| r == 0.0),
            RateFn::Weibull { .. } | RateFn::Custom(_) => false,
        }
    }

    /// The rate when it does not depend on `s`.
    pub fn constant_rate(&self) -> Option<f64> {
        match self {
            RateFn::Zero => Some(0.0),
            RateFn::Constant { rate } => Some(*rate),
            RateFn::Hyperbolic { gamma } if *gamma == 0.0 => Some(0.0),
            RateFn::Weibull { shape, scale } if *shape == 1.0 => Some(1.0 / scale),
            RateFn::Piecewise { rates, .. } if rates.windows(2).all(|w| w[0] == w[1]) => Some(rates[0]),
            _ => None,
        }
    }

    /// Points in `(lo, hi)` where the rate jumps.
    pub fn discontinuities(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            RateFn::Piecewise { breakpoints, .. } => {
                breakpoints.iter().copied().filter(|&b| b > lo && b < hi).collect()
            }
            _ => Vec::new(),
        }
    }

    /// `∫₀ˢ rate`, closed form for the built-in families.
    pub fn cumulative(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            RateFn::Zero => 0.0,
            RateFn::Constant { rate } => rate * s,
            RateFn::Hyperbolic { gamma } => gamma * s.ln_1p(),
            RateFn::Weibull { shape, scale } => (s / scale).powf(*shape),
            RateFn::Piecewise { breakpoints, rates } => {
                let mut acc = 0.0;
                for (i, (&b, &r)) in breakpoints.iter().zip(rates).enumerate() {
                    if b >= s {
                        break;
                    }
                    let end = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY).min(s);
                    acc += r * (end - b);
                }
                acc
            }
            RateFn::Custom(_) => return self.cumulative_between(0.0, s),
        })
    }

    /// `∫ₐᵇ rate`.
    pub fn cumulative_between(&self, a: f64, b: f64) -> Result<f64> {
        if !(b > a) {
            return Ok(0.0);
        }
        match self {
            RateFn::Custom(f) => {
                let negative = std::cell::Cell::new(None);
                let v = integrate(
                    |x| {
                        let r = f(x);
                        if r < 0.0 || r.is_nan() {
                            negative.set(Some((x, r)));
                        }
                        r.max(0.0)
                    },
                    a,
                    b,
                    Tolerance::default(),
                );
                if let Some((at, rate)) = negative.get() {
                    return Err(Error::NegativeRate { at, rate });
                }
                v
            }
            RateFn::Hyperbolic { gamma } => Ok(gamma * ((b - a) / (1.0 + a)).ln_1p()),
            _ => Ok(self.cumulative(b)? - self.cumulative(a)?),
        }
    }

    /// Smallest `s` with `cumulative(s) >= h`, when a closed form exists.
    /// `Some(INFINITY)` means the cumulative never reaches `h`.
    pub fn inverse_cumulative(&self, h: f64) -> Option<f64> {
        if h <= 0.0 {
            return Some(0.0);
        }
        match self {
            RateFn::Zero => Some(f64::INFINITY),
            RateFn::Constant { rate } => Some(if *rate > 0.0 { h / rate } else { f64::INFINITY }),
            RateFn::Hyperbolic { gamma } => Some(if *gamma > 0.0 {
                (h / gamma).exp_m1()
            } else {
                f64::INFINITY
            }),
            RateFn::Weibull { shape, scale } => Some(scale * h.powf(1.0 / shape)),
            RateFn::Piecewise { breakpoints, rates } => {
                let mut acc = 0.0;
                for (i, (&b, &r)) in breakpoints.iter().zip(rates).enumerate() {
                    let end = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    let piece = r * (end - b);
                    if r > 0.0 && acc + piece >= h {
                        return Some((b + (h - acc) / r).min(end));
                    }
                    acc += piece;
                }
                Some(f64::INFINITY)
            }
            RateFn::Custom(_) => None,
        }
    }
}

/// A discontinuity of the distribution function, in hazard form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    /// Jump of the cumulative hazard; the carried mass is `S(a−)(1 − e^{−w})`.
    pub weight: f64,
}

/// Mixed lifetime distribution: continuous hazard, weighted atoms and an
/// optional support bound.
#[derive(Debug, Clone)]
pub struct GeneralizedIntensity {
    continuous: RateFn,
    atoms: Vec<Atom>,
    support_bound: Option<f64>,
}

impl GeneralizedIntensity {
    pub fn new(continuous: RateFn, atoms: Vec<Atom>, support_bound: Option<f64>) -> Result<Self> {
        continuous.validate()?;
        let bad = |msg: &str| Err(Error::InvalidIntensity(msg.to_string()));
        for a in &atoms {
            if !(a.location.is_finite() && a.location > 0.0) {
                return bad("atom locations must be finite and > 0");
            }
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return bad("atom weights must be finite and > 0");
            }
        }
        if atoms.windows(2).any(|w| !(w[1].location > w[0].location)) {
            return bad("atom locations must be strictly increasing");
        }
        if let Some(b) = support_bound {
            if !(b.is_finite() && b >= 0.0) {
                return bad("support bound must be finite and >= 0");
            }
            if atoms.iter().any(|a| a.location >= b) {
                return bad("atoms must lie strictly below the support bound");
            }
        } else if continuous.is_zero() && !atoms.is_empty() {
            return Err(Error::MassDeficient(
                "zero continuous part with finite atom weights and no support bound".into(),
            ));
        }
        Ok(Self {
            continuous,
            atoms,
            support_bound,
        })
    }

    /// Purely continuous distribution with hazard `rate`.
    pub fn continuous(rate: RateFn) -> Result<Self> {
        Self::new(rate, Vec::new(), None)
    }

    /// Exponential distribution with the given rate.
    pub fn exponential(rate: f64) -> Self {
        Self::continuous(RateFn::constant(rate)).expect("valid exponential rate")
    }

    /// Point mass at `at`.
    pub fn deterministic(at: f64) -> Result<Self> {
        Self::new(RateFn::Zero, Vec::new(), Some(at))
    }

    /// Builds atom weights from jump masses `(location, p)` so that the
    /// resulting distribution function jumps by exactly `p` at each location.
    ///
    /// The weight is `−ln(S(a+)/S(a−))`. A jump that exhausts the remaining
    /// survival becomes the support bound.
    pub fn from_jumps(jumps: &[(f64, f64)], continuous: RateFn) -> Result<Self> {
        continuous.validate()?;
        let mut atoms: Vec<Atom> = Vec::new();
        let mut atom_weight = 0.0;
        let mut bound = None;
        let mut last = 0.0;
        for &(location, mass) in jumps {
            if !(location > last) {
                return Err(Error::InvalidIntensity(
                    "jump locations must be > 0 and strictly increasing".into(),
                ));
            }
            if !(mass > 0.0) {
                return Err(Error::InvalidIntensity("jump masses must be > 0".into()));
            }
            if bound.is_some() {
                return Err(Error::JumpExceedsSurvival {
                    location,
                    mass,
                    available: 0.0,
                });
            }
            let before = (-(continuous.cumulative(location)? + atom_weight)).exp();
            let tol = 1e-12 * before.max(f64::MIN_POSITIVE);
            if mass > before + tol {
                return Err(Error::JumpExceedsSurvival {
                    location,
                    mass,
                    available: before,
                });
            }
            if (before - mass).abs() <= tol {
                bound = Some(location);
            } else {
                let weight = -(-mass / before).ln_1p();
                atoms.push(Atom { location, weight });
                atom_weight += weight;
            }
            last = location;
        }
        Self::new(continuous, atoms, bound)
    }

    pub fn continuous_part(&self) -> &RateFn {
        &self.continuous
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support_bound(&self) -> Option<f64> {
        self.support_bound
    }

    /// Atoms at or after `from`, with the support bound appended as an atom
    /// of infinite weight. The bound is always present: past it the
    /// survival is zero, so it must fire at once.
    pub fn atoms_from(&self, from: f64) -> impl Iterator<Item = Atom> + '_ {
        let start = self.atoms.partition_point(|a| a.location < from);
        self.atoms[start..]
            .iter()
            .copied()
            .chain(self.support_bound.map(|b| Atom {
                location: b,
                weight: f64::INFINITY,
            }))
    }

    /// True when the total mass is one (cumulative hazard reaches infinity).
    pub fn is_proper(&self) -> bool {
        if self.support_bound.is_some() {
            return true;
        }
        match &self.continuous {
            RateFn::Zero => false,
            RateFn::Constant { rate } => *rate > 0.0,
            RateFn::Hyperbolic { gamma } => *gamma > 0.0,
            RateFn::Weibull { .. } => true,
            RateFn::Piecewise { rates, .. } => rates.last().is_some_and(|&r| r > 0.0),
            // assumed; sampling reports a deficit if it is not
            RateFn::Custom(_) => true,
        }
    }

    fn atom_weight_through(&self, s: f64, inclusive: bool) -> f64 {
        let n = if inclusive {
            self.atoms.partition_point(|a| a.location <= s)
        } else {
            self.atoms.partition_point(|a| a.location < s)
        };
        self.atoms[..n].iter().map(|a| a.weight).sum()
    }

    /// `H(s)`, right-continuous.
    pub fn cumulative_hazard(&self, s: f64) -> Result<f64> {
        if self.support_bound.is_some_and(|b| s >= b) {
            return Ok(f64::INFINITY);
        }
        Ok(self.continuous.cumulative(s)? + self.atom_weight_through(s, true))
    }

    /// `H(s−)`.
    pub fn cumulative_hazard_left(&self, s: f64) -> Result<f64> {
        if self.support_bound.is_some_and(|b| s > b) {
            return Ok(f64::INFINITY);
        }
        Ok(self.continuous.cumulative(s)? + self.atom_weight_through(s, false))
    }

    /// `F(s) = 1 − exp(−H(s))`.
    pub fn eval_cdf(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidArgument(format!("cdf argument must be >= 0, got {s}")));
        }
        Ok(-(-self.cumulative_hazard(s)?).exp_m1())
    }

    /// `F(s−)`.
    pub fn eval_cdf_left(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        Ok(-(-self.cumulative_hazard_left(s)?).exp_m1())
    }

    pub fn survival(&self, s: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(s)?).exp())
    }

    /// Draws a lifetime by inverting the cumulative hazard at a standard
    /// exponential mark.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.invert(standard_exponential(rng))
    }

    /// Smallest `t` with `H(t) >= mark`.
    pub fn invert(&self, mark: f64) -> Result<f64> {
        if self.atoms.is_empty() && self.support_bound.is_none() {
            if let Some(t) = self.continuous.inverse_cumulative(mark) {
                return if t.is_finite() {
                    Ok(t)
                } else {
                    Err(Error::MassDeficient("cumulative hazard stays below the mark".into()))
                };
            }
        }
        let mut acc = 0.0;
        let mut prev = 0.0;
        for atom in self.atoms_from(0.0) {
            let piece = self.continuous.cumulative_between(prev, atom.location)?;
            if acc + piece >= mark {
                return self.invert_continuous(prev, atom.location, mark - acc);
            }
            acc += piece;
            if acc + atom.weight >= mark {
                return Ok(atom.location);
            }
            acc += atom.weight;
            prev = atom.location;
        }
        // past the last atom: only the continuous part remains
        let need = mark - acc;
        let base = self.continuous.cumulative(prev)?;
        if let Some(t) = self.continuous.inverse_cumulative(base + need) {
            return if t.is_finite() {
                Ok(t.max(prev))
            } else {
                Err(Error::MassDeficient("cumulative hazard stays below the mark".into()))
            };
        }
        let mut hi = prev + 1.0;
        let mut width = 1.0;
        let mut reached = self.continuous.cumulative_between(prev, hi)?;
        while reached < need {
            width *= 2.0;
            if width > 1e12 {
                return Err(Error::MassDeficient("cumulative hazard stays below the mark".into()));
            }
            let next = prev + width;
            reached += self.continuous.cumulative_between(hi, next)?;
            hi = next;
        }
        self.invert_continuous(prev, hi, need)
    }

    fn invert_continuous(&self, lo: f64, hi: f64, need: f64) -> Result<f64> {
        let base = self.continuous.cumulative(lo)?;
        if let Some(t) = self.continuous.inverse_cumulative(base + need) {
            return Ok(t.clamp(lo, hi));
        }
        invert_nondecreasing(
            |x| self.continuous.cumulative_between(lo, x),
            |x| self.continuous.rate(x),
            lo,
            hi,
            need,
        )
    }

    /// `∫₀^∞ s^ℓ dF(s)`.
    pub fn moment(&self, ell: f64) -> Result<f64> {
        if !(ell > 0.0) {
            return Err(Error::InvalidArgument(format!("moment order must be > 0, got {ell}")));
        }
        Ok(ell * self.power_survival_integral(ell - 1.0)?)
    }

    /// `∫₀^∞ s^p S(s) ds`, split at atoms and extended over the tail by
    /// doubling with a geometric extrapolation once the doubling ratio settles.
    pub fn power_survival_integral(&self, p: f64) -> Result<f64> {
        let tol = Tolerance::default();
        let mut total = 0.0;
        let mut prev = 0.0;
        let mut jump = 0.0;
        for atom in self.atoms_from(0.0) {
            total += self.segment_integral(p, prev, atom.location, jump, tol)?;
            if atom.weight.is_infinite() {
                return Ok(total);
            }
            jump += atom.weight;
            prev = atom.location;
        }
        let mut lo = prev;
        let mut hi = prev.max(1.0) * 2.0;
        if prev == 0.0 {
            total += self.segment_integral(p, 0.0, 1.0, jump, tol)?;
            lo = 1.0;
        }
        let mut ratios: Vec<f64> = Vec::new();
        let mut last_piece = f64::NAN;
        for _ in 0..80 {
            let piece = self.segment_integral(p, lo, hi, jump, tol)?;
            total += piece;
            if piece == 0.0 || piece <= 1e-13 * total {
                return Ok(total);
            }
            if last_piece.is_finite() && last_piece > 0.0 {
                ratios.push(piece / last_piece);
            }
            last_piece = piece;
            if let [.., a, b, c] = ratios[..] {
                if hi >= DIVERGENCE_HORIZON && a >= 0.99 && b >= 0.99 && c >= 0.99 {
                    return Err(Error::InfiniteMoment { order: p + 1.0 });
                }
                let settled = (c - b).abs() <= 1e-7 * c && (b - a).abs() <= 1e-7 * b;
                if c < 0.99 && (settled || piece * c / (1.0 - c) <= 1e-10 * total) {
                    return Ok(total + piece * c / (1.0 - c));
                }
            }
            lo = hi;
            hi *= 2.0;
        }
        Err(Error::InfiniteMoment { order: p + 1.0 })
    }

    fn segment_integral(&self, p: f64, lo: f64, hi: f64, jump: f64, tol: Tolerance) -> Result<f64> {
        if !(hi > lo) {
            return Ok(0.0);
        }
        let mut cuts = vec![lo];
        cuts.extend(self.continuous.discontinuities(lo, hi));
        cuts.push(hi);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let base = self.continuous.cumulative(a)?;
            let err = std::cell::Cell::new(None);
            let v = integrate(
                |s| {
                    let h = match self.continuous.cumulative_between(a, s) {
                        Ok(h) => h,
                        Err(e) => {
                            err.set(Some(e));
                            0.0
                        }
                    };
                    let pw = if p == 0.0 { 1.0 } else { s.powf(p) };
                    pw * (-(base + h + jump)).exp()
                },
                a,
                b,
                tol,
            )?;
            if let Some(e) = err.take() {
                return Err(e);
            }
            total += v;
        }
        Ok(total)
    }

    /// Rough exponential-moment abscissa `liminf H(s)/s`, measured at large
    /// `s`; `E exp(αX) < ∞` for every `α` below it.
    pub fn exponential_abscissa(&self) -> Result<f64> {
        if self.support_bound.is_some() {
            return Ok(f64::INFINITY);
        }
        let s = 1e6;
        let h = self.continuous.cumulative_between(s, 2.0 * s)?;
        Ok(h / s)
    }
}

/// Time beyond which a non-decaying tail counts as divergent.
pub const DIVERGENCE_HORIZON: f64 = 1e6;

pub(crate) fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p()
}
