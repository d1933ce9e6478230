//! Envelope pairs `(φ, Q)` and the checks a–d on them.
//!
//! The envelopes bound a slot's hazard as a function of the element's own
//! elapsed time, uniformly over the other element's phase and clock. `φ`
//! induces the dominated lifetime `Φ` and `Q` the dominating one `G`.

use crate::error::{Error, Result};
use crate::hazard::{GeneralizedIntensity, RateFn};
use crate::kernel::state::PhaseTag;

/// Lower and upper hazard envelopes with the constants of the checks.
#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub phi: RateFn,
    pub q: RateFn,
    /// Moment order of the integrability check, at least 2.
    pub k: u32,
    /// Radius of the neighbourhood of zero for the small-mass check.
    pub epsilon: f64,
    /// Time after which `φ` must stay positive.
    pub t_delay: f64,
}

impl EnvelopePair {
    pub fn new(phi: RateFn, q: RateFn, k: u32, epsilon: f64, t_delay: f64) -> Result<Self> {
        phi.validate()?;
        q.validate()?;
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "envelope order k must be >= 2, got {k}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(t_delay >= 0.0 && t_delay.is_finite()) {
            return Err(Error::InvalidArgument(format!("T must be >= 0, got {t_delay}")));
        }
        Ok(Self {
            phi,
            q,
            k,
            epsilon,
            t_delay,
        })
    }

    /// `Φ`, the distribution with hazard `φ`.
    pub fn dominated(&self) -> GeneralizedIntensity {
        GeneralizedIntensity::continuous(self.phi.clone()).expect("validated rate")
    }

    /// `G`, the distribution with hazard `Q`.
    pub fn dominating(&self) -> GeneralizedIntensity {
        GeneralizedIntensity::continuous(self.q.clone()).expect("validated rate")
    }

    /// Points of `grid` where `φ(s) > Q(s)`.
    pub fn ordering_violations(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter()
            .copied()
            .filter(|&s| self.phi.rate(s) > self.q.rate(s))
            .collect()
    }
}

/// One point of the state grid: the slot's own clock and the other
/// element's phase and clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub own_clock: f64,
    pub other_phase: PhaseTag,
    pub other_clock: f64,
}

/// Cartesian grid of own clocks × other phases × other clocks.
#[derive(Debug, Clone)]
pub struct StateGrid {
    pub own_clocks: Vec<f64>,
    pub other_phases: Vec<PhaseTag>,
    pub other_clocks: Vec<f64>,
}

impl StateGrid {
    /// Own and other clocks on `[0, max]` (linear near zero, geometric
    /// further out), all four other phases.
    pub fn standard(max: f64, points: usize) -> Self {
        let points = points.max(4);
        let mut clocks: Vec<f64> = (0..points / 2).map(|i| i as f64 * 2.0 / points as f64).collect();
        let ratio = (max.max(2.0) / 1.0).powf(1.0 / (points / 2) as f64);
        let mut x: f64 = 1.0;
        for _ in 0..points / 2 {
            clocks.push(x);
            x *= ratio;
        }
        clocks.push(max);
        clocks.sort_by(f64::total_cmp);
        clocks.dedup();
        Self {
            own_clocks: clocks.clone(),
            other_phases: PhaseTag::ALL.to_vec(),
            other_clocks: clocks,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        self.own_clocks.iter().flat_map(move |&own_clock| {
            self.other_phases.iter().flat_map(move |&other_phase| {
                self.other_clocks.iter().map(move |&other_clock| GridPoint {
                    own_clock,
                    other_phase,
                    other_clock,
                })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    pub point: GridPoint,
    pub hazard: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct ConditionAReport {
    pub points_checked: usize,
    pub violations: Vec<EnvelopeViolation>,
}

impl ConditionAReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `φ(s) ≤ λ(Z) ≤ Q(s)` at every grid point, `s` being the own clock.
/// Only the continuous part of the hazard is compared.
pub fn check_condition_a<F>(hazard: F, env: &EnvelopePair, grid: &StateGrid) -> ConditionAReport
where
    F: Fn(&GridPoint) -> f64,
{
    let mut violations = Vec::new();
    let mut points_checked = 0;
    for point in grid.points() {
        points_checked += 1;
        let h = hazard(&point);
        let lower = env.phi.rate(point.own_clock);
        let upper = env.q.rate(point.own_clock);
        let slack = 1e-12 * h.abs().max(1.0);
        if !(h >= lower - slack && h <= upper + slack) {
            violations.push(EnvelopeViolation {
                point,
                hazard: h,
                lower,
                upper,
            });
        }
    }
    ConditionAReport {
        points_checked,
        violations,
    }
}

/// Tunables of the numeric test for `∫₀^∞ φ = ∞`.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceHeuristic {
    /// Cumulative value that counts as "unbounded".
    pub threshold: f64,
    /// Largest upper limit examined.
    pub horizon: f64,
    /// Minimal ratio of consecutive doubling increments for a non-decaying
    /// trend.
    pub trend_ratio: f64,
}

impl Default for DivergenceHeuristic {
    fn default() -> Self {
        Self {
            threshold: 50.0,
            horizon: 1e6,
            trend_ratio: 0.95,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConditionBReport {
    /// `∫₀^∞ φ = ∞` (numerically).
    pub divergence_pass: bool,
    /// `∫₀^M φ` at the last examined `M`.
    pub cumulative_at_horizon: f64,
    /// `∫₀^∞ x^{k−1} exp(−∫₀ˣ φ) dx < ∞`.
    pub integrability_pass: bool,
    /// The value of that integral when finite.
    pub integral: Option<f64>,
}

impl ConditionBReport {
    pub fn pass(&self) -> bool {
        self.divergence_pass && self.integrability_pass
    }
}

pub fn check_condition_b(env: &EnvelopePair) -> ConditionBReport {
    check_condition_b_with(env, DivergenceHeuristic::default())
}

pub fn check_condition_b_with(env: &EnvelopePair, heur: DivergenceHeuristic) -> ConditionBReport {
    let (divergence_pass, cumulative_at_horizon) = diverges(&env.phi, heur);
    let integral = if divergence_pass {
        env.dominated().power_survival_integral(f64::from(env.k) - 1.0).ok()
    } else {
        None
    };
    ConditionBReport {
        divergence_pass,
        cumulative_at_horizon,
        integrability_pass: integral.is_some(),
        integral,
    }
}

fn diverges(phi: &RateFn, heur: DivergenceHeuristic) -> (bool, f64) {
    let Ok(mut cum) = phi.cumulative(1.0) else {
        return (false, f64::NAN);
    };
    let mut m = 1.0;
    let mut increments: Vec<f64> = Vec::new();
    while m < heur.horizon {
        let next = (2.0 * m).min(heur.horizon);
        let Ok(inc) = phi.cumulative_between(m, next) else {
            return (false, cum);
        };
        cum += inc;
        if cum >= heur.threshold && inc > 0.0 {
            return (true, cum);
        }
        if next < heur.horizon {
            increments.push(inc);
        }
        m = next;
    }
    let trend = increments.len() >= 4
        && increments[increments.len() - 4..]
            .windows(2)
            .all(|w| w[0] > 0.0 && w[1] >= heur.trend_ratio * w[0]);
    (trend, cum)
}

#[derive(Debug, Clone)]
pub struct ConditionCReport {
    /// `∫₀^ε Q`.
    pub integral: f64,
    /// Largest `ε′ ≤ ε` with `∫₀^{ε′} Q < 1`.
    pub largest_epsilon: f64,
}

impl ConditionCReport {
    pub fn pass(&self) -> bool {
        self.integral < 1.0
    }
}

/// `Q` is extended by zero on negative arguments, so the integral over
/// `(−ε, ε)` equals `∫₀^ε Q`.
pub fn check_condition_c(env: &EnvelopePair) -> Result<ConditionCReport> {
    let integral = env.q.cumulative(env.epsilon)?;
    if integral < 1.0 {
        return Ok(ConditionCReport {
            integral,
            largest_epsilon: env.epsilon,
        });
    }
    let (mut lo, mut hi) = (0.0, env.epsilon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if env.q.cumulative(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ConditionCReport {
        integral,
        largest_epsilon: lo,
    })
}

#[derive(Debug, Clone)]
pub struct ConditionDReport {
    pub points_checked: usize,
    pub violations: Vec<f64>,
}

impl ConditionDReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `φ(s) > 0` at every grid point `s > T`.
pub fn check_condition_d(env: &EnvelopePair, grid: &[f64]) -> ConditionDReport {
    let after: Vec<f64> = grid.iter().copied().filter(|&s| s > env.t_delay).collect();
    let violations = after.iter().copied().filter(|&s| !(env.phi.rate(s) > 0.0)).collect();
    ConditionDReport {
        points_checked: after.len(),
        violations,
    }
}

/// `C_j^{(n)}(ℓ)`: the ℓ-th moments of the four dominated lifetimes,
/// indexed `[element][status]` with status `1` working and `0` repair.
/// Infinite moments are stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVector {
    pub order: f64,
    pub entries: [[f64; 2]; 2],
}

impl MomentVector {
    pub fn from_envelopes(envelopes: [[&EnvelopePair; 2]; 2], ell: f64) -> Result<Self> {
        let mut entries = [[0.0; 2]; 2];
        for (j, row) in envelopes.iter().enumerate() {
            for (n, env) in row.iter().enumerate() {
                entries[j][n] = match env.dominated().moment(ell) {
                    Ok(v) => v,
                    Err(Error::InfiniteMoment { .. }) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
            }
        }
        Ok(Self { order: ell, entries })
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    fn env(phi: RateFn, q: RateFn, k: u32, eps: f64, t: f64) -> EnvelopePair {
        EnvelopePair::new(phi, q, k, eps, t).unwrap()
    }

    fn grid() -> StateGrid {
        StateGrid::standard(50.0, 20)
    }

    #[test]
    fn condition_a_cases() {
        let e = env(RateFn::constant(0.5), RateFn::constant(2.0), 2, 0.1, 0.0);
        assert!(check_condition_a(|_| 1.0, &e, &grid()).pass());

        let e = env(RateFn::hyperbolic(1.0), RateFn::constant(1.0), 2, 0.1, 0.0);
        assert!(check_condition_a(|p| 1.0 / (1.0 + p.own_clock), &e, &grid()).pass());

        let e = env(RateFn::Zero, RateFn::constant(2.0), 2, 0.1, 0.0);
        let r = check_condition_a(|_| 3.0, &e, &grid());
        assert!(!r.pass());
        assert_eq!(r.violations.len(), r.points_checked);
    }

    #[test]
    fn condition_b_cases() {
        let r = check_condition_b(&env(RateFn::constant(1.0), RateFn::constant(1.0), 2, 0.1, 0.0));
        assert!(r.pass());
        assert!((r.integral.unwrap() - 1.0).abs() < 1e-8);

        // oracle: quadrature of x(1+x)^{-3} on [0, 1e4] plus its analytic tail
        let head = integrate(|x| x * (1.0 + x).powi(-3), 0.0, 1e4, Tolerance::default()).unwrap();
        let tail = 1.0 / (1.0 + 1e4) - 0.5 / (1.0 + 1e4f64).powi(2);
        let oracle = head + tail;
        assert!((oracle - 0.5).abs() < 1e-8);
        let r = check_condition_b(&env(RateFn::hyperbolic(3.0), RateFn::constant(3.0), 2, 0.1, 0.0));
        assert!(r.divergence_pass);
        assert!(r.pass());
        assert!((r.integral.unwrap() - oracle).abs() < 1e-7);

        let r = check_condition_b(&env(RateFn::hyperbolic(1.5), RateFn::constant(3.0), 2, 0.1, 0.0));
        assert!(r.divergence_pass);
        assert!(!r.integrability_pass);
        assert!(!r.pass());
    }

    #[test]
    fn condition_b_rejects_integrable_phi() {
        let phi = RateFn::Piecewise {
            breakpoints: vec![0.0, 1.0],
            rates: vec![2.0, 0.0],
        };
        let r = check_condition_b(&env(phi, RateFn::constant(3.0), 2, 0.1, 0.0));
        assert!(!r.divergence_pass);
        let r = check_condition_b(&env(
            RateFn::custom(|s| (1.0 + s).powf(-1.5)),
            RateFn::constant(3.0),
            2,
            0.1,
            0.0,
        ));
        assert!(!r.divergence_pass);
    }

    #[test]
    fn condition_c_cases() {
        let r = check_condition_c(&env(RateFn::Zero, RateFn::constant(2.0), 2, 0.1, 0.0)).unwrap();
        assert!(r.pass());
        assert!((r.integral - 0.2).abs() < 1e-15);

        let r = check_condition_c(&env(RateFn::Zero, RateFn::constant(2.0), 2, 0.6, 0.0)).unwrap();
        assert!(!r.pass());
        assert!((r.integral - 1.2).abs() < 1e-12);
        assert!(r.largest_epsilon < 0.5 && r.largest_epsilon > 0.5 - 1e-9);

        let q = RateFn::Weibull { shape: 0.5, scale: 1.0 };
        let oracle = integrate(|s| 0.5 / s.sqrt(), 0.0, 0.25, Tolerance::default()).unwrap();
        let r = check_condition_c(&env(RateFn::Zero, q, 2, 0.25, 0.0)).unwrap();
        assert!(r.pass());
        assert!((r.integral - oracle).abs() < 1e-8);
        assert!((r.integral - 0.5).abs() < 1e-12);
    }

    #[test]
    fn condition_d_cases() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        assert!(check_condition_d(&env(RateFn::constant(1.0), RateFn::constant(1.0), 2, 0.1, 0.0), &grid).pass());
        let step = RateFn::delayed(2.0, 1.0);
        assert!(check_condition_d(&env(step.clone(), RateFn::constant(1.0), 2, 0.1, 2.0), &grid).pass());
        let r = check_condition_d(&env(step, RateFn::constant(1.0), 2, 0.1, 1.0), &grid);
        assert!(!r.pass());
        assert!(r.violations.iter().all(|&s| s > 1.0 && s < 2.0));
        assert_eq!(r.violations.len(), 19);
    }

    #[test]
    fn moment_vector_entries() {
        let a = env(RateFn::constant(1.0), RateFn::constant(2.0), 2, 0.1, 0.0);
        let b = env(RateFn::constant(2.0), RateFn::constant(2.0), 2, 0.1, 0.0);
        let c = env(RateFn::hyperbolic(1.5), RateFn::constant(2.0), 2, 0.1, 0.0);
        let mv = MomentVector::from_envelopes([[&a, &b], [&b, &a]], 1.0).unwrap();
        assert!((mv.entries[0][0] - 1.0).abs() < 1e-8);
        assert!((mv.entries[0][1] - 0.5).abs() < 1e-8);
        assert!(mv.is_finite());
        let mv = MomentVector::from_envelopes([[&a, &c], [&b, &a]], 2.0).unwrap();
        assert!(mv.entries[0][1].is_infinite());
    }

    #[test]
    fn invalid_envelopes() {
        assert!(EnvelopePair::new(RateFn::Zero, RateFn::Zero, 1, 0.1, 0.0).is_err());
        assert!(EnvelopePair::new(RateFn::Zero, RateFn::Zero, 2, 0.0, 0.0).is_err());
        assert!(EnvelopePair::new(RateFn::Zero, RateFn::Zero, 2, 0.1, -1.0).is_err());
    }
}
