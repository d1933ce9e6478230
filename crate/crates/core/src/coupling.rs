//! Coupled pairs of trajectories, coupling-time tails as total-variation
//! bounds, and envelope fits to those tails.
//!
//! The two copies share one Poisson construction. For an element whose phase
//! tag agrees in both copies the hazard splits into a common part
//! `min(rate_a, rate_b)`, which moves the element in both copies at once, and
//! the two excess parts `max(0, rate_a - rate_b)` and `max(0, rate_b - rate_a)`,
//! which move one copy only. Atoms are common when the element's clocks agree.
//! Elements whose tags differ run on separate channels. Every copy still sees
//! exactly its own hazard, so each is a faithful realisation of the process,
//! and common events reset both clocks to the same value, which is what lets
//! the copies meet.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::engine::{next_event, Channel, Outcome};
use crate::error::{Error, Result};
use crate::kernel::process::{expiries, simulate_from, transition, ElementChannel};
use crate::kernel::state::{PhaseTag, SystemState};
use crate::kernel::trajectory::{Event, Trajectory};
use crate::kernel::{simulate, IntensityField, SwitchingPolicy};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::{replicate, substream_label};

/// Clock and delay tolerance for declaring the copies equal.
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingOutcome {
    /// Coupling time, `None` when censored at the horizon.
    pub tau: Option<f64>,
    pub horizon: f64,
    /// Label of the random substream that drove the pair.
    pub seed: String,
}

impl CouplingOutcome {
    pub fn is_censored(&self) -> bool {
        self.tau.is_none()
    }

    /// `tau > t`, with censored pairs counting as uncoupled at every `t`.
    pub fn uncoupled_at(&self, t: f64) -> bool {
        self.tau.is_none_or(|tau| tau > t)
    }
}

/// Both copies of one coupled run. After coupling the copies share events.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub tau: Option<f64>,
    pub a: Trajectory,
    pub b: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Both(usize),
    A(usize),
    B(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Plain,
    Common,
    Excess,
}

/// Hazard channel of the pair; `main` is the copy whose hazard is measured,
/// `rival` the copy it is compared with.
struct PairChannel<'a> {
    mode: Mode,
    main: ElementChannel<'a>,
    rival: Option<ElementChannel<'a>>,
}

impl PairChannel<'_> {
    fn pointwise(&self, ra: f64, rb: f64) -> f64 {
        match self.mode {
            Mode::Plain => ra,
            Mode::Common => ra.min(rb),
            Mode::Excess => {
                if rb.is_infinite() {
                    0.0
                } else {
                    (ra - rb).max(0.0)
                }
            }
        }
    }

    /// Both copies have the same base hazard along the offset, so only the
    /// piecewise-constant modulator factors differ.
    fn same_base(&self, rival: &ElementChannel<'_>) -> bool {
        (self.main.clock - rival.clock).abs() <= MATCH_TOL || self.main.gi.continuous_part().constant_rate().is_some()
    }

    fn cuts(&self, u0: f64, u1: f64) -> Vec<f64> {
        let mut cuts = vec![u0, u1];
        let mut br = Vec::new();
        self.main.breaks(&mut br);
        if let Some(r) = &self.rival {
            r.breaks(&mut br);
        }
        cuts.extend(br.into_iter().filter(|&b| b > u0 && b < u1));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }
}

impl Channel for PairChannel<'_> {
    fn rate(&self, u: f64) -> f64 {
        let ra = self.main.rate(u);
        let rb = self.rival.as_ref().map_or(0.0, |r| r.rate(u));
        self.pointwise(ra, rb)
    }

    fn cumulative(&self, u0: f64, u1: f64) -> Result<f64> {
        let Some(rival) = &self.rival else {
            return self.main.cumulative(u0, u1);
        };
        if !(u1 > u0) {
            return Ok(0.0);
        }
        let cuts = self.cuts(u0, u1);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if self.same_base(rival) {
                let fa = self.main.factor_on(lo, hi);
                let fb = rival.factor_on(lo, hi);
                let f = self.pointwise(fa, fb);
                if f > 0.0 {
                    let c = self.main.clock;
                    acc += f * self.main.gi.continuous_part().cumulative_between(c + lo, c + hi)?;
                }
            } else {
                acc += integrate(|u| self.rate(u), lo, hi, Tolerance::default())?;
            }
        }
        Ok(acc)
    }

    fn atoms(&self, out: &mut Vec<(f64, f64)>) {
        self.main.atoms(out);
    }

    fn breaks(&self, out: &mut Vec<f64>) {
        self.main.breaks(out);
        if let Some(r) = &self.rival {
            r.breaks(out);
        }
    }
}

fn same_phase(a: &SystemState, b: &SystemState, j: usize) -> bool {
    a.phases[j].tag == b.phases[j].tag
}

/// One step of the pair. Returns the new states and the events of each copy.
#[allow(clippy::type_complexity)]
fn coupled_step<R: Rng + ?Sized>(
    a: &SystemState,
    b: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    limit: f64,
    rng: &mut R,
) -> Result<Option<(SystemState, SystemState, Option<Event>, Option<Event>)>> {
    let mut channels: Vec<PairChannel<'_>> = Vec::new();
    let mut targets = Vec::new();
    for j in 0..2 {
        let ca = ElementChannel::of(field, a, j);
        let cb = ElementChannel::of(field, b, j);
        match (ca, cb) {
            (Some(ca), Some(cb)) if same_phase(a, b, j) => {
                let common_atoms = (a.clocks[j] - b.clocks[j]).abs() <= MATCH_TOL;
                channels.push(PairChannel {
                    mode: Mode::Common,
                    main: ca.clone().with_atoms(common_atoms),
                    rival: Some(cb.clone().with_atoms(false)),
                });
                channels.push(PairChannel {
                    mode: Mode::Excess,
                    main: ca.clone().with_atoms(!common_atoms),
                    rival: Some(cb.clone().with_atoms(false)),
                });
                channels.push(PairChannel {
                    mode: Mode::Excess,
                    main: cb.with_atoms(!common_atoms),
                    rival: Some(ca.with_atoms(false)),
                });
                targets.extend([Target::Both(j), Target::A(j), Target::B(j)]);
            }
            (ca, cb) => {
                if let Some(ca) = ca {
                    channels.push(PairChannel {
                        mode: Mode::Plain,
                        main: ca,
                        rival: None,
                    });
                    targets.push(Target::A(j));
                }
                if let Some(cb) = cb {
                    channels.push(PairChannel {
                        mode: Mode::Plain,
                        main: cb,
                        rival: None,
                    });
                    targets.push(Target::B(j));
                }
            }
        }
    }

    let (ea, eb) = (expiries(a), expiries(b));
    let mut clocks = Vec::new();
    let mut expiry_targets = Vec::new();
    for j in 0..2 {
        if ea[j].is_finite() && same_phase(a, b, j) && (ea[j] - eb[j]).abs() <= MATCH_TOL {
            clocks.push(ea[j]);
            expiry_targets.push(Target::Both(j));
        } else {
            if ea[j].is_finite() {
                clocks.push(ea[j]);
                expiry_targets.push(Target::A(j));
            }
            if eb[j].is_finite() {
                clocks.push(eb[j]);
                expiry_targets.push(Target::B(j));
            }
        }
    }

    let dyn_channels: Vec<&dyn Channel> = channels.iter().map(|c| c as &dyn Channel).collect();
    let Some(step) = next_event(&dyn_channels, &clocks, limit, rng)? else {
        return Ok(None);
    };
    let (target, hazard) = match step.outcome {
        Outcome::Hazard { channel, .. } => (targets[channel], true),
        Outcome::Expiry(i) => (expiry_targets[i], false),
    };
    let (mut na, mut nb) = (*a, *b);
    na.drift(step.offset);
    nb.drift(step.offset);
    let delay = |s: &SystemState, j: usize, rng: &mut R| -> Result<f64> {
        if hazard {
            policy.sample_delay(s.phases[j].tag, rng)
        } else {
            Ok(0.0)
        }
    };
    let (mut ev_a, mut ev_b) = (None, None);
    match target {
        Target::Both(j) => {
            let d = delay(&na, j, rng)?;
            ev_a = Some(transition(&mut na, j, d));
            ev_b = Some(transition(&mut nb, j, d));
        }
        Target::A(j) => {
            let d = delay(&na, j, rng)?;
            ev_a = Some(transition(&mut na, j, d));
        }
        Target::B(j) => {
            let d = delay(&nb, j, rng)?;
            ev_b = Some(transition(&mut nb, j, d));
        }
    }
    Ok(Some((na, nb, ev_a, ev_b)))
}

/// Runs the pair from `init_a` and `init_b` up to `horizon`, recording both
/// trajectories.
pub fn run_coupled_paths<R: Rng + ?Sized>(
    init_a: &SystemState,
    init_b: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledRun> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    init_a.validate(policy.bound())?;
    init_b.validate(policy.bound())?;
    let (mut a, mut b) = (*init_a, *init_b);
    a.wall_time = 0.0;
    b.wall_time = 0.0;
    let (start_a, start_b) = (a, b);
    let (mut events_a, mut events_b) = (Vec::new(), Vec::new());
    let mut tau = a.matches(&b, MATCH_TOL).then_some(0.0);

    while tau.is_none() {
        let Some((na, nb, ea, eb)) = coupled_step(&a, &b, field, policy, horizon - a.wall_time, rng)? else {
            break;
        };
        events_a.extend(ea);
        events_b.extend(eb);
        a = na;
        b = nb;
        if a.matches(&b, MATCH_TOL) {
            tau = Some(a.wall_time);
        }
    }
    if tau.is_some() {
        // merged: the second copy follows the first from here on
        let rest = simulate_from(&a, field, policy, horizon, rng)?;
        events_a.extend_from_slice(&rest);
        events_b.extend_from_slice(&rest);
    }
    Ok(CoupledRun {
        tau,
        a: Trajectory::new(start_a, events_a, horizon),
        b: Trajectory::new(start_b, events_b, horizon),
    })
}

/// Coupling time of one pair.
pub fn run_coupled<R: Rng + ?Sized>(
    init_a: &SystemState,
    init_b: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    horizon: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    init_a.validate(policy.bound())?;
    init_b.validate(policy.bound())?;
    let (mut a, mut b) = (*init_a, *init_b);
    a.wall_time = 0.0;
    b.wall_time = 0.0;
    if a.matches(&b, MATCH_TOL) {
        return Ok(Some(0.0));
    }
    while let Some((na, nb, _, _)) = coupled_step(&a, &b, field, policy, horizon - a.wall_time, rng)? {
        a = na;
        b = nb;
        if a.matches(&b, MATCH_TOL) {
            return Ok(Some(a.wall_time));
        }
    }
    Ok(None)
}

/// Starting conditions and size of a batch of coupled pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    pub init_a: SystemState,
    pub init_b: SystemState,
    /// Copy B first runs alone for this long from `init_b` and the pair
    /// starts from the state it reaches; a long warm-up approximates a start
    /// from the stationary law.
    pub warm_up_b: f64,
    pub horizon: f64,
    pub replications: usize,
}

impl CouplingPlan {
    pub fn new(init_a: SystemState, init_b: SystemState, horizon: f64, replications: usize) -> Self {
        Self {
            init_a,
            init_b,
            warm_up_b: 0.0,
            horizon,
            replications,
        }
    }

    pub fn with_warm_up(mut self, warm_up_b: f64) -> Self {
        self.warm_up_b = warm_up_b;
        self
    }
}

/// Coupling outcomes of independent pairs, in replication order.
pub fn coupling_outcomes(
    plan: &CouplingPlan,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    master_seed: u64,
) -> Result<Vec<CouplingOutcome>> {
    if !(plan.warm_up_b >= 0.0 && plan.warm_up_b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "warm-up must be finite and >= 0, got {}",
            plan.warm_up_b
        )));
    }
    replicate(plan.replications, master_seed, |i, rng| {
        let mut b = plan.init_b;
        if plan.warm_up_b > 0.0 {
            b = simulate(&plan.init_b, field, policy, plan.warm_up_b, rng)?.state_at(plan.warm_up_b)?;
            b.wall_time = 0.0;
        }
        Ok(CouplingOutcome {
            tau: run_coupled(&plan.init_a, &b, field, policy, plan.horizon, rng)?,
            horizon: plan.horizon,
            seed: substream_label(master_seed, i as u64),
        })
    })
}

/// Empirical `P(tau > t)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TVCurve {
    pub t: Vec<f64>,
    pub bound: Vec<f64>,
    /// Half-width of a 95% normal-approximation binomial interval.
    pub radius: Vec<f64>,
    pub n: usize,
}

impl TVCurve {
    pub fn from_outcomes(outcomes: &[CouplingOutcome], grid: &[f64]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidArgument("need at least one coupling outcome".into()));
        }
        let mut grid = grid.to_vec();
        if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidArgument("time grid must hold finite values >= 0".into()));
        }
        grid.sort_by(f64::total_cmp);
        let n = outcomes.len() as f64;
        let mut bound = Vec::with_capacity(grid.len());
        let mut radius = Vec::with_capacity(grid.len());
        for &t in &grid {
            let b = outcomes.iter().filter(|o| o.uncoupled_at(t)).count() as f64 / n;
            bound.push(b);
            radius.push(1.96 * (b * (1.0 - b) / n).sqrt());
        }
        Ok(Self {
            t: grid,
            bound,
            radius,
            n: outcomes.len(),
        })
    }

    /// Bound at the largest grid time `<= t` (1 before the grid starts).
    pub fn at(&self, t: f64) -> (f64, f64) {
        match self.t.iter().rposition(|&g| g <= t) {
            Some(i) => (self.bound[i], self.radius[i]),
            None => (1.0, 0.0),
        }
    }
}

pub fn estimate_coupling_tail(
    plan: &CouplingPlan,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    grid: &[f64],
    master_seed: u64,
) -> Result<TVCurve> {
    TVCurve::from_outcomes(&coupling_outcomes(plan, field, policy, master_seed)?, grid)
}

/// States of both copies at each time in `times`, one row per pair.
pub fn coupled_ensembles(
    init_a: &SystemState,
    init_b: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    times: &[f64],
    replications: usize,
    master_seed: u64,
) -> Result<Vec<Vec<(SystemState, SystemState)>>> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    replicate(replications, master_seed, |_, rng| {
        let run = run_coupled_paths(init_a, init_b, field, policy, horizon, rng)?;
        times
            .iter()
            .map(|&t| Ok((run.a.state_at(t)?, run.b.state_at(t)?)))
            .collect()
    })
}

/// Partition of the state space: phase tags of both elements crossed with
/// clock bins cut at `clock_edges`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binning {
    pub clock_edges: Vec<f64>,
}

impl Binning {
    pub fn new(mut clock_edges: Vec<f64>) -> Self {
        clock_edges.sort_by(f64::total_cmp);
        Self { clock_edges }
    }

    fn key(&self, s: &SystemState) -> (PhaseTag, PhaseTag, usize, usize) {
        let bin = |c: f64| self.clock_edges.partition_point(|&e| e <= c);
        (s.phases[0].tag, s.phases[1].tag, bin(s.clocks[0]), bin(s.clocks[1]))
    }
}

/// Half the L1 distance between the binned empirical laws of two equally
/// sized ensembles. This estimates total variation on the binned partition
/// and sits below the true distance up to sampling noise.
pub fn marginal_tv(a: &[SystemState], b: &[SystemState], binning: &Binning) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "ensembles must be nonempty and equal in size, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut counts: HashMap<_, (i64, i64)> = HashMap::new();
    for s in a {
        counts.entry(binning.key(s)).or_default().0 += 1;
    }
    for s in b {
        counts.entry(binning.key(s)).or_default().1 += 1;
    }
    let diff: i64 = counts.values().map(|(x, y)| (x - y).abs()).sum();
    Ok(0.5 * diff as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeForm {
    /// `K / t^ell`
    Polynomial,
    /// `K e^{-beta t}`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub form: EnvelopeForm,
    /// `K` for the polynomial form, `K~` for the exponential one; includes the lift.
    pub constant: f64,
    /// `ell` or `beta`.
    pub rate: f64,
    /// Root mean square residual of the log-domain regression.
    pub rmse: f64,
    /// Factor applied to the regression constant so the envelope dominates.
    pub lift: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl EnvelopeFit {
    pub fn eval(&self, t: f64) -> f64 {
        match self.form {
            EnvelopeForm::Polynomial => self.constant * t.powf(-self.rate),
            EnvelopeForm::Exponential => self.constant * (-self.rate * t).exp(),
        }
    }
}

/// Least-squares envelope fit in the log domain over `window`, ignoring
/// points below the noise floor `5 / n`.
pub fn fit_envelope(curve: &TVCurve, form: EnvelopeForm, window: (f64, f64)) -> Result<EnvelopeFit> {
    let floor = 5.0 / curve.n as f64;
    let pts: Vec<(f64, f64)> = curve
        .t
        .iter()
        .zip(&curve.bound)
        .filter(|&(&t, &b)| t >= window.0 && t <= window.1 && b > 0.0 && b >= floor)
        .filter(|&(&t, _)| form == EnvelopeForm::Exponential || t > 0.0)
        .map(|(&t, &b)| {
            let x = match form {
                EnvelopeForm::Polynomial => t.ln(),
                EnvelopeForm::Exponential => t,
            };
            (x, b.ln())
        })
        .collect();
    if pts.len() < 5 {
        return Err(Error::FitRejected(format!(
            "only {} usable points in window [{}, {}]; at least 5 positive values above the noise floor {floor:.3e} are needed",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitRejected("fit window holds a single abscissa".into()));
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::FitRejected(format!(
            "curve does not decay (log slope {slope:.4})"
        )));
    }
    let intercept = my - slope * mx;
    let resid: Vec<f64> = pts.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    let rmse = (resid.iter().map(|r| r * r).sum::<f64>() / m).sqrt();
    let lift = resid.iter().copied().fold(0.0, f64::max).exp();
    Ok(EnvelopeFit {
        form,
        constant: intercept.exp() * lift,
        rate: -slope,
        rmse,
        lift,
        window,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::{GeneralizedIntensity, RateFn};
    use crate::kernel::{ElementPhase, IntensitySlot};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn curve(t: Vec<f64>, f: impl Fn(f64) -> f64) -> TVCurve {
        let bound: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        TVCurve {
            radius: vec![0.0; t.len()],
            t,
            bound,
            n: 1_000_000_000,
        }
    }

    fn split() -> (SystemState, SystemState) {
        let a = SystemState::new([ElementPhase::working(), ElementPhase::under_repair()], [0.0; 2]);
        let b = SystemState::new([ElementPhase::under_repair(), ElementPhase::working()], [0.0; 2]);
        (a, b)
    }

    #[test]
    fn identical_starts_couple_at_zero() {
        let field = IntensityField::constant(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SystemState::both_working();
        let tau = run_coupled(&s, &s, &field, &SwitchingPolicy::instantaneous(), 10.0, &mut rng).unwrap();
        assert_eq!(tau, Some(0.0));
    }

    #[test]
    fn symmetric_constant_case_couples() {
        let field = IntensityField::constant(1.0, 1.0).unwrap();
        let (a, b) = split();
        let plan = CouplingPlan::new(a, b, 1000.0, 2000);
        let out = coupling_outcomes(&plan, &field, &SwitchingPolicy::instantaneous(), 3).unwrap();
        let censored = out.iter().filter(|o| o.is_censored()).count();
        assert!(censored < 20, "{censored}");
    }

    #[test]
    fn zero_hazards_are_censored() {
        let z = GeneralizedIntensity::continuous(RateFn::Zero).unwrap();
        let field = IntensityField::symmetric(IntensitySlot::new(z.clone()), IntensitySlot::new(z)).unwrap();
        let (a, b) = split();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = run_coupled(&a, &b, &field, &SwitchingPolicy::instantaneous(), 100.0, &mut rng).unwrap();
        assert_eq!(tau, None);
    }

    #[test]
    fn copies_keep_their_marginals() {
        // the first copy alone must behave like the uncoupled process
        let field = IntensityField::constant(2.0, 1.0).unwrap();
        let (a, b) = split();
        let runs = replicate(4000, 9, |_, rng| {
            run_coupled_paths(&a, &b, &field, &SwitchingPolicy::instantaneous(), 0.7, rng)
        })
        .unwrap();
        let up = runs
            .iter()
            .filter(|r| r.a.state_at(0.7).unwrap().phases[0].tag == PhaseTag::Working)
            .count();
        // single element: P(up at t | up at 0) = 1/3 + 2/3 e^{-3t}
        let p = 1.0 / 3.0 + 2.0 / 3.0 * (-2.1f64).exp();
        let se = (p * (1.0 - p) / 4000.0).sqrt();
        assert!((up as f64 / 4000.0 - p).abs() < 4.0 * se);
    }

    #[test]
    fn merged_after_tau() {
        let field = IntensityField::constant(1.0, 1.0).unwrap();
        let (a, b) = split();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let run = run_coupled_paths(&a, &b, &field, &SwitchingPolicy::instantaneous(), 50.0, &mut rng).unwrap();
        let tau = run.tau.unwrap();
        let after = |tr: &Trajectory| {
            tr.events()
                .iter()
                .filter(|e| e.wall_time > tau)
                .copied()
                .collect::<Vec<_>>()
        };
        assert_eq!(after(&run.a), after(&run.b));
        assert!(run
            .a
            .state_at(tau + 1.0)
            .unwrap()
            .matches(&run.b.state_at(tau + 1.0).unwrap(), MATCH_TOL));
    }

    #[test]
    fn curve_is_monotone_and_starts_at_one() {
        let outcomes: Vec<CouplingOutcome> = [0.5, 1.0, 3.0, 4.9]
            .iter()
            .map(|&t| CouplingOutcome {
                tau: Some(t),
                horizon: 10.0,
                seed: String::new(),
            })
            .collect();
        let c = TVCurve::from_outcomes(&outcomes, &[0.0, 1.0, 2.0, 5.0, 6.0]).unwrap();
        assert_eq!(c.bound, vec![1.0, 0.5, 0.5, 0.0, 0.0]);
        assert!(c.radius.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn tv_identical_and_disjoint() {
        let bw = vec![SystemState::both_working(); 10];
        let br = vec![SystemState::both_under_repair(); 10];
        let bins = Binning::new(vec![1.0]);
        assert_eq!(marginal_tv(&bw, &bw, &bins).unwrap(), 0.0);
        assert_eq!(marginal_tv(&bw, &br, &bins).unwrap(), 1.0);
        assert!(marginal_tv(&bw, &br[..5], &bins).is_err());
    }

    #[test]
    fn exact_exponential_fit() {
        let c = curve((1..=10).map(f64::from).collect(), |t: f64| (-2.0 * t).exp());
        let f = fit_envelope(&c, EnvelopeForm::Exponential, (1.0, 10.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-9 && (f.constant - 1.0).abs() < 1e-9 && f.rmse < 1e-9);
    }

    #[test]
    fn exact_polynomial_fit() {
        let c = curve((1..=10).map(f64::from).collect(), |t: f64| 4.0 * t.powi(-2));
        let f = fit_envelope(&c, EnvelopeForm::Polynomial, (1.0, 10.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-9 && (f.constant - 4.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_exponential_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t: Vec<f64> = (1..=40).map(|i| i as f64 * 0.25).collect();
        let noise: Vec<f64> = t
            .iter()
            .map(|_| 1.0 + 0.1 * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let bound: Vec<f64> = t.iter().zip(&noise).map(|(&x, e)| (-0.8 * x).exp() * e).collect();
        let c = TVCurve {
            radius: vec![0.0; t.len()],
            t,
            bound,
            n: 1_000_000_000,
        };
        let f = fit_envelope(&c, EnvelopeForm::Exponential, (0.0, 10.0)).unwrap();
        assert!((f.rate - 0.8).abs() < 0.12);
        for (&t, &b) in c.t.iter().zip(&c.bound) {
            assert!(f.eval(t) >= b * (1.0 - 1e-12));
        }
    }

    #[test]
    fn flat_curve_rejected() {
        let c = curve((1..=10).map(f64::from).collect(), |_| 0.5);
        assert!(matches!(
            fit_envelope(&c, EnvelopeForm::Exponential, (0.0, 10.0)),
            Err(Error::FitRejected(_))
        ));
        let zero = curve((1..=10).map(f64::from).collect(), |_| 0.0);
        assert!(fit_envelope(&zero, EnvelopeForm::Exponential, (0.0, 10.0)).is_err());
    }
}
