//! Independent reference computations: the four-state chain of the
//! exponential case, renewal overshoot, and goodness of fit.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hazard::GeneralizedIntensity;
use crate::kernel::{IntensityField, PhaseTag, SwitchingPolicy};
use crate::rng::replicate;

/// Generator over the status pairs (1,1), (1,0), (0,1), (0,0), where 1 means
/// working.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcSpec {
    generator: [[f64; 4]; 4],
}

/// Index of `(n1, n2)` in the state order.
pub fn ctmc_index(n1: usize, n2: usize) -> usize {
    (1 - n1) * 2 + (1 - n2)
}

impl CtmcSpec {
    /// Takes the off-diagonal rates and fills in the diagonal.
    pub fn new(mut generator: [[f64; 4]; 4]) -> Result<Self> {
        for i in 0..4 {
            let mut row = 0.0;
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let q = generator[i][j];
                if !(q.is_finite() && q >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "rate q[{i}][{j}] = {q} must be finite and >= 0"
                    )));
                }
                row += q;
            }
            generator[i][i] = -row;
        }
        Ok(Self { generator })
    }

    /// Each element fails at `lambda[j]` and is repaired at `mu[j]`,
    /// independently of the other.
    pub fn independent(lambda: [f64; 2], mu: [f64; 2]) -> Result<Self> {
        let mut g = [[0.0; 4]; 4];
        for n1 in 0..2 {
            for n2 in 0..2 {
                let i = ctmc_index(n1, n2);
                g[i][ctmc_index(1 - n1, n2)] = if n1 == 1 { lambda[0] } else { mu[0] };
                g[i][ctmc_index(n1, 1 - n2)] = if n2 == 1 { lambda[1] } else { mu[1] };
            }
        }
        Self::new(g)
    }

    /// Generator of a field with constant bases, no atoms, status-only
    /// modulators and instantaneous switching; anything else is refused.
    pub fn from_field(field: &IntensityField, policy: &SwitchingPolicy) -> Result<Self> {
        if !policy.is_instantaneous() {
            return Err(Error::InvalidField("chain oracle needs instantaneous switching".into()));
        }
        let tag = |n: usize| {
            if n == 1 {
                PhaseTag::Working
            } else {
                PhaseTag::UnderRepair
            }
        };
        let rate = |j: usize, own: usize, other: usize| -> Result<f64> {
            let slot = field.slot(j, tag(own)).expect("non-switching slot");
            let gi = &slot.intensity;
            let base = match gi.continuous_part().constant_rate() {
                Some(r) if gi.atoms().is_empty() && gi.support_bound().is_none() => r,
                _ => {
                    return Err(Error::InvalidField(format!(
                        "element {} {} hazard is not a plain constant",
                        j + 1,
                        tag(own)
                    )))
                }
            };
            if !slot.modulator.is_status_only() {
                return Err(Error::InvalidField(format!(
                    "element {} {} modulator depends on the other clock",
                    j + 1,
                    tag(own)
                )));
            }
            Ok(base * slot.modulator.factor(tag(other), 0.0))
        };
        let mut g = [[0.0; 4]; 4];
        for n1 in 0..2 {
            for n2 in 0..2 {
                let i = ctmc_index(n1, n2);
                g[i][ctmc_index(1 - n1, n2)] = rate(0, n1, n2)?;
                g[i][ctmc_index(n1, 1 - n2)] = rate(1, n2, n1)?;
            }
        }
        Self::new(g)
    }

    pub fn generator(&self) -> &[[f64; 4]; 4] {
        &self.generator
    }

    /// Number of closed communicating classes.
    fn closed_classes(&self) -> usize {
        let mut reach = [[false; 4]; 4];
        for (i, row) in reach.iter_mut().enumerate() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = i == j || self.generator[i][j] > 0.0;
            }
        }
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    reach[i][j] |= reach[i][k] && reach[k][j];
                }
            }
        }
        // a state is in a closed class iff everything it reaches reaches back
        let closed: Vec<usize> = (0..4)
            .filter(|&i| (0..4).all(|j| !reach[i][j] || reach[j][i]))
            .collect();
        let mut classes = 0;
        let mut seen = [false; 4];
        for &i in &closed {
            if !seen[i] {
                classes += 1;
                for &j in &closed {
                    if reach[i][j] {
                        seen[j] = true;
                    }
                }
            }
        }
        classes
    }
}

/// Stationary vector of a chain with a single closed class; transient
/// states receive zero mass.
pub fn ctmc_stationary(spec: &CtmcSpec) -> Result<[f64; 4]> {
    let classes = spec.closed_classes();
    if classes != 1 {
        return Err(Error::Reducible(format!("{classes} closed classes")));
    }
    // pi Q = 0 with the last balance equation replaced by sum(pi) = 1
    let q = &spec.generator;
    let mut a = [[0.0; 5]; 4];
    for (i, row) in a.iter_mut().enumerate().take(3) {
        for (j, x) in row.iter_mut().enumerate().take(4) {
            *x = q[j][i];
        }
    }
    a[3] = [1.0, 1.0, 1.0, 1.0, 1.0];
    let pi = gauss_solve(a)?;
    let scale = q.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    for col in 0..4 {
        let r: f64 = (0..4).map(|i| pi[i] * q[i][col]).sum();
        if r.abs() > 1e-12 * scale {
            return Err(Error::Singular);
        }
    }
    Ok(pi.map(|p| p.max(0.0)))
}

fn gauss_solve(mut a: [[f64; 5]; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        for row in 0..4 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..5 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Ok([0, 1, 2, 3].map(|i| a[i][4] / a[i][i]))
}

/// Distribution at time `t` from `initial`, by uniformization.
pub fn ctmc_transient(spec: &CtmcSpec, initial: [f64; 4], t: f64) -> Result<[f64; 4]> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    let q = &spec.generator;
    let rate = (0..4).map(|i| -q[i][i]).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        return Ok(initial);
    }
    let mut p = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] = q[i][j] / rate + if i == j { 1.0 } else { 0.0 };
        }
    }
    let (lo, weights) = poisson_weights(rate * t);
    let mut v = initial;
    let mut out = [0.0; 4];
    for k in 0..lo + weights.len() {
        if k >= lo {
            let w = weights[k - lo];
            for i in 0..4 {
                out[i] += w * v[i];
            }
        }
        let mut next = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                next[j] += v[i] * p[i][j];
            }
        }
        v = next;
    }
    Ok(out)
}

/// Poisson(`m`) probabilities from the first index kept, built outward from
/// the mode and normalised; the dropped tails weigh far below 1e-10.
fn poisson_weights(m: f64) -> (usize, Vec<f64>) {
    const CUT: f64 = 1e-22;
    let mode = m.floor() as usize;
    let mut left = vec![1.0];
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / m;
        if w < CUT {
            break;
        }
        left.push(w);
        k -= 1;
    }
    let lo = mode + 1 - left.len();
    left.reverse();
    let mut w = 1.0;
    let mut k = mode;
    loop {
        k += 1;
        w *= m / k as f64;
        if w < CUT {
            break;
        }
        left.push(w);
    }
    let total: f64 = left.iter().sum();
    left.iter_mut().for_each(|x| *x /= total);
    (lo, left)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OvershootReport {
    pub levels: Vec<f64>,
    pub mean_overshoot: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `E[xi^2] / E[xi]`.
    pub bound: f64,
    pub pass: Vec<bool>,
    pub replications: usize,
}

impl OvershootReport {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Mean overshoot of a renewal process with increments drawn from `gi`
/// above each level, against the bound `E[xi^2] / E[xi]`.
pub fn lorden_overshoot_check(
    gi: &GeneralizedIntensity,
    levels: &[f64],
    replications: usize,
    master_seed: u64,
) -> Result<OvershootReport> {
    if replications < 2 {
        return Err(Error::InvalidArgument("need at least 2 replications".into()));
    }
    let m1 = gi.moment(1.0)?;
    let m2 = gi.moment(2.0)?;
    if m1 <= 0.0 {
        return Err(Error::InvalidArgument("increments must have positive mean".into()));
    }
    let bound = m2 / m1;
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&i, &j| levels[i].total_cmp(&levels[j]));
    let rows = replicate(replications, master_seed, |_, rng| overshoots(gi, levels, &order, rng))?;
    let n = replications as f64;
    let mut mean_overshoot = Vec::with_capacity(levels.len());
    let mut stderr = Vec::with_capacity(levels.len());
    let mut pass = Vec::with_capacity(levels.len());
    for l in 0..levels.len() {
        let mean = rows.iter().map(|r| r[l]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[l] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        mean_overshoot.push(mean);
        stderr.push(se);
        pass.push(mean <= bound + 3.0 * se);
    }
    Ok(OvershootReport {
        levels: levels.to_vec(),
        mean_overshoot,
        stderr,
        bound,
        pass,
        replications,
    })
}

fn overshoots<R: Rng + ?Sized>(
    gi: &GeneralizedIntensity,
    levels: &[f64],
    order: &[usize],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; levels.len()];
    let mut sum = 0.0;
    for &l in order {
        while sum <= levels[l] {
            sum += gi.sample(rng)?;
        }
        out[l] = sum - levels[l];
    }
    Ok(out)
}

/// A distribution function with one-sided limits.
pub trait Cdf {
    fn cdf(&self, s: f64) -> f64;
    /// `F(s-)`; equal to `cdf` for continuous laws.
    fn cdf_left(&self, s: f64) -> f64 {
        self.cdf(s)
    }
}

impl Cdf for GeneralizedIntensity {
    fn cdf(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        self.eval_cdf(s).unwrap_or(f64::NAN)
    }

    fn cdf_left(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.eval_cdf_left(s).unwrap_or(f64::NAN)
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, s: f64) -> f64 {
        self(s)
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// `model`, comparing both one-sided limits at every sample value.
pub fn ks_statistic<C: Cdf + ?Sized>(samples: &[f64], model: &C) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        d = d.max((model.cdf_left(x) - i as f64 / n).abs());
        d = d.max((model.cdf(x) - j as f64 / n).abs());
        i = j;
    }
    d
}
