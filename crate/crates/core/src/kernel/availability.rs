use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::field::IntensityField;
use crate::kernel::process::simulate;
use crate::kernel::state::SystemState;
use crate::kernel::switching::SwitchingPolicy;
use crate::rng::replicate;

/// Monte Carlo estimate of `P{some element works at t}` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilityCurve {
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub stderr: Vec<f64>,
    pub n: usize,
}

pub fn transient_availability(
    initial: &SystemState,
    field: &IntensityField,
    policy: &SwitchingPolicy,
    grid: &[f64],
    replications: usize,
    master_seed: u64,
) -> Result<AvailabilityCurve> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument("time grid must hold finite values >= 0".into()));
    }
    let horizon = grid.iter().copied().fold(0.0, f64::max);
    let hits = replicate(replications, master_seed, |_, rng| {
        let tr = simulate(initial, field, policy, horizon, rng)?;
        grid.iter()
            .map(|&t| Ok(tr.state_at(t)?.is_available()))
            .collect::<Result<Vec<bool>>>()
    })?;
    let n = replications as f64;
    let mut estimate = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = hits.iter().filter(|h| h[i]).count() as f64 / n;
        estimate.push(p);
        stderr.push((p * (1.0 - p) / n).sqrt());
    }
    Ok(AvailabilityCurve {
        t: grid.to_vec(),
        estimate,
        stderr,
        n: replications,
    })
}
