use rand::Rng;

use crate::error::{Error, Result};
use crate::hazard::GeneralizedIntensity;
use crate::kernel::state::PhaseTag;

/// Random, bounded delays between a status change and the new mode.
#[derive(Debug, Clone)]
pub struct SwitchingPolicy {
    to_repair: Option<GeneralizedIntensity>,
    to_work: Option<GeneralizedIntensity>,
    bound: f64,
}

impl SwitchingPolicy {
    /// Zero delays in both directions.
    pub fn instantaneous() -> Self {
        Self {
            to_repair: None,
            to_work: None,
            bound: 0.0,
        }
    }

    /// Both delay laws must carry a support bound no larger than `bound`.
    pub fn new(to_repair: GeneralizedIntensity, to_work: GeneralizedIntensity, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidField(format!(
                "switching bound must be >= 0, got {bound}"
            )));
        }
        if bound == 0.0 {
            return Ok(Self::instantaneous());
        }
        for (name, gi) in [("to_repair", &to_repair), ("to_work", &to_work)] {
            match gi.support_bound() {
                Some(b) if b <= bound => {}
                Some(b) => {
                    return Err(Error::InvalidField(format!(
                        "{name} delay support bound {b} exceeds switching bound {bound}"
                    )))
                }
                None => return Err(Error::InvalidField(format!("{name} delay law needs a support bound"))),
            }
        }
        Ok(Self {
            to_repair: Some(to_repair),
            to_work: Some(to_work),
            bound,
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_instantaneous(&self) -> bool {
        self.bound == 0.0
    }

    /// Delay for an element leaving `from`; the result never exceeds the bound.
    pub fn sample_delay<R: Rng + ?Sized>(&self, from: PhaseTag, rng: &mut R) -> Result<f64> {
        let law = match from {
            PhaseTag::Working => &self.to_repair,
            PhaseTag::UnderRepair => &self.to_work,
            _ => return Ok(0.0),
        };
        let Some(law) = law else {
            return Ok(0.0);
        };
        let delay = law.sample(rng)?;
        if !(delay >= 0.0 && delay <= self.bound) {
            return Err(Error::DelayBound {
                delay,
                bound: self.bound,
            });
        }
        Ok(delay)
    }

    pub fn mean_delays(&self) -> Result<(f64, f64)> {
        let m = |g: &Option<GeneralizedIntensity>| g.as_ref().map_or(Ok(0.0), |g| g.moment(1.0));
        Ok((m(&self.to_repair)?, m(&self.to_work)?))
    }
}
