use crate::error::{Error, Result};

/// Iteration budget shared by every inversion in the crate.
pub const INVERSION_BUDGET: usize = 200;
/// Absolute time tolerance of inversions.
pub const TIME_TOL: f64 = 1e-10;

/// Finds `x` in `(lo, hi]` where the nondecreasing `g` first reaches
/// `target`, given `g(lo) < target <= g(hi)`.
///
/// Safeguarded Newton: a Newton step from the current iterate is taken when
/// it lands strictly inside the bracket, otherwise the bracket is bisected.
/// The returned point always satisfies `g(x) >= target` up to rounding.
pub(crate) fn invert_nondecreasing<G, D>(mut g: G, mut slope: D, mut lo: f64, mut hi: f64, target: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
    D: FnMut(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    let mut width = hi - lo;
    let mut stalled = 0;
    for _ in 0..INVERSION_BUDGET {
        let tol = TIME_TOL.max(4.0 * f64::EPSILON * hi.abs());
        if hi - lo <= tol {
            return Ok(hi);
        }
        let gx = g(x)?;
        let resid = gx - target;
        if resid >= 0.0 {
            hi = x;
            if resid <= 1e-14 * target.abs().max(1.0) {
                return Ok(x);
            }
        } else {
            lo = x;
        }
        // Newton may crawl when g is computed with cancellation; fall back
        // to bisection when the bracket stops halving.
        if hi - lo > 0.5 * width {
            stalled += 1;
        } else {
            stalled = 0;
            width = hi - lo;
        }
        let d = slope(x);
        let mut newton = x - resid / d;
        if (newton - x).abs() < 0.5 * tol {
            let dir = if resid > 0.0 { -1.0 } else { 1.0 };
            newton = x + dir * 0.5 * tol;
        }
        x = if stalled < 3 && d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if x <= lo || x >= hi {
            return Ok(hi);
        }
    }
    Err(Error::InversionBudget(INVERSION_BUDGET))
}
