//! Gallager's `E0` function and the time-varying trellis exponent
//! `a * E0(rho*)` with `rho* = min(1, rho_R)`, where `E0(rho_R)/rho_R = R`.

use serde::{Deserialize, Serialize};

use crate::channels::{binary_argmax, simplex_ascent, Dmc};
use crate::error::{Error, Result};
use crate::prob::Dist;

/// Bisection tolerance on `rho`.
pub const RHO_TOL: f64 = 1e-10;

/// Upper end of the admissible `rho` interval.
pub const RHO_CAP: f64 = 1.0;

/// One sample of the trellis exponent curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GallagerPoint {
    pub rate: f64,
    pub rho_star: f64,
    /// Per-symbol exponent `a * E0(rho_star)`.
    pub exponent: f64,
    pub memory: u32,
    /// Input distribution at which `E0` was evaluated.
    pub input: Dist,
}

/// `E0(rho) = -log2 sum_z (sum_x p(x) W(z|x)^(1/(1+rho)))^(1+rho)`.
pub fn e0(rho: f64, p: &Dist, dmc: &Dmc) -> Result<f64> {
    if !(0.0..=RHO_CAP).contains(&rho) {
        return Err(Error::OutOfRange { what: "rho", value: rho });
    }
    if p.len() != dmc.inputs() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} inputs", dmc.inputs()),
            found: format!("{}", p.len()),
        });
    }
    Ok(e0_unchecked(rho, p.probs(), dmc))
}

fn e0_unchecked(rho: f64, p: &[f64], dmc: &Dmc) -> f64 {
    let s = 1.0 / (1.0 + rho);
    let mut total = 0.0;
    for z in 0..dmc.outputs() {
        let inner: f64 = p
            .iter()
            .enumerate()
            .filter(|(x, &px)| px > 0.0 && dmc.w(z, *x) > 0.0)
            .map(|(x, &px)| px * dmc.w(z, x).powf(s))
            .sum();
        if inner > 0.0 {
            total += inner.powf(1.0 + rho);
        }
    }
    (-total.log2()).max(0.0)
}

/// How the input distribution is chosen for a curve.
#[derive(Clone, Debug, PartialEq)]
pub enum InputMode {
    Fixed(Dist),
    /// Maximize `E0(rho, p)` over `p` separately at every `rho`.
    Optimized,
}

impl InputMode {
    /// `E0(rho)` under this mode, with the input that attains it.
    pub fn e0(&self, rho: f64, dmc: &Dmc) -> Result<(f64, Dist)> {
        match self {
            InputMode::Fixed(p) => Ok((e0(rho, p, dmc)?, p.clone())),
            InputMode::Optimized => {
                let p = optimize_input(dmc, rho, 1e-12)?;
                Ok((e0(rho, &p, dmc)?, p))
            }
        }
    }

    /// Mutual information threshold: `I(p, W)` or the capacity.
    pub fn threshold(&self, dmc: &Dmc) -> f64 {
        match self {
            InputMode::Fixed(p) => dmc.mutual_information(p),
            InputMode::Optimized => dmc.capacity(1e-13).0,
        }
    }
}

/// Solves `E0(rho)/rho = rate` on `(0, 1]` by bisection, using that the
/// ratio is nonincreasing in `rho`.
///
/// Returns [`Error::NoRootBelowCap`] when the ratio still exceeds `rate`
/// at `rho = 1`; callers then clamp `rho* = 1`.
pub fn rho_of_rate(rate: f64, p: &Dist, dmc: &Dmc, tol: f64) -> Result<f64> {
    rho_of_rate_mode(rate, &InputMode::Fixed(p.clone()), dmc, tol)
}

pub fn rho_of_rate_mode(rate: f64, mode: &InputMode, dmc: &Dmc, tol: f64) -> Result<f64> {
    if rate <= 0.0 || !rate.is_finite() {
        return Err(Error::OutOfRange { what: "rate", value: rate });
    }
    let threshold = mode.threshold(dmc);
    if rate >= threshold {
        return Err(Error::RateAboveThreshold { rate, threshold });
    }
    let ratio = |rho: f64| -> Result<f64> { Ok(mode.e0(rho, dmc)?.0 / rho) };
    if ratio(RHO_CAP)? >= rate {
        return Err(Error::NoRootBelowCap { cap: RHO_CAP });
    }
    let (mut lo, mut hi) = (0.0, RHO_CAP);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if ratio(mid)? >= rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Trellis exponent for memory `a` at a fixed input distribution.
pub fn trellis_exponent(rate: f64, a: u32, p: &Dist, dmc: &Dmc) -> Result<GallagerPoint> {
    trellis_exponent_mode(rate, a, &InputMode::Fixed(p.clone()), dmc)
}

/// Trellis exponent with the input re-optimized at `rho*`.
pub fn trellis_exponent_optimized(rate: f64, a: u32, dmc: &Dmc) -> Result<GallagerPoint> {
    trellis_exponent_mode(rate, a, &InputMode::Optimized, dmc)
}

pub fn trellis_exponent_mode(rate: f64, a: u32, mode: &InputMode, dmc: &Dmc) -> Result<GallagerPoint> {
    if rate <= 0.0 || !rate.is_finite() {
        return Err(Error::OutOfRange { what: "rate", value: rate });
    }
    if a == 0 {
        return Err(Error::OutOfRange { what: "memory", value: 0.0 });
    }
    let rho_star = match rho_of_rate_mode(rate, mode, dmc, RHO_TOL) {
        Ok(rho) => rho.min(RHO_CAP),
        Err(Error::NoRootBelowCap { .. }) => RHO_CAP,
        Err(Error::RateAboveThreshold { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let (e, input) = mode.e0(rho_star, dmc)?;
    Ok(GallagerPoint { rate, rho_star, exponent: a as f64 * e, memory: a, input })
}

/// Input distribution maximizing `E0(rho, p)`.
///
/// `E0` is `-log2` of a convex function of `p`, so the binary case is a
/// unimodal scalar problem; larger alphabets use exponentiated-gradient
/// ascent with 16 starts. When the objective is flat (e.g. `rho = 0`) the
/// uniform input is returned.
pub fn optimize_input(dmc: &Dmc, rho: f64, tol: f64) -> Result<Dist> {
    if !(0.0..=RHO_CAP).contains(&rho) {
        return Err(Error::OutOfRange { what: "rho", value: rho });
    }
    let n = dmc.inputs();
    if n == 1 {
        return Ok(Dist::uniform(1));
    }
    if n == 2 {
        let f = |p0: f64| e0_unchecked(rho, &[p0, 1.0 - p0], dmc);
        return match binary_argmax(f, tol) {
            Some(p0) => Dist::binary(1.0 - p0),
            None => Ok(Dist::uniform(2)),
        };
    }
    Ok(simplex_ascent(n, |p| e0_unchecked(rho, p.probs(), dmc), tol, 0xe0))
}
