//! Random-coding error exponent of the controlled-asynchronous two-user MAC
//! with both senders at rate `R`:
//!
//! ```text
//! E_r(R) = min_{L in [K]} min_{V1, V12}  D(V1||P) + (L-1)/2 D(V12||P)
//!            + | I_V1(X ; Z | Y) + (L-1)/2 I_V12(X ^ Y ^ Z) - L R |^+
//! ```
//!
//! with `P(x,y,z) = W(z|x,y) P*(x) P*(y)` and both input marginals of `V1`
//! and `V12` pinned to those of `P`.
//!
//! For fixed `L` the minimization is split on the sign of the bracket.
//! Minimizing `D + lambda * info` separates over `V1` and `V12`; at
//! `lambda = 1` this is the active branch, and when its bracket is negative
//! the clipped branch optimum is the Lagrangian minimizer whose bracket
//! vanishes, found by bisection on `lambda in (0, 1)`.

mod oracle;
mod solver;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{compose_joint, symmetric_capacity_input, virtual_mac, BinaryOp, Dmc, MacChannel};
use crate::error::{Error, Result};
use crate::gallager::{trellis_exponent_mode, InputMode};
use crate::prob::{cond_mutual_information, kl_divergence, multi_information, Axis, Dist, JointDist};

pub use oracle::{grid_oracle, OracleGrid, OracleResult};
pub use solver::SolverConfig;
use solver::{Info, Problem, Solution};

/// Marginal tolerance between `p_star` and the composed distribution.
pub const MARGINAL_TOL: f64 = 1e-12;

/// Inputs of the fixed-`L` objective.
#[derive(Clone, Debug, PartialEq)]
pub struct AsyncObjectiveParams {
    l: u32,
    slots: u32,
    rate: f64,
    p_star: Dist,
    composed: JointDist,
}

impl AsyncObjectiveParams {
    /// `slots` is the frame length `K` (odd, at least 3); `1 <= l <= slots`.
    pub fn new(l: u32, slots: u32, rate: f64, p_star: Dist, composed: JointDist) -> Result<Self> {
        check_slots(slots)?;
        if l == 0 || l > slots {
            return Err(Error::OutOfRange { what: "pattern length L", value: l as f64 });
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::OutOfRange { what: "rate", value: rate });
        }
        if composed.axes() != [Axis::X, Axis::Y, Axis::Z] {
            return Err(Error::ShapeMismatch {
                expected: "axes [X, Y, Z]".into(),
                found: format!("{:?}", composed.axes()),
            });
        }
        for axis in [Axis::X, Axis::Y] {
            let m = composed.marginal_dist(axis)?;
            if m.len() != p_star.len() || m.max_abs_diff(&p_star) > MARGINAL_TOL {
                return Err(Error::InvalidDistribution(format!("{axis}-marginal of P differs from P*")));
            }
        }
        Ok(AsyncObjectiveParams { l, slots, rate, p_star, composed })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn p_star(&self) -> &Dist {
        &self.p_star
    }

    pub fn composed(&self) -> &JointDist {
        &self.composed
    }

    /// Weight `(L - 1)/2` of the two-user subblocks.
    pub fn weight(&self) -> f64 {
        (self.l as f64 - 1.0) / 2.0
    }

    pub fn with_l(&self, l: u32) -> Result<Self> {
        AsyncObjectiveParams::new(l, self.slots, self.rate, self.p_star.clone(), self.composed.clone())
    }
}

fn check_slots(slots: u32) -> Result<()> {
    if slots < 3 || slots % 2 == 0 {
        return Err(Error::OutOfRange { what: "frame length K (odd, >= 3)", value: slots as f64 });
    }
    Ok(())
}

/// Whether the rate bracket was clipped to zero at the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Clipped,
    Active,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Clipped => "clipped",
            Branch::Active => "active",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsyncResult {
    pub exponent: f64,
    pub arg_v1: JointDist,
    pub arg_v12: JointDist,
    pub l_star: u32,
    pub branch: Branch,
    /// Value of the bracket inside `|.|^+` at the optimum.
    pub bracket: f64,
    /// Largest marginal-constraint violation of the returned minimizers.
    pub residual: f64,
    /// Fixed-`L` optimum for every `L` evaluated (index `L - 1`).
    pub per_l: Vec<f64>,
}

/// The exact inner expression, evaluated through the `prob` measures.
pub fn objective(v1: &JointDist, v12: &JointDist, params: &AsyncObjectiveParams) -> Result<f64> {
    let p = params.composed();
    let c = params.weight();
    let d1 = kl_divergence(v1, p)?;
    let d12 = kl_divergence(v12, p)?;
    let i1 = cond_mutual_information(v1, Axis::X, Axis::Z, Axis::Y)?;
    let i12 = multi_information(v12);
    let bracket = i1 + c * i12 - params.l as f64 * params.rate;
    let div = if c == 0.0 { d1 } else { d1 + c * d12 };
    Ok(div + bracket.max(0.0))
}

struct Candidate {
    v1: Solution,
    v12: Solution,
}

struct FixedL<'a> {
    prob: &'a Problem,
    c: f64,
    lr: f64,
}

impl FixedL<'_> {
    fn bracket(&self, cand: &Candidate) -> f64 {
        let i12 = if self.c == 0.0 { 0.0 } else { self.prob.info(&cand.v12.v, Info::Multi) };
        self.prob.info(&cand.v1.v, Info::CondXzGivenY) + self.c * i12 - self.lr
    }

    fn value(&self, cand: &Candidate) -> f64 {
        let d12 = if self.c == 0.0 { 0.0 } else { self.c * self.prob.divergence(&cand.v12.v) };
        self.prob.divergence(&cand.v1.v) + d12 + self.bracket(cand).max(0.0)
    }

    fn solve(&self, lambda: f64, cfg: &SolverConfig) -> Result<Candidate> {
        let v1 = self.prob.minimize(Info::CondXzGivenY, lambda, cfg)?;
        let v12 = if self.c == 0.0 {
            self.prob.minimize(Info::Multi, 0.0, cfg)?
        } else {
            self.prob.minimize(Info::Multi, lambda, cfg)?
        };
        Ok(Candidate { v1, v12 })
    }
}

/// Minimizes the objective for the `L` carried by `params`.
pub fn minimize_fixed_l(params: &AsyncObjectiveParams, cfg: &SolverConfig) -> Result<AsyncResult> {
    let prob = Problem::new(params.composed())?;
    let fixed = FixedL { prob: &prob, c: params.weight(), lr: params.l as f64 * params.rate };

    let mut candidates = Vec::new();
    let active = fixed.solve(1.0, cfg)?;
    let active_bracket = fixed.bracket(&active);
    candidates.push(active);
    if active_bracket < 0.0 {
        let at_p = fixed.solve(0.0, cfg)?;
        if fixed.bracket(&at_p) <= 0.0 {
            candidates.push(at_p);
        } else {
            // bracket(lambda) is nonincreasing; root lies in (0, 1)
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut lo_cand = at_p;
            let mut hi_cand = None;
            while hi - lo > cfg.lambda_tol {
                let mid = 0.5 * (lo + hi);
                let cand = fixed.solve(mid, cfg)?;
                let b = fixed.bracket(&cand);
                if b > 0.0 {
                    lo = mid;
                    lo_cand = cand;
                } else {
                    hi = mid;
                    let done = b > -1e-13;
                    hi_cand = Some(cand);
                    if done {
                        break;
                    }
                }
            }
            candidates.push(lo_cand);
            candidates.extend(hi_cand);
        }
    }

    let best = candidates
        .into_iter()
        .min_by(|a, b| fixed.value(a).total_cmp(&fixed.value(b)))
        .expect("nonempty candidate list");
    let bracket = fixed.bracket(&best);
    let exponent = fixed.value(&best);
    let residual = best.v1.residual.max(if fixed.c == 0.0 { 0.0 } else { best.v12.residual });
    Ok(AsyncResult {
        exponent,
        arg_v1: prob.to_joint(&best.v1.v, params.composed()),
        arg_v12: prob.to_joint(&best.v12.v, params.composed()),
        l_star: params.l,
        branch: if bracket > 0.0 { Branch::Active } else { Branch::Clipped },
        bracket,
        residual,
        per_l: vec![exponent],
    })
}

/// `E_r(R)` for frame length `slots`, minimizing over every integer
/// `L in [1, slots]`; ties go to the smallest `L`.
pub fn async_exponent(rate: f64, slots: u32, mac: &MacChannel, p_star: &Dist, cfg: &SolverConfig) -> Result<AsyncResult> {
    let composed = compose_joint(mac, p_star, p_star)?;
    async_exponent_composed(rate, slots, p_star, &composed, cfg)
}

pub fn async_exponent_composed(
    rate: f64,
    slots: u32,
    p_star: &Dist,
    composed: &JointDist,
    cfg: &SolverConfig,
) -> Result<AsyncResult> {
    check_slots(slots)?;
    let results: Vec<AsyncResult> = (1..=slots)
        .into_par_iter()
        .map(|l| {
            let params = AsyncObjectiveParams::new(l, slots, rate, p_star.clone(), composed.clone())?;
            minimize_fixed_l(&params, cfg)
        })
        .collect::<Result<_>>()?;
    let per_l: Vec<f64> = results.iter().map(|r| r.exponent).collect();
    let mut best = results
        .into_iter()
        .reduce(|a, b| if b.exponent < a.exponent { b } else { a })
        .expect("slots >= 3");
    best.per_l = per_l;
    Ok(best)
}

/// Smallest rate at which `E_r` vanishes, with the `L` attaining it.
///
/// `V1 = V12 = P` is the only point with zero divergence, so `E_r(R) = 0`
/// exactly when some `L` has a nonpositive bracket at `P`, i.e. when
/// `R >= min_L (I_P(X;Z|Y) + (L-1)/2 I_P(X^Y^Z)) / L`.
pub fn zero_rate_threshold(slots: u32, composed: &JointDist) -> Result<(f64, u32)> {
    check_slots(slots)?;
    let i1 = cond_mutual_information(composed, Axis::X, Axis::Z, Axis::Y)?;
    let i12 = multi_information(composed);
    let best = (1..=slots)
        .map(|l| ((i1 + (l as f64 - 1.0) / 2.0 * i12) / l as f64, l))
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("slots >= 3");
    Ok(best)
}

/// Curve of `(rate, exponent)` samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Per-`n` MAC rate `R` of each virtual sender.
    pub mac_rate: f64,
    /// Single-user rate on the per-`k` scale.
    pub plotted_rate: f64,
    pub forney_memory1: f64,
    pub async_scaled: f64,
    pub l_star: u32,
    pub branch: Branch,
    pub residual: f64,
}

/// Options for [`comparison_curve`].
#[derive(Clone, Debug)]
pub struct CompareOptions {
    pub input_mode: InputMode,
    /// Multiply plotted rates by `1 - 1/K`.
    pub synch_overhead: bool,
    /// Supply `P*` instead of computing the symmetric sum-rate maximizer.
    pub p_star: Option<Dist>,
    pub solver: SolverConfig,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            input_mode: InputMode::Optimized,
            synch_overhead: false,
            p_star: None,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub p_star: Dist,
    pub rows: Vec<ComparisonRow>,
    pub summary: GapSummary,
}

impl Comparison {
    pub fn curves(&self) -> (ExponentCurve, ExponentCurve) {
        let forney = self.rows.iter().map(|r| (r.plotted_rate, r.forney_memory1)).collect();
        let asyn = self.rows.iter().map(|r| (r.plotted_rate, r.async_scaled)).collect();
        (
            ExponentCurve { name: "forney_memory1".into(), points: forney },
            ExponentCurve { name: "async_scaled".into(), points: asyn },
        )
    }
}

/// Relative gaps `(async - forney) / forney` over rows where both curves
/// exceed [`GAP_FLOOR`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    /// Largest relative gap over the lower half (by rate) of those rows.
    pub low_rate_max_gap: Option<f64>,
    pub low_rate_max_gap_at: Option<f64>,
    /// Relative gap at the largest rate where both curves exceed the floor.
    pub high_rate_gap: Option<f64>,
    pub high_rate_gap_at: Option<f64>,
}

pub const GAP_FLOOR: f64 = 0.01;

pub fn gap_summary(rows: &[ComparisonRow]) -> GapSummary {
    let both: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.forney_memory1 > GAP_FLOOR && r.async_scaled > GAP_FLOOR)
        .map(|r| (r.plotted_rate, (r.async_scaled - r.forney_memory1) / r.forney_memory1))
        .collect();
    let half = both.len().div_ceil(2);
    let low = both[..half]
        .iter()
        .copied()
        .reduce(|a, b| if b.1 > a.1 { b } else { a });
    let high = both.last().copied();
    GapSummary {
        low_rate_max_gap: low.map(|g| g.1),
        low_rate_max_gap_at: low.map(|g| g.0),
        high_rate_gap: high.map(|g| g.1),
        high_rate_gap_at: high.map(|g| g.0),
    }
}

/// Forney memory-1 exponent versus the scaled asynchronous exponent on the
/// single-user rate axis.
///
/// For each MAC rate `R` the plotted rate is `2R` and the asynchronous
/// exponent is reported as `2 E_r(R)` (per-`k` normalization); the trellis
/// exponent is evaluated at rate `2R` on the single-user channel.
pub fn comparison_curve(
    dmc: &Dmc,
    op: &BinaryOp,
    slots: u32,
    mac_rates: &[f64],
    opts: &CompareOptions,
) -> Result<Comparison> {
    check_slots(slots)?;
    let mac = virtual_mac(dmc, op)?;
    let p_star = match &opts.p_star {
        Some(p) => p.clone(),
        None => symmetric_capacity_input(&mac, 1e-12)?,
    };
    let composed = compose_joint(&mac, &p_star, &p_star)?;
    let overhead = if opts.synch_overhead { 1.0 - 1.0 / slots as f64 } else { 1.0 };
    let rows = mac_rates
        .par_iter()
        .map(|&r| {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::OutOfRange { what: "rate", value: r });
            }
            let a = async_exponent_composed(r, slots, &p_star, &composed, &opts.solver)?;
            let f = trellis_exponent_mode(2.0 * r, 1, &opts.input_mode, dmc)?;
            Ok(ComparisonRow {
                mac_rate: r,
                plotted_rate: 2.0 * r * overhead,
                forney_memory1: f.exponent,
                async_scaled: 2.0 * a.exponent,
                l_star: a.l_star,
                branch: a.branch,
                residual: a.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = gap_summary(&rows);
    Ok(Comparison { p_star, rows, summary })
}
