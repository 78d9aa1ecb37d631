//! Exhaustive grid oracle for the fixed-`L` objective on binary alphabets.
//!
//! A feasible `V` over `{0,1}^3` is parametrized by the pair mass
//! `t = V(0,0)` (the other three pair masses follow from the pinned input
//! marginals) and the four conditionals `q_xy = V(z=1 | x, y)`. The oracle
//! enumerates `t` on the multiples of `step` inside its feasible interval
//! (plus the two interval ends) and every `q_xy` on `{0, step, ..., 1}`,
//! skipping values that put mass where `P` has none. Every grid point meets
//! the marginal constraints exactly, so the grid minimum bounds the true
//! minimum from above.
//!
//! Since the objective is nondecreasing in each of `D1, I1, D12, I12`, only
//! the Pareto front of `(divergence, information)` pairs is searched for
//! each of `V1` and `V12`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AsyncObjectiveParams;
use crate::error::{Error, Result};
use crate::prob::{Axis, JointDist};

/// Smallest admissible grid step is `1 / MAX_DENOMINATOR`.
pub const MAX_DENOMINATOR: u32 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Grid minimum: an upper bound on the true minimum.
    pub value: f64,
    /// First-order bound on how far below `value` the continuous minimum
    /// can sit when it lies within one grid step of the grid argmin.
    pub slack: f64,
    pub arg_v1: JointDist,
    pub arg_v12: JointDist,
}

type Theta = [u8; 5];

#[derive(Clone, Copy, Debug)]
struct FrontPoint {
    d: f64,
    info: f64,
    theta: Theta,
}

/// Precomputed grid and Pareto fronts for one composed distribution.
#[derive(Clone, Debug)]
pub struct OracleGrid {
    p: [f64; 8],
    a: f64,
    b: f64,
    t_values: Vec<f64>,
    q_values: [Vec<f64>; 4],
    front1: Vec<FrontPoint>,
    front12: Vec<FrontPoint>,
}

/// `(D(V||P), I(X;Z|Y), I(X^Y^Z))` for binary cubes, written out directly.
fn measures(v: &[f64; 8], p: &[f64; 8]) -> (f64, f64, f64) {
    let xl = |q: f64| if q > 0.0 { q * q.log2() } else { 0.0 };
    let mut d = 0.0;
    for i in 0..8 {
        if v[i] > 0.0 {
            if p[i] <= 0.0 {
                return (f64::INFINITY, 0.0, 0.0);
            }
            d += v[i] * (v[i] / p[i]).log2();
        }
    }
    let at = |x: usize, y: usize, z: usize| v[x * 4 + y * 2 + z];
    let mut h_xyz = 0.0;
    let (mut h_xy, mut h_yz, mut h_y, mut h_x, mut h_z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                h_xyz -= xl(at(x, y, z));
            }
            h_xy -= xl(at(x, y, 0) + at(x, y, 1));
        }
    }
    for y in 0..2 {
        for z in 0..2 {
            h_yz -= xl(at(0, y, z) + at(1, y, z));
        }
        h_y -= xl(at(0, y, 0) + at(0, y, 1) + at(1, y, 0) + at(1, y, 1));
    }
    for u in 0..2 {
        h_x -= xl(at(u, 0, 0) + at(u, 0, 1) + at(u, 1, 0) + at(u, 1, 1));
        h_z -= xl(at(0, 0, u) + at(0, 1, u) + at(1, 0, u) + at(1, 1, u));
    }
    let cmi = (h_xy + h_yz - h_xyz - h_y).max(0.0);
    let multi = (h_x + h_y + h_z - h_xyz).max(0.0);
    (d.max(0.0), cmi, multi)
}

fn pareto(mut pts: Vec<FrontPoint>) -> Vec<FrontPoint> {
    pts.sort_by(|a, b| a.d.total_cmp(&b.d).then(a.info.total_cmp(&b.info)));
    let mut out: Vec<FrontPoint> = Vec::new();
    for p in pts {
        if out.last().is_none_or(|l| p.info < l.info) {
            out.push(p);
        }
    }
    out
}

impl OracleGrid {
    /// `composed` must be a binary `[X, Y, Z]` distribution; `denominator`
    /// sets the grid step `1/denominator` (at most 32).
    pub fn new(composed: &JointDist, denominator: u32) -> Result<Self> {
        if composed.shape() != [2, 2, 2] {
            return Err(Error::OracleNotBinary);
        }
        if composed.axes() != [Axis::X, Axis::Y, Axis::Z] {
            return Err(Error::ShapeMismatch { expected: "axes [X, Y, Z]".into(), found: format!("{:?}", composed.axes()) });
        }
        if denominator == 0 || denominator > MAX_DENOMINATOR {
            return Err(Error::OutOfRange { what: "grid denominator", value: denominator as f64 });
        }
        let mut p = [0.0; 8];
        p.copy_from_slice(composed.probs());
        let a = p[0] + p[1] + p[2] + p[3];
        let b = p[0] + p[1] + p[4] + p[5];
        let step = 1.0 / denominator as f64;

        let (t_lo, t_hi) = ((a + b - 1.0).max(0.0), a.min(b));
        let mut t_values = vec![t_lo];
        for i in 0..=denominator {
            let t = i as f64 * step;
            if t > t_lo && t < t_hi {
                t_values.push(t);
            }
        }
        if t_hi > t_lo {
            t_values.push(t_hi);
        }

        let grid: Vec<f64> = (0..=denominator).map(|i| i as f64 * step).collect();
        let q_values: [Vec<f64>; 4] = std::array::from_fn(|xy| {
            let (p0, p1) = (p[2 * xy], p[2 * xy + 1]);
            if p1 <= 0.0 {
                vec![0.0]
            } else if p0 <= 0.0 {
                vec![1.0]
            } else {
                grid.clone()
            }
        });

        let mut g = OracleGrid { p, a, b, t_values, q_values, front1: Vec::new(), front12: Vec::new() };
        let (f1, f12) = g.build_fronts();
        g.front1 = f1;
        g.front12 = f12;
        Ok(g)
    }

    fn cube(&self, th: &Theta) -> [f64; 8] {
        let t = self.t_values[th[0] as usize];
        let pair = [t, (self.a - t).max(0.0), (self.b - t).max(0.0), (1.0 - self.a - self.b + t).max(0.0)];
        let mut v = [0.0; 8];
        for xy in 0..4 {
            let q = self.q_values[xy][th[1 + xy] as usize];
            v[2 * xy] = pair[xy] * (1.0 - q);
            v[2 * xy + 1] = pair[xy] * q;
        }
        v
    }

    fn build_fronts(&self) -> (Vec<FrontPoint>, Vec<FrontPoint>) {
        let lens: Vec<usize> = self.q_values.iter().map(Vec::len).collect();
        let chunks: Vec<(Vec<FrontPoint>, Vec<FrontPoint>)> = (0..self.t_values.len())
            .into_par_iter()
            .map(|ti| {
                let mut pts1 = Vec::new();
                let mut pts12 = Vec::new();
                let mut th: Theta = [ti as u8, 0, 0, 0, 0];
                loop {
                    let v = self.cube(&th);
                    let (d, cmi, multi) = measures(&v, &self.p);
                    if d.is_finite() {
                        pts1.push(FrontPoint { d, info: cmi, theta: th });
                        pts12.push(FrontPoint { d, info: multi, theta: th });
                    }
                    // odometer over the four conditionals
                    let mut k = 4;
                    loop {
                        th[k] += 1;
                        if (th[k] as usize) < lens[k - 1] {
                            break;
                        }
                        th[k] = 0;
                        k -= 1;
                        if k == 0 {
                            break;
                        }
                    }
                    if k == 0 {
                        break;
                    }
                }
                (pareto(pts1), pareto(pts12))
            })
            .collect();
        let (c1, c12): (Vec<_>, Vec<_>) = chunks.into_iter().unzip();
        (pareto(c1.concat()), pareto(c12.concat()))
    }

    fn eval(&self, th1: &Theta, th12: &Theta, c: f64, lr: f64) -> f64 {
        let (d1, i1, _) = measures(&self.cube(th1), &self.p);
        if c == 0.0 {
            return d1 + (i1 - lr).max(0.0);
        }
        let (d12, _, i12) = measures(&self.cube(th12), &self.p);
        d1 + c * d12 + (i1 + c * i12 - lr).max(0.0)
    }

    /// Grid minimum and slack for pattern length `l` at MAC rate `rate`.
    pub fn minimize(&self, l: u32, rate: f64) -> Result<OracleResult> {
        if l == 0 {
            return Err(Error::OutOfRange { what: "pattern length L", value: 0.0 });
        }
        let c = (l as f64 - 1.0) / 2.0;
        let lr = l as f64 * rate;
        let (mut best, mut i1, mut i12) = (f64::INFINITY, 0usize, 0usize);
        if c == 0.0 {
            for (i, p) in self.front1.iter().enumerate() {
                let v = p.d + (p.info - lr).max(0.0);
                if v < best {
                    (best, i1) = (v, i);
                }
            }
        } else {
            let rows: Vec<(f64, usize, usize)> = self
                .front1
                .par_iter()
                .enumerate()
                .map(|(i, p1)| {
                    let mut row = (f64::INFINITY, i, 0);
                    for (j, p12) in self.front12.iter().enumerate() {
                        let v = p1.d + c * p12.d + (p1.info + c * p12.info - lr).max(0.0);
                        if v < row.0 {
                            row = (v, i, j);
                        }
                    }
                    row
                })
                .collect();
            for r in rows {
                if r.0 < best {
                    (best, i1, i12) = r;
                }
            }
        }
        let th1 = self.front1[i1].theta;
        let th12 = self.front12[i12].theta;
        let value = self.eval(&th1, &th12, c, lr);
        let slack = self.slack(&th1, &th12, c, lr, value);
        let like = |v: [f64; 8]| JointDist::from_weights(vec![Axis::X, Axis::Y, Axis::Z], vec![2, 2, 2], v.to_vec());
        Ok(OracleResult { value, slack, arg_v1: like(self.cube(&th1)), arg_v12: like(self.cube(&th12)) })
    }

    /// Sum over free coordinates of the larger rise to a grid neighbour.
    /// For a convex objective whose minimizer lies in the box of one step
    /// around the argmin, each such rise bounds `|partial_i f| * step`.
    fn slack(&self, th1: &Theta, th12: &Theta, c: f64, lr: f64, base: f64) -> f64 {
        let lens: Vec<usize> = std::iter::once(self.t_values.len())
            .chain(self.q_values.iter().map(Vec::len))
            .collect();
        let mut total = 0.0;
        let which = if c == 0.0 { 1 } else { 2 };
        for side in 0..which {
            for coord in 0..5 {
                let mut rise: f64 = 0.0;
                for delta in [-1i32, 1] {
                    let (mut a, mut b) = (*th1, *th12);
                    let th = if side == 0 { &mut a } else { &mut b };
                    let moved = th[coord] as i32 + delta;
                    if moved < 0 || moved as usize >= lens[coord] {
                        continue;
                    }
                    th[coord] = moved as u8;
                    let v = self.eval(&a, &b, c, lr);
                    if v.is_finite() {
                        rise = rise.max(v - base);
                    }
                }
                total += rise.max(0.0);
            }
        }
        total
    }

    pub fn front_sizes(&self) -> (usize, usize) {
        (self.front1.len(), self.front12.len())
    }
}

/// Exhaustive grid minimum of the fixed-`L` objective at step `1/denominator`.
pub fn grid_oracle(params: &AsyncObjectiveParams, denominator: u32) -> Result<OracleResult> {
    OracleGrid::new(params.composed(), denominator)?.minimize(params.l(), params.rate())
}
