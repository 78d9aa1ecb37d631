//! Entropic mirror descent over joint distributions on `X x Y x Z` with
//! both input marginals pinned, for objectives `D(V||P) + lambda * info(V)`.
//!
//! Each multiplicative step is followed by iterative proportional fitting,
//! which is the KL projection onto the marginal constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::JointDist;

/// Solver budget and tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once one accepted step improves the objective by less than this.
    pub tol: f64,
    /// Lower bound on support cells during the main descent.
    pub floor: f64,
    /// Bisection tolerance on the Lagrange multiplier of the clipped branch.
    pub lambda_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 32,
            max_iter: 5000,
            tol: 1e-14,
            floor: 1e-12,
            lambda_tol: 1e-10,
            seed: 0x5eed_a5c0,
        }
    }
}

/// Which information term accompanies the divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Info {
    /// `I(X ; Z | Y)`
    CondXzGivenY,
    /// `I(X ^ Y ^ Z) = H(X) + H(Y) + H(Z) - H(X,Y,Z)`
    Multi,
}

/// `P` over `[X, Y, Z]` with its support and the pinned input marginals.
#[derive(Clone, Debug)]
pub(crate) struct Problem {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub p: Vec<f64>,
    pub support: Vec<bool>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub v: Vec<f64>,
    pub value: f64,
    pub residual: f64,
}

fn xlog2x_sum(it: impl Iterator<Item = f64>) -> f64 {
    it.filter(|&p| p > 0.0).map(|p| p * p.log2()).sum()
}

impl Problem {
    pub fn new(composed: &JointDist) -> Result<Self> {
        let shape = composed.shape();
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch { expected: "axes X, Y, Z".into(), found: format!("{:?}", composed.axes()) });
        }
        let (nx, ny, nz) = (shape[0], shape[1], shape[2]);
        let p = composed.probs().to_vec();
        let support = p.iter().map(|&x| x > 0.0).collect();
        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let q = p[(x * ny + y) * nz + z];
                    px[x] += q;
                    py[y] += q;
                }
            }
        }
        Ok(Problem { nx, ny, nz, p, support, px, py })
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.ny + y) * self.nz + z
    }

    pub fn divergence(&self, v: &[f64]) -> f64 {
        crate::prob::kl_of(v, &self.p)
    }

    fn marg_xy(&self, v: &[f64]) -> Vec<f64> {
        v.chunks(self.nz).map(|c| c.iter().sum()).collect()
    }

    fn marg_yz(&self, v: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.ny * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    m[y * self.nz + z] += v[self.idx(x, y, z)];
                }
            }
        }
        m
    }

    fn marg_x(&self, v: &[f64]) -> Vec<f64> {
        v.chunks(self.ny * self.nz).map(|c| c.iter().sum()).collect()
    }

    fn marg_y(&self, v: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.ny];
        for (i, &q) in v.iter().enumerate() {
            m[(i / self.nz) % self.ny] += q;
        }
        m
    }

    fn marg_z(&self, v: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.nz];
        for (i, &q) in v.iter().enumerate() {
            m[i % self.nz] += q;
        }
        m
    }

    pub fn info(&self, v: &[f64], kind: Info) -> f64 {
        let neg_h = |m: &[f64]| xlog2x_sum(m.iter().copied());
        let val = match kind {
            // H(XY) + H(YZ) - H(XYZ) - H(Y)
            Info::CondXzGivenY => {
                -neg_h(&self.marg_xy(v)) - neg_h(&self.marg_yz(v)) + neg_h(v) + neg_h(&self.marg_y(v))
            }
            Info::Multi => {
                -neg_h(&self.marg_x(v)) - neg_h(&self.marg_y(v)) - neg_h(&self.marg_z(v)) + neg_h(v)
            }
        };
        val.max(0.0)
    }

    fn penalized(&self, v: &[f64], kind: Info, lambda: f64) -> f64 {
        let d = self.divergence(v);
        if lambda == 0.0 {
            d
        } else {
            d + lambda * self.info(v, kind)
        }
    }

    /// Gradient up to per-cell-constant shifts, which the projection absorbs.
    fn gradient(&self, v: &[f64], kind: Info, lambda: f64, out: &mut [f64]) {
        let lg = |q: f64| if q > 0.0 { q.log2() } else { -1100.0 };
        let (a, b) = match kind {
            Info::CondXzGivenY => (self.marg_xy(v), self.marg_yz(v)),
            Info::Multi => (self.marg_z(v), Vec::new()),
        };
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    let i = self.idx(x, y, z);
                    if !self.support[i] {
                        out[i] = 0.0;
                        continue;
                    }
                    let div = lg(v[i]) - self.p[i].log2();
                    let info = match kind {
                        // marginal terms in x alone or y alone are constant on the constraint set
                        Info::CondXzGivenY => lg(v[i]) - lg(a[x * self.ny + y]) - lg(b[y * self.nz + z]),
                        Info::Multi => lg(v[i]) - lg(a[z]),
                    };
                    out[i] = div + lambda * info;
                }
            }
        }
    }

    /// Iterative proportional fitting onto the pinned marginals; returns the
    /// largest remaining marginal deviation.
    pub fn project(&self, v: &mut [f64]) -> f64 {
        let block = self.ny * self.nz;
        for _ in 0..500 {
            let mx = self.marg_x(v);
            for x in 0..self.nx {
                let s = if mx[x] > 0.0 { self.px[x] / mx[x] } else { 0.0 };
                v[x * block..(x + 1) * block].iter_mut().for_each(|q| *q *= s);
            }
            let my = self.marg_y(v);
            for (i, q) in v.iter_mut().enumerate() {
                let y = (i / self.nz) % self.ny;
                *q *= if my[y] > 0.0 { self.py[y] / my[y] } else { 0.0 };
            }
            if self.residual(v) < 1e-15 {
                break;
            }
        }
        self.residual(v)
    }

    pub fn residual(&self, v: &[f64]) -> f64 {
        let rx = self.marg_x(v).iter().zip(&self.px).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ry = self.marg_y(v).iter().zip(&self.py).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rx.max(ry)
    }

    /// Runs mirror descent from `v` in place. Returns whether the stopping
    /// rule fired before the iteration budget ran out.
    fn descend(&self, v: &mut Vec<f64>, kind: Info, lambda: f64, floor: f64, max_iter: usize, tol: f64) -> bool {
        let mut grad = vec![0.0; v.len()];
        let mut cand = vec![0.0; v.len()];
        let mut cur = self.penalized(v, kind, lambda);
        let mut eta: f64 = 1.0;
        for _ in 0..max_iter {
            self.gradient(v, kind, lambda, &mut grad);
            let gmean: f64 = grad.iter().zip(v.iter()).map(|(g, q)| g * q).sum();
            let mut accepted = None;
            while eta > 1e-14 {
                for i in 0..v.len() {
                    cand[i] = if self.support[i] {
                        let step = (-eta * (grad[i] - gmean)).clamp(-1000.0, 1000.0);
                        (v[i] * step.exp2()).max(floor)
                    } else {
                        0.0
                    };
                }
                let total: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|q| *q /= total);
                self.project(&mut cand);
                let cv = self.penalized(&cand, kind, lambda);
                if cv < cur {
                    accepted = Some(cv);
                    break;
                }
                eta *= 0.5;
            }
            match accepted {
                None => return true,
                Some(cv) => {
                    std::mem::swap(v, &mut cand);
                    let gain = cur - cv;
                    cur = cv;
                    eta = (eta * 2.0).min(64.0);
                    if gain < tol {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn start(&self, restart: usize, seed: u64, salt: u64) -> Vec<f64> {
        let mut v = self.p.clone();
        if restart > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ salt.wrapping_mul(0xA24B_AED4_963E_E407) ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            for (q, &s) in v.iter_mut().zip(&self.support) {
                if s {
                    *q *= (6.0 * (rng.gen::<f64>() - 0.5)).exp();
                }
            }
            let t: f64 = v.iter().sum();
            v.iter_mut().for_each(|q| *q /= t);
        }
        self.project(&mut v);
        v
    }

    /// Minimizes `D(V||P) + lambda * info(V)` over the constraint set.
    pub fn minimize(&self, kind: Info, lambda: f64, cfg: &SolverConfig) -> Result<Solution> {
        if lambda == 0.0 {
            let mut v = self.p.clone();
            let residual = self.project(&mut v);
            return Ok(Solution { value: self.penalized(&v, kind, 0.0), v, residual });
        }
        let salt = match kind {
            Info::CondXzGivenY => 1,
            Info::Multi => 2,
        };
        let mut best: Option<Solution> = None;
        let mut any_converged = false;
        for restart in 0..cfg.restarts.max(1) {
            let mut v = self.start(restart, cfg.seed, salt);
            let converged = self.descend(&mut v, kind, lambda, cfg.floor, cfg.max_iter, cfg.tol);
            self.descend(&mut v, kind, lambda, 0.0, cfg.max_iter / 10, cfg.tol);
            let value = self.penalized(&v, kind, lambda);
            let residual = self.residual(&v);
            any_converged |= converged;
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Solution { v, value, residual });
            }
        }
        let sol = best.expect("at least one restart");
        if !any_converged {
            return Err(Error::NotConverged { best: sol.value, residual: sol.residual });
        }
        Ok(sol)
    }

    pub fn to_joint(&self, v: &[f64], like: &JointDist) -> JointDist {
        JointDist::from_weights(like.axes().to_vec(), like.shape().to_vec(), v.to_vec())
    }
}
