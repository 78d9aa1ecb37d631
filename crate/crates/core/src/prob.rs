//! Finite-alphabet probability: distributions, joint distributions over
//! labelled axes, information measures in bits, and method-of-types helpers.
//!
//! All logarithms are base 2. `0 log 0` is taken as `0`, and a divergence
//! term `v log(v/0)` with `v > 0` evaluates to `f64::INFINITY`, which
//! propagates through sums and compares above every finite value.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution at construction.
pub const PROB_TOL: f64 = 1e-12;

/// Names of the dummy random variables that label joint-distribution axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    XHat,
    Y,
    YHat,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "X",
            Axis::XHat => "X^",
            Axis::Y => "Y",
            Axis::YHat => "Y^",
            Axis::Z => "Z",
        };
        f.write_str(s)
    }
}

/// `-sum p log2 p` over a slice of masses.
pub fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(())
}

/// A probability vector over `0..len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    probs: Vec<f64>,
}

impl Dist {
    /// Validates nonnegativity and unit mass; inputs are never renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_probs(&probs)?;
        Ok(Dist { probs })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs a nonempty alphabet");
        Dist { probs: vec![1.0 / len as f64; len] }
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        assert!(at < len);
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Dist { probs }
    }

    /// Binary distribution `(1 - p1, p1)`.
    pub fn binary(p1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(Error::OutOfRange { what: "binary probability", value: p1 });
        }
        Ok(Dist { probs: vec![1.0 - p1, p1] })
    }

    /// Rescales nonnegative weights to unit mass.
    pub(crate) fn from_weights(mut w: Vec<f64>) -> Self {
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Dist { probs: w }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    /// View as a one-axis joint distribution.
    pub fn to_joint(&self, axis: Axis) -> JointDist {
        JointDist {
            axes: vec![axis],
            shape: vec![self.probs.len()],
            probs: self.probs.clone(),
        }
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Dist) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Dist {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// A distribution over a cartesian product of finite alphabets, stored
/// row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(axes: Vec<Axis>, shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        Self::check_layout(&axes, &shape, probs.len())?;
        validate_probs(&probs)?;
        Ok(JointDist { axes, shape, probs })
    }

    fn check_layout(axes: &[Axis], shape: &[usize], len: usize) -> Result<()> {
        if axes.is_empty() || axes.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} axis labels", shape.len()),
                found: format!("{}", axes.len()),
            });
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::InvalidDistribution(format!("axis {a} repeated")));
            }
        }
        let cells: usize = shape.iter().product();
        if cells != len || shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                expected: format!("{cells} cells for shape {shape:?}"),
                found: format!("{len}"),
            });
        }
        Ok(())
    }

    /// Builds a joint distribution from nonnegative weights, rescaling them
    /// to unit mass. Used for solver iterates, whose mass drifts by rounding.
    pub(crate) fn from_weights(axes: Vec<Axis>, shape: Vec<usize>, mut w: Vec<f64>) -> Self {
        debug_assert!(Self::check_layout(&axes, &shape, w.len()).is_ok());
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        JointDist { axes, shape, probs: w }
    }

    /// Product of independent factors, axes in the given order.
    pub fn product(factors: &[(Axis, &Dist)]) -> Result<Self> {
        let axes: Vec<Axis> = factors.iter().map(|(a, _)| *a).collect();
        let shape: Vec<usize> = factors.iter().map(|(_, d)| d.len()).collect();
        let mut probs = vec![1.0];
        for (_, d) in factors {
            probs = probs
                .iter()
                .flat_map(|&p| d.probs().iter().map(move |&q| p * q))
                .collect();
        }
        Self::check_layout(&axes, &shape, probs.len())?;
        Ok(JointDist { axes, shape, probs })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn axis_position(&self, axis: Axis) -> Result<usize> {
        self.axes.iter().position(|&a| a == axis).ok_or(Error::MissingAxis(axis))
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for (slot, &s) in idx.iter_mut().zip(&self.shape).rev() {
            *slot = flat % s;
            flat /= s;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.probs[self.flat_index(idx)]
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    /// Marginal onto `keep`, with axes in the order given.
    pub fn marginal(&self, keep: &[Axis]) -> Result<JointDist> {
        if keep.is_empty() {
            return Err(Error::EmptyAxes);
        }
        let pos: Vec<usize> = keep.iter().map(|&a| self.axis_position(a)).collect::<Result<_>>()?;
        let shape: Vec<usize> = pos.iter().map(|&p| self.shape[p]).collect();
        let cells: usize = shape.iter().product();
        let mut probs = vec![0.0; cells];
        let mut idx = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let target = pos.iter().zip(&shape).fold(0, |acc, (&ax, &s)| acc * s + idx[ax]);
            probs[target] += p;
            // odometer increment, last axis fastest
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self::check_layout(keep, &shape, cells)?;
        Ok(JointDist { axes: keep.to_vec(), shape, probs })
    }

    /// One-axis marginal as a plain `Dist`.
    pub fn marginal_dist(&self, axis: Axis) -> Result<Dist> {
        let m = self.marginal(&[axis])?;
        Ok(Dist { probs: m.probs })
    }

    /// Same distribution with axes reordered to `order`.
    pub fn permuted(&self, order: &[Axis]) -> Result<JointDist> {
        if order.len() != self.axes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.axes),
                found: format!("{order:?}"),
            });
        }
        self.marginal(order)
    }

    /// Same probabilities with axis labels replaced.
    pub fn relabeled(&self, axes: Vec<Axis>) -> Result<JointDist> {
        Self::check_layout(&axes, &self.shape, self.probs.len())?;
        Ok(JointDist { axes, shape: self.shape.clone(), probs: self.probs.clone() })
    }

    pub fn max_abs_diff(&self, other: &JointDist) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Shannon entropy in bits.
pub fn entropy(v: &JointDist) -> f64 {
    v.entropy()
}

/// `D(v || p)` in bits; `+inf` when `v` is not absolutely continuous
/// with respect to `p`.
pub fn kl_divergence(v: &JointDist, p: &JointDist) -> Result<f64> {
    if v.axes != p.axes || v.shape != p.shape {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?} {:?}", p.axes, p.shape),
            found: format!("{:?} {:?}", v.axes, v.shape),
        });
    }
    Ok(kl_of(&v.probs, &p.probs))
}

/// Slice-level KL divergence in bits.
pub fn kl_of(v: &[f64], p: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in v.iter().zip(p) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).log2();
        }
    }
    d.max(0.0)
}

/// `I(a ; b | given) = H(a,given) + H(b,given) - H(a,b,given) - H(given)`.
pub fn cond_mutual_information(v: &JointDist, a: Axis, b: Axis, given: Axis) -> Result<f64> {
    let h_ag = v.marginal(&[a, given])?.entropy();
    let h_bg = v.marginal(&[b, given])?.entropy();
    let h_abg = v.marginal(&[a, b, given])?.entropy();
    let h_g = v.marginal(&[given])?.entropy();
    Ok((h_ag + h_bg - h_abg - h_g).max(0.0))
}

pub fn mutual_information(v: &JointDist, a: Axis, b: Axis) -> Result<f64> {
    let h_a = v.marginal(&[a])?.entropy();
    let h_b = v.marginal(&[b])?.entropy();
    let h_ab = v.marginal(&[a, b])?.entropy();
    Ok((h_a + h_b - h_ab).max(0.0))
}

/// Multi-information over all axes of `v`: sum of marginal entropies minus
/// the joint entropy. Equals mutual information for two axes.
pub fn multi_information(v: &JointDist) -> f64 {
    let marginals: f64 = v
        .axes
        .iter()
        .map(|&a| v.marginal(&[a]).map(|m| m.entropy()).unwrap_or(0.0))
        .sum();
    (marginals - v.entropy()).max(0.0)
}

/// Empirical (joint) type of a sequence: integer counts per cell plus the
/// sequence length.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeVector {
    shape: Vec<usize>,
    counts: Vec<u32>,
    denominator: u32,
}

impl TypeVector {
    pub fn new(shape: Vec<usize>, counts: Vec<u32>) -> Result<Self> {
        let cells: usize = shape.iter().product();
        if cells != counts.len() || shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                expected: format!("{cells} cells for shape {shape:?}"),
                found: format!("{}", counts.len()),
            });
        }
        let denominator: u32 = counts.iter().sum();
        if denominator == 0 {
            return Err(Error::InvalidDistribution("type with zero denominator".into()));
        }
        Ok(TypeVector { shape, counts, denominator })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn fractions(&self) -> Vec<f64> {
        let n = self.denominator as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn to_dist(&self) -> Dist {
        Dist { probs: self.fractions() }
    }

    pub fn to_joint(&self, axes: Vec<Axis>) -> Result<JointDist> {
        JointDist::check_layout(&axes, &self.shape, self.counts.len())?;
        Ok(JointDist { axes, shape: self.shape.clone(), probs: self.fractions() })
    }

    /// Number of sequences in the type class (multinomial coefficient).
    pub fn class_size(&self) -> u128 {
        let mut size: u128 = 1;
        let mut placed: u128 = 0;
        for &c in &self.counts {
            for j in 1..=c as u128 {
                placed += 1;
                size = size * placed / j;
            }
        }
        size
    }
}

/// Type of a sequence over `0..alphabet`.
pub fn type_of(seq: &[usize], alphabet: usize) -> Result<TypeVector> {
    joint_type_of(&[seq], &[alphabet])
}

/// Joint type of equally long sequences; `shape[i]` is the alphabet of `seqs[i]`.
pub fn joint_type_of(seqs: &[&[usize]], shape: &[usize]) -> Result<TypeVector> {
    if seqs.is_empty() || seqs.len() != shape.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} sequences", shape.len()),
            found: format!("{}", seqs.len()),
        });
    }
    let n = seqs[0].len();
    if n == 0 || seqs.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidMessages("sequences must be nonempty and equally long".into()));
    }
    let cells: usize = shape.iter().product();
    let mut counts = vec![0u32; cells];
    for t in 0..n {
        let mut flat = 0;
        for (s, &size) in seqs.iter().zip(shape) {
            let sym = s[t];
            if sym >= size {
                return Err(Error::OutOfRange { what: "symbol", value: sym as f64 });
            }
            flat = flat * size + sym;
        }
        counts[flat] += 1;
    }
    TypeVector::new(shape.to_vec(), counts)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Number of types with denominator `n` over `cells` cells (stars and bars).
pub fn type_count(n: u32, cells: usize) -> u128 {
    binomial(n as u128 + cells as u128 - 1, cells as u128 - 1)
}

/// Every type with denominator `n` over the product alphabet `shape`,
/// in lexicographic order of the count vector (descending first cell).
pub fn enumerate_types(n: u32, shape: &[usize], cap: u128) -> Result<Vec<TypeVector>> {
    let cells: usize = shape.iter().product();
    if n == 0 || cells == 0 {
        return Err(Error::OutOfRange { what: "type denominator", value: n as f64 });
    }
    let required = type_count(n, cells);
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    let mut out = Vec::with_capacity(required as usize);
    let mut counts = vec![0u32; cells];
    fill_compositions(&mut counts, 0, n, &mut |c| {
        out.push(TypeVector { shape: shape.to_vec(), counts: c.to_vec(), denominator: n });
    });
    Ok(out)
}

fn fill_compositions(counts: &mut [u32], pos: usize, remaining: u32, emit: &mut impl FnMut(&[u32])) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for c in (0..=remaining).rev() {
        counts[pos] = c;
        fill_compositions(counts, pos + 1, remaining - c, emit);
    }
}

/// Every member of the type class of `t` as flat cell indices, in
/// lexicographic order.
pub fn type_class(t: &TypeVector, cap: u128) -> Result<Vec<Vec<usize>>> {
    let required = t.class_size();
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    fn fill(left: &mut [u32], seq: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, len: usize) {
        if seq.len() == len {
            out.push(seq.clone());
            return;
        }
        for cell in 0..left.len() {
            if left[cell] > 0 {
                left[cell] -= 1;
                seq.push(cell);
                fill(left, seq, out, len);
                seq.pop();
                left[cell] += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(required as usize);
    let mut left = t.counts.clone();
    fill(&mut left, &mut Vec::new(), &mut out, t.denominator as usize);
    Ok(out)
}

/// A uniformly random member of the type class of `t`, as flat cell indices.
pub fn sample_type_class<R: Rng + ?Sized>(t: &TypeVector, rng: &mut R) -> Vec<usize> {
    let mut seq: Vec<usize> = t
        .counts
        .iter()
        .enumerate()
        .flat_map(|(cell, &c)| std::iter::repeat_n(cell, c as usize))
        .collect();
    seq.shuffle(rng);
    seq
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn xyz(probs: Vec<f64>) -> JointDist {
        JointDist::new(vec![Axis::X, Axis::Y, Axis::Z], vec![2, 2, 2], probs).unwrap()
    }

    #[test]
    fn entropy_basics() {
        assert_abs_diff_eq!(Dist::uniform(2).entropy(), 1.0, epsilon = 1e-15);
        assert_eq!(Dist::point_mass(3, 1).entropy(), 0.0);
        let d = Dist::binary(0.899).unwrap();
        let direct = -(0.101f64 * 0.101f64.log2()) - 0.899 * 0.899f64.log2();
        assert_abs_diff_eq!(d.entropy(), direct, epsilon = 1e-15);
    }

    #[test]
    fn construction_rejects_unnormalized() {
        assert!(Dist::new(vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(Dist::new(vec![1.1, -0.1]).is_err());
        assert!(Dist::new(vec![]).is_err());
        assert!(JointDist::new(vec![Axis::X], vec![3], vec![0.5, 0.5]).is_err());
        assert!(JointDist::new(vec![Axis::X, Axis::X], vec![1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn kl_cases() {
        let p = Dist::binary(0.899).unwrap().to_joint(Axis::X);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let u = Dist::uniform(2).to_joint(Axis::X);
        let expected = 0.5 * (0.5f64 / 0.101).log2() + 0.5 * (0.5f64 / 0.899).log2();
        assert_abs_diff_eq!(kl_divergence(&u, &p).unwrap(), expected, epsilon = 1e-15);
        let pm = Dist::point_mass(2, 0).to_joint(Axis::X);
        assert_eq!(kl_divergence(&u, &pm).unwrap(), f64::INFINITY);
        let other = Dist::uniform(2).to_joint(Axis::Y);
        assert!(matches!(kl_divergence(&u, &other), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn cmi_cases() {
        let b = Dist::binary(0.3).unwrap();
        let indep = JointDist::product(&[(Axis::X, &b), (Axis::Y, &b), (Axis::Z, &b)]).unwrap();
        assert_abs_diff_eq!(
            cond_mutual_information(&indep, Axis::X, Axis::Z, Axis::Y).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        // Z copies X, Y independent of both
        let mut probs = vec![0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                probs[x * 4 + y * 2 + x] = b[x] * 0.5;
            }
        }
        let copy = xyz(probs);
        assert_abs_diff_eq!(
            cond_mutual_information(&copy, Axis::X, Axis::Z, Axis::Y).unwrap(),
            b.entropy(),
            epsilon = 1e-14
        );
        let xy = JointDist::product(&[(Axis::X, &b), (Axis::Y, &b)]).unwrap();
        assert!(matches!(
            cond_mutual_information(&xy, Axis::X, Axis::Z, Axis::Y),
            Err(Error::MissingAxis(Axis::Z))
        ));
    }

    #[test]
    fn multi_information_cases() {
        let b = Dist::binary(0.2).unwrap();
        let indep = JointDist::product(&[(Axis::X, &b), (Axis::Y, &b), (Axis::Z, &b)]).unwrap();
        assert_abs_diff_eq!(multi_information(&indep), 0.0, epsilon = 1e-14);
        let mut probs = vec![0.0; 8];
        probs[0] = 0.5;
        probs[7] = 0.5;
        assert_abs_diff_eq!(multi_information(&xyz(probs)), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn marginal_cases() {
        let a = Dist::binary(0.3).unwrap();
        let b = Dist::new(vec![0.2, 0.5, 0.3]).unwrap();
        let ab = JointDist::product(&[(Axis::X, &a), (Axis::Y, &b)]).unwrap();
        assert!(ab.marginal_dist(Axis::Y).unwrap().max_abs_diff(&b) < 1e-15);
        assert!(ab.marginal_dist(Axis::X).unwrap().max_abs_diff(&a) < 1e-15);
        assert_eq!(ab.marginal(&[Axis::X, Axis::Y]).unwrap(), ab);
        assert_eq!(ab.marginal(&[]), Err(Error::EmptyAxes));
        let swapped = ab.permuted(&[Axis::Y, Axis::X]).unwrap();
        assert_eq!(swapped.shape(), &[3, 2]);
        assert_abs_diff_eq!(swapped.get(&[1, 1]), ab.get(&[1, 1]), epsilon = 0.0);
    }

    #[test]
    fn type_of_cases() {
        let t = type_of(&[0, 1, 0, 1], 2).unwrap();
        assert_eq!(t.counts(), &[2, 2]);
        assert_eq!(t.denominator(), 4);
        assert_eq!(type_of(&[1, 1, 1], 3).unwrap().counts(), &[0, 3, 0]);
        // x = 0011, y = 0101: pairs 00, 01, 10, 11 once each
        let j = joint_type_of(&[&[0, 0, 1, 1], &[0, 1, 0, 1]], &[2, 2]).unwrap();
        assert_eq!(j.counts(), &[1, 1, 1, 1]);
        let j = joint_type_of(&[&[0, 0, 0, 1], &[0, 0, 1, 1]], &[2, 2]).unwrap();
        assert_eq!(j.counts(), &[2, 1, 0, 1]);
        let jd = j.to_joint(vec![Axis::X, Axis::Y]).unwrap();
        assert_eq!(jd.marginal_dist(Axis::X).unwrap().probs(), &[0.75, 0.25]);
        assert_eq!(jd.marginal_dist(Axis::Y).unwrap().probs(), &[0.5, 0.5]);
        assert!(type_of(&[0, 2], 2).is_err());
        assert!(type_of(&[], 2).is_err());
    }

    #[test]
    fn enumerate_types_cases() {
        let ts = enumerate_types(2, &[2], 100).unwrap();
        let counts: Vec<_> = ts.iter().map(|t| t.counts().to_vec()).collect();
        assert_eq!(counts, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_types(4, &[2, 2], 1000).unwrap().len(), 35);
        assert!(matches!(
            enumerate_types(8, &[4, 4], 10),
            Err(Error::EnumerationCap { required: 490314, cap: 10 })
        ));
    }

    #[test]
    fn enumerate_matches_stars_and_bars() {
        for n in 1..=8u32 {
            for cells in 1..=16usize {
                let ts = enumerate_types(n, &[cells], u128::MAX).unwrap();
                assert_eq!(ts.len() as u128, type_count(n, cells));
                let distinct: std::collections::HashSet<_> = ts.iter().collect();
                assert_eq!(distinct.len(), ts.len());
                assert!(ts.iter().all(|t| t.denominator() == n));
            }
        }
    }

    #[test]
    fn class_size_is_multinomial() {
        assert_eq!(TypeVector::new(vec![2], vec![2, 2]).unwrap().class_size(), 6);
        assert_eq!(TypeVector::new(vec![3], vec![1, 2, 3]).unwrap().class_size(), 60);
    }

    #[test]
    fn sample_point_mass_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = TypeVector::new(vec![3], vec![0, 0, 5]).unwrap();
        assert_eq!(sample_type_class(&t, &mut rng), vec![2; 5]);
    }

    #[test]
    fn sample_type_class_is_uniform_over_six_arrangements() {
        let all: Vec<Vec<usize>> = (0..16usize)
            .map(|m| (0..4).map(|b| (m >> (3 - b)) & 1).collect::<Vec<_>>())
            .filter(|s| s.iter().sum::<usize>() == 2)
            .collect();
        assert_eq!(all.len(), 6);
        let t = TypeVector::new(vec![2], vec![2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 60_000;
        let mut hits = vec![0u32; 6];
        for _ in 0..draws {
            let s = sample_type_class(&t, &mut rng);
            assert_eq!(type_of(&s, 2).unwrap(), t);
            hits[all.iter().position(|a| *a == s).unwrap()] += 1;
        }
        let expected = draws as f64 / 6.0;
        let sigma = (expected * (5.0 / 6.0)).sqrt();
        for h in hits {
            assert!((h as f64 - expected).abs() < 5.0 * sigma, "count {h}");
        }
    }

    #[test]
    fn type_class_listing() {
        let t = TypeVector::new(vec![3], vec![2, 1, 1]).unwrap();
        let all = type_class(&t, 1000).unwrap();
        assert_eq!(all.len() as u128, t.class_size());
        assert_eq!(all[0], vec![0, 0, 1, 2]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|s| type_of(s, 3).unwrap() == t));
        assert!(type_class(&t, 11).is_err());
    }
}
