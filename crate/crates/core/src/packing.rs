//! Error patterns over the `2K` subblocks of a frame and a statistical
//! check of the packing bound for a shared codebook.
//!
//! Subblock `s` (1-based) is covered by the stream-1 word `ceil(s/2)` and by
//! the shifted stream-2 word `floor(s/2)` (word `K` for `s = 1`). Equivalently,
//! with interleaved messages `m`, subblock `s` is covered by `m_s` and
//! `m_{s-1}` (`m_0 = m_{2K}`).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{joint_type_of, multi_information, mutual_information, type_class, Axis, TypeVector};
use crate::trellis::{generate_codebook, Codebook, FrameLayout};

/// Pairwise disjoint subblock sets; indices are 1-based in `[2K]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ErrorPattern {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub s12: Vec<usize>,
}

impl ErrorPattern {
    pub fn new(mut s1: Vec<usize>, mut s2: Vec<usize>, mut s12: Vec<usize>, subblocks: usize) -> Result<Self> {
        for s in [&mut s1, &mut s2, &mut s12] {
            s.sort_unstable();
            s.dedup();
        }
        let mut all: Vec<usize> = s1.iter().chain(&s2).chain(&s12).copied().collect();
        if all.iter().any(|&s| s == 0 || s > subblocks) {
            return Err(Error::InvalidMessages(format!("subblock index outside 1..={subblocks}")));
        }
        let len = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != len {
            return Err(Error::InvalidMessages("pattern sets overlap".into()));
        }
        Ok(ErrorPattern { s1, s2, s12 })
    }

    pub fn empty() -> Self {
        ErrorPattern { s1: Vec::new(), s2: Vec::new(), s12: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty() && self.s2.is_empty() && self.s12.is_empty()
    }

    /// `S = S1 u S2 u S12`, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.s1.iter().chain(&self.s2).chain(&self.s12).copied().collect();
        s.sort_unstable();
        s
    }
}

/// Which sender errs in a single-user subblock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum User {
    First,
    Second,
}

/// Irreducible patterns of one run length: `L` consecutive interleaved
/// messages in error give a run of `L + 1` subblocks whose two ends are
/// single-user and whose interior is two-user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrreducibleClass {
    pub l: usize,
    pub run_len: usize,
    /// Every position of the run inside `[2K]`.
    pub patterns: Vec<ErrorPattern>,
    /// Positions whose run avoids both synch messages.
    pub realizable: usize,
    /// Distinct `(first, last)` single-user assignments among the positions.
    pub shapes: Vec<(User, User)>,
}

fn user_of_message(s: usize) -> User {
    if s % 2 == 1 {
        User::First
    } else {
        User::Second
    }
}

/// Irreducible patterns for `L in [K]`, grouped by run length.
pub fn enumerate_irreducible(slots: usize) -> Result<Vec<IrreducibleClass>> {
    let layout = FrameLayout::new(2, slots)?;
    let steps = layout.steps();
    let mut out = Vec::new();
    for l in 1..=slots {
        let mut patterns = Vec::new();
        let mut shapes = Vec::new();
        let mut realizable = 0;
        // messages a..a+l-1 differ; subblocks a..a+l
        for a in 1..=steps - l {
            let last = a + l - 1;
            let (first_user, last_user) = (user_of_message(a), user_of_message(last));
            let mut s1 = Vec::new();
            let mut s2 = Vec::new();
            for (s, u) in [(a, first_user), (last + 1, last_user)] {
                match u {
                    User::First => s1.push(s),
                    User::Second => s2.push(s),
                }
            }
            let s12 = (a + 1..=last).collect();
            patterns.push(ErrorPattern::new(s1, s2, s12, steps)?);
            if !(a..=last).any(|m| layout.is_synch_step(m)) {
                realizable += 1;
            }
            if !shapes.contains(&(first_user, last_user)) {
                shapes.push((first_user, last_user));
            }
        }
        out.push(IrreducibleClass { l, run_len: l + 1, patterns, realizable, shapes });
    }
    Ok(out)
}

fn check_vector(v: &[usize], synch: usize, stream: u8, layout: &FrameLayout) -> Result<()> {
    if v.len() != layout.slots() {
        return Err(Error::InvalidMessages(format!("stream {stream}: {} indices for {} slots", v.len(), layout.slots())));
    }
    for (t, &m) in v.iter().enumerate() {
        if (t + 1 == synch) != (m == 0) {
            return Err(Error::SynchSlot { stream, slot: t + 1 });
        }
    }
    Ok(())
}

/// 1-based stream-1 and stream-2 words covering subblock `s`.
fn covering_words(s: usize, slots: usize) -> (usize, usize) {
    let w2 = if s == 1 { slots } else { s / 2 };
    (s.div_ceil(2), w2)
}

/// Pattern of a (true, decoded) message tuple. Synch slots must hold 0 and
/// every other slot a nonzero index.
pub fn classify_tuple(i: &[usize], i_hat: &[usize], j: &[usize], j_hat: &[usize], layout: &FrameLayout) -> Result<ErrorPattern> {
    for v in [i, i_hat] {
        check_vector(v, layout.synch_slot_1(), 1, layout)?;
    }
    for v in [j, j_hat] {
        check_vector(v, layout.synch_slot_2(), 2, layout)?;
    }
    let mut p = ErrorPattern::empty();
    for s in 1..=layout.steps() {
        let (t1, t2) = covering_words(s, layout.slots());
        let d1 = i[t1 - 1] != i_hat[t1 - 1];
        let d2 = j[t2 - 1] != j_hat[t2 - 1];
        match (d1, d2) {
            (true, false) => p.s1.push(s),
            (false, true) => p.s2.push(s),
            (true, true) => p.s12.push(s),
            (false, false) => {}
        }
    }
    Ok(p)
}

/// Joint types over `[X, XHat, Y, YHat]`, one per subblock.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeSequence(pub Vec<TypeVector>);

pub const TYPE_AXES: [Axis; 4] = [Axis::X, Axis::XHat, Axis::Y, Axis::YHat];

impl TypeSequence {
    pub fn new(types: Vec<TypeVector>, k: u32) -> Result<Self> {
        for t in &types {
            if t.denominator() != k || t.shape().len() != 4 {
                return Err(Error::ShapeMismatch {
                    expected: format!("4-axis type with denominator {k}"),
                    found: format!("shape {:?}, denominator {}", t.shape(), t.denominator()),
                });
            }
        }
        Ok(TypeSequence(types))
    }
}

/// `half(word, s)`: the `k` symbols a word contributes to subblock `s`.
fn stream_halves<'a>(cb: &'a Codebook, i: &[usize], j: &[usize], s: usize, slots: usize) -> (&'a [usize], &'a [usize]) {
    let (t1, t2) = covering_words(s, slots);
    let x = if s % 2 == 1 { cb.first_half(i[t1 - 1]) } else { cb.last_half(i[t1 - 1]) };
    let y = if s % 2 == 0 { cb.first_half(j[t2 - 1]) } else { cb.last_half(j[t2 - 1]) };
    (x, y)
}

/// Per-subblock joint types of `(x(i), x(i_hat), y(j), y(j_hat))` with a
/// shared codebook.
pub fn type_sequence(cb: &Codebook, i: &[usize], i_hat: &[usize], j: &[usize], j_hat: &[usize], layout: &FrameLayout) -> Result<TypeSequence> {
    let a = cb.alphabet();
    let types = (1..=layout.steps())
        .map(|s| {
            let (x, y) = stream_halves(cb, i, j, s, layout.slots());
            let (xh, yh) = stream_halves(cb, i_hat, j_hat, s, layout.slots());
            joint_type_of(&[x, xh, y, yh], &[a, a, a, a])
        })
        .collect::<Result<_>>()?;
    Ok(TypeSequence(types))
}

/// `log2` of the right-hand side of the packing bound with
/// `p_n = (n + 1)^slack_exp`.
pub fn rhs_log2(pattern: &ErrorPattern, types: &TypeSequence, r1: f64, r2: f64, k: usize, slots: usize, slack_exp: u32) -> Result<f64> {
    if types.0.len() != 2 * slots {
        return Err(Error::ShapeMismatch { expected: format!("{} subblock types", 2 * slots), found: format!("{}", types.0.len()) });
    }
    let n = 2 * k;
    let kf = k as f64;
    let mut e = slack_exp as f64 * ((n + 1) as f64).log2() + (n * (slots - 1)) as f64 * (r1 + r2);
    for (idx, t) in types.0.iter().enumerate() {
        let s = idx + 1;
        let v = t.to_joint(TYPE_AXES.to_vec())?;
        let multi = |axes: &[Axis]| -> Result<f64> { Ok(multi_information(&v.marginal(axes)?)) };
        if pattern.s1.contains(&s) {
            e -= kf * (multi(&[Axis::XHat, Axis::X, Axis::Y])? - r1);
        } else if pattern.s2.contains(&s) {
            e -= kf * (multi(&[Axis::YHat, Axis::X, Axis::Y])? - r2);
        } else if pattern.s12.contains(&s) {
            e -= kf * (multi(&[Axis::XHat, Axis::YHat, Axis::X, Axis::Y])? - r1 - r2);
        } else {
            e -= kf * mutual_information(&v, Axis::X, Axis::Y)?;
        }
    }
    Ok(e)
}

/// Right-hand side of the packing bound (`2^rhs_log2`).
pub fn rhs_bound(pattern: &ErrorPattern, types: &TypeSequence, r1: f64, r2: f64, k: usize, slots: usize, slack_exp: u32) -> Result<f64> {
    Ok(rhs_log2(pattern, types, r1, r2, k, slots, slack_exp)?.exp2())
}

/// All message vectors of one stream (synch slot 0, others in `1..=m`),
/// in lexicographic order.
fn stream_vectors(slots: usize, synch: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for t in 1..=slots {
        let choices: Vec<usize> = if t == synch { vec![0] } else { (1..=m).collect() };
        out = out
            .into_iter()
            .flat_map(|v| {
                choices.iter().map(move |&c| {
                    let mut w = v.clone();
                    w.push(c);
                    w
                })
            })
            .collect();
    }
    out
}

/// Number of `(i, i_hat, j, j_hat)` tuples, `M^{4(K-1)}`.
pub fn tuple_count(messages: usize, slots: usize) -> u128 {
    (messages as u128).saturating_pow(4 * (slots as u32 - 1))
}

fn check_cap(cb: &Codebook, layout: &FrameLayout, cap: u128) -> Result<()> {
    if cb.n() != layout.n() {
        return Err(Error::InvalidLayout(format!("codeword length {} differs from n = {}", cb.n(), layout.n())));
    }
    let required = tuple_count(cb.messages(), layout.slots());
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    Ok(())
}

/// Visits every tuple with its pattern.
fn for_each_tuple(cb: &Codebook, layout: &FrameLayout, mut f: impl FnMut(&[usize], &[usize], &[usize], &[usize], ErrorPattern) -> Result<()>) -> Result<()> {
    let v1 = stream_vectors(layout.slots(), layout.synch_slot_1(), cb.messages());
    let v2 = stream_vectors(layout.slots(), layout.synch_slot_2(), cb.messages());
    for i in &v1 {
        for i_hat in &v1 {
            for j in &v2 {
                for j_hat in &v2 {
                    let p = classify_tuple(i, i_hat, j, j_hat, layout)?;
                    f(i, i_hat, j, j_hat, p)?;
                }
            }
        }
    }
    Ok(())
}

/// Default enumeration cap for [`count_lhs`] and [`verify_lemma`].
pub const DEFAULT_CAP: u128 = 1 << 24;

/// Number of tuples in the class of `pattern` whose subblock joint types are
/// exactly `types`, with the shared codebook `cb` on both streams.
pub fn count_lhs(cb: &Codebook, pattern: &ErrorPattern, types: &TypeSequence, layout: &FrameLayout, cap: u128) -> Result<u64> {
    check_cap(cb, layout, cap)?;
    let mut count = 0;
    for_each_tuple(cb, layout, |i, ih, j, jh, p| {
        if &p == pattern && &type_sequence(cb, i, ih, j, jh, layout)? == types {
            count += 1;
        }
        Ok(())
    })?;
    Ok(count)
}

/// Whether a stream-1 and a stream-2 word sharing a subblock carry the same
/// codeword (the shared codebook overlapping with itself).
fn self_overlap(i: &[usize], i_hat: &[usize], j: &[usize], j_hat: &[usize], layout: &FrameLayout) -> bool {
    (1..=layout.steps()).any(|s| {
        let (t1, t2) = covering_words(s, layout.slots());
        let a = [i[t1 - 1], i_hat[t1 - 1]];
        let b = [j[t2 - 1], j_hat[t2 - 1]];
        a.iter().any(|x| b.contains(x))
    })
}

/// All nonempty `(pattern, type sequence)` cells of one codebook.
pub fn tabulate_cells(cb: &Codebook, layout: &FrameLayout, cap: u128) -> Result<BTreeMap<(ErrorPattern, TypeSequence), (u64, bool)>> {
    check_cap(cb, layout, cap)?;
    let mut cells: BTreeMap<(ErrorPattern, TypeSequence), (u64, bool)> = BTreeMap::new();
    for_each_tuple(cb, layout, |i, ih, j, jh, p| {
        let ts = type_sequence(cb, i, ih, j, jh, layout)?;
        let e = cells.entry((p, ts)).or_default();
        e.0 += 1;
        e.1 |= self_overlap(i, ih, j, jh, layout);
        Ok(())
    })?;
    Ok(cells)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaConfig {
    pub k: usize,
    pub slots: usize,
    pub messages: usize,
    /// One-dimensional type with denominator `k`.
    pub comp: TypeVector,
    pub trials: usize,
    pub slack_exp: u32,
    pub seed: u64,
    pub cap: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCell {
    pub pattern: ErrorPattern,
    /// Count vectors of the subblock types over `[X, XHat, Y, YHat]`.
    pub types: Vec<Vec<u32>>,
    pub mean_lhs: f64,
    pub max_lhs: u64,
    pub rhs: f64,
    pub rhs_log2: f64,
    /// Fraction of sampled codebooks with `lhs <= rhs`.
    pub trial_pass_fraction: f64,
    pub mean_ok: bool,
    /// Some contributing tuple has a codeword overlapping itself across streams.
    pub self_overlap: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub ensemble: Ensemble,
    pub k: usize,
    pub n: usize,
    pub slots: usize,
    pub messages: usize,
    /// Codebooks evaluated.
    pub trials: u64,
    pub slack_exp: u32,
    /// `log2(M) / n`, used for both `R1` and `R2`.
    pub rate: f64,
    pub delta_n: f64,
    pub type_entropy: f64,
    pub warnings: Vec<String>,
    pub cells: Vec<LemmaCell>,
    /// Fraction of cells whose sample-mean count is within the bound.
    pub mean_pass_fraction: f64,
    /// Fraction of (cell, codebook) pairs within the bound.
    pub trial_pass_fraction: f64,
    pub self_overlap_cells: usize,
    /// Cells whose bound is below one occurrence per evaluated codebook.
    pub unresolved_cells: usize,
    pub failing_cells: usize,
}

/// `delta_n = 3 log2(n) / n * |X|`.
pub fn delta_n(n: usize, alphabet: usize) -> f64 {
    3.0 * (n as f64).log2() / n as f64 * alphabet as f64
}

#[derive(Clone, Debug)]
struct CellAcc {
    rhs_log2: f64,
    sum: u64,
    max: u64,
    /// Codebooks whose count exceeds the bound.
    over: u64,
    self_overlap: bool,
}

type Tally = BTreeMap<(ErrorPattern, TypeSequence), CellAcc>;

struct Bound {
    rate: f64,
    k: usize,
    slots: usize,
    slack_exp: u32,
}

impl Bound {
    fn add(&self, mut tally: Tally, cells: BTreeMap<(ErrorPattern, TypeSequence), (u64, bool)>) -> Result<Tally> {
        for (key, (c, so)) in cells {
            let acc = match tally.get_mut(&key) {
                Some(acc) => acc,
                None => {
                    let rhs_log2 = rhs_log2(&key.0, &key.1, self.rate, self.rate, self.k, self.slots, self.slack_exp)?;
                    tally.entry(key).or_insert(CellAcc { rhs_log2, sum: 0, max: 0, over: 0, self_overlap: false })
                }
            };
            acc.sum += c;
            acc.max = acc.max.max(c);
            acc.over += (c as f64 > acc.rhs_log2.exp2()) as u64;
            acc.self_overlap |= so;
        }
        Ok(tally)
    }
}

fn merge(mut a: Tally, b: Tally) -> Tally {
    for (key, acc) in b {
        match a.get_mut(&key) {
            Some(x) => {
                x.sum += acc.sum;
                x.max = x.max.max(acc.max);
                x.over += acc.over;
                x.self_overlap |= acc.self_overlap;
            }
            None => {
                a.insert(key, acc);
            }
        }
    }
    a
}

/// How the codebooks of a [`LemmaReport`] were chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// `trials` codebooks drawn at random.
    Sampled,
    /// Every codebook of the random-selection ensemble once, so cell means
    /// are exact expectations.
    Exact,
}

fn check_config(cfg: &LemmaConfig) -> Result<FrameLayout> {
    let layout = FrameLayout::new(2 * cfg.k, cfg.slots)?;
    if cfg.messages == 0 {
        return Err(Error::InvalidMessages("M must be at least 1".into()));
    }
    if cfg.comp.shape().len() != 1 || cfg.comp.denominator() as usize != cfg.k {
        return Err(Error::ShapeMismatch { expected: format!("one-dimensional type with denominator {}", cfg.k), found: format!("{:?}", cfg.comp) });
    }
    let required = tuple_count(cfg.messages, cfg.slots);
    if required > cfg.cap {
        return Err(Error::EnumerationCap { required, cap: cfg.cap });
    }
    Ok(layout)
}

fn tally_codebooks(
    cfg: &LemmaConfig,
    layout: &FrameLayout,
    count: u64,
    codebook: impl Fn(u64) -> Result<Codebook> + Sync,
) -> Result<Tally> {
    let bound = Bound { rate: (cfg.messages as f64).log2() / layout.n() as f64, k: cfg.k, slots: cfg.slots, slack_exp: cfg.slack_exp };
    (0..count)
        .into_par_iter()
        .map(|t| tabulate_cells(&codebook(t)?, layout, cfg.cap))
        .try_fold(Tally::new, |acc, cells| bound.add(acc, cells?))
        .try_reduce(Tally::new, |a, b| Ok(merge(a, b)))
}

/// Samples `cfg.trials` codebooks and checks the packing bound cell by
/// cell. Codebook `t` is drawn from ChaCha stream `t` of the seed.
pub fn verify_lemma(cfg: &LemmaConfig) -> Result<LemmaReport> {
    let layout = check_config(cfg)?;
    if cfg.trials == 0 {
        return Err(Error::OutOfRange { what: "trials", value: 0.0 });
    }
    let tally = tally_codebooks(cfg, &layout, cfg.trials as u64, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t);
        generate_codebook(&mut rng, cfg.k, &cfg.comp, cfg.messages)
    })?;
    Ok(build_report(cfg, &layout, Ensemble::Sampled, cfg.trials as u64, tally))
}

/// Checks the bound against exact expectations by visiting every codebook
/// whose word halves lie in the type class, each once. `cfg.trials` and
/// `cfg.seed` are ignored; the ensemble size is capped by `cfg.cap`
/// together with the per-codebook tuple count.
pub fn verify_lemma_exact(cfg: &LemmaConfig) -> Result<LemmaReport> {
    let layout = check_config(cfg)?;
    let class = type_class(&cfg.comp, cfg.cap)?;
    let halves = 2 * (cfg.messages as u32 + 1);
    let ensemble = (class.len() as u128).checked_pow(halves).unwrap_or(u128::MAX);
    let required = ensemble.saturating_mul(tuple_count(cfg.messages, cfg.slots));
    if required > cfg.cap {
        return Err(Error::EnumerationCap { required, cap: cfg.cap });
    }
    let c = class.len() as u64;
    let tally = tally_codebooks(cfg, &layout, ensemble as u64, |mut idx| {
        let mut words = Vec::with_capacity(cfg.messages + 1);
        for _ in 0..=cfg.messages {
            let mut w = class[(idx % c) as usize].clone();
            idx /= c;
            w.extend_from_slice(&class[(idx % c) as usize]);
            idx /= c;
            words.push(w);
        }
        Codebook::from_words(cfg.comp.clone(), words)
    })?;
    Ok(build_report(cfg, &layout, Ensemble::Exact, ensemble as u64, tally))
}

fn build_report(cfg: &LemmaConfig, layout: &FrameLayout, ensemble: Ensemble, codebooks: u64, tally: Tally) -> LemmaReport {
    let n = layout.n();
    let trials = codebooks as f64;
    let mut over_total = 0u64;
    let cells: Vec<LemmaCell> = tally
        .into_iter()
        .map(|((pattern, types), acc)| {
            over_total += acc.over;
            let rhs = acc.rhs_log2.exp2();
            let mean = acc.sum as f64 / trials;
            LemmaCell {
                pattern,
                types: types.0.iter().map(|t| t.counts().to_vec()).collect(),
                mean_lhs: mean,
                max_lhs: acc.max,
                rhs,
                rhs_log2: acc.rhs_log2,
                // codebooks without the cell count zero, which always passes
                trial_pass_fraction: 1.0 - acc.over as f64 / trials,
                mean_ok: mean <= rhs,
                self_overlap: acc.self_overlap,
            }
        })
        .collect();
    let failing_cells = cells.iter().filter(|c| !c.mean_ok).count();
    let unresolved_cells = cells.iter().filter(|c| c.rhs < 1.0 / trials).count();
    let type_entropy = cfg.comp.to_dist().entropy();
    let rate = (cfg.messages as f64).log2() / n as f64;
    let delta = delta_n(n, cfg.comp.shape()[0]);
    let mut warnings = Vec::new();
    if rate >= type_entropy - delta {
        warnings.push(format!(
            "rate {rate:.6} is not below H(P) - delta_n = {:.6}; the rate hypothesis of the bound fails at this size",
            type_entropy - delta
        ));
    }
    if ensemble == Ensemble::Sampled && unresolved_cells > 0 {
        warnings.push(format!(
            "{unresolved_cells} cells have a bound below 1/{codebooks}; one occurrence in the sample exceeds it"
        ));
    }
    let total = cells.len().max(1) as f64;
    LemmaReport {
        ensemble,
        k: cfg.k,
        n,
        slots: cfg.slots,
        messages: cfg.messages,
        trials: codebooks,
        slack_exp: cfg.slack_exp,
        rate,
        delta_n: delta,
        type_entropy,
        warnings,
        mean_pass_fraction: (cells.len() - failing_cells) as f64 / total,
        trial_pass_fraction: 1.0 - over_total as f64 / (total * trials),
        self_overlap_cells: cells.iter().filter(|c| c.self_overlap).count(),
        unresolved_cells,
        failing_cells,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn comp(counts: &[u32]) -> TypeVector {
        TypeVector::new(vec![counts.len()], counts.to_vec()).unwrap()
    }

    #[test]
    fn pattern_validation() {
        assert!(ErrorPattern::new(vec![1], vec![1], vec![], 6).is_err());
        assert!(ErrorPattern::new(vec![7], vec![], vec![], 6).is_err());
        assert!(ErrorPattern::new(vec![0], vec![], vec![], 6).is_err());
        let p = ErrorPattern::new(vec![5, 2], vec![], vec![3, 4], 6).unwrap();
        assert_eq!(p.s1, vec![2, 5]);
        assert_eq!(p.support(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn irreducible_contains_the_synch_split_run() {
        let classes = enumerate_irreducible(5).unwrap();
        assert_eq!(classes.len(), 5);
        let run = ErrorPattern::new(vec![3, 8], vec![], vec![4, 5, 6, 7], 10).unwrap();
        let six = &classes[4];
        assert_eq!(six.run_len, 6);
        assert!(six.patterns.contains(&run));
        // a run of K messages always contains a synch slot
        assert_eq!(six.realizable, 0);
        assert!(classes[..4].iter().all(|c| c.realizable > 0));
    }

    #[test]
    fn shortest_runs_have_no_two_user_blocks() {
        for c in &enumerate_irreducible(3).unwrap()[..1] {
            assert_eq!(c.run_len, 2);
            for p in &c.patterns {
                assert!(p.s12.is_empty());
                assert_eq!(p.s1.len() + p.s2.len(), 2);
            }
        }
    }

    #[test]
    fn shape_count_linear_in_k() {
        let shapes = |k: usize| -> usize { enumerate_irreducible(k).unwrap().iter().map(|c| c.shapes.len()).sum() };
        let (a, b, c) = (shapes(3), shapes(5), shapes(7));
        assert_eq!(b - a, c - b);
        assert!(b > a);
    }

    #[test]
    fn irreducible_patterns_match_classification() {
        // every realizable irreducible run is the pattern of a tuple that
        // flips exactly its messages
        let layout = FrameLayout::new(4, 5).unwrap();
        let i = vec![1, 1, 0, 1, 1];
        let j = vec![1, 1, 1, 1, 0];
        let truth: Vec<usize> = crate::trellis::interleave(&i, &j);
        for class in enumerate_irreducible(5).unwrap() {
            for p in &class.patterns {
                let a = p.support()[0];
                let msgs = a..a + class.l;
                if msgs.clone().any(|m| layout.is_synch_step(m)) {
                    continue;
                }
                let mut hat = truth.clone();
                for m in msgs {
                    hat[m - 1] = 2;
                }
                let (ih, jh) = crate::trellis::deinterleave(&hat);
                assert_eq!(&classify_tuple(&i, &ih, &j, &jh, &layout).unwrap(), p);
            }
        }
    }

    #[test]
    fn classify_identity_is_empty() {
        let layout = FrameLayout::new(4, 3).unwrap();
        let p = classify_tuple(&[2, 0, 1], &[2, 0, 1], &[1, 2, 0], &[1, 2, 0], &layout).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn classify_single_word() {
        let layout = FrameLayout::new(4, 5).unwrap();
        let p = classify_tuple(&[1, 1, 0, 1, 1], &[1, 1, 0, 2, 1], &[1, 1, 1, 1, 0], &[1, 1, 1, 1, 0], &layout).unwrap();
        assert_eq!(p, ErrorPattern::new(vec![7, 8], vec![], vec![], 10).unwrap());
        let p = classify_tuple(&[1, 1, 0, 1, 1], &[1, 1, 0, 1, 1], &[1, 1, 1, 2, 0], &[1, 1, 1, 1, 0], &layout).unwrap();
        assert_eq!(p, ErrorPattern::new(vec![], vec![8, 9], vec![], 10).unwrap());
    }

    #[test]
    fn classify_synch_split_sets() {
        // K=5: stream-1 words 2 and 4 and stream-2 words 2 and 3 in error;
        // the stream-1 synch in slot 3 splits the two-user run.
        let layout = FrameLayout::new(4, 5).unwrap();
        let p = classify_tuple(&[1, 1, 0, 1, 1], &[1, 2, 0, 2, 1], &[1, 1, 1, 1, 0], &[1, 2, 2, 1, 0], &layout).unwrap();
        assert_eq!(p.s1, vec![3, 8]);
        assert_eq!(p.s2, vec![5, 6]);
        assert_eq!(p.s12, vec![4, 7]);
    }

    #[test]
    fn classify_rejects_bad_vectors() {
        let layout = FrameLayout::new(4, 3).unwrap();
        assert!(classify_tuple(&[1, 1, 1], &[1, 0, 1], &[1, 1, 0], &[1, 1, 0], &layout).is_err());
        assert!(classify_tuple(&[1, 0, 1], &[1, 0, 1], &[1, 1, 0], &[1, 1, 2], &layout).is_err());
        assert!(classify_tuple(&[1, 0], &[1, 0, 1], &[1, 1, 0], &[1, 1, 0], &layout).is_err());
    }

    fn uniform_type(k: u32) -> TypeVector {
        // k = 16: every cell of the binary 4-cube has 1
        TypeVector::new(vec![2, 2, 2, 2], vec![k / 16; 16]).unwrap()
    }

    #[test]
    fn rhs_empty_pattern_and_uniform_types() {
        let (k, slots) = (16, 3);
        let ts = TypeSequence::new(vec![uniform_type(16); 6], 16).unwrap();
        let r = 0.125;
        let b = rhs_log2(&ErrorPattern::empty(), &ts, r, r, k, slots, 2).unwrap();
        let expect = 2.0 * 33f64.log2() + (32 * 2) as f64 * 0.25;
        assert!((b - expect).abs() < 1e-12);
        // uniform types: every information term vanishes, rates on S remain
        let p = ErrorPattern::new(vec![1], vec![2], vec![3], 6).unwrap();
        let b = rhs_log2(&p, &ts, r, r, k, slots, 2).unwrap();
        let expect = expect + 16.0 * (r + r + 2.0 * r);
        assert!((b - expect).abs() < 1e-12);
    }

    #[test]
    fn rhs_two_paths() {
        // hand-built types on the synch-split pattern, recomputed from entropies
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 6u32;
        let types: Vec<TypeVector> = (0..10)
            .map(|_| {
                let mut c = vec![0u32; 16];
                for _ in 0..k {
                    c[rng.gen_range(0..16)] += 1;
                }
                TypeVector::new(vec![2, 2, 2, 2], c).unwrap()
            })
            .collect();
        let ts = TypeSequence::new(types.clone(), k).unwrap();
        let p = ErrorPattern::new(vec![3, 8], vec![5, 6], vec![4, 7], 10).unwrap();
        let (r1, r2) = (0.1, 0.2);
        let got = rhs_log2(&p, &ts, r1, r2, 6, 5, 3).unwrap();

        let h = |t: &TypeVector, keep: &[usize]| -> f64 {
            let mut m = BTreeMap::<Vec<usize>, u32>::new();
            for (cell, &c) in t.counts().iter().enumerate() {
                let bits: Vec<usize> = (0..4).map(|a| (cell >> (3 - a)) & 1).collect();
                *m.entry(keep.iter().map(|&a| bits[a]).collect()).or_default() += c;
            }
            m.values().filter(|&&c| c > 0).map(|&c| -(c as f64 / k as f64) * (c as f64 / k as f64).log2()).sum()
        };
        // axes 0..4 = X, XHat, Y, YHat
        let mut e = 3.0 * 13f64.log2() + 12.0 * 4.0 * (r1 + r2);
        for (idx, t) in types.iter().enumerate() {
            let s = idx + 1;
            let term = match s {
                3 | 8 => h(t, &[1]) + h(t, &[0]) + h(t, &[2]) - h(t, &[1, 0, 2]) - r1,
                5 | 6 => h(t, &[3]) + h(t, &[0]) + h(t, &[2]) - h(t, &[3, 0, 2]) - r2,
                4 | 7 => h(t, &[1]) + h(t, &[3]) + h(t, &[0]) + h(t, &[2]) - h(t, &[0, 1, 2, 3]) - r1 - r2,
                _ => h(t, &[0]) + h(t, &[2]) - h(t, &[0, 2]),
            };
            e -= 6.0 * term;
        }
        assert!((got - e).abs() < 1e-10, "{got} vs {e}");
    }

    #[test]
    fn rhs_monotone() {
        let ts = TypeSequence::new(vec![uniform_type(16); 6], 16).unwrap();
        let p = ErrorPattern::new(vec![2], vec![], vec![3], 6).unwrap();
        let f = |r1: f64, r2: f64, e: u32| rhs_log2(&p, &ts, r1, r2, 16, 3, e).unwrap();
        assert!(f(0.1, 0.1, 3) <= f(0.1, 0.1, 4));
        assert!(f(0.1, 0.1, 3) <= f(0.2, 0.1, 3));
        assert!(f(0.1, 0.1, 3) <= f(0.1, 0.2, 3));
    }

    #[test]
    fn count_with_single_message() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layout = FrameLayout::new(4, 3).unwrap();
        let cb = generate_codebook(&mut rng, 2, &comp(&[1, 1]), 1).unwrap();
        let i = [1, 0, 1];
        let j = [1, 1, 0];
        let ts = type_sequence(&cb, &i, &i, &j, &j, &layout).unwrap();
        assert_eq!(count_lhs(&cb, &ErrorPattern::empty(), &ts, &layout, DEFAULT_CAP).unwrap(), 1);
        let p = ErrorPattern::new(vec![1, 2], vec![], vec![], 6).unwrap();
        assert_eq!(count_lhs(&cb, &p, &ts, &layout, DEFAULT_CAP).unwrap(), 0);
    }

    #[test]
    fn count_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layout = FrameLayout::new(4, 3).unwrap();
        let cb = generate_codebook(&mut rng, 2, &comp(&[1, 1]), 2).unwrap();
        let ts = type_sequence(&cb, &[1, 0, 1], &[1, 0, 1], &[1, 1, 0], &[1, 1, 0], &layout).unwrap();
        assert_eq!(
            count_lhs(&cb, &ErrorPattern::empty(), &ts, &layout, 100),
            Err(Error::EnumerationCap { required: 256, cap: 100 })
        );
    }

    /// Independent enumerator for K = 3: eight nested loops over the free
    /// slots, subblock types computed from explicit frame assembly.
    fn nested_count(cb: &Codebook, pattern: &ErrorPattern, types: &TypeSequence) -> u64 {
        let m = cb.messages();
        let k = cb.k();
        let mut count = 0;
        let frame = |x: [usize; 3], y: [usize; 3]| -> (Vec<usize>, Vec<usize>) {
            let s1: Vec<usize> = x.iter().flat_map(|&w| cb.word(w).to_vec()).collect();
            let mut s2: Vec<usize> = y.iter().flat_map(|&w| cb.word(w).to_vec()).collect();
            s2.rotate_right(k);
            (s1, s2)
        };
        for i1 in 1..=m {
            for i3 in 1..=m {
                for h1 in 1..=m {
                    for h3 in 1..=m {
                        for j1 in 1..=m {
                            for j2 in 1..=m {
                                for g1 in 1..=m {
                                    for g2 in 1..=m {
                                        let (x, y) = frame([i1, 0, i3], [j1, j2, 0]);
                                        let (xh, yh) = frame([h1, 0, h3], [g1, g2, 0]);
                                        let diff1 = [i1 != h1, false, i3 != h3];
                                        let diff2 = [j1 != g1, j2 != g2, false];
                                        let mut p = ErrorPattern::empty();
                                        let mut ok = true;
                                        for s in 1..=6usize {
                                            let d1 = diff1[(s - 1) / 2];
                                            let d2 = diff2[if s == 1 { 2 } else { s / 2 - 1 }];
                                            match (d1, d2) {
                                                (true, false) => p.s1.push(s),
                                                (false, true) => p.s2.push(s),
                                                (true, true) => p.s12.push(s),
                                                _ => {}
                                            }
                                            let r = (s - 1) * k..s * k;
                                            let mut c = vec![0u32; 16];
                                            for t in r {
                                                c[x[t] * 8 + xh[t] * 4 + y[t] * 2 + yh[t]] += 1;
                                            }
                                            ok &= c == types.0[s - 1].counts();
                                        }
                                        if ok && &p == pattern {
                                            count += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn count_matches_nested_loops() {
        let layout = FrameLayout::new(4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let cb = generate_codebook(&mut rng, 2, &comp(&[1, 1]), 2).unwrap();
            let cells = tabulate_cells(&cb, &layout, DEFAULT_CAP).unwrap();
            for (pattern, ts) in cells.keys() {
                let c = count_lhs(&cb, pattern, ts, &layout, DEFAULT_CAP).unwrap();
                assert_eq!(c, cells[&(pattern.clone(), ts.clone())].0);
                assert_eq!(c, nested_count(&cb, pattern, ts));
            }
        }
    }

    #[test]
    fn cells_partition_each_pattern() {
        // per pattern, cell counts add up to M^{2(K-1)} (M-1)^{#differing words}
        let layout = FrameLayout::new(4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 3usize;
        let cb = generate_codebook(&mut rng, 2, &comp(&[1, 1]), m).unwrap();
        let cells = tabulate_cells(&cb, &layout, DEFAULT_CAP).unwrap();
        let mut per_pattern = BTreeMap::<ErrorPattern, u64>::new();
        for ((p, _), (c, _)) in &cells {
            *per_pattern.entry(p.clone()).or_default() += c;
        }
        let total: u64 = per_pattern.values().sum();
        assert_eq!(total as u128, tuple_count(m, 3));
        for (p, c) in per_pattern {
            // stream-1 word t differs iff 2t-1 or 2t is in S1 u S12, etc.
            let s = |v: &Vec<usize>, x: usize| v.contains(&x);
            let d1 = (1..=3).filter(|&t| [2 * t - 1, 2 * t].iter().any(|&b| s(&p.s1, b) || s(&p.s12, b))).count();
            let d2 = (1..=3)
                .filter(|&t| [2 * t, if t == 3 { 1 } else { 2 * t + 1 }].iter().any(|&b| s(&p.s2, b) || s(&p.s12, b)))
                .count();
            let expect = (m as u64).pow(4) * ((m - 1) as u64).pow((d1 + d2) as u32);
            assert_eq!(c, expect, "{p:?}");
        }
    }

    #[test]
    fn lemma_small_run() {
        let cfg = LemmaConfig { k: 2, slots: 3, messages: 2, comp: comp(&[1, 1]), trials: 20, slack_exp: 8, seed: 1, cap: DEFAULT_CAP };
        let r = verify_lemma(&cfg).unwrap();
        assert!(r.self_overlap_cells > 0);
        assert!(!r.warnings.is_empty());
        assert_eq!(r, verify_lemma(&cfg).unwrap());
        // dropping the polynomial factor only ever loses cells
        let tight = verify_lemma(&LemmaConfig { slack_exp: 0, ..cfg.clone() }).unwrap();
        assert!(tight.mean_pass_fraction <= r.mean_pass_fraction);
        assert!(verify_lemma(&LemmaConfig { cap: 10, ..cfg }).is_err());
    }

    #[test]
    fn lemma_exact_small_ensemble() {
        let cfg = LemmaConfig { k: 2, slots: 3, messages: 2, comp: comp(&[1, 1]), trials: 1, slack_exp: 8, seed: 0, cap: DEFAULT_CAP };
        let r = verify_lemma_exact(&cfg).unwrap();
        assert_eq!(r.ensemble, Ensemble::Exact);
        // 2 words of type (1,1) per half, 3 codewords of 2 halves each
        assert_eq!(r.trials, 64);
        let total: f64 = r.cells.iter().map(|c| c.mean_lhs).sum();
        assert_eq!(total.round() as u128, tuple_count(2, 3));
        // every codebook of the ensemble agrees with a direct tabulation
        let layout = FrameLayout::new(4, 3).unwrap();
        let class = [vec![0, 1], vec![1, 0]];
        let mut direct: BTreeMap<(ErrorPattern, Vec<Vec<u32>>), u64> = BTreeMap::new();
        for idx in 0..64usize {
            let words = (0..3)
                .map(|w| [class[(idx >> (2 * w)) & 1].clone(), class[(idx >> (2 * w + 1)) & 1].clone()].concat())
                .collect();
            let cb = Codebook::from_words(comp(&[1, 1]), words).unwrap();
            for ((p, ts), (count, _)) in tabulate_cells(&cb, &layout, DEFAULT_CAP).unwrap() {
                *direct.entry((p, ts.0.iter().map(|t| t.counts().to_vec()).collect())).or_default() += count;
            }
        }
        assert_eq!(direct.len(), r.cells.len());
        for c in &r.cells {
            let sum = direct[&(c.pattern.clone(), c.types.clone())];
            assert!((c.mean_lhs - sum as f64 / 64.0).abs() < 1e-12);
        }
        // cells beating the bound on average are driven by codewords reused across streams
        assert!(r.cells.iter().filter(|c| !c.mean_ok).all(|c| c.self_overlap));
        assert!(verify_lemma_exact(&LemmaConfig { cap: 1000, ..cfg }).is_err());
    }
}
