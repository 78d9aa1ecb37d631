//! The XOR construction as a memory-1 trellis code: framing, codebooks,
//! encoding, the equivalent trellis view, ML decoding and Monte Carlo error
//! measurement.
//!
//! A frame holds `K = 2l + 1` codeword slots of length `n = 2k` per stream.
//! Stream 1 sends `x(i_1) ... x(i_K)` with the synch word in slot `l + 1`;
//! stream 2 sends `y(j_1) ... y(j_K)` with the synch word in slot `K`,
//! rotated right by `k` inside the `nK` window. The channel sees the XOR.
//! With the interleaved messages `m = (i_1, j_1, ..., i_K, j_K)` and
//! `m_0 = j_K = 0`, subblock `s` is `first(m_s) ^ last(m_{s-1})`, where
//! `first`/`last` are the two halves of a word of the matching codebook.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::Dmc;
use crate::error::{Error, Result};
use crate::prob::{sample_type_class, type_of, TypeVector};

/// Frame geometry for blocklength `n` and `K` slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    n: usize,
    slots: usize,
}

impl FrameLayout {
    pub fn new(n: usize, slots: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidLayout(format!("blocklength n = {n} must be even and positive")));
        }
        if slots < 3 || slots % 2 == 0 {
            return Err(Error::InvalidLayout(format!("slot count K = {slots} must be odd and at least 3")));
        }
        Ok(FrameLayout { n, slots })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.n / 2
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// `l` with `K = 2l + 1`.
    pub fn l(&self) -> usize {
        self.slots / 2
    }

    /// Delay `(l + 1/2) n` in symbols.
    pub fn delay(&self) -> usize {
        self.l() * self.n + self.k()
    }

    /// 1-based synch slot of stream 1.
    pub fn synch_slot_1(&self) -> usize {
        self.l() + 1
    }

    /// 1-based synch slot of stream 2.
    pub fn synch_slot_2(&self) -> usize {
        self.slots
    }

    pub fn frame_len(&self) -> usize {
        self.n * self.slots
    }

    /// Number of `k`-subblocks (trellis steps) per frame.
    pub fn steps(&self) -> usize {
        2 * self.slots
    }

    /// Whether interleaved step `s` (1-based) carries a synch index.
    pub fn is_synch_step(&self, s: usize) -> bool {
        s == 2 * self.synch_slot_1() - 1 || s == 2 * self.synch_slot_2()
    }
}

/// `M + 1` words of length `n`; word 0 is the synch sequence. Each half of
/// every word lies in the type class of `comp`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    alphabet: usize,
    comp: TypeVector,
    words: Vec<Vec<usize>>,
}

impl Codebook {
    /// Checks every half against `comp` (a one-dimensional type whose
    /// denominator is the half length).
    pub fn from_words(comp: TypeVector, words: Vec<Vec<usize>>) -> Result<Self> {
        let alphabet = check_comp(&comp)?;
        if words.len() < 2 {
            return Err(Error::InvalidMessages("a codebook needs the synch word and at least one message".into()));
        }
        let k = comp.denominator() as usize;
        for (i, w) in words.iter().enumerate() {
            if w.len() != 2 * k {
                return Err(Error::InvalidMessages(format!("word {i} has length {}, expected {}", w.len(), 2 * k)));
            }
            for half in w.chunks(k) {
                if type_of(half, alphabet)? != comp {
                    return Err(Error::InvalidMessages(format!("word {i} has a half outside the type class")));
                }
            }
        }
        Ok(Codebook { alphabet, comp, words })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn comp(&self) -> &TypeVector {
        &self.comp
    }

    pub fn k(&self) -> usize {
        self.comp.denominator() as usize
    }

    pub fn n(&self) -> usize {
        2 * self.k()
    }

    /// Number of message words `M` (the synch word excluded).
    pub fn messages(&self) -> usize {
        self.words.len() - 1
    }

    pub fn word(&self, i: usize) -> &[usize] {
        &self.words[i]
    }

    pub fn first_half(&self, i: usize) -> &[usize] {
        &self.words[i][..self.k()]
    }

    pub fn last_half(&self, i: usize) -> &[usize] {
        &self.words[i][self.k()..]
    }

    /// `log2(M) / n`.
    pub fn realized_rate(&self) -> f64 {
        (self.messages() as f64).log2() / self.n() as f64
    }
}

fn check_comp(comp: &TypeVector) -> Result<usize> {
    if comp.shape().len() != 1 {
        return Err(Error::ShapeMismatch { expected: "one-dimensional type".into(), found: format!("{:?}", comp.shape()) });
    }
    let alphabet = comp.shape()[0];
    if !alphabet.is_power_of_two() || alphabet < 2 {
        return Err(Error::AlphabetMismatch(format!("XOR needs a power-of-two alphabet, got {alphabet}")));
    }
    Ok(alphabet)
}

/// `M = round(2^{n R})`, at least 1.
pub fn messages_for_rate(n: usize, rate: f64) -> Result<usize> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::OutOfRange { what: "rate", value: rate });
    }
    let m = (n as f64 * rate).exp2().round();
    if m > 1e9 {
        return Err(Error::OutOfRange { what: "codebook size 2^(nR)", value: m });
    }
    Ok((m as usize).max(1))
}

/// Draws `M + 1` words whose halves are independent and uniform over the
/// type class of `comp`.
pub fn generate_codebook<R: Rng + ?Sized>(rng: &mut R, k: usize, comp: &TypeVector, messages: usize) -> Result<Codebook> {
    let alphabet = check_comp(comp)?;
    if comp.denominator() as usize != k {
        return Err(Error::ShapeMismatch { expected: format!("type with denominator {k}"), found: format!("{}", comp.denominator()) });
    }
    if messages == 0 {
        return Err(Error::InvalidMessages("M must be at least 1".into()));
    }
    let words = (0..=messages)
        .map(|_| {
            let mut w = sample_type_class(comp, rng);
            w.extend(sample_type_class(comp, rng));
            w
        })
        .collect();
    Ok(Codebook { alphabet, comp: comp.clone(), words })
}

fn check_messages(msgs: &[usize], synch: usize, m: usize, stream: u8, layout: &FrameLayout) -> Result<()> {
    if msgs.len() != layout.slots() {
        return Err(Error::InvalidMessages(format!("stream {stream}: {} indices for {} slots", msgs.len(), layout.slots())));
    }
    for (t, &i) in msgs.iter().enumerate() {
        let slot = t + 1;
        if slot == synch {
            if i != 0 {
                return Err(Error::SynchSlot { stream, slot });
            }
        } else if i == 0 || i > m {
            return Err(Error::InvalidMessages(format!("stream {stream}: slot {slot} index {i} not in 1..={m}")));
        }
    }
    Ok(())
}

fn check_pair(cb1: &Codebook, cb2: &Codebook, layout: &FrameLayout) -> Result<()> {
    if cb1.n() != layout.n() || cb2.n() != layout.n() {
        return Err(Error::InvalidLayout(format!("codeword length differs from n = {}", layout.n())));
    }
    if cb1.alphabet() != cb2.alphabet() || cb1.messages() != cb2.messages() {
        return Err(Error::AlphabetMismatch("the two codebooks differ in alphabet or size".into()));
    }
    Ok(())
}

/// XOR of stream 1 with stream 2 rotated right by `k` inside the frame.
pub fn encode_frame(
    messages_1: &[usize],
    messages_2: &[usize],
    cb1: &Codebook,
    cb2: &Codebook,
    layout: &FrameLayout,
) -> Result<Vec<usize>> {
    check_pair(cb1, cb2, layout)?;
    check_messages(messages_1, layout.synch_slot_1(), cb1.messages(), 1, layout)?;
    check_messages(messages_2, layout.synch_slot_2(), cb2.messages(), 2, layout)?;
    let s1: Vec<usize> = messages_1.iter().flat_map(|&i| cb1.word(i).iter().copied()).collect();
    let mut s2: Vec<usize> = messages_2.iter().flat_map(|&j| cb2.word(j).iter().copied()).collect();
    s2.rotate_right(layout.k());
    Ok(s1.iter().zip(&s2).map(|(a, b)| a ^ b).collect())
}

/// Interleaves `(i_1, j_1, ..., i_K, j_K)`.
pub fn interleave(messages_1: &[usize], messages_2: &[usize]) -> Vec<usize> {
    messages_1.iter().zip(messages_2).flat_map(|(&i, &j)| [i, j]).collect()
}

/// Inverse of [`interleave`].
pub fn deinterleave(m: &[usize]) -> (Vec<usize>, Vec<usize>) {
    (m.iter().step_by(2).copied().collect(), m.iter().skip(1).step_by(2).copied().collect())
}

/// Per-step subblock tables: `table[parity][m][m_prev]` is the `k`-block
/// emitted for message `m` in memory state `m_prev`. Odd steps (parity 0)
/// carry stream-1 messages, even steps stream-2 messages. With a shared
/// codebook both tables coincide and the code is time-invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrellisCode {
    k: usize,
    alphabet: usize,
    states: usize,
    tables: [Vec<Vec<Vec<usize>>>; 2],
}

impl TrellisCode {
    pub fn from_pair(cb1: &Codebook, cb2: &Codebook) -> Result<Self> {
        if cb1.k() != cb2.k() || cb1.alphabet() != cb2.alphabet() || cb1.messages() != cb2.messages() {
            return Err(Error::AlphabetMismatch("the two codebooks differ in shape".into()));
        }
        let states = cb1.messages() + 1;
        let table = |cur: &Codebook, prev: &Codebook| -> Vec<Vec<Vec<usize>>> {
            (0..states)
                .map(|m| {
                    (0..states)
                        .map(|mp| cur.first_half(m).iter().zip(prev.last_half(mp)).map(|(a, b)| a ^ b).collect())
                        .collect()
                })
                .collect()
        };
        Ok(TrellisCode {
            k: cb1.k(),
            alphabet: cb1.alphabet(),
            states,
            tables: [table(cb1, cb2), table(cb2, cb1)],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// `M + 1`.
    pub fn states(&self) -> usize {
        self.states
    }

    /// Subblock emitted at 1-based step `s` for message `m` after `m_prev`.
    pub fn emission(&self, s: usize, m: usize, m_prev: usize) -> &[usize] {
        &self.tables[(s + 1) % 2][m][m_prev]
    }

    /// True when the emission map does not depend on the step.
    pub fn is_time_invariant(&self) -> bool {
        self.tables[0] == self.tables[1]
    }

    /// Concatenated emissions for an interleaved message sequence, starting
    /// from memory state 0.
    pub fn emit(&self, interleaved: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(interleaved.len() * self.k);
        let mut prev = 0;
        for (s, &m) in interleaved.iter().enumerate() {
            out.extend_from_slice(self.emission(s + 1, m, prev));
            prev = m;
        }
        out
    }
}

/// The trellis code of a shared codebook.
pub fn trellis_view(cb: &Codebook) -> TrellisCode {
    TrellisCode::from_pair(cb, cb).expect("a codebook matches itself")
}

/// Independent per-symbol channel use.
pub fn simulate_channel<R: Rng + ?Sized>(input: &[usize], dmc: &Dmc, rng: &mut R) -> Result<Vec<usize>> {
    let samplers: Vec<WeightedIndex<f64>> = (0..dmc.inputs())
        .map(|x| WeightedIndex::new(dmc.row(x).probs()).map_err(|e| Error::InvalidDistribution(e.to_string())))
        .collect::<Result<_>>()?;
    input
        .iter()
        .map(|&x| {
            samplers.get(x).map(|s| s.sample(rng)).ok_or(Error::OutOfRange { what: "channel input symbol", value: x as f64 })
        })
        .collect()
}

/// Log-likelihoods in fixed point, so path sums are exact and associative.
const METRIC_SCALE: f64 = (1u64 << 32) as f64;
const IMPOSSIBLE: i64 = i64::MIN;

fn add_metric(a: i64, b: i64) -> i64 {
    if a == IMPOSSIBLE || b == IMPOSSIBLE {
        IMPOSSIBLE
    } else {
        a + b
    }
}

fn log_table(dmc: &Dmc) -> Vec<Vec<i64>> {
    (0..dmc.outputs())
        .map(|z| {
            (0..dmc.inputs())
                .map(|x| {
                    let w = dmc.w(z, x);
                    if w > 0.0 {
                        (w.log2() * METRIC_SCALE).round() as i64
                    } else {
                        IMPOSSIBLE
                    }
                })
                .collect()
        })
        .collect()
}

fn block_metric(ll: &[Vec<i64>], z: &[usize], x: &[usize]) -> i64 {
    z.iter().zip(x).fold(0, |acc, (&zz, &xx)| add_metric(acc, ll[zz][xx]))
}

/// Allowed indices at 1-based step `s`.
fn allowed(layout: &FrameLayout, states: usize, s: usize) -> std::ops::Range<usize> {
    if layout.is_synch_step(s) {
        0..1
    } else {
        1..states
    }
}

/// Maximum-likelihood interleaved message sequence. Paths start in state 0
/// and respect both synch slots; among equally likely paths the
/// lexicographically smallest wins.
pub fn viterbi_decode(output: &[usize], tc: &TrellisCode, dmc: &Dmc, layout: &FrameLayout) -> Result<Vec<usize>> {
    if output.len() != layout.frame_len() || tc.k() != layout.k() {
        return Err(Error::InvalidLayout(format!("output length {} does not match the frame", output.len())));
    }
    if dmc.inputs() != tc.alphabet() {
        return Err(Error::AlphabetMismatch(format!("channel has {} inputs, code {}", dmc.inputs(), tc.alphabet())));
    }
    if let Some(&z) = output.iter().find(|&&z| z >= dmc.outputs()) {
        return Err(Error::OutOfRange { what: "channel output symbol", value: z as f64 });
    }
    let ll = log_table(dmc);
    let (k, states, steps) = (tc.k(), tc.states(), layout.steps());
    let block = |s: usize| &output[(s - 1) * k..s * k];

    // Backward pass: to_go[s][m] is the best metric of steps s+1.. given m_s = m.
    let mut to_go = vec![vec![IMPOSSIBLE; states]; steps + 1];
    to_go[steps][0] = 0;
    for s in (1..=steps).rev() {
        let z = block(s);
        let prev_range = if s == 1 { 0..1 } else { allowed(layout, states, s - 1) };
        for mp in prev_range {
            let mut best = IMPOSSIBLE;
            for m in allowed(layout, states, s) {
                let v = add_metric(block_metric(&ll, z, tc.emission(s, m, mp)), to_go[s][m]);
                if v > best {
                    best = v;
                }
            }
            to_go[s - 1][mp] = best;
        }
    }
    // Forward pass: first index achieving the optimum at every step.
    let mut path = Vec::with_capacity(steps);
    let mut prev = 0;
    for s in 1..=steps {
        let target = to_go[s - 1][prev];
        let z = block(s);
        let m = allowed(layout, states, s)
            .find(|&m| add_metric(block_metric(&ll, z, tc.emission(s, m, prev)), to_go[s][m]) == target)
            .expect("optimum is attained");
        path.push(m);
        prev = m;
    }
    Ok(path)
}

/// Monte Carlo setup.
#[derive(Clone, Debug)]
pub struct MonteCarloConfig {
    pub dmc: Dmc,
    pub layout: FrameLayout,
    pub comp: TypeVector,
    /// Codebook size `M`.
    pub messages: usize,
    pub trials: u64,
    pub seed: u64,
    /// Frames per freshly drawn codebook.
    pub batch: u64,
    /// One codebook for both streams (default) or two independent ones.
    pub shared: bool,
}

impl MonteCarloConfig {
    pub fn new(dmc: Dmc, layout: FrameLayout, comp: TypeVector, messages: usize, trials: u64, seed: u64) -> Self {
        MonteCarloConfig { dmc, layout, comp, messages, trials, seed, batch: 100, shared: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub trials: u64,
    pub frame_errors: u64,
    /// Non-synch messages decoded wrongly, over both streams.
    pub message_errors: u64,
    pub messages_sent: u64,
    pub frame_error_rate: f64,
    pub message_error_rate: f64,
    /// 95% Wilson score interval for the frame error rate.
    pub wilson_interval: (f64, f64),
    pub realized_rate: f64,
}

/// 95% two-sided normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials` at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Codebook-averaged frame and message error rates. Trials are split into
/// batches of `cfg.batch` frames; batch `b` draws its codebook and traffic
/// from the ChaCha stream `b` of `cfg.seed`, so results do not depend on
/// the number of worker threads.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Result<ErrorStats> {
    if cfg.trials == 0 || cfg.batch == 0 {
        return Err(Error::OutOfRange { what: "trials", value: cfg.trials as f64 });
    }
    let layout = cfg.layout;
    if cfg.dmc.inputs() != cfg.comp.shape().first().copied().unwrap_or(0) {
        return Err(Error::AlphabetMismatch("channel inputs differ from the type alphabet".into()));
    }
    let batches = cfg.trials.div_ceil(cfg.batch);
    let counts = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<(u64, u64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let cb1 = generate_codebook(&mut rng, layout.k(), &cfg.comp, cfg.messages)?;
            let cb2 = if cfg.shared { cb1.clone() } else { generate_codebook(&mut rng, layout.k(), &cfg.comp, cfg.messages)? };
            let tc = TrellisCode::from_pair(&cb1, &cb2)?;
            let frames = cfg.batch.min(cfg.trials - b * cfg.batch);
            let (mut frame_err, mut msg_err) = (0, 0);
            for _ in 0..frames {
                let draw = |synch: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
                    (1..=layout.slots()).map(|t| if t == synch { 0 } else { rng.gen_range(1..=cfg.messages) }).collect()
                };
                let m1 = draw(layout.synch_slot_1(), &mut rng);
                let m2 = draw(layout.synch_slot_2(), &mut rng);
                let x = encode_frame(&m1, &m2, &cb1, &cb2, &layout)?;
                let z = simulate_channel(&x, &cfg.dmc, &mut rng)?;
                let decoded = viterbi_decode(&z, &tc, &cfg.dmc, &layout)?;
                let wrong = decoded.iter().zip(interleave(&m1, &m2)).filter(|(a, b)| **a != *b).count() as u64;
                msg_err += wrong;
                frame_err += (wrong > 0) as u64;
            }
            Ok((frame_err, msg_err))
        })
        .collect::<Result<Vec<_>>>()?;
    let frame_errors: u64 = counts.iter().map(|c| c.0).sum();
    let message_errors: u64 = counts.iter().map(|c| c.1).sum();
    let messages_sent = cfg.trials * 2 * (layout.slots() as u64 - 1);
    Ok(ErrorStats {
        trials: cfg.trials,
        frame_errors,
        message_errors,
        messages_sent,
        frame_error_rate: frame_errors as f64 / cfg.trials as f64,
        message_error_rate: message_errors as f64 / messages_sent as f64,
        wilson_interval: wilson_interval(frame_errors, cfg.trials),
        realized_rate: (cfg.messages as f64).log2() / layout.n() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::z_channel;

    fn comp(counts: &[u32]) -> TypeVector {
        TypeVector::new(vec![counts.len()], counts.to_vec()).unwrap()
    }

    /// Words for k = 2: synch 01|10, word 1 10|01, word 2 01|01.
    fn fixture() -> Codebook {
        Codebook::from_words(comp(&[1, 1]), vec![vec![0, 1, 1, 0], vec![1, 0, 0, 1], vec![0, 1, 0, 1]]).unwrap()
    }

    /// Every valid (stream 1, stream 2) message tuple.
    fn all_tuples(layout: &FrameLayout, m: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let free = 2 * (layout.slots() - 1);
        let mut out = Vec::new();
        for code in 0..m.pow(free as u32) {
            let mut digits = (0..free).scan(code, |c, _| {
                let d = *c % m + 1;
                *c /= m;
                Some(d)
            });
            let mut s1 = Vec::new();
            let mut s2 = Vec::new();
            for t in 1..=layout.slots() {
                s1.push(if t == layout.synch_slot_1() { 0 } else { digits.next().unwrap() });
            }
            for t in 1..=layout.slots() {
                s2.push(if t == layout.synch_slot_2() { 0 } else { digits.next().unwrap() });
            }
            out.push((s1, s2));
        }
        out
    }

    #[test]
    fn layout_geometry() {
        let l = FrameLayout::new(8, 5).unwrap();
        assert_eq!((l.k(), l.l(), l.delay(), l.frame_len()), (4, 2, 20, 40));
        assert_eq!((l.synch_slot_1(), l.synch_slot_2()), (3, 5));
        assert!(l.is_synch_step(5) && l.is_synch_step(10));
        assert!(FrameLayout::new(7, 5).is_err());
        assert!(FrameLayout::new(8, 4).is_err());
        assert!(FrameLayout::new(8, 1).is_err());
    }

    #[test]
    fn point_mass_codebook_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cb = generate_codebook(&mut rng, 3, &comp(&[0, 3]), 4).unwrap();
        assert_eq!(cb.messages(), 4);
        for i in 0..=4 {
            assert_eq!(cb.word(i), &[1; 6]);
        }
    }

    #[test]
    fn generated_halves_have_the_type() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = comp(&[3, 5]);
        let cb = generate_codebook(&mut rng, 8, &t, 20).unwrap();
        for i in 0..=20 {
            assert_eq!(type_of(cb.first_half(i), 2).unwrap(), t);
            assert_eq!(type_of(cb.last_half(i), 2).unwrap(), t);
        }
        assert!(generate_codebook(&mut rng, 7, &t, 2).is_err());
        assert!(generate_codebook(&mut rng, 8, &t, 0).is_err());
        assert!(generate_codebook(&mut rng, 3, &comp(&[1, 1, 1]), 2).is_err());
    }

    #[test]
    fn halves_uniform_over_class() {
        // k=4, type (2,2): 6 arrangements; 10^4 halves drawn from M=4 codebooks.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = comp(&[2, 2]);
        let mut hist = std::collections::BTreeMap::<Vec<usize>, u32>::new();
        let mut draws = 0;
        while draws < 10_000 {
            let cb = generate_codebook(&mut rng, 4, &t, 4).unwrap();
            for i in 0..=4 {
                for h in [cb.first_half(i), cb.last_half(i)] {
                    *hist.entry(h.to_vec()).or_default() += 1;
                    draws += 1;
                }
            }
        }
        assert_eq!(hist.len(), 6);
        let e = draws as f64 / 6.0;
        let chi2: f64 = hist.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 5 degrees of freedom; 0.999 quantile is 20.5
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    #[test]
    fn from_words_checks_types() {
        assert!(Codebook::from_words(comp(&[1, 1]), vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0]]).is_err());
        assert!(Codebook::from_words(comp(&[1, 1]), vec![vec![0, 1, 1, 0]]).is_err());
        assert!(Codebook::from_words(comp(&[1, 1]), vec![vec![0, 1, 1, 0], vec![0, 1]]).is_err());
    }

    #[test]
    fn encode_fixture_by_hand() {
        let cb = fixture();
        let layout = FrameLayout::new(4, 3).unwrap();
        // stream 1: x(1) x(0) x(2) = 1001 0110 0101
        // stream 2: y(2) y(1) y(0) = 0101 1001 0110, rotated right by 2:
        //           10 0101 1001 01 = 1001 0110 0101
        let out = encode_frame(&[1, 0, 2], &[2, 1, 0], &cb, &cb, &layout).unwrap();
        assert_eq!(out, vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        // stream 1: 0101 0110 1001; stream 2 y(1) y(2) y(0) = 1001 0101 0110 -> 10 1001 0101 01
        let out = encode_frame(&[2, 0, 1], &[1, 2, 0], &cb, &cb, &layout).unwrap();
        let s1 = [0, 1, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1];
        let s2 = [1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0, 1];
        let expect: Vec<usize> = s1.iter().zip(s2).map(|(a, b)| a ^ b).collect();
        assert_eq!(out, expect);
        assert_eq!(out, vec![1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0]);
    }

    #[test]
    fn encode_checks_synch_slots() {
        let cb = fixture();
        let layout = FrameLayout::new(4, 3).unwrap();
        assert_eq!(encode_frame(&[1, 1, 2], &[2, 1, 0], &cb, &cb, &layout), Err(Error::SynchSlot { stream: 1, slot: 2 }));
        assert_eq!(encode_frame(&[1, 0, 2], &[2, 1, 1], &cb, &cb, &layout), Err(Error::SynchSlot { stream: 2, slot: 3 }));
        assert!(encode_frame(&[1, 0, 3], &[2, 1, 0], &cb, &cb, &layout).is_err());
        assert!(encode_frame(&[0, 0, 2], &[2, 1, 0], &cb, &cb, &layout).is_err());
        assert!(encode_frame(&[1, 0], &[2, 1, 0], &cb, &cb, &layout).is_err());
    }

    #[test]
    fn all_synch_frame_is_fixed() {
        // With every slot at the synch word the output only depends on x(0).
        let cb = fixture();
        let layout = FrameLayout::new(4, 3).unwrap();
        let tc = trellis_view(&cb);
        let out = tc.emit(&[0; 6]);
        // first(0) ^ last(0) = 01 ^ 10 = 11 in every subblock
        assert_eq!(out, vec![1; 12]);
        let z = simulate_channel(&out, &Dmc::identity(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(z, out);
        let _ = layout;
    }

    #[test]
    fn shift_by_k_twice_is_one_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq: Vec<usize> = (0..24).map(|_| rng.gen_range(0..2)).collect();
        let (k, n) = (3, 6);
        let mut twice = seq.clone();
        twice.rotate_right(k);
        twice.rotate_right(k);
        let mut once = seq;
        once.rotate_right(n);
        assert_eq!(twice, once);
    }

    #[test]
    fn trellis_matches_encoder_exhaustively() {
        let cb = fixture();
        let layout = FrameLayout::new(4, 3).unwrap();
        let tc = trellis_view(&cb);
        assert!(tc.is_time_invariant());
        let tuples = all_tuples(&layout, 2);
        assert_eq!(tuples.len(), 16);
        for (m1, m2) in tuples {
            let direct = encode_frame(&m1, &m2, &cb, &cb, &layout).unwrap();
            assert_eq!(tc.emit(&interleave(&m1, &m2)), direct);
        }
    }

    #[test]
    fn two_codebooks_alternate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = comp(&[2, 1]);
        let layout = FrameLayout::new(6, 5).unwrap();
        let cb1 = generate_codebook(&mut rng, 3, &t, 3).unwrap();
        let cb2 = generate_codebook(&mut rng, 3, &t, 3).unwrap();
        let tc = TrellisCode::from_pair(&cb1, &cb2).unwrap();
        assert!(!tc.is_time_invariant());
        for (m1, m2) in all_tuples(&layout, 3).into_iter().step_by(37) {
            let direct = encode_frame(&m1, &m2, &cb1, &cb2, &layout).unwrap();
            assert_eq!(tc.emit(&interleave(&m1, &m2)), direct);
        }
    }

    #[test]
    fn interleave_roundtrip() {
        let m = interleave(&[1, 0, 2], &[3, 4, 0]);
        assert_eq!(m, vec![1, 3, 0, 4, 2, 0]);
        assert_eq!(deinterleave(&m), (vec![1, 0, 2], vec![3, 4, 0]));
    }

    #[test]
    fn channel_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<usize> = (0..200).map(|i| i % 2).collect();
        assert_eq!(simulate_channel(&x, &z_channel(1.0).unwrap(), &mut rng).unwrap(), vec![0; 200]);
        assert!(simulate_channel(&[2], &Dmc::identity(2), &mut rng).is_err());
    }

    #[test]
    fn channel_frequencies() {
        let dmc = Dmc::new(vec![vec![0.7, 0.2, 0.1], vec![0.25, 0.25, 0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<usize> = (0..100_000).map(|i| i % 2).collect();
        let z = simulate_channel(&x, &dmc, &mut rng).unwrap();
        let n = 50_000.0;
        for xin in 0..2 {
            for zout in 0..3 {
                let c = x.iter().zip(&z).filter(|(a, b)| **a == xin && **b == zout).count() as f64;
                let p = dmc.w(zout, xin);
                let sigma = (n * p * (1.0 - p)).sqrt();
                assert!((c - n * p).abs() < 5.0 * sigma, "x={xin} z={zout}: {c}");
            }
        }
    }

    #[test]
    fn noiseless_decoding_recovers_everything() {
        let cb = fixture();
        let layout = FrameLayout::new(4, 3).unwrap();
        let tc = trellis_view(&cb);
        let id = Dmc::identity(2);
        for (m1, m2) in all_tuples(&layout, 2) {
            let x = encode_frame(&m1, &m2, &cb, &cb, &layout).unwrap();
            // first halves of words 1 and 2 differ, so every subblock pins
            // down one more message and the frame map is injective
            assert_eq!(viterbi_decode(&x, &tc, &id, &layout).unwrap(), interleave(&m1, &m2));
        }
    }

    #[test]
    fn synch_only_frames_stay_synch_constrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cb = generate_codebook(&mut rng, 2, &comp(&[1, 1]), 2).unwrap();
        let layout = FrameLayout::new(4, 3).unwrap();
        let tc = trellis_view(&cb);
        let dmc = z_channel(0.5).unwrap();
        let x = tc.emit(&[0; 6]);
        for _ in 0..50 {
            let z = simulate_channel(&x, &dmc, &mut rng).unwrap();
            let d = viterbi_decode(&z, &tc, &dmc, &layout).unwrap();
            assert_eq!((d[2], d[5]), (0, 0));
            assert!(d.iter().enumerate().all(|(i, &m)| layout.is_synch_step(i + 1) || m >= 1));
        }
    }

    #[test]
    fn wilson_reference() {
        // 10 of 100 at 95%: (0.0552, 0.1744)
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.055_229).abs() < 1e-5 && (hi - 0.174_366).abs() < 1e-5, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 50);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn monte_carlo_noiseless_and_deterministic() {
        let layout = FrameLayout::new(32, 3).unwrap();
        let cfg = MonteCarloConfig::new(Dmc::identity(2), layout, comp(&[8, 8]), 4, 300, 9);
        let s = monte_carlo(&cfg).unwrap();
        assert_eq!((s.frame_errors, s.message_errors), (0, 0));
        assert_eq!(s.messages_sent, 300 * 4);
        let noisy = MonteCarloConfig::new(z_channel(0.3).unwrap(), FrameLayout::new(8, 3).unwrap(), comp(&[2, 2]), 2, 300, 9);
        let a = monte_carlo(&noisy).unwrap();
        assert!(a.frame_errors > 0);
        assert_eq!(a, monte_carlo(&noisy).unwrap());
        assert_ne!(a, monte_carlo(&MonteCarloConfig { seed: 10, ..noisy.clone() }).unwrap());
        assert!(monte_carlo(&MonteCarloConfig { trials: 0, ..cfg }).is_err());
    }

    #[test]
    fn viterbi_equals_brute_force() {
        let layout = FrameLayout::new(4, 3).unwrap();
        let dmc = z_channel(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tuples = all_tuples(&layout, 2);
        for frame in 0..200 {
            let cb = generate_codebook(&mut rng, 2, &comp(&[1, 1]), 2).unwrap();
            let (m1, m2) = &tuples[frame % tuples.len()];
            let x = encode_frame(m1, m2, &cb, &cb, &layout).unwrap();
            let z = simulate_channel(&x, &dmc, &mut rng).unwrap();
            // score every admissible path on the direct encoder output
            let scored: Vec<(Vec<usize>, f64)> = tuples
                .iter()
                .map(|(a, b)| {
                    let y = encode_frame(a, b, &cb, &cb, &layout).unwrap();
                    let ll: f64 = y.iter().zip(&z).map(|(&xx, &zz)| dmc.w(zz, xx).log2()).sum();
                    (interleave(a, b), ll)
                })
                .collect();
            let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            let ml = scored.iter().filter(|s| s.1 >= best - 1e-9).map(|s| s.0.clone()).min().unwrap();
            assert_eq!(viterbi_decode(&z, &trellis_view(&cb), &dmc, &layout).unwrap(), ml);
        }
    }

    #[test]
    fn messages_rounding() {
        assert_eq!(messages_for_rate(16, 0.1).unwrap(), 3);
        assert_eq!(messages_for_rate(32, 0.1).unwrap(), 9);
        assert_eq!(messages_for_rate(8, 0.0).unwrap(), 1);
        assert!(messages_for_rate(8, -1.0).is_err());
    }
}
