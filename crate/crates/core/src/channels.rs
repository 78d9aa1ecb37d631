//! Single-user DMCs, binary combining operations, and the virtual two-user
//! MAC `W(z|x,y) = W(z | x (+) y)` they induce.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_of, Axis, Dist, JointDist, TypeVector};

/// Row-stochastic matrix `W(z|x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dmc {
    rows: Vec<Dist>,
    outputs: usize,
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = rows.first().map(Vec::len).unwrap_or(0);
        if outputs == 0 {
            return Err(Error::InvalidDistribution("channel needs at least one input and output".into()));
        }
        let rows = rows
            .into_iter()
            .map(|r| {
                if r.len() != outputs {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{outputs} outputs per row"),
                        found: format!("{}", r.len()),
                    });
                }
                Dist::new(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dmc { rows, outputs })
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, x: usize) -> &Dist {
        &self.rows[x]
    }

    pub fn w(&self, z: usize, x: usize) -> f64 {
        self.rows[x][z]
    }

    pub fn identity(size: usize) -> Self {
        Dmc { rows: (0..size).map(|x| Dist::point_mass(size, x)).collect(), outputs: size }
    }

    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange { what: "crossover probability", value: p });
        }
        Dmc::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Output distribution for input distribution `p`.
    pub fn output_dist(&self, p: &Dist) -> Vec<f64> {
        let mut q = vec![0.0; self.outputs];
        for (x, row) in self.rows.iter().enumerate() {
            for (z, &w) in row.probs().iter().enumerate() {
                q[z] += p[x] * w;
            }
        }
        q
    }

    /// `I(p, W)` in bits.
    pub fn mutual_information(&self, p: &Dist) -> f64 {
        let h_z = entropy_of(&self.output_dist(p));
        let h_z_x: f64 = self.rows.iter().enumerate().map(|(x, r)| p[x] * r.entropy()).sum();
        (h_z - h_z_x).max(0.0)
    }

    /// Capacity and a capacity-achieving input, by Blahut-Arimoto iteration
    /// until the upper and lower capacity bounds are within `tol`.
    pub fn capacity(&self, tol: f64) -> (f64, Dist) {
        let nx = self.inputs();
        let mut p = vec![1.0 / nx as f64; nx];
        let mut lower = 0.0;
        for _ in 0..100_000 {
            let q = self.output_dist(&Dist::from_weights(p.clone()));
            // c[x] = exp2(D(W(.|x) || q))
            let d: Vec<f64> = self
                .rows
                .iter()
                .map(|r| crate::prob::kl_of(r.probs(), &q))
                .collect();
            let weighted: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di.exp2()).sum();
            lower = weighted.log2();
            let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if upper - lower < tol {
                break;
            }
            for (pi, di) in p.iter_mut().zip(&d) {
                *pi *= di.exp2() / weighted;
            }
        }
        (lower.max(0.0), Dist::from_weights(p))
    }
}

/// Z-channel: `0` is received noiselessly, `1` flips to `0` with probability `p_flip`.
pub fn z_channel(p_flip: f64) -> Result<Dmc> {
    if !(0.0..=1.0).contains(&p_flip) {
        return Err(Error::OutOfRange { what: "Z-channel flip probability", value: p_flip });
    }
    Dmc::new(vec![vec![1.0, 0.0], vec![p_flip, 1.0 - p_flip]])
}

/// Total function `X1 x X2 -> X` given by a table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryOp {
    left: usize,
    right: usize,
    out: usize,
    table: Vec<usize>,
}

impl BinaryOp {
    /// `table[a][b]` is `a (+) b`, valued in `0..out`.
    pub fn from_table(table: Vec<Vec<usize>>, out: usize) -> Result<Self> {
        let left = table.len();
        let right = table.first().map(Vec::len).unwrap_or(0);
        if left == 0 || right == 0 || table.iter().any(|r| r.len() != right) {
            return Err(Error::ShapeMismatch {
                expected: "nonempty rectangular table".into(),
                found: format!("{left} rows"),
            });
        }
        let flat: Vec<usize> = table.into_iter().flatten().collect();
        if let Some(&bad) = flat.iter().find(|&&v| v >= out) {
            return Err(Error::OutOfRange { what: "operation value", value: bad as f64 });
        }
        Ok(BinaryOp { left, right, out, table: flat })
    }

    /// Bitwise XOR on `0..size`; `size` must be a power of two.
    pub fn xor(size: usize) -> Result<Self> {
        if size == 0 || !size.is_power_of_two() {
            return Err(Error::AlphabetMismatch(format!("xor needs a power-of-two alphabet, got {size}")));
        }
        let table = (0..size).map(|a| (0..size).map(|b| a ^ b).collect()).collect();
        BinaryOp::from_table(table, size)
    }

    pub fn first_projection(left: usize, right: usize) -> Self {
        BinaryOp { left, right, out: left, table: (0..left).flat_map(|a| std::iter::repeat_n(a, right)).collect() }
    }

    pub fn apply(&self, a: usize, b: usize) -> usize {
        self.table[a * self.right + b]
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn out(&self) -> usize {
        self.out
    }

    pub fn is_xor(&self) -> bool {
        self.left == self.right
            && self.left == self.out
            && (0..self.left).all(|a| (0..self.right).all(|b| self.apply(a, b) == a ^ b))
    }
}

/// Two-input channel `W(z|x,y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacChannel {
    nx: usize,
    ny: usize,
    nz: usize,
    rows: Vec<Dist>,
}

impl MacChannel {
    /// `rows[x * ny + y]` is the output distribution for inputs `(x, y)`.
    pub fn new(nx: usize, ny: usize, rows: Vec<Dist>) -> Result<Self> {
        let nz = rows.first().map(Dist::len).unwrap_or(0);
        if rows.len() != nx * ny || nz == 0 || rows.iter().any(|r| r.len() != nz) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows of equal length", nx * ny),
                found: format!("{}", rows.len()),
            });
        }
        Ok(MacChannel { nx, ny, nz, rows })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn row(&self, x: usize, y: usize) -> &Dist {
        &self.rows[x * self.ny + y]
    }

    pub fn w(&self, z: usize, x: usize, y: usize) -> f64 {
        self.row(x, y)[z]
    }

    /// `I(X,Y ; Z)` with `X` and `Y` independent, both distributed as `p`.
    pub fn sum_rate_iid(&self, p: &Dist) -> f64 {
        let mut q = vec![0.0; self.nz];
        let mut h_cond = 0.0;
        for x in 0..self.nx {
            for y in 0..self.ny {
                let pxy = p[x] * p[y];
                let row = self.row(x, y);
                h_cond += pxy * row.entropy();
                for (z, &w) in row.probs().iter().enumerate() {
                    q[z] += pxy * w;
                }
            }
        }
        (entropy_of(&q) - h_cond).max(0.0)
    }
}

/// `W_mac(z|x,y) = W(z | op(x,y))`.
pub fn virtual_mac(dmc: &Dmc, op: &BinaryOp) -> Result<MacChannel> {
    if op.out() != dmc.inputs() {
        return Err(Error::AlphabetMismatch(format!(
            "operation outputs {} symbols, channel takes {}",
            op.out(),
            dmc.inputs()
        )));
    }
    let rows = (0..op.left())
        .flat_map(|x| (0..op.right()).map(move |y| (x, y)))
        .map(|(x, y)| dmc.row(op.apply(x, y)).clone())
        .collect();
    MacChannel::new(op.left(), op.right(), rows)
}

/// `P(x,y,z) = W(z|x,y) p1(x) p2(y)` over axes `[X, Y, Z]`.
pub fn compose_joint(mac: &MacChannel, p1: &Dist, p2: &Dist) -> Result<JointDist> {
    if p1.len() != mac.nx() || p2.len() != mac.ny() {
        return Err(Error::ShapeMismatch {
            expected: format!("inputs of size {} and {}", mac.nx(), mac.ny()),
            found: format!("{} and {}", p1.len(), p2.len()),
        });
    }
    let mut probs = Vec::with_capacity(mac.nx() * mac.ny() * mac.nz());
    for x in 0..mac.nx() {
        for y in 0..mac.ny() {
            for &w in mac.row(x, y).probs() {
                probs.push(w * p1[x] * p2[y]);
            }
        }
    }
    Ok(JointDist::from_weights(
        vec![Axis::X, Axis::Y, Axis::Z],
        vec![mac.nx(), mac.ny(), mac.nz()],
        probs,
    ))
}

const CAPACITY_GRID_STEP: f64 = 1e-4;

/// Input distribution `P` maximizing `I(X,Y ; Z)` with `X, Y` i.i.d. `P`.
///
/// Binary alphabets use a scan at step `1e-4` followed by golden-section
/// refinement of the bracket around the first (smallest `P(0)`) maximizer.
/// Larger alphabets use exponentiated-gradient ascent with restarts. When
/// the objective is flat to within `tol` the uniform input is returned.
pub fn symmetric_capacity_input(mac: &MacChannel, tol: f64) -> Result<Dist> {
    if mac.nx() != mac.ny() {
        return Err(Error::AlphabetMismatch(format!(
            "input alphabets differ: {} vs {}",
            mac.nx(),
            mac.ny()
        )));
    }
    if mac.nx() == 1 {
        return Ok(Dist::uniform(1));
    }
    if mac.nx() == 2 {
        let f = |p0: f64| mac.sum_rate_iid(&Dist::binary(1.0 - p0).expect("p0 in [0,1]"));
        let p0 = binary_argmax(f, tol);
        return match p0 {
            Some(p0) => Dist::binary(1.0 - p0),
            None => Ok(Dist::uniform(2)),
        };
    }
    Ok(simplex_ascent(mac.nx(), |p| mac.sum_rate_iid(p), tol, 0x5eed))
}

/// Maximizer of `f` over `p0 in [0,1]`: grid scan then golden-section.
/// Returns `None` when `f` is flat to within `tol` on the grid.
pub(crate) fn binary_argmax(f: impl Fn(f64) -> f64, tol: f64) -> Option<f64> {
    let steps = (1.0 / CAPACITY_GRID_STEP).round() as usize;
    let values: Vec<f64> = (0..=steps).map(|i| f(i as f64 / steps as f64)).collect();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min <= tol {
        return None;
    }
    let best = values.iter().position(|&v| v >= max - 4.0 * f64::EPSILON * max.abs()).unwrap_or(0);
    let lo = best.saturating_sub(1) as f64 / steps as f64;
    let hi = (best + 1).min(steps) as f64 / steps as f64;
    let x = golden_max(&f, lo, hi, tol.min(1e-12));
    Some(if f(x) >= values[best] { x } else { best as f64 / steps as f64 })
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    (lo + hi) / 2.0
}

/// Exponentiated-gradient ascent over the simplex with 16 starts (uniform
/// plus seeded random points), gradients by central differences.
pub(crate) fn simplex_ascent(n: usize, f: impl Fn(&Dist) -> f64, tol: f64, seed: u64) -> Dist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |p: &[f64]| f(&Dist::from_weights(p.to_vec()));
    let mut best = (eval(&vec![1.0 / n as f64; n]), vec![1.0 / n as f64; n]);
    let flat_probe = best.0;
    let mut any_diff = false;
    for restart in 0..16 {
        let mut p: Vec<f64> = if restart == 0 {
            vec![1.0 / n as f64; n]
        } else {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        };
        let mut val = eval(&p);
        let mut step = 1.0;
        for _ in 0..5000 {
            let h = 1e-7;
            let grad: Vec<f64> = (0..n)
                .map(|i| {
                    let mut up = p.clone();
                    up[i] += h;
                    let mut dn = p.clone();
                    dn[i] = (dn[i] - h).max(0.0);
                    (eval(&up) - eval(&dn)) / (up[i] - dn[i])
                })
                .collect();
            let mut improved = false;
            while step > 1e-12 {
                let mut cand: Vec<f64> = p.iter().zip(&grad).map(|(pi, gi)| pi * (step * gi).exp()).collect();
                let s: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|c| *c = (*c / s).max(1e-300));
                let cv = eval(&cand);
                if cv > val {
                    let gain = cv - val;
                    p = cand;
                    val = cv;
                    step *= 2.0;
                    improved = gain > tol * 1e-3;
                    break;
                }
                step /= 2.0;
            }
            if !improved {
                break;
            }
        }
        if (val - flat_probe).abs() > tol {
            any_diff = true;
        }
        if val > best.0 + 1e-13 {
            best = (val, p);
        }
    }
    if !any_diff {
        return Dist::uniform(n);
    }
    Dist::from_weights(best.1)
}

/// Rounds `p` to a type with denominator `k` by largest-remainder apportionment.
/// Ties in the remainder go to the lower symbol index.
pub fn quantize_type(p: &Dist, k: u32) -> Result<TypeVector> {
    let scaled: Vec<f64> = p.probs().iter().map(|&x| x * k as f64).collect();
    let mut counts: Vec<u32> = scaled.iter().map(|x| x.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take((k - assigned) as usize) {
        counts[i] += 1;
    }
    TypeVector::new(vec![p.len()], counts)
}

/// A parsed channel description: the DMC plus an optional combining operation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    pub dmc: Dmc,
    pub op: Option<BinaryOp>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    input_alphabet: usize,
    output_alphabet: usize,
    rows: Vec<f64>,
    #[serde(default)]
    op: Option<OpDoc>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OpDoc {
    Name(String),
    Table(Vec<Vec<usize>>),
}

/// Row-sum tolerance accepted in channel documents; rows are rescaled to
/// unit mass after validation.
pub const SPEC_ROW_TOL: f64 = 1e-9;

/// Parses `z:<p>`, `bsc:<p>`, `id:<n>` shorthands or a JSON channel document
/// with fields `input_alphabet`, `output_alphabet`, `rows` (row-major) and an
/// optional `op` (`"xor"` or a table).
pub fn parse_channel_spec(text: &str) -> Result<ChannelSpec> {
    let t = text.trim();
    let shorthand = |field: &str, v: &str| -> Result<f64> {
        v.trim().parse::<f64>().map_err(|e| Error::Parse { field: field.into(), reason: e.to_string() })
    };
    if let Some(v) = t.strip_prefix("z:") {
        return Ok(ChannelSpec { dmc: z_channel(shorthand("z", v)?)?, op: None });
    }
    if let Some(v) = t.strip_prefix("bsc:") {
        return Ok(ChannelSpec { dmc: Dmc::bsc(shorthand("bsc", v)?)?, op: None });
    }
    if let Some(v) = t.strip_prefix("id:") {
        let n = shorthand("id", v)?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(Error::Parse { field: "id".into(), reason: format!("alphabet size {n}") });
        }
        return Ok(ChannelSpec { dmc: Dmc::identity(n as usize), op: None });
    }
    let doc: ChannelDoc = serde_json::from_str(t).map_err(|e| Error::Parse {
        field: format!("document (line {}, column {})", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    if doc.input_alphabet == 0 || doc.output_alphabet == 0 {
        return Err(Error::Parse { field: "input_alphabet".into(), reason: "alphabets must be nonempty".into() });
    }
    if doc.rows.len() != doc.input_alphabet * doc.output_alphabet {
        return Err(Error::Parse {
            field: "rows".into(),
            reason: format!(
                "expected {} entries, found {}",
                doc.input_alphabet * doc.output_alphabet,
                doc.rows.len()
            ),
        });
    }
    let mut rows = Vec::with_capacity(doc.input_alphabet);
    for (x, chunk) in doc.rows.chunks(doc.output_alphabet).enumerate() {
        let field = format!("rows[{x}]");
        if chunk.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parse { field, reason: "entries must be nonnegative".into() });
        }
        let s: f64 = chunk.iter().sum();
        if (s - 1.0).abs() > SPEC_ROW_TOL {
            return Err(Error::Parse { field, reason: format!("row sums to {s}") });
        }
        rows.push(chunk.iter().map(|v| v / s).collect());
    }
    let dmc = Dmc::new(rows)?;
    let op = match doc.op {
        None => None,
        Some(o) => Some(parse_op_doc(o, dmc.inputs())?),
    };
    Ok(ChannelSpec { dmc, op })
}

fn parse_op_doc(o: OpDoc, out: usize) -> Result<BinaryOp> {
    match o {
        OpDoc::Name(n) if n == "xor" => BinaryOp::xor(out),
        OpDoc::Name(n) => Err(Error::Parse { field: "op".into(), reason: format!("unknown operation {n:?}") }),
        OpDoc::Table(t) => BinaryOp::from_table(t, out)
            .map_err(|e| Error::Parse { field: "op".into(), reason: e.to_string() }),
    }
}

/// Parses an operation given on its own: `xor` or a JSON table.
pub fn parse_op(text: &str, out: usize) -> Result<BinaryOp> {
    let t = text.trim();
    if t == "xor" {
        return BinaryOp::xor(out);
    }
    let table: Vec<Vec<usize>> = serde_json::from_str(t)
        .map_err(|e| Error::Parse { field: "op".into(), reason: e.to_string() })?;
    parse_op_doc(OpDoc::Table(table), out)
}
