//! Library half of the `exponent` binary: argument definitions, command
//! implementations and output rendering. Every command returns its full
//! output as a string so that runs are easy to compare byte for byte.

pub mod error;
pub mod grid;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use exponent_core::async_exp::{
    async_exponent_composed, OracleGrid, SolverConfig, comparison_curve, zero_rate_threshold, CompareOptions, Comparison,
};
use exponent_core::channels::{
    compose_joint, parse_channel_spec, parse_op, quantize_type, symmetric_capacity_input, virtual_mac, BinaryOp,
    ChannelSpec, MacChannel,
};
use exponent_core::gallager::{trellis_exponent_mode, InputMode};
use exponent_core::packing::{verify_lemma, verify_lemma_exact, LemmaConfig, LemmaReport, DEFAULT_CAP};
use exponent_core::prob::{Dist, TypeVector};
use exponent_core::trellis::{messages_for_rate, monte_carlo, ErrorStats, FrameLayout, MonteCarloConfig};
use exponent_core::Error;

pub use error::CliError;
use grid::{parse_grid, parse_list};
use output::{to_json, Cell, Format, Table};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "EXPONENT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "exponent", version, about = "Error exponents, trellis simulation and packing checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice of the command.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trellis exponent a * E0(rho*) over a rate grid.
    Gallager(GallagerArgs),
    /// Asynchronous multiple-access random coding exponent over a rate grid.
    Async(AsyncArgs),
    /// Memory-1 trellis exponent against the scaled asynchronous exponent.
    Compare(CompareArgs),
    /// Monte Carlo frame and message error rates of the trellis code.
    Simulate(SimulateArgs),
    /// Cell-by-cell check of the packing bound over random shared codebooks.
    VerifyPacking(PackingArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputArg {
    Fixed,
    Optimized,
}

#[derive(Args, Debug)]
pub struct GallagerArgs {
    /// Channel: `z:<p>`, `bsc:<p>`, `id:<n>`, inline JSON or a JSON file.
    #[arg(long)]
    pub channel: String,
    /// Rate grid `start:step:stop` (inclusive), bits per channel use.
    #[arg(long)]
    pub rates: String,
    #[arg(long, default_value_t = 1)]
    pub memory: u32,
    #[arg(long, value_enum, default_value_t = InputArg::Optimized)]
    pub input: InputArg,
    /// Input distribution for `--input fixed` (comma separated); uniform if absent.
    #[arg(long)]
    pub input_dist: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
    /// Input distribution P* (comma separated); the symmetric sum-rate maximizer if absent.
    #[arg(long)]
    pub p_star: Option<String>,
}

#[derive(Args, Debug)]
pub struct AsyncArgs {
    #[arg(long)]
    pub channel: String,
    /// Combining operation: `xor` or a JSON table; overrides the channel document.
    #[arg(long)]
    pub op: Option<String>,
    /// Frame length K (odd, at least 3).
    #[arg(long, default_value_t = 3)]
    pub slots: u32,
    /// MAC rate grid `start:step:stop` (inclusive).
    #[arg(long)]
    pub rates: String,
    /// Append the grid-oracle bracket (binary alphabets only).
    #[arg(long)]
    pub oracle: bool,
    /// Oracle grid denominator (step 1/N).
    #[arg(long, default_value_t = 32)]
    pub oracle_denominator: u32,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub channel: String,
    #[arg(long)]
    pub op: Option<String>,
    #[arg(long, default_value_t = 9)]
    pub slots: u32,
    /// MAC rate grid; plotted rates are twice these.
    #[arg(long)]
    pub rates: String,
    #[arg(long, value_enum, default_value_t = InputArg::Optimized)]
    pub input: InputArg,
    /// Scale plotted rates by 1 - 1/K for the synch words.
    #[arg(long)]
    pub synch_overhead: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub channel: String,
    /// Operation defining the virtual MAC whose P* sets the codeword type.
    #[arg(long)]
    pub op: Option<String>,
    /// Half-block length; codewords have length n = 2k.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub slots: usize,
    /// Target rate per symbol; M = round(2^(nR)).
    #[arg(long, default_value_t = 0.1, conflicts_with = "messages")]
    pub rate: f64,
    /// Codebook size M, overriding `--rate`.
    #[arg(long)]
    pub messages: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Half-codeword type counts (comma separated, summing to k).
    #[arg(long)]
    pub comp: Option<String>,
    /// Frames per freshly drawn codebook.
    #[arg(long, default_value_t = 100)]
    pub batch: u64,
    /// Draw separate codebooks for the two streams.
    #[arg(long)]
    pub independent: bool,
    /// Include wall-clock time (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PackingArgs {
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub slots: usize,
    #[arg(long, default_value_t = 2)]
    pub messages: usize,
    /// Codebooks to sample.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Exponent of the polynomial factor (n+1)^s.
    #[arg(long, default_value_t = 8)]
    pub slack_exp: u32,
    /// Half-codeword type counts; balanced binary if absent.
    #[arg(long)]
    pub comp: Option<String>,
    /// Enumeration cap on tuples (and codebooks with `--exact`).
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u128,
    /// Average over every codebook of the ensemble instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub common: Common,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Gallager(a) => &a.common,
            Command::Async(a) => &a.common,
            Command::Compare(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::VerifyPacking(a) => &a.common,
        }
    }
}

/// Runs the command, writing to `--out` or returning the text for stdout.
pub fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    let text = render(&cli.command)?;
    match &cli.command.common().out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

/// Output of the command as it would be written.
pub fn render(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Gallager(a) => cmd_gallager(a),
        Command::Async(a) => cmd_async(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::VerifyPacking(a) => cmd_verify_packing(a),
    }
}

/// Inline spec, or the contents of the named file when one exists.
pub fn load_channel(arg: &str) -> Result<ChannelSpec, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: arg.to_string(), source })?;
        return Ok(parse_channel_spec(&text)?);
    }
    Ok(parse_channel_spec(arg)?)
}

fn resolve_op(spec: &ChannelSpec, op: &Option<String>) -> Result<BinaryOp, CliError> {
    let out = spec.dmc.inputs();
    Ok(match (op, &spec.op) {
        (Some(text), _) => parse_op(text, out)?,
        (None, Some(op)) => op.clone(),
        (None, None) => BinaryOp::xor(out)?,
    })
}

fn parse_dist(field: &'static str, text: &str) -> Result<Dist, CliError> {
    Ok(Dist::new(parse_list::<f64>(field, text)?)?)
}

fn p_star(mac: &MacChannel, arg: &Option<String>) -> Result<Dist, CliError> {
    match arg {
        Some(t) => parse_dist("p-star", t),
        None => Ok(symmetric_capacity_input(mac, 1e-12)?),
    }
}

fn solver_config(args: &SolverArgs, seed: Option<u64>) -> SolverConfig {
    let d = SolverConfig::default();
    SolverConfig { restarts: args.restarts, max_iter: args.max_iter, seed: seed.unwrap_or(d.seed), ..d }
}

fn input_mode(arg: InputArg, dist: &Option<String>, inputs: usize) -> Result<InputMode, CliError> {
    Ok(match (arg, dist) {
        (InputArg::Optimized, None) => InputMode::Optimized,
        (InputArg::Optimized, Some(_)) => {
            return Err(CliError::Usage("--input-dist requires --input fixed".into()));
        }
        (InputArg::Fixed, None) => InputMode::Fixed(Dist::uniform(inputs)),
        (InputArg::Fixed, Some(t)) => InputMode::Fixed(parse_dist("input-dist", t)?),
    })
}

fn mode_name(arg: InputArg) -> &'static str {
    match arg {
        InputArg::Fixed => "fixed",
        InputArg::Optimized => "optimized",
    }
}

#[derive(Serialize)]
struct GallagerRow {
    rate: f64,
    rho_star: f64,
    exponent: f64,
    input_dist: Vec<f64>,
}

#[derive(Serialize)]
struct GallagerDoc<'a> {
    command: &'static str,
    channel: &'a str,
    memory: u32,
    input: &'static str,
    capacity: f64,
    rows: Vec<GallagerRow>,
}

pub fn cmd_gallager(a: &GallagerArgs) -> Result<String, CliError> {
    let spec = load_channel(&a.channel)?;
    let rates = parse_grid(&a.rates)?;
    let mode = input_mode(a.input, &a.input_dist, spec.dmc.inputs())?;
    let rows = rates
        .iter()
        .map(|&r| {
            let p = trellis_exponent_mode(r, a.memory, &mode, &spec.dmc)?;
            Ok(GallagerRow { rate: r, rho_star: p.rho_star, exponent: p.exponent, input_dist: p.input.probs().to_vec() })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&GallagerDoc {
            command: "gallager",
            channel: &a.channel,
            memory: a.memory,
            input: mode_name(a.input),
            capacity: spec.dmc.capacity(1e-13).0,
            rows,
        }),
        Format::Csv => {
            let mut header = vec!["rate".to_string(), "rho_star".into(), "exponent".into()];
            header.extend((0..spec.dmc.inputs()).map(|x| format!("input_dist_{x}")));
            let mut t = Table::new(header);
            for r in rows {
                let mut row = vec![Cell::from(r.rate), r.rho_star.into(), r.exponent.into()];
                row.extend(r.input_dist.iter().map(|&p| Cell::from(p)));
                t.push(row);
            }
            Ok(t.render())
        }
    }
}

#[derive(Serialize)]
struct AsyncRow {
    rate: f64,
    exponent: f64,
    l_star: Option<u32>,
    /// `active`, `clipped` or `not-converged`.
    branch: String,
    solver_residual: f64,
    per_l: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_lower: Option<f64>,
}

#[derive(Serialize)]
struct AsyncDoc<'a> {
    command: &'static str,
    channel: &'a str,
    slots: u32,
    p_star: Vec<f64>,
    zero_rate_threshold: f64,
    rows: Vec<AsyncRow>,
}

pub fn cmd_async(a: &AsyncArgs) -> Result<String, CliError> {
    let spec = load_channel(&a.channel)?;
    let rates = parse_grid(&a.rates)?;
    let op = resolve_op(&spec, &a.op)?;
    let mac = virtual_mac(&spec.dmc, &op)?;
    let p = p_star(&mac, &a.solver.p_star)?;
    let composed = compose_joint(&mac, &p, &p)?;
    let (threshold, _) = zero_rate_threshold(a.slots, &composed)?;
    let cfg = solver_config(&a.solver, a.common.seed);
    let grid = if a.oracle { Some(OracleGrid::new(&composed, a.oracle_denominator)?) } else { None };
    let mut rows = Vec::with_capacity(rates.len());
    for &r in &rates {
        let mut row = match async_exponent_composed(r, a.slots, &p, &composed, &cfg) {
            Ok(res) => AsyncRow {
                rate: r,
                exponent: res.exponent,
                l_star: Some(res.l_star),
                branch: res.branch.to_string(),
                solver_residual: res.residual,
                per_l: res.per_l,
                oracle: None,
                oracle_lower: None,
            },
            // flagged and kept, the remaining rates still run
            Err(Error::NotConverged { best, residual }) => AsyncRow {
                rate: r,
                exponent: best,
                l_star: None,
                branch: "not-converged".into(),
                solver_residual: residual,
                per_l: Vec::new(),
                oracle: None,
                oracle_lower: None,
            },
            Err(e) => return Err(e.into()),
        };
        if let Some(g) = &grid {
            let per_l = (1..=a.slots).map(|l| g.minimize(l, r)).collect::<Result<Vec<_>, Error>>()?;
            row.oracle = per_l.iter().map(|o| o.value).reduce(f64::min);
            row.oracle_lower = per_l.iter().map(|o| o.value - o.slack).reduce(f64::min);
        }
        rows.push(row);
    }
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&AsyncDoc {
            command: "async",
            channel: &a.channel,
            slots: a.slots,
            p_star: p.probs().to_vec(),
            zero_rate_threshold: threshold,
            rows,
        }),
        Format::Csv => {
            let mut header: Vec<String> =
                ["rate", "exponent", "l_star", "branch", "solver_residual"].iter().map(|s| s.to_string()).collect();
            header.extend((1..=a.slots).map(|l| format!("exponent_l{l}")));
            if a.oracle {
                header.extend(["oracle".to_string(), "oracle_lower".into()]);
            }
            let mut t = Table::new(header);
            for r in rows {
                let mut row = vec![
                    Cell::from(r.rate),
                    r.exponent.into(),
                    r.l_star.map_or(Cell::Empty, |l| Cell::Int(l as u64)),
                    r.branch.into(),
                    r.solver_residual.into(),
                ];
                row.extend((0..a.slots as usize).map(|i| r.per_l.get(i).map_or(Cell::Empty, |&v| Cell::Num(v))));
                if a.oracle {
                    row.push(r.oracle.map_or(Cell::Empty, Cell::Num));
                    row.push(r.oracle_lower.map_or(Cell::Empty, Cell::Num));
                }
                t.push(row);
            }
            t.comments.push(format!("p_star,{}", p.probs().iter().map(|&v| output::fmt_num(v)).collect::<Vec<_>>().join(",")));
            t.comments.push(format!("zero_rate_threshold,{}", output::fmt_num(threshold)));
            Ok(t.render())
        }
    }
}

#[derive(Serialize)]
struct CompareDoc<'a> {
    command: &'static str,
    channel: &'a str,
    slots: u32,
    input: &'static str,
    synch_overhead: bool,
    #[serde(flatten)]
    comparison: &'a Comparison,
}

pub fn cmd_compare(a: &CompareArgs) -> Result<String, CliError> {
    let spec = load_channel(&a.channel)?;
    let rates = parse_grid(&a.rates)?;
    let op = resolve_op(&spec, &a.op)?;
    let opts = CompareOptions {
        input_mode: input_mode(a.input, &None, spec.dmc.inputs())?,
        synch_overhead: a.synch_overhead,
        p_star: a.solver.p_star.as_deref().map(|t| parse_dist("p-star", t)).transpose()?,
        solver: solver_config(&a.solver, a.common.seed),
    };
    let cmp = comparison_curve(&spec.dmc, &op, a.slots, &rates, &opts)?;
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&CompareDoc {
            command: "compare",
            channel: &a.channel,
            slots: a.slots,
            input: mode_name(a.input),
            synch_overhead: a.synch_overhead,
            comparison: &cmp,
        }),
        Format::Csv => {
            let mut t = Table::new(["plotted_rate", "forney_memory1", "async_scaled", "mac_rate", "l_star", "branch", "solver_residual"]);
            for r in &cmp.rows {
                t.push(vec![
                    r.plotted_rate.into(),
                    r.forney_memory1.into(),
                    r.async_scaled.into(),
                    r.mac_rate.into(),
                    Cell::Int(r.l_star as u64),
                    Cell::Text(r.branch.to_string()),
                    r.residual.into(),
                ]);
            }
            let opt = |x: Option<f64>| x.map_or(String::new(), output::fmt_num);
            let s = &cmp.summary;
            t.comments.push(format!(
                "summary,low_rate_max_gap={},low_rate_max_gap_at={},high_rate_gap={},high_rate_gap_at={}",
                opt(s.low_rate_max_gap),
                opt(s.low_rate_max_gap_at),
                opt(s.high_rate_gap),
                opt(s.high_rate_gap_at)
            ));
            Ok(t.render())
        }
    }
}

#[derive(Serialize)]
struct SimulateDoc<'a> {
    command: &'static str,
    channel: &'a str,
    k: usize,
    n: usize,
    slots: usize,
    messages: usize,
    comp: Vec<u32>,
    seed: u64,
    batch: u64,
    shared_codebook: bool,
    #[serde(flatten)]
    stats: &'a ErrorStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

pub const DEFAULT_SEED: u64 = 1;

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let spec = load_channel(&a.channel)?;
    let layout = FrameLayout::new(2 * a.k, a.slots)?;
    let messages = match a.messages {
        Some(m) => m,
        None => messages_for_rate(layout.n(), a.rate)?,
    };
    let comp = match &a.comp {
        Some(t) => TypeVector::new(vec![spec.dmc.inputs()], parse_list("comp", t)?)?,
        None => {
            let mac = virtual_mac(&spec.dmc, &resolve_op(&spec, &a.op)?)?;
            quantize_type(&symmetric_capacity_input(&mac, 1e-12)?, a.k as u32)?
        }
    };
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let mut cfg = MonteCarloConfig::new(spec.dmc.clone(), layout, comp.clone(), messages, a.trials, seed);
    cfg.batch = a.batch;
    cfg.shared = !a.independent;
    let start = Instant::now();
    let stats = monte_carlo(&cfg)?;
    let wall = a.timing.then(|| start.elapsed().as_secs_f64());
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&SimulateDoc {
            command: "simulate",
            channel: &a.channel,
            k: a.k,
            n: layout.n(),
            slots: a.slots,
            messages,
            comp: comp.counts().to_vec(),
            seed,
            batch: a.batch,
            shared_codebook: !a.independent,
            stats: &stats,
            wall_time_s: wall,
        }),
        Format::Csv => {
            let mut header = vec![
                "k", "n", "slots", "messages", "trials", "frame_errors", "message_errors", "messages_sent",
                "frame_error_rate", "message_error_rate", "wilson_low", "wilson_high", "realized_rate",
            ];
            if wall.is_some() {
                header.push("wall_time_s");
            }
            let mut t = Table::new(header);
            let mut row = vec![
                Cell::Int(a.k as u64),
                Cell::Int(layout.n() as u64),
                Cell::Int(a.slots as u64),
                Cell::Int(messages as u64),
                stats.trials.into(),
                stats.frame_errors.into(),
                stats.message_errors.into(),
                stats.messages_sent.into(),
                stats.frame_error_rate.into(),
                stats.message_error_rate.into(),
                stats.wilson_interval.0.into(),
                stats.wilson_interval.1.into(),
                stats.realized_rate.into(),
            ];
            if let Some(w) = wall {
                row.push(w.into());
            }
            t.push(row);
            Ok(t.render())
        }
    }
}

pub fn packing_config(a: &PackingArgs) -> Result<LemmaConfig, CliError> {
    let comp = match &a.comp {
        Some(t) => TypeVector::new(vec![2], parse_list("comp", t)?)?,
        None => {
            let zeros = (a.k as u32).div_ceil(2);
            TypeVector::new(vec![2], vec![zeros, a.k as u32 - zeros])?
        }
    };
    Ok(LemmaConfig {
        k: a.k,
        slots: a.slots,
        messages: a.messages,
        comp,
        trials: a.trials,
        slack_exp: a.slack_exp,
        seed: a.common.seed.unwrap_or(DEFAULT_SEED),
        cap: a.cap,
    })
}

pub fn cmd_verify_packing(a: &PackingArgs) -> Result<String, CliError> {
    let cfg = packing_config(a)?;
    let report: LemmaReport = if a.exact { verify_lemma_exact(&cfg)? } else { verify_lemma(&cfg)? };
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut t = Table::new([
                "s1", "s2", "s12", "types", "mean_lhs", "max_lhs", "rhs", "rhs_log2", "trial_pass_fraction", "mean_ok",
                "self_overlap",
            ]);
            let set = |s: &[usize]| s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            for c in &report.cells {
                let types = c
                    .types
                    .iter()
                    .map(|t| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("|");
                t.push(vec![
                    Cell::Text(set(&c.pattern.s1)),
                    Cell::Text(set(&c.pattern.s2)),
                    Cell::Text(set(&c.pattern.s12)),
                    Cell::Text(types),
                    c.mean_lhs.into(),
                    c.max_lhs.into(),
                    c.rhs.into(),
                    c.rhs_log2.into(),
                    c.trial_pass_fraction.into(),
                    Cell::Text(c.mean_ok.to_string()),
                    Cell::Text(c.self_overlap.to_string()),
                ]);
            }
            t.comments.push(format!(
                "summary,cells={},failing_cells={},mean_pass_fraction={},self_overlap_cells={},unresolved_cells={},delta_n={},rate={}",
                report.cells.len(),
                report.failing_cells,
                output::fmt_num(report.mean_pass_fraction),
                report.self_overlap_cells,
                report.unresolved_cells,
                output::fmt_num(report.delta_n),
                output::fmt_num(report.rate)
            ));
            for w in &report.warnings {
                t.comments.push(format!("warning,{w}"));
            }
            Ok(t.render())
        }
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}={v:?}: {e}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))
}
