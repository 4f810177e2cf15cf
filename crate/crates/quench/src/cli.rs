//! The `quench` command line.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when a
//! verification (bounds, locality, coupling implications, block-field
//! membership) finds a violation. Output is written in full before a
//! failing status is returned.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use quench_core::block_field::{BlockField, BlockProvenance, GoodnessSetup, Randomness};
use quench_core::bootstrap::{staged_closure, BootRule};
use quench_core::bounds::{self, BoundCheck};
use quench_core::coupling::{classify_block, CouplingParams, CouplingReport};
use quench_core::geometry::BlockLayout;
use quench_core::glauber::{Boundary, Dynamics};
use quench_core::rng::split_seed;
use quench_core::{Ratio, VertexSet};

use crate::config::{Settings, SEED_ENV};
use crate::estimation::{
    activity_profile, bootstrap_percolation_probability, fixation_probability, infected_set, replica_seeds, threshold_bisect,
    DynamicsConfig, Estimate, Outcome, PercolationConfig,
};
use crate::locality::{probe_goodness, probe_set, Probe};
use crate::omega::{check_blockfields, DEFAULT_LEVEL};
use crate::records::{Format, Sink};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "quench", version, about = "Zero-temperature Glauber dynamics and bootstrap percolation experiments")]
pub struct Cli {
    /// Settings file: `key = value` lines, or a record written by quench.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// json (one record per line) or csv.
    #[arg(long, global = true, default_value = "json")]
    pub format: String,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Report wall time on standard error.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the dynamics once and trace the magnetization.
    Simulate(Settings),
    /// Staged bootstrap closure of a random infected set.
    Bootstrap(Settings),
    /// Classify blocks through the two couplings.
    Couple(Settings),
    /// Estimate a probability over a grid of densities.
    Sweep(Settings),
    /// Locate the density where a probability crosses a target.
    Bisect(Settings),
    /// Check every closed-form bound on the default grid.
    VerifyBounds(Settings),
    /// Resampling test of a dependence radius.
    Locality(Settings),
    /// Sample block fields and test their block structure.
    Blocks(Settings),
}

impl Command {
    fn parts(&self) -> (&'static str, &Settings) {
        match self {
            Command::Simulate(s) => ("simulate", s),
            Command::Bootstrap(s) => ("bootstrap", s),
            Command::Couple(s) => ("couple", s),
            Command::Sweep(s) => ("sweep", s),
            Command::Bisect(s) => ("bisect", s),
            Command::VerifyBounds(s) => ("verify-bounds", s),
            Command::Locality(s) => ("locality", s),
            Command::Blocks(s) => ("blocks", s),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Diagnostics go to standard error.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&cli, env_seed.as_deref(), stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("quench: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli, env_seed: Option<&str>, stdout: &mut dyn Write) -> Result<(), Error> {
    let (name, flags) = cli.command.parts();
    let file = cli.config.as_deref().map(Settings::from_file).transpose()?;
    let settings = Settings::resolve(name, flags, file.as_ref(), env_seed)?;
    let format = Format::parse(&cli.format)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} workers: {e}", cli.jobs.unwrap_or(0))))?;
    let mut file_out;
    let out: &mut dyn Write = match &cli.output {
        Some(path) => {
            file_out = BufWriter::new(File::create(path).map_err(|e| Error::Usage(format!("cannot create {}: {e}", path.display())))?);
            &mut file_out
        }
        None => stdout,
    };
    let start = Instant::now();
    let mut buf = Vec::new();
    let result = pool.install(|| {
        let mut sink = Sink::new(&mut buf, format, settings.clone());
        dispatch(name, &settings, &mut sink)
    });
    out.write_all(&buf)?;
    out.flush()?;
    if cli.timing {
        eprintln!("quench: {name} took {:.3} s", start.elapsed().as_secs_f64());
    }
    result
}

fn dispatch(name: &str, s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    match name {
        "simulate" => simulate(s, sink),
        "bootstrap" => bootstrap(s, sink),
        "couple" => couple(s, sink),
        "sweep" => sweep(s, sink),
        "bisect" => bisect(s, sink),
        "verify-bounds" => verify_bounds(sink),
        "locality" => locality(s, sink),
        "blocks" => blocks(s, sink),
        _ => Err(Error::Usage(format!("unknown command {name:?}"))),
    }
}

fn req<T: Clone>(field: &Option<T>, name: &str) -> Result<T, Error> {
    Settings::require(field, name)
}

fn dynamics_config(s: &Settings, p: f64) -> Result<DynamicsConfig, Error> {
    Ok(DynamicsConfig {
        dim: req(&s.dim, "dim")?,
        side: req(&s.side, "side")?,
        boundary: s.boundary()?,
        p,
        alpha: req(&s.alpha, "alpha")?,
        max_t: req(&s.horizon, "horizon")?,
        seed: req(&s.seed, "seed")?,
    })
}

fn percolation_config(s: &Settings, p: f64) -> Result<PercolationConfig, Error> {
    let r: Ratio = req(&s.r, "r")?.parse()?;
    if r.denom() != 1 || r.is_negative() {
        return Err(Error::Usage(format!("percolation needs a whole threshold, got r = {r}")));
    }
    Ok(PercolationConfig {
        dim: req(&s.dim, "dim")?,
        side: req(&s.side, "side")?,
        wrap: s.boundary()? == Boundary::Periodic,
        r: r.numer() as usize,
        p,
        seed: req(&s.seed, "seed")?,
    })
}

fn coupling_params(s: &Settings) -> Result<CouplingParams, Error> {
    let mut params = CouplingParams::new(s.eps_ratio()?)?;
    if let Some(k) = s.k {
        params.k = k;
    }
    params.time_d = s.time_d;
    params.horizon = s.horizon;
    if let Some(a) = s.alpha {
        params.alpha = a;
    }
    Ok(params)
}

#[derive(Serialize)]
struct TracePoint {
    t: f64,
    magnetization: f64,
    flips: u64,
}

fn simulate(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let cfg = dynamics_config(s, req(&s.p, "p")?)?;
    let g = cfg.geometry()?;
    let run = cfg.run(&g, 0)?;
    let mut dynamics = Dynamics::new(&run)?;
    let points = req(&s.trace_points, "trace_points")?.max(1);
    let magnetization = |d: &Dynamics| d.spins().iter().map(|x| x.sign() as f64).sum::<f64>() / g.len() as f64;
    let mut flips = 0u64;
    let mut stable_at = None;
    let mut trace = vec![TracePoint { t: 0.0, magnetization: magnetization(&dynamics), flips: 0 }];
    for k in 1..=points {
        let t = cfg.max_t * k as f64 / points as f64;
        if stable_at.is_none() {
            stable_at = dynamics.advance_until_stable(t, |ring, _| flips += ring.flipped() as u64);
        }
        trace.push(TracePoint { t, magnetization: magnetization(&dynamics), flips });
    }
    if stable_at.is_none() && dynamics.is_stable() {
        stable_at = Some(dynamics.now());
    }
    let spins = dynamics.spins();
    let outcome = match stable_at {
        None => Outcome::Unstable,
        Some(_) if spins.iter().all(|x| x.is_plus()) => Outcome::PlusConsensus,
        Some(_) if spins.iter().all(|x| !x.is_plus()) => Outcome::MinusConsensus,
        Some(_) => Outcome::OtherStable,
    };
    sink.record(
        "simulate",
        &json!({
            "vertices": g.len(),
            "initial_plus": run.initial.plus_count(),
            "outcome": outcome,
            "stable_at": stable_at,
            "flips": flips,
            "final_magnetization": magnetization(&dynamics),
            "trace": trace,
        }),
    )?;
    sink.rows(&trace)
}

#[derive(Serialize)]
struct StageRow {
    stage: usize,
    threshold: String,
    required: usize,
    size: usize,
}

fn bootstrap(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let p = req(&s.p, "p")?;
    let dim = req(&s.dim, "dim")?;
    let side = req(&s.side, "side")?;
    let g = quench_core::Geometry::new(vec![side; dim], s.boundary()? == Boundary::Periodic)?;
    let rule = BootRule::new(req(&s.r, "r")?.parse()?, req(&s.k, "k")?, req(&s.m, "m")?.parse()?)?;
    let a = infected_set(&g, p, req(&s.seed, "seed")?, 0)?;
    let steps = req(&s.steps, "steps")?;
    let stages = staged_closure(&g, &a, rule, if steps == 0 { None } else { Some(steps) });
    let rows: Vec<StageRow> = (0..=stages.last_index())
        .map(|j| StageRow { stage: j, threshold: rule.threshold(j).to_string(), required: rule.required(j), size: stages.stage_size(j) })
        .collect();
    let last = stages.final_stage();
    sink.record(
        "bootstrap",
        &json!({
            "vertices": g.len(),
            "initial": a.len(),
            "final": last.len(),
            "percolates": last.len() == g.len(),
            "converged": stages.converged(),
            "stages": rows,
        }),
    )?;
    sink.rows(&rows)
}

fn set_json(set: &VertexSet, verbose: bool) -> Value {
    if verbose {
        json!(set.to_vec())
    } else {
        json!(set.len())
    }
}

fn coupling_json(replica: u64, c: &CouplingReport, verbose: bool) -> Value {
    json!({
        "replica": replica,
        "a_minus": set_json(&c.a_minus, verbose),
        "x": set_json(&c.x, verbose),
        "z": set_json(&c.z, verbose),
        "z40": set_json(&c.z40, verbose),
        "y": set_json(&c.y, verbose),
        "f": c.f,
        "early_settled": c.early_settled,
        "late_settled": c.late_settled,
        "f_prime": c.f_prime,
        "f_doubleprime": c.f_doubleprime,
        "inner_all_plus": c.inner_all_plus,
        "good": c.good,
        "stable_at": c.stable_at,
        "minus_at_horizon": c.minus_at_horizon,
        "time_d": c.time_d,
        "horizon": c.horizon,
        "early_implication_violated": c.early_implication_violated(),
        "late_implication_violated": c.late_implication_violated(),
    })
}

#[derive(Serialize)]
struct CouplingRow {
    replica: u64,
    a_minus: usize,
    x: usize,
    z: usize,
    z40: usize,
    y: usize,
    f: bool,
    f_prime: bool,
    f_doubleprime: bool,
    good: bool,
}

fn couple(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let d = req(&s.dim, "dim")?;
    let params = coupling_params(s)?;
    let layout = BlockLayout::tiled(d, req(&s.inner_side, "inner_side")?, req(&s.outer_side, "outer_side")?, &vec![0; d])?;
    let seed = req(&s.seed, "seed")?;
    let verbose = s.verbose_sets.unwrap_or(false);
    let reports: Vec<CouplingReport> = (0..req(&s.replicas, "replicas")?)
        .into_par_iter()
        .map(|i| {
            let (spin_seed, clock_seed) = replica_seeds(seed, i);
            let r = Randomness::new(params.p(), spin_seed, clock_seed)?;
            Ok(classify_block(&layout, &r.field_on(&layout.outer_block()), &r.clocks, &params)?)
        })
        .collect::<Result<_, Error>>()?;
    let mut rows = Vec::new();
    let mut violations = 0;
    for (i, c) in reports.iter().enumerate() {
        sink.record("coupling", &coupling_json(i as u64, c, verbose))?;
        violations += (c.early_implication_violated() || c.late_implication_violated() || !c.consistent()) as usize;
        rows.push(CouplingRow {
            replica: i as u64,
            a_minus: c.a_minus.len(),
            x: c.x.len(),
            z: c.z.len(),
            z40: c.z40.len(),
            y: c.y.len(),
            f: c.f,
            f_prime: c.f_prime,
            f_doubleprime: c.f_doubleprime,
            good: c.good,
        });
    }
    sink.rows(&rows)?;
    if violations > 0 {
        return Err(Error::Check(format!("{violations} coupled runs broke a deterministic implication")));
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateRow {
    p: f64,
    successes: u64,
    replicas: u64,
    point: f64,
    lower: f64,
    upper: f64,
}

impl EstimateRow {
    fn new(p: f64, e: &Estimate) -> Self {
        EstimateRow { p, successes: e.successes, replicas: e.replicas, point: e.point, lower: e.lower, upper: e.upper }
    }
}

#[derive(Serialize)]
struct ActivityRow {
    p: f64,
    statistic: &'static str,
    from: f64,
    to: f64,
    mean: f64,
    sem: f64,
}

/// The estimand of `s` at density `p`, with its full JSON result.
fn estimate_at(s: &Settings, p: f64) -> Result<(Estimate, Value), Error> {
    let replicas = req(&s.replicas, "replicas")?;
    match req(&s.estimand, "estimand")?.as_str() {
        "bootstrap" => {
            let e = bootstrap_percolation_probability(&percolation_config(s, p)?, replicas)?;
            Ok((e, json!({ "p": p, "estimate": e })))
        }
        "fixation" => {
            let f = fixation_probability(&dynamics_config(s, p)?, replicas)?;
            Ok((f.estimate, json!({ "p": p, "fixation": f })))
        }
        other => Err(Error::Usage(format!("{other} is not a probability estimand"))),
    }
}

fn sweep(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let grid = s.p_grid_values()?;
    if grid.is_empty() {
        return Err(Error::Usage("empty p grid".into()));
    }
    if s.estimand.as_deref() == Some("activity") {
        let windows = s.window_values()?;
        let times = s.time_values()?;
        let replicas = req(&s.replicas, "replicas")?;
        let mut rows = Vec::new();
        for &p in &grid {
            let prof = activity_profile(&dynamics_config(s, p)?, replicas, &windows, &times)?;
            sink.record("activity", &json!({ "p": p, "profile": prof }))?;
            for &(a, b, mean, sem) in &prof.windows {
                rows.push(ActivityRow { p, statistic: "window", from: a, to: b, mean, sem });
            }
            for &(t, mean, sem) in &prof.flipped_by {
                rows.push(ActivityRow { p, statistic: "flipped_by", from: 0.0, to: t, mean, sem });
            }
        }
        return sink.rows(&rows);
    }
    let mut rows = Vec::new();
    for &p in &grid {
        let (e, full) = estimate_at(s, p)?;
        sink.record("estimate", &full)?;
        rows.push(EstimateRow::new(p, &e));
    }
    sink.rows(&rows)
}

#[derive(Serialize)]
struct BisectRow {
    step: usize,
    lo: f64,
    hi: f64,
    p: f64,
    successes: u64,
    replicas: u64,
    point: f64,
}

fn bisect(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let b = threshold_bisect(|p| Ok(estimate_at(s, p)?.0), req(&s.target, "target")?, req(&s.tol, "tol")?, req(&s.lo, "lo")?, req(&s.hi, "hi")?)?;
    sink.record("bisect", &b)?;
    let rows: Vec<BisectRow> = b
        .trace
        .iter()
        .enumerate()
        .map(|(i, t)| BisectRow { step: i, lo: t.lo, hi: t.hi, p: t.p, successes: t.estimate.successes, replicas: t.estimate.replicas, point: t.estimate.point })
        .collect();
    sink.rows(&rows)
}

#[derive(Serialize)]
struct CheckRow {
    name: &'static str,
    params: String,
    exact: f64,
    bound: f64,
    in_domain: bool,
    holds: bool,
    chain_holds: bool,
}

fn check_row(c: &BoundCheck) -> CheckRow {
    let params = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
    CheckRow { name: c.name, params, exact: c.exact, bound: c.bound, in_domain: c.in_domain, holds: c.holds, chain_holds: c.chain_holds() }
}

fn verify_bounds(sink: &mut Sink) -> Result<(), Error> {
    let grid = bounds::verification_grid();
    let mut failures = 0usize;
    let mut rows = Vec::with_capacity(grid.len());
    for c in &grid {
        let ok = !c.in_domain || (c.holds && c.chain_holds());
        failures += !ok as usize;
        let chain: Vec<Value> = c.chain.iter().map(|(k, v)| json!([k, v])).collect();
        let params: serde_json::Map<String, Value> = c.params.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        sink.record(
            "bound_check",
            &json!({
                "name": c.name, "params": params, "exact": c.exact, "bound": c.bound,
                "ln_exact": c.ln_exact, "ln_bound": c.ln_bound, "chain_ln": chain,
                "in_domain": c.in_domain, "holds": c.holds,
            }),
        )?;
        rows.push(check_row(c));
    }
    // Printed for reference only: vacuous at small d.
    let staged: Vec<Value> = [(0.3, 4.0, 8u64), (0.3, 100.0, 8), (0.3, 1e6, 8)]
        .iter()
        .map(|&(e, d, k)| json!({ "eps": e, "d": d, "k": k, "ln_bound": bounds::staged_step_bound_ln(e, d, k) }))
        .collect();
    sink.record("bound_summary", &json!({ "checks": grid.len(), "failures": failures, "staged_step_bounds": staged }))?;
    sink.rows(&rows)?;
    if failures > 0 {
        return Err(Error::Check(format!("{failures} bound checks failed")));
    }
    Ok(())
}

fn locality(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let probe = Probe::parse(&req(&s.event, "event")?)?;
    let params = coupling_params(s)?;
    let trials = req(&s.trials, "trials")?;
    let seed = req(&s.seed, "seed")?;
    let d = req(&s.dim, "dim")?;
    let report = match probe {
        Probe::Set(q) => probe_set(q, d, req(&s.side, "side")?, &params, req(&s.radius, "radius")?, trials, seed)?,
        Probe::Goodness => {
            let layout = BlockLayout::tiled(d, req(&s.inner_side, "inner_side")?, req(&s.outer_side, "outer_side")?, &vec![1; d])?;
            probe_goodness(&layout, &params, trials, seed)?
        }
    };
    let claimed = match probe {
        Probe::Set(q) => Some(q.claimed_radius()),
        Probe::Goodness => None,
    };
    sink.record("locality", &json!({ "report": report, "claimed_radius": claimed }))?;
    sink.rows(&[&report])?;
    if !report.holds() {
        return Err(Error::Check(format!("{} changed in {} of {} trials", report.event, report.changes, report.trials)));
    }
    Ok(())
}

fn provenance_json(p: &BlockProvenance) -> Value {
    match p {
        BlockProvenance::Iid { p, seed } => json!({ "kind": "iid", "p": p, "seed": seed }),
        BlockProvenance::Goodness { p, eps, outer_side, horizon, spin_seed, clock_seed } => json!({
            "kind": "goodness", "p": p, "eps": eps.to_string(), "outer_side": outer_side,
            "horizon": horizon, "spin_seed": spin_seed, "clock_seed": clock_seed,
        }),
        BlockProvenance::Explicit => json!({ "kind": "explicit" }),
    }
}

/// Header and block spins of one field.
pub fn blockfield_json(replica: u64, f: &BlockField) -> Value {
    json!({
        "replica": replica,
        "block_side": f.block_side(),
        "dims": f.dims(),
        "provenance": provenance_json(f.provenance()),
        "p_effective": f.p_effective(),
        "spins": f.spins().iter().map(|s| s.symbol()).collect::<String>(),
    })
}

#[derive(Serialize)]
struct BlockRow {
    replica: u64,
    p_effective: f64,
    spins: String,
}

/// The goodness field of replica `i`, blocks classified in parallel.
pub fn goodness_field(setup: &GoodnessSetup, master: u64, i: u64) -> Result<BlockField, Error> {
    let (spin_seed, clock_seed) = replica_seeds(master, i);
    let r = Randomness::new(setup.params.p(), spin_seed, clock_seed)?;
    let count = setup.lattice()?.len();
    let good: Vec<bool> = (0..count).into_par_iter().map(|b| Ok(setup.classify(b, &r)?.good)).collect::<Result<_, Error>>()?;
    Ok(setup.field_from(&good, &r)?)
}

fn blocks(s: &Settings, sink: &mut Sink) -> Result<(), Error> {
    let d = req(&s.dim, "dim")?;
    let dims = vec![req(&s.blocks, "blocks")?; d];
    let replicas = req(&s.replicas, "replicas")?;
    let seed = req(&s.seed, "seed")?;
    let fields: Vec<BlockField> = match req(&s.mode, "mode")?.as_str() {
        "iid" => {
            let (p, side) = (req(&s.p, "p")?, req(&s.block_side, "block_side")?);
            (0..replicas).map(|i| Ok(BlockField::sample_iid(side, dims.clone(), p, split_seed(seed, i))?)).collect::<Result<_, Error>>()?
        }
        _ => {
            let setup = GoodnessSetup {
                block_side: req(&s.inner_side, "inner_side")?,
                outer_side: req(&s.outer_side, "outer_side")?,
                dims: dims.clone(),
                params: coupling_params(s)?,
            };
            (0..replicas).map(|i| goodness_field(&setup, seed, i)).collect::<Result<_, Error>>()?
        }
    };
    let mut rows = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        sink.record("blockfield", &blockfield_json(i as u64, f))?;
        rows.push(BlockRow { replica: i as u64, p_effective: f.p_effective(), spins: f.spins().iter().map(|s| s.symbol()).collect() });
    }
    sink.rows(&rows)?;
    if fields.len() >= 2 {
        let report = check_blockfields(&fields, 200, 200, DEFAULT_LEVEL)?;
        sink.record("omega", &report)?;
        if !report.passes() {
            return Err(Error::Check(format!("block-field checks failed: {report:?}")));
        }
    }
    Ok(())
}
