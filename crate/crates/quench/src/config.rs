//! Experiment settings: command-line flags over an optional config file
//! over the `QUENCH_SEED` environment variable over per-command defaults.
//!
//! A config file is either `key = value` lines (`#` starts a comment) or a
//! record previously written by this program, whose embedded config is
//! reused verbatim.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use quench_core::glauber::Boundary;
use quench_core::Ratio;

use crate::Error;

pub const SEED_ENV: &str = "QUENCH_SEED";

/// Every experiment parameter. Unset fields take per-command defaults in
/// [`Settings::resolve`]; resolved settings have every field relevant to
/// the command filled in and are what records embed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Subcommand the settings were resolved for.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Lattice dimension d.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Side length of the torus or block.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    /// Initial '+' density (bootstrap: infection density).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Bias ε with p = 1/2 + ε, exact (e.g. 0.3 or 3/10).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    /// Probability that a tie resolves to '+'.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Master seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// End time of each run.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Time of the first coupling (default d).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_d: Option<f64>,
    /// torus, plus, minus or free.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    /// Independent runs per point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    /// Side n of the inner block B.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_side: Option<usize>,
    /// Side n' of the outer block B'.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_side: Option<usize>,
    /// Side L of the blocks of a block field.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_side: Option<usize>,
    /// Blocks per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    /// Bootstrap threshold r (exact rational).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    /// Shorthand for the threshold, e.g. r2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// Number of relaxed stages.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Relaxation per stage (exact rational).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<String>,
    /// Stage cap; 0 runs to convergence.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// fixation, bootstrap or activity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimand: Option<String>,
    /// Comma-separated densities.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<String>,
    /// Lower end of the bisection bracket.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    /// Upper end of the bisection bracket.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    /// Probability the bisection looks for.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Bracket width at which bisection stops.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// X, Z, Z40 or goodness.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    /// Resampling radius.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    /// Resampling trials.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// iid or goodness.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Points of the magnetization trace.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_points: Option<usize>,
    /// Activity windows, e.g. 100:200,200:400.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<String>,
    /// Times for the flipped-by curve, comma-separated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<String>,
    /// Include full vertex sets in coupling records.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbose_sets: Option<bool>,
    /// Run the sign-reversed twin of every replica.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirrored: Option<bool>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    /// Fields of `other` that are set win.
    pub fn overlay(&mut self, other: &Settings) {
        overlay!(
            self, other, command, dim, side, p, eps, alpha, seed, horizon, time_d, boundary, replicas, inner_side,
            outer_side, block_side, blocks, r, rule, k, m, steps, estimand, p_grid, lo, hi, target, tol, event,
            radius, trials, mode, trace_points, windows, times, verbose_sets, mirrored
        );
    }

    /// Reads a config file.
    pub fn from_file(path: &Path) -> Result<Settings, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    pub fn parse_text(text: &str) -> Result<Settings, Error> {
        let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
        if let Some(json) = first.strip_prefix("# config:") {
            return Ok(serde_json::from_str(json.trim())?);
        }
        if first.starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(first)?;
            let inner = v.get("config").cloned().unwrap_or(v);
            return Ok(serde_json::from_value(inner)?);
        }
        let mut map = serde_json::Map::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().replace('-', "_");
            let raw = v.trim();
            let value = match serde_json::from_str::<serde_json::Value>(raw) {
                Ok(v @ (serde_json::Value::Number(_) | serde_json::Value::Bool(_))) if !STRING_KEYS.contains(&key.as_str()) => v,
                _ => serde_json::Value::String(raw.trim_matches('"').to_string()),
            };
            map.insert(key, value);
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| Error::Usage(format!("config file: {e}")))
    }

    /// Layers flags over file over environment over defaults for `command`.
    pub fn resolve(command: &str, flags: &Settings, file: Option<&Settings>, env_seed: Option<&str>) -> Result<Settings, Error> {
        let mut s = Settings::default();
        if let Some(f) = file {
            s.overlay(f);
        }
        if let Some(seed) = env_seed {
            s.seed = Some(seed.trim().parse().map_err(|_| Error::Usage(format!("{SEED_ENV}={seed:?} is not a u64")))?);
        }
        s.overlay(flags);
        s.command = Some(command.to_string());
        s.fill_defaults(command)?;
        Ok(s)
    }

    fn fill_defaults(&mut self, command: &str) -> Result<(), Error> {
        let dim = *self.dim.get_or_insert(2);
        if dim == 0 {
            return Err(Error::Usage("dim must be positive".into()));
        }
        self.seed.get_or_insert(0);
        match command {
            "simulate" => {
                self.side.get_or_insert(32);
                self.p.get_or_insert(0.9);
                self.alpha.get_or_insert(0.5);
                self.horizon.get_or_insert(100.0);
                self.boundary.get_or_insert_with(|| "torus".into());
                self.trace_points.get_or_insert(10);
            }
            "bootstrap" => {
                self.side.get_or_insert(16);
                self.p.get_or_insert(0.1);
                self.boundary.get_or_insert_with(|| "torus".into());
                self.fill_rule(dim)?;
                self.k.get_or_insert(0);
                self.m.get_or_insert_with(|| "0".into());
                self.steps.get_or_insert(0);
            }
            "couple" => {
                self.link_p_eps(Ratio::new(3, 10))?;
                let unit = 1usize << dim.min(20);
                self.inner_side.get_or_insert(3 * unit);
                self.outer_side.get_or_insert(5 * unit);
                self.alpha.get_or_insert(0.5);
                self.k.get_or_insert(8);
                self.time_d.get_or_insert(dim as f64);
                self.horizon.get_or_insert(default_horizon(dim));
                self.replicas.get_or_insert(1);
                self.verbose_sets.get_or_insert(false);
            }
            "sweep" | "bisect" => {
                let estimand = self.estimand.get_or_insert_with(|| "bootstrap".into()).clone();
                self.side.get_or_insert(16);
                self.replicas.get_or_insert(200);
                match estimand.as_str() {
                    "bootstrap" => {
                        self.boundary.get_or_insert_with(|| "torus".into());
                        self.fill_rule(dim)?;
                    }
                    "fixation" | "activity" => {
                        self.alpha.get_or_insert(0.5);
                        self.boundary.get_or_insert_with(|| "torus".into());
                        self.horizon.get_or_insert(1000.0);
                        if estimand == "activity" {
                            self.windows.get_or_insert_with(|| "100:200".into());
                            self.times.get_or_insert_with(|| "10,100,1000".into());
                        }
                    }
                    other => return Err(Error::Usage(format!("unknown estimand {other:?}"))),
                }
                if command == "sweep" {
                    self.p_grid.get_or_insert_with(|| "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9".into());
                } else {
                    if estimand == "activity" {
                        return Err(Error::Usage("bisect needs a probability estimand (fixation or bootstrap)".into()));
                    }
                    self.lo.get_or_insert(0.0);
                    self.hi.get_or_insert(1.0);
                    self.target.get_or_insert(0.5);
                    self.tol.get_or_insert(1.0 / 64.0);
                }
            }
            "verify-bounds" => {}
            "locality" => {
                let event = self.event.get_or_insert_with(|| "X".into()).clone();
                self.link_p_eps(Ratio::new(3, 10))?;
                self.trials.get_or_insert(200);
                self.time_d.get_or_insert(dim as f64);
                match event.as_str() {
                    "X" => {
                        self.side.get_or_insert(40);
                        self.radius.get_or_insert(8);
                    }
                    "Z" => {
                        self.side.get_or_insert(40);
                        self.radius.get_or_insert(9);
                    }
                    "Z40" => {
                        self.side.get_or_insert(130);
                        self.radius.get_or_insert(58);
                    }
                    "goodness" => {
                        self.inner_side.get_or_insert(9);
                        self.outer_side.get_or_insert(15);
                        self.horizon.get_or_insert(default_horizon(dim));
                        self.alpha.get_or_insert(0.5);
                    }
                    other => return Err(Error::Usage(format!("unknown event {other:?} (X, Z, Z40, goodness)"))),
                }
            }
            "blocks" => {
                let mode = self.mode.get_or_insert_with(|| "iid".into()).clone();
                self.blocks.get_or_insert(8);
                self.replicas.get_or_insert(1);
                match mode.as_str() {
                    "iid" => {
                        self.p.get_or_insert(0.5);
                        self.block_side.get_or_insert(4);
                    }
                    "goodness" => {
                        self.link_p_eps(Ratio::new(3, 10))?;
                        let n = *self.inner_side.get_or_insert(9);
                        self.outer_side.get_or_insert(15);
                        self.block_side = Some(n);
                        self.alpha.get_or_insert(0.5);
                        self.time_d.get_or_insert(dim as f64);
                        self.horizon.get_or_insert(default_horizon(dim));
                    }
                    other => return Err(Error::Usage(format!("unknown block mode {other:?} (iid, goodness)"))),
                }
            }
            other => return Err(Error::Usage(format!("unknown command {other:?}"))),
        }
        Ok(())
    }

    fn fill_rule(&mut self, dim: usize) -> Result<(), Error> {
        if let Some(rule) = self.rule.clone() {
            let r = rule.strip_prefix('r').ok_or_else(|| Error::Usage(format!("rule {rule:?} should look like r2")))?;
            let r: Ratio = r.parse()?;
            if let Some(given) = &self.r {
                if given.parse::<Ratio>()? != r {
                    return Err(Error::Usage(format!("--rule {rule} disagrees with --r {given}")));
                }
            }
            self.r = Some(r.to_string());
        }
        self.r.get_or_insert_with(|| dim.to_string());
        Ok(())
    }

    /// `p = 1/2 + ε`: fills whichever is missing and checks agreement.
    fn link_p_eps(&mut self, default_eps: Ratio) -> Result<(), Error> {
        let half = Ratio::new(1, 2);
        let eps = match (&self.eps, self.p) {
            (Some(e), Some(p)) => {
                let e: Ratio = e.parse()?;
                if ((half + e).to_f64() - p).abs() > 1e-12 {
                    return Err(Error::Usage(format!("p = {p} and eps = {e} disagree (need p = 1/2 + eps)")));
                }
                e
            }
            (Some(e), None) => e.parse()?,
            (None, Some(p)) => p.to_string().parse::<Ratio>()? - half,
            (None, None) => default_eps,
        };
        if eps <= Ratio::ZERO || eps >= half {
            return Err(Error::Usage(format!("eps = {eps} must lie in (0, 1/2)")));
        }
        self.eps = Some(eps.to_string());
        self.p = Some((half + eps).to_f64());
        Ok(())
    }

    pub fn boundary(&self) -> Result<Boundary, Error> {
        let name = self.boundary.as_deref().unwrap_or("torus");
        Boundary::parse(name).ok_or_else(|| Error::Usage(format!("unknown boundary {name:?} (torus, plus, minus, free)")))
    }

    pub fn eps_ratio(&self) -> Result<Ratio, Error> {
        Ok(self.eps.as_deref().ok_or_else(|| Error::Usage("eps missing".into()))?.parse()?)
    }

    pub fn p_grid_values(&self) -> Result<Vec<f64>, Error> {
        parse_list(self.p_grid.as_deref().unwrap_or(""))
    }

    pub fn time_values(&self) -> Result<Vec<f64>, Error> {
        parse_list(self.times.as_deref().unwrap_or(""))
    }

    pub fn window_values(&self) -> Result<Vec<(f64, f64)>, Error> {
        let mut out = Vec::new();
        for part in self.windows.as_deref().unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (a, b) = part.split_once(':').ok_or_else(|| Error::Usage(format!("window {part:?} should look like a:b")))?;
            let (a, b) = (parse_f64(a)?, parse_f64(b)?);
            if !(a <= b) {
                return Err(Error::Usage(format!("window {part:?} is empty")));
            }
            out.push((a, b));
        }
        Ok(out)
    }

    pub fn require<T: Clone>(field: &Option<T>, name: &str) -> Result<T, Error> {
        field.clone().ok_or_else(|| Error::Usage(format!("missing setting {name}")))
    }
}

/// Keys whose values stay strings even when they look numeric.
const STRING_KEYS: &[&str] = &["eps", "r", "m", "p_grid", "windows", "times", "rule", "boundary", "event", "mode", "estimand", "command"];

fn parse_f64(s: &str) -> Result<f64, Error> {
    s.trim().parse().map_err(|_| Error::Usage(format!("not a number: {s:?}")))
}

fn parse_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(parse_f64).collect()
}

/// `200d⁵ + d`.
pub fn default_horizon(d: usize) -> f64 {
    let d = d as f64;
    200.0 * d.powi(5) + d
}

/// Key/value view of resolved settings, for diagnostics.
pub fn describe(s: &Settings) -> BTreeMap<String, String> {
    match serde_json::to_value(s) {
        Ok(serde_json::Value::Object(m)) => m.into_iter().map(|(k, v)| (k, v.to_string())).collect(),
        _ => BTreeMap::new(),
    }
}
