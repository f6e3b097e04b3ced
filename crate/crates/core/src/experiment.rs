//! Configuration-driven experiments behind the `sqg` command line.
//!
//! A configuration is a flat list of dotted `key = value` pairs. Files use
//! one pair per line with `#` comments; command-line overrides use the same
//! keys. Unknown keys are rejected. Lengths accept a `pi` suffix
//! (`box_len = 48pi`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::condition::{corollary_bounds, evaluate_condition, BoundsReport, ConditionReport};
use crate::data::{BackgroundProfile, CosineMode, DataRecipe, PerturbationSeed, VerificationParams};
use crate::diagnostics::{
    ledger_consistency, theorem_bound_check, write_trajectory_csv, DiagnosticsRecord, LedgerReport,
    TheoremBoundReport, MAX_SAMPLING_INTERVAL,
};
use crate::error::{Result, SqgError};
use crate::evolution::{BlowupReport, Mode, Scheme, SimParams, Simulation, Trajectory};
use crate::grid::Grid;
use crate::inequalities::{run_lab, summarize, write_lab_csv, KindSummary, LabConfig, LabRow, TrialKind};

/// Environment variable supplying the default `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SQG_OUTPUT_DIR";

const CHECKPOINT_DIR: &str = "checkpoint";
const CHECKPOINT_STEM: &str = "state";
const AXIS_PREFIX: &str = "sweep.axis.";

/// Every key with its default value.
const DEFAULTS: &[(&str, &str)] = &[
    ("grid.n", "256"),
    ("grid.box_len", "48pi"),
    ("recipe.delta", "0.05"),
    ("recipe.mu", "1"),
    ("recipe.alpha", "0.25"),
    ("recipe.amplitude", "auto"),
    ("recipe.background", "corollary"),
    ("recipe.modes", ""),
    ("recipe.g0", "zero"),
    ("recipe.g0_h3_sq", "0"),
    ("recipe.g0_k_max", "0.8"),
    ("recipe.g0_modes", ""),
    ("recipe.velocity_exponent", "-0.5"),
    ("recipe.theorem_mode", "true"),
    ("sim.dt_max", "0.01"),
    ("sim.cfl", "0.5"),
    ("sim.scheme", "etdrk4"),
    ("sim.t_end", "1"),
    ("sim.sample_every", "1"),
    ("sim.mode", "perturbation_g"),
    ("sim.paired", "false"),
    ("sim.nonlinear", "true"),
    ("sim.forcing", "true"),
    ("sim.tail_limit", "1e-6"),
    ("sim.tail_patience", "100"),
    ("sim.blowup_factor", "1e8"),
    ("sim.checkpoint_every", "0"),
    ("verify.c_universal", "1"),
    ("verify.epsilon", "0.1"),
    ("verify.t_horizon", "auto"),
    ("verify.quad_tol", "1e-8"),
    ("ledger.max_residual", "1e-3"),
    ("lab.kind", "all"),
    ("lab.trials", "100"),
    ("lab.seed", "auto"),
    ("lab.alphas", "0, 0.1, 0.25, 0.4"),
    ("lab.m", "3"),
    ("lab.n", "128"),
    ("lab.box_len", "16pi"),
    ("sweep.max_parallel", "1"),
    ("sweep.max_points", "64"),
    ("sweep.simulate", "true"),
    ("output_dir", ""),
    ("seed", "0"),
];

fn is_known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            SqgError::config(
                format!("line {}", i + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns `["--recipe.delta", "0.05", "--sim.paired=true"]` into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| SqgError::config(a.clone(), "overrides take the form --dotted.key value"))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it.next().ok_or_else(|| SqgError::config(key, "missing value"))?;
            out.push((key.to_string(), v.clone()));
        }
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    let bad = || SqgError::config(key, format!("expected a number, got `{v}`"));
    let x = if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let c = if head.is_empty() {
            1.0
        } else {
            head.parse::<f64>().map_err(|_| bad())?
        };
        c * std::f64::consts::PI
    } else {
        v.parse::<f64>().map_err(|_| bad())?
    };
    if x.is_nan() {
        return Err(bad());
    }
    Ok(x)
}

fn parse_auto(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(key, v).map(Some)
    }
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| SqgError::config(key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(SqgError::config(
            key,
            format!("expected true or false, got `{v}`"),
        )),
    }
}

/// `j1:j2:amplitude` triples separated by commas.
fn parse_modes(key: &str, v: &str) -> Result<Vec<CosineMode>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let parts: Vec<&str> = s.split(':').map(str::trim).collect();
            let bad = || SqgError::config(key, format!("expected j1:j2:amplitude, got `{s}`"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(CosineMode {
                j1: parts[0].parse().map_err(|_| bad())?,
                j2: parts[1].parse().map_err(|_| bad())?,
                amplitude: parse_f64(key, parts[2])?,
            })
        })
        .collect()
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn lift<E: std::fmt::Display>(key: &str) -> impl Fn(E) -> SqgError + '_ {
    move |e| SqgError::config(key, e.to_string())
}

/// Inequality-lab settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LabSettings {
    pub kinds: Vec<TrialKind>,
    pub trials: u64,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub config: LabConfig,
}

/// One sweep axis: a configuration key and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub max_parallel: usize,
    pub max_points: usize,
    /// Run a simulation per point (otherwise only the condition check).
    pub simulate: bool,
}

impl SweepSpec {
    pub fn points(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Overrides of point `i`, the first axis varying slowest.
    pub fn point(&self, mut i: usize) -> Vec<(String, String)> {
        let mut out = vec![(String::new(), String::new()); self.axes.len()];
        for (slot, a) in self.axes.iter().enumerate().rev() {
            let n = a.values.len();
            out[slot] = (a.key.clone(), a.values[i % n].clone());
            i /= n;
        }
        out
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: Grid,
    pub recipe: DataRecipe,
    pub theorem_mode: bool,
    pub sim: SimParams,
    /// Checkpoint cadence in steps (0: only at the end).
    pub checkpoint_every: u64,
    pub verify: VerificationParams,
    pub ledger_max_residual: f64,
    pub lab: LabSettings,
    pub sweep: SweepSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Defaults overlaid with `pairs` in order.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut entries: BTreeMap<String, String> = DEFAULTS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            entries.insert("output_dir".into(), dir);
        }
        for (k, v) in pairs {
            let (k, v) = (k.into(), v.into());
            if let Some(target) = k.strip_prefix(AXIS_PREFIX) {
                if !is_known(target) || target.starts_with("sweep.") || target == "output_dir" {
                    return Err(SqgError::config(
                        k.clone(),
                        "sweep axis names an unknown or unsweepable key",
                    ));
                }
            } else if !is_known(&k) {
                return Err(SqgError::config(k, "unknown key"));
            }
            entries.insert(k, v);
        }
        ExperimentConfig::build(entries)
    }

    /// Reads a config file and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| SqgError::config("config", format!("{}: {e}", p.display())))?;
                parse_config_text(&text)?
            }
            None => Vec::new(),
        };
        pairs.extend(overrides.iter().cloned());
        ExperimentConfig::from_pairs(pairs)
    }

    /// The same configuration with `pairs` applied on top.
    pub fn with(&self, pairs: &[(String, String)]) -> Result<Self> {
        ExperimentConfig::from_pairs(self.entries.clone().into_iter().chain(pairs.iter().cloned()))
    }

    /// Effective `key = value` lines, sorted by key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn build(e: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| e.get(k).map(String::as_str).unwrap_or("");
        let f = |k: &str| parse_f64(k, get(k));
        let b = |k: &str| parse_bool(k, get(k));

        let n: usize = parse_int("grid.n", get("grid.n"))?;
        let grid = Grid::new(n, f("grid.box_len")?).map_err(lift("grid.n"))?;
        let seed: u64 = parse_int("seed", get("seed"))?;

        let background = match get("recipe.background") {
            "corollary" => BackgroundProfile::Corollary,
            "zero" => BackgroundProfile::Zero,
            "modes" => BackgroundProfile::Modes(parse_modes("recipe.modes", get("recipe.modes"))?),
            other => {
                return Err(SqgError::config(
                    "recipe.background",
                    format!("expected corollary, modes or zero, got `{other}`"),
                ))
            }
        };
        let g0 = match get("recipe.g0") {
            "zero" => PerturbationSeed::Zero,
            "random" => PerturbationSeed::RandomBand {
                target_h3_sq: f("recipe.g0_h3_sq")?,
                k_max: f("recipe.g0_k_max")?,
                seed,
            },
            "modes" => PerturbationSeed::Modes(parse_modes("recipe.g0_modes", get("recipe.g0_modes"))?),
            other => {
                return Err(SqgError::config(
                    "recipe.g0",
                    format!("expected zero, random or modes, got `{other}`"),
                ))
            }
        };
        let recipe = DataRecipe {
            delta: f("recipe.delta")?,
            mu: f("recipe.mu")?,
            alpha: f("recipe.alpha")?,
            amplitude: parse_auto("recipe.amplitude", get("recipe.amplitude"))?,
            background,
            g0,
            velocity_exponent: f("recipe.velocity_exponent")?,
        };
        let theorem_mode = b("recipe.theorem_mode")?;
        recipe
            .check(theorem_mode)
            .map_err(|(k, m)| SqgError::config(format!("recipe.{k}"), m))?;

        let sim = SimParams {
            mu: recipe.mu,
            alpha: recipe.alpha,
            dt_max: f("sim.dt_max")?,
            cfl: f("sim.cfl")?,
            scheme: get("sim.scheme").parse::<Scheme>().map_err(lift("sim.scheme"))?,
            t_end: f("sim.t_end")?,
            sample_every: parse_int("sim.sample_every", get("sim.sample_every"))?,
            mode: get("sim.mode").parse::<Mode>().map_err(lift("sim.mode"))?,
            paired: b("sim.paired")?,
            nonlinear: b("sim.nonlinear")?,
            forcing: b("sim.forcing")?,
            tail_limit: f("sim.tail_limit")?,
            tail_patience: parse_int("sim.tail_patience", get("sim.tail_patience"))?,
            blowup_factor: f("sim.blowup_factor")?,
        };
        sim.check()
            .map_err(|(k, m)| SqgError::config(format!("sim.{k}"), m))?;
        let checkpoint_every = parse_int("sim.checkpoint_every", get("sim.checkpoint_every"))?;

        let verify = VerificationParams {
            c_universal: f("verify.c_universal")?,
            epsilon: f("verify.epsilon")?,
            t_horizon: parse_auto("verify.t_horizon", get("verify.t_horizon"))?,
            quad_tol: f("verify.quad_tol")?,
        };
        verify
            .check()
            .map_err(|(k, m)| SqgError::config(format!("verify.{k}"), m))?;

        let ledger_max_residual = f("ledger.max_residual")?;
        if !(ledger_max_residual > 0.0) {
            return Err(SqgError::config("ledger.max_residual", "must be positive"));
        }

        let kinds = match get("lab.kind") {
            "all" => TrialKind::ALL.to_vec(),
            "gn" => vec![TrialKind::GnGrad, TrialKind::GnDbeta],
            k => vec![k.parse::<TrialKind>().map_err(lift("lab.kind"))?],
        };
        let alphas = parse_list("lab.alphas", get("lab.alphas"))?;
        if alphas.is_empty() || alphas.iter().any(|a| !(0.0..0.5).contains(a)) {
            return Err(SqgError::config(
                "lab.alphas",
                "need one or more values in [0, 1/2)",
            ));
        }
        let m: u32 = parse_int("lab.m", get("lab.m"))?;
        if m == 0 {
            return Err(SqgError::config("lab.m", "commutator order must be at least 1"));
        }
        let trials: u64 = parse_int("lab.trials", get("lab.trials"))?;
        if trials == 0 {
            return Err(SqgError::config("lab.trials", "need at least one trial"));
        }
        let lab_seed = match get("lab.seed") {
            "auto" => seed,
            v => parse_int("lab.seed", v)?,
        };
        let lab_grid =
            Grid::new(parse_int("lab.n", get("lab.n"))?, f("lab.box_len")?).map_err(lift("lab.n"))?;
        let lab = LabSettings {
            kinds,
            trials,
            seed: lab_seed,
            alphas,
            config: LabConfig {
                grid: lab_grid,
                m,
                ..LabConfig::standard()
            },
        };

        let axes: Vec<SweepAxis> = e
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(AXIS_PREFIX).map(|target| SweepAxis {
                    key: target.to_string(),
                    values: v
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect(),
                })
            })
            .collect();
        for a in &axes {
            if a.values.is_empty() {
                return Err(SqgError::config(
                    format!("{AXIS_PREFIX}{}", a.key),
                    "axis has no values",
                ));
            }
        }
        let max_parallel: usize = parse_int("sweep.max_parallel", get("sweep.max_parallel"))?;
        if max_parallel == 0 {
            return Err(SqgError::config("sweep.max_parallel", "must be at least 1"));
        }
        let sweep = SweepSpec {
            axes,
            max_parallel,
            max_points: parse_int("sweep.max_points", get("sweep.max_points"))?,
            simulate: b("sweep.simulate")?,
        };

        let output_dir = match get("output_dir") {
            "" => PathBuf::from("sqg_output"),
            d => PathBuf::from(d),
        };
        Ok(ExperimentConfig {
            grid,
            recipe,
            theorem_mode,
            sim,
            checkpoint_every,
            verify,
            ledger_max_residual,
            lab,
            sweep,
            output_dir,
            seed,
            entries: e,
        })
    }
}

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Pass = 0,
    Fail = 1,
    BlowUp = 2,
    ConfigError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Result of a command: its exit status and a one-paragraph summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: ExitStatus,
    pub summary: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn prepare(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("config.txt"), cfg.to_text())?;
    Ok(())
}

/// Reports written by `verify-data`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult {
    pub condition: ConditionReport,
    pub bounds: Option<BoundsReport>,
}

impl VerifyResult {
    pub fn pass(&self) -> bool {
        self.condition.pass && self.bounds.as_ref().is_none_or(|b| b.all_pass)
    }
}

pub fn verify_data(cfg: &ExperimentConfig) -> Result<VerifyResult> {
    let condition = evaluate_condition(&cfg.recipe, &cfg.grid, &cfg.verify)?;
    let bounds = match cfg.recipe.background {
        BackgroundProfile::Corollary => Some(corollary_bounds(&cfg.recipe, &cfg.grid)?),
        _ => None,
    };
    Ok(VerifyResult { condition, bounds })
}

/// Writes `condition.json` (and `bounds.json` for the corollary data).
pub fn cmd_verify_data(cfg: &ExperimentConfig) -> Result<Outcome> {
    prepare(cfg)?;
    let r = verify_data(cfg)?;
    write_json(&cfg.output_dir.join("condition.json"), &r.condition)?;
    let mut summary = format!(
        "condition lhs = {:e} vs eps = {:e}: {}",
        r.condition.lhs,
        r.condition.eps,
        if r.condition.pass { "pass" } else { "fail" }
    );
    if let Some(b) = &r.bounds {
        write_json(&cfg.output_dir.join("bounds.json"), b)?;
        let failed: Vec<&str> = b
            .bounds
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        let _ = write!(
            summary,
            "; lower bounds {}",
            if failed.is_empty() {
                "pass".to_string()
            } else {
                format!("fail ({})", failed.join(", "))
            }
        );
    }
    Ok(Outcome {
        status: if r.pass() {
            ExitStatus::Pass
        } else {
            ExitStatus::Fail
        },
        summary,
    })
}

/// JSON form of a trajectory, read back by the `ledger` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub mu: f64,
    pub alpha: f64,
    pub blowup: Option<BlowupReport>,
    pub records: Vec<DiagnosticsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub t_final: f64,
    pub steps: u64,
    pub samples: usize,
    pub blowup: Option<BlowupReport>,
    pub max_h3_g_sq: f64,
    pub max_tail_fraction: f64,
    pub max_paired_discrepancy: Option<f64>,
    pub ledger_max_relative: Option<f64>,
    pub bound: TheoremBoundReport,
}

/// Fills `ledger_residual` when the samples are dense enough.
pub fn attach_ledger_residuals(records: &mut [DiagnosticsRecord], mu: f64) -> Option<LedgerReport> {
    let dense = records.len() >= 3
        && records
            .windows(2)
            .all(|w| w[1].t - w[0].t <= MAX_SAMPLING_INTERVAL * (1.0 + 1e-9));
    if !dense {
        return None;
    }
    let report = ledger_consistency(records, mu).ok()?;
    for (r, v) in records.iter_mut().zip(&report.relative) {
        r.ledger_residual = Some(*v);
    }
    Some(report)
}

/// Integrates the configured data, writing `trajectory.csv`,
/// `trajectory.json`, `summary.json` and a checkpoint under `checkpoint/`.
/// With `resume` the run continues from that checkpoint.
pub fn simulate(cfg: &ExperimentConfig, resume: bool) -> Result<(Trajectory, SimulationSummary)> {
    prepare(cfg)?;
    let ckpt = cfg.output_dir.join(CHECKPOINT_DIR);
    let mut sim = if resume {
        Simulation::resume(&cfg.recipe, &cfg.grid, cfg.sim.clone(), &ckpt, CHECKPOINT_STEM)?
    } else {
        Simulation::new(&cfg.recipe, &cfg.grid, cfg.sim.clone())?
    };
    let every = cfg.checkpoint_every;
    sim.run_with(|s| {
        if every > 0 && s.state().step % every == 0 {
            s.save_checkpoint(&ckpt, CHECKPOINT_STEM)?;
        }
        Ok(())
    })?;
    sim.save_checkpoint(&ckpt, CHECKPOINT_STEM)?;
    let mut traj = sim.finish();
    let ledger = attach_ledger_residuals(&mut traj.records, traj.mu);

    let csv = BufWriter::new(File::create(cfg.output_dir.join("trajectory.csv"))?);
    write_trajectory_csv(csv, &traj.records)?;
    let file = TrajectoryFile {
        mu: traj.mu,
        alpha: traj.alpha,
        blowup: traj.blowup.clone(),
        records: traj.records.clone(),
    };
    write_json(&cfg.output_dir.join("trajectory.json"), &file)?;
    let summary = SimulationSummary {
        t_final: traj.final_state.t,
        steps: traj.final_state.step,
        samples: traj.records.len(),
        blowup: traj.blowup.clone(),
        max_h3_g_sq: traj.records.iter().map(|r| r.h3_g_sq).fold(0.0, f64::max),
        max_tail_fraction: traj.records.iter().map(|r| r.tail_fraction).fold(0.0, f64::max),
        max_paired_discrepancy: traj.max_paired_discrepancy(),
        ledger_max_relative: ledger.map(|l| l.max_relative),
        bound: theorem_bound_check(&traj.records, &cfg.verify),
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    if let Some(b) = &traj.blowup {
        write_json(&cfg.output_dir.join("blowup.json"), b)?;
    }
    Ok((traj, summary))
}

pub fn cmd_simulate(cfg: &ExperimentConfig, resume: bool) -> Result<Outcome> {
    let (_, s) = simulate(cfg, resume)?;
    let mut summary = format!(
        "t = {} after {} steps, {} samples, max ||g||_H3^2 = {:e}",
        s.t_final, s.steps, s.samples, s.max_h3_g_sq
    );
    if let Some(d) = s.max_paired_discrepancy {
        let _ = write!(summary, ", max paired discrepancy = {d:e}");
    }
    if let Some(l) = s.ledger_max_relative {
        let _ = write!(summary, ", ledger residual = {l:e}");
    }
    let status = match &s.blowup {
        Some(b) => {
            let _ = write!(summary, "; blow-up at t = {} ({:?})", b.t, b.reason);
            ExitStatus::BlowUp
        }
        None => ExitStatus::Pass,
    };
    Ok(Outcome { status, summary })
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub job: usize,
    pub values: Vec<String>,
    pub condition_lhs: Option<f64>,
    pub condition_pass: Option<bool>,
    pub max_h3_g_sq: Option<f64>,
    pub blowup: Option<bool>,
    pub error: Option<String>,
}

fn job_dir(cfg: &ExperimentConfig, job: usize) -> PathBuf {
    cfg.output_dir.join(format!("job_{job:04}"))
}

fn run_job(base: &ExperimentConfig, job: usize) -> SweepRow {
    let point = base.sweep.point(job);
    let mut row = SweepRow {
        job,
        values: point.iter().map(|(_, v)| v.clone()).collect(),
        condition_lhs: None,
        condition_pass: None,
        max_h3_g_sq: None,
        blowup: None,
        error: None,
    };
    let mut overrides = point;
    overrides.push(("output_dir".into(), job_dir(base, job).display().to_string()));
    let result = (|| -> Result<()> {
        let cfg = base.with(&overrides)?;
        prepare(&cfg)?;
        let c = evaluate_condition(&cfg.recipe, &cfg.grid, &cfg.verify)?;
        write_json(&cfg.output_dir.join("condition.json"), &c)?;
        row.condition_lhs = Some(c.lhs);
        row.condition_pass = Some(c.pass);
        if base.sweep.simulate {
            let (_, s) = simulate(&cfg, false)?;
            row.max_h3_g_sq = Some(s.max_h3_g_sq);
            row.blowup = Some(s.blowup.is_some());
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every point of the sweep on at most `max_parallel` workers and
/// writes `sweep.csv`; rows follow the job order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let spec = &cfg.sweep;
    if spec.axes.is_empty() {
        return Err(SqgError::config(
            AXIS_PREFIX.trim_end_matches('.'),
            "sweep needs at least one axis",
        ));
    }
    let total = spec.points();
    if total > spec.max_points {
        return Err(SqgError::config(
            "sweep.max_points",
            format!("sweep has {total} points, above the cap of {}", spec.max_points),
        ));
    }
    prepare(cfg)?;
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|scope| {
        for _ in 0..spec.max_parallel.min(total) {
            scope.spawn(|| loop {
                let job = next.fetch_add(1, Ordering::SeqCst);
                if job >= total {
                    break;
                }
                let row = run_job(cfg, job);
                rows.lock().expect("sweep rows poisoned")[job] = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = rows
        .into_inner()
        .expect("sweep rows poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();
    let mut w = csv::Writer::from_path(cfg.output_dir.join("sweep.csv"))?;
    let mut header = vec!["job".to_string()];
    header.extend(spec.axes.iter().map(|a| a.key.clone()));
    header.extend(
        [
            "condition_lhs",
            "condition_pass",
            "max_h3_g_sq",
            "blowup",
            "error",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    let cell = |x: Option<String>| x.unwrap_or_default();
    for r in &rows {
        let mut rec = vec![format!("job_{:04}", r.job)];
        rec.extend(r.values.iter().cloned());
        rec.push(cell(r.condition_lhs.map(|v| v.to_string())));
        rec.push(cell(r.condition_pass.map(|v| v.to_string())));
        rec.push(cell(r.max_h3_g_sq.map(|v| v.to_string())));
        rec.push(cell(r.blowup.map(|v| v.to_string())));
        rec.push(cell(r.error.clone()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = sweep(cfg)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let blown = rows.iter().filter(|r| r.blowup == Some(true)).count();
    Ok(Outcome {
        status: ExitStatus::Pass,
        summary: format!(
            "{} jobs, {} failed, {} blew up; table in {}",
            rows.len(),
            failed,
            blown,
            cfg.output_dir.join("sweep.csv").display()
        ),
    })
}

/// Runs the configured inequality trials, writing `ineq_lab.csv` and
/// `ineq_summary.json`.
pub fn ineq_lab(cfg: &ExperimentConfig) -> Result<(Vec<LabRow>, Vec<KindSummary>)> {
    prepare(cfg)?;
    let lab = &cfg.lab;
    let seeds = lab.seed..lab.seed + lab.trials;
    let mut rows = Vec::new();
    for &kind in &lab.kinds {
        match kind {
            TrialKind::GnGrad | TrialKind::GnDbeta => {
                for &a in &lab.alphas {
                    rows.extend(run_lab(&lab.config, kind, a, seeds.clone())?);
                }
            }
            _ => rows.extend(run_lab(&lab.config, kind, 0.0, seeds.clone())?),
        }
    }
    let summary = summarize(&rows);
    write_lab_csv(
        BufWriter::new(File::create(cfg.output_dir.join("ineq_lab.csv"))?),
        &rows,
    )?;
    write_json(&cfg.output_dir.join("ineq_summary.json"), &summary)?;
    Ok((rows, summary))
}

pub fn cmd_ineq_lab(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, summary) = ineq_lab(cfg)?;
    let mut text = String::new();
    for s in &summary {
        let _ = write!(
            text,
            "{} ({}): max {:.4e}, mean {:.4e}, sd {:.2e}; ",
            s.trial_kind.name(),
            s.m_or_alpha,
            s.max,
            s.mean,
            s.stddev
        );
    }
    let invariant = summary.iter().all(|s| s.rescale_invariant);
    text.push_str(if invariant {
        "rescaling invariant"
    } else {
        "rescaling check FAILED"
    });
    Ok(Outcome {
        status: if invariant {
            ExitStatus::Pass
        } else {
            ExitStatus::Fail
        },
        summary: text,
    })
}

/// Re-runs the ledger check on a saved `trajectory.json`.
pub fn cmd_ledger(cfg: &ExperimentConfig, trajectory: Option<&Path>) -> Result<Outcome> {
    let path = trajectory
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("trajectory.json"));
    let file: TrajectoryFile = serde_json::from_slice(
        &fs::read(&path).map_err(|e| SqgError::config("trajectory", format!("{}: {e}", path.display())))?,
    )?;
    let report = ledger_consistency(&file.records, file.mu)?;
    let out = path.with_file_name("ledger.json");
    write_json(&out, &report)?;
    let pass = report.max_relative <= cfg.ledger_max_residual;
    Ok(Outcome {
        status: if pass { ExitStatus::Pass } else { ExitStatus::Fail },
        summary: format!(
            "ledger residual max {:e}, mean {:e} (limit {:e}, interval {})",
            report.max_relative, report.mean_relative, cfg.ledger_max_residual, report.max_interval
        ),
    })
}
