//! Command-line interface.
//!
//! Artifacts (CSV, policy, model and set files) go to `--out` or stdout; the
//! JSON run report goes to stdout when `--out` is given and to stderr
//! otherwise. Exit codes: 0 success, 2 validation, 3 certified failure, 4 I/O.

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::derandomize::{derandomize, make_context, mix_pair};
use crate::error::{Error, Result};
use crate::lyapunov::{find_set, range_hull, VectorMeasure};
use crate::measure::{PieceMeasure, StatePartition};
use crate::model::{
    builtin, discounted_to_absorbing, weighted_transform, AtomlessMdp, BuiltinModel, BuiltinParams, EscapeChain,
};
use crate::occupancy::{occupancy, OccupancyMeasure};
use crate::policy::{AnyPolicy, DeterministicPolicy};

pub use report::{Digest, RunReport};

/// Default accuracy for performance and mixing commands.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "atomless", version, about = "Derandomization of stationary policies in atomless MDPs")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Accuracy of the computed performance vectors.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Number of alpha values for `path`; number of cells for `builtin`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Seed of the `random` builtin.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cell count of grid-based builtins used as `builtin:<name>` model arguments.
    #[arg(long, global = true, default_value_t = 64)]
    pub cells: usize,
    /// Truncation level of `example-3.12`.
    #[arg(long, global = true, default_value_t = 10)]
    pub n_max: usize,
    /// Discount factor of `one-cell-discounted`.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub beta: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a model.
    Validate { model: String },
    /// Compute the uniform-absorption certificate.
    Certify { model: String },
    /// Performance vector of a policy.
    Evaluate { model: String, policy: String },
    /// Performance along the threshold path between two deterministic policies.
    Path { model: String, phi0: String, phi1: String },
    /// Deterministic policy realizing `lambda v(phi0) + (1 - lambda) v(phi1)`.
    Mix {
        model: String,
        phi0: String,
        phi1: String,
        #[arg(long)]
        lambda: f64,
    },
    /// Deterministic policy with the performance vector of a stationary one.
    Derandomize { model: String, policy: String },
    /// Ranges of vector measures.
    Lyapunov {
        #[command(subcommand)]
        command: LyapunovCommand,
    },
    /// Model transforms.
    Transform {
        #[command(subcommand)]
        command: TransformCommand,
    },
    /// Print a builtin model.
    Builtin { name: String },
}

#[derive(Debug, Subcommand)]
pub enum LyapunovCommand {
    /// Supporting values and vertices of the range.
    Hull {
        densities: String,
        #[arg(long, default_value_t = 360)]
        directions: usize,
    },
    /// A finite union of intervals whose measure is the target.
    Find {
        densities: String,
        /// Comma-separated target vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TransformCommand {
    /// Discounted model to absorbing model.
    Discount { model: String },
    /// Weighted-norm transform.
    Weight {
        model: String,
        /// Comma-separated positive weight per grid cell.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
    },
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 4,
        Error::NotCertified(_)
        | Error::WeightCondition { .. }
        | Error::Tolerance(_)
        | Error::CertifiedFailure { .. }
        | Error::Infeasible { .. }
        | Error::Undecidable { .. }
        | Error::NotInSet(_) => 3,
        Error::Domain(_)
        | Error::DegenerateMeasure
        | Error::Validation { .. }
        | Error::Schema(_)
        | Error::UnknownBuiltin(_)
        | Error::TooLarge(_) => 2,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Runs a parsed command; returns the exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let start = Instant::now();
    let mut rep = RunReport::new(std::env::args().collect(), cli.global.tol);
    let result = dispatch(cli, &mut rep);
    rep.wall_clock_s = start.elapsed().as_secs_f64();
    let code = match result {
        Ok(artifact) => match emit(&cli.global, &artifact, stdout, &mut rep) {
            Ok(()) => 0,
            Err(e) => {
                rep.fail(&e, exit_code(&e));
                exit_code(&e)
            }
        },
        Err(e) => {
            rep.fail(&e, exit_code(&e));
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    };
    rep.exit_code = code;
    let text = serde_json::to_string_pretty(&rep).expect("report serializes");
    let sink: &mut dyn Write = if cli.global.out.is_some() { stdout } else { stderr };
    let _ = writeln!(sink, "{text}");
    code
}

fn emit(g: &Global, artifact: &str, stdout: &mut dyn Write, rep: &mut RunReport) -> Result<()> {
    match &g.out {
        Some(path) => {
            write_atomic(path, artifact.as_bytes())?;
            rep.outputs.push(path.display().to_string());
            Ok(())
        }
        None => stdout.write_all(artifact.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_input(path: &str, rep: &mut RunReport) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    rep.inputs.push(Digest::of(path, &bytes));
    String::from_utf8(bytes).map_err(|_| Error::Schema(format!("{path} is not UTF-8")))
}

fn params(g: &Global, cells: usize) -> BuiltinParams {
    BuiltinParams { n_max: g.n_max, grid: cells, seed: g.seed, beta: g.beta }
}

enum Loaded {
    Atomless(AtomlessMdp),
    Finite(EscapeChain),
}

fn load_any(spec: &str, g: &Global, rep: &mut RunReport) -> Result<Loaded> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        rep.inputs.push(Digest::of(spec, spec.as_bytes()));
        return Ok(match builtin(name, &params(g, g.cells))? {
            BuiltinModel::Atomless(m) => Loaded::Atomless(m),
            BuiltinModel::Finite(f) => Loaded::Finite(f),
        });
    }
    let text = read_input(spec, rep)?;
    Ok(Loaded::Atomless(AtomlessMdp::from_toml(&text)?))
}

fn load_model(spec: &str, g: &Global, rep: &mut RunReport) -> Result<AtomlessMdp> {
    match load_any(spec, g, rep)? {
        Loaded::Atomless(m) => Ok(m),
        Loaded::Finite(_) => Err(Error::validation(spec, "countable-state example is atomic; only validate and certify accept it")),
    }
}

fn load_policy(path: &str, m: &AtomlessMdp, rep: &mut RunReport) -> Result<AnyPolicy> {
    let text = read_input(path, rep)?;
    AnyPolicy::parse(&text, m.action_count())
}

fn load_deterministic(path: &str, m: &AtomlessMdp, rep: &mut RunReport) -> Result<DeterministicPolicy> {
    let phi = load_policy(path, m, rep)?.into_deterministic()?;
    m.check_deterministic(&phi)?;
    Ok(phi)
}

/// Number formatting for CSV: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_row(vals: &[f64]) -> String {
    let mut s = vals.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn header(prefix: &[&str], n: usize, suffix: &[&str]) -> String {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    cols.extend((0..n).map(|j| format!("v{j}")));
    cols.extend(suffix.iter().map(|s| s.to_string()));
    cols.join(",") + "\n"
}

fn dispatch(cli: &Cli, rep: &mut RunReport) -> Result<String> {
    let g = &cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance {} must be positive", g.tol)));
    }
    match &cli.command {
        Command::Validate { model } => match load_any(model, g, rep)? {
            Loaded::Atomless(m) => {
                rep.summary = json!({
                    "valid": true,
                    "cells": m.cells(),
                    "actions": m.action_count(),
                    "criteria": m.criteria(),
                    "kind": format!("{:?}", m.kind()),
                });
                Ok(String::new())
            }
            Loaded::Finite(f) => {
                rep.summary = json!({ "valid": true, "states": f.mdp().states(), "atomic": true });
                rep.notes.push("countable-state example truncated to finitely many states; atomic, not atomless".into());
                Ok(String::new())
            }
        },
        Command::Certify { model } => cmd_certify(model, g, rep),
        Command::Evaluate { model, policy } => {
            let m = load_model(model, g, rep)?;
            let pi = load_policy(policy, &m, rep)?.into_stationary(m.action_count());
            let occ = occupancy(&m, &pi, g.tol)?;
            let v = occ.performance(&m);
            rep.summary = json!({
                "expected_absorption_time": occ.total(),
                "truncation_error": occ.truncation_error(),
                "reward_error_bound": occ.truncation_error() * m.max_abs_reward(),
                "steps": occ.steps(),
            });
            Ok(header(&[], m.criteria(), &[]) + &csv_row(&v))
        }
        Command::Path { model, phi0, phi1 } => cmd_path(model, phi0, phi1, g, rep),
        Command::Mix { model, phi0, phi1, lambda } => {
            let m = load_model(model, g, rep)?;
            let p0 = load_deterministic(phi0, &m, rep)?;
            let p1 = load_deterministic(phi1, &m, rep)?;
            let (phi, cert) = mix_pair(&m, &p0, &p1, *lambda, g.tol)?;
            rep.summary = serde_json::to_value(&cert).expect("serializable");
            Ok(phi.to_text())
        }
        Command::Derandomize { model, policy } => {
            let m = load_model(model, g, rep)?;
            let pi = load_policy(policy, &m, rep)?.into_stationary(m.action_count());
            let (phi, cert) = derandomize(&m, &pi, g.tol)?;
            rep.summary = serde_json::to_value(&cert).expect("serializable");
            Ok(phi.to_text())
        }
        Command::Lyapunov { command } => cmd_lyapunov(command, g, rep),
        Command::Transform { command } => match command {
            TransformCommand::Discount { model } => {
                let m = load_model(model, g, rep)?;
                Ok(discounted_to_absorbing(&m)?.to_toml())
            }
            TransformCommand::Weight { model, weights } => {
                let m = load_model(model, g, rep)?;
                Ok(weighted_transform(&m, weights)?.to_toml())
            }
        },
        Command::Builtin { name } => {
            rep.inputs.push(Digest::of(&format!("builtin:{name}"), name.as_bytes()));
            match builtin(name, &params(g, g.grid.unwrap_or(g.cells)))? {
                BuiltinModel::Atomless(m) => Ok(m.to_toml()),
                BuiltinModel::Finite(f) => {
                    rep.notes.push("countable-state example; emitted as a table of closed-form checks".into());
                    let mut s = String::from("n,expected_absorption_time,tail_at_n\n");
                    for n in 0..=f.n_max() {
                        let p = f.phi(n);
                        s += &format!(
                            "{n},{},{}\n",
                            num(f.mdp().expected_absorption_time(&p, 1e-15)),
                            num(f.mdp().tail_sum(&p, n, 1e-15))
                        );
                    }
                    s += &format!("inf,{},\n", num(f.mdp().expected_absorption_time(&f.phi_infinity(), 1e-15)));
                    Ok(s)
                }
            }
        }
    }
}

fn cmd_certify(model: &str, g: &Global, rep: &mut RunReport) -> Result<String> {
    let (cert, finite) = match load_any(model, g, rep)? {
        Loaded::Atomless(m) => (m.certificate()?.clone(), false),
        Loaded::Finite(f) => (
            crate::model::absorption_certificate(f.mdp(), crate::model::CERTIFICATE_TOL)
                .map_err(|e| Error::NotCertified(e.to_string()))?,
            true,
        ),
    };
    let tails: Vec<f64> = (0..=10).map(|n| cert.tail(n)).collect();
    rep.summary = json!({
        "certified": true,
        "L": cert.l(),
        "horizon": cert.horizon(),
        "tail_0_to_10": tails,
    });
    if finite {
        rep.notes.push(
            "absorbing, uniform-absorption certificate holds for truncation only: the untruncated example is not uniformly absorbing"
                .into(),
        );
    }
    let mut s = String::from("n,tail,survival\n");
    for n in 0..=cert.horizon().min(50) {
        s += &format!("{n},{},{}\n", num(cert.tail(n)), num(cert.survival(n)));
    }
    Ok(s)
}

fn cmd_path(model: &str, phi0: &str, phi1: &str, g: &Global, rep: &mut RunReport) -> Result<String> {
    let m = load_model(model, g, rep)?;
    let p0 = load_deterministic(phi0, &m, rep)?;
    let p1 = load_deterministic(phi1, &m, rep)?;
    let points = g.grid.unwrap_or(11);
    if points < 2 {
        return Err(Error::Domain("path needs at least 2 grid points".into()));
    }
    let ctx = make_context(&m, &p0, &p1)?;
    let step = 1.0 / (points - 1) as f64;
    let bound = ctx.tv_modulus(step)?;
    let mut out = header(&["alpha"], m.criteria(), &["tv_prev", "tv_bound"]);
    let mut prev: Option<OccupancyMeasure> = None;
    let mut worst = 0.0f64;
    for k in 0..points {
        let alpha = if k + 1 == points { 1.0 } else { k as f64 * step };
        let phi = ctx.path_policy(alpha)?;
        let occ = occupancy(&m, &phi.to_stationary(m.action_count()), g.tol)?;
        let tv = prev.as_ref().map_or(0.0, |p| p.total_variation(&occ));
        worst = worst.max(tv);
        let mut row = vec![alpha];
        row.extend(occ.performance(&m));
        row.push(tv);
        row.push(bound);
        out += &csv_row(&row);
        prev = Some(occ);
    }
    rep.summary = json!({ "points": points, "tv_bound": bound, "max_tv_step": worst });
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityDoc {
    grid: Vec<f64>,
    #[serde(default)]
    masses: Option<Vec<f64>>,
    densities: Vec<Vec<f64>>,
}

fn load_densities(spec: &str, g: &Global, rep: &mut RunReport) -> Result<VectorMeasure> {
    if spec == "builtin:linear" {
        rep.inputs.push(Digest::of(spec, spec.as_bytes()));
        return Ok(VectorMeasure::linear_example(g.cells));
    }
    let text = read_input(spec, rep)?;
    let doc: DensityDoc = toml::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    let part = StatePartition::new(doc.grid)?;
    let masses = doc.masses.unwrap_or_else(|| (0..part.len()).map(|i| part.width(i)).collect());
    VectorMeasure::new(PieceMeasure::new(part, masses)?, doc.densities)
}

fn cmd_lyapunov(command: &LyapunovCommand, g: &Global, rep: &mut RunReport) -> Result<String> {
    match command {
        LyapunovCommand::Hull { densities, directions } => {
            let vm = load_densities(densities, g, rep)?;
            let h = range_hull(&vm, *directions)?;
            let n = vm.criteria();
            let mut cols: Vec<String> = (0..n).map(|j| format!("d{j}")).collect();
            cols.push("support".into());
            cols.extend((0..n).map(|j| format!("v{j}")));
            let mut out = cols.join(",") + "\n";
            for ((d, s), v) in h.directions.iter().zip(&h.support).zip(&h.vertices) {
                let mut row = d.clone();
                row.push(*s);
                row.extend(v);
                out += &csv_row(&row);
            }
            rep.summary = json!({ "directions": h.directions.len(), "gap": h.gap });
            Ok(out)
        }
        LyapunovCommand::Find { densities, target } => {
            let vm = load_densities(densities, g, rep)?;
            let set = find_set(&vm, target, g.tol)?;
            let got = vm.measure_of(&set);
            let err = got.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            rep.summary = json!({ "target": target, "achieved": got, "error": err });
            Ok(set.to_text())
        }
    }
}
