//! Command-line front end. Every command prints one JSON document on stdout
//! (`encode` prints formula text) and reports through the exit code:
//! 0 for SAT/true, 1 for UNSAT/false, 2 for usage or input errors, 3 when a
//! resource cap is hit.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{encode_grid_axioms, encode_hilbert, DiophSystem};
use crate::diophantine::SolverConfig;
use crate::modeltools::{brute_force_search, evaluate, load_structure, save_structure, Structure};
use crate::normalform::{to_normal_form_with, Conjunct, NormalFormOptions};
use crate::reducer::{decide, locally_homogenize, DecideConfig, DecideError, ReduceOptions, Verdict};
use crate::sat2::{globally_homogenize, Witness};
use crate::syntax::{classify_fragment, parse_formula, parse_formula_infer, Formula, Signature};
use crate::ResourceCap;

/// Environment variable holding default caps, e.g. `max_nodes=1000000,time_limit=30`.
pub const CAPS_ENV: &str = "FLPC_CAPS";

pub const EXIT_TRUE: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "flpc", version, about = "Satisfiability, models and corpora for the fluted fragment with periodic counting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Indent JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Explore nullary branches sequentially.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Drop outright forbidden pairs while reducing width.
    #[arg(long, global = true)]
    pub prune: bool,
    /// Signature file (`name/arity` per line); inferred from the formula otherwise.
    #[arg(long, global = true)]
    pub sig: Option<PathBuf>,
    /// Search node limit for the Diophantine solver.
    #[arg(long, global = true)]
    pub max_nodes: Option<u64>,
    /// Wall-clock budget for the solver, in seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report width, fluted / reversed-fluted membership and counting usage.
    Classify { file: PathBuf },
    /// Print the normal form.
    Normalize {
        file: PathBuf,
        /// Introduce a fresh predicate for every quantifier.
        #[arg(long)]
        literal: bool,
    },
    /// Decide satisfiability over arbitrary (possibly infinite) structures.
    Sat {
        file: PathBuf,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Decide satisfiability over finite structures.
    Finsat {
        file: PathBuf,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Write a finite model, or an abstract model if only infinite ones exist.
    Model { file: PathBuf, out: PathBuf },
    /// Evaluate a sentence on a structure.
    Check { model: PathBuf, file: PathBuf },
    /// Exhaustive model search up to a domain size.
    Brute {
        file: PathBuf,
        #[arg(long)]
        max: usize,
    },
    /// Generate corpus sentences.
    Encode {
        #[command(subcommand)]
        target: EncodeTarget,
    },
    /// Homogenize a structure globally (arity at most 2) or locally at width `L`.
    Homogenize {
        model: PathBuf,
        #[arg(long)]
        local: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum EncodeTarget {
    /// Sentence for a system of simple Diophantine equations.
    Hilbert { eqns: PathBuf },
    /// The grid axioms.
    Grid {
        #[arg(long)]
        chi: bool,
    },
}

/// Settings shared by the commands of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub pretty: bool,
    pub deterministic: bool,
    pub prune: bool,
    pub solver: SolverConfig,
    pub sig: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Cap(#[from] ResourceCap),
    #[error("{0}")]
    Failed(String),
}

impl From<DecideError> for CliError {
    fn from(e: DecideError) -> Self {
        match e {
            DecideError::Cap(c) => CliError::Cap(c),
            DecideError::Verification(m) => CliError::Failed(format!("verification failed: {m}")),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Cap(_) => EXIT_CAP,
            CliError::Usage(_) | CliError::Failed(_) => EXIT_USAGE,
        }
    }
}

/// Parses `key=value` pairs separated by commas into solver caps.
pub fn parse_caps(text: &str, base: SolverConfig) -> Result<SolverConfig, CliError> {
    let mut cfg = base;
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::Usage(format!("cap `{item}` is not key=value")))?;
        let v: u64 = v
            .trim()
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| CliError::Usage(format!("cap `{item}` needs a positive integer")))?;
        match k.trim() {
            "max_nodes" => cfg.max_nodes = v,
            "max_ilp_nodes" => cfg.max_ilp_nodes = v,
            "max_lp_calls" => cfg.max_lp_calls = v,
            "max_pivots" => cfg.max_pivots = v as usize,
            "time_limit" => cfg.time_limit = Some(Duration::from_secs(v)),
            other => return Err(CliError::Usage(format!("unknown cap `{other}`"))),
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn from_cli(cli: &Cli, env_caps: Option<&str>) -> Result<Self, CliError> {
        let mut solver = parse_caps(env_caps.unwrap_or(""), SolverConfig::default())?;
        if let Some(n) = cli.max_nodes {
            if n == 0 {
                return Err(CliError::Usage("--max-nodes must be positive".into()));
            }
            solver.max_nodes = n;
        }
        if let Some(t) = cli.time_limit {
            if t == 0 {
                return Err(CliError::Usage("--time-limit must be positive".into()));
            }
            solver.time_limit = Some(Duration::from_secs(t));
        }
        Ok(RunConfig {
            pretty: cli.pretty,
            deterministic: cli.deterministic,
            prune: cli.prune,
            solver,
            sig: cli.sig.clone(),
        })
    }

    fn decide_config(&self, finite: bool) -> DecideConfig {
        DecideConfig {
            finite,
            build_witness: true,
            deterministic: self.deterministic,
            reduce: ReduceOptions { prune: self.prune, ..Default::default() },
            encode: Default::default(),
            solver: self.solver.clone(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn load_formula(path: &Path, cfg: &RunConfig) -> Result<(Formula, Signature), CliError> {
    let text = read(path)?;
    let bad = |e: String| CliError::Usage(format!("{}: {e}", path.display()));
    match &cfg.sig {
        Some(sig_path) => {
            let sig = Signature::parse(&read(sig_path)?).map_err(|e| bad(e.to_string()))?;
            let f = parse_formula(&text, &sig).map_err(|e| bad(e.to_string()))?;
            Ok((f, sig))
        }
        None => parse_formula_infer(&text).map_err(|e| bad(e.to_string())),
    }
}

fn conjunct_json(c: &Conjunct) -> Value {
    json!({"guard": c.guard.to_string(), "count": c.count.to_string(), "body": c.body.to_string()})
}

fn witness_json(w: &Witness) -> Value {
    match w {
        Witness::Finite(s) => s.to_json(),
        Witness::Abstract(a) => a.to_json(),
    }
}

fn verdict_json(v: &Verdict, finite: bool) -> Value {
    json!({
        "satisfiable": v.satisfiable,
        "finite": finite,
        "witness_kind": match &v.witness {
            Some(Witness::Finite(_)) => "finite",
            Some(Witness::Abstract(_)) => "abstract",
            None => "none",
        },
        "stats": v.stats,
    })
}

/// Runs one command and returns the exit code with the text for stdout.
pub fn execute(cli: &Cli, cfg: &RunConfig) -> Result<(i32, String), CliError> {
    let render = |v: &Value| {
        if cfg.pretty {
            serde_json::to_string_pretty(v).expect("JSON values serialize")
        } else {
            v.to_string()
        }
    };
    let truth = |b: bool| if b { EXIT_TRUE } else { EXIT_FALSE };
    match &cli.command {
        Command::Classify { file } => {
            let (f, _) = load_formula(file, cfg)?;
            let report = classify_fragment(&f);
            Ok((EXIT_TRUE, render(&serde_json::to_value(report).expect("report serializes"))))
        }
        Command::Normalize { file, literal } => {
            let (f, _) = load_formula(file, cfg)?;
            let nf = to_normal_form_with(&f, NormalFormOptions { recognize_guarded: !literal })
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let fresh: serde_json::Map<String, Value> = nf
                .fresh
                .iter()
                .map(|(n, d)| (n.clone(), json!({"arity": d.arity, "vars": d.vars, "definition": d.formula.to_string()})))
                .collect();
            let out = json!({
                "width": nf.width,
                "size": nf.size(),
                "positive": nf.positive.iter().map(conjunct_json).collect::<Vec<_>>(),
                "negative": nf.negative.iter().map(conjunct_json).collect::<Vec<_>>(),
                "residue": nf.residue.to_string(),
                "nullary": nf.nullary,
                "fresh": fresh,
                "signature": nf.signature.to_string(),
                "sentence": nf.to_formula().to_string(),
            });
            Ok((EXIT_TRUE, render(&out)))
        }
        Command::Sat { file, witness } | Command::Finsat { file, witness } => {
            let finite = matches!(cli.command, Command::Finsat { .. });
            let (f, _) = load_formula(file, cfg)?;
            let v = decide(&f, &cfg.decide_config(finite))?;
            if let (Some(path), Some(w)) = (witness, &v.witness) {
                write(path, &serde_json::to_string_pretty(&witness_json(w)).expect("JSON values serialize"))?;
            }
            Ok((truth(v.satisfiable), render(&verdict_json(&v, finite))))
        }
        Command::Model { file, out } => {
            let (f, _) = load_formula(file, cfg)?;
            let mut v = decide(&f, &cfg.decide_config(true))?;
            let mut finite = true;
            if !v.satisfiable {
                v = decide(&f, &cfg.decide_config(false))?;
                finite = false;
            }
            if let Some(w) = &v.witness {
                match w {
                    Witness::Finite(s) => save_structure(s, out).map_err(|e| CliError::Usage(e.to_string()))?,
                    Witness::Abstract(_) => {
                        write(out, &serde_json::to_string_pretty(&witness_json(w)).expect("JSON values serialize"))?
                    }
                }
            }
            let mut report = verdict_json(&v, finite);
            report["written"] = json!(v.witness.is_some());
            Ok((truth(v.satisfiable), render(&report)))
        }
        Command::Check { model, file } => {
            let s = load_structure(model).map_err(|e| CliError::Usage(e.to_string()))?;
            let (f, _) = load_formula(file, cfg)?;
            let sig = s.signature();
            for (p, a) in f.predicates() {
                if sig.arity(&p) != Some(a) {
                    return Err(CliError::Usage(format!("structure does not interpret `{p}` with arity {a}")));
                }
            }
            let holds = evaluate(&s, &f, &[]);
            Ok((truth(holds), render(&json!({"holds": holds, "domain": s.size()}))))
        }
        Command::Brute { file, max } => {
            let (f, sig) = load_formula(file, cfg)?;
            let found = brute_force_search(&f, &sig, *max)?;
            let out = json!({"found": found.is_some(), "max": max, "model": found.as_ref().map(Structure::to_json)});
            Ok((truth(found.is_some()), render(&out)))
        }
        Command::Encode { target } => {
            let f = match target {
                EncodeTarget::Hilbert { eqns } => {
                    let sys = DiophSystem::parse(&read(eqns)?).map_err(|e| CliError::Usage(e.to_string()))?;
                    encode_hilbert(&sys)
                }
                EncodeTarget::Grid { chi } => encode_grid_axioms(*chi),
            };
            Ok((EXIT_TRUE, f.to_string()))
        }
        Command::Homogenize { model, local } => {
            let s = load_structure(model).map_err(|e| CliError::Usage(e.to_string()))?;
            let h = match local {
                Some(l) => {
                    if *l < 2 || s.signature().max_arity() > l + 1 {
                        return Err(CliError::Usage(format!("--local {l} needs L >= 2 and arities at most L + 1")));
                    }
                    locally_homogenize(&s, *l)
                }
                None => {
                    if s.signature().max_arity() > 2 {
                        return Err(CliError::Usage("global homogenization needs arities at most 2".into()));
                    }
                    globally_homogenize(&s)
                }
            };
            Ok((EXIT_TRUE, render(&h.to_json())))
        }
    }
}

/// Parses `args` (program name first), runs the command and writes its
/// output; returns the exit code.
pub fn run_with(args: impl IntoIterator<Item = OsString>, env_caps: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_TRUE };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = RunConfig::from_cli(&cli, env_caps).and_then(|cfg| execute(&cli, &cfg));
    match result {
        Ok((code, text)) => {
            let _ = writeln!(out, "{text}");
            code
        }
        Err(e) => {
            let _ = writeln!(err, "{}", json!({"error": e.to_string()}));
            e.code()
        }
    }
}

pub fn run() -> i32 {
    let caps = std::env::var(CAPS_ENV).ok();
    run_with(std::env::args_os(), caps.as_deref(), &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("flpc").chain(args.iter().copied()).map(OsString::from);
        let code = run_with(argv, None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn caps_parse() {
        let c = parse_caps("max_nodes=10, time_limit=2", SolverConfig::default()).unwrap();
        assert_eq!(c.max_nodes, 10);
        assert_eq!(c.time_limit, Some(Duration::from_secs(2)));
        assert!(parse_caps("max_nodes=0", SolverConfig::default()).is_err());
        assert!(parse_caps("bogus=1", SolverConfig::default()).is_err());
    }

    #[test]
    fn axiom_of_infinity_and_model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inf = dir.path().join("inf.flp");
        fs::write(&inf, "!exists[0+1] x (true)").unwrap();
        let inf = inf.to_str().unwrap();
        assert_eq!(call(&["finsat", inf]).0, EXIT_FALSE);
        assert_eq!(call(&["sat", inf]).0, EXIT_TRUE);

        let one = dir.path().join("one.flp");
        fs::write(&one, "exists[=1] x (p(x)) & forall x (exists y (r(x, y)))").unwrap();
        let out = dir.path().join("out.json");
        let (one, out) = (one.to_str().unwrap(), out.to_str().unwrap());
        assert_eq!(call(&["model", one, out]).0, EXIT_TRUE);
        assert_eq!(call(&["check", out, one]).0, EXIT_TRUE);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["classify", "/nonexistent/file.flp"]).0, EXIT_USAGE);
        let (code, out, _) = call(&["encode", "grid", "--chi"]);
        assert_eq!(code, EXIT_TRUE);
        assert!(out.contains("E_H"));
    }
}
