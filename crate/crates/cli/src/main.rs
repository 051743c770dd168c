//! `halfcake` command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 on a verification or
//! reproduction mismatch, 2 on invalid input.

mod reproduce;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use halfcake::feasibility::{family_applies, half_cake_verdict, reduced_rank_feasible, Feasibility};
use halfcake::replication::{outer_bound, search_bounds_with, RankMode, ReplicationPlan};
use halfcake::schemes::{
    ergodic_half_cake, example2_scheme, scheme_for_family, verify_scheme, with_resampling, LinearScheme,
};
use halfcake::{
    extend_ergodic_pair, presets, sample_generic, ChannelRealization, Dof, ExtendedRealization, NetworkSpec,
    ScalarDomain,
};

/// Resampling attempts for scheme constructors hitting a degenerate draw.
const ATTEMPTS: usize = 8;

#[derive(Parser)]
#[command(name = "halfcake", version, about = "DoF analysis for rank-constrained MIMO interference channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArg {
    /// Network spec JSON: {"K", "M", "N", "D"}.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in network instead of a file.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct OutArg {
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    trials: usize,
    #[arg(long = "mu-max", default_value_t = 3)]
    mu_max: usize,
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Verdict, best outer bound and achievable schemes in one report.
    Analyze {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Reduced-rank feasibility and the half-cake verdict.
    Feasibility {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Outer bound of one replication plan, or the best found by search.
    Bound {
        #[command(flatten)]
        spec: SpecArg,
        /// Replication plan JSON; omitted means search.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Concrete channel for the rank instead of generic trials.
        #[arg(long)]
        channel: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Checks a linear scheme against a channel realization.
    Verify {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Draws a generic channel realization.
    Sample {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `complex` or `prime-field`.
        #[arg(long, default_value = "complex")]
        domain: String,
        /// Two slots with shared cross links (complex only).
        #[arg(long)]
        ergodic: bool,
        /// With --ergodic, also write the ergodic half-cake scheme here.
        #[arg(long = "scheme-out", requires = "ergodic")]
        scheme_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Re-runs a built-in reference computation and checks its values.
    Reproduce {
        /// counterexample, example-2x3, example-asym, theorem5, theorem6, lemma1-equiv
        target: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Mismatch(Value, Option<PathBuf>),
    Input(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(report, out)) => match emit(&report, out.as_deref()) {
            Ok(()) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(arg: &SpecArg) -> Result<NetworkSpec> {
    if let Some(name) = &arg.preset {
        return presets::by_name(name).with_context(|| format!("unknown preset {name:?}"));
    }
    let path = arg.spec.as_ref().expect("clap requires --spec or --preset");
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    NetworkSpec::from_json_str(&text).with_context(|| format!("invalid spec {}", path.display()))
}

fn load_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Analyze { spec, search, tol, out } => {
            let spec = load_spec(&spec)?;
            emit(&analyze(&spec, &search, tol)?, out.out.as_deref())?;
        }
        Command::Feasibility { spec, out } => {
            let spec = load_spec(&spec)?;
            let flow = match reduced_rank_feasible(&spec)? {
                Feasibility::Feasible(cert) => json!({"feasible": true, "certificate": cert}),
                Feasibility::Infeasible(cut) => json!({"feasible": false, "cut": cut}),
            };
            let verdict = half_cake_verdict(&spec)?;
            emit(&json!({"spec": spec, "flow": flow, "verdict": verdict}), out.out.as_deref())?;
        }
        Command::Bound {
            spec,
            plan,
            channel,
            search,
            out,
        } => {
            let spec = load_spec(&spec)?;
            let mode = match &channel {
                Some(path) => RankMode::Realized(ChannelRealization::from_json(&spec, &load_json(path)?)?),
                None => RankMode::Generic {
                    trials: search.trials,
                    seed: search.seed,
                },
            };
            let report = match plan {
                Some(path) => {
                    let plan: ReplicationPlan = serde_json::from_value(load_json(&path)?)
                        .with_context(|| format!("invalid plan {}", path.display()))?;
                    json!({"spec": spec, "bound": outer_bound(&spec, &plan, &mode)?})
                }
                None => {
                    if channel.is_some() {
                        return Err(anyhow::anyhow!("--channel needs --plan").into());
                    }
                    let found =
                        search_bounds_with(&spec, search.mu_max, search.budget, search.trials, search.seed, |_| {})?;
                    json!({
                        "spec": spec,
                        "bound": found.best,
                        "evaluated": found.evaluated,
                        "pruned": found.pruned,
                        "mu_max": search.mu_max,
                        "budget": search.budget,
                        "seed": search.seed,
                    })
                }
            };
            emit(&report, out.out.as_deref())?;
        }
        Command::Verify {
            spec,
            channel,
            scheme,
            tol,
            out,
        } => {
            let spec = load_spec(&spec)?;
            let ext = ExtendedRealization::from_json(&spec, &load_json(&channel)?)?;
            let scheme = LinearScheme::from_json(&spec, &load_json(&scheme)?)?;
            let report = verify_scheme(&ext, &scheme, tol)?;
            let value = serde_json::to_value(&report)?;
            if !report.pass {
                return Err(Failure::Mismatch(value, out.out));
            }
            emit(&value, out.out.as_deref())?;
        }
        Command::Sample {
            spec,
            seed,
            domain,
            ergodic,
            scheme_out,
            out,
        } => {
            let spec = load_spec(&spec)?;
            let domain = ScalarDomain::from_tag(&domain)?;
            let value = if ergodic {
                if !domain.is_complex() {
                    return Err(anyhow::anyhow!("--ergodic samples complex channels only").into());
                }
                let ext = extend_ergodic_pair(&spec, seed);
                if let Some(path) = scheme_out {
                    emit(&ergodic_half_cake(&ext)?.to_json(), Some(&path))?;
                }
                ext.to_json()
            } else {
                sample_generic(&spec, seed, domain).to_json()
            };
            emit(&value, out.out.as_deref())?;
        }
        Command::Reproduce {
            target,
            seed,
            trials,
            tol,
            out,
        } => {
            let report = reproduce::run(&target, seed, trials, tol)?;
            let pass = report["pass"].as_bool().unwrap_or(false);
            if !pass {
                return Err(Failure::Mismatch(report, out.out));
            }
            emit(&report, out.out.as_deref())?;
        }
    }
    Ok(())
}

fn scheme_entry(name: Value, ext: &ExtendedRealization, scheme: &LinearScheme, tol: f64) -> Result<(Value, Option<Dof>)> {
    let report = verify_scheme(ext, scheme, tol)?;
    let entry = json!({
        "scheme": name,
        "seed": ext.seed(),
        "dof": report.dof,
        "sum_dof": report.sum_dof,
        "pass": report.pass,
        "max_residual": report.max_residual,
    });
    Ok((entry, report.pass.then_some(report.sum_dof)))
}

fn analyze(spec: &NetworkSpec, search: &SearchArgs, tol: f64) -> Result<Value> {
    let start = Instant::now();
    let mut notes = Vec::new();
    let verdict = if spec.is_square() {
        Some(half_cake_verdict(spec)?)
    } else {
        notes.push("no half-cake verdict: M != N".to_string());
        None
    };
    let found = search_bounds_with(spec, search.mu_max, search.budget, search.trials, search.seed, |_| {})?;

    let mut schemes = Vec::new();
    let mut best: Option<Dof> = None;
    let mut record = |entry: (Value, Option<Dof>)| {
        if let Some(d) = entry.1 {
            best = Some(best.map_or(d, |b| b.max(d)));
        }
        schemes.push(entry.0);
    };
    match with_resampling(spec, search.seed, ATTEMPTS, ergodic_half_cake) {
        Ok((ext, s)) => record(scheme_entry(json!("ergodic-half-cake"), &ext, &s, tol)?),
        Err(e) => notes.push(format!("ergodic scheme unavailable: {e}")),
    }
    if let Some(family) = verdict.as_ref().and_then(|v| v.scheme_family) {
        if family_applies(spec, family) {
            match with_resampling(spec, search.seed, ATTEMPTS, |e| scheme_for_family(e, family)) {
                Ok((ext, s)) => record(scheme_entry(serde_json::to_value(family)?, &ext, &s, tol)?),
                Err(e) => notes.push(format!("scheme family unavailable: {e}")),
            }
        }
    }
    if *spec == presets::example_asym() {
        let real = sample_generic(spec, search.seed, ScalarDomain::complex());
        let built = example2_scheme(&real)?;
        record(scheme_entry(json!("single-slot-7-3-2"), &ExtendedRealization::single(real), &built.scheme, tol)?);
    }

    let bound = found.best.as_ref().map(|b| b.value);
    let optimal = match (bound, best) {
        (Some(b), Some(a)) if a == b => Some(a),
        _ => verdict
            .as_ref()
            .filter(|v| v.status == halfcake::feasibility::VerdictStatus::OptimalCertified)
            .and_then(|v| v.bound),
    };
    Ok(json!({
        "spec": spec,
        "half_cake": Dof::half(spec.m_sum()),
        "verdict": verdict,
        "outer_bound": {
            "best": found.best,
            "evaluated": found.evaluated,
            "pruned": found.pruned,
        },
        "achievability": schemes,
        "achievable": best,
        "sum_dof": optimal,
        "seeds": {"seed": search.seed, "trials": search.trials, "mu_max": search.mu_max, "budget": search.budget},
        "tolerance": tol,
        "elapsed_ms": start.elapsed().as_millis() as u64,
        "notes": notes,
    }))
}
