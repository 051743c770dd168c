//! Built-in reference computations with their expected values.

use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use halfcake::feasibility::{half_cake_verdict, reduced_rank_feasible, VerdictStatus, Witness};
use halfcake::linalg::{generic_rank, RankShape};
use halfcake::replication::{example_2x3_plan, mirror_plan, outer_bound, RankMode};
use halfcake::schemes::{counterexample_scheme, example2_scheme, verify_scheme, with_resampling};
use halfcake::{presets, sample_generic, Dof, Error, ExtendedRealization, NetworkSpec, ScalarDomain};

pub const TARGETS: [&str; 6] = [
    "counterexample",
    "example-2x3",
    "example-asym",
    "theorem5",
    "theorem6",
    "lemma1-equiv",
];

const ATTEMPTS: u64 = 8;
const LEMMA1_SPECS: usize = 200;

struct Checks(Vec<Value>);

impl Checks {
    fn push(&mut self, name: &str, expected: impl serde::Serialize, observed: impl serde::Serialize) {
        let (e, o) = (json!(expected), json!(observed));
        let pass = e == o;
        self.0.push(json!({"check": name, "expected": e, "observed": o, "pass": pass}));
    }

    fn flag(&mut self, name: &str, ok: bool, observed: impl serde::Serialize) {
        self.0.push(json!({"check": name, "expected": true, "observed": json!(observed), "pass": ok}));
    }

    fn pass(&self) -> bool {
        self.0.iter().all(|c| c["pass"] == json!(true))
    }
}

pub fn run(target: &str, seed: u64, trials: usize, tol: f64) -> Result<Value> {
    let mut checks = Checks(Vec::new());
    let details = match target {
        "counterexample" => counterexample(&mut checks, seed, trials, tol)?,
        "example-2x3" => example_2x3(&mut checks, seed, trials)?,
        "example-asym" => example_asym(&mut checks, seed, trials, tol)?,
        "theorem5" => boundary(&mut checks, presets::theorem5_instance(), Witness::CooperationBoundary)?,
        "theorem6" => boundary(&mut checks, presets::theorem6_instance(), Witness::ReplicationBoundary)?,
        "lemma1-equiv" => lemma1(&mut checks, seed, trials)?,
        other => bail!("unknown target {other:?}; expected one of {}", TARGETS.join(", ")),
    };
    Ok(json!({
        "target": target,
        "seed": seed,
        "trials": trials,
        "pass": checks.pass(),
        "checks": checks.0,
        "details": details,
    }))
}

fn counterexample(checks: &mut Checks, seed: u64, trials: usize, tol: f64) -> Result<Value> {
    let spec = presets::counterexample();
    let verdict = half_cake_verdict(&spec)?;
    checks.flag(
        "no optimality certificate",
        verdict.status != VerdictStatus::OptimalCertified,
        verdict.status,
    );
    checks.push(
        "generic rank of the stripped matrix",
        23,
        generic_rank(&spec, &RankShape::Stripped, trials, seed),
    );
    let (ext, scheme) = with_resampling(&spec, seed, ATTEMPTS as usize, counterexample_scheme)?;
    let report = verify_scheme(&ext, &scheme, tol)?;
    checks.flag("aligned scheme verifies", report.pass, report.max_residual);
    checks.push("aligned scheme sum DoF", Dof::new(25, 2), report.sum_dof);
    Ok(json!({"verdict": verdict, "scheme_seed": ext.seed(), "report": report}))
}

fn example_2x3(checks: &mut Checks, seed: u64, trials: usize) -> Result<Value> {
    let spec = presets::example_2x3();
    let plan = example_2x3_plan();
    let generic = outer_bound(&spec, &plan, &RankMode::Generic { trials, seed })?;
    let witness = outer_bound(&spec, &plan, &RankMode::Realized(presets::example_2x3_witness()))?;
    checks.push("bound", Dof::new(18, 5), generic.value);
    checks.push("generic cooperative rank", 18, generic.rank);
    checks.push("witness cooperative rank", 18, witness.rank);
    Ok(json!({"bound": generic, "witness_rank": witness.rank}))
}

fn example_asym(checks: &mut Checks, seed: u64, trials: usize, tol: f64) -> Result<Value> {
    let spec = presets::example_asym();
    let plan = mirror_plan(3)?;
    let generic = outer_bound(&spec, &plan, &RankMode::Generic { trials, seed })?;
    let witness = outer_bound(&spec, &plan, &RankMode::Realized(presets::example_asym_witness()))?;
    checks.push("bound", Dof::integer(12), generic.value);
    checks.push("generic cooperative rank", 23, generic.rank);
    checks.push("witness cooperative rank", 23, witness.rank);

    let mut last = None;
    for s in seed..seed + ATTEMPTS {
        let real = sample_generic(&spec, s, ScalarDomain::complex());
        match example2_scheme(&real) {
            Ok(built) => {
                let report = verify_scheme(&ExtendedRealization::single(real), &built.scheme, tol)?;
                checks.flag("single-slot scheme verifies", report.pass, report.max_residual);
                checks.push("DoF tuple", [7, 3, 2].map(Dof::integer), &report.dof);
                checks.push("overlap width", 4, built.intersection_width);
                return Ok(json!({
                    "bound": generic,
                    "witness_rank": witness.rank,
                    "scheme_seed": s,
                    "interference_dims": built.interference_dims,
                    "report": report,
                }));
            }
            Err(e @ Error::NullSpaceEmpty(_)) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last.expect("attempted at least once").into())
}

fn boundary(checks: &mut Checks, spec: NetworkSpec, witness: Witness) -> Result<Value> {
    let verdict = half_cake_verdict(&spec)?;
    let flow = reduced_rank_feasible(&spec)?;
    checks.push("status", VerdictStatus::OptimalCertified, verdict.status);
    checks.push("bound", Dof::half(spec.m_sum()), verdict.bound);
    checks.flag("witness", verdict.witnesses.contains(&witness), &verdict.witnesses);
    checks.flag("no reduced-rank certificate", !flow.is_feasible(), flow.is_feasible());
    Ok(json!({"spec": spec, "verdict": verdict}))
}

fn lemma1(checks: &mut Checks, seed: u64, trials: usize) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agree, mut feasible) = (0, 0);
    let mut disagreements = Vec::new();
    for _ in 0..LEMMA1_SPECS {
        let spec = presets::random_square_spec(&mut rng, 4, 5);
        let flow = reduced_rank_feasible(&spec)?.is_feasible();
        let full = generic_rank(&spec, &RankShape::Stripped, trials, seed) == spec.m_sum();
        feasible += usize::from(flow);
        if flow == full {
            agree += 1;
        } else {
            disagreements.push(json!({"spec": spec, "flow": flow, "full_rank": full}));
        }
    }
    checks.push("agreement rate", Dof::integer(1), Dof::new(agree as i64, LEMMA1_SPECS as i64));
    Ok(json!({"specs": LEMMA1_SPECS, "feasible": feasible, "disagreements": disagreements}))
}
