//! One function per subcommand. Each loads its input, runs the library and
//! shapes the result into a report.

use relaxflow::acpf::identities::{sweep, SweepRanges};
use relaxflow::acpf::newton::{newton_solve, Controls, NewtonError, NewtonOptions};
use relaxflow::acpf::{max_kcl_residual, operational_violations};
use relaxflow::bijection::{verify_equivalence_with, Corruption, EquivalenceOptions};
use relaxflow::case_io::{self, write_native, CaseFormat, ConvertError, LoadError};
use relaxflow::coneprog::{self, SolveOptions, Status};
use relaxflow::netmodel::ModelError;
use relaxflow::relax::{extract_point, Objective, Relaxation};
use relaxflow::Network;
use serde_json::{json, Value};

use crate::report::Report;
use crate::{
    CaseArg, Cli, Command, Failure, Format, IdentitiesArgs, Model, ObjectiveArg, Outcome, ParseArgs, PfArgs, RelaxArgs,
    VerifyArgs, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY,
};

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Parse(args) => parse(args, cli.degenerate),
        Command::Pf(args) => pf(args, cli.degenerate),
        Command::Relax(args) => relax(args, cli.degenerate),
        Command::Verify(args) => verify(args, cli.degenerate),
        Command::Identities(args) => identities(args, cli.degenerate),
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must be a positive finite number, got {v}")))
    }
}

fn input_failure(e: LoadError) -> Failure {
    let details: Vec<String> = match &e {
        LoadError::Invalid(ModelError::Invalid(vs)) => vs.iter().map(|v| v.to_string()).collect(),
        LoadError::Convert(ConvertError::Invalid(vs)) => vs.iter().map(|v| v.to_string()).collect(),
        _ => Vec::new(),
    };
    let message =
        if details.is_empty() { e.to_string() } else { format!("case failed validation with {} violation(s)", details.len()) };
    Failure::Input { message, details }
}

/// Loads, validates and optionally degenerates a case.
fn load_case(arg: &CaseArg, degenerate: bool) -> Result<Network, Failure> {
    let format = arg.format.map(|f| match f {
        Format::Matpower => CaseFormat::Matpower,
        Format::Native => CaseFormat::Native,
    });
    let net = case_io::load(&arg.case_path, format).map_err(input_failure)?;
    if !degenerate {
        return Ok(net);
    }
    let net = net.degenerate();
    net.ensure_valid().map_err(|e| input_failure(LoadError::Invalid(e)))?;
    Ok(net)
}

fn case_name(arg: &CaseArg) -> Option<String> {
    Some(arg.case_path.display().to_string())
}

fn parse(args: &ParseArgs, degenerate: bool) -> Result<Outcome, Failure> {
    let net = load_case(&args.case, degenerate)?;
    let native = write_native(&net).map_err(|e| Failure::Input { message: e.to_string(), details: Vec::new() })?;
    let Some(out) = &args.out else {
        // The native document is itself the report.
        let value: Value = serde_json::from_str(&native).expect("native writer emits JSON");
        return Ok(Outcome { report: Report::new("parse", case_name(&args.case), degenerate, value), code: EXIT_OK });
    };
    std::fs::write(out, &native)
        .map_err(|e| Failure::Input { message: format!("cannot write {}: {e}", out.display()), details: Vec::new() })?;
    let result = json!({
        "name": net.name,
        "base_mva": net.base_mva,
        "buses": net.buses.len(),
        "branches": net.branches.len(),
        "generators": net.generators.len(),
        "out": out.display().to_string(),
    });
    Ok(Outcome { report: Report::new("parse", case_name(&args.case), degenerate, result), code: EXIT_OK })
}

fn pf(args: &PfArgs, degenerate: bool) -> Result<Outcome, Failure> {
    positive("tol", args.tol)?;
    if args.max_iter == 0 {
        return Err(Failure::Usage("--max-iter must be at least 1".into()));
    }
    let net = load_case(&args.case, degenerate)?;
    let opts = NewtonOptions { tol: args.tol, max_iter: args.max_iter };
    let name = case_name(&args.case);
    let sol = match newton_solve(&net, &Controls::from_network(&net), opts) {
        Ok(sol) => sol,
        Err(NewtonError::NonConvergence { iterations, trace }) => {
            let result = json!({"status": "non-converged", "reason": "iteration-limit", "iterations": iterations, "trace": trace});
            return Ok(Outcome { report: Report::new("pf", name, degenerate, result), code: EXIT_SOLVER });
        }
        Err(NewtonError::SingularJacobian { iteration, trace }) => {
            let result = json!({"status": "non-converged", "reason": "singular-jacobian", "iterations": iteration, "trace": trace});
            return Ok(Outcome { report: Report::new("pf", name, degenerate, result), code: EXIT_SOLVER });
        }
        Err(e) => return Err(Failure::Input { message: e.to_string(), details: Vec::new() }),
    };
    let state = &sol.state;
    let internal = |e: &dyn std::fmt::Display| Failure::Input { message: e.to_string(), details: Vec::new() };
    let violations = operational_violations(&net, state, args.tol).map_err(|e| internal(&e))?;
    let kcl = max_kcl_residual(&net, state).map_err(|e| internal(&e))?;
    let buses: Vec<Value> = net
        .buses
        .iter()
        .zip(&sol.bus_kinds)
        .zip(&state.voltages)
        .map(|((b, kind), v)| json!({"id": b.id, "kind": kind, "magnitude": v.norm(), "angle": v.arg()}))
        .collect();
    let flows: Vec<Value> = net
        .branches
        .iter()
        .zip(&state.flows)
        .enumerate()
        .map(|(k, (br, f))| {
            json!({"branch": k, "from_bus": br.from_bus, "to_bus": br.to_bus, "from": [f.from.re, f.from.im], "to": [f.to.re, f.to.im]})
        })
        .collect();
    let generation: Vec<Value> = net
        .generators
        .iter()
        .zip(&state.generation)
        .enumerate()
        .map(|(g, (gen, s))| json!({"generator": g, "bus": gen.bus, "p": s.re, "q": s.im}))
        .collect();
    let p: Vec<f64> = state.generation.iter().map(|s| s.re).collect();
    let result = json!({
        "status": "converged",
        "iterations": sol.iterations,
        "trace": sol.trace,
        "max_kcl_residual": kcl,
        "cost": net.generation_cost(&p),
        "buses": buses,
        "flows": flows,
        "generation": generation,
        "violations": violations,
    });
    Ok(Outcome { report: Report::new("pf", name, degenerate, result), code: EXIT_OK })
}

fn relax(args: &RelaxArgs, degenerate: bool) -> Result<Outcome, Failure> {
    positive("tol", args.tol)?;
    let net = load_case(&args.case, degenerate)?;
    let relaxation = match args.model {
        Model::Soc => Relaxation::Soc,
        Model::Cdf => Relaxation::Cdf,
        Model::CdfReal => Relaxation::CdfReal,
    };
    let objective = match args.objective {
        ObjectiveArg::Feasibility => Objective::Feasibility,
        ObjectiveArg::Cost => Objective::Cost,
    };
    let (prog, map) = relaxation
        .build(&net, &objective)
        .map_err(|e| Failure::Input { message: e.to_string(), details: Vec::new() })?;
    let opts = SolveOptions { tol: args.tol, ..SolveOptions::default() };
    let sol = coneprog::solve(&prog, &opts).map_err(|e| Failure::Input { message: e.to_string(), details: Vec::new() })?;
    let optimal = sol.status == Status::Optimal;
    let check = prog.check_point(&sol.x, args.tol).expect("solver vector matches program");
    let point = if optimal { Some(extract_point(&map, &sol.x).expect("solver vector matches map")) } else { None };
    let result = json!({
        "model": relaxation,
        "objective_kind": match args.objective {
            ObjectiveArg::Feasibility => "feasibility",
            ObjectiveArg::Cost => "cost",
        },
        "status": sol.status.to_string(),
        "objective": sol.objective,
        "dual_objective": sol.dual_objective,
        "iterations": sol.iterations,
        "variables": prog.n_vars,
        "equalities": prog.equalities.len(),
        "inequalities": prog.inequalities.len(),
        "cones": prog.rsoc.len() + prog.soc.len(),
        "residuals": {
            "max_equality": sol.max_eq_residual,
            "max_inequality": sol.max_ineq_violation,
            "max_cone": sol.max_cone_violation,
            "worst": check.worst,
            "worst_label": check.worst_label,
            "families": check.families,
        },
        "point": point,
    });
    let code = if optimal { EXIT_OK } else { EXIT_SOLVER };
    Ok(Outcome { report: Report::new("relax", case_name(&args.case), degenerate, result), code })
}

fn verify(args: &VerifyArgs, degenerate: bool) -> Result<Outcome, Failure> {
    positive("tol", args.tol)?;
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    let net = load_case(&args.case, degenerate)?;
    if let Some((branch, _)) = args.corrupt {
        if branch >= net.branches.len() {
            return Err(Failure::Usage(format!("--corrupt names branch {branch}, case has {}", net.branches.len())));
        }
    }
    let mut opts = EquivalenceOptions::new(args.samples, args.tol, args.seed);
    opts.corruption = args.corrupt.map(|(branch, delta)| Corruption { branch, delta });
    let report = verify_equivalence_with(&net, &opts).map_err(|e| Failure::Input { message: e.to_string(), details: Vec::new() })?;
    if let Some(first) = report.failures.first() {
        eprintln!(
            "verification failed: sample {} ({:?}) violates {} by {:.3e}",
            first.sample, first.direction, first.label, first.violation
        );
    }
    let code = if report.passed { EXIT_OK } else { EXIT_VERIFY };
    Ok(Outcome { report: Report::new("verify", case_name(&args.case), degenerate, report), code })
}

fn identities(args: &IdentitiesArgs, degenerate: bool) -> Result<Outcome, Failure> {
    if args.draws == 0 {
        return Err(Failure::Usage("--draws must be at least 1".into()));
    }
    let ranges = if degenerate { SweepRanges::default().simple() } else { SweepRanges::default() };
    let report = sweep(args.seed, args.draws, ranges);
    let per_identity: serde_json::Map<String, Value> = report.entries().iter().map(|&(k, v)| (k.to_string(), json!(v))).collect();
    let result = json!({
        "draws": report.draws,
        "seed": report.seed,
        "max_relative_residual": per_identity,
        "worst": report.worst(),
        "imaginary_residue": report.imaginary_residue,
    });
    Ok(Outcome { report: Report::new("identities", None, degenerate, result), code: EXIT_OK })
}
