//! `wefe`: verify weighted Einstein solution families from the command line.
//!
//! Exit codes: 0 pass, 1 a check failed, 2 usage error, 3 evaluation error.

mod args;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use thiserror::Error;
use wefe_core::analysis::{
    evaluate_quantities, identity_suite, resolve_kundt_convention, verify, AnalysisError, Checks,
    IdentityResiduals, Quantity, VerifyOptions,
};
use wefe_core::catalog::{self, sample_points, CatalogError, FamilyDef};
use wefe_core::report;

use args::{
    Cli, Command, EvalArgs, ExportArgs, FamilyArgs, IdentitiesArgs, ResolveArgs, VerifyArgs,
};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Eval(String),
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Eval(_) | CliError::Write { .. } => 3,
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> CliError {
        match e {
            CatalogError::RejectionCap { .. }
            | CatalogError::Tensor(_)
            | CatalogError::Curvature(_) => CliError::Eval(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> CliError {
        match e {
            AnalysisError::Catalog(c) => c.into(),
            AnalysisError::NotKundt(_)
            | AnalysisError::OrderTooLow(_)
            | AnalysisError::Threads(_) => CliError::Usage(e.to_string()),
            other => CliError::Eval(other.to_string()),
        }
    }
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::List { json } => list(json),
        Command::Verify(a) => run_verify(a),
        Command::Eval(a) => run_eval(a),
        Command::Export(a) => run_export(a),
        Command::Identities(a) => run_identities(a),
        Command::ResolveKundt(a) => run_resolve(a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_family(f: &FamilyArgs) -> Result<(FamilyDef, Vec<(String, String)>), CliError> {
    let def = match (&f.family, &f.config) {
        (Some(id), None) => catalog::builtin(id)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", path.display())))?;
            catalog::from_toml(&text)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --family or --config".into(),
            ))
        }
    };
    let overrides = f
        .params
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Usage(format!("--param expects name=value, got `{p}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((def, overrides))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Write {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn json_line(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn list(json: bool) -> Result<Outcome, CliError> {
    let families = catalog::list_families();
    let text = if json {
        json_line(&families)
    } else {
        let width = families.iter().map(|f| f.id.len()).max().unwrap_or(0);
        let mut text = String::new();
        for f in &families {
            let class = serde_json::to_value(f.class).expect("serializable");
            text.push_str(&format!(
                "{:width$}  {:20}  {}\n",
                f.id,
                class.as_str().unwrap_or_default(),
                f.anchor
            ));
        }
        text
    };
    emit(None, &text)?;
    Ok(Outcome::Pass)
}

fn parse_checks(skip: &[String]) -> Result<Checks, CliError> {
    let mut checks = Checks::default();
    for name in skip {
        match name.as_str() {
            "gh" => checks.gh = false,
            "identities" => checks.identities = false,
            "classification" => checks.classification = false,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown check `{other}`; expected gh, identities or classification"
                )))
            }
        }
    }
    Ok(checks)
}

fn run_verify(a: VerifyArgs) -> Result<Outcome, CliError> {
    let (def, overrides) = load_family(&a.family)?;
    if a.points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    let opts = VerifyOptions {
        points: a.points,
        seed: a.seed,
        order: a.order,
        tol: a.tol,
        checks: parse_checks(&a.skip)?,
    };
    let start = Instant::now();
    let report = verify(&def, &overrides, &opts)?;
    let timing = a.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    emit(a.out.as_deref(), &report::to_json(&report, timing))?;

    let verdict = if report.passed() { "pass" } else { "FAIL" };
    eprintln!(
        "{}: {verdict} ({} points, seed {}, order {}, tol {:e})",
        report.meta.family, opts.points, opts.seed, opts.order, opts.tol
    );
    for c in &report.aggregate.checks {
        eprintln!(
            "  [{}] {}: {}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(if report.passed() {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn parse_point(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid coordinate `{s}` in --point")))
        })
        .collect()
}

fn run_eval(a: EvalArgs) -> Result<Outcome, CliError> {
    let (def, overrides) = load_family(&a.family)?;
    let inst = catalog::instantiate(&def, &overrides)?;
    let point = parse_point(&a.point)?;
    if point.len() != inst.dim() {
        return Err(CliError::Usage(format!(
            "--point has {} coordinates; the chart ({}) has {}",
            point.len(),
            inst.scope.coords.join(", "),
            inst.dim()
        )));
    }
    let quantities = match &a.quantities {
        None => Quantity::ALL.to_vec(),
        Some(list) => list
            .iter()
            .map(|name| {
                Quantity::from_name(name).ok_or_else(|| {
                    let known: Vec<&str> = Quantity::ALL.iter().map(|q| q.name()).collect();
                    CliError::Usage(format!(
                        "unknown quantity `{name}`; expected one of {}",
                        known.join(", ")
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let values = evaluate_quantities(&inst, &point, a.order, &quantities)?;
    let doc = serde_json::json!({
        "family": inst.id(),
        "coords": inst.scope.coords,
        "point": point,
        "order": a.order,
        "quantities": values,
    });
    emit(None, &json_line(&doc))?;
    Ok(Outcome::Pass)
}

fn run_export(a: ExportArgs) -> Result<Outcome, CliError> {
    let (def, overrides) = load_family(&a.family)?;
    let def = catalog::apply_overrides(&def, &overrides)?;
    catalog::instantiate(&def, &[])?;
    emit(a.out.as_deref(), &catalog::export(&def))?;
    Ok(Outcome::Pass)
}

fn run_identities(a: IdentitiesArgs) -> Result<Outcome, CliError> {
    let (def, overrides) = load_family(&a.family)?;
    let inst = catalog::instantiate(&def, &overrides)?;
    let points = sample_points(&inst, a.points, a.seed)?;
    let table = identity_suite(&inst, &points, a.order)?;
    let mut max = [0.0f64; 6];
    for row in &table {
        for (m, v) in max.iter_mut().zip(row.values()) {
            *m = m.max(v);
        }
    }
    let passed = max.iter().all(|&m| m < a.tol);
    let doc = serde_json::json!({
        "family": inst.id(),
        "seed": a.seed,
        "order": a.order,
        "tol": a.tol,
        "points": points.iter().zip(&table).map(|(p, r)| serde_json::json!({ "coords": p, "residuals": r })).collect::<Vec<_>>(),
        "max_residuals": IdentityResiduals::NAMES.iter().zip(max).map(|(n, m)| (n.to_string(), m)).collect::<std::collections::BTreeMap<_, _>>(),
        "verdict": if passed { "pass" } else { "fail" },
    });
    emit(None, &json_line(&doc))?;
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn run_resolve(a: ResolveArgs) -> Result<Outcome, CliError> {
    let (def, overrides) = load_family(&a.family)?;
    let r = resolve_kundt_convention(&def, &overrides, a.seed, a.order, a.tol)?;
    emit(None, &json_line(&r))?;
    match r.selected {
        Some(c) => {
            eprintln!("{}: convention {}", def.id, c.name());
            Ok(Outcome::Pass)
        }
        None => {
            eprintln!("{}: ambiguous, needs review", def.id);
            Ok(Outcome::Fail)
        }
    }
}
