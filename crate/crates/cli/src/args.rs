use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wefe_core::analysis::{DEFAULT_ORDER, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(
    name = "wefe",
    version,
    about = "Check solutions of the vacuum weighted Einstein field equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in solution families.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Sample a family, check the equation, identities and classification, and write a JSON report.
    Verify(VerifyArgs),
    /// Print curvature quantities at one point as JSON.
    Eval(EvalArgs),
    /// Print a family definition in the config format.
    Export(ExportArgs),
    /// Run the identity suite on sampled points.
    Identities(IdentitiesArgs),
    /// Decide which reading of the Kundt cross terms solves the equation.
    ResolveKundt(ResolveArgs),
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    /// Built-in family id (see `wefe list`).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub family: Option<String>,
    /// Family definition file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a parameter or slot, as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Jet order; divergence identities need at least 3.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Checks to disable: gh, identities, classification.
    #[arg(long, value_delimiter = ',')]
    pub skip: Vec<String>,
    /// Record wall-clock time in the report header.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Comma-separated coordinates in chart order.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Comma-separated quantity names; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub quantities: Option<Vec<String>>,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IdentitiesArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}
