//! `qeqlog`: run the quantitative equational logic toolkit on a JSON
//! workspace.
//!
//! Reports go to stdout as JSON. Exit status is 0 for a positive answer,
//! 1 for a negative one and 2 for any error.

mod commands;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::workspace::{Overrides, Workspace};

#[derive(Parser, Debug)]
#[command(name = "qeqlog", version, about = "Quantitative equational logic over generalised metric spaces")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Workspace file.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Maximum term depth of the bounded universe.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Grid denominator q for the distance grid {0, 1/q, ..., 1}.
    #[arg(long, global = true)]
    grid: Option<u32>,
    /// Cap on interpretations enumerated per satisfaction check.
    #[arg(long = "budget-interps", global = true)]
    budget_interps: Option<u64>,
    /// Cap on rule instances examined by one saturation run.
    #[arg(long = "budget-instances", global = true)]
    budget_instances: Option<u64>,
    /// Include derivation trees in the report.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Is the algebra a model of the theory?
    CheckModel {
        #[arg(long)]
        algebra: String,
        #[arg(long)]
        theory: String,
    },
    /// Is `lhs = rhs` (or `lhs =_eps rhs`) derivable over the space?
    Derive {
        #[command(flatten)]
        query: Query,
        #[arg(long)]
        eps: Option<String>,
    },
    /// Least derivable distance between two terms.
    Distance {
        #[command(flatten)]
        query: Query,
    },
    /// The depth-bounded free algebra over a space.
    Free {
        #[arg(long)]
        theory: String,
        #[arg(long)]
        space: String,
    },
    /// Does every model in the catalog satisfy the judgment?
    Entail {
        #[command(flatten)]
        query: Query,
        #[arg(long)]
        eps: Option<String>,
        /// Comma-separated algebra names.
        #[arg(long, value_delimiter = ',')]
        catalog: Vec<String>,
    },
    /// Checks the unit and associativity laws of the term monad.
    MonadLaws {
        #[arg(long)]
        theory: String,
        #[arg(long)]
        space: String,
    },
    /// Existence and uniqueness of the homomorphic extension of a map.
    Ump {
        #[arg(long)]
        theory: String,
        #[arg(long)]
        space: String,
        #[arg(long)]
        algebra: String,
        /// Generator assignment such as `a=p,b=q`.
        #[arg(long)]
        map: String,
    },
    /// Builds the Eilenberg-Moore structure map of a model and reads the
    /// algebra back from it.
    EmCheck {
        #[arg(long)]
        theory: String,
        #[arg(long)]
        algebra: String,
    },
}

#[derive(Args, Debug, Clone)]
struct Query {
    #[arg(long)]
    theory: String,
    #[arg(long)]
    space: String,
    #[arg(long)]
    lhs: String,
    #[arg(long)]
    rhs: String,
}

fn run(cli: Cli) -> anyhow::Result<commands::Report> {
    let common = cli.common;
    let path = common.workspace.ok_or_else(|| anyhow::anyhow!("--workspace is required"))?;
    let ov = Overrides {
        grid: common.grid,
        depth: common.depth,
        budget_interps: common.budget_interps,
        budget_instances: common.budget_instances,
    };
    let ws = Workspace::load(&path, &ov)?;
    let ctx = commands::Ctx { ws: &ws, trace: common.trace };
    match &cli.command {
        Command::CheckModel { algebra, theory, .. } => ctx.check_model(algebra, theory),
        Command::Derive { query, eps, .. } => {
            ctx.derive(&query.theory, &query.space, &query.lhs, &query.rhs, eps.as_deref())
        }
        Command::Distance { query, .. } => ctx.distance(&query.theory, &query.space, &query.lhs, &query.rhs),
        Command::Free { theory, space, .. } => ctx.free(theory, space),
        Command::Entail { query, eps, catalog, .. } => {
            ctx.entail(&query.theory, &query.space, &query.lhs, &query.rhs, eps.as_deref(), catalog)
        }
        Command::MonadLaws { theory, space, .. } => ctx.monad_laws(theory, space),
        Command::Ump { theory, space, algebra, map, .. } => ctx.ump(theory, space, algebra, map),
        Command::EmCheck { theory, algebra, .. } => ctx.em_check(theory, algebra),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.body).expect("reports serialize"));
            ExitCode::from(if report.positive { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
