//! Command-line driver. Exit codes: 0 success, 1 usage, 2 config,
//! 3 solver failure, 4 invariant violation.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::grid::StaggeredGrid;
use crate::mms::{self, CaseKind};
use crate::runner::{run_scenario, RunOptions};
use crate::scenarios::{self, SnapshotFormat};
use crate::selfcheck;
use crate::stepper::StepError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "wormhole", version, about = "Acid wormhole propagation with heat transmission on staggered grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Vtk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    Example1,
    Example2,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a dissolution scenario: a preset (example3, example4, example5)
    /// or a TOML file.
    Run {
        scenario: String,
        /// Output directory (the WORMHOLE_OUTPUT_DIR environment variable
        /// takes precedence).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Number of evenly spaced snapshots after the initial one.
        #[arg(long)]
        snapshots: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<FormatArg>>,
        /// Do not write any files.
        #[arg(long)]
        no_output: bool,
        /// Print the resolved configuration as TOML and exit.
        #[arg(long)]
        print_config: bool,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Manufactured-solution convergence study with dt = h^2.
    Converge {
        #[arg(value_enum)]
        case: CaseArg,
        /// Cells per axis of each mesh.
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        meshes: Vec<usize>,
        /// Also write the table as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Invariant self-tests: adjoint identity, closure dual forms and the
    /// manufactured-source residual oracle.
    Check,
}

/// Parses `args` (program name first) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { scenario, output, snapshots, format, no_output, print_config, quiet } => {
            let mut cfg = match scenarios::load(&scenario) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            if output.is_some() {
                cfg.output.directory = output;
            }
            if let Some(n) = snapshots {
                cfg.output.snapshots = n;
            }
            if let Some(f) = format {
                cfg.output.formats = f
                    .into_iter()
                    .map(|f| match f {
                        FormatArg::Csv => SnapshotFormat::Csv,
                        FormatArg::Vtk => SnapshotFormat::Vtk,
                    })
                    .collect();
            }
            if print_config {
                print!("{}", cfg.to_toml());
                return EXIT_OK;
            }
            match run_scenario(&cfg, &RunOptions { no_files: no_output, progress: !quiet }) {
                Ok(summary) => {
                    print!("{}", summary.to_text());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Converge { case, meshes, csv } => {
            let kind = match case {
                CaseArg::Example1 => CaseKind::Example1,
                CaseArg::Example2 => CaseKind::Example2,
            };
            if meshes.is_empty() || meshes.contains(&0) {
                eprintln!("error: --meshes needs positive cell counts");
                return EXIT_USAGE;
            }
            match mms::run_convergence_study(&mms::case(kind), &meshes) {
                Ok(report) => {
                    print!("{}", report.to_text());
                    if let Some(path) = csv {
                        if let Err(e) = std::fs::write(&path, report.to_csv()) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return EXIT_CONFIG;
                        }
                    }
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    match e {
                        StepError::Invariant { .. } => EXIT_INVARIANT,
                        _ => EXIT_SOLVER,
                    }
                }
            }
        }
        Command::Check => run_checks(),
    }
}

/// Thresholds of the self-tests.
pub const ADJOINT_TOL: f64 = 1e-12;
pub const DUAL_FORM_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-6;

fn run_checks() -> i32 {
    let mut ok = true;
    let mut line = |name: &str, value: f64, tol: f64| {
        let pass = value <= tol;
        ok &= pass;
        println!("{} {name}: {value:.3e} (limit {tol:.0e})", if pass { "PASS" } else { "FAIL" });
        let _ = std::io::stdout().flush();
    };
    for (dim, n) in [(2, 16), (3, 8)] {
        let grid = StaggeredGrid::unit(dim, n).expect("valid grid");
        line(&format!("adjoint identity {dim}D"), selfcheck::adjoint_identity_defect(&grid, 100, 7), ADJOINT_TOL);
    }
    line("closure dual forms", selfcheck::constitutive_dual_form_defect(10_000, 11), DUAL_FORM_TOL);
    for (kind, n) in [(CaseKind::Example1, 160), (CaseKind::Example2, 24)] {
        let case = mms::case(kind);
        let res = selfcheck::mms_residual(&case, n, &[0.25, 1.0]);
        let worst = res.iter().cloned().fold(0.0, f64::max);
        line(&format!("manufactured source residual {kind:?}"), worst, RESIDUAL_TOL);
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_INVARIANT
    }
}
