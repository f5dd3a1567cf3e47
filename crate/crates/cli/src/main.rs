//! `srk`: command-line front end for order verification, family
//! construction, simulation, stability regions, A-stability probes and
//! convergence studies.

mod error;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::CliError;
use srk_core::convergence::{strong_order_estimate, DEFAULT_PATHS, DEFAULT_STEP_COUNTS};
use srk_core::solver::{path_rng, simulate_path, ExactReference, SolverConfig};
use srk_core::stability::{a_stability_probe, region_grid, ProbeSampler};
use srk_core::tableau::effective_order;
use srk_core::{FamilyId, FamilySpec, SrkTableau, StrongOrder};

#[derive(Debug, Parser)]
#[command(
    name = "srk",
    version,
    about = "Stiffly accurate SRK schemes: orders, stability, convergence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the strong order conditions of a tableau; prints the report as JSON.
    Verify {
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Required strong order, 0.5 or 1.0.
        #[arg(long, value_parser = parse_order)]
        order: StrongOrder,
        /// Residual tolerance.
        #[arg(long, env = "SRK_DEFAULT_TOL", default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a tableau from a family specification and print it as JSON.
    Family {
        /// Family specification JSON (`-` for stdin).
        #[arg(long, conflicts_with = "default")]
        family: Option<String>,
        /// Use the documented default parameters of the named family.
        #[arg(long, value_name = "NAME", value_parser = parse_family)]
        default: Option<FamilyId>,
        /// Print the family specification instead of the tableau.
        #[arg(long)]
        spec: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one path and write the trajectory CSV.
    Simulate {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write evaluation counters as JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Mean-square gain on a real hhat-k^2 grid, written as CSV.
    Region {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = -8.0, allow_negative_numbers = true)]
        hhat_min: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        hhat_max: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ksq_min: f64,
        #[arg(long, default_value_t = 16.0, allow_negative_numbers = true)]
        ksq_max: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 400)]
        res: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the test-equation stability domain; exits 1 on a counterexample.
    Probe {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo strong order study; writes `h,rms_error` CSV.
    Converge {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Step counts, comma separated, each dividing the largest.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_STEP_COUNTS)]
        steps: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_PATHS)]
        paths: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `{slope, n_paths, seed}` as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SchemeArgs {
    /// Tableau JSON (`-` for stdin).
    #[arg(long)]
    tableau: Option<String>,
    /// Family specification JSON (`-` for stdin).
    #[arg(long)]
    family: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemKind {
    /// `dX = lambda X dt + mu X dW`.
    Gbm,
    /// `dx1 = (lambda x1 + x2) dt + mu x1 dW`, `0 = x2 - c x1`.
    ReducedSdae,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = ProblemKind::Gbm)]
    problem: ProblemKind,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
}

impl ProblemArgs {
    fn reference(&self) -> Result<ExactReference, CliError> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("c", self.c),
            ("x0", self.x0),
        ] {
            if !v.is_finite() {
                return Err(CliError::validation(
                    "arguments",
                    format!("--{name} must be finite"),
                ));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CliError::validation(
                "arguments",
                "--t-end must be positive",
            ));
        }
        Ok(match self.problem {
            ProblemKind::Gbm => ExactReference::Gbm {
                lambda: self.lambda,
                mu: self.mu,
                x0: self.x0,
            },
            ProblemKind::ReducedSdae => ExactReference::ReducedSdae {
                lambda: self.lambda,
                mu: self.mu,
                c: self.c,
                x0: self.x0,
            },
        })
    }
}

fn parse_order(s: &str) -> Result<StrongOrder, String> {
    match s.parse::<f64>() {
        Ok(0.5) => Ok(StrongOrder::Half),
        Ok(1.0) => Ok(StrongOrder::One),
        _ => Err(format!("'{s}' is not a supported order (0.5 or 1.0)")),
    }
}

fn parse_family(s: &str) -> Result<FamilyId, String> {
    s.parse()
}

fn read_input(path: &str) -> Result<String, CliError> {
    let mut text = String::new();
    if path == "-" {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation("io", format!("cannot read {path}: {e}")))?;
    }
    Ok(text)
}

impl SchemeArgs {
    fn load(&self) -> Result<SrkTableau, CliError> {
        match (&self.tableau, &self.family) {
            (Some(path), _) => Ok(serde_json::from_str(&read_input(path)?)?),
            (None, Some(path)) => {
                let spec: FamilySpec = serde_json::from_str(&read_input(path)?)?;
                Ok(spec.build()?)
            }
            (None, None) => Err(CliError::validation(
                "arguments",
                "--tableau or --family is required",
            )),
        }
    }
}

/// Runs `write` against `--out` or stdout.
fn emit<F>(out: Option<&Path>, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| {
                CliError::validation("io", format!("cannot create {}: {e}", path.display()))
            })?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify {
            scheme,
            order,
            tol,
            out,
        } => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::validation(
                    "arguments",
                    format!("tolerance {tol} must be positive"),
                ));
            }
            let t = scheme.load()?;
            let verdict = effective_order(&t, tol)?;
            emit_json(out.as_deref(), &verdict)?;
            if !verdict.meets(order) {
                let report = if order == StrongOrder::One {
                    &verdict.one
                } else {
                    &verdict.half
                };
                return Err(CliError::numeric(
                    "order_not_met",
                    format!(
                        "max residual {:e} exceeds {tol:e} at order {}",
                        report.max_residual,
                        order.value()
                    ),
                )
                .with_detail(&report.residuals));
            }
            Ok(())
        }
        Command::Family {
            family,
            default,
            spec,
            out,
        } => {
            let fs: FamilySpec = match (family, default) {
                (Some(path), _) => serde_json::from_str(&read_input(&path)?)?,
                (None, Some(id)) => id.default_spec(),
                (None, None) => {
                    return Err(CliError::validation(
                        "arguments",
                        "--family or --default is required",
                    ))
                }
            };
            let t = fs.build()?;
            if spec {
                emit_json(out.as_deref(), &fs)
            } else {
                emit_json(out.as_deref(), &t)
            }
        }
        Command::Simulate {
            scheme,
            problem,
            steps,
            seed,
            out,
            stats,
        } => {
            let t = scheme.load()?;
            let p = problem.reference()?.problem(0.0, problem.t_end)?;
            let tr = simulate_path(
                &p,
                &t,
                steps,
                &mut path_rng(seed, 0),
                &SolverConfig::default(),
            )?;
            emit(out.as_deref(), |w| Ok(tr.write_csv(w)?))?;
            if let Some(path) = stats {
                emit(Some(&path), |w| Ok(tr.write_stats_json(w)?))?;
            }
            Ok(())
        }
        Command::Region {
            scheme,
            hhat_min,
            hhat_max,
            ksq_min,
            ksq_max,
            res,
            out,
        } => {
            let t = scheme.load()?;
            let grid = region_grid(&t, (hhat_min, hhat_max), (ksq_min, ksq_max), (res, res))?;
            emit(out.as_deref(), |w| Ok(grid.write_csv(w)?))
        }
        Command::Probe { scheme, out } => {
            let t = scheme.load()?;
            let report = a_stability_probe(&t, &ProbeSampler::default())?;
            emit_json(out.as_deref(), &report)?;
            match report.counterexample {
                Some(c) => Err(CliError::numeric(
                    "counterexample",
                    format!(
                        "mean-square gain {} >= 1 inside the stability domain of the test equation",
                        c.gain
                    ),
                )
                .with_detail(&c)),
                None => Ok(()),
            }
        }
        Command::Converge {
            scheme,
            problem,
            steps,
            paths,
            seed,
            out,
            summary,
        } => {
            let t = scheme.load()?;
            let reference = problem.reference()?;
            let study = strong_order_estimate(
                &reference,
                &t,
                problem.t_end,
                &steps,
                paths,
                seed,
                &SolverConfig::default(),
            )?;
            emit(out.as_deref(), |w| Ok(study.write_csv(w)?))?;
            if let Some(path) = summary {
                emit(Some(&path), |w| Ok(study.write_summary_json(w)?))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::validation("arguments", e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code)
        }
    }
}
