//! `cbrc`: optimal designs under compound Bayes risk criteria from JSON
//! configurations.
//!
//! Exit codes: 0 solved, 2 infeasible, 3 node limit, 4 input error,
//! 5 numerical failure. Log verbosity follows `CBRC_LOG`.

mod config;
mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cbrc::conic::build_a_opt_socp;
use cbrc::sweep::{rho_grid, sweep, SolveMode};
use cbrc::{build_artificial, solve_approximate, solve_exact, BnbOptions, BnbStatus, CbrcProblem};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use output::{criterion_json, design_entries, Solution};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(cbrc::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 4,
            CliError::Core(e) => match e {
                cbrc::Error::Infeasible(_) => 2,
                cbrc::Error::Domain(_) | cbrc::Error::Dimension(_) | cbrc::Error::TooLarge { .. } => 4,
                _ => 5,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "cbrc", version, about = "Optimal designs under compound Bayes risk criteria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log errors only.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write the solution as JSON.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Approximate)]
        mode: Mode,
        /// Defaults to standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the root cone program in text form.
        #[arg(long)]
        dump_conic: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve over a grid of rescaled slope variances and write CSV.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[arg(long, value_enum, default_value_t = Mode::Approximate)]
        mode: Mode,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Evaluate the criterion of a design file against a configuration.
    Evaluate { config: PathBuf, design: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Approximate,
    Exact,
}

#[derive(Args)]
struct SolverArgs {
    /// Conic solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Relative optimality gap for exact designs.
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    node_limit: usize,
    /// Recorded in the output; every solver here is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverArgs {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) || !(self.gap_tol >= 0.0) {
            return Err(CliError::Input("--tol must lie in (0, 1) and --gap-tol must be >= 0".into()));
        }
        Ok(())
    }

    fn bnb(&self) -> BnbOptions {
        BnbOptions {
            gap_tol: self.gap_tol,
            node_limit: self.node_limit,
            conic_tol: self.tol,
            log_interval: 500,
            ..BnbOptions::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    let env = env_logger::Env::new().filter_or("CBRC_LOG", "warn");
    let mut logger = env_logger::Builder::from_env(env);
    if cli.quiet {
        logger.filter_level(log::LevelFilter::Error);
    }
    logger.init();

    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Solve {
            config,
            mode,
            output,
            dump_conic,
            solver,
        } => cmd_solve(&config, mode, output.as_deref(), dump_conic.as_deref(), &solver),
        Command::Sweep {
            config,
            start,
            stop,
            step,
            mode,
            output,
            solver,
        } => cmd_sweep(&config, (start, stop, step), mode, output.as_deref(), &solver),
        Command::Evaluate { config, design } => cmd_evaluate(&config, &design),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn cmd_solve(
    config: &Path,
    mode: Mode,
    output: Option<&Path>,
    dump: Option<&Path>,
    args: &SolverArgs,
) -> Result<u8, CliError> {
    args.validate()?;
    let problem = config::load(config)?.problem(None)?;
    if let Some(path) = dump {
        let ap = build_artificial(&problem).map_err(CliError::Core)?;
        let mut file = fs::File::create(path)?;
        build_a_opt_socp(&ap).write_text(&mut file)?;
    }
    let started = Instant::now();
    let (solution, code) = match mode {
        Mode::Approximate => solve_approx(&problem, args)?,
        Mode::Exact => solve_integer(&problem, args)?,
    };
    let solution = Solution {
        wall_time_s: started.elapsed().as_secs_f64(),
        ..solution
    };
    let mut text = serde_json::to_vec_pretty(&solution).map_err(|e| CliError::Io(e.into()))?;
    text.push(b'\n');
    write_output(output, &text)?;
    Ok(code)
}

fn empty_solution(status: &str, mode: &str, seed: Option<u64>, message: String) -> Solution {
    Solution {
        status: status.into(),
        mode: mode.into(),
        criterion: Value::Null,
        terms: Vec::new(),
        bound: None,
        gap: None,
        nodes: None,
        ties: None,
        wall_time_s: 0.0,
        seed,
        message: Some(message),
        design: Vec::new(),
    }
}

fn term_json(problem: &CbrcProblem, design: &cbrc::Design) -> Result<Vec<Value>, CliError> {
    Ok(problem
        .term_values(design)
        .map_err(CliError::Core)?
        .into_iter()
        .map(criterion_json)
        .collect())
}

fn solve_approx(problem: &CbrcProblem, args: &SolverArgs) -> Result<(Solution, u8), CliError> {
    match solve_approximate(problem, args.tol) {
        Ok(sol) => Ok((
            Solution {
                status: sol.status.as_str().into(),
                mode: "approximate".into(),
                criterion: criterion_json(sol.value),
                terms: term_json(problem, &sol.design)?,
                bound: Some(sol.solution.lower_bound()),
                gap: Some(sol.gap),
                nodes: None,
                ties: None,
                wall_time_s: 0.0,
                seed: args.seed,
                message: None,
                design: design_entries(problem, &sol.design),
            },
            0,
        )),
        Err(cbrc::Error::Infeasible(msg)) => Ok((empty_solution("infeasible", "approximate", args.seed, msg), 2)),
        Err(cbrc::Error::Solver(msg)) => Ok((empty_solution("numerical-failure", "approximate", args.seed, msg), 5)),
        Err(e) => Err(CliError::Core(e)),
    }
}

fn solve_integer(problem: &CbrcProblem, args: &SolverArgs) -> Result<(Solution, u8), CliError> {
    let cons = problem.constraints().clone().with_integrality(true);
    let problem = problem.with_constraints(cons).map_err(CliError::Core)?;
    let r = solve_exact(&problem, &args.bnb()).map_err(CliError::Core)?;
    let code = match r.status {
        BnbStatus::Optimal | BnbStatus::GapLimit => 0,
        BnbStatus::Infeasible => 2,
        BnbStatus::NodeLimit => 3,
    };
    let (criterion, terms, design) = match &r.incumbent {
        Some(d) => (
            criterion_json(problem.cbrc_value(d).map_err(CliError::Core)?),
            term_json(&problem, d)?,
            design_entries(&problem, d),
        ),
        None => (Value::Null, Vec::new(), Vec::new()),
    };
    let finite = |v: f64| v.is_finite().then_some(v);
    Ok((
        Solution {
            status: r.status.as_str().into(),
            mode: "exact".into(),
            criterion,
            terms,
            bound: finite(r.best_bound),
            gap: finite(r.gap),
            nodes: Some(r.nodes),
            ties: Some(r.ties),
            wall_time_s: 0.0,
            seed: args.seed,
            message: None,
            design,
        },
        code,
    ))
}

fn cmd_sweep(
    config: &Path,
    (start, stop, step): (f64, f64, f64),
    mode: Mode,
    output: Option<&Path>,
    args: &SolverArgs,
) -> Result<u8, CliError> {
    args.validate()?;
    let grid = rho_grid(start, stop, step).map_err(|e| CliError::Input(e.to_string()))?;
    let config = config::load(config)?;
    if !config.sweepable() {
        return Err(CliError::Input(
            "a sweep needs an rcr_linear, rcr_imse or paper_example criterion".into(),
        ));
    }
    // validates the configuration once before fanning out
    let reference = config.problem(Some(grid[0]))?;
    let mode = match mode {
        Mode::Approximate => SolveMode::Approximate,
        Mode::Exact => SolveMode::Exact,
    };
    let build = |rho| {
        config.problem(Some(rho)).map_err(|e| match e {
            CliError::Core(e) => e,
            other => cbrc::Error::Domain(other.to_string()),
        })
    };
    let rows = sweep(&grid, build, mode, args.tol, &args.bnb());
    let mut buf = Vec::new();
    output::write_sweep_csv(&mut buf, &reference, &rows)?;
    write_output(output, &buf)?;
    Ok(0)
}

fn cmd_evaluate(config: &Path, design: &Path) -> Result<u8, CliError> {
    let problem = config::load(config)?.problem(None)?;
    let text = fs::read_to_string(design)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", design.display())))?;
    let design = output::read_design(&text, &problem)
        .map_err(|e| CliError::Input(format!("{}: {e}", design.display())))?;
    let stdout = io::stdout();
    output::write_evaluation(stdout.lock(), &problem, &design)?;
    Ok(0)
}
