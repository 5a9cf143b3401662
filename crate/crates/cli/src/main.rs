use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irkmg::discretization::Discretization;
use irkmg::harness::{self, ConvergenceReport, RunConfig};
use irkmg::irk::{tableau_lookup, tableau_report, Family, StageOperator};
use irkmg::Error;

#[derive(Parser)]
#[command(name = "irkmg", about = "Multigrid solvers for implicit Runge-Kutta Stokes and Navier-Stokes runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-dependent Stokes with the manufactured solution.
    StokesMms(RunArgs),
    /// Navier-Stokes with the Taylor-Green solution.
    NsTaylorGreen(RunArgs),
    /// Print coefficients checks for one scheme.
    TableauReport {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        stages: usize,
    },
    /// Sweep levels lmin..=lmax and print the rates table.
    Converge {
        #[arg(long, default_value = "stokes-mms")]
        problem: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// File of key=value lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    n0: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    lmin: Option<String>,
    #[arg(long)]
    lmax: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    /// Fixed step size instead of N = 2^(level + 3).
    #[arg(long)]
    dt: Option<String>,
    /// Stage boundary rule: stage-values or derivative.
    #[arg(long)]
    boundary: Option<String>,
    /// CSV output path.
    #[arg(long)]
    output: Option<String>,
    #[arg(long = "smoother.sweeps")]
    sweeps: Option<String>,
    #[arg(long = "smoother.cheby_a")]
    cheby_a: Option<String>,
    #[arg(long = "smoother.cheby_b")]
    cheby_b: Option<String>,
    #[arg(long = "smoother.accel")]
    accel: Option<String>,
    #[arg(long = "smoother.omega")]
    omega: Option<String>,
    #[arg(long = "mg.levels")]
    mg_levels: Option<String>,
    #[arg(long = "krylov.rtol")]
    rtol: Option<String>,
    #[arg(long = "krylov.atol")]
    atol: Option<String>,
    #[arg(long = "krylov.maxiter")]
    maxiter: Option<String>,
    #[arg(long = "krylov.restart")]
    restart: Option<String>,
    #[arg(long = "newton.atol")]
    newton_atol: Option<String>,
    #[arg(long = "newton.maxit")]
    newton_maxit: Option<String>,
    #[arg(long = "newton.ew_gamma")]
    ew_gamma: Option<String>,
    #[arg(long = "newton.ew_alpha")]
    ew_alpha: Option<String>,
    #[arg(long = "newton.eta0")]
    eta0: Option<String>,
    #[arg(long = "newton.eta_max")]
    eta_max: Option<String>,
    /// Write the finest mesh in plain text and exit.
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
    /// Write the finest stage matrix in coordinate format and exit.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("family", &self.family),
            ("stages", &self.stages),
            ("n0", &self.n0),
            ("level", &self.level),
            ("lmin", &self.lmin),
            ("lmax", &self.lmax),
            ("t_final", &self.t_final),
            ("dt", &self.dt),
            ("boundary", &self.boundary),
            ("output", &self.output),
            ("smoother.sweeps", &self.sweeps),
            ("smoother.cheby_a", &self.cheby_a),
            ("smoother.cheby_b", &self.cheby_b),
            ("smoother.accel", &self.accel),
            ("smoother.omega", &self.omega),
            ("mg.levels", &self.mg_levels),
            ("krylov.rtol", &self.rtol),
            ("krylov.atol", &self.atol),
            ("krylov.maxiter", &self.maxiter),
            ("krylov.restart", &self.restart),
            ("newton.atol", &self.newton_atol),
            ("newton.maxit", &self.newton_maxit),
            ("newton.ew_gamma", &self.ew_gamma),
            ("newton.ew_alpha", &self.ew_alpha),
            ("newton.eta0", &self.eta0),
            ("newton.eta_max", &self.eta_max),
        ]
    }

    fn build(&self, problem: &str) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig { problem: problem.parse()?, ..RunConfig::default() };
        let mut has_family = false;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            has_family = text.lines().any(|l| matches!(l.split('=').next().map(str::trim), Some("family" | "scheme")));
            let problem_line = text.lines().any(|l| l.split('=').next().map(str::trim) == Some("problem"));
            cfg.apply_text(&text)?;
            if !problem_line {
                cfg.problem = problem.parse()?;
            }
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
                has_family |= key == "family";
            }
        }
        if !has_family {
            return Err(Error::Config("--family is required".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dumps(args: &RunArgs, cfg: &RunConfig) -> Result<bool, Error> {
    if args.dump_mesh.is_none() && args.dump_matrix.is_none() {
        return Ok(false);
    }
    let disc = Discretization::new(cfg.n0, cfg.level, 1.0)?;
    if let Some(path) = &args.dump_mesh {
        std::fs::write(path, disc.finest_mesh().dump())?;
    }
    if let Some(path) = &args.dump_matrix {
        let tableau = tableau_lookup(cfg.family, cfg.stages)?;
        let (_, dt) = cfg.steps();
        let op = StageOperator::new(disc.finest().eliminated.clone(), &tableau, dt)?;
        std::fs::write(path, op.materialize()?.dump_coo())?;
    }
    Ok(true)
}

fn write_output(cfg: &RunConfig, report: &ConvergenceReport) -> Result<(), Error> {
    if let Some(path) = &cfg.output {
        harness::emit_csv(report, std::path::Path::new(path))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::TableauReport { family, stages } => {
            print!("{}", tableau_report(&tableau_lookup(family, stages)?));
        }
        Command::StokesMms(args) => single(&args, "stokes-mms")?,
        Command::NsTaylorGreen(args) => single(&args, "ns-taylor-green")?,
        Command::Converge { problem, run } => {
            let cfg = run.build(&problem)?;
            if dumps(&run, &cfg)? {
                return Ok(());
            }
            let report = harness::converge(&cfg)?;
            print!("{}", harness::rates_table(&report)?);
            write_output(&cfg, &report)?;
        }
    }
    Ok(())
}

fn single(args: &RunArgs, problem: &str) -> Result<(), Error> {
    let cfg = args.build(problem)?;
    if dumps(args, &cfg)? {
        return Ok(());
    }
    let row = harness::run(&cfg)?;
    let report = ConvergenceReport { rows: vec![row] };
    print!("{}", harness::csv_string(&report));
    write_output(&cfg, &report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::SolverFailure { .. } | Error::Solve(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
