//! Time-marching drivers for the manufactured-solution studies, convergence
//! tables and CSV output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::discretization::Discretization;
use crate::fem::{l2_error, ErrorMode};
use crate::irk::{advance_step, assemble_stage_rhs, tableau_lookup, ButcherTableau, Family, StageBoundary, StepState};
use crate::newton::{newton_solve, warm_start, NewtonConfig};
use crate::problems::{exact_velocity, stage_boundary_values, BoundaryRule, NavierStokesStep, Problem};
use crate::solve::{fgmres, Acceleration, KrylovConfig, PressureNullspace, SmootherSpec};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimestepRule {
    /// `N = 2^(level + 3)` steps on `[0, t_final]`.
    Scaled,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub sweeps: usize,
    /// `None` picks `[2, 8]` for Stokes and `[1.5, 8]` for Navier-Stokes.
    pub cheby: Option<(f64, f64)>,
    pub gmres_smoother: bool,
    pub omega: f64,
    /// Multigrid levels counted from the finest; `None` uses all.
    pub mg_levels: Option<usize>,
    pub rtol: f64,
    /// `None` selects `1e-2 N^-3`.
    pub atol: Option<f64>,
    pub maxiter: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sweeps: 2,
            cheby: None,
            gmres_smoother: false,
            omega: 1.0,
            mg_levels: None,
            rtol: 1e-8,
            atol: None,
            maxiter: 200,
            restart: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub family: Family,
    pub stages: usize,
    pub n0: usize,
    pub level: usize,
    pub lmin: usize,
    pub lmax: usize,
    pub t_final: f64,
    pub timestep: TimestepRule,
    pub boundary: BoundaryRule,
    pub solver: SolverConfig,
    pub newton: NewtonConfig,
    /// `None` selects the linear tolerance schedule.
    pub newton_atol: Option<f64>,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: Problem::StokesMms,
            family: Family::RadauIIA,
            stages: 2,
            n0: 8,
            level: 1,
            lmin: 1,
            lmax: 3,
            t_final: 0.5,
            timestep: TimestepRule::Scaled,
            boundary: BoundaryRule::default(),
            solver: SolverConfig::default(),
            newton: NewtonConfig::default(),
            newton_atol: None,
            output: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
}

impl RunConfig {
    /// Sets one `key=value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let v = value.trim();
        match key.trim() {
            "problem" => self.problem = v.parse()?,
            "family" | "scheme" => self.family = v.parse()?,
            "stages" => self.stages = parse(key, v)?,
            "n0" => self.n0 = parse(key, v)?,
            "level" => self.level = parse(key, v)?,
            "lmin" => self.lmin = parse(key, v)?,
            "lmax" => self.lmax = parse(key, v)?,
            "t_final" | "tf" => self.t_final = parse(key, v)?,
            "dt" => self.timestep = TimestepRule::Fixed(parse(key, v)?),
            "timestep" => {
                self.timestep = match v {
                    "scaled" => TimestepRule::Scaled,
                    other => TimestepRule::Fixed(parse(key, other)?),
                }
            }
            "boundary" => self.boundary = v.parse()?,
            "output" => self.output = Some(v.to_string()),
            "smoother.sweeps" => self.solver.sweeps = parse(key, v)?,
            "smoother.cheby_a" => self.solver.cheby = Some((parse(key, v)?, self.solver.cheby.map_or(8.0, |c| c.1))),
            "smoother.cheby_b" => self.solver.cheby = Some((self.solver.cheby.map_or(2.0, |c| c.0), parse(key, v)?)),
            "smoother.accel" => {
                self.solver.gmres_smoother = match v {
                    "chebyshev" => false,
                    "gmres" => true,
                    _ => return Err(Error::Config(format!("unknown smoother acceleration `{v}`"))),
                }
            }
            "smoother.omega" => self.solver.omega = parse(key, v)?,
            "mg.levels" => self.solver.mg_levels = Some(parse(key, v)?),
            "krylov.rtol" => self.solver.rtol = parse(key, v)?,
            "krylov.atol" => self.solver.atol = Some(parse(key, v)?),
            "krylov.maxiter" => self.solver.maxiter = parse(key, v)?,
            "krylov.restart" => self.solver.restart = parse(key, v)?,
            "newton.atol" => self.newton_atol = Some(parse(key, v)?),
            "newton.maxit" => self.newton.max_iterations = parse(key, v)?,
            "newton.ew_gamma" => self.newton.gamma = parse(key, v)?,
            "newton.ew_alpha" => self.newton.alpha = parse(key, v)?,
            "newton.eta0" => self.newton.eta0 = parse(key, v)?,
            "newton.eta_max" => self.newton.eta_max = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), Error> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<ButcherTableau, Error> {
        let t = tableau_lookup(self.family, self.stages)?;
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be positive".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Config("t_final must be positive".into()));
        }
        if let TimestepRule::Fixed(dt) = self.timestep {
            if !(dt > 0.0) {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        if self.solver.mg_levels.is_some_and(|m| m == 0 || m > self.level + 1) {
            return Err(Error::Config(format!("mg.levels must lie in 1..={}", self.level + 1)));
        }
        if self.lmin > self.lmax {
            return Err(Error::Config("lmin exceeds lmax".into()));
        }
        self.smoother().validate()?;
        Ok(t)
    }

    pub fn smoother(&self) -> SmootherSpec {
        let (a, b) = self.solver.cheby.unwrap_or(match self.problem {
            Problem::StokesMms => (2.0, 8.0),
            Problem::NsTaylorGreen => (1.5, 8.0),
        });
        SmootherSpec {
            pre: self.solver.sweeps,
            post: self.solver.sweeps,
            accel: if self.solver.gmres_smoother { Acceleration::Gmres } else { Acceleration::Chebyshev { a, b } },
            omega: self.solver.omega,
        }
    }

    /// Number of steps and step size.
    pub fn steps(&self) -> (usize, f64) {
        match self.timestep {
            TimestepRule::Scaled => {
                let n = 1usize << (self.level + 3);
                (n, self.t_final / n as f64)
            }
            TimestepRule::Fixed(dt) => {
                let n = (self.t_final / dt).round().max(1.0) as usize;
                (n, self.t_final / n as f64)
            }
        }
    }

    /// `1e-2 N^-3` unless overridden.
    pub fn linear_atol(&self) -> f64 {
        let (n, _) = self.steps();
        self.solver.atol.unwrap_or(1e-2 / (n as f64).powi(3))
    }
}

/// One completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub scheme: String,
    pub stages: usize,
    pub level: usize,
    pub dt: f64,
    pub steps: usize,
    pub vel_error: f64,
    pub pres_error: f64,
    pub avg_linear_iters: f64,
    pub avg_newton_iters: f64,
    pub wall_seconds: f64,
    /// Largest `||B^T u^{n+1}|| / tol` over the steps.
    pub max_divergence_ratio: f64,
    pub max_linear_iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<RunRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub from_level: usize,
    pub to_level: usize,
    /// `None` where the coarser error is zero.
    pub velocity: Option<f64>,
    pub pressure: Option<f64>,
}

/// `log2(e_l / e_{l+1})`, or `None` when undefined.
pub fn rate(coarse: f64, fine: f64) -> Option<f64> {
    if coarse > 0.0 && fine > 0.0 {
        Some((coarse / fine).log2())
    } else {
        None
    }
}

/// Rates between adjacent levels of runs sharing scheme, stage count and
/// timestep rule (the step size must halve with the level).
pub fn convergence_rates(rows: &[RunRow]) -> Result<Vec<RateRow>, Error> {
    if rows.len() < 2 {
        return Err(Error::Config("rates need at least two rows".into()));
    }
    let mut sorted: Vec<&RunRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.level);
    let mut out = vec![];
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.scheme != b.scheme || a.stages != b.stages {
            return Err(Error::Config("rows mix schemes".into()));
        }
        if b.level != a.level + 1 {
            continue;
        }
        out.push(RateRow {
            from_level: a.level,
            to_level: b.level,
            velocity: rate(a.vel_error, b.vel_error),
            pressure: rate(a.pres_error, b.pres_error),
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "scheme,stages,level,dt,vel_error,pres_error,avg_linear_iters,avg_newton_iters,wall_seconds";

fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

pub fn csv_string(report: &ConvergenceReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.stages,
            r.level,
            sig6(r.dt),
            sig6(r.vel_error),
            sig6(r.pres_error),
            sig6(r.avg_linear_iters),
            sig6(r.avg_newton_iters),
            sig6(r.wall_seconds)
        );
    }
    s
}

pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<(), Error> {
    std::fs::write(path, csv_string(report))?;
    Ok(())
}

pub fn rates_table(report: &ConvergenceReport) -> Result<String, Error> {
    let rates = convergence_rates(&report.rows)?;
    let fmt = |r: Option<f64>| r.map_or("undefined".to_string(), |v| format!("{v:.2}"));
    let mut s = String::from("level  dt          vel_error    pres_error   lin/step  newton/step\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<6} {:<11.4e} {:<12.4e} {:<12.4e} {:<9.2} {:.2}",
            r.level, r.dt, r.vel_error, r.pres_error, r.avg_linear_iters, r.avg_newton_iters
        );
    }
    s.push_str("\nlevels  vel_rate  pres_rate\n");
    for r in &rates {
        let _ = writeln!(s, "{}->{}    {:<9} {}", r.from_level, r.to_level, fmt(r.velocity), fmt(r.pressure));
    }
    Ok(s)
}

pub fn run(cfg: &RunConfig) -> Result<RunRow, Error> {
    match cfg.problem {
        Problem::StokesMms => run_stokes_mms(cfg),
        Problem::NsTaylorGreen => run_ns_taylor_green(cfg),
    }
}

/// Runs every level in `lmin..=lmax`.
pub fn converge(cfg: &RunConfig) -> Result<ConvergenceReport, Error> {
    let mut rows = vec![];
    for level in cfg.lmin..=cfg.lmax {
        let c = RunConfig { level, ..cfg.clone() };
        rows.push(run(&c)?);
    }
    Ok(ConvergenceReport { rows })
}

struct March<'a> {
    cfg: &'a RunConfig,
    tableau: ButcherTableau,
    disc: Discretization,
    state: StepState,
    steps: usize,
    mg_levels: usize,
    krylov: KrylovConfig,
}

impl<'a> March<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, Error> {
        let tableau = cfg.validate()?;
        let disc = Discretization::new(cfg.n0, cfg.level, 1.0)?;
        let (steps, dt) = cfg.steps();
        let fine = disc.finest();
        let u0 = fine.velocity.interpolate(disc.finest_mesh(), |p, out| exact_velocity(0.0, p, out));
        let mut p0 = fine.pressure.interpolate(disc.finest_mesh(), |p, out| out[0] = cfg.problem.exact_pressure(0.0, p));
        fine.raw.project_pressure_mean(&mut p0);
        let state = StepState::new(0.0, u0, p0, dt)?;
        let krylov = KrylovConfig {
            rtol: cfg.solver.rtol,
            atol: cfg.linear_atol(),
            maxiter: cfg.solver.maxiter,
            restart: cfg.solver.restart,
        };
        let mg_levels = cfg.solver.mg_levels.unwrap_or(cfg.level + 1);
        Ok(Self { cfg, tableau, disc, state, steps, mg_levels, krylov })
    }

    fn divergence(&self) -> f64 {
        let d = self.disc.finest().raw.bt.apply(&self.state.u);
        d.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn finish(&self, start: Instant, linear: usize, newton: usize, max_div: f64, max_lin: usize) -> Result<RunRow, Error> {
        let fine = self.disc.finest();
        let mesh = self.disc.finest_mesh();
        let t = self.state.t;
        let vel_error = l2_error(mesh, &fine.velocity, &self.state.u, |p, out| exact_velocity(t, p, out), ErrorMode::Relative)?;
        let problem = self.cfg.problem;
        let pres_error =
            l2_error(mesh, &fine.pressure, &self.state.p, |p, out| out[0] = problem.exact_pressure(t, p), ErrorMode::Absolute)?;
        let n = self.steps as f64;
        Ok(RunRow {
            scheme: self.cfg.family.key().to_string(),
            stages: self.cfg.stages,
            level: self.cfg.level,
            dt: self.state.dt,
            steps: self.steps,
            vel_error,
            pres_error,
            avg_linear_iters: linear as f64 / n,
            avg_newton_iters: newton as f64 / n,
            wall_seconds: start.elapsed().as_secs_f64(),
            max_divergence_ratio: max_div,
            max_linear_iters: max_lin,
        })
    }
}

/// Time-dependent Stokes with the manufactured solution, solved by
/// multigrid-preconditioned FGMRES every step.
pub fn run_stokes_mms(cfg: &RunConfig) -> Result<RunRow, Error> {
    let start = Instant::now();
    let mut m = March::new(cfg)?;
    let ops = m.disc.stage_operators(&m.tableau, m.state.dt)?;
    let ops = ops[ops.len() - m.mg_levels..].to_vec();
    let op = ops.last().unwrap().clone();
    let mut mg = m.disc.multigrid(ops, cfg.smoother())?;
    let ns = PressureNullspace::new(op.n_u(), op.n_p(), op.stages());
    let (mut linear, mut max_lin, mut max_div) = (0, 0, 0.0f64);
    let ss = op.stage_size();
    for step in 0..m.steps {
        let fine = m.disc.finest();
        let bc =
            stage_boundary_values(m.disc.finest_mesh(), &fine.velocity, &fine.dirichlet, &m.tableau, &m.state, cfg.boundary)?;
        let rhs = assemble_stage_rhs(
            &fine.raw,
            &m.tableau,
            &m.state,
            None,
            Some(StageBoundary { spec: &fine.dirichlet, values: &bc }),
        )?;
        let mut x = vec![0.0; rhs.len()];
        for i in 0..m.tableau.stages() {
            for &d in fine.dirichlet.indices() {
                x[i * ss + d] = rhs[i * ss + d];
            }
        }
        let stats = fgmres(&op, &mut mg, &rhs, &mut x, &m.krylov, Some(&ns));
        if !stats.converged {
            return Err(Error::SolverFailure {
                step,
                reason: format!("FGMRES residual {:.3e} after {} iterations", stats.residual_norm, stats.iterations),
            });
        }
        linear += stats.iterations;
        max_lin = max_lin.max(stats.iterations);
        let tol = m.krylov.atol.max(m.krylov.rtol * stats.initial_residual);
        m.state = advance_step(&m.state, &m.tableau, &x, Some(&fine.raw.pressure_weights))?;
        max_div = max_div.max(m.divergence() / tol);
    }
    m.finish(start, linear, 0, max_div, max_lin)
}

/// Navier-Stokes with the Taylor-Green solution: inexact Newton per step,
/// warm-started from the previous stage vector.
pub fn run_ns_taylor_green(cfg: &RunConfig) -> Result<RunRow, Error> {
    let start = Instant::now();
    let mut m = March::new(cfg)?;
    let newton = NewtonConfig { atol: cfg.newton_atol.unwrap_or(m.krylov.atol), ..cfg.newton };
    let (mut linear, mut max_lin, mut nonlinear, mut max_div) = (0, 0, 0, 0.0f64);
    let mut previous: Option<Vec<f64>> = None;
    for step in 0..m.steps {
        let (k, stats) = {
            let mut sys =
                NavierStokesStep::new(&m.disc, &m.tableau, &m.state, m.mg_levels, cfg.smoother(), m.krylov, cfg.boundary)?;
            let mut k0 = warm_start(previous.as_deref(), sys.dim());
            sys.impose_boundary(&mut k0);
            newton_solve(&mut sys, k0, &newton).map_err(|e| match e {
                Error::SolverFailure { reason, .. } => Error::SolverFailure { step, reason },
                other => other,
            })?
        };
        nonlinear += stats.iterations;
        linear += stats.linear_iterations();
        max_lin = max_lin.max(stats.linear.iter().map(|s| s.iterations).max().unwrap_or(0));
        let fine = m.disc.finest();
        m.state = advance_step(&m.state, &m.tableau, &k, Some(&fine.raw.pressure_weights))?;
        max_div = max_div.max(m.divergence() / newton.atol);
        previous = Some(k);
    }
    m.finish(start, linear, nonlinear, max_div, max_lin)
}
