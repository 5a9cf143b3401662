//! Manufactured solutions and the Navier-Stokes stage system.

use std::f64::consts::PI;

use crate::discretization::Discretization;
use crate::fem::{assemble_convection, DirichletSpec, DofMap};
use crate::irk::{assemble_stage_rhs, stage_dirichlet_values, ButcherTableau, StageOperator, StepState};
use crate::mesh::{Mesh2D, Point};
use crate::newton::NewtonSystem;
use crate::solve::{fgmres, KrylovConfig, MgHierarchy, KrylovStats, LinearOperator, PressureNullspace, SmootherSpec};
use crate::Error;

/// `u = (sin(pi x) cos(pi y), -cos(pi x) sin(pi y)) exp(-2 pi^2 t)`, shared by
/// the Stokes and Taylor-Green problems.
pub fn exact_velocity(t: f64, p: Point, out: &mut [f64]) {
    let e = (-2.0 * PI * PI * t).exp();
    let (x, y) = (PI * p[0], PI * p[1]);
    out[0] = x.sin() * y.cos() * e;
    out[1] = -x.cos() * y.sin() * e;
}

/// Time derivative of [`exact_velocity`].
pub fn exact_velocity_dt(t: f64, p: Point, out: &mut [f64]) {
    exact_velocity(t, p, out);
    out[0] *= -2.0 * PI * PI;
    out[1] *= -2.0 * PI * PI;
}

/// Taylor-Green pressure `exp(-4 pi^2 t) (cos 2 pi x + cos 2 pi y) / 4`.
pub fn taylor_green_pressure(t: f64, p: Point) -> f64 {
    (-4.0 * PI * PI * t).exp() * ((2.0 * PI * p[0]).cos() + (2.0 * PI * p[1]).cos()) / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    StokesMms,
    NsTaylorGreen,
}

impl Problem {
    pub fn key(self) -> &'static str {
        match self {
            Problem::StokesMms => "stokes-mms",
            Problem::NsTaylorGreen => "ns-taylor-green",
        }
    }

    pub fn exact_pressure(self, t: f64, p: Point) -> f64 {
        match self {
            Problem::StokesMms => 0.0,
            Problem::NsTaylorGreen => taylor_green_pressure(t, p),
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "stokes-mms" | "stokes" => Ok(Problem::StokesMms),
            "ns-taylor-green" | "taylor-green" | "ns" => Ok(Problem::NsTaylorGreen),
            _ => Err(Error::Config(format!("unknown problem `{s}`"))),
        }
    }
}

/// How the stage unknowns pick up the Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// Stage values `U_i` equal `g(t^n + c_i dt)` on the boundary.
    #[default]
    StageValues,
    /// Stage derivatives `k_i` equal `g_t(t^n + c_i dt)`.
    Derivative,
}

impl BoundaryRule {
    pub fn key(self) -> &'static str {
        match self {
            BoundaryRule::StageValues => "stage-values",
            BoundaryRule::Derivative => "derivative",
        }
    }
}

impl std::str::FromStr for BoundaryRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "stage-values" | "dae" => Ok(BoundaryRule::StageValues),
            "derivative" | "ode" => Ok(BoundaryRule::Derivative),
            _ => Err(Error::Config(format!("unknown boundary rule `{s}`"))),
        }
    }
}

fn boundary_samples(
    mesh: &Mesh2D,
    velocity: &DofMap,
    spec: &DirichletSpec,
    times: impl Iterator<Item = f64>,
    field: fn(f64, Point, &mut [f64]),
) -> Vec<Vec<f64>> {
    let coords = velocity.node_coordinates(mesh);
    let nc = velocity.components();
    let mut val = [0.0; 2];
    times
        .map(|t| {
            spec.indices()
                .iter()
                .map(|&d| {
                    field(t, coords[d / nc], &mut val);
                    val[d % nc]
                })
                .collect()
        })
        .collect()
}

/// Dirichlet data of the stage unknowns for the step leaving `state`, one
/// vector per stage over the constrained DoFs.
pub fn stage_boundary_values(
    mesh: &Mesh2D,
    velocity: &DofMap,
    spec: &DirichletSpec,
    tableau: &ButcherTableau,
    state: &StepState,
    rule: BoundaryRule,
) -> Result<Vec<Vec<f64>>, Error> {
    let times = tableau.c.iter().map(|c| state.t + c * state.dt);
    match rule {
        BoundaryRule::Derivative => Ok(boundary_samples(mesh, velocity, spec, times, exact_velocity_dt)),
        BoundaryRule::StageValues => {
            let g = boundary_samples(mesh, velocity, spec, times, exact_velocity);
            Ok(stage_dirichlet_values(tableau, state.dt, &spec.gather(&state.u), &g)?)
        }
    }
}

/// Stage velocities `U_i = u^n + dt sum_j a_ij k_j^u`.
pub fn stage_velocities(state: &StepState, tableau: &ButcherTableau, k: &[f64]) -> Vec<Vec<f64>> {
    let nu = state.u.len();
    let ss = nu + state.p.len();
    let r = tableau.stages();
    (0..r)
        .map(|i| {
            let mut u = state.u.clone();
            for j in 0..r {
                let w = state.dt * tableau.a(i, j);
                if w != 0.0 {
                    u.iter_mut().zip(&k[j * ss..j * ss + nu]).for_each(|(o, v)| *o += w * v);
                }
            }
            u
        })
        .collect()
}

/// The Navier-Stokes stage equations of one time step,
/// `F(k)_i = M k_i + K U_i + N(U_i) + B P_i - M f_i` on free rows and
/// `k_i - h_i` on constrained rows, with `h_i` from [`stage_boundary_values`]. The multigrid
/// preconditioner is built about the first Newton iterate and kept for the
/// rest of the step; FGMRES always applies the current Jacobian.
pub struct NavierStokesStep<'a> {
    disc: &'a Discretization,
    tableau: &'a ButcherTableau,
    state: &'a StepState,
    raw: StageOperator,
    plain_rhs: Vec<f64>,
    boundary: Vec<Vec<f64>>,
    mg_levels: usize,
    smoother: SmootherSpec,
    krylov: KrylovConfig,
    jacobian: Option<StageOperator>,
    mg: Option<MgHierarchy>,
}

impl<'a> NavierStokesStep<'a> {
    pub fn new(
        disc: &'a Discretization,
        tableau: &'a ButcherTableau,
        state: &'a StepState,
        mg_levels: usize,
        smoother: SmootherSpec,
        krylov: KrylovConfig,
        rule: BoundaryRule,
    ) -> Result<Self, Error> {
        let fine = disc.finest();
        let raw = StageOperator::new(fine.raw.clone(), tableau, state.dt)?;
        let plain_rhs = assemble_stage_rhs(&fine.raw, tableau, state, None, None)?;
        let boundary = stage_boundary_values(disc.finest_mesh(), &fine.velocity, &fine.dirichlet, tableau, state, rule)?;
        Ok(Self { disc, tableau, state, raw, plain_rhs, boundary, mg_levels, smoother, krylov, jacobian: None, mg: None })
    }

    /// Stage operator linearized about the stage velocities on level `lvl`.
    fn linearized_operator(&self, lvl: usize, stage_u: &[Vec<f64>]) -> Result<StageOperator, Error> {
        let level = self.disc.level(lvl);
        let mesh = self.disc.mesh(lvl);
        let jac = stage_u
            .iter()
            .map(|u| Ok(assemble_convection(mesh, &level.velocity, &self.disc.inject_velocity(u, lvl))?.1))
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(StageOperator::new(level.eliminated.clone(), self.tableau, self.state.dt)?.with_convection(&jac)?)
    }

    pub fn dim(&self) -> usize {
        self.raw.total_dim()
    }

    /// Overwrites the constrained entries of `k` with the stage boundary data.
    pub fn impose_boundary(&self, k: &mut [f64]) {
        let ss = self.raw.stage_size();
        for (i, vals) in self.boundary.iter().enumerate() {
            for (&d, &v) in self.disc.finest().dirichlet.indices().iter().zip(vals) {
                k[i * ss + d] = v;
            }
        }
    }
}

impl NewtonSystem for NavierStokesStep<'_> {
    fn residual(&mut self, k: &[f64]) -> Result<Vec<f64>, Error> {
        let fine = self.disc.finest();
        let (nu, ss) = (self.raw.n_u(), self.raw.stage_size());
        let mut f = vec![0.0; k.len()];
        self.raw.apply(k, &mut f);
        f.iter_mut().zip(&self.plain_rhs).for_each(|(o, b)| *o -= b);
        for (i, u) in stage_velocities(self.state, self.tableau, k).iter().enumerate() {
            let (n, _) = assemble_convection(self.disc.finest_mesh(), &fine.velocity, u)?;
            f[i * ss..i * ss + nu].iter_mut().zip(&n).for_each(|(o, v)| *o += v);
            for (&d, &g) in fine.dirichlet.indices().iter().zip(&self.boundary[i]) {
                f[i * ss + d] = k[i * ss + d] - g;
            }
        }
        Ok(f)
    }

    fn solve_linearized(&mut self, k: &[f64], f: &[f64], tol: f64) -> Result<(Vec<f64>, KrylovStats), Error> {
        let top = self.disc.num_levels() - 1;
        let stage_u = stage_velocities(self.state, self.tableau, k);
        let jacobian = if self.mg.is_none() {
            let mut ops = Vec::with_capacity(self.mg_levels);
            for lvl in top + 1 - self.mg_levels..=top {
                ops.push(self.linearized_operator(lvl, &stage_u)?);
            }
            let jacobian = ops.last().unwrap().clone();
            self.mg = Some(self.disc.multigrid(ops, self.smoother)?);
            jacobian
        } else {
            self.linearized_operator(top, &stage_u)?
        };
        let mg = self.mg.as_mut().unwrap();
        let ns = PressureNullspace::new(jacobian.n_u(), jacobian.n_p(), jacobian.stages());
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let mut delta = vec![0.0; rhs.len()];
        let cfg = KrylovConfig { rtol: 0.0, atol: tol, ..self.krylov };
        let stats = fgmres(&jacobian, mg, &rhs, &mut delta, &cfg, Some(&ns));
        self.jacobian = Some(jacobian);
        if !stats.converged {
            return Err(Error::SolverFailure {
                step: 0,
                reason: format!(
                    "FGMRES stopped at {:.3e} after {} iterations (target {tol:.3e})",
                    stats.residual_norm, stats.iterations
                ),
            });
        }
        Ok((delta, stats))
    }

    fn apply_jacobian(&self, v: &[f64], out: &mut [f64]) {
        self.jacobian.as_ref().expect("Jacobian built by solve_linearized").apply(v, out)
    }
}
