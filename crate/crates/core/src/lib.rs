//! Monolithic geometric multigrid with Vanka relaxation for fully implicit
//! Runge-Kutta discretizations of the incompressible Stokes and
//! Navier-Stokes equations on the unit square.

pub mod discretization;
pub mod fem;
pub mod harness;
pub mod irk;
pub mod mesh;
pub mod newton;
pub mod problems;
pub mod solve;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Fem(#[from] fem::FemError),
    #[error(transparent)]
    Irk(#[from] irk::IrkError),
    #[error(transparent)]
    Solve(#[from] solve::SolveError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("step {step}: {reason}")]
    SolverFailure { step: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
