//! Taylor-Hood (vector P2 velocity, P1 pressure) finite elements on
//! triangle meshes: numbering, assembly, Dirichlet elimination, nested-space
//! transfer and error norms.

mod assembly;
mod dirichlet;
mod dofmap;
mod norms;
pub mod quadrature;
mod sparse;
mod transfer;

use thiserror::Error;

pub use assembly::{
    assemble_convection, assemble_convection_with, assemble_divergence, assemble_divergence_with,
    assemble_mass, assemble_mass_with, assemble_p1_mass, assemble_stiffness, assemble_stiffness_with,
    BlockSystem, QuadratureDegrees,
};
pub use dirichlet::{apply_dirichlet, DirichletSpec};
pub use dofmap::{DofMap, SpaceKind};
pub use norms::{l2_error, l2_error_with, ErrorMode};
pub use sparse::SparseMatrix;
pub use transfer::{inject, prolongation};

#[derive(Debug, Error, PartialEq)]
pub enum FemError {
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("levels are not nested: {0}")]
    NotNested(String),
    #[error("relative error requested for an exact field with zero norm")]
    ZeroNorm,
}

/// DoF counts per stage for the crossed grid refined `l` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofCounts {
    pub velocity: u64,
    pub pressure: u64,
    pub per_stage: u64,
}

/// Closed-form Taylor-Hood DoF counts on `build_hierarchy(n0, l)`'s finest mesh.
pub fn count_dofs(n0: u64, l: u32) -> DofCounts {
    let n = n0 << l;
    let vertices = (n + 1) * (n + 1) + n * n;
    let cells = 4 * n * n;
    let edges = vertices + cells - 1;
    let velocity = 2 * (vertices + edges);
    DofCounts { velocity, pressure: vertices, per_stage: velocity + vertices }
}
