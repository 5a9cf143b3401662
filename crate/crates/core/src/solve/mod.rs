//! Monolithic multigrid building blocks: Vanka patches, Chebyshev
//! smoothing, the V-cycle, flexible GMRES and spectral interval estimates.

mod chebyshev;
mod coarse;
mod dense;
mod krylov;
mod mg;
mod vanka;

use thiserror::Error;

pub use chebyshev::{chebyshev_smooth, chebyshev_t};
pub use coarse::{reverse_cuthill_mckee, BandedLu};
pub use dense::DenseLu;
pub use krylov::{estimate_interval, fgmres, KrylovConfig, KrylovStats};
pub use mg::{Acceleration, CoarseSolver, LevelInput, MgHierarchy, SmootherSpec};
pub use vanka::{patch_spatial_dofs, VankaPatch, VankaPatchSet};

use crate::fem::SparseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("patch at vertex {vertex} is singular: {reason}")]
    SingularPatch { vertex: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid Chebyshev interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("breakdown: {0}")]
    Breakdown(String),
}

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Approximate inverse `z ~ A^{-1} r`. Takes `&mut self` so that
/// preconditioners may vary between applications.
pub trait Preconditioner {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl<F: FnMut(&[f64], &mut [f64])> Preconditioner for F {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) {
        self(r, z)
    }
}

/// Constant pressure in each stage block: the common left and right null
/// space of the stage operator under enclosed flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PressureNullspace {
    pub n_u: usize,
    pub n_p: usize,
    pub stages: usize,
}

impl PressureNullspace {
    pub fn new(n_u: usize, n_p: usize, stages: usize) -> Self {
        Self { n_u, n_p, stages }
    }

    /// Subtracts the arithmetic mean of every stage's pressure block.
    pub fn project(&self, v: &mut [f64]) {
        let ss = self.n_u + self.n_p;
        if self.n_p == 0 {
            return;
        }
        for i in 0..self.stages {
            let p = &mut v[i * ss + self.n_u..(i + 1) * ss];
            let mean = p.iter().sum::<f64>() / self.n_p as f64;
            p.iter_mut().for_each(|x| *x -= mean);
        }
    }

    /// First pressure row of each stage.
    pub fn pinned_rows(&self) -> impl Iterator<Item = usize> + '_ {
        let ss = self.n_u + self.n_p;
        (0..self.stages).map(move |i| i * ss + self.n_u)
    }
}
