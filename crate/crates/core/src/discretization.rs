//! Taylor-Hood spaces, assembled blocks and transfer operators on every
//! level of a crossed-grid hierarchy with the whole boundary constrained.

use std::sync::Arc;

use crate::fem::{inject, prolongation, BlockSystem, DirichletSpec, DofMap, SpaceKind, SparseMatrix};
use crate::irk::{ButcherTableau, StageOperator};
use crate::mesh::{build_hierarchy, MeshHierarchy, Mesh2D};
use crate::solve::{LevelInput, MgHierarchy, SmootherSpec};
use crate::Error;

pub struct LevelSpace {
    pub velocity: DofMap,
    pub pressure: DofMap,
    pub dirichlet: DirichletSpec,
    pub raw: Arc<BlockSystem>,
    pub eliminated: Arc<BlockSystem>,
    /// Velocity and pressure interpolation from the next coarser level.
    pub prolongation: Option<(SparseMatrix, SparseMatrix)>,
}

pub struct Discretization {
    meshes: MeshHierarchy,
    levels: Vec<LevelSpace>,
    mu: f64,
}

impl Discretization {
    /// Crossed `n0 x n0` grid refined `refinements` times.
    pub fn new(n0: usize, refinements: usize, mu: f64) -> Result<Self, Error> {
        let meshes = build_hierarchy(n0, refinements)?;
        let mut levels: Vec<LevelSpace> = Vec::with_capacity(meshes.num_levels());
        for k in 0..meshes.num_levels() {
            let mesh = meshes.level(k);
            let velocity = DofMap::new(mesh, SpaceKind::P2Vec);
            let pressure = DofMap::new(mesh, SpaceKind::P1);
            let dirichlet = DirichletSpec::whole_boundary(mesh, &velocity);
            let raw = BlockSystem::assemble(mesh, &velocity, &pressure, mu)?;
            let eliminated = Arc::new(raw.eliminated(dirichlet.mask()));
            let prolongation = if k == 0 {
                None
            } else {
                let prev = &levels[k - 1];
                let coarse = meshes.level(k - 1);
                let parents = meshes.parentage(k - 1);
                Some((
                    prolongation(coarse, &prev.velocity, mesh, &velocity, parents)?,
                    prolongation(coarse, &prev.pressure, mesh, &pressure, parents)?,
                ))
            };
            levels.push(LevelSpace { velocity, pressure, dirichlet, raw: Arc::new(raw), eliminated, prolongation });
        }
        Ok(Self { meshes, levels, mu })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mesh(&self, k: usize) -> &Mesh2D {
        self.meshes.level(k)
    }

    pub fn meshes(&self) -> &MeshHierarchy {
        &self.meshes
    }

    pub fn level(&self, k: usize) -> &LevelSpace {
        &self.levels[k]
    }

    pub fn finest(&self) -> &LevelSpace {
        self.levels.last().unwrap()
    }

    pub fn finest_mesh(&self) -> &Mesh2D {
        self.meshes.finest()
    }

    /// Eliminated Stokes stage operators on every level, coarsest first.
    pub fn stage_operators(&self, tableau: &ButcherTableau, dt: f64) -> Result<Vec<StageOperator>, Error> {
        self.levels
            .iter()
            .map(|l| StageOperator::new(l.eliminated.clone(), tableau, dt).map_err(Error::from))
            .collect()
    }

    /// Fine velocity restricted to level `k` by nodal injection.
    pub fn inject_velocity(&self, u: &[f64], k: usize) -> Vec<f64> {
        let mut cur = u.to_vec();
        for j in (k..self.levels.len() - 1).rev() {
            cur = inject(self.mesh(j), &self.levels[j].velocity, self.mesh(j + 1), &cur, self.meshes.parentage(j));
        }
        cur
    }

    /// Multigrid hierarchy over the finest `ops.len()` levels, whose
    /// operators are given coarsest first.
    pub fn multigrid(&self, ops: Vec<StageOperator>, smoother: SmootherSpec) -> Result<MgHierarchy, Error> {
        if ops.is_empty() || ops.len() > self.levels.len() {
            return Err(Error::Config(format!("{} operators for {} levels", ops.len(), self.levels.len())));
        }
        let first = self.levels.len() - ops.len();
        let inputs = ops
            .into_iter()
            .enumerate()
            .map(|(j, op)| {
                let k = first + j;
                LevelInput {
                    mesh: self.mesh(k),
                    velocity: &self.levels[k].velocity,
                    pressure: &self.levels[k].pressure,
                    op,
                    prolongation: if j == 0 { None } else { self.levels[k].prolongation.as_ref().map(|(a, b)| (a, b)) },
                }
            })
            .collect();
        Ok(MgHierarchy::new(inputs, smoother)?)
    }
}
