//! Additive Vanka relaxation on the stage-coupled system: one patch per
//! vertex holding the velocity DoFs on the closure of its star and the
//! pressure DoF at the vertex, for every stage.

use rayon::prelude::*;

use super::{DenseLu, LinearOperator, Preconditioner, SolveError};
use crate::fem::{DofMap, SparseMatrix};
use crate::irk::StageOperator;
use crate::mesh::Mesh2D;

#[derive(Debug, Clone)]
pub struct VankaPatch {
    pub vertex: usize,
    /// Spatial DoFs within one stage block: velocity DoFs (sorted), then the
    /// pressure DoF offset by `n_u`.
    pub spatial: Vec<usize>,
    /// Stage-major global indices, stage `i` occupying
    /// `global[i * spatial.len()..]`.
    pub global: Vec<usize>,
    lu: DenseLu,
}

impl VankaPatch {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    pub fn solve(&self, local: &mut [f64]) {
        self.lu.solve_in_place(local)
    }
}

#[derive(Debug, Clone)]
pub struct VankaPatchSet {
    patches: Vec<VankaPatch>,
    omega: f64,
    dim: usize,
}

/// Spatial DoFs of the patch around `v` on one stage block.
pub fn patch_spatial_dofs(mesh: &Mesh2D, velocity: &DofMap, v: usize, constrained: Option<&[bool]>) -> Vec<usize> {
    let closure = mesh.vertex_star_closure(v).expect("vertex in range");
    let nv = mesh.num_vertices();
    let nc = velocity.components();
    let mut dofs = Vec::new();
    for node in closure.vertices.iter().copied().chain(closure.edges.iter().map(|e| nv + e)) {
        for c in 0..nc {
            let d = nc * node + c;
            if !constrained.is_some_and(|m| m[d]) {
                dofs.push(d);
            }
        }
    }
    dofs.sort_unstable();
    dofs.push(velocity.num_dofs() + v);
    dofs
}

impl VankaPatchSet {
    /// Builds and factors one patch per vertex of `mesh` for the operator
    /// `op` (whose blocks live on `mesh` with spaces `velocity`, `pressure`).
    pub fn build(
        mesh: &Mesh2D,
        velocity: &DofMap,
        pressure: &DofMap,
        op: &StageOperator,
        omega: f64,
    ) -> Result<Self, SolveError> {
        if velocity.num_dofs() != op.n_u() || pressure.num_dofs() != op.n_p() || pressure.num_dofs() != mesh.num_vertices()
        {
            return Err(SolveError::Dimension("patch spaces do not match the operator".into()));
        }
        let ss = op.stage_size();
        let constrained = op.constrained();
        let patches: Result<Vec<VankaPatch>, SolveError> = (0..mesh.num_vertices())
            .into_par_iter()
            .map_init(
                || vec![usize::MAX; ss],
                |scratch, v| {
                    let spatial = patch_spatial_dofs(mesh, velocity, v, constrained);
                    let dense = patch_matrix(op, &spatial, scratch);
                    let lu = DenseLu::factor(op.stages() * spatial.len(), dense)
                        .map_err(|e| SolveError::SingularPatch { vertex: v, reason: e.to_string() })?;
                    let global = (0..op.stages()).flat_map(|i| spatial.iter().map(move |&s| i * ss + s)).collect();
                    Ok(VankaPatch { vertex: v, spatial, global, lu })
                },
            )
            .collect();
        Ok(Self { patches: patches?, omega, dim: op.total_dim() })
    }

    /// Patches given directly as global index sets of an assembled matrix.
    pub fn from_index_sets(a: &SparseMatrix, sets: Vec<Vec<usize>>, omega: f64) -> Result<Self, SolveError> {
        let mut patches = Vec::with_capacity(sets.len());
        for (k, global) in sets.into_iter().enumerate() {
            let n = global.len();
            let mut dense = vec![0.0; n * n];
            for (i, &gi) in global.iter().enumerate() {
                for (j, &gj) in global.iter().enumerate() {
                    dense[i * n + j] = a.get(gi, gj);
                }
            }
            let lu = DenseLu::factor(n, dense)
                .map_err(|e| SolveError::SingularPatch { vertex: k, reason: e.to_string() })?;
            patches.push(VankaPatch { vertex: k, spatial: global.clone(), global, lu });
        }
        Ok(Self { patches, omega, dim: a.nrows() })
    }

    pub fn patches(&self) -> &[VankaPatch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn set_omega(&mut self, omega: f64) {
        self.omega = omega;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of patches containing each global DoF.
    pub fn coverage(&self) -> Vec<usize> {
        let mut count = vec![0; self.dim];
        for p in &self.patches {
            for &g in &p.global {
                count[g] += 1;
            }
        }
        count
    }

    /// `z = omega sum_i R_i^T A_i^{-1} R_i r`, with patches accumulated in
    /// the given order.
    pub fn apply_ordered(&self, r: &[f64], z: &mut [f64], order: &[usize]) {
        let local: Vec<Vec<f64>> = order
            .par_iter()
            .map(|&k| {
                let p = &self.patches[k];
                let mut v: Vec<f64> = p.global.iter().map(|&g| r[g]).collect();
                p.solve(&mut v);
                v
            })
            .collect();
        z.iter_mut().for_each(|v| *v = 0.0);
        for (&k, v) in order.iter().zip(&local) {
            for (&g, x) in self.patches[k].global.iter().zip(v) {
                z[g] += self.omega * x;
            }
        }
    }

    /// Additive correction `z` for residual `r`, patches in index order.
    pub fn correction(&self, r: &[f64], z: &mut [f64]) {
        let order: Vec<usize> = (0..self.patches.len()).collect();
        self.apply_ordered(r, z, &order);
    }

    /// One stationary sweep `x <- x + omega sum_i R_i^T A_i^{-1} R_i (b - A x)`.
    pub fn apply(&self, op: &dyn LinearOperator, x: &mut [f64], b: &[f64]) {
        let mut r = vec![0.0; b.len()];
        op.apply(x, &mut r);
        r.iter_mut().zip(b).for_each(|(o, bi)| *o = bi - *o);
        let mut z = vec![0.0; b.len()];
        self.correction(&r, &mut z);
        x.iter_mut().zip(&z).for_each(|(o, v)| *o += v);
    }
}

impl Preconditioner for VankaPatchSet {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) {
        self.correction(r, z);
    }
}

/// Dense `R A R^T` for the patch with the given spatial DoFs, stage-major.
fn patch_matrix(op: &StageOperator, spatial: &[usize], scratch: &mut [usize]) -> Vec<f64> {
    let (nu, r, m) = (op.n_u(), op.stages(), spatial.len());
    let n = r * m;
    let mut out = vec![0.0; n * n];
    for (a, &s) in spatial.iter().enumerate() {
        scratch[s] = a;
    }
    let bl = op.blocks();
    let put = |i: usize, a: usize, j: usize, b: usize, v: f64, out: &mut Vec<f64>| {
        out[(i * m + a) * n + j * m + b] += v;
    };
    for (a, &s) in spatial.iter().enumerate() {
        if s < nu {
            let (c, v) = bl.m.row(s);
            for (&col, &x) in c.iter().zip(v) {
                let b = scratch[col];
                if b != usize::MAX {
                    for i in 0..r {
                        put(i, a, i, b, x, &mut out);
                    }
                }
            }
            for i in 0..r {
                let (c, v) = op.velocity_block(i).row(s);
                for (&col, &x) in c.iter().zip(v) {
                    let b = scratch[col];
                    if b != usize::MAX {
                        for j in 0..r {
                            put(i, a, j, b, op.coupling(i, j) * x, &mut out);
                        }
                    }
                }
            }
            let (c, v) = bl.b.row(s);
            for (&col, &x) in c.iter().zip(v) {
                let b = scratch[nu + col];
                if b != usize::MAX {
                    for i in 0..r {
                        for j in 0..r {
                            put(i, a, j, b, op.coupling(i, j) * x, &mut out);
                        }
                    }
                }
            }
        } else {
            let (c, v) = bl.bt.row(s - nu);
            for (&col, &x) in c.iter().zip(v) {
                let b = scratch[col];
                if b != usize::MAX {
                    for i in 0..r {
                        for j in 0..r {
                            put(i, a, j, b, op.coupling(i, j) * x, &mut out);
                        }
                    }
                }
            }
        }
    }
    for &s in spatial {
        scratch[s] = usize::MAX;
    }
    out
}
