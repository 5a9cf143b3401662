use std::sync::Arc;

use super::{ButcherTableau, IrkError, StepState};
use crate::fem::{BlockSystem, DirichletSpec, SparseMatrix};
use crate::solve::LinearOperator;

/// Largest total dimension accepted by [`StageOperator::materialize`].
pub const MATERIALIZE_LIMIT: usize = 10_000;

/// `I_r (x) diag(M, 0) + dt A (x) [[K, B], [B^T, 0]]` applied block-wise on
/// stage-major vectors `[(k_1^u, k_1^p), (k_2^u, k_2^p), ...]`.
///
/// With per-stage convection Jacobians the viscous block of stage row `i`
/// becomes `K + J_N(U_i)`.
#[derive(Debug, Clone)]
pub struct StageOperator {
    blocks: Arc<BlockSystem>,
    a: Vec<f64>,
    r: usize,
    dt: f64,
    velocity: Option<Vec<SparseMatrix>>,
}

impl StageOperator {
    pub fn new(blocks: Arc<BlockSystem>, tableau: &ButcherTableau, dt: f64) -> Result<Self, IrkError> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(IrkError::InvalidParameter(format!("time step {dt}")));
        }
        let (nu, np) = (blocks.n_u(), blocks.n_p());
        if blocks.k.nrows() != nu || blocks.b.nrows() != nu || blocks.bt.nrows() != np {
            return Err(IrkError::Dimension("inconsistent Stokes blocks".into()));
        }
        let r = tableau.stages();
        Ok(Self { blocks, a: tableau.a.clone(), r, dt, velocity: None })
    }

    /// Adds `J_N(U_i)` to the viscous block of stage row `i`. On eliminated
    /// blocks the constrained rows and columns of each Jacobian are dropped.
    pub fn with_convection(mut self, jacobians: &[SparseMatrix]) -> Result<Self, IrkError> {
        if jacobians.len() != self.r {
            return Err(IrkError::Dimension(format!("{} Jacobians for {} stages", jacobians.len(), self.r)));
        }
        let nu = self.n_u();
        let mut out = Vec::with_capacity(self.r);
        for j in jacobians {
            if j.nrows() != nu || j.ncols() != nu {
                return Err(IrkError::Dimension("convection Jacobian shape".into()));
            }
            let j = match &self.blocks.constrained {
                Some(mask) => j.eliminate(mask, mask, 0.0),
                None => j.clone(),
            };
            out.push(self.blocks.k.add(1.0, &j, 1.0));
        }
        self.velocity = Some(out);
        Ok(self)
    }

    pub fn blocks(&self) -> &BlockSystem {
        &self.blocks
    }

    pub fn shared_blocks(&self) -> Arc<BlockSystem> {
        self.blocks.clone()
    }

    pub fn stages(&self) -> usize {
        self.r
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_u(&self) -> usize {
        self.blocks.n_u()
    }

    pub fn n_p(&self) -> usize {
        self.blocks.n_p()
    }

    pub fn stage_size(&self) -> usize {
        self.n_u() + self.n_p()
    }

    pub fn total_dim(&self) -> usize {
        self.r * self.stage_size()
    }

    /// `dt * a_ij`.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.dt * self.a[i * self.r + j]
    }

    /// Viscous (plus convection) block of stage row `i`.
    pub fn velocity_block(&self, i: usize) -> &SparseMatrix {
        match &self.velocity {
            Some(v) => &v[i],
            None => &self.blocks.k,
        }
    }

    /// Constrained velocity DoFs (per stage) when the blocks are eliminated.
    pub fn constrained(&self) -> Option<&[bool]> {
        self.blocks.constrained.as_deref()
    }

    /// Stage-major mask of constrained global DoFs.
    pub fn constrained_global(&self) -> Vec<bool> {
        let ss = self.stage_size();
        let mut mask = vec![false; self.total_dim()];
        if let Some(c) = self.constrained() {
            for i in 0..self.r {
                mask[i * ss..i * ss + c.len()].copy_from_slice(c);
            }
        }
        mask
    }

    /// The same tableau on different blocks, e.g. a coarser level.
    pub fn rediscretize(&self, blocks: Arc<BlockSystem>) -> Self {
        Self { blocks, a: self.a.clone(), r: self.r, dt: self.dt, velocity: None }
    }

    /// Explicit sparse form, for operators up to [`MATERIALIZE_LIMIT`] rows.
    pub fn materialize(&self) -> Result<SparseMatrix, IrkError> {
        let n = self.total_dim();
        if n > MATERIALIZE_LIMIT {
            return Err(IrkError::TooLarge(n));
        }
        Ok(self.materialize_unchecked())
    }

    pub(crate) fn materialize_unchecked(&self) -> SparseMatrix {
        let (nu, ss, r) = (self.n_u(), self.stage_size(), self.r);
        let bl = &self.blocks;
        let mut t = Vec::new();
        for i in 0..r {
            let ro = i * ss;
            for row in 0..nu {
                let (c, v) = bl.m.row(row);
                t.extend(c.iter().zip(v).map(|(&col, &x)| (ro + row, ro + col, x)));
            }
            for j in 0..r {
                let w = self.coupling(i, j);
                if w == 0.0 {
                    continue;
                }
                let co = j * ss;
                let kb = self.velocity_block(i);
                for row in 0..nu {
                    let (c, v) = kb.row(row);
                    t.extend(c.iter().zip(v).map(|(&col, &x)| (ro + row, co + col, w * x)));
                    let (c, v) = bl.b.row(row);
                    t.extend(c.iter().zip(v).map(|(&col, &x)| (ro + row, co + nu + col, w * x)));
                }
                for q in 0..self.n_p() {
                    let (c, v) = bl.bt.row(q);
                    t.extend(c.iter().zip(v).map(|(&col, &x)| (ro + nu + q, co + col, w * x)));
                }
            }
        }
        SparseMatrix::from_triplets(self.total_dim(), self.total_dim(), t)
    }

    /// `sum_j a_ij x_j` for every stage `i`, stage-major.
    fn couple(&self, x: &[f64]) -> Vec<f64> {
        let ss = self.stage_size();
        let mut s = vec![0.0; x.len()];
        for i in 0..self.r {
            let si = &mut s[i * ss..(i + 1) * ss];
            for j in 0..self.r {
                let a = self.a[i * self.r + j];
                if a != 0.0 {
                    for (o, v) in si.iter_mut().zip(&x[j * ss..(j + 1) * ss]) {
                        *o += a * v;
                    }
                }
            }
        }
        s
    }
}

impl LinearOperator for StageOperator {
    fn dim(&self) -> usize {
        self.total_dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nu, ss) = (self.n_u(), self.stage_size());
        let s = self.couple(x);
        let bl = &self.blocks;
        for i in 0..self.r {
            let (xi, si) = (&x[i * ss..(i + 1) * ss], &s[i * ss..(i + 1) * ss]);
            let (yu, yp) = y[i * ss..(i + 1) * ss].split_at_mut(nu);
            bl.m.mul_vec(&xi[..nu], yu);
            self.velocity_block(i).mul_vec_add(self.dt, &si[..nu], yu);
            bl.b.mul_vec_add(self.dt, &si[nu..], yu);
            yp.iter_mut().for_each(|v| *v = 0.0);
            bl.bt.mul_vec_add(self.dt, &si[..nu], yp);
        }
    }
}

/// Dirichlet data for the stage unknowns `k_i` on the constrained velocity
/// DoFs, one vector per stage.
#[derive(Debug, Clone, Copy)]
pub struct StageBoundary<'a> {
    pub spec: &'a DirichletSpec,
    pub values: &'a [Vec<f64>],
}

/// Stage derivatives whose stage values hit the boundary data:
/// `k_i = dt^-1 sum_j (A^-1)_ij (g_j - u^n)`, so that
/// `u^n + dt sum_j a_ij k_j = g(t^n + c_i dt)` on every constrained DoF.
/// `stage_values[j]` holds `g(t^n + c_j dt)` and `current` holds `u^n`, both
/// restricted to the constrained DoFs.
pub fn stage_dirichlet_values(
    tableau: &ButcherTableau,
    dt: f64,
    current: &[f64],
    stage_values: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, IrkError> {
    let r = tableau.stages();
    if stage_values.len() != r || stage_values.iter().any(|g| g.len() != current.len()) {
        return Err(IrkError::Dimension("stage boundary values".into()));
    }
    if !(dt > 0.0) {
        return Err(IrkError::InvalidParameter(format!("dt = {dt}")));
    }
    let inv = nalgebra::DMatrix::from_row_slice(r, r, &tableau.a)
        .try_inverse()
        .ok_or_else(|| IrkError::InvalidParameter(format!("{} has a singular coefficient matrix", tableau.name)))?;
    Ok((0..r)
        .map(|i| {
            (0..current.len())
                .map(|q| (0..r).map(|j| inv[(i, j)] * (stage_values[j][q] - current[q])).sum::<f64>() / dt)
                .collect()
        })
        .collect())
}

/// Stage right-hand side on raw (non-eliminated) blocks: velocity rows
/// `M f_i - K u^n - B p^n`, pressure rows `-B^T u^n`, then lifted so the
/// result pairs with the eliminated stage operator.
///
/// `forcing` holds velocity coefficient vectors of `f(t^n + c_i dt)`.
pub fn assemble_stage_rhs(
    blocks: &BlockSystem,
    tableau: &ButcherTableau,
    step: &StepState,
    forcing: Option<&[Vec<f64>]>,
    boundary: Option<StageBoundary<'_>>,
) -> Result<Vec<f64>, IrkError> {
    let (nu, np, r) = (blocks.n_u(), blocks.n_p(), tableau.stages());
    let ss = nu + np;
    if step.u.len() != nu || step.p.len() != np {
        return Err(IrkError::Dimension("state does not match the blocks".into()));
    }
    let mut base_u = vec![0.0; nu];
    blocks.k.mul_vec_add(-1.0, &step.u, &mut base_u);
    blocks.b.mul_vec_add(-1.0, &step.p, &mut base_u);
    let mut base_p = vec![0.0; np];
    blocks.bt.mul_vec_add(-1.0, &step.u, &mut base_p);

    let mut rhs = vec![0.0; r * ss];
    for i in 0..r {
        let (ru, rp) = rhs[i * ss..(i + 1) * ss].split_at_mut(nu);
        ru.copy_from_slice(&base_u);
        rp.copy_from_slice(&base_p);
        if let Some(f) = forcing {
            let fi = f.get(i).ok_or_else(|| IrkError::Dimension("missing stage forcing".into()))?;
            if fi.len() != nu {
                return Err(IrkError::Dimension("forcing length".into()));
            }
            blocks.m.mul_vec_add(1.0, fi, ru);
        }
    }
    if let Some(bc) = boundary {
        lift(blocks, tableau, step.dt, bc, &mut rhs)?;
    }
    Ok(rhs)
}

fn lift(
    blocks: &BlockSystem,
    tableau: &ButcherTableau,
    dt: f64,
    bc: StageBoundary<'_>,
    rhs: &mut [f64],
) -> Result<(), IrkError> {
    let (nu, np, r) = (blocks.n_u(), blocks.n_p(), tableau.stages());
    let ss = nu + np;
    if bc.spec.mask().len() != nu || bc.values.len() != r || bc.values.iter().any(|v| v.len() != bc.spec.len())
    {
        return Err(IrkError::Dimension("stage boundary data".into()));
    }
    let g: Vec<Vec<f64>> = bc
        .values
        .iter()
        .map(|vals| {
            let mut g = vec![0.0; nu];
            for (&d, &v) in bc.spec.indices().iter().zip(vals) {
                g[d] = v;
            }
            g
        })
        .collect();
    let mut tmp = vec![0.0; nu];
    for i in 0..r {
        let mut s = vec![0.0; nu];
        for (j, gj) in g.iter().enumerate() {
            let a = tableau.a(i, j);
            if a != 0.0 {
                s.iter_mut().zip(gj).for_each(|(o, v)| *o += a * v);
            }
        }
        let (ru, rp) = rhs[i * ss..(i + 1) * ss].split_at_mut(nu);
        blocks.m.mul_vec(&g[i], &mut tmp);
        blocks.k.mul_vec_add(dt, &s, &mut tmp);
        ru.iter_mut().zip(&tmp).for_each(|(o, v)| *o -= v);
        blocks.bt.mul_vec_add(-dt, &s, rp);
        for &d in bc.spec.indices() {
            ru[d] = g[i][d];
        }
    }
    Ok(())
}
