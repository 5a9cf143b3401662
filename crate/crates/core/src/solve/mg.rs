//! Geometric V-cycle on the stage-coupled system with rediscretized level
//! operators, Vanka-based smoothing and a direct coarsest solve.

use super::{
    chebyshev_smooth, fgmres, BandedLu, KrylovConfig, LinearOperator, PressureNullspace, Preconditioner,
    SolveError, VankaPatchSet,
};
use crate::fem::{DofMap, SparseMatrix};
use crate::irk::StageOperator;
use crate::mesh::Mesh2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceleration {
    Chebyshev { a: f64, b: f64 },
    /// Fixed number of inner GMRES iterations, Vanka-preconditioned.
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherSpec {
    pub pre: usize,
    pub post: usize,
    pub accel: Acceleration,
    pub omega: f64,
}

impl SmootherSpec {
    pub fn stokes() -> Self {
        Self { pre: 2, post: 2, accel: Acceleration::Chebyshev { a: 2.0, b: 8.0 }, omega: 1.0 }
    }

    pub fn navier_stokes() -> Self {
        Self { pre: 2, post: 2, accel: Acceleration::Chebyshev { a: 1.5, b: 8.0 }, omega: 1.0 }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if let Acceleration::Chebyshev { a, b } = self.accel {
            if !(a > 0.0 && b > a) {
                return Err(SolveError::InvalidInterval { a, b });
            }
        }
        if !(self.omega > 0.0) {
            return Err(SolveError::InvalidParameter(format!("omega {}", self.omega)));
        }
        Ok(())
    }
}

/// Inputs describing one level, coarsest first.
pub struct LevelInput<'a> {
    pub mesh: &'a Mesh2D,
    pub velocity: &'a DofMap,
    pub pressure: &'a DofMap,
    pub op: StageOperator,
    /// Velocity and pressure prolongation from the next coarser level.
    pub prolongation: Option<(&'a SparseMatrix, &'a SparseMatrix)>,
}

struct Level {
    op: StageOperator,
    patches: Option<VankaPatchSet>,
    /// Velocity and pressure prolongation from the level below, plus transposes.
    transfer: Option<[SparseMatrix; 4]>,
    constrained: Vec<bool>,
    nullspace: PressureNullspace,
}

/// Direct solve of a stage system whose pressure is determined up to one
/// constant per stage: one pressure row per stage is pinned, the right-hand
/// side and the solution are projected.
#[derive(Debug, Clone)]
pub struct CoarseSolver {
    lu: BandedLu,
    nullspace: PressureNullspace,
}

impl CoarseSolver {
    pub fn new(op: &StageOperator) -> Result<Self, SolveError> {
        let nullspace = PressureNullspace::new(op.n_u(), op.n_p(), op.stages());
        let mat = op.materialize_unchecked();
        Self::from_matrix(&mat, nullspace)
    }

    pub fn from_matrix(mat: &SparseMatrix, nullspace: PressureNullspace) -> Result<Self, SolveError> {
        let mut pin = vec![false; mat.nrows()];
        for p in nullspace.pinned_rows() {
            pin[p] = true;
        }
        let none = vec![false; mat.ncols()];
        let pinned = mat.eliminate(&pin, &none, 1.0);
        Ok(Self { lu: BandedLu::factor(&pinned)?, nullspace })
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        self.lu.bandwidths()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = b.to_vec();
        self.nullspace.project(&mut rhs);
        for p in self.nullspace.pinned_rows() {
            rhs[p] = 0.0;
        }
        let mut x = self.lu.solve(&rhs);
        self.nullspace.project(&mut x);
        x
    }
}

pub struct MgHierarchy {
    levels: Vec<Level>,
    coarse: CoarseSolver,
    smoother: SmootherSpec,
}

impl MgHierarchy {
    pub fn new(inputs: Vec<LevelInput<'_>>, smoother: SmootherSpec) -> Result<Self, SolveError> {
        smoother.validate()?;
        if inputs.is_empty() {
            return Err(SolveError::InvalidParameter("empty hierarchy".into()));
        }
        let coarse = CoarseSolver::new(&inputs[0].op)?;
        let mut levels = Vec::with_capacity(inputs.len());
        for (k, inp) in inputs.into_iter().enumerate() {
            let patches = if k == 0 {
                None
            } else {
                Some(VankaPatchSet::build(inp.mesh, inp.velocity, inp.pressure, &inp.op, smoother.omega)?)
            };
            let transfer = match (k, inp.prolongation) {
                (0, _) => None,
                (_, Some((pu, pp))) => {
                    let prev: &Level = &levels[k - 1];
                    if pu.nrows() != inp.op.n_u()
                        || pp.nrows() != inp.op.n_p()
                        || pu.ncols() != prev.op.n_u()
                        || pp.ncols() != prev.op.n_p()
                    {
                        return Err(SolveError::Dimension(format!("prolongation into level {k}")));
                    }
                    Some([pu.clone(), pp.clone(), pu.transpose(), pp.transpose()])
                }
                (_, None) => return Err(SolveError::Dimension(format!("level {k} lacks a prolongation"))),
            };
            let nullspace = PressureNullspace::new(inp.op.n_u(), inp.op.n_p(), inp.op.stages());
            levels.push(Level { constrained: inp.op.constrained_global(), op: inp.op, patches, transfer, nullspace });
        }
        Ok(Self { levels, coarse, smoother })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn operator(&self, level: usize) -> &StageOperator {
        &self.levels[level].op
    }

    pub fn finest_operator(&self) -> &StageOperator {
        &self.levels.last().unwrap().op
    }

    pub fn patches(&self, level: usize) -> Option<&VankaPatchSet> {
        self.levels[level].patches.as_ref()
    }

    pub fn smoother(&self) -> &SmootherSpec {
        &self.smoother
    }

    pub fn nullspace(&self) -> &PressureNullspace {
        &self.levels.last().unwrap().nullspace
    }

    /// `(I_r (x) P) x_c` for the transfer into `level`.
    pub fn prolong(&self, level: usize, xc: &[f64]) -> Vec<f64> {
        let l = &self.levels[level];
        let c = &self.levels[level - 1];
        let [pu, pp, _, _] = l.transfer.as_ref().unwrap();
        let (fu, fs) = (l.op.n_u(), l.op.stage_size());
        let (cu, cs) = (c.op.n_u(), c.op.stage_size());
        let mut out = vec![0.0; l.op.total_dim()];
        for i in 0..l.op.stages() {
            let (ou, op_) = out[i * fs..(i + 1) * fs].split_at_mut(fu);
            pu.mul_vec(&xc[i * cs..i * cs + cu], ou);
            pp.mul_vec(&xc[i * cs + cu..(i + 1) * cs], op_);
        }
        out
    }

    /// `(I_r (x) P)^T r` for the transfer out of `level`.
    pub fn restrict(&self, level: usize, r: &[f64]) -> Vec<f64> {
        let l = &self.levels[level];
        let c = &self.levels[level - 1];
        let [_, _, put, ppt] = l.transfer.as_ref().unwrap();
        let (fu, fs) = (l.op.n_u(), l.op.stage_size());
        let (cu, cs) = (c.op.n_u(), c.op.stage_size());
        let mut out = vec![0.0; c.op.total_dim()];
        for i in 0..l.op.stages() {
            let (ou, op_) = out[i * cs..(i + 1) * cs].split_at_mut(cu);
            put.mul_vec(&r[i * fs..i * fs + fu], ou);
            ppt.mul_vec(&r[i * fs + fu..(i + 1) * fs], op_);
        }
        out
    }

    fn smooth(&mut self, level: usize, sweeps: usize, x: &mut [f64], b: &[f64]) -> Result<(), SolveError> {
        if sweeps == 0 {
            return Ok(());
        }
        let spec = self.smoother;
        let l = &mut self.levels[level];
        let patches = l.patches.as_mut().expect("smoothed levels carry patches");
        match spec.accel {
            Acceleration::Chebyshev { a, b: hi } => chebyshev_smooth(&l.op, patches, a, hi, sweeps, x, b),
            Acceleration::Gmres => {
                let cfg = KrylovConfig { rtol: 0.0, atol: 0.0, maxiter: sweeps, restart: sweeps };
                fgmres(&l.op, patches, b, x, &cfg, None);
                Ok(())
            }
        }
    }

    /// One V-cycle on `level` for `A x = b`, updating `x`.
    pub fn vcycle(&mut self, level: usize, x: &mut [f64], b: &[f64]) -> Result<(), SolveError> {
        if level >= self.levels.len() {
            return Err(SolveError::InvalidParameter(format!("level {level} out of range")));
        }
        if level == 0 {
            let sol = self.coarse.solve(b);
            x.copy_from_slice(&sol);
            return Ok(());
        }
        for (i, &c) in self.levels[level].constrained.iter().enumerate() {
            if c {
                x[i] = b[i];
            }
        }
        let (pre, post) = (self.smoother.pre, self.smoother.post);
        self.smooth(level, pre, x, b)?;
        let mut r = vec![0.0; b.len()];
        self.levels[level].op.apply(x, &mut r);
        r.iter_mut().zip(b).for_each(|(o, bi)| *o = bi - *o);
        let mut rc = self.restrict(level, &r);
        for (v, &c) in rc.iter_mut().zip(&self.levels[level - 1].constrained) {
            if c {
                *v = 0.0;
            }
        }
        let mut xc = vec![0.0; rc.len()];
        self.vcycle(level - 1, &mut xc, &rc)?;
        let corr = self.prolong(level, &xc);
        for ((o, v), &c) in x.iter_mut().zip(&corr).zip(&self.levels[level].constrained) {
            if !c {
                *o += v;
            }
        }
        self.smooth(level, post, x, b)
    }
}

impl Preconditioner for MgHierarchy {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        let top = self.levels.len() - 1;
        self.vcycle(top, z, r).expect("V-cycle on a validated hierarchy");
    }
}
