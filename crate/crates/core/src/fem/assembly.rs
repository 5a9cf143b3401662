//! Assembly of the Taylor-Hood blocks.

use super::dofmap::{p1_basis, p2_basis, CellGeometry, DofMap, SpaceKind};
use super::quadrature::TriangleRule;
use super::sparse::SparseMatrix;
use super::FemError;
use crate::mesh::Mesh2D;

/// Quadrature degree for each assembled form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureDegrees {
    pub mass: usize,
    pub stiffness: usize,
    pub divergence: usize,
    pub convection: usize,
    pub error: usize,
}

impl Default for QuadratureDegrees {
    fn default() -> Self {
        Self { mass: 4, stiffness: 2, divergence: 3, convection: 5, error: 8 }
    }
}

impl QuadratureDegrees {
    pub fn raised(self, by: usize) -> Self {
        Self {
            mass: self.mass + by,
            stiffness: self.stiffness + by,
            divergence: self.divergence + by,
            convection: self.convection + by,
            error: self.error + by,
        }
    }
}

fn check(mesh: &Mesh2D, dofmap: &DofMap, kind: SpaceKind) -> Result<(), FemError> {
    if dofmap.kind() != kind {
        return Err(FemError::Mismatch(format!("expected a {kind:?} space, got {:?}", dofmap.kind())));
    }
    if !dofmap.matches(mesh) {
        return Err(FemError::Mismatch("dof map was built on a different mesh".into()));
    }
    Ok(())
}

struct P2Tabulation {
    weights: Vec<f64>,
    values: Vec<[f64; 6]>,
    grads: Vec<[[f64; 2]; 6]>,
}

fn tabulate_p2(degree: usize) -> P2Tabulation {
    let rule = TriangleRule::of_degree(degree);
    let (values, grads) = rule.points.iter().map(|p| p2_basis(p[0], p[1])).unzip();
    P2Tabulation { weights: rule.weights, values, grads }
}

/// Expands a scalar 6x6 local matrix into the interleaved 12x12 vector form
/// (block diagonal in components) and appends it as triplets.
fn scatter_vector_diag(dofs: &[usize], local: &[[f64; 6]; 6], out: &mut Vec<(usize, usize, f64)>) {
    for a in 0..6 {
        for b in 0..6 {
            for c in 0..2 {
                out.push((dofs[2 * a + c], dofs[2 * b + c], local[a][b]));
            }
        }
    }
}

/// Vector P2 mass matrix `M_ij = <phi_j, phi_i>`.
pub fn assemble_mass(mesh: &Mesh2D, dofmap: &DofMap) -> Result<SparseMatrix, FemError> {
    assemble_mass_with(mesh, dofmap, QuadratureDegrees::default().mass)
}

pub fn assemble_mass_with(mesh: &Mesh2D, dofmap: &DofMap, degree: usize) -> Result<SparseMatrix, FemError> {
    check(mesh, dofmap, SpaceKind::P2Vec)?;
    let tab = tabulate_p2(degree);
    let mut t = Vec::with_capacity(144 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let mut local = [[0.0; 6]; 6];
        for (w, n) in tab.weights.iter().zip(&tab.values) {
            let w = w * geo.det;
            for a in 0..6 {
                for b in 0..6 {
                    local[a][b] += w * n[a] * n[b];
                }
            }
        }
        scatter_vector_diag(&dofmap.cell_dofs(c), &local, &mut t);
    }
    Ok(SparseMatrix::from_triplets(dofmap.num_dofs(), dofmap.num_dofs(), t))
}

/// Vector P2 stiffness matrix `K_ij = <grad phi_j, grad phi_i>`.
pub fn assemble_stiffness(mesh: &Mesh2D, dofmap: &DofMap) -> Result<SparseMatrix, FemError> {
    assemble_stiffness_with(mesh, dofmap, QuadratureDegrees::default().stiffness)
}

pub fn assemble_stiffness_with(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    degree: usize,
) -> Result<SparseMatrix, FemError> {
    check(mesh, dofmap, SpaceKind::P2Vec)?;
    let tab = tabulate_p2(degree);
    let mut t = Vec::with_capacity(144 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let mut local = [[0.0; 6]; 6];
        for (w, g) in tab.weights.iter().zip(&tab.grads) {
            let w = w * geo.det;
            let pg: Vec<[f64; 2]> = g.iter().map(|&gi| geo.grad(gi)).collect();
            for a in 0..6 {
                for b in 0..6 {
                    local[a][b] += w * (pg[a][0] * pg[b][0] + pg[a][1] * pg[b][1]);
                }
            }
        }
        scatter_vector_diag(&dofmap.cell_dofs(c), &local, &mut t);
    }
    Ok(SparseMatrix::from_triplets(dofmap.num_dofs(), dofmap.num_dofs(), t))
}

/// Weak gradient `B_ij = -<psi_j, div phi_i>` with velocity rows and pressure columns.
pub fn assemble_divergence(
    mesh: &Mesh2D,
    velocity: &DofMap,
    pressure: &DofMap,
) -> Result<SparseMatrix, FemError> {
    assemble_divergence_with(mesh, velocity, pressure, QuadratureDegrees::default().divergence)
}

pub fn assemble_divergence_with(
    mesh: &Mesh2D,
    velocity: &DofMap,
    pressure: &DofMap,
    degree: usize,
) -> Result<SparseMatrix, FemError> {
    check(mesh, velocity, SpaceKind::P2Vec)?;
    check(mesh, pressure, SpaceKind::P1)?;
    let rule = TriangleRule::of_degree(degree);
    let mut t = Vec::with_capacity(36 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let vd = velocity.cell_dofs(c);
        let pd = pressure.cell_nodes(c);
        let mut local = [[0.0; 3]; 12];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let w = w * geo.det;
            let (_, g) = p2_basis(p[0], p[1]);
            let (psi, _) = p1_basis(p[0], p[1]);
            for a in 0..6 {
                let pg = geo.grad(g[a]);
                for comp in 0..2 {
                    for q in 0..3 {
                        local[2 * a + comp][q] -= w * psi[q] * pg[comp];
                    }
                }
            }
        }
        for i in 0..12 {
            for q in 0..3 {
                t.push((vd[i], pd[q], local[i][q]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(velocity.num_dofs(), pressure.num_dofs(), t))
}

/// Scalar P1 mass matrix.
pub fn assemble_p1_mass(mesh: &Mesh2D, pressure: &DofMap) -> Result<SparseMatrix, FemError> {
    check(mesh, pressure, SpaceKind::P1)?;
    let rule = TriangleRule::of_degree(2);
    let mut t = Vec::with_capacity(9 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let nodes = pressure.cell_nodes(c);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (psi, _) = p1_basis(p[0], p[1]);
            for a in 0..3 {
                for b in 0..3 {
                    t.push((nodes[a], nodes[b], w * geo.det * psi[a] * psi[b]));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(pressure.num_dofs(), pressure.num_dofs(), t))
}

/// Convection residual `N(u)_i = <(u . grad) u, phi_i>` and its Jacobian
/// `J_N(u) w = <(w . grad) u + (u . grad) w, phi_i>`.
pub fn assemble_convection(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    u: &[f64],
) -> Result<(Vec<f64>, SparseMatrix), FemError> {
    assemble_convection_with(mesh, dofmap, u, QuadratureDegrees::default().convection)
}

pub fn assemble_convection_with(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    u: &[f64],
    degree: usize,
) -> Result<(Vec<f64>, SparseMatrix), FemError> {
    check(mesh, dofmap, SpaceKind::P2Vec)?;
    if u.len() != dofmap.num_dofs() {
        return Err(FemError::Mismatch(format!(
            "velocity has {} entries, space has {}",
            u.len(),
            dofmap.num_dofs()
        )));
    }
    let tab = tabulate_p2(degree);
    let n = dofmap.num_dofs();
    let mut residual = vec![0.0; n];
    let mut t = Vec::with_capacity(144 * mesh.num_cells());
    let mut pg = [[0.0; 2]; 6];
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let dofs = dofmap.cell_dofs(c);
        let mut res = [0.0; 12];
        let mut jac = [[0.0; 12]; 12];
        for ((w, nv), g) in tab.weights.iter().zip(&tab.values).zip(&tab.grads) {
            let w = w * geo.det;
            for a in 0..6 {
                pg[a] = geo.grad(g[a]);
            }
            // u and grad u (du[c][d] = d u_c / d x_d) at the point
            let mut uq = [0.0; 2];
            let mut du = [[0.0; 2]; 2];
            for a in 0..6 {
                for comp in 0..2 {
                    let coef = u[dofs[2 * a + comp]];
                    uq[comp] += coef * nv[a];
                    du[comp][0] += coef * pg[a][0];
                    du[comp][1] += coef * pg[a][1];
                }
            }
            let adv = [
                uq[0] * du[0][0] + uq[1] * du[0][1],
                uq[0] * du[1][0] + uq[1] * du[1][1],
            ];
            for k in 0..6 {
                for comp in 0..2 {
                    res[2 * k + comp] += w * adv[comp] * nv[k];
                }
            }
            for k in 0..6 {
                for m in 0..6 {
                    let transport = uq[0] * pg[m][0] + uq[1] * pg[m][1];
                    let wkm = w * nv[k] * nv[m];
                    for comp in 0..2 {
                        for d in 0..2 {
                            let mut v = wkm * du[comp][d];
                            if comp == d {
                                v += w * nv[k] * transport;
                            }
                            jac[2 * k + comp][2 * m + d] += v;
                        }
                    }
                }
            }
        }
        for i in 0..12 {
            residual[dofs[i]] += res[i];
            for j in 0..12 {
                t.push((dofs[i], dofs[j], jac[i][j]));
            }
        }
    }
    Ok((residual, SparseMatrix::from_triplets(n, n, t)))
}

/// The assembled Stokes blocks on one mesh.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub m: SparseMatrix,
    /// Viscous block, already scaled by the viscosity.
    pub k: SparseMatrix,
    pub b: SparseMatrix,
    pub bt: SparseMatrix,
    /// `int psi_j`, used to project pressures onto zero mean.
    pub pressure_weights: Vec<f64>,
    /// Constrained velocity DoFs when the blocks carry Dirichlet elimination.
    pub constrained: Option<Vec<bool>>,
}

impl BlockSystem {
    pub fn assemble(mesh: &Mesh2D, velocity: &DofMap, pressure: &DofMap, mu: f64) -> Result<Self, FemError> {
        Self::assemble_with(mesh, velocity, pressure, mu, QuadratureDegrees::default())
    }

    pub fn assemble_with(
        mesh: &Mesh2D,
        velocity: &DofMap,
        pressure: &DofMap,
        mu: f64,
        q: QuadratureDegrees,
    ) -> Result<Self, FemError> {
        let m = assemble_mass_with(mesh, velocity, q.mass)?;
        let mut k = assemble_stiffness_with(mesh, velocity, q.stiffness)?;
        if mu != 1.0 {
            k.values_mut().iter_mut().for_each(|v| *v *= mu);
        }
        let b = assemble_divergence_with(mesh, velocity, pressure, q.divergence)?;
        let bt = b.transpose();
        let pressure_weights = assemble_p1_mass(mesh, pressure)?.row_sums();
        Ok(Self { m, k, b, bt, pressure_weights, constrained: None })
    }

    pub fn n_u(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.b.ncols()
    }

    /// Symmetric Dirichlet elimination of the velocity DoFs in `mask`:
    /// unit diagonal in `M`, zero rows and columns in `K` and zero rows in `B`.
    pub fn eliminated(&self, mask: &[bool]) -> Self {
        let none = vec![false; self.n_p()];
        let b = self.b.eliminate(mask, &none, 0.0);
        let bt = b.transpose();
        Self {
            m: self.m.eliminate(mask, mask, 1.0),
            k: self.k.eliminate(mask, mask, 0.0),
            b,
            bt,
            pressure_weights: self.pressure_weights.clone(),
            constrained: Some(mask.to_vec()),
        }
    }

    /// Removes the constant from a pressure vector so that `int p = 0`.
    pub fn project_pressure_mean(&self, p: &mut [f64]) {
        let area: f64 = self.pressure_weights.iter().sum();
        let mean = self.pressure_weights.iter().zip(p.iter()).map(|(w, v)| w * v).sum::<f64>() / area;
        p.iter_mut().for_each(|v| *v -= mean);
    }
}
