use super::dofmap::DofMap;
use super::sparse::SparseMatrix;
use super::FemError;
use crate::mesh::Mesh2D;

/// The constrained velocity DoFs of a Dirichlet problem.
#[derive(Debug, Clone)]
pub struct DirichletSpec {
    mask: Vec<bool>,
    indices: Vec<usize>,
}

impl DirichletSpec {
    /// Constrains every DoF on the boundary.
    pub fn whole_boundary(mesh: &Mesh2D, dofmap: &DofMap) -> Self {
        Self::from_mask(dofmap.boundary_mask(mesh))
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        let indices = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        Self { mask, indices }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Values of a full coefficient vector at the constrained DoFs.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| full[i]).collect()
    }
}

/// Symmetric elimination with lifting: the constrained rows and columns of
/// `a` become identity, the constrained entries of `rhs` take the prescribed
/// `values`, and the eliminated columns move to the free right-hand side.
pub fn apply_dirichlet(
    a: &SparseMatrix,
    rhs: &mut [f64],
    spec: &DirichletSpec,
    values: &[f64],
) -> Result<SparseMatrix, FemError> {
    if values.len() != spec.len() {
        return Err(FemError::Mismatch(format!(
            "{} boundary values for {} constrained DoFs",
            values.len(),
            spec.len()
        )));
    }
    if a.nrows() != spec.mask.len() || rhs.len() != a.nrows() {
        return Err(FemError::Mismatch("system size does not match the constraint mask".into()));
    }
    let mut g = vec![0.0; a.ncols()];
    for (&i, &v) in spec.indices.iter().zip(values) {
        g[i] = v;
    }
    let lift = a.apply(&g);
    for i in 0..rhs.len() {
        if spec.mask[i] {
            rhs[i] = g[i];
        } else {
            rhs[i] -= lift[i];
        }
    }
    Ok(a.eliminate(&spec.mask, &spec.mask, 1.0))
}
