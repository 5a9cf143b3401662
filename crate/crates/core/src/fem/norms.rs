use super::dofmap::{p1_basis, p2_basis, CellGeometry, DofMap, SpaceKind};
use super::quadrature::TriangleRule;
use super::FemError;
use crate::mesh::{Mesh2D, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Absolute,
    /// Divided by the L2 norm of the exact field.
    Relative,
}

/// L2 distance between a finite-element field and a pointwise exact field
/// (which writes one value per component), using degree-8 quadrature.
pub fn l2_error(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    coeffs: &[f64],
    exact: impl Fn(Point, &mut [f64]),
    mode: ErrorMode,
) -> Result<f64, FemError> {
    l2_error_with(mesh, dofmap, coeffs, exact, mode, 8)
}

pub fn l2_error_with(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    coeffs: &[f64],
    exact: impl Fn(Point, &mut [f64]),
    mode: ErrorMode,
    degree: usize,
) -> Result<f64, FemError> {
    if !dofmap.matches(mesh) || coeffs.len() != dofmap.num_dofs() {
        return Err(FemError::Mismatch("coefficients do not match the space".into()));
    }
    let rule = TriangleRule::of_degree(degree);
    let nc = dofmap.components();
    let mut err2 = 0.0;
    let mut norm2 = 0.0;
    let mut ex = vec![0.0; nc];
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let nodes = dofmap.cell_nodes(c);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let basis: Vec<f64> = match dofmap.kind() {
                SpaceKind::P1 => p1_basis(p[0], p[1]).0.to_vec(),
                _ => p2_basis(p[0], p[1]).0.to_vec(),
            };
            exact(geo.map(p[0], p[1]), &mut ex);
            for k in 0..nc {
                let uh: f64 = nodes.iter().zip(&basis).map(|(&s, b)| coeffs[nc * s + k] * b).sum();
                err2 += w * geo.det * (uh - ex[k]).powi(2);
                norm2 += w * geo.det * ex[k].powi(2);
            }
        }
    }
    match mode {
        ErrorMode::Absolute => Ok(err2.sqrt()),
        ErrorMode::Relative => {
            if norm2.sqrt() < 1e-14 {
                Err(FemError::ZeroNorm)
            } else {
                Ok((err2 / norm2).sqrt())
            }
        }
    }
}
