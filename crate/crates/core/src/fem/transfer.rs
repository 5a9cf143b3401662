//! Canonical interpolation between nested Lagrange spaces.

use super::dofmap::{p2_basis_bary, DofMap, SpaceKind};
use super::sparse::SparseMatrix;
use super::FemError;
use crate::mesh::{Mesh2D, VertexParent};

const B0: [f64; 3] = [1.0, 0.0, 0.0];
const B1: [f64; 3] = [0.0, 1.0, 0.0];
const B2: [f64; 3] = [0.0, 0.0, 1.0];
const M01: [f64; 3] = [0.5, 0.5, 0.0];
const M12: [f64; 3] = [0.0, 0.5, 0.5];
const M20: [f64; 3] = [0.5, 0.0, 0.5];

/// Barycentric coordinates (in the parent) of the vertices of each child,
/// in the order produced by [`Mesh2D::refine_uniform`].
const CHILDREN: [[[f64; 3]; 3]; 4] = [[B0, M01, M20], [M01, B1, M12], [M20, M12, B2], [M01, M12, M20]];

fn avg(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

fn verify_nesting(coarse: &Mesh2D, fine: &Mesh2D, parents: &[VertexParent]) -> Result<(), FemError> {
    if fine.num_cells() != 4 * coarse.num_cells() || parents.len() != fine.num_vertices() {
        return Err(FemError::NotNested("fine mesh is not a uniform refinement of the coarse mesh".into()));
    }
    let nv = coarse.num_vertices();
    for (c, cell) in coarse.cells().iter().enumerate() {
        let ce = coarse.cell_edges()[c];
        let expected_parent = |b: [f64; 3]| -> VertexParent {
            match b {
                x if x == B0 => VertexParent::Vertex(cell[0]),
                x if x == B1 => VertexParent::Vertex(cell[1]),
                x if x == B2 => VertexParent::Vertex(cell[2]),
                x if x == M01 => VertexParent::EdgeMidpoint(ce[0]),
                x if x == M12 => VertexParent::EdgeMidpoint(ce[1]),
                _ => VertexParent::EdgeMidpoint(ce[2]),
            }
        };
        for (k, child) in CHILDREN.iter().enumerate() {
            let fc = fine.cells()[4 * c + k];
            for (lv, b) in child.iter().enumerate() {
                let fv = fc[lv];
                if parents[fv] != expected_parent(*b) {
                    return Err(FemError::NotNested(format!("fine cell {} is not a child of cell {c}", 4 * c + k)));
                }
                if let VertexParent::Vertex(v) = parents[fv] {
                    if v >= nv {
                        return Err(FemError::NotNested("parent vertex out of range".into()));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Interpolation from the coarse space into the fine space of the same kind.
/// Each fine row holds the coarse basis functions evaluated at the fine node.
pub fn prolongation(
    coarse_mesh: &Mesh2D,
    coarse: &DofMap,
    fine_mesh: &Mesh2D,
    fine: &DofMap,
    parents: &[VertexParent],
) -> Result<SparseMatrix, FemError> {
    if coarse.kind() != fine.kind() {
        return Err(FemError::Mismatch("coarse and fine spaces differ in kind".into()));
    }
    if !coarse.matches(coarse_mesh) || !fine.matches(fine_mesh) {
        return Err(FemError::Mismatch("dof map was built on a different mesh".into()));
    }
    verify_nesting(coarse_mesh, fine_mesh, parents)?;

    let kind = coarse.kind();
    let fine_nv = fine_mesh.num_vertices();
    let mut done = vec![false; fine.num_nodes()];
    let mut t = Vec::new();
    for c in 0..coarse_mesh.num_cells() {
        let cn = coarse.cell_nodes(c);
        for (k, child) in CHILDREN.iter().enumerate() {
            let fc = 4 * c + k;
            let fverts = fine_mesh.cells()[fc];
            let fedges = fine_mesh.cell_edges()[fc];
            let mut nodes: Vec<(usize, [f64; 3])> = (0..3).map(|i| (fverts[i], child[i])).collect();
            if kind != SpaceKind::P1 {
                for i in 0..3 {
                    nodes.push((fine_nv + fedges[i], avg(child[i], child[(i + 1) % 3])));
                }
            }
            for (node, bary) in nodes {
                if done[node] {
                    continue;
                }
                done[node] = true;
                let weights: Vec<f64> = match kind {
                    SpaceKind::P1 => bary.to_vec(),
                    _ => p2_basis_bary(bary).to_vec(),
                };
                for (a, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        t.push((node, cn[a], w));
                    }
                }
            }
        }
    }
    let scalar = SparseMatrix::from_triplets(fine.num_nodes(), coarse.num_nodes(), t);
    Ok(match kind {
        SpaceKind::P2Vec => interleave(&scalar, 2),
        _ => scalar,
    })
}

/// `scalar ⊗ I_nc` with components interleaved.
fn interleave(scalar: &SparseMatrix, nc: usize) -> SparseMatrix {
    let mut t = Vec::with_capacity(scalar.nnz() * nc);
    for i in 0..scalar.nrows() {
        let (cols, vals) = scalar.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            for k in 0..nc {
                t.push((nc * i + k, nc * j + k, w));
            }
        }
    }
    SparseMatrix::from_triplets(scalar.nrows() * nc, scalar.ncols() * nc, t)
}

/// Picks the coarse nodal values out of a fine P2 (vector) coefficient array.
/// Coarse nodes are a subset of the fine nodes when the spaces are nested.
pub fn inject(coarse_mesh: &Mesh2D, coarse: &DofMap, fine_mesh: &Mesh2D, fine: &[f64], parents: &[VertexParent]) -> Vec<f64> {
    let nc = coarse.components();
    let cnv = coarse_mesh.num_vertices();
    let mut map = vec![usize::MAX; coarse.num_nodes()];
    for (fv, p) in parents.iter().enumerate() {
        match *p {
            VertexParent::Vertex(v) => map[v] = fv,
            VertexParent::EdgeMidpoint(e) if coarse.kind() != SpaceKind::P1 => map[cnv + e] = fv,
            _ => {}
        }
    }
    debug_assert!(fine_mesh.num_vertices() == parents.len());
    let mut out = vec![0.0; coarse.num_dofs()];
    for (s, &f) in map.iter().enumerate() {
        for k in 0..nc {
            out[nc * s + k] = fine[nc * f + k];
        }
    }
    out
}
