use crate::mesh::{Mesh2D, Point};

/// Which Lagrange space a [`DofMap`] numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    P1,
    P2,
    /// Two-component P2, components interleaved per scalar node.
    P2Vec,
}

impl SpaceKind {
    pub fn components(self) -> usize {
        match self {
            SpaceKind::P2Vec => 2,
            _ => 1,
        }
    }

    /// Scalar nodes per cell.
    pub fn local_nodes(self) -> usize {
        match self {
            SpaceKind::P1 => 3,
            _ => 6,
        }
    }
}

/// Global numbering of a Lagrange space on a mesh.
///
/// Scalar nodes are numbered vertices first, then edges, in mesh order.
/// Local P2 nodes follow the cell's vertices and then its edges
/// `(v0,v1), (v1,v2), (v2,v0)`; vector DoF `2s + c` is component `c` of
/// scalar node `s`.
#[derive(Debug, Clone)]
pub struct DofMap {
    kind: SpaceKind,
    num_cells: usize,
    num_nodes: usize,
    cell_nodes: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D, kind: SpaceKind) -> Self {
        let nv = mesh.num_vertices();
        let per = kind.local_nodes();
        let mut cell_nodes = Vec::with_capacity(per * mesh.num_cells());
        for (cell, ce) in mesh.cells().iter().zip(mesh.cell_edges()) {
            cell_nodes.extend_from_slice(cell);
            if per == 6 {
                cell_nodes.extend(ce.iter().map(|e| nv + e));
            }
        }
        let num_nodes = match kind {
            SpaceKind::P1 => nv,
            _ => nv + mesh.num_edges(),
        };
        Self { kind, num_cells: mesh.num_cells(), num_nodes, cell_nodes }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.components()
    }

    /// Scalar node indices of a cell.
    pub fn cell_nodes(&self, c: usize) -> &[usize] {
        let per = self.kind.local_nodes();
        &self.cell_nodes[per * c..per * (c + 1)]
    }

    /// Global DoF indices of a cell in local order.
    pub fn cell_dofs(&self, c: usize) -> Vec<usize> {
        let nc = self.components();
        self.cell_nodes(c).iter().flat_map(|&s| (0..nc).map(move |k| nc * s + k)).collect()
    }

    pub fn matches(&self, mesh: &Mesh2D) -> bool {
        let expected = match self.kind {
            SpaceKind::P1 => mesh.num_vertices(),
            _ => mesh.num_vertices() + mesh.num_edges(),
        };
        self.num_cells == mesh.num_cells() && self.num_nodes == expected
    }

    pub fn node_coordinates(&self, mesh: &Mesh2D) -> Vec<Point> {
        let mut pts = mesh.vertices().to_vec();
        if self.kind != SpaceKind::P1 {
            pts.extend((0..mesh.num_edges()).map(|e| mesh.edge_midpoint(e)));
        }
        pts
    }

    /// Mask of DoFs whose nodes lie on the mesh boundary.
    pub fn boundary_mask(&self, mesh: &Mesh2D) -> Vec<bool> {
        let nv = mesh.num_vertices();
        let nc = self.components();
        let mut mask = vec![false; self.num_dofs()];
        for s in 0..self.num_nodes {
            let on = if s < nv { mesh.is_boundary_vertex(s) } else { mesh.is_boundary_edge(s - nv) };
            if on {
                for k in 0..nc {
                    mask[nc * s + k] = true;
                }
            }
        }
        mask
    }

    /// Nodal interpolant of `f`, which writes one value per component.
    pub fn interpolate(&self, mesh: &Mesh2D, f: impl Fn(Point, &mut [f64])) -> Vec<f64> {
        let nc = self.components();
        let mut out = vec![0.0; self.num_dofs()];
        for (s, p) in self.node_coordinates(mesh).into_iter().enumerate() {
            f(p, &mut out[nc * s..nc * (s + 1)]);
        }
        out
    }
}

/// Reference basis values and gradients at `(x, y)`.
pub(crate) fn p2_basis(x: f64, y: f64) -> ([f64; 6], [[f64; 2]; 6]) {
    let l = [1.0 - x - y, x, y];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut n = [0.0; 6];
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        n[i] = l[i] * (2.0 * l[i] - 1.0);
        for d in 0..2 {
            g[i][d] = (4.0 * l[i] - 1.0) * dl[i][d];
        }
    }
    for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        n[3 + k] = 4.0 * l[a] * l[b];
        for d in 0..2 {
            g[3 + k][d] = 4.0 * (l[a] * dl[b][d] + l[b] * dl[a][d]);
        }
    }
    (n, g)
}

/// P2 basis values from barycentric coordinates, exact for dyadic inputs.
pub(crate) fn p2_basis_bary(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub(crate) fn p1_basis(x: f64, y: f64) -> ([f64; 3], [[f64; 2]; 3]) {
    ([1.0 - x - y, x, y], [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
}

/// Affine geometry of one cell.
pub(crate) struct CellGeometry {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    /// Inverse transpose of the Jacobian, maps reference to physical gradients.
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh2D, c: usize) -> Self {
        let [a, b, d] = mesh.cells()[c].map(|v| mesh.vertices()[v]);
        let jac = [[b[0] - a[0], d[0] - a[0]], [b[1] - a[1], d[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { origin: a, jac, inv_t, det }
    }

    pub fn map(&self, x: f64, y: f64) -> Point {
        [
            self.origin[0] + self.jac[0][0] * x + self.jac[0][1] * y,
            self.origin[1] + self.jac[1][0] * x + self.jac[1][1] * y,
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}
