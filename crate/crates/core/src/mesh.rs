//! Structured crossed-triangle meshes of the unit square and their uniform
//! refinement hierarchies.
//!
//! A crossed grid splits every quadrilateral of an `n x n` grid into four
//! triangles through an added center vertex. Refinement is red (4-way) with
//! edge-midpoint insertion, so coarse vertices keep their indices and
//! coordinates on every finer level and the midpoint of coarse edge `e`
//! becomes fine vertex `V_coarse + e`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex index {index} out of range (mesh has {count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

pub type Point = [f64; 2];

/// Immutable 2D triangle mesh with derived edge connectivity.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Local edge `k` of a cell joins local vertices `k` and `(k + 1) % 3`.
    cell_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    vertex_cells: Vec<Vec<usize>>,
}

/// Where a fine vertex comes from in its parent mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexParent {
    Vertex(usize),
    EdgeMidpoint(usize),
}

/// Cells, vertices and edges in the closure of the star of a vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarClosure {
    pub cells: Vec<usize>,
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Mesh2D {
    /// Builds a mesh from vertices and counterclockwise cells, deriving the
    /// edge list, boundary flags and vertex-to-cell adjacency.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (c, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return Err(MeshError::InvalidMesh(format!("cell {c} references a missing vertex")));
            }
            if signed_area(&vertices, cell) <= 0.0 {
                return Err(MeshError::InvalidMesh(format!("cell {c} is not counterclockwise")));
            }
        }

        let mut pairs: Vec<[usize; 2]> = cells
            .iter()
            .flat_map(|c| (0..3).map(move |k| canonical(c[k], c[(k + 1) % 3])))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let edges = pairs;
        let index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut incidence = vec![0u8; edges.len()];
        let cell_edges: Vec<[usize; 3]> = cells
            .iter()
            .map(|c| {
                let mut ce = [0; 3];
                for k in 0..3 {
                    let e = index[&canonical(c[k], c[(k + 1) % 3])];
                    incidence[e] += 1;
                    ce[k] = e;
                }
                ce
            })
            .collect();
        if let Some(e) = incidence.iter().position(|&n| n > 2) {
            return Err(MeshError::InvalidMesh(format!("edge {e} shared by more than two cells")));
        }

        let boundary_edge: Vec<bool> = incidence.iter().map(|&n| n == 1).collect();
        let mut boundary_vertex = vec![false; nv];
        for (e, &b) in boundary_edge.iter().enumerate() {
            if b {
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
        }
        let mut vertex_cells = vec![Vec::new(); nv];
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                vertex_cells[v].push(c);
            }
        }

        Ok(Self { vertices, cells, edges, cell_edges, boundary_vertex, boundary_edge, vertex_cells })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn cells_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        midpoint(self.vertices[a], self.vertices[b])
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        signed_area(&self.vertices, &self.cells[c])
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&canonical(a, b)).ok()
    }

    pub fn vertex_star_closure(&self, v: usize) -> Result<StarClosure, MeshError> {
        if v >= self.num_vertices() {
            return Err(MeshError::VertexOutOfRange { index: v, count: self.num_vertices() });
        }
        let cells = self.vertex_cells[v].clone();
        let mut vertices: Vec<usize> = cells.iter().flat_map(|&c| self.cells[c]).collect();
        let mut edges: Vec<usize> = cells.iter().flat_map(|&c| self.cell_edges[c]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        edges.sort_unstable();
        edges.dedup();
        Ok(StarClosure { cells, vertices, edges })
    }

    /// Red refinement: every triangle is split into four by its edge
    /// midpoints. Children of coarse cell `c` are fine cells `4c..4c+4`,
    /// ordered as (corner 0, corner 1, corner 2, interior).
    pub fn refine_uniform(&self) -> (Mesh2D, Vec<VertexParent>) {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend((0..self.num_edges()).map(|e| self.edge_midpoint(e)));
        let mut parents: Vec<VertexParent> = (0..nv).map(VertexParent::Vertex).collect();
        parents.extend((0..self.num_edges()).map(VertexParent::EdgeMidpoint));

        let mut cells = Vec::with_capacity(4 * self.num_cells());
        for (cell, ce) in self.cells.iter().zip(&self.cell_edges) {
            let [v0, v1, v2] = *cell;
            let m01 = nv + ce[0];
            let m12 = nv + ce[1];
            let m20 = nv + ce[2];
            cells.push([v0, m01, m20]);
            cells.push([m01, v1, m12]);
            cells.push([m20, m12, v2]);
            cells.push([m01, m12, m20]);
        }
        let fine = Mesh2D::from_cells(vertices, cells).expect("refinement of a valid mesh is valid");
        (fine, parents)
    }

    /// Plain-text dump: header `V E C`, then vertex coordinates, edge pairs
    /// and cell triples, one entity per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.num_vertices(), self.num_edges(), self.num_cells());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        for e in &self.edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        s
    }
}

fn canonical(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn signed_area(vertices: &[Point], cell: &[usize; 3]) -> f64 {
    let [a, b, c] = cell.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// `n x n` quadrilaterals of the unit square, each cut into 4 triangles
/// through its center. Grid points come first (y-major), then centers.
pub fn build_crossed_grid(n: usize) -> Result<Mesh2D, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameter("cells per side must be positive".into()));
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    for j in 0..n {
        for i in 0..n {
            vertices.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
        }
    }
    let grid = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            let m = (n + 1) * (n + 1) + j * n + i;
            cells.push([a, b, m]);
            cells.push([b, c, m]);
            cells.push([c, d, m]);
            cells.push([d, a, m]);
        }
    }
    Mesh2D::from_cells(vertices, cells)
}

/// Nested meshes from coarsest (`levels[0]`) to finest.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<Mesh2D>,
    /// `parentage[k]` maps vertices of `levels[k + 1]` into `levels[k]`.
    parentage: Vec<Vec<VertexParent>>,
}

impl MeshHierarchy {
    pub fn new(coarse: Mesh2D, refinements: usize) -> Self {
        let mut levels = vec![coarse];
        let mut parentage = Vec::with_capacity(refinements);
        for _ in 0..refinements {
            let (fine, parents) = levels.last().unwrap().refine_uniform();
            levels.push(fine);
            parentage.push(parents);
        }
        Self { levels, parentage }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &Mesh2D {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Mesh2D] {
        &self.levels
    }

    pub fn finest(&self) -> &Mesh2D {
        self.levels.last().unwrap()
    }

    /// Parentage of level `k + 1` relative to level `k`.
    pub fn parentage(&self, k: usize) -> &[VertexParent] {
        &self.parentage[k]
    }
}

pub fn build_hierarchy(n0: usize, refinements: usize) -> Result<MeshHierarchy, MeshError> {
    Ok(MeshHierarchy::new(build_crossed_grid(n0)?, refinements))
}
