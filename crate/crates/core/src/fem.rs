//! Piecewise-linear finite elements on a uniform triangulation of the unit
//! square.
//!
//! Every mesh is the same deterministic object: `nodes_per_side` equally
//! spaced nodes per axis in row-major order (x fastest, y outer), each grid
//! cell split into two triangles along the lower-left to upper-right
//! diagonal.  The matrices assembled here feed the forward map
//! `x -> sqrt(M_boundary) * trace(L_eps^{-1} M R x)` built in
//! [`crate::forward`].

use crate::error::Error;
use crate::linalg::{symmetry_error, max_abs, BandMatrix, SYMMETRY_TOL};
use crate::{DenseMatrix, DenseVector};

/// Conforming triangulation of the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes_per_side: usize,
    node_coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    cell_diameter: f64,
}

impl TriMesh {
    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    /// Total node count, `nodes_per_side^2`.
    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary node indices in ascending order.  This ordering fixes the
    /// row order of every boundary-restricted vector and matrix.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_nodes.len()
    }

    /// Largest element diameter (the cell diagonal `h * sqrt(2)`).
    pub fn cell_diameter(&self) -> f64 {
        self.cell_diameter
    }

    /// Grid spacing between adjacent nodes.
    pub fn h(&self) -> f64 {
        1.0 / (self.nodes_per_side - 1) as f64
    }

    /// Row-major node index of grid position `(col, row)`.
    pub fn node_index(&self, col: usize, row: usize) -> usize {
        row * self.nodes_per_side + col
    }
}

/// Builds the uniform triangulation with `nodes_per_side >= 2` nodes per axis.
pub fn build_mesh(nodes_per_side: usize) -> Result<TriMesh, Error> {
    if nodes_per_side < 2 {
        return Err(Error::InvalidArgument(format!(
            "mesh needs at least 2 nodes per side, got {nodes_per_side}"
        )));
    }
    let n = nodes_per_side;
    let h = 1.0 / (n - 1) as f64;
    let mut node_coords = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            node_coords.push([col as f64 * h, row as f64 * h]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for row in 0..n - 1 {
        for col in 0..n - 1 {
            let ll = row * n + col;
            let lr = ll + 1;
            let ul = ll + n;
            let ur = ul + 1;
            // Split along the lower-left to upper-right diagonal; both
            // triangles are counter-clockwise.
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }
    let mut boundary_nodes = Vec::with_capacity(4 * (n - 1));
    for (idx, c) in node_coords.iter().enumerate() {
        if c[0] == 0.0 || c[0] == 1.0 || c[1] == 0.0 || c[1] == 1.0 {
            boundary_nodes.push(idx);
        }
    }
    Ok(TriMesh {
        nodes_per_side: n,
        node_coords,
        triangles,
        boundary_nodes,
        cell_diameter: h * 2.0_f64.sqrt(),
    })
}

fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Element triplet stream for the stiffness matrix `int grad(phi_i).grad(phi_j)`.
fn stiffness_triplets(mesh: &TriMesh) -> Vec<(usize, usize, f64)> {
    let mut trips = Vec::with_capacity(9 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let p = [mesh.node_coords[tri[0]], mesh.node_coords[tri[1]], mesh.node_coords[tri[2]]];
        let area = triangle_area(p[0], p[1], p[2]);
        // Gradients of the barycentric hats: grad(phi_i) = (b_i, c_i) / (2A).
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        for i in 0..3 {
            for j in 0..3 {
                trips.push((tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
            }
        }
    }
    trips
}

/// Element triplet stream for the mass matrix, local block `(A/12)*[[2,1,1],[1,2,1],[1,1,2]]`.
fn mass_triplets(mesh: &TriMesh) -> Vec<(usize, usize, f64)> {
    let mut trips = Vec::with_capacity(9 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let p = [mesh.node_coords[tri[0]], mesh.node_coords[tri[1]], mesh.node_coords[tri[2]]];
        let area = triangle_area(p[0], p[1], p[2]);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 };
                trips.push((tri[i], tri[j], w * area / 12.0));
            }
        }
    }
    trips
}

fn scatter_dense(n: usize, trips: &[(usize, usize, f64)]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for &(i, j, v) in trips {
        m[(i, j)] += v;
    }
    m
}

fn check_symmetric(m: &DenseMatrix, what: &str) -> Result<(), Error> {
    let scale = max_abs(m).max(1.0);
    if symmetry_error(m) > SYMMETRY_TOL * scale {
        return Err(Error::NonFinite(format!("{what} assembly lost symmetry")));
    }
    Ok(())
}

/// Dense stiffness matrix `K`, `n_nodes x n_nodes`.  Rows sum to zero
/// (constants are in the kernel of the Neumann Laplacian).
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<DenseMatrix, Error> {
    let k = scatter_dense(mesh.n_nodes(), &stiffness_triplets(mesh));
    check_symmetric(&k, "stiffness")?;
    Ok(k)
}

/// Dense (consistent) mass matrix `M`, `n_nodes x n_nodes`.
pub fn assemble_mass(mesh: &TriMesh) -> Result<DenseMatrix, Error> {
    let m = scatter_dense(mesh.n_nodes(), &mass_triplets(mesh));
    check_symmetric(&m, "mass")?;
    Ok(m)
}

/// Lumped boundary-mass weights, one per boundary node, in the order of
/// [`TriMesh::boundary_nodes`].  Node weight = half the total length of its
/// incident boundary edges; the weights sum to the perimeter 4.
pub fn boundary_weights(mesh: &TriMesh) -> DenseVector {
    let n = mesh.nodes_per_side;
    let h = mesh.h();
    let mut per_node = vec![0.0_f64; mesh.n_nodes()];
    // Walk the four sides edge by edge, adding half of each edge length to
    // both endpoints.
    let mut add_edge = |a: usize, b: usize| {
        per_node[a] += 0.5 * h;
        per_node[b] += 0.5 * h;
    };
    for col in 0..n - 1 {
        add_edge(col, col + 1); // bottom, y = 0
        add_edge((n - 1) * n + col, (n - 1) * n + col + 1); // top, y = 1
    }
    for row in 0..n - 1 {
        add_edge(row * n, (row + 1) * n); // left, x = 0
        add_edge(row * n + (n - 1), (row + 1) * n + (n - 1)); // right, x = 1
    }
    DenseVector::from_iterator(
        mesh.n_boundary(),
        mesh.boundary_nodes.iter().map(|&i| per_node[i]),
    )
}

/// Diagonal lumped boundary-mass matrix restricted to the boundary nodes
/// (`m x m` with `m = 4*(nodes_per_side-1)`).
pub fn assemble_boundary_mass(mesh: &TriMesh) -> DenseMatrix {
    DenseMatrix::from_diagonal(&boundary_weights(mesh))
}

/// Nodal interpolation (prolongation) from a coarse mesh onto a nested fine
/// mesh with `fine = 2*coarse - 1` nodes per side.  Rows sum to 1 and the
/// entries are 0, 1/2 or 1.  The identity is returned for equal meshes.
pub fn prolongation(coarse: &TriMesh, fine: &TriMesh) -> Result<DenseMatrix, Error> {
    let nc = coarse.nodes_per_side;
    let nf = fine.nodes_per_side;
    if nf == nc {
        return Ok(DenseMatrix::identity(coarse.n_nodes(), coarse.n_nodes()));
    }
    if nf != 2 * nc - 1 {
        return Err(Error::NonNestedMeshes { coarse: nc, fine: nf });
    }
    let mut r = DenseMatrix::zeros(fine.n_nodes(), coarse.n_nodes());
    let cidx = |col: usize, row: usize| row * nc + col;
    for row in 0..nf {
        for col in 0..nf {
            let f = row * nf + col;
            match (col % 2, row % 2) {
                // Coincides with a coarse node.
                (0, 0) => r[(f, cidx(col / 2, row / 2))] = 1.0,
                // Midpoint of a horizontal coarse edge.
                (1, 0) => {
                    r[(f, cidx(col / 2, row / 2))] = 0.5;
                    r[(f, cidx(col / 2 + 1, row / 2))] = 0.5;
                }
                // Midpoint of a vertical coarse edge.
                (0, 1) => {
                    r[(f, cidx(col / 2, row / 2))] = 0.5;
                    r[(f, cidx(col / 2, row / 2 + 1))] = 0.5;
                }
                // Cell center: lies on the coarse cell's split diagonal, so
                // it interpolates the diagonal's endpoints.
                _ => {
                    r[(f, cidx(col / 2, row / 2))] = 0.5;
                    r[(f, cidx(col / 2 + 1, row / 2 + 1))] = 0.5;
                }
            }
        }
    }
    Ok(r)
}

/// Bandwidth of the assembled operators: node `(i,j)` couples at most to
/// `(i+1, j+1)`, an index offset of `nodes_per_side + 1`.
pub(crate) fn operator_bandwidth(mesh: &TriMesh) -> usize {
    mesh.nodes_per_side + 1
}

/// `K + eps*M` in band storage, for fast factorization on large grids.
pub(crate) fn operator_band(mesh: &TriMesh, epsilon: f64) -> Result<BandMatrix, Error> {
    let bw = operator_bandwidth(mesh);
    let mut trips = stiffness_triplets(mesh);
    for (i, j, v) in mass_triplets(mesh) {
        trips.push((i, j, epsilon * v));
    }
    BandMatrix::from_triplets(mesh.n_nodes(), bw, bw, &trips)
}

/// Consistent mass matrix in band storage.
pub(crate) fn mass_band(mesh: &TriMesh) -> Result<BandMatrix, Error> {
    let bw = operator_bandwidth(mesh);
    BandMatrix::from_triplets(mesh.n_nodes(), bw, bw, &mass_triplets(mesh))
}
