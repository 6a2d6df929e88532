//! Synthetic boundary data: exact forward application, seeded Gaussian
//! noise, and two-grid restriction for crime-free runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::experiments::source::{rasterize_source, SourceSpec};
use crate::fem::{self, TriMesh};
use crate::DenseVector;

/// Absolute Gaussian noise scale and the generator seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub tau: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec { tau: 0.0, seed: 0 }
    }
}

/// Applies the forward map without assembling the full matrix: solves the
/// state equation for the single load induced by `x` and samples the
/// weighted boundary trace.  Agrees with multiplying by the assembled
/// forward matrix to rounding error.
pub fn apply_forward_exact(
    state_mesh: &TriMesh,
    source_mesh: &TriMesh,
    epsilon: f64,
    x: &DenseVector,
) -> Result<DenseVector, Error> {
    if !epsilon.is_finite() {
        return Err(Error::InvalidArgument("epsilon must be finite".into()));
    }
    if x.len() != source_mesh.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "source vector length {} != node count {}",
            x.len(),
            source_mesh.n_nodes()
        )));
    }
    let r = fem::prolongation(source_mesh, state_mesh)?;
    let lu = fem::operator_band(state_mesh, epsilon)?.lu()?;
    let mass = fem::mass_band(state_mesh)?;
    let state = lu.solve_vec(&mass.mul_vec(&(&r * x)));
    let bweights = fem::boundary_weights(state_mesh);
    let bnodes = state_mesh.boundary_nodes();
    let mut b = DenseVector::zeros(bnodes.len());
    for (row, &node) in bnodes.iter().enumerate() {
        b[row] = bweights[row].sqrt() * state[node];
    }
    Ok(b)
}

/// Adds `tau * rho` with `rho` i.i.d. standard normal from a seeded
/// generator.  `tau = 0` returns the input unchanged (the generator is not
/// consulted).
pub fn add_gaussian_noise(b: &DenseVector, noise: &NoiseSpec) -> Result<DenseVector, Error> {
    if !(noise.tau >= 0.0) || !noise.tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise scale must be finite and >= 0, got {}",
            noise.tau
        )));
    }
    if noise.tau == 0.0 {
        return Ok(b.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = StandardNormal;
    let mut noisy = b.clone();
    for i in 0..noisy.len() {
        let rho: f64 = normal.sample(&mut rng);
        noisy[i] += noise.tau * rho;
    }
    Ok(noisy)
}

/// Boundary data for the given source on the (fine) data meshes:
/// `b = A x* + tau rho`.
pub fn generate_data(
    spec: &SourceSpec,
    state_mesh: &TriMesh,
    source_mesh: &TriMesh,
    epsilon: f64,
    noise: &NoiseSpec,
) -> Result<DenseVector, Error> {
    let x = rasterize_source(spec, source_mesh)?;
    let clean = apply_forward_exact(state_mesh, source_mesh, epsilon, &x)?;
    add_gaussian_noise(&clean, noise)
}

/// Absolute noise scale reproducing the requested relative level:
/// `tau = level * (max b - min b)` over the clean data.
pub fn noise_tau_for_level(clean: &DenseVector, level: f64) -> Result<f64, Error> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise level must be finite and >= 0, got {level}"
        )));
    }
    if clean.is_empty() {
        return Err(Error::InvalidArgument("empty data vector".into()));
    }
    let max = clean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = clean.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(level * (max - min))
}

/// Restricts weighted boundary data from a fine mesh to a coarse mesh
/// nested in it by sampling the shared nodes.
///
/// Entries carry a `sqrt(weight)` factor, so the sampled value is rescaled
/// by `sqrt(w_coarse / w_fine)` to stay a weighted trace at the coarse
/// level.  With uniform boundary weights `h` this factor is `sqrt(2)`
/// everywhere.
pub fn restrict_boundary_data(
    fine_mesh: &TriMesh,
    coarse_mesh: &TriMesh,
    b_fine: &DenseVector,
) -> Result<DenseVector, Error> {
    let nf = fine_mesh.nodes_per_side();
    let nc = coarse_mesh.nodes_per_side();
    if nf != 2 * nc - 1 {
        return Err(Error::NonNestedMeshes { coarse: nc, fine: nf });
    }
    if b_fine.len() != fine_mesh.n_boundary() {
        return Err(Error::InvalidArgument(format!(
            "data length {} != fine boundary node count {}",
            b_fine.len(),
            fine_mesh.n_boundary()
        )));
    }
    let wf = fem::boundary_weights(fine_mesh);
    let wc = fem::boundary_weights(coarse_mesh);
    // Row index of each fine boundary node for O(1) lookups.
    let mut fine_row = vec![usize::MAX; fine_mesh.n_nodes()];
    for (row, &node) in fine_mesh.boundary_nodes().iter().enumerate() {
        fine_row[node] = row;
    }
    let coords_to_grid = |node: usize, mesh: &TriMesh| {
        let n = mesh.nodes_per_side();
        (node % n, node / n)
    };
    let mut b = DenseVector::zeros(coarse_mesh.n_boundary());
    for (row, &node) in coarse_mesh.boundary_nodes().iter().enumerate() {
        let (col, rw) = coords_to_grid(node, coarse_mesh);
        let fine_node = fine_mesh.node_index(2 * col, 2 * rw);
        let frow = fine_row[fine_node];
        debug_assert_ne!(frow, usize::MAX, "nested image of a boundary node is interior");
        b[row] = (wc[row] / wf[frow]).sqrt() * b_fine[frow];
    }
    Ok(b)
}
