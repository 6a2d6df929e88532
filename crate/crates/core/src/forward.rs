//! The boundary-data forward model and its truncated SVD.
//!
//! For a state mesh with operator `L = K + eps*M` and a source mesh nested
//! in it (interpolation `R`), the forward matrix maps nodal source values to
//! weighted boundary traces of the state:
//!
//! ```text
//! A = sqrt(M_boundary) * [rows of L^{-1} M R at the boundary nodes]
//! ```
//!
//! so that `|A x|_2` approximates the boundary L2 norm of the trace.  The
//! model keeps `A` exactly as assembled together with a rank-`k` truncated
//! SVD `A ~ U_k S_k V_k^T`.  Everything downstream — the pseudoinverse data
//! `q = pinv(A) b`, the projection `P = V_k V_k^T` onto the visible source
//! subspace, and the penalty weights `w_i = |P e_i|_2` — is derived from
//! the factors, never from `A` itself.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::fem::{self, TriMesh};
use crate::{DenseMatrix, DenseVector};

/// Relative cutoff under which trailing singular values are treated as zero
/// and the truncation rank is reduced.
pub const RANK_CUTOFF_REL: f64 = 1e-12;

/// Default threshold below which a penalty weight is flagged as nearly
/// invisible to the boundary data.
pub const WEIGHT_WARN_THRESHOLD: f64 = 1e-3;

/// Mesh pair and shift a model was built from.  Absent for models built
/// directly from a raw matrix.
#[derive(Debug, Clone)]
pub struct MeshContext {
    pub epsilon: f64,
    pub state_mesh: TriMesh,
    pub source_mesh: TriMesh,
}

/// Forward matrix with truncated SVD factors and penalty weights.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    /// Exact forward matrix, `m x n`.
    pub a: DenseMatrix,
    /// Left singular vectors, `m x k`.
    pub u: DenseMatrix,
    /// Leading singular values, descending, length `k`.
    pub sigma: DenseVector,
    /// Right singular vectors, `n x k`.
    pub v: DenseMatrix,
    /// Penalty weights `w_i = |P e_i|_2`, length `n`.
    pub weights: DenseVector,
    /// Build provenance, when the model came from meshes.
    pub context: Option<MeshContext>,
}

/// Smallest penalty weight, its index, and whether it fell below the
/// warning threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinWeightReport {
    pub min_weight: f64,
    pub index: usize,
    pub flagged: bool,
}

impl ForwardModel {
    /// Truncation rank actually in use (may be below the requested rank if
    /// the matrix was numerically rank-deficient).
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Builds a model from a raw matrix: computes the SVD, truncates it to
    /// `svd_rank` (or to the numerical rank, whichever is smaller) and
    /// derives the weights.  No mesh context is attached.
    pub fn from_matrix(a: DenseMatrix, svd_rank: usize) -> Result<Self, Error> {
        let (m, n) = (a.nrows(), a.ncols());
        let p = m.min(n);
        if svd_rank == 0 || svd_rank > p {
            return Err(Error::InvalidArgument(format!(
                "svd rank {svd_rank} outside 1..={p} for a {m}x{n} matrix"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward matrix".into()));
        }
        let svd = a.clone().svd(true, true);
        let u_full = svd.u.expect("svd with u requested");
        let v_t = svd.v_t.expect("svd with v_t requested");
        // Order singular triplets by descending singular value; nalgebra
        // does not guarantee an order.
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let sigma_max = svd.singular_values[order[0]];
        let numerical_rank = order
            .iter()
            .filter(|&&i| svd.singular_values[i] > RANK_CUTOFF_REL * sigma_max)
            .count();
        let k = svd_rank.min(numerical_rank.max(1));
        let mut u = DenseMatrix::zeros(m, k);
        let mut v = DenseMatrix::zeros(n, k);
        let mut sigma = DenseVector::zeros(k);
        for (col, &src) in order.iter().take(k).enumerate() {
            u.set_column(col, &u_full.column(src));
            v.set_column(col, &v_t.row(src).transpose());
            sigma[col] = svd.singular_values[src];
        }
        let weights = DenseVector::from_fn(n, |i, _| v.row(i).norm());
        Ok(ForwardModel { a, u, sigma, v, weights, context: None })
    }

    /// Applies the truncated pseudoinverse: `V_k S_k^{-1} U_k^T b`.
    pub fn apply_pinv(&self, b: &DenseVector) -> DenseVector {
        assert_eq!(b.len(), self.m(), "data length != boundary node count");
        let mut t = self.u.tr_mul(b);
        for i in 0..t.len() {
            t[i] /= self.sigma[i];
        }
        &self.v * t
    }

    /// Applies the projection `P = V_k V_k^T` onto the visible subspace.
    pub fn apply_projection(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(x.len(), self.n(), "vector length != source node count");
        &self.v * self.v.tr_mul(x)
    }

    /// Column `P e_i` of the projection.
    pub fn projection_column(&self, i: usize) -> DenseVector {
        assert!(i < self.n());
        &self.v * self.v.row(i).transpose()
    }

    /// Index attaining `max_i |[W^{-1} P e_j]_i|`.
    ///
    /// For an exact pseudoinverse this is `j` itself: the minimum-norm
    /// preimage of data generated by a unit source at `j`, after weighting,
    /// peaks at `j`.  On truncated models the property is diagnostic and
    /// not guaranteed; ties resolve to the smallest index.
    pub fn max_property_index(&self, j: usize) -> usize {
        let y = self.projection_column(j);
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..self.n() {
            let w = self.weights[i].max(1e-300);
            let val = y[i].abs() / w;
            if val > best_val {
                best_val = val;
                best = i;
            }
        }
        best
    }

    /// Smallest penalty weight and whether it is below `threshold`.
    pub fn min_weight_report(&self, threshold: f64) -> MinWeightReport {
        let mut index = 0usize;
        let mut min_weight = f64::INFINITY;
        for i in 0..self.weights.len() {
            if self.weights[i] < min_weight {
                min_weight = self.weights[i];
                index = i;
            }
        }
        MinWeightReport { min_weight, index, flagged: min_weight < threshold }
    }

    /// Serializes the model to a little-endian binary cache file.
    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        let k = self.rank();
        for dim in [self.m() as u64, self.n() as u64, k as u64] {
            w.write_all(&dim.to_le_bytes())?;
        }
        match &self.context {
            Some(ctx) => {
                w.write_all(&[1u8])?;
                w.write_all(&ctx.epsilon.to_le_bytes())?;
                w.write_all(&(ctx.state_mesh.nodes_per_side() as u64).to_le_bytes())?;
                w.write_all(&(ctx.source_mesh.nodes_per_side() as u64).to_le_bytes())?;
            }
            None => w.write_all(&[0u8])?,
        }
        for m in [&self.a, &self.u, &self.v] {
            write_f64s(&mut w, m.as_slice())?;
        }
        write_f64s(&mut w, self.sigma.as_slice())?;
        write_f64s(&mut w, self.weights.as_slice())?;
        w.flush()?;
        Ok(())
    }

    /// Reads a model written by [`ForwardModel::save`].  The mesh context
    /// is rebuilt from the stored grid sizes.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != *MAGIC {
            return Err(Error::Format(format!(
                "not a forward-model cache (bad magic {:02x?})",
                magic
            )));
        }
        let m = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let k = read_u64(&mut r)? as usize;
        if k == 0 || k > m.min(n) || m == 0 || n == 0 {
            return Err(Error::Format(format!("inconsistent cache dims m={m} n={n} k={k}")));
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let context = if flag[0] == 1 {
            let epsilon = read_f64(&mut r)?;
            let state = read_u64(&mut r)? as usize;
            let source = read_u64(&mut r)? as usize;
            Some(MeshContext {
                epsilon,
                state_mesh: fem::build_mesh(state)?,
                source_mesh: fem::build_mesh(source)?,
            })
        } else {
            None
        };
        let a = DenseMatrix::from_column_slice(m, n, &read_f64s(&mut r, m * n)?);
        let u = DenseMatrix::from_column_slice(m, k, &read_f64s(&mut r, m * k)?);
        let v = DenseMatrix::from_column_slice(n, k, &read_f64s(&mut r, n * k)?);
        let sigma = DenseVector::from_vec(read_f64s(&mut r, k)?);
        let weights = DenseVector::from_vec(read_f64s(&mut r, n)?);
        if let Some(ctx) = &context {
            if ctx.state_mesh.n_boundary() != m || ctx.source_mesh.n_nodes() != n {
                return Err(Error::Format("cache dims disagree with stored meshes".into()));
            }
        }
        Ok(ForwardModel { a, u, sigma, v, weights, context })
    }
}

/// Cache file magic: name + format version.
const MAGIC: &[u8; 8] = b"SRCFWD\x001";

fn write_f64s<W: Write>(w: &mut W, vals: &[f64]) -> Result<(), Error> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, Error> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64, Error> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>, Error> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Assembles the forward matrix for the given mesh pair and shift and wraps
/// it in a model with a rank-`svd_rank` truncated SVD.
///
/// The source mesh must equal the state mesh or be nested in it
/// (`state = 2*source - 1` nodes per side).  The state operator is
/// factored once (banded LU with partial pivoting) and applied to all
/// source columns; assembly order is fixed, so rebuilding from the same
/// inputs reproduces `A` bitwise.
pub fn build_forward(
    state_mesh: &TriMesh,
    source_mesh: &TriMesh,
    epsilon: f64,
    svd_rank: usize,
) -> Result<ForwardModel, Error> {
    if !epsilon.is_finite() {
        return Err(Error::InvalidArgument("epsilon must be finite".into()));
    }
    let r = fem::prolongation(source_mesh, state_mesh)?;
    let lu = fem::operator_band(state_mesh, epsilon)?.lu()?;
    let mass = fem::mass_band(state_mesh)?;
    // Load matrix B = M R, one column per coarse source node.
    let nf = state_mesh.n_nodes();
    let nc = source_mesh.n_nodes();
    let mut load = DenseMatrix::zeros(nf, nc);
    let mut col = DenseVector::zeros(nf);
    for j in 0..nc {
        col.copy_from(&r.column(j));
        load.set_column(j, &mass.mul_vec(&col));
    }
    let states = lu.solve_mat(&load);
    let bweights = fem::boundary_weights(state_mesh);
    let bnodes = state_mesh.boundary_nodes();
    let mut a = DenseMatrix::zeros(bnodes.len(), nc);
    for (row, &node) in bnodes.iter().enumerate() {
        let scale = bweights[row].sqrt();
        for j in 0..nc {
            a[(row, j)] = scale * states[(node, j)];
        }
    }
    let mut model = ForwardModel::from_matrix(a, svd_rank)?;
    model.context = Some(MeshContext {
        epsilon,
        state_mesh: state_mesh.clone(),
        source_mesh: source_mesh.clone(),
    });
    Ok(model)
}

/// Column `i` of the Tikhonov-regularized projection
/// `(A^T A + gamma I)^{-1} A^T A`, an alternative to the truncated-SVD
/// projection for cross-checking weights.
pub fn tikhonov_projection_column(
    a: &DenseMatrix,
    i: usize,
    gamma: f64,
) -> Result<DenseVector, Error> {
    let n = a.ncols();
    if i >= n {
        return Err(Error::InvalidArgument(format!("column {i} out of range {n}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let mut ata = a.tr_mul(a);
    let rhs = ata.column(i).into_owned();
    for d in 0..n {
        ata[(d, d)] += gamma;
    }
    let chol = ata
        .cholesky()
        .ok_or(Error::SingularOperator { condition_estimate: f64::INFINITY })?;
    Ok(chol.solve(&rhs))
}
