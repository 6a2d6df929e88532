//! Dense two-phase primal simplex.
//!
//! Small and deterministic rather than fast: the LPs solved here
//! (recovery certificates, weighted basis pursuit) have at most a few
//! hundred rows.  Pivoting is Dantzig's rule with an automatic switch to
//! Bland's rule while the objective stalls, which keeps degenerate
//! instances from cycling; an explicit pivot cap turns pathological cases
//! into a reported error rather than a hang — distinct from `Infeasible`,
//! which is a definite answer.
//!
//! The tableau is refactorized from the original data at regular
//! intervals (and before any optimal/unbounded/infeasible verdict is
//! accepted): the current basis matrix is refactored with an LU
//! decomposition and rows, right-hand side and reduced costs are rebuilt
//! from scratch, so rounding drift from long pivot sequences cannot
//! accumulate into wrong answers.
//!
//! The public problem form allows general bounds: equality constraints
//! `A x = b` with per-variable intervals `[lower_i, upper_i]` where either
//! end may be infinite.  Internally everything is rewritten over
//! nonnegative variables; finite upper bounds become explicit cap rows
//! whose slacks double as crash-basis columns, so phase 1 only needs
//! artificial variables for the original equality rows.

use crate::error::Error;
use crate::{DenseMatrix, DenseVector};

/// Equality-constrained LP with interval bounds on each variable.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients, one per variable.
    pub objective: Vec<f64>,
    /// When true the objective is maximized; reported values keep this sense.
    pub maximize: bool,
    /// Equality constraint matrix, one row per constraint.
    pub constraints: DenseMatrix,
    pub rhs: DenseVector,
    /// Per-variable lower bounds; `f64::NEG_INFINITY` for a free side.
    pub lower: Vec<f64>,
    /// Per-variable upper bounds; `f64::INFINITY` for an uncapped side.
    pub upper: Vec<f64>,
}

/// Definite simplex answers.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: DenseVector, value: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    /// Absolute tolerance for feasibility decisions (phase-1 optimum,
    /// final constraint residuals).
    pub feas_tol: f64,
    /// Entries smaller than this are treated as zero when pivoting.
    pub pivot_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_pivots: 200_000, feas_tol: 1e-8, pivot_tol: 1e-9 }
    }
}

/// Pivots between refactorizations.
const REFACTOR_EVERY: usize = 64;
/// Ratio-test ties prefer pivot elements at least this large.
const STRONG_PIVOT: f64 = 1e-7;
/// Non-improving pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

/// How an original variable maps into the nonnegative standard form.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + y_col`.
    Shifted { col: usize, lo: f64 },
    /// `x = hi - y_col` (used when only the upper bound is finite).
    Negated { col: usize, hi: f64 },
    /// `x = y_pos - y_neg` (free variable).
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// Current `B^-1 A`, dense rows over all columns (artificials included).
    rows: Vec<Vec<f64>>,
    /// Current `B^-1 b`.
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs of the active phase.
    z_row: Vec<f64>,
    /// Active phase costs (full column range).
    cost: Vec<f64>,
    /// Immutable standard form the tableau was started from.
    orig_rows: Vec<Vec<f64>>,
    orig_rhs: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
    /// Bland's rule engaged (anti-cycling mode).
    bland: bool,
    stalled: usize,
    max_pivots: usize,
    pivot_tol: f64,
    feas_tol: f64,
}

enum PivotResult {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn n_cols(&self) -> usize {
        self.z_row.len()
    }

    /// Objective of the current basic solution under the active costs.
    fn objective(&self) -> f64 {
        self.basis.iter().zip(self.rhs.iter()).map(|(&j, &b)| self.cost[j] * b).sum()
    }

    /// Rebuilds rows, rhs and reduced costs from the original data and the
    /// current basis via an LU solve.  Rounding drift accumulated by pivot
    /// updates is discarded.  A numerically singular basis (which a valid
    /// pivot sequence cannot produce exactly, only through drift) leaves
    /// the tableau untouched; the caller's pivot cap still bounds the run.
    fn refactorize(&mut self) {
        self.since_refactor = 0;
        self.refresh_rows();
        self.rebuild_z();
    }

    /// LU part of refactorization; a numerically singular basis leaves the
    /// pivot-maintained rows in place (they are still self-consistent).
    fn refresh_rows(&mut self) {
        let m = self.rows.len();
        let n = self.n_cols();
        if m == 0 {
            return;
        }
        let bmat = DenseMatrix::from_fn(m, m, |r, c| self.orig_rows[r][self.basis[c]]);
        let lu = bmat.lu();
        let amat = DenseMatrix::from_fn(m, n, |r, c| self.orig_rows[r][c]);
        let Some(fresh) = lu.solve(&amat) else {
            return;
        };
        let rhs_vec = DenseVector::from_fn(m, |r, _| self.orig_rhs[r]);
        let Some(fresh_rhs) = lu.solve(&rhs_vec) else {
            return;
        };
        for r in 0..m {
            for j in 0..n {
                self.rows[r][j] = fresh[(r, j)];
            }
            // Degenerate-negative drift is clamped so ratio tests stay sane.
            self.rhs[r] = if fresh_rhs[r] < 0.0 && fresh_rhs[r] > -self.feas_tol {
                0.0
            } else {
                fresh_rhs[r]
            };
        }
        // Basic columns are exactly unit.
        for r in 0..m {
            let bj = self.basis[r];
            for row in self.rows.iter_mut() {
                row[bj] = 0.0;
            }
            self.rows[r][bj] = 1.0;
        }
    }

    /// Reduced costs from the current rows: `z_j = c_j - c_B^T (B^-1 A)_j`.
    fn rebuild_z(&mut self) {
        let n = self.n_cols();
        self.z_row.copy_from_slice(&self.cost);
        for r in 0..self.rows.len() {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..n {
                    self.z_row[j] -= cb * self.rows[r][j];
                }
            }
        }
        for &bj in &self.basis {
            self.z_row[bj] = 0.0;
        }
    }

    /// Installs a phase's costs and rebuilds the tableau around them.
    fn set_costs(&mut self, cost: Vec<f64>) {
        debug_assert_eq!(cost.len(), self.n_cols());
        self.cost = cost;
        self.bland = false;
        self.stalled = 0;
        self.refactorize();
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        let inv = 1.0 / piv;
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        // Clean the pivot column exactly.
        self.rows[r][j] = 1.0;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let pivot_rhs = self.rhs[r];
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
                row[j] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.z_row[j];
        if f != 0.0 {
            for (v, p) in self.z_row.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
            }
            self.z_row[j] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = j;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Entering column among `0..n_allowed`, or `None` at apparent
    /// optimality.  Dantzig's rule normally, Bland's while stalled.
    fn entering(&self, n_allowed: usize) -> Option<usize> {
        if self.bland {
            return (0..n_allowed).find(|&j| self.z_row[j] < -self.pivot_tol);
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n_allowed {
            let z = self.z_row[j];
            if z < -self.pivot_tol && best.map_or(true, |(_, bz)| z < bz) {
                best = Some((j, z));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Leaving row for column `j` by the ratio test, or `None` on an
    /// unbounded ray.  Ties prefer strong pivot elements, then the
    /// smallest basic index (Bland's tie-break).
    fn leaving(&self, j: usize) -> Option<usize> {
        let mut min_ratio = f64::INFINITY;
        for r in 0..self.rows.len() {
            let a = self.rows[r][j];
            if a > self.pivot_tol {
                let ratio = (self.rhs[r] / a).max(0.0);
                if ratio < min_ratio {
                    min_ratio = ratio;
                }
            }
        }
        if min_ratio.is_infinite() {
            return None;
        }
        let near = |ratio: f64| ratio <= min_ratio + 1e-9 * (1.0 + min_ratio);
        let tied = |r: &usize| {
            let a = self.rows[*r][j];
            a > self.pivot_tol && near((self.rhs[*r] / a).max(0.0))
        };
        let strong = (0..self.rows.len())
            .filter(tied)
            .filter(|&r| self.rows[r][j] >= STRONG_PIVOT)
            .min_by_key(|&r| self.basis[r]);
        strong.or_else(|| (0..self.rows.len()).filter(tied).min_by_key(|&r| self.basis[r]))
    }

    /// Pivots until the reduced costs over `0..n_allowed` are nonnegative.
    /// Optimality and unboundedness are only accepted on a freshly
    /// refactorized tableau.
    fn run(&mut self, n_allowed: usize) -> Result<PivotResult, Error> {
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactorize();
            }
            let Some(j) = self.entering(n_allowed) else {
                if self.since_refactor == 0 {
                    return Ok(PivotResult::Optimal);
                }
                self.refactorize();
                continue;
            };
            let Some(r) = self.leaving(j) else {
                if self.since_refactor == 0 {
                    return Ok(PivotResult::Unbounded);
                }
                self.refactorize();
                continue;
            };
            if self.pivots >= self.max_pivots {
                return Err(Error::IterationLimit { pivots: self.pivots });
            }
            let before = self.objective();
            self.pivot(r, j);
            let after = self.objective();
            if before - after > 1e-12 * (1.0 + before.abs()) {
                self.bland = false;
                self.stalled = 0;
            } else {
                self.stalled += 1;
                if self.stalled >= STALL_LIMIT {
                    self.bland = true;
                }
            }
        }
    }
}

/// Solves the LP.  `Optimal` carries a vertex solution in the original
/// variables; its objective value keeps the problem's min/max sense.
pub fn simplex_solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome, Error> {
    let n = lp.objective.len();
    let m = lp.constraints.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("LP has no variables".into()));
    }
    if lp.constraints.ncols() != n || lp.rhs.len() != m || lp.lower.len() != n || lp.upper.len() != n
    {
        return Err(Error::InvalidArgument("LP dimension mismatch".into()));
    }
    if lp
        .objective
        .iter()
        .chain(lp.constraints.iter())
        .chain(lp.rhs.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("LP coefficients".into()));
    }
    for i in 0..n {
        let (lo, hi) = (lp.lower[i], lp.upper[i]);
        if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("bad bounds [{lo}, {hi}] on variable {i}")));
        }
        if lo > hi {
            return Ok(LpOutcome::Infeasible);
        }
    }

    // --- standard-form construction ------------------------------------
    let sense = if lp.maximize { -1.0 } else { 1.0 };
    let mut maps = Vec::with_capacity(n);
    let mut n_std = 0usize;
    let mut caps: Vec<(usize, f64)> = Vec::new(); // (column, cap value)
    for i in 0..n {
        let (lo, hi) = (lp.lower[i], lp.upper[i]);
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col: n_std, lo });
            if hi.is_finite() {
                caps.push((n_std, hi - lo));
            }
            n_std += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Negated { col: n_std, hi });
            n_std += 1;
        } else {
            maps.push(VarMap::Split { pos: n_std, neg: n_std + 1 });
            n_std += 2;
        }
    }
    let n_real = n_std + caps.len();
    let n_rows = m + caps.len();
    let mut rows = vec![vec![0.0; n_real]; n_rows];
    let mut rhs = vec![0.0; n_rows];
    let mut cost = vec![0.0; n_real];
    for r in 0..m {
        rhs[r] = lp.rhs[r];
    }
    for (i, map) in maps.iter().enumerate() {
        let c = sense * lp.objective[i];
        match *map {
            VarMap::Shifted { col, lo } => {
                for r in 0..m {
                    let a = lp.constraints[(r, i)];
                    rows[r][col] = a;
                    rhs[r] -= a * lo;
                }
                cost[col] = c;
            }
            VarMap::Negated { col, hi } => {
                for r in 0..m {
                    let a = lp.constraints[(r, i)];
                    rows[r][col] = -a;
                    rhs[r] -= a * hi;
                }
                cost[col] = -c;
            }
            VarMap::Split { pos, neg } => {
                for r in 0..m {
                    let a = lp.constraints[(r, i)];
                    rows[r][pos] = a;
                    rows[r][neg] = -a;
                }
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }
    for (k, &(col, cap)) in caps.iter().enumerate() {
        let r = m + k;
        rows[r][col] = 1.0;
        rows[r][n_std + k] = 1.0; // cap slack
        rhs[r] = cap;
    }

    // --- phase 1 ---------------------------------------------------------
    for r in 0..n_rows {
        if rhs[r] < 0.0 {
            rhs[r] = -rhs[r];
            for v in rows[r].iter_mut() {
                *v = -*v;
            }
        }
    }
    // Crash basis: columns that are positive singletons (cap slacks and
    // anything structurally similar) take their row; the rest get
    // artificial columns.
    let mut basis_of_row = vec![usize::MAX; n_rows];
    {
        let mut col_count = vec![0usize; n_real];
        let mut col_row = vec![0usize; n_real];
        let mut col_val = vec![0.0f64; n_real];
        for (r, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_count[j] += 1;
                    col_row[j] = r;
                    col_val[j] = v;
                }
            }
        }
        // Ascending scan with overwrite: the highest-index singleton wins,
        // and slack-style columns are appended after structural ones, so a
        // row with both starts from its natural slack.
        for j in 0..n_real {
            if col_count[j] == 1 && col_val[j] > opts.pivot_tol {
                basis_of_row[col_row[j]] = j;
            }
        }
        // A column can only be basic in one row.
        let mut taken = vec![false; n_real];
        for r in 0..n_rows {
            let j = basis_of_row[r];
            if j != usize::MAX {
                if taken[j] {
                    basis_of_row[r] = usize::MAX;
                } else {
                    taken[j] = true;
                }
            }
        }
    }
    let mut n_total = n_real;
    let mut art_cols = Vec::new();
    for r in 0..n_rows {
        if basis_of_row[r] == usize::MAX {
            for (rr, row) in rows.iter_mut().enumerate() {
                row.push(if rr == r { 1.0 } else { 0.0 });
            }
            basis_of_row[r] = n_total;
            art_cols.push(n_total);
            n_total += 1;
        }
    }
    let art_start = n_real;
    let mut phase1_cost = vec![0.0; n_total];
    for &j in &art_cols {
        phase1_cost[j] = 1.0;
    }
    let mut t = Tableau {
        orig_rows: rows.clone(),
        orig_rhs: rhs.clone(),
        rows,
        rhs,
        basis: basis_of_row,
        z_row: vec![0.0; n_total],
        cost: vec![0.0; n_total],
        pivots: 0,
        since_refactor: 0,
        bland: false,
        stalled: 0,
        max_pivots: opts.max_pivots,
        pivot_tol: opts.pivot_tol,
        feas_tol: opts.feas_tol,
    };
    t.set_costs(phase1_cost);
    match t.run(n_total)? {
        PivotResult::Optimal => {}
        PivotResult::Unbounded => {
            return Err(Error::NonFinite("phase-1 objective unbounded".into()));
        }
    }
    let infeasibility: f64 =
        (0..t.rows.len()).filter(|&r| t.basis[r] >= art_start).map(|r| t.rhs[r].max(0.0)).sum();
    if infeasibility > opts.feas_tol {
        return Ok(LpOutcome::Infeasible);
    }
    // Drive leftover artificials out of the basis (degenerate pivots) or
    // drop their rows as redundant.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= art_start {
            let mut pivot_col = None;
            for j in 0..art_start {
                if t.rows[r][j].abs() > STRONG_PIVOT {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => t.pivot(r, j),
                None => {
                    t.rows.swap_remove(r);
                    t.rhs.swap_remove(r);
                    t.basis.swap_remove(r);
                    t.orig_rows.swap_remove(r);
                    t.orig_rhs.swap_remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // --- phase 2 ---------------------------------------------------------
    let mut phase2_cost = vec![0.0; n_total];
    phase2_cost[..n_real].copy_from_slice(&cost);
    t.set_costs(phase2_cost);
    match t.run(art_start)? {
        PivotResult::Optimal => {}
        PivotResult::Unbounded => return Ok(LpOutcome::Unbounded),
    }

    // --- recover the original variables ---------------------------------
    t.refactorize();
    let mut y = vec![0.0; n_real];
    for (r, &bj) in t.basis.iter().enumerate() {
        if bj < n_real {
            y[bj] = t.rhs[r];
        }
    }
    let mut x = DenseVector::zeros(n);
    for (i, map) in maps.iter().enumerate() {
        x[i] = match *map {
            VarMap::Shifted { col, lo } => lo + y[col],
            VarMap::Negated { col, hi } => hi - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        };
    }
    // Safety net: the vertex must actually satisfy the input system.
    let residual = (&lp.constraints * &x - &lp.rhs).amax();
    let scale = lp.rhs.amax().max(1.0);
    if residual > opts.feas_tol * scale * 10.0 {
        return Err(Error::NonFinite(format!("simplex lost feasibility (residual {residual:.3e})")));
    }
    let value = lp.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, value })
}
