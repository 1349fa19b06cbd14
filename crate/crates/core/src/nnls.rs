//! Non-negative least squares by the active-set method.
//!
//! Solves `min ||A x - f||` subject to `x >= 0` (Lawson-Hanson). Columns move
//! between the active set (pinned at zero) and the passive set (free); the
//! passive-set least-squares subproblem is maintained through an orthogonal
//! factorization updated in place: a Householder reflection triangularizes
//! each entering column, Givens rotations restore triangularity when a
//! column leaves. A normal-equations mode re-solves each subproblem from
//! scratch and is kept for cross-checks and speed comparisons.
//!
//! Determinism: for fixed inputs the solver performs the identical sequence
//! of floating-point operations on every run and platform, so results are
//! bitwise reproducible. Ties in the entering-index selection go to the
//! lowest index, and an index that just left the passive set may not
//! re-enter for one outer iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the passive-set least-squares subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LsSolver {
    /// Incrementally updated Householder factorization (default).
    #[serde(rename = "orthogonal-factorization")]
    OrthogonalFactorization,
    /// Cholesky on the normal equations, re-solved per support change.
    #[serde(rename = "normal-equations")]
    NormalEquations,
}

/// Solver options.
///
/// `kkt_tolerance = None` resolves to `1e-10 * ||A^T f||_inf`;
/// `max_outer_iterations = None` resolves to three times the column count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnlsOptions {
    pub kkt_tolerance: Option<f64>,
    pub max_outer_iterations: Option<usize>,
    pub ls_solver: LsSolver,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            kkt_tolerance: None,
            max_outer_iterations: None,
            ls_solver: LsSolver::OrthogonalFactorization,
        }
    }
}

impl NnlsOptions {
    fn validate(&self) -> Result<()> {
        if let Some(t) = self.kkt_tolerance {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Usage(format!("kkt_tolerance must be positive, got {t}")));
            }
        }
        if let Some(0) = self.max_outer_iterations {
            return Err(Error::Usage("max_outer_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solution record.
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsResult {
    /// Non-negative solution vector.
    pub phi: Vec<f64>,
    /// `||A phi - f||`, recomputed from the original data.
    pub residual_norm: f64,
    /// Sorted indices pinned at zero.
    pub active_set: Vec<usize>,
    /// Outer iterations used (columns admitted to the passive set).
    pub iterations: usize,
    /// Whether the KKT conditions hold at the resolved tolerance.
    pub converged: bool,
}

/// One line of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub support_size: usize,
    pub residual_norm: f64,
}

/// Line-oriented rendering of a trace record.
pub fn format_trace_line(rec: &TraceRecord) -> String {
    format!(
        "iter={} support={} residual={:e}",
        rec.iteration, rec.support_size, rec.residual_norm
    )
}

/// KKT verification report, see [`kkt_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub feasible: bool,
    /// Largest gradient component over the zero set (0 when empty).
    pub max_positive_gradient: f64,
    /// Largest absolute gradient component over the support (0 when empty).
    pub max_complementarity_violation: f64,
}

// ---------------------------------------------------------------------------
// Small deterministic kernels. Fixed accumulation order on every platform.
// ---------------------------------------------------------------------------

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let a8 = a.chunks_exact(8);
    let b8 = b.chunks_exact(8);
    let (ra, rb) = (a8.remainder(), b8.remainder());
    for (x, y) in a8.zip(b8) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(t: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += t * xi;
    }
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Plane rotation that zeroes `b`: returns `(c, s, r)` with
/// `c*a + s*b = r`, `-s*a + c*b = 0`.
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if a.abs() > b.abs() {
        let t = b / a;
        let u = (1.0 + t * t).sqrt();
        let c = (1.0 / u).copysign(a);
        (c, c * t, a.abs() * u)
    } else if b != 0.0 {
        let t = a / b;
        let u = (1.0 + t * t).sqrt();
        let s = (1.0 / u).copysign(b);
        (s * t, s, b.abs() * u)
    } else {
        (1.0, 0.0, 0.0)
    }
}

/// Residual `f - A x` in the original coordinates.
fn residual_vector(a: &DMatrix<f64>, f: &[f64], x: &[f64]) -> Vec<f64> {
    let m = a.nrows();
    let mut r = f.to_vec();
    let data = a.as_slice();
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            axpy(-xj, &data[j * m..(j + 1) * m], &mut r);
        }
    }
    r
}

/// Gradient `A^T (f - A x)` in the original coordinates.
fn gradient(a: &DMatrix<f64>, f: &[f64], x: &[f64]) -> Vec<f64> {
    let m = a.nrows();
    let r = residual_vector(a, f, x);
    let data = a.as_slice();
    (0..a.ncols()).map(|j| dot(&data[j * m..(j + 1) * m], &r)).collect()
}

fn check_finite_inputs(a: &DMatrix<f64>, f: &[f64]) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Usage("matrix must have at least one row and one column".into()));
    }
    if f.len() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} rows but the data vector has {} entries",
            a.nrows(),
            f.len()
        )));
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData("system matrix".into()));
    }
    if !f.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData("data vector".into()));
    }
    Ok(())
}

fn resolved_tolerance(a: &DMatrix<f64>, f: &[f64], opts: &NnlsOptions) -> f64 {
    match opts.kkt_tolerance {
        Some(t) => t,
        None => {
            let m = a.nrows();
            let data = a.as_slice();
            let atf_inf = (0..a.ncols())
                .map(|j| dot(&data[j * m..(j + 1) * m], f).abs())
                .fold(0.0, f64::max);
            1e-10 * atf_inf
        }
    }
}

/// Evaluates the first-order optimality conditions at `phi`.
///
/// With `w = A^T (f - A phi)`: feasible iff `phi >= -tol` elementwise,
/// `w_j <= tol` wherever `phi_j = 0` (taken as `phi_j <= 0`), and
/// `|w_j| <= tol` wherever `phi_j > 0`.
pub fn kkt_check(a: &DMatrix<f64>, f: &[f64], phi: &[f64], tol: f64) -> Result<KktReport> {
    if f.len() != a.nrows() || phi.len() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{}, data has {} entries, solution has {} entries",
            a.nrows(),
            a.ncols(),
            f.len(),
            phi.len()
        )));
    }
    let w = gradient(a, f, phi);
    let mut max_pos = 0.0f64;
    let mut max_comp = 0.0f64;
    for (j, &p) in phi.iter().enumerate() {
        if p > 0.0 {
            max_comp = max_comp.max(w[j].abs());
        } else {
            max_pos = max_pos.max(w[j]);
        }
    }
    let feasible =
        phi.iter().all(|&p| p >= -tol) && max_pos <= tol && max_comp <= tol;
    Ok(KktReport { feasible, max_positive_gradient: max_pos, max_complementarity_violation: max_comp })
}

/// Solves `min ||A phi - f||` subject to `phi >= 0`.
pub fn nnls_solve(a: &DMatrix<f64>, f: &[f64], opts: &NnlsOptions) -> Result<NnlsResult> {
    nnls_solve_traced(a, f, opts, &mut |_| {})
}

/// [`nnls_solve`] with an iteration-trace hook, called once per outer
/// iteration with the support size and residual norm after that iteration.
pub fn nnls_solve_traced(
    a: &DMatrix<f64>,
    f: &[f64],
    opts: &NnlsOptions,
    trace: &mut dyn FnMut(&TraceRecord),
) -> Result<NnlsResult> {
    check_finite_inputs(a, f)?;
    opts.validate()?;
    let tol = resolved_tolerance(a, f, opts);
    let max_iter = opts.max_outer_iterations.unwrap_or(3 * a.ncols()).max(1);

    let (x, iterations, budget_exhausted) = match opts.ls_solver {
        LsSolver::OrthogonalFactorization => {
            let mut state = Householder::new(a, f);
            state.run(a, f, tol, max_iter, trace)
        }
        LsSolver::NormalEquations => normal_equations_run(a, f, tol, max_iter, trace),
    };

    let residual_norm = norm2(&residual_vector(a, f, &x));
    let report = kkt_check(a, f, &x, tol)?;
    let active_set = x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(NnlsResult {
        phi: x,
        residual_norm,
        active_set,
        iterations,
        converged: report.feasible && !budget_exhausted,
    })
}

// ---------------------------------------------------------------------------
// Orthogonal-factorization path
// ---------------------------------------------------------------------------

struct Householder {
    m: usize,
    n: usize,
    /// Working matrix, transformed in place by the accumulated reflections.
    w: DMatrix<f64>,
    /// Working right-hand side under the same transformations.
    bw: Vec<f64>,
    /// Passive indices in triangular order.
    passive: Vec<usize>,
    is_passive: Vec<bool>,
    x: Vec<f64>,
    /// Outer iteration at which a removed index becomes selectable again.
    ban_iter: Vec<usize>,
    scratch_col: Vec<f64>,
    scratch_rhs: Vec<f64>,
    /// Transformed-space duals, maintained incrementally: a reflection is
    /// orthogonal on the tail rows, so admitting a column only shaves the
    /// new pivot-row product off each free column's dual.
    duals: Vec<f64>,
    duals_valid: bool,
}

enum Selection {
    Entered,
    None,
}

impl Householder {
    fn new(a: &DMatrix<f64>, f: &[f64]) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        Householder {
            m,
            n,
            w: a.clone(),
            bw: f.to_vec(),
            passive: Vec::new(),
            is_passive: vec![false; n],
            x: vec![0.0; n],
            ban_iter: vec![0; n],
            scratch_col: vec![0.0; m],
            scratch_rhs: vec![0.0; m],
            duals: vec![0.0; n],
            duals_valid: false,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.w.as_slice()[j * self.m..(j + 1) * self.m]
    }

    /// Transformed-space dual of a free column: tail of the column against
    /// the tail of the working right-hand side.
    fn dual_transformed(&self, j: usize) -> f64 {
        let p = self.passive.len();
        dot(&self.col(j)[p..], &self.bw[p..])
    }

    /// Picks the entering column by largest dual (ties to the lowest index)
    /// among free, unbanned, still-eligible columns; runs the Householder
    /// trial and rejects dependent or non-improving candidates in place.
    /// `duals[j]` must hold the selection dual for every eligible `j`.
    fn select_and_enter(
        &mut self,
        tol: f64,
        eligible: &mut [bool],
        duals: &[f64],
    ) -> Selection {
        loop {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if !eligible[j] {
                    continue;
                }
                let w = duals[j];
                if w > tol && best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((j, w));
                }
            }
            let Some((j, _)) = best else {
                return Selection::None;
            };
            if self.try_enter(j) {
                return Selection::Entered;
            }
            eligible[j] = false;
        }
    }

    /// Attempts to admit column `j`: builds the Householder reflection on a
    /// scratch copy, rejects near-dependent columns and non-positive trial
    /// values, and commits the transformation on success.
    fn try_enter(&mut self, j: usize) -> bool {
        let p = self.passive.len();
        let m = self.m;
        if p == m {
            return false;
        }
        self.scratch_col.clear();
        self.scratch_col
            .extend_from_slice(&self.w.as_slice()[j * m + p..(j + 1) * m]);

        let tail_norm = norm2(&self.scratch_col);
        if tail_norm == 0.0 {
            return false;
        }
        let pivot = self.scratch_col[0];
        let alpha = if pivot > 0.0 { -tail_norm } else { tail_norm };
        let up = pivot - alpha;
        self.scratch_col[0] = alpha;

        // Dependence guard from the reference active-set implementation:
        // the new diagonal must be detectable against the triangular part.
        let upper_norm = norm2(&self.w.as_slice()[j * m..j * m + p]);
        if upper_norm + alpha.abs() * 0.01 == upper_norm {
            return false;
        }

        // Trial right-hand side.
        self.scratch_rhs.clear();
        self.scratch_rhs.extend_from_slice(&self.bw[p..]);
        apply_reflection(&self.scratch_col, up, &mut self.scratch_rhs);
        let ztest = self.scratch_rhs[0] / alpha;
        if !(ztest > 0.0) {
            return false;
        }

        // Commit: rhs, every other free column, then column j itself.
        self.bw[p..].copy_from_slice(&self.scratch_rhs);
        let bw_pivot = self.bw[p];
        let data = self.w.as_mut_slice();
        for c in 0..self.n {
            if c == j || self.is_passive[c] {
                continue;
            }
            let col = &mut data[c * m + p..(c + 1) * m];
            apply_reflection(&self.scratch_col, up, col);
            // The reflection is orthogonal on rows p.., so the dual over
            // rows p+1.. is the old dual minus the new pivot-row product.
            self.duals[c] -= col[0] * bw_pivot;
        }
        let cj = &mut data[j * m + p..(j + 1) * m];
        cj[0] = alpha;
        for v in cj[1..].iter_mut() {
            *v = 0.0;
        }
        self.passive.push(j);
        self.is_passive[j] = true;
        true
    }

    /// Back substitution on the passive triangle; column-oriented so the
    /// accesses stay contiguous in the column-major working matrix.
    fn solve_triangular(&self) -> Vec<f64> {
        let p = self.passive.len();
        let mut z = self.bw[..p].to_vec();
        for l in (0..p).rev() {
            let j = self.passive[l];
            let col = &self.col(j)[..l + 1];
            z[l] /= col[l];
            let zl = z[l];
            for (zi, ci) in z[..l].iter_mut().zip(&col[..l]) {
                *zi -= ci * zl;
            }
        }
        z
    }

    /// Removes the passive column at triangular position `k`, restoring the
    /// triangle with a cascade of plane rotations. Rotation coefficients are
    /// derived walking the trailing passive columns; the cascade is then
    /// applied to each remaining column in one contiguous pass, updating the
    /// maintained duals from the freshly exposed tail row.
    fn remove_passive(&mut self, k: usize, iter: usize) {
        let removed = self.passive.remove(k);
        self.is_passive[removed] = false;
        self.ban_iter[removed] = iter + 1;
        self.x[removed] = 0.0;
        let m = self.m;
        let p_new = self.passive.len();

        // Pass 1: trailing passive columns define the rotations. The column
        // at new position l feels rotations k..l before its own pair
        // (l, l+1) is zeroed.
        let mut rotations: Vec<(f64, f64)> = Vec::with_capacity(p_new.saturating_sub(k));
        for l in k..p_new {
            let j = self.passive[l];
            let data = self.w.as_mut_slice();
            let col = &mut data[j * m..(j + 1) * m];
            for (ri, &(c, s)) in rotations.iter().enumerate() {
                let r = k + ri;
                let v1 = col[r];
                let v2 = col[r + 1];
                col[r] = c * v1 + s * v2;
                col[r + 1] = -s * v1 + c * v2;
            }
            let (c, s, rr) = givens(col[l], col[l + 1]);
            col[l] = rr;
            col[l + 1] = 0.0;
            rotations.push((c, s));
        }

        // Right-hand side before the per-column dual updates need its new
        // tail-row value.
        for (ri, &(c, s)) in rotations.iter().enumerate() {
            let r = k + ri;
            let v1 = self.bw[r];
            let v2 = self.bw[r + 1];
            self.bw[r] = c * v1 + s * v2;
            self.bw[r + 1] = -s * v1 + c * v2;
        }
        let bw_tail = self.bw[p_new];

        // Pass 2: free columns (including the one just removed) receive the
        // cascade; the tail gains row p_new, which the duals absorb.
        let data = self.w.as_mut_slice();
        for cidx in 0..self.n {
            if self.is_passive[cidx] {
                continue;
            }
            let col = &mut data[cidx * m..(cidx + 1) * m];
            for (ri, &(c, s)) in rotations.iter().enumerate() {
                let r = k + ri;
                let v1 = col[r];
                let v2 = col[r + 1];
                col[r] = c * v1 + s * v2;
                col[r + 1] = -s * v1 + c * v2;
            }
            if self.duals_valid {
                if cidx == removed {
                    // A formerly passive column is zero beyond row p_new.
                    self.duals[cidx] = col[p_new] * bw_tail;
                } else {
                    self.duals[cidx] += col[p_new] * bw_tail;
                }
            }
        }
    }

    /// Inner loop: drive the passive coefficients to the least-squares
    /// solution, expelling any that would go non-positive.
    fn feasibility_loop(&mut self, iter: usize) {
        loop {
            let z = self.solve_triangular();
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in self.passive.iter().enumerate() {
                    self.x[j] = z[k];
                }
                return;
            }
            // Interpolate toward z until the first coefficient hits zero.
            let mut step = f64::INFINITY;
            let mut hit = 0usize;
            for (k, &zk) in z.iter().enumerate() {
                if zk <= 0.0 {
                    let xk = self.x[self.passive[k]];
                    let denom = xk - zk;
                    let t = if denom > 0.0 { xk / denom } else { 0.0 };
                    if t < step {
                        step = t;
                        hit = k;
                    }
                }
            }
            let step = step.clamp(0.0, 1.0);
            for (k, &zk) in z.iter().enumerate() {
                let j = self.passive[k];
                self.x[j] += step * (zk - self.x[j]);
            }
            self.x[self.passive[hit]] = 0.0;
            self.remove_passive(hit, iter);
            // Round-off can leave further non-positive coefficients.
            while let Some(k) = (0..self.passive.len()).find(|&k| self.x[self.passive[k]] <= 0.0) {
                self.x[self.passive[k]] = 0.0;
                self.remove_passive(k, iter);
            }
        }
    }

    fn run(
        &mut self,
        a: &DMatrix<f64>,
        f: &[f64],
        tol: f64,
        max_iter: usize,
        trace: &mut dyn FnMut(&TraceRecord),
    ) -> (Vec<f64>, usize, bool) {
        let mut iter = 0usize;
        loop {
            if iter >= max_iter {
                return (self.x.clone(), iter, true);
            }
            // Selection duals in the transformed space, then a verification
            // pass against the original data before accepting termination.
            if !self.duals_valid {
                for j in 0..self.n {
                    if !self.is_passive[j] {
                        self.duals[j] = self.dual_transformed(j);
                    }
                }
                self.duals_valid = true;
            }
            let duals = self.duals.clone();
            let mut eligible: Vec<bool> = (0..self.n)
                .map(|j| !self.is_passive[j] && self.ban_iter[j] != iter + 1)
                .collect();
            let mut selection = self.select_and_enter(tol, &mut eligible, &duals);
            if matches!(selection, Selection::None) {
                // Banned columns become selectable when nothing else is.
                let mut eligible: Vec<bool> = (0..self.n).map(|j| !self.is_passive[j]).collect();
                selection = self.select_and_enter(tol, &mut eligible, &duals);
            }
            if matches!(selection, Selection::None) {
                // Transformed duals say optimal; confirm against the
                // original system and keep iterating if round-off in the
                // accumulated transformations hid a violation.
                let w = gradient(a, f, &self.x);
                let mut eligible: Vec<bool> = (0..self.n).map(|j| !self.is_passive[j]).collect();
                selection = self.select_and_enter(tol, &mut eligible, &w);
                if matches!(selection, Selection::None) {
                    return (self.x.clone(), iter, false);
                }
            }
            iter += 1;
            self.feasibility_loop(iter);
            let p = self.passive.len();
            trace(&TraceRecord {
                iteration: iter,
                support_size: p,
                residual_norm: norm2(&self.bw[p..]),
            });
        }
    }
}

/// Applies the reflection defined by `(col, up)` to `target`, whose first
/// element sits on the pivot row. `col[0]` holds the post-reflection
/// diagonal, `col[1..]` the reflection vector tail.
fn apply_reflection(col: &[f64], up: f64, target: &mut [f64]) {
    let b = up * col[0];
    if b >= 0.0 {
        return;
    }
    let sm = target[0] * up + dot(&target[1..], &col[1..]);
    if sm != 0.0 {
        let t = sm / b;
        target[0] += t * up;
        axpy(t, &col[1..], &mut target[1..]);
    }
}

// ---------------------------------------------------------------------------
// Normal-equations path
// ---------------------------------------------------------------------------

fn normal_equations_run(
    a: &DMatrix<f64>,
    f: &[f64],
    tol: f64,
    max_iter: usize,
    trace: &mut dyn FnMut(&TraceRecord),
) -> (Vec<f64>, usize, bool) {
    let n = a.ncols();
    let fv = DVector::from_column_slice(f);
    let gram = a.transpose() * a;
    let atf = a.transpose() * &fv;

    let mut passive: Vec<usize> = Vec::new();
    let mut is_passive = vec![false; n];
    let mut ban_iter = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut iter = 0usize;

    let solve_subproblem = |passive: &[usize]| -> Option<Vec<f64>> {
        let k = passive.len();
        let sub = DMatrix::from_fn(k, k, |r, c| gram[(passive[r], passive[c])]);
        let rhs = DVector::from_fn(k, |r, _| atf[passive[r]]);
        let chol = sub.cholesky()?;
        Some(chol.solve(&rhs).as_slice().to_vec())
    };

    loop {
        if iter >= max_iter {
            return (x, iter, true);
        }
        let w = gradient(a, f, &x);
        let mut entering = None;
        for pass in 0..2 {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if is_passive[j] || (pass == 0 && ban_iter[j] == iter + 1) {
                    continue;
                }
                if w[j] > tol && best.is_none_or(|(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
            }
            if let Some((j, _)) = best {
                entering = Some(j);
                break;
            }
        }
        let Some(entering) = entering else {
            return (x, iter, false);
        };
        iter += 1;
        passive.push(entering);
        is_passive[entering] = true;

        loop {
            let Some(z) = solve_subproblem(&passive) else {
                // Dependent column: expel the most recent entry.
                let j = passive.pop().expect("non-empty passive set");
                is_passive[j] = false;
                ban_iter[j] = iter + 1;
                x[j] = 0.0;
                break;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in passive.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut step = f64::INFINITY;
            let mut hit = 0usize;
            for (k, &zk) in z.iter().enumerate() {
                if zk <= 0.0 {
                    let xk = x[passive[k]];
                    let denom = xk - zk;
                    let t = if denom > 0.0 { xk / denom } else { 0.0 };
                    if t < step {
                        step = t;
                        hit = k;
                    }
                }
            }
            let step = step.clamp(0.0, 1.0);
            for (k, &zk) in z.iter().enumerate() {
                let j = passive[k];
                x[j] += step * (zk - x[j]);
            }
            x[passive[hit]] = 0.0;
            let removed = passive.remove(hit);
            is_passive[removed] = false;
            ban_iter[removed] = iter + 1;
            while let Some(k) = (0..passive.len()).find(|&k| x[passive[k]] <= 0.0) {
                let j = passive.remove(k);
                x[j] = 0.0;
                is_passive[j] = false;
                ban_iter[j] = iter + 1;
            }
        }

        trace(&TraceRecord {
            iteration: iter,
            support_size: passive.len(),
            residual_norm: norm2(&residual_vector(a, f, &x)),
        });
    }
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

/// Enumeration bound for [`brute_force_nnls`].
pub const BRUTE_FORCE_MAX_COLUMNS: usize = 12;

/// Exhaustive reference solver: enumerates every support set, solves the
/// unconstrained least-squares problem restricted to it, keeps candidates
/// with non-negative support values (preferring those whose off-support
/// gradients are non-positive), and returns the global objective minimizer.
/// Ties break toward smaller supports, then lexicographic support order.
///
/// Independent of the active-set path: subproblems are solved by singular
/// value decomposition.
pub fn brute_force_nnls(a: &DMatrix<f64>, f: &[f64]) -> Result<Vec<f64>> {
    check_finite_inputs(a, f)?;
    let n = a.ncols();
    if n > BRUTE_FORCE_MAX_COLUMNS {
        return Err(Error::Capacity(format!(
            "exhaustive solver supports at most {BRUTE_FORCE_MAX_COLUMNS} columns, got {n}"
        )));
    }
    let fv = DVector::from_column_slice(f);
    let grad_slack = {
        let atf = a.transpose() * &fv;
        1e-8 * (1.0 + atf.amax())
    };
    let feas_slack = 1e-11;

    struct Candidate {
        x: Vec<f64>,
        objective: f64,
        kkt_ok: bool,
        support: Vec<usize>,
    }
    let mut best: Option<Candidate> = None;
    let obj_tie = 1e-12 * (1.0 + dot(f, f));

    for mask in 0u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let mut x = vec![0.0; n];
        if !support.is_empty() {
            let sub = a.select_columns(support.iter());
            let svd = sub.clone().svd(true, true);
            let smax = svd.singular_values.amax();
            let Ok(sol) = svd.solve(&fv, 1e-12 * smax.max(f64::MIN_POSITIVE)) else {
                continue;
            };
            let scale = sol.amax().max(1.0);
            if sol.iter().any(|&v| v < -feas_slack * scale) {
                continue;
            }
            for (k, &j) in support.iter().enumerate() {
                x[j] = sol[k].max(0.0);
            }
        }
        let r = residual_vector(a, f, &x);
        let objective = dot(&r, &r);
        let data = a.as_slice();
        let m = a.nrows();
        let kkt_ok = (0..n)
            .filter(|j| mask & (1 << j) == 0)
            .all(|j| dot(&data[j * m..(j + 1) * m], &r) <= grad_slack);
        let cand = Candidate { x, objective, kkt_ok, support };
        best = Some(match best {
            None => cand,
            Some(current) => {
                if cand.objective < current.objective - obj_tie {
                    cand
                } else if cand.objective > current.objective + obj_tie {
                    current
                } else if (cand.kkt_ok, current.kkt_ok) == (true, false) {
                    cand
                } else if (cand.kkt_ok, current.kkt_ok) == (false, true) {
                    current
                } else if cand.support.len() < current.support.len()
                    || (cand.support.len() == current.support.len()
                        && cand.support < current.support)
                {
                    cand
                } else {
                    current
                }
            }
        });
    }
    Ok(best.expect("empty support always evaluated").x)
}
