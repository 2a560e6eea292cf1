//! ADMM solvers for the coarse-scale and cross-scale-regularized sparse
//! unmixing problems.
//!
//! Both problems share one splitting: a data-fit block U updated through a
//! linear system whose matrix is factored once per solve, and a proximal
//! block V = max(0, soft-threshold(U + D)) carrying the L1 term and the
//! nonnegativity constraint. The system matrix is independent of the pixel
//! column, so its inverse is precomputed and applied to all columns as one
//! matrix product per iteration.

use nalgebra::DMatrix;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{AbundanceMap, SolverParams, SpectralLibrary};

/// Column block width for the per-iteration matrix product. Fixed so results
/// are identical for any worker count.
const COLUMN_CHUNK: usize = 512;

/// Outcome of one ADMM solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub abundances: AbundanceMap,
    pub iterations: usize,
    /// Final relative primal residual.
    pub primal_residual: f64,
    /// Final relative dual residual.
    pub dual_residual: f64,
    /// Objective value at the returned iterate.
    pub objective: f64,
}

impl SolveResult {
    /// True when the solve stopped on the residual test rather than on the
    /// iteration cap.
    pub fn converged(&self, params: &SolverParams) -> bool {
        self.primal_residual.max(self.dual_residual) <= params.tol
    }
}

/// Default augmented-Lagrangian weight: 0.1 * mean(|A^T Y|).
pub fn resolve_mu(lib: &SpectralLibrary, y: &ArrayView2<f64>) -> f64 {
    let aty = lib.data().t().dot(y);
    let mean = aty.iter().map(|v| v.abs()).sum::<f64>() / aty.len() as f64;
    if mean > 0.0 {
        0.1 * mean
    } else {
        0.1
    }
}

/// Solve the coarse-domain problem
/// `min_{X >= 0} 0.5 ||Yc - A Xc||_F^2 + lambda_c ||Xc||_{1,1}`.
pub fn solve_coarse(
    yc: &ArrayView2<f64>,
    lib: &SpectralLibrary,
    lambda_c: f64,
    params: &SolverParams,
) -> Result<SolveResult> {
    admm(yc, lib, lambda_c, 0.0, None, params)
}

/// Solve the original-scale problem
/// `min_{X >= 0} 0.5 ||Y - A X||_F^2 + lambda ||X||_{1,1}
///  + 0.5 beta ||Xd - X||_F^2`.
pub fn solve_regularized(
    y: &ArrayView2<f64>,
    lib: &SpectralLibrary,
    xd: &ArrayView2<f64>,
    lambda: f64,
    beta: f64,
    params: &SolverParams,
) -> Result<SolveResult> {
    if xd.nrows() != lib.count() || xd.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "regularizer is {}x{}, expected {}x{}",
            xd.nrows(),
            xd.ncols(),
            lib.count(),
            y.ncols()
        )));
    }
    admm(y, lib, lambda, beta, Some(xd), params)
}

fn admm(
    y: &ArrayView2<f64>,
    lib: &SpectralLibrary,
    lambda: f64,
    beta: f64,
    xd: Option<&ArrayView2<f64>>,
    params: &SolverParams,
) -> Result<SolveResult> {
    if y.nrows() != lib.bands() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} bands, library has {}",
            y.nrows(),
            lib.bands()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 || !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter(
            "regularization weights must be finite and nonnegative".into(),
        ));
    }
    params.validate()?;

    let a = lib.data();
    let p = lib.count();
    let n = y.ncols();
    let mu = params.mu.unwrap_or_else(|| resolve_mu(lib, y));

    // System matrix (A^T A + (mu + beta) I), inverted once and applied to
    // every column of every iteration as a plain matrix product.
    let mut gram = a.t().dot(&a);
    for i in 0..p {
        gram[[i, i]] += mu + beta;
    }
    let inv = spd_inverse(&gram)?;

    // Constant part of the U-update right-hand side.
    let mut rhs_const = a.t().dot(y);
    if let Some(xd) = xd {
        rhs_const.scaled_add(beta, xd);
    }

    let threshold = lambda / mu;
    let mut u = Array2::<f64>::zeros((p, n));
    let mut v = Array2::<f64>::zeros((p, n));
    let mut d = Array2::<f64>::zeros((p, n));
    let mut rhs = Array2::<f64>::zeros((p, n));

    let mut iterations = 0;
    let mut primal_rel = f64::INFINITY;
    let mut dual_rel = f64::INFINITY;

    for iter in 1..=params.max_iters {
        iterations = iter;

        // U-update: solve (A^T A + (mu+beta) I) U = rhs_const + mu (V - D)
        rhs.assign(&rhs_const);
        azip_add_scaled(&mut rhs, &v, &d, mu);
        apply_inverse(&inv, &rhs.view(), &mut u);

        // V-update: entrywise nonnegative soft threshold of U + D.
        let mut v_change_sq = 0.0;
        let mut v_norm_sq = 0.0;
        ndarray::Zip::from(&mut v).and(&u).and(&d).for_each(|v, &u, &d| {
            let new = (u + d - threshold).max(0.0);
            let delta = new - *v;
            v_change_sq += delta * delta;
            v_norm_sq += new * new;
            *v = new;
        });

        // Scaled dual update and primal residual.
        let mut primal_sq = 0.0;
        let mut u_norm_sq = 0.0;
        ndarray::Zip::from(&mut d).and(&u).and(&v).for_each(|d, &u, &v| {
            let r = u - v;
            primal_sq += r * r;
            u_norm_sq += u * u;
            *d += r;
        });

        let scale = u_norm_sq.max(v_norm_sq).sqrt().max(1e-30);
        primal_rel = primal_sq.sqrt() / scale;
        dual_rel = mu * v_change_sq.sqrt() / scale;
        if primal_rel.max(dual_rel) <= params.tol {
            break;
        }
    }

    let objective = match xd {
        Some(xd) => regularized_objective(y, lib, &v.view(), xd, lambda, beta)?,
        None => coarse_objective(y, lib, &v.view(), lambda)?,
    };
    Ok(SolveResult {
        abundances: AbundanceMap::new(v)?,
        iterations,
        primal_residual: primal_rel,
        dual_residual: dual_rel,
        objective,
    })
}

/// rhs += mu * (v - d), fused.
fn azip_add_scaled(rhs: &mut Array2<f64>, v: &Array2<f64>, d: &Array2<f64>, mu: f64) {
    ndarray::Zip::from(rhs).and(v).and(d).for_each(|r, &v, &d| {
        *r += mu * (v - d);
    });
}

/// Invert a symmetric positive-definite matrix through its Cholesky factor.
fn spd_inverse(gram: &Array2<f64>) -> Result<Array2<f64>> {
    let p = gram.nrows();
    let m = DMatrix::from_fn(p, p, |i, j| gram[[i, j]]);
    let chol = m.cholesky().ok_or_else(|| {
        Error::InvalidParameter("system matrix is not positive definite".into())
    })?;
    let inv = chol.inverse();
    Ok(Array2::from_shape_fn((p, p), |(i, j)| inv[(i, j)]))
}

/// out = inv * rhs, computed over fixed-width column blocks. Block results
/// are independent, so worker count does not change the output.
fn apply_inverse(inv: &Array2<f64>, rhs: &ArrayView2<f64>, out: &mut Array2<f64>) {
    let blocks: Vec<(ArrayView2<f64>, ArrayViewMut2<f64>)> = rhs
        .axis_chunks_iter(Axis(1), COLUMN_CHUNK)
        .zip(out.axis_chunks_iter_mut(Axis(1), COLUMN_CHUNK))
        .collect();
    blocks.into_par_iter().for_each(|(src, mut dst)| {
        general_mat_mul(1.0, inv, &src, 0.0, &mut dst);
    });
}

/// Objective of the coarse problem at iterate `x`.
pub fn coarse_objective(
    y: &ArrayView2<f64>,
    lib: &SpectralLibrary,
    x: &ArrayView2<f64>,
    lambda: f64,
) -> Result<f64> {
    check_objective_shapes(y, lib, x)?;
    let residual = y - &lib.data().dot(x);
    let fit = 0.5 * residual.iter().map(|v| v * v).sum::<f64>();
    let l1 = x.iter().map(|v| v.abs()).sum::<f64>();
    Ok(fit + lambda * l1)
}

/// Objective of the regularized original-scale problem at iterate `x`.
pub fn regularized_objective(
    y: &ArrayView2<f64>,
    lib: &SpectralLibrary,
    x: &ArrayView2<f64>,
    xd: &ArrayView2<f64>,
    lambda: f64,
    beta: f64,
) -> Result<f64> {
    check_objective_shapes(y, lib, x)?;
    if xd.dim() != x.dim() {
        return Err(Error::DimensionMismatch(
            "regularizer shape differs from iterate shape".into(),
        ));
    }
    let base = coarse_objective(y, lib, x, lambda)?;
    let coupling = x
        .iter()
        .zip(xd.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();
    Ok(base + 0.5 * beta * coupling)
}

fn check_objective_shapes(
    y: &ArrayView2<f64>,
    lib: &SpectralLibrary,
    x: &ArrayView2<f64>,
) -> Result<()> {
    if y.nrows() != lib.bands() || x.nrows() != lib.count() || x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "objective shapes: Y {}x{}, A {}x{}, X {}x{}",
            y.nrows(),
            y.ncols(),
            lib.bands(),
            lib.count(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}
