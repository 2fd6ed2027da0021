//! Dense small-matrix primitives: Metzler structure, spectral abscissa,
//! symmetric eigendecompositions, Perron pairs, linear solves.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("eigensolver failed to converge within {0} iterations")]
    EigenNonConvergence(usize),
    #[error("matrix is singular to working precision (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
    #[error("matrix must be symmetric within {tol:.1e}; max asymmetry {found:.3e}")]
    NotSymmetric { tol: f64, found: f64 },
    #[error("matrix must be Metzler (all off-diagonal entries >= 0); entry ({i},{j}) = {value}")]
    NotMetzler { i: usize, j: usize, value: f64 },
    #[error("matrix is reducible: positivity of the Perron eigenvectors is not guaranteed")]
    Reducible,
    #[error("power iteration stalled: residual {residual:.3e} after {iters} iterations")]
    PowerIterationStall { residual: f64, iters: usize },
    #[error("matrix has a non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },
}

fn require_square(a: &Matrix) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(())
}

pub fn require_finite(a: &Matrix) -> Result<(), LinalgError> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(LinalgError::NonFinite { i, j });
            }
        }
    }
    Ok(())
}

/// ⌈A⌉: keep the diagonal, take absolute values off the diagonal.
pub fn metzler_majorant(a: &Matrix) -> Result<Matrix, LinalgError> {
    require_square(a)?;
    let mut m = a.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                m[(i, j)] = m[(i, j)].abs();
            }
        }
    }
    Ok(m)
}

/// |A| entrywise.
pub fn abs_entrywise(a: &Matrix) -> Matrix {
    a.map(f64::abs)
}

/// Entrywise (Hadamard) product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::ShapeMismatch(a.nrows(), a.ncols(), b.nrows(), b.ncols()));
    }
    Ok(a.component_mul(b))
}

/// (M + Mᵀ)/2.
pub fn symmetric_part(m: &Matrix) -> Result<Matrix, LinalgError> {
    require_square(m)?;
    Ok((m + m.transpose()) * 0.5)
}

const EIG_MAX_ITER: usize = 10_000;

/// α(A) = max over eigenvalues of the real part, via a real Schur reduction.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64, LinalgError> {
    require_square(a)?;
    require_finite(a)?;
    if a.nrows() == 1 {
        return Ok(a[(0, 0)]);
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(LinalgError::EigenNonConvergence(EIG_MAX_ITER))?;
    let eigs = schur.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Off-diagonal entries all ≥ −tol_struct (default exact zero).
pub fn is_metzler_tol(a: &Matrix, tol_struct: f64) -> Result<bool, LinalgError> {
    require_square(a)?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j && a[(i, j)] < -tol_struct {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn is_metzler(a: &Matrix) -> Result<bool, LinalgError> {
    is_metzler_tol(a, 0.0)
}

/// Strong connectivity of the directed graph on the nonzero off-diagonal
/// pattern: BFS from node 0 on the graph and its reverse.
pub fn is_irreducible(a: &Matrix) -> Result<bool, LinalgError> {
    require_square(a)?;
    let n = a.nrows();
    if n == 1 {
        return Ok(true);
    }
    let reaches_all = |transpose: bool| -> bool {
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let w = if transpose { a[(u, v)] } else { a[(v, u)] };
                if v != u && !seen[v] && w != 0.0 {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    };
    Ok(reaches_all(false) && reaches_all(true))
}

#[derive(Debug, Clone)]
pub struct PerronPair {
    pub lambda: f64,
    /// Right eigenvector, strictly positive, unit ℓ¹ norm.
    pub v_right: Vector,
    /// Left eigenvector, strictly positive, unit ℓ¹ norm.
    pub w_left: Vector,
}

const PERRON_TOL: f64 = 1e-10;
const PERRON_MAX_ITER: usize = 500_000;

fn power_iterate_nonneg(m: &Matrix) -> Result<(f64, Vector), LinalgError> {
    let n = m.nrows();
    let mut v = Vector::from_element(n, 1.0 / n as f64);
    let mut buf = Vector::zeros(n);
    let scale = m.amax().max(1.0);
    let mut lambda = 0.0;
    for iter in 0..PERRON_MAX_ITER {
        buf.gemv(1.0, m, &v, 0.0);
        lambda = buf.sum(); // 1ᵀMv with 1ᵀv = 1
        let norm = buf.lp_norm(1);
        if norm == 0.0 {
            return Err(LinalgError::PowerIterationStall { residual: f64::NAN, iters: iter });
        }
        buf /= norm;
        let residual = (&buf - &v).amax();
        std::mem::swap(&mut v, &mut buf);
        if residual * scale <= PERRON_TOL * 0.01 {
            return Ok((lambda, v));
        }
    }
    // Final residual check against Mv = λv before giving up.
    buf.gemv(1.0, m, &v, 0.0);
    let residual = (&buf - &v * lambda).amax();
    if residual <= PERRON_TOL * scale.max(lambda.abs()) {
        return Ok((lambda, v));
    }
    Err(LinalgError::PowerIterationStall { residual, iters: PERRON_MAX_ITER })
}

/// Perron triple of an irreducible Metzler matrix. Shift by s > max|m_ii| to a
/// nonnegative primitive matrix, run power iteration on it and its transpose,
/// shift the eigenvalue back.
pub fn perron_pair(m: &Matrix) -> Result<PerronPair, LinalgError> {
    require_square(m)?;
    require_finite(m)?;
    if let Some((i, j, value)) = first_negative_offdiag(m) {
        return Err(LinalgError::NotMetzler { i, j, value });
    }
    if !is_irreducible(m)? {
        return Err(LinalgError::Reducible);
    }
    let n = m.nrows();
    let shift = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max) + 1.0;
    let shifted = m + Matrix::identity(n, n) * shift;
    let (lam_v, v) = power_iterate_nonneg(&shifted)?;
    let (lam_w, w) = power_iterate_nonneg(&shifted.transpose())?;
    let lambda = 0.5 * (lam_v + lam_w) - shift;
    // Residuals on the unshifted matrix, against the returned λ.
    let scale = m.amax().max(1.0).max(lambda.abs());
    let res_v = (m * &v - &v * lambda).amax();
    let res_w = (m.transpose() * &w - &w * lambda).amax();
    let residual = res_v.max(res_w);
    if residual > PERRON_TOL * scale {
        return Err(LinalgError::PowerIterationStall { residual, iters: PERRON_MAX_ITER });
    }
    Ok(PerronPair { lambda, v_right: v, w_left: w })
}

const SYM_TOL: f64 = 1e-12;

/// Full spectral decomposition of a symmetric matrix, eigenvalues descending.
/// Returns (eigenvalues, eigenvectors); column k of the matrix pairs with
/// eigenvalue k.
pub fn eig_sym(s: &Matrix) -> Result<(Vector, Matrix), LinalgError> {
    require_square(s)?;
    require_finite(s)?;
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > SYM_TOL * scale {
        return Err(LinalgError::NotSymmetric { tol: SYM_TOL, found: asym });
    }
    let sym = (s + s.transpose()) * 0.5;
    let decomp = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER)
        .ok_or(LinalgError::EigenNonConvergence(EIG_MAX_ITER))?;
    let n = s.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomp.eigenvalues[j].partial_cmp(&decomp.eigenvalues[i]).unwrap());
    let eigenvalues = Vector::from_iterator(n, order.iter().map(|&k| decomp.eigenvalues[k]));
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        eigenvectors.set_column(col, &decomp.eigenvectors.column(k));
    }
    Ok((eigenvalues, eigenvectors))
}

/// ½ λ_max(S + Sᵀ) helper used all over the ℓ² paths.
pub fn lambda_max_sym(s: &Matrix) -> Result<f64, LinalgError> {
    let (vals, _) = eig_sym(&symmetric_part(s)?)?;
    Ok(vals[0])
}

fn first_negative_offdiag(a: &Matrix) -> Option<(usize, usize, f64)> {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j && a[(i, j)] < 0.0 {
                return Some((i, j, a[(i, j)]));
            }
        }
    }
    None
}

/// 1-norm condition estimate ‖A‖₁‖A⁻¹‖₁ (exact inverse; matrices here are tiny).
pub fn cond_estimate(a: &Matrix) -> Option<f64> {
    let inv = a.clone().try_inverse()?;
    let norm1 = |m: &Matrix| {
        (0..m.ncols())
            .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Some(norm1(a) * norm1(&inv))
}

/// LU solve with one step of iterative refinement; residual checked against
/// ‖Ax − b‖∞ ≤ 1e-9 ‖b‖∞ (plus an absolute floor for b ≈ 0).
pub fn solve_linear(a: &Matrix, b: &Vector) -> Result<Vector, LinalgError> {
    require_square(a)?;
    require_finite(a)?;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| LinalgError::Singular { cond: cond_estimate(a).unwrap_or(f64::INFINITY) })?;
    let tol = 1e-9 * b.amax() + 1e-13 * a.amax().max(1.0);
    for _ in 0..2 {
        let r = b - a * &x;
        if r.amax() <= tol {
            return Ok(x);
        }
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    let r = b - a * &x;
    if r.amax() <= tol {
        Ok(x)
    } else {
        Err(LinalgError::Singular { cond: cond_estimate(a).unwrap_or(f64::INFINITY) })
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    require_square(a)?;
    require_finite(a)?;
    a.clone()
        .try_inverse()
        .ok_or_else(|| LinalgError::Singular { cond: f64::INFINITY })
}

/// Principal inverse square root of a symmetric positive definite matrix.
pub fn inv_sqrt_spd(s: &Matrix) -> Result<Matrix, LinalgError> {
    let (vals, vecs) = eig_sym(s)?;
    let n = s.nrows();
    if vals[n - 1] <= 0.0 {
        return Err(LinalgError::Singular { cond: f64::INFINITY });
    }
    let d = Matrix::from_diagonal(&vals.map(|l| 1.0 / l.sqrt()));
    Ok(&vecs * d * vecs.transpose())
}
