//! Weighted ℓᵖ norms, the weak pairings ⟦x,y⟧ of Table 1, and the log norms
//! μ_p they induce, together with conic (nonnegative-orthant) variants and
//! slow-but-independent oracles (limit definition, sphere sampling, Lumer
//! candidate enumeration).
//!
//! Conventions: sign(0) = 0; a weight R acts by change of variables, so the
//! weighted pairing is ⟦Rx, Ry⟧_p and μ_{p,R}(A) = μ_p(RAR⁻¹).

use crate::linalg::{self, LinalgError, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PairingError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("p must lie in [1, inf], got {0}")]
    InvalidP(f64),
    #[error("exact log norm requires p in {{1, 2, inf}}; got p = {p}, use log_norm_sampled for a lower bound")]
    ApproximateOnly { p: f64 },
    #[error("conic mode requires p in {{1, inf}}, got p = {p}")]
    UnsupportedConicP { p: f64 },
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample times must be strictly increasing")]
    NonIncreasingTimes,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

const DEFAULT_COND_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
struct Weight {
    r: Matrix,
    r_inv: Matrix,
    diagonal: bool,
}

/// A weighted ℓᵖ norm ‖x‖_{p,R} = ‖Rx‖_p with 1 ≤ p ≤ ∞ and optional
/// invertible weight R (inverse cached at construction).
#[derive(Debug, Clone)]
pub struct NormSpec {
    p: f64,
    weight: Option<Weight>,
}

impl NormSpec {
    pub fn new(p: f64) -> Result<Self, PairingError> {
        if !(p >= 1.0) {
            return Err(PairingError::InvalidP(p));
        }
        Ok(NormSpec { p, weight: None })
    }

    pub fn l1() -> Self {
        NormSpec { p: 1.0, weight: None }
    }

    pub fn l2() -> Self {
        NormSpec { p: 2.0, weight: None }
    }

    pub fn linf() -> Self {
        NormSpec { p: f64::INFINITY, weight: None }
    }

    pub fn with_weight(p: f64, r: Matrix) -> Result<Self, PairingError> {
        Self::with_weight_capped(p, r, DEFAULT_COND_CAP)
    }

    pub fn with_weight_capped(p: f64, r: Matrix, cond_cap: f64) -> Result<Self, PairingError> {
        if !(p >= 1.0) {
            return Err(PairingError::InvalidP(p));
        }
        if r.nrows() != r.ncols() {
            return Err(PairingError::InvalidWeight(format!(
                "weight must be square, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let r_inv = r
            .clone()
            .try_inverse()
            .ok_or_else(|| PairingError::InvalidWeight("weight is singular".into()))?;
        let cond = linalg::cond_estimate(&r).unwrap_or(f64::INFINITY);
        if cond > cond_cap {
            return Err(PairingError::InvalidWeight(format!(
                "weight condition estimate {cond:.3e} exceeds cap {cond_cap:.3e}"
            )));
        }
        let n = r.nrows();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || r[(i, j)] == 0.0))
            && (0..n).all(|i| r[(i, i)] > 0.0);
        Ok(NormSpec { p, weight: Some(Weight { r, r_inv, diagonal }) })
    }

    pub fn with_diagonal_weight(p: f64, d: &Vector) -> Result<Self, PairingError> {
        if let Some(bad) = d.iter().find(|&&x| !(x > 0.0)) {
            return Err(PairingError::InvalidWeight(format!(
                "diagonal weight entries must be positive, found {bad}"
            )));
        }
        Self::with_weight(p, Matrix::from_diagonal(d))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_weighted(&self) -> bool {
        self.weight.is_some()
    }

    pub fn diagonal_weight(&self) -> bool {
        self.weight.as_ref().map_or(false, |w| w.diagonal)
    }

    pub fn weight_matrix(&self) -> Option<&Matrix> {
        self.weight.as_ref().map(|w| &w.r)
    }

    pub fn weight_inverse(&self) -> Option<&Matrix> {
        self.weight.as_ref().map(|w| &w.r_inv)
    }

    /// Same weight, different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self, PairingError> {
        if !(p >= 1.0) {
            return Err(PairingError::InvalidP(p));
        }
        Ok(NormSpec { p, weight: self.weight.clone() })
    }

    /// x ↦ Rx.
    pub fn transform(&self, x: &Vector) -> Result<Vector, PairingError> {
        match &self.weight {
            None => Ok(x.clone()),
            Some(w) => {
                if w.r.ncols() != x.len() {
                    return Err(PairingError::DimensionMismatch {
                        expected: w.r.ncols(),
                        got: x.len(),
                    });
                }
                Ok(&w.r * x)
            }
        }
    }

    /// A ↦ RAR⁻¹.
    pub fn similarity(&self, a: &Matrix) -> Result<Matrix, PairingError> {
        match &self.weight {
            None => Ok(a.clone()),
            Some(w) => {
                if w.r.ncols() != a.nrows() || a.nrows() != a.ncols() {
                    return Err(PairingError::DimensionMismatch {
                        expected: w.r.ncols(),
                        got: a.nrows(),
                    });
                }
                Ok(&w.r * a * &w.r_inv)
            }
        }
    }
}

/// Value of a weak pairing; for p = ∞ also the active index set I∞ of the
/// (weighted) second argument, where |y_i| attains ‖y‖∞.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingValue {
    pub value: f64,
    pub active_index_set: Option<Vec<usize>>,
}

fn unweighted_norm(x: &Vector, p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.norm()
    } else if p.is_infinite() {
        x.amax()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// ‖Rx‖_p.
pub fn vector_norm(x: &Vector, spec: &NormSpec) -> Result<f64, PairingError> {
    Ok(unweighted_norm(&spec.transform(x)?, spec.p))
}

fn unweighted_pairing(x: &Vector, y: &Vector, p: f64) -> PairingValue {
    if p.is_infinite() {
        // ⟦x,y⟧∞ = max_{i ∈ I∞(y)} x_i y_i
        let ymax = y.amax();
        let active: Vec<usize> = (0..y.len()).filter(|&i| y[i].abs() == ymax).collect();
        let value = active.iter().map(|&i| x[i] * y[i]).fold(f64::NEG_INFINITY, f64::max);
        let value = if active.is_empty() { 0.0 } else { value };
        return PairingValue { value, active_index_set: Some(active) };
    }
    let value = if p == 1.0 {
        // ⟦x,y⟧₁ = ‖y‖₁ sign(y)ᵀx
        let norm1: f64 = y.iter().map(|v| v.abs()).sum();
        norm1 * x.iter().zip(y.iter()).map(|(&xi, &yi)| sign(yi) * xi).sum::<f64>()
    } else if p == 2.0 {
        x.dot(y)
    } else {
        // ⟦x,y⟧_p = ‖y‖_p^{2−p} (y ∘ |y|^{p−2})ᵀ x
        let ny = unweighted_norm(y, p);
        if ny == 0.0 {
            0.0
        } else {
            let s: f64 = x
                .iter()
                .zip(y.iter())
                .map(|(&xi, &yi)| sign(yi) * yi.abs().powf(p - 1.0) * xi)
                .sum();
            ny.powf(2.0 - p) * s
        }
    };
    PairingValue { value, active_index_set: None }
}

/// Table 1 weak pairing, weighted by change of variables: ⟦Rx, Ry⟧_p.
pub fn weak_pairing(x: &Vector, y: &Vector, spec: &NormSpec) -> Result<PairingValue, PairingError> {
    if x.len() != y.len() {
        return Err(PairingError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let xt = spec.transform(x)?;
    let yt = spec.transform(y)?;
    Ok(unweighted_pairing(&xt, &yt, spec.p))
}

fn mu_1(a: &Matrix, plus: bool) -> f64 {
    (0..a.ncols())
        .map(|j| {
            let mut s = a[(j, j)];
            for i in 0..a.nrows() {
                if i != j {
                    s += if plus { a[(i, j)].max(0.0) } else { a[(i, j)].abs() };
                }
            }
            s
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn mu_inf(a: &Matrix, plus: bool) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let mut s = a[(i, i)];
            for j in 0..a.ncols() {
                if j != i {
                    s += if plus { a[(i, j)].max(0.0) } else { a[(i, j)].abs() };
                }
            }
            s
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn require_square(a: &Matrix) -> Result<(), PairingError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() }.into());
    }
    Ok(())
}

/// Exact log norm for p ∈ {1, 2, ∞}: column sums, ½λ_max(A+Aᵀ), row sums,
/// applied to RAR⁻¹ when a weight is present.
pub fn log_norm(a: &Matrix, spec: &NormSpec) -> Result<f64, PairingError> {
    require_square(a)?;
    let m = spec.similarity(a)?;
    if spec.p == 1.0 {
        Ok(mu_1(&m, false))
    } else if spec.p.is_infinite() {
        Ok(mu_inf(&m, false))
    } else if spec.p == 2.0 {
        Ok(linalg::lambda_max_sym(&m)?)
    } else {
        Err(PairingError::ApproximateOnly { p: spec.p })
    }
}

/// Conic log norm μ⁺ for p ∈ {1, ∞}: off-diagonal absolute values replaced by
/// positive parts. Only weights that preserve the nonnegative orthant
/// (positive diagonal) are meaningful here.
pub fn conic_log_norm(a: &Matrix, spec: &NormSpec) -> Result<f64, PairingError> {
    require_square(a)?;
    if spec.is_weighted() && !spec.diagonal_weight() {
        return Err(PairingError::InvalidWeight(
            "conic log norm requires a diagonal weight (orthant preservation)".into(),
        ));
    }
    let m = spec.similarity(a)?;
    if spec.p == 1.0 {
        Ok(mu_1(&m, true))
    } else if spec.p.is_infinite() {
        Ok(mu_inf(&m, true))
    } else {
        Err(PairingError::UnsupportedConicP { p: spec.p })
    }
}

/// Induced operator norm ‖M‖_p, exact for p ∈ {1, ∞}; p = 2 via power
/// iteration on MᵀM to tolerance 1e-12.
pub fn operator_norm(m: &Matrix, spec: &NormSpec) -> Result<f64, PairingError> {
    let m = spec.similarity(m)?;
    if spec.p == 1.0 {
        Ok((0..m.ncols())
            .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max))
    } else if spec.p.is_infinite() {
        Ok((0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max))
    } else if spec.p == 2.0 {
        // Power iteration on MᵀM; the gap is amplified by repeated squaring
        // (power iteration with step 2^k), then a Rayleigh quotient against
        // the original Gram matrix recovers λ_max to full precision.
        let gram = m.transpose() * &m;
        if gram.amax() == 0.0 {
            return Ok(0.0);
        }
        let n = gram.nrows();
        let mut g = gram.clone() / gram.amax();
        for _ in 0..40 {
            let g2 = &g * &g;
            let scale = g2.amax();
            if scale == 0.0 || !scale.is_finite() {
                break;
            }
            g = g2 / scale;
        }
        let mut v = Vector::from_fn(n, |i, _| 1.0 + 0.01 * (i as f64 + 1.0));
        v /= v.norm();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = &g * &v;
            let nw = w.norm();
            if nw == 0.0 {
                break;
            }
            v = w / nw;
            let lam = v.dot(&(&gram * &v));
            if (lam - lambda).abs() <= 1e-12 * lam.abs().max(1.0) {
                lambda = lam;
                break;
            }
            lambda = lam;
        }
        Ok(lambda.max(0.0).sqrt())
    } else {
        Err(PairingError::ApproximateOnly { p: spec.p })
    }
}

/// One-sided difference quotient (‖I + hA‖ − 1)/h approximating μ(A) to O(h).
pub fn log_norm_limit_estimate(a: &Matrix, spec: &NormSpec, h: f64) -> Result<f64, PairingError> {
    require_square(a)?;
    if !(h > 0.0) {
        return Err(PairingError::InvalidP(h));
    }
    let n = a.nrows();
    let m = Matrix::identity(n, n) + a * h;
    Ok((operator_norm(&m, spec)? - 1.0) / h)
}

/// Sampled lower bound on μ_p(A) for p ∈ (1, ∞): random unit vectors plus
/// coordinatewise polish. Always a genuine evaluation of ⟦Ax,x⟧ on the unit
/// sphere, hence never above the true value.
pub fn log_norm_sampled(a: &Matrix, p: f64, n_samples: usize, seed: u64) -> Result<f64, PairingError> {
    require_square(a)?;
    if !(p > 1.0) || p.is_infinite() {
        return Err(PairingError::ApproximateOnly { p });
    }
    let spec = NormSpec::new(p)?;
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |x: &Vector| -> f64 {
        let ax = a * x;
        unweighted_pairing(&ax, x, p).value
    };
    let normalize = |x: &Vector| -> Option<Vector> {
        let nx = unweighted_norm(x, p);
        (nx > 0.0).then(|| x / nx)
    };
    let mut pool: Vec<(f64, Vector)> = Vec::new();
    for _ in 0..n_samples.max(8) {
        let raw = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if let Some(x) = normalize(&raw) {
            pool.push((eval(&x), x));
        }
    }
    for j in 0..n {
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        pool.push((eval(&e), e));
    }
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pool.truncate(6);
    let mut best = pool[0].clone();
    for (_, start) in pool {
        let mut x = start;
        let mut val = eval(&x);
        let mut delta = 0.3;
        while delta > 1e-9 {
            let mut improved = false;
            for j in 0..n {
                for s in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[j] += s * delta;
                    if let Some(c) = normalize(&cand) {
                        let v = eval(&c);
                        if v > val {
                            val = v;
                            x = c;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                delta *= 0.5;
            }
        }
        if val > best.0 {
            best = (val, x);
        }
    }
    let _ = spec;
    Ok(best.0)
}

/// Exact maximization of ⟦Ax,x⟧ over the finite candidate family where the
/// supremum in Lumer's equality is attained, p ∈ {1, ∞}.
///
/// For p = 1 the supremum sits at ±e_j; the pairing value there is the
/// limiting one from inside the aligned orthant, i.e. the column formula
/// a_jj + Σ_{i≠j}|a_ij| (plus-parts when conic). For p = ∞ the candidate for
/// row i is x_i = 1, x_j = sign(a_ij), evaluated through the actual pairing.
pub fn lumer_enumeration(
    a: &Matrix,
    p: f64,
    conic: bool,
) -> Result<(f64, Vector), PairingError> {
    require_square(a)?;
    let n = a.nrows();
    if p == 1.0 {
        let mut best = f64::NEG_INFINITY;
        let mut arg = Vector::zeros(n);
        for j in 0..n {
            let mut v = a[(j, j)];
            for i in 0..n {
                if i != j {
                    v += if conic { a[(i, j)].max(0.0) } else { a[(i, j)].abs() };
                }
            }
            if v > best {
                best = v;
                arg = Vector::zeros(n);
                arg[j] = 1.0;
            }
        }
        Ok((best, arg))
    } else if p.is_infinite() {
        let mut best = f64::NEG_INFINITY;
        let mut arg = Vector::zeros(n);
        for i in 0..n {
            let x = Vector::from_fn(n, |j, _| {
                if j == i {
                    1.0
                } else {
                    let s = sign(a[(i, j)]);
                    if conic {
                        s.max(0.0)
                    } else if s == 0.0 {
                        // stay on the unit sphere but off the active set
                        0.0
                    } else {
                        s
                    }
                }
            });
            let ax = a * &x;
            let v = unweighted_pairing(&ax, &x, f64::INFINITY).value;
            if v > best {
                best = v;
                arg = x;
            }
        }
        Ok((best, arg))
    } else {
        Err(PairingError::UnsupportedConicP { p })
    }
}

/// Max over forward differences of |Δ(‖x‖²)/Δt − 2⟦ẋ_fd, x⟧|, probing the
/// curve norm derivative formula D⁺‖x(t)‖² = 2⟦ẋ, x⟧.
pub fn curve_derivative_residual(
    ts: &[f64],
    xs: &[Vector],
    spec: &NormSpec,
) -> Result<f64, PairingError> {
    if ts.len() < 3 || xs.len() < 3 {
        return Err(PairingError::TooFewSamples(ts.len().min(xs.len())));
    }
    if ts.len() != xs.len() {
        return Err(PairingError::DimensionMismatch { expected: ts.len(), got: xs.len() });
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PairingError::NonIncreasingTimes);
    }
    let mut worst = 0.0_f64;
    for k in 0..ts.len() - 1 {
        let dt = ts[k + 1] - ts[k];
        let xdot = (&xs[k + 1] - &xs[k]) / dt;
        let nk = vector_norm(&xs[k], spec)?;
        let nk1 = vector_norm(&xs[k + 1], spec)?;
        let lhs = (nk1 * nk1 - nk * nk) / dt;
        let rhs = 2.0 * weak_pairing(&xdot, &xs[k], spec)?.value;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
