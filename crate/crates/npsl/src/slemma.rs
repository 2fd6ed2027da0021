//! The non-polynomial S-Lemma engine.
//!
//! For a family P₀…P_s, ρ ∈ Rˢ and a norm spec, the primal problem is
//!
//! > α = sup ⟦P₀x, x⟧  s.t. ‖x‖ = 1, ⟦P_j x, x⟧ ≤ ρ_j  (x ≥ 0 when conic)
//!
//! and the dual is the convex program
//!
//! > β = inf_{τ ≥ 0} μ(P₀ − Σ τ_j P_j) + τᵀρ
//!
//! with the (conic) log norm of the family's spec. Weak duality α ≤ β always;
//! the gap closes in the Metzler ℓ¹ and Yakubovich ℓ² cases implemented here.

use crate::linalg::{self, LinalgError, Matrix, Vector};
use crate::lp::{self, LpOutcome, LpProblem, Rel};
use crate::pairings::{self, NormSpec, PairingError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SlemmaError {
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid family: {0}")]
    BadFamily(String),
    #[error("tau must be nonnegative, got tau[{index}] = {value}")]
    NegativeTau { index: usize, value: f64 },
    #[error("tau length {got} does not match number of constraints {expected}")]
    WrongTauLength { expected: usize, got: usize },
    #[error("requires {required}, got p = {got}")]
    RequiresP { required: &'static str, got: f64 },
    #[error("hypothesis violated: {0}")]
    StructureViolation(String),
    #[error("requires a strictly feasible interior point (x > 0, ⟦P_j x,x⟧₁ < ρ_j); best slack margin {margin:.3e} < 1e-8")]
    StrictlyInfeasible { margin: f64 },
    #[error("requires a Slater point with ⟦P₁x,x⟧ < ρ₁‖x‖²; none exists (min eigenvalue {min_eig:.3e})")]
    NoSlaterPoint { min_eig: f64 },
    #[error("zero-gap postcondition failed: |alpha - beta| = |{alpha} - {beta}| > {tol}")]
    GapViolation { alpha: f64, beta: f64, tol: f64 },
    #[error("primal recovery failed: {0}")]
    RecoveryFailed(String),
}

/// The family of 2-forms p_i(x) = ⟦P_i x, x⟧: matrices P₀…P_s, thresholds ρ,
/// the norm/pairing spec, and whether the primal is restricted to x ≥ 0.
#[derive(Debug, Clone)]
pub struct FormFamily {
    pub p: Vec<Matrix>,
    pub rho: Vector,
    pub spec: NormSpec,
    pub conic: bool,
}

impl FormFamily {
    pub fn new(
        p: Vec<Matrix>,
        rho: Vector,
        spec: NormSpec,
        conic: bool,
    ) -> Result<Self, SlemmaError> {
        if p.is_empty() {
            return Err(SlemmaError::BadFamily("need at least P0".into()));
        }
        let n = p[0].nrows();
        for (k, m) in p.iter().enumerate() {
            if m.nrows() != m.ncols() || m.nrows() != n {
                return Err(SlemmaError::BadFamily(format!(
                    "P{k} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            linalg::require_finite(m)?;
        }
        if rho.len() != p.len() - 1 {
            return Err(SlemmaError::BadFamily(format!(
                "rho has length {}, expected {}",
                rho.len(),
                p.len() - 1
            )));
        }
        Ok(FormFamily { p, rho, spec, conic })
    }

    pub fn n(&self) -> usize {
        self.p[0].nrows()
    }

    pub fn s(&self) -> usize {
        self.p.len() - 1
    }

    /// P(τ) = P₀ − Σ τ_j P_j.
    pub fn p_of_tau(&self, tau: &Vector) -> Matrix {
        let mut m = self.p[0].clone();
        for j in 0..self.s() {
            m -= &self.p[j + 1] * tau[j];
        }
        m
    }

    fn mu(&self, m: &Matrix) -> Result<f64, SlemmaError> {
        let v = if self.conic {
            pairings::conic_log_norm(m, &self.spec)?
        } else {
            pairings::log_norm(m, &self.spec)?
        };
        Ok(v)
    }
}

/// ⟦Px, x⟧.
pub fn two_form(p: &Matrix, x: &Vector, spec: &NormSpec) -> Result<f64, SlemmaError> {
    if p.ncols() != x.len() {
        return Err(SlemmaError::Pairing(PairingError::DimensionMismatch {
            expected: p.ncols(),
            got: x.len(),
        }));
    }
    Ok(pairings::weak_pairing(&(p * x), x, spec)?.value)
}

/// g(τ) = μ(P₀ − Σ τ_j P_j) + τᵀρ.
pub fn dual_objective(family: &FormFamily, tau: &Vector) -> Result<f64, SlemmaError> {
    if tau.len() != family.s() {
        return Err(SlemmaError::WrongTauLength { expected: family.s(), got: tau.len() });
    }
    if let Some(idx) = (0..tau.len()).find(|&j| tau[j] < 0.0) {
        return Err(SlemmaError::NegativeTau { index: idx, value: tau[idx] });
    }
    Ok(family.mu(&family.p_of_tau(tau))? + tau.dot(&family.rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualStatus {
    Optimal,
    UnboundedBelow,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub beta: f64,
    pub tau: Vector,
    pub iterations: usize,
    pub status: DualStatus,
}

/// Golden-section minimization on [lo, hi] of a convex scalar function.
/// Returns the best *evaluated* point (never an interpolation).
pub(crate) fn golden_min(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..300 {
        if b - a <= 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        let (xc, fc) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fc < best.1 {
            best = (xc, fc);
        }
    }
    let f_lo = f(lo);
    if f_lo < best.1 {
        best = (lo, f_lo);
    }
    best
}

enum ScalarMin {
    Finite { x: f64, f: f64 },
    /// Still decreasing after the expansion cap.
    Ray { x: f64, f: f64 },
}

/// Minimize a convex φ over t ≥ 0: geometric bracket expansion (factor 4, cap
/// 40 doublings) followed by golden section.
fn min_over_ray(phi: &mut dyn FnMut(f64) -> f64, start_hi: f64) -> ScalarMin {
    let mut hi = start_hi.max(1.0);
    let mut f_hi = phi(hi);
    let mut expansions = 0usize;
    loop {
        let probe = hi * 4.0;
        let f_probe = phi(probe);
        if f_probe < f_hi - 1e-14 * (1.0 + f_hi.abs()) {
            hi = probe;
            f_hi = f_probe;
            expansions += 1;
            if expansions >= 40 {
                return ScalarMin::Ray { x: hi, f: f_hi };
            }
        } else {
            hi = probe;
            break;
        }
    }
    let (x, f) = golden_min(phi, 0.0, hi);
    ScalarMin::Finite { x, f }
}

const DUAL_VALUE_FLOOR: f64 = -1e12;
const MAX_CYCLES: usize = 200;

/// Certified asymptotic-slope bound along direction d ≥ 0:
/// g(τ + t·d) ≤ g(τ) + t·(μ(−Σ d_jP_j) + dᵀρ) by subadditivity, so a negative
/// value proves unboundedness.
fn ray_slope_bound(family: &FormFamily, d: &Vector) -> Result<f64, SlemmaError> {
    let mut m = Matrix::zeros(family.n(), family.n());
    for j in 0..family.s() {
        m -= &family.p[j + 1] * d[j];
    }
    Ok(family.mu(&m)? + d.dot(&family.rho))
}

/// Epigraph LP for the piecewise-linear duals (p ∈ {1, ∞}): exact minimizer
/// of max over columns/rows of affine functions of τ, plus τᵀρ.
fn dual_lp_exact(family: &FormFamily) -> Result<Option<LpOutcome>, SlemmaError> {
    let p = family.spec.p();
    if p != 1.0 && !p.is_infinite() {
        return Ok(None);
    }
    let n = family.n();
    let s = family.s();
    let qs: Vec<Matrix> = family
        .p
        .iter()
        .map(|m| family.spec.similarity(m))
        .collect::<Result<_, _>>()?;
    // entry (i,j) of P(τ) after similarity: qs[0][ij] − Σ_k τ_k qs[k+1][ij]
    // variables: τ (s) | t⁺, t⁻ | v_e for each off-diagonal position e
    let offdiag: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let nv = s + 2 + offdiag.len();
    let vcol = |e: usize| s + 2 + e;
    let mut constraints: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
    // group: for μ₁ the groups are columns (sum over rows i≠j); for μ∞ rows.
    for g in 0..n {
        let mut row = vec![0.0; nv];
        row[s] = 1.0;
        row[s + 1] = -1.0;
        for k in 0..s {
            row[k] += qs[k + 1][(g, g)];
        }
        for (e, &(i, j)) in offdiag.iter().enumerate() {
            let in_group = if p == 1.0 { j == g } else { i == g };
            if in_group {
                row[vcol(e)] = -1.0;
            }
        }
        constraints.push((row, Rel::Ge, qs[0][(g, g)]));
    }
    for (e, &(i, j)) in offdiag.iter().enumerate() {
        // v_e ≥ entry(τ)
        let mut row = vec![0.0; nv];
        row[vcol(e)] = 1.0;
        for k in 0..s {
            row[k] += qs[k + 1][(i, j)];
        }
        constraints.push((row, Rel::Ge, qs[0][(i, j)]));
        if !family.conic {
            // v_e ≥ −entry(τ)
            let mut row = vec![0.0; nv];
            row[vcol(e)] = 1.0;
            for k in 0..s {
                row[k] -= qs[k + 1][(i, j)];
            }
            constraints.push((row, Rel::Ge, -qs[0][(i, j)]));
        }
    }
    let mut objective = vec![0.0; nv];
    for k in 0..s {
        objective[k] = family.rho[k];
    }
    objective[s] = 1.0;
    objective[s + 1] = -1.0;
    Ok(Some(lp::solve_min(&LpProblem { n: nv, objective, constraints })))
}

/// Minimize the dual objective over τ ≥ 0. s = 1 uses bracketing plus golden
/// section; s > 1 cycles the same scalar routine over coordinates until a full
/// cycle improves by < 1e-12. For p ∈ {1, ∞} the piecewise-linear dual is then
/// polished by an exact epigraph LP. Unboundedness is declared only when
/// certified: a negative subadditive ray bound, the exact LP, or the value
/// floor −1e12.
pub fn solve_dual(family: &FormFamily) -> Result<DualSolution, SlemmaError> {
    let s = family.s();
    let mut evals = 0usize;
    if s == 0 {
        let beta = family.mu(&family.p[0])?;
        return Ok(DualSolution { beta, tau: Vector::zeros(0), iterations: 1, status: DualStatus::Optimal });
    }

    // certified unbounded pre-check along coordinate rays and a few random
    // directions
    let mut dirs: Vec<Vector> = (0..s)
        .map(|j| Vector::from_fn(s, |k, _| if k == j { 1.0 } else { 0.0 }))
        .collect();
    if s > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED + s as u64);
        for _ in 0..8 {
            let mut d = Vector::from_fn(s, |_, _| rng.random_range(0.0..1.0));
            let sum: f64 = d.iter().sum();
            if sum > 0.0 {
                d /= sum;
                dirs.push(d);
            }
        }
    }
    for d in &dirs {
        if ray_slope_bound(family, d)? < -1e-12 {
            return Ok(DualSolution {
                beta: f64::NEG_INFINITY,
                tau: d.clone(),
                iterations: evals,
                status: DualStatus::UnboundedBelow,
            });
        }
    }

    let mut tau = Vector::zeros(s);
    let mut err: Option<SlemmaError> = None;
    let mut best = dual_objective(family, &tau)?;
    evals += 1;
    let mut status = DualStatus::MaxIter;
    'outer: for _cycle in 0..MAX_CYCLES {
        let before = best;
        for j in 0..s {
            let base = tau.clone();
            let mut phi = |t: f64| -> f64 {
                let mut tt = base.clone();
                tt[j] = t;
                evals += 1;
                match dual_objective(family, &tt) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        f64::INFINITY
                    }
                }
            };
            let outcome = min_over_ray(&mut phi, (2.0 * tau[j]).max(1.0));
            if let Some(e) = err.take() {
                return Err(e);
            }
            match outcome {
                ScalarMin::Finite { x, f } => {
                    if f < best {
                        tau[j] = x;
                        best = f;
                    }
                }
                ScalarMin::Ray { x, f } => {
                    // still decreasing at τ_j = 4^40: convex + nonnegative
                    // certified slope ⟹ flat asymptote; take the far value
                    tau[j] = x;
                    best = f;
                }
            }
            if best < DUAL_VALUE_FLOOR {
                return Ok(DualSolution {
                    beta: f64::NEG_INFINITY,
                    tau,
                    iterations: evals,
                    status: DualStatus::UnboundedBelow,
                });
            }
        }
        if before - best < 1e-12 {
            status = DualStatus::Optimal;
            break 'outer;
        }
    }

    // exact polish for the piecewise-linear norms
    if let Some(outcome) = dual_lp_exact(family)? {
        match outcome {
            LpOutcome::Unbounded => {
                return Ok(DualSolution {
                    beta: f64::NEG_INFINITY,
                    tau,
                    iterations: evals,
                    status: DualStatus::UnboundedBelow,
                });
            }
            LpOutcome::Optimal { x, .. } => {
                let tau_lp = Vector::from_fn(family.s(), |k, _| x[k].max(0.0));
                let beta_lp = dual_objective(family, &tau_lp)?;
                evals += 1;
                if beta_lp < best {
                    best = beta_lp;
                    tau = tau_lp;
                    status = DualStatus::Optimal;
                }
            }
            LpOutcome::Infeasible => {} // cannot happen: τ = 0 is feasible
        }
    }

    Ok(DualSolution { beta: best, tau, iterations: evals, status })
}

#[derive(Debug, Clone)]
pub struct PrimalEstimate {
    pub alpha_lower: f64,
    pub witness: Vector,
    pub exact: bool,
}

/// Caps for exhaustive p = 1 enumeration: sign patterns × supports × 2 LPs.
const EXACT_CAP_CONIC: usize = 12;
const EXACT_CAP_FULL: usize = 8;
const INTERIOR_TOL: f64 = 1e-9;

/// Exact conic ℓ¹ supremum by enumeration over supports of the simplex.
///
/// On the relative interior of the face {x ≥ 0, supp x = S, Σx = 1} the ℓ¹
/// pairing of any form is the linear function 1_SᵀQx, so the supremum over the
/// face is an LP — but only faces whose constrained relative interior is
/// nonempty may contribute (sign(0) = 0 silently changes the forms on smaller
/// supports, which is exactly what Example 1 exploits).
fn conic_l1_alpha(
    qs: &[Matrix],
    rho: &Vector,
) -> (f64, Option<(Vec<usize>, Vec<f64>, Vec<f64>)>) {
    let n = qs[0].nrows();
    let s = qs.len() - 1;
    let mut best = f64::NEG_INFINITY;
    let mut best_face: Option<(Vec<usize>, Vec<f64>, Vec<f64>)> = None;
    for mask in 1u64..(1u64 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let k = support.len();
        // column sums of Q over the rows in the support
        let col_sums = |q: &Matrix| -> Vec<f64> {
            support
                .iter()
                .map(|&j| support.iter().map(|&i| q[(i, j)]).sum::<f64>())
                .collect()
        };
        let mut constraints: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
        let mut simplex_row = vec![0.0; k + 1];
        simplex_row[..k].fill(1.0);
        constraints.push((simplex_row, Rel::Eq, 1.0));
        for i in 0..s {
            let mut row = col_sums(&qs[i + 1]);
            row.push(0.0);
            constraints.push((row, Rel::Le, rho[i]));
        }
        // u_j ≥ t keeps the point in the relative interior
        for j in 0..k {
            let mut row = vec![0.0; k + 1];
            row[j] = 1.0;
            row[k] = -1.0;
            constraints.push((row, Rel::Ge, 0.0));
        }
        let mut phase_obj = vec![0.0; k + 1];
        phase_obj[k] = 1.0;
        let phase = lp::solve(&LpProblem { n: k + 1, objective: phase_obj, constraints: constraints.clone() });
        let interior = match phase {
            LpOutcome::Optimal { ref x, value } if value > INTERIOR_TOL => x[..k].to_vec(),
            _ => continue,
        };
        let mut main_obj = col_sums(&qs[0]);
        main_obj.push(0.0);
        let main = lp::solve(&LpProblem { n: k + 1, objective: main_obj, constraints });
        if let LpOutcome::Optimal { x, value } = main {
            if value > best {
                best = value;
                best_face = Some((support.clone(), x[..k].to_vec(), interior));
            }
        }
    }
    (best, best_face)
}

/// Mix the face optimum toward the interior point so the witness has full
/// support (hence the evaluated pairing matches the LP value to ~1e-10).
fn interior_witness(support: &[usize], opt: &[f64], interior: &[f64], n: usize) -> Vector {
    let spread: f64 = opt
        .iter()
        .zip(interior)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let eps = (1e-11 / spread.max(1e-11)).min(1e-6);
    let mut x = Vector::zeros(n);
    for (idx, &j) in support.iter().enumerate() {
        x[j] = (1.0 - eps) * opt[idx] + eps * interior[idx];
    }
    x
}

fn primal_sampled(family: &FormFamily, budget: usize) -> Result<PrimalEstimate, SlemmaError> {
    let n = family.n();
    let s = family.s();
    let spec = &family.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1FA);
    let feasible = |x: &Vector| -> Result<bool, SlemmaError> {
        let nx2 = pairings::vector_norm(x, spec)?.powi(2);
        for i in 0..s {
            if two_form(&family.p[i + 1], x, spec)? > family.rho[i] * nx2 + 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let normalize = |x: &Vector| -> Result<Option<Vector>, SlemmaError> {
        let nx = pairings::vector_norm(x, spec)?;
        Ok((nx > 1e-14).then(|| x / nx))
    };
    let mut pool: Vec<(f64, Vector)> = Vec::new();
    let consider = |raw: &Vector, pool: &mut Vec<(f64, Vector)>| -> Result<(), SlemmaError> {
        if let Some(x) = normalize(raw)? {
            if feasible(&x)? {
                pool.push((two_form(&family.p[0], &x, spec)?, x));
            }
        }
        Ok(())
    };
    // deterministic anchors: eigenvectors of every form's symmetric part. The
    // bottom eigenvector of a constraint form is feasible whenever the
    // constraint admits a strictly feasible point, which random sampling can
    // miss entirely when the feasible set is a narrow cone.
    for pm in &family.p {
        let sym = linalg::symmetric_part(pm)?;
        let (_, vecs) = linalg::eig_sym(&sym)?;
        for j in 0..n {
            let v = vecs.column(j).into_owned();
            if family.conic {
                consider(&v.map(f64::abs), &mut pool)?;
            } else {
                consider(&v, &mut pool)?;
                consider(&(-&v), &mut pool)?;
            }
        }
    }
    for k in 0..budget.max(64) {
        let mut raw = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if family.conic || k % 3 == 0 {
            raw = raw.map(f64::abs);
        }
        consider(&raw, &mut pool)?;
    }
    // single-constraint ℓ²: walk the Lagrangian path. The top eigenvector of
    // Q₀ − τ(Q₁ − ρ₁I) has monotone constraint value in τ (λ_max is convex in
    // τ with derivative −g), so the feasibility crossing — where the
    // constraint becomes active — can be bisected; the crossing eigenvector
    // is a feasible witness at the constrained maximum.
    if s == 1 && spec.p() == 2.0 && !spec.is_weighted() && !family.conic {
        let q0 = linalg::symmetric_part(&family.p[0])?;
        let q1n =
            linalg::symmetric_part(&family.p[1])? - Matrix::identity(n, n) * family.rho[0];
        let top = |tau: f64| -> Result<Vector, SlemmaError> {
            Ok(linalg::eig_sym(&(&q0 - &q1n * tau))?.1.column(0).into_owned())
        };
        let gval = |v: &Vector| v.dot(&(&q1n * v));
        let mut taus = vec![0.0];
        for k in 0..=120 {
            taus.push(10f64.powf(-6.0 + 15.0 * k as f64 / 120.0));
        }
        let mut bracket: Option<(f64, f64)> = None;
        let mut prev_tau: Option<f64> = None;
        for &t in &taus {
            let v = top(t)?;
            if gval(&v) <= 0.0 {
                consider(&v, &mut pool)?;
                bracket = prev_tau.map(|pt| (pt, t));
                break;
            }
            prev_tau = Some(t);
        }
        if let Some((mut lo, mut hi)) = bracket {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let v = top(mid)?;
                if gval(&v) <= 0.0 {
                    consider(&v, &mut pool)?;
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
    }
    // local polish from the best few starts: a constrained 2-form on the
    // sphere can have several local maxima, one start is not enough. Collapse
    // near-equal values first so the starts are genuinely distinct, and cap
    // the passes — boundary starts otherwise crawl in ever-smaller steps.
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pool.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-9 * (1.0 + b.0.abs()));
    pool.truncate(4);
    let mut best: Option<(f64, Vector)> = None;
    for (_, start) in pool {
        let mut x = start;
        let mut val = two_form(&family.p[0], &x, spec)?;
        let mut delta = 0.25;
        let mut passes = 0;
        while delta > 1e-8 && passes < 80 {
            passes += 1;
            let mut improved = false;
            for j in 0..n {
                for dir in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[j] += dir * delta;
                    if family.conic && cand[j] < 0.0 {
                        continue;
                    }
                    if let Some(c) = normalize(&cand)? {
                        if feasible(&c)? {
                            let v = two_form(&family.p[0], &c, spec)?;
                            if v > val {
                                val = v;
                                x = c;
                                improved = true;
                            }
                        }
                    }
                }
            }
            if !improved {
                delta *= 0.5;
            }
        }
        if best.as_ref().map_or(true, |(b, _)| val > *b) {
            best = Some((val, x));
        }
    }
    Ok(match best {
        Some((alpha, witness)) => PrimalEstimate { alpha_lower: alpha, witness, exact: false },
        None => PrimalEstimate {
            alpha_lower: f64::NEG_INFINITY,
            witness: Vector::zeros(n),
            exact: false,
        },
    })
}

/// Best-effort primal value. p = 1 within the enumeration caps is exact
/// (orthant × support LPs); everything else samples the sphere and polishes,
/// reporting `exact = false`.
pub fn primal_oracle(family: &FormFamily, budget: usize) -> Result<PrimalEstimate, SlemmaError> {
    let n = family.n();
    let p = family.spec.p();
    let diag_ok = !family.spec.is_weighted() || family.spec.diagonal_weight();
    let exact_mode = p == 1.0
        && diag_ok
        && ((family.conic && n <= EXACT_CAP_CONIC) || (!family.conic && n <= EXACT_CAP_FULL));
    if !exact_mode {
        return primal_sampled(family, budget);
    }
    // diagonal weight: substitute u = Rx, Q = R P R⁻¹ (orthants preserved)
    let qs: Vec<Matrix> = family
        .p
        .iter()
        .map(|m| family.spec.similarity(m))
        .collect::<Result<_, _>>()?;
    let r_inv = family.spec.weight_inverse().cloned();
    let mut best = f64::NEG_INFINITY;
    let mut witness: Option<Vector> = None;
    let n_patterns: u64 = if family.conic { 1 } else { 1 << (n - 1) };
    for pat in 0..n_patterns {
        // σ_0 = +1; global sign flips are equivalent
        let sigma: Vec<f64> = (0..n)
            .map(|j| if j > 0 && pat & (1 << (j - 1)) != 0 { -1.0 } else { 1.0 })
            .collect();
        let qsig: Vec<Matrix> = qs
            .iter()
            .map(|q| Matrix::from_fn(n, n, |i, j| sigma[i] * q[(i, j)] * sigma[j]))
            .collect();
        let (val, face) = conic_l1_alpha(&qsig, &family.rho);
        if val > best {
            if let Some((support, opt, interior)) = face {
                best = val;
                let mut u = interior_witness(&support, &opt, &interior, n);
                for j in 0..n {
                    u[j] *= sigma[j];
                }
                witness = Some(match &r_inv {
                    Some(ri) => ri * u,
                    None => u,
                });
            }
        }
    }
    Ok(match witness {
        Some(w) => PrimalEstimate { alpha_lower: best, witness: w, exact: true },
        None => PrimalEstimate {
            alpha_lower: f64::NEG_INFINITY,
            witness: Vector::zeros(n),
            exact: true,
        },
    })
}

#[derive(Debug, Clone)]
pub struct WeakDualityReport {
    pub alpha_lower: f64,
    pub beta: f64,
    pub ok: bool,
}

/// α_lower ≤ β + 1e-7, plus a sampled check of the implication form: every
/// sampled x with ⟦P_jx,x⟧ ≤ ρ_j‖x‖² must satisfy ⟦P₀x,x⟧ ≤ β‖x‖² + tol.
pub fn weak_duality_check(
    family: &FormFamily,
    budget: usize,
) -> Result<WeakDualityReport, SlemmaError> {
    let dual = solve_dual(family)?;
    let primal = primal_oracle(family, budget)?;
    let mut ok = primal.alpha_lower <= dual.beta + 1e-7;
    let n = family.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x3_5);
    for _ in 0..200 {
        let mut x = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if family.conic {
            x = x.map(f64::abs);
        }
        let nx2 = pairings::vector_norm(&x, &family.spec)?.powi(2);
        if nx2 < 1e-12 {
            continue;
        }
        let feas = (0..family.s())
            .map(|j| {
                two_form(&family.p[j + 1], &x, &family.spec)
                    .map(|v| v <= family.rho[j] * nx2)
            })
            .collect::<Result<Vec<bool>, _>>()?
            .into_iter()
            .all(|b| b);
        if feas {
            let v = two_form(&family.p[0], &x, &family.spec)?;
            if !(v <= dual.beta * nx2 + 1e-7 * nx2.max(1.0)) {
                ok = false;
            }
        }
    }
    Ok(WeakDualityReport { alpha_lower: primal.alpha_lower, beta: dual.beta, ok })
}

/// P_j ↦ P_j − ρ_j I, ρ ↦ 0; leaves the dual objective pointwise unchanged
/// and the primal feasible set identical.
pub fn normalize_rho(family: &FormFamily) -> FormFamily {
    let n = family.n();
    let mut p = family.p.clone();
    for j in 0..family.s() {
        p[j + 1] -= Matrix::identity(n, n) * family.rho[j];
    }
    FormFamily {
        p,
        rho: Vector::zeros(family.s()),
        spec: family.spec.clone(),
        conic: family.conic,
    }
}

const STRICT_FEAS_MARGIN: f64 = 1e-8;

/// Zero-gap case for ℓ¹ and Metzler structure: P₀ Metzler, each −P_j Metzler,
/// and a strictly feasible interior point. α comes from one dense LP over the
/// closed simplex, β from the conic dual; the lemma guarantees they coincide
/// and that the dual minimum is attained.
pub fn metzler_zero_gap(family: &FormFamily) -> Result<(f64, f64, Vector), SlemmaError> {
    if family.spec.p() != 1.0 {
        return Err(SlemmaError::RequiresP { required: "p = 1", got: family.spec.p() });
    }
    if family.spec.is_weighted() && !family.spec.diagonal_weight() {
        return Err(SlemmaError::StructureViolation(
            "requires an orthant-preserving (diagonal) weight".into(),
        ));
    }
    let qs: Vec<Matrix> = family
        .p
        .iter()
        .map(|m| family.spec.similarity(m))
        .collect::<Result<_, _>>()?;
    if !linalg::is_metzler(&qs[0])? {
        return Err(SlemmaError::StructureViolation("requires P₀ Metzler".into()));
    }
    for j in 1..qs.len() {
        if !linalg::is_metzler(&(-&qs[j]))? {
            return Err(SlemmaError::StructureViolation(format!(
                "requires −P_{j} Metzler"
            )));
        }
    }
    let n = family.n();
    let s = family.s();
    let col_sums = |q: &Matrix| -> Vec<f64> {
        (0..n).map(|j| (0..n).map(|i| q[(i, j)]).sum::<f64>()).collect()
    };
    // strict feasibility: maximize the common slack t in
    //   x_j ≥ t, ρ_i − 1ᵀP_i x ≥ t, Σx = 1
    let mut constraints: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
    let mut simplex_row = vec![0.0; n + 1];
    simplex_row[..n].fill(1.0);
    constraints.push((simplex_row, Rel::Eq, 1.0));
    for i in 0..s {
        let mut row = col_sums(&qs[i + 1]);
        row.push(1.0);
        constraints.push((row, Rel::Le, family.rho[i]));
    }
    for j in 0..n {
        let mut row = vec![0.0; n + 1];
        row[j] = 1.0;
        row[n] = -1.0;
        constraints.push((row, Rel::Ge, 0.0));
    }
    let mut phase_obj = vec![0.0; n + 1];
    phase_obj[n] = 1.0;
    let margin = match lp::solve(&LpProblem { n: n + 1, objective: phase_obj, constraints: constraints.clone() }) {
        LpOutcome::Optimal { value, .. } => value,
        _ => f64::NEG_INFINITY,
    };
    if !(margin >= STRICT_FEAS_MARGIN) {
        return Err(SlemmaError::StrictlyInfeasible { margin });
    }
    // α: closed-simplex LP (lemma: open and closed formulations coincide)
    let mut alpha_constraints: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
    let mut row = vec![1.0; n];
    alpha_constraints.push((row.clone(), Rel::Eq, 1.0));
    for i in 0..s {
        alpha_constraints.push((col_sums(&qs[i + 1]), Rel::Le, family.rho[i]));
    }
    row = col_sums(&qs[0]);
    let alpha = match lp::solve(&LpProblem { n, objective: row, constraints: alpha_constraints }) {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible => {
            return Err(SlemmaError::StrictlyInfeasible { margin: f64::NEG_INFINITY })
        }
        LpOutcome::Unbounded => {
            return Err(SlemmaError::RecoveryFailed("alpha LP unbounded".into()))
        }
    };
    let mut conic_family = family.clone();
    conic_family.conic = true;
    let dual = solve_dual(&conic_family)?;
    if dual.status != DualStatus::Optimal {
        return Err(SlemmaError::RecoveryFailed(format!(
            "dual solver did not reach the guaranteed minimum (status {:?})",
            dual.status
        )));
    }
    if (alpha - dual.beta).abs() > 1e-6 {
        return Err(SlemmaError::GapViolation { alpha, beta: dual.beta, tol: 1e-6 });
    }
    Ok((alpha, dual.beta, dual.tau))
}

#[derive(Debug, Clone)]
pub struct YakubovichOutcome {
    pub alpha: f64,
    pub beta: f64,
    pub tau_star: f64,
    pub complementarity_residual: f64,
    pub witness: Vector,
}

/// Zero-gap case for ℓ², s = 1, with a Slater point (∃x: ⟦P₁x,x⟧ < ρ₁‖x‖²).
/// β and τ* from the dual; x* recovered from the top eigenspace of
/// sym(P₀ − τ*(P₁ − ρ₁I)), rotated within the eigenspace to meet the
/// complementarity condition.
pub fn yakubovich_zero_gap(family: &FormFamily) -> Result<YakubovichOutcome, SlemmaError> {
    if family.spec.p() != 2.0 {
        return Err(SlemmaError::RequiresP { required: "p = 2", got: family.spec.p() });
    }
    if family.s() != 1 {
        return Err(SlemmaError::BadFamily(format!(
            "Yakubovich case requires s = 1, got s = {}",
            family.s()
        )));
    }
    if family.conic {
        return Err(SlemmaError::StructureViolation(
            "Yakubovich case is stated for the full sphere, not the conic restriction".into(),
        ));
    }
    let q0 = linalg::symmetric_part(&family.spec.similarity(&family.p[0])?)?;
    let q1 = linalg::symmetric_part(&family.spec.similarity(&family.p[1])?)?;
    let n = family.n();
    let q1n = &q1 - Matrix::identity(n, n) * family.rho[0];
    // Slater: min of x ↦ xᵀ(P₁ − ρ₁I)x on the sphere is the least eigenvalue
    let (q1n_vals, _) = linalg::eig_sym(&q1n)?;
    let min_eig = q1n_vals[n - 1];
    if !(min_eig < -1e-10) {
        return Err(SlemmaError::NoSlaterPoint { min_eig });
    }
    let normalized = normalize_rho(&FormFamily {
        p: vec![q0.clone(), q1.clone()],
        rho: family.rho.clone(),
        spec: NormSpec::l2(),
        conic: false,
    });
    let dual = solve_dual(&normalized)?;
    if dual.status != DualStatus::Optimal {
        return Err(SlemmaError::RecoveryFailed(format!(
            "dual solver status {:?}",
            dual.status
        )));
    }
    let tau_star = dual.tau[0];
    let m = &q0 - &q1n * tau_star;
    let (vals, vecs) = linalg::eig_sym(&m)?;
    let scale = vals[0].abs().max(1.0);
    let top_dim = (0..n).take_while(|&k| vals[0] - vals[k] <= 1e-7 * scale).count();
    let basis = vecs.columns(0, top_dim).into_owned();
    // constraint form restricted to the top eigenspace
    let g = basis.transpose() * &q1n * &basis;
    let (g_vals, g_vecs) = linalg::eig_sym(&linalg::symmetric_part(&g)?)?;
    let (mu_max, mu_min) = (g_vals[0], g_vals[top_dim - 1]);
    let y_min = &basis * g_vecs.column(top_dim - 1);
    let y_max = &basis * g_vecs.column(0);
    let witness = if tau_star <= 1e-9 {
        // boundary minimum: feasibility is all that matters
        if mu_min > 1e-8 {
            return Err(SlemmaError::RecoveryFailed(format!(
                "top eigenspace infeasible at τ* = 0 (min constraint value {mu_min:.3e})"
            )));
        }
        y_min
    } else if mu_min > 1e-8 || mu_max < -1e-8 {
        // interior minimum must admit a zero of the constraint in the eigenspace
        if mu_min.abs() <= mu_max.abs() {
            if mu_min > 1e-6 {
                return Err(SlemmaError::RecoveryFailed(format!(
                    "complementarity unattainable in eigenspace ({mu_min:.3e}..{mu_max:.3e})"
                )));
            }
            y_min
        } else {
            y_max
        }
    } else {
        // rotate between the extreme eigenvectors of g: cross terms vanish, so
        // cos²θ·μ_min + sin²θ·μ_max = 0 is solvable in closed form
        let t2 = (-mu_min / mu_max.max(1e-300)).max(0.0);
        let theta = t2.sqrt().atan();
        &y_min * theta.cos() + &y_max * theta.sin()
    };
    let witness = &witness / witness.norm();
    let alpha = witness.dot(&(&q0 * &witness));
    let constraint_val = witness.dot(&(&q1n * &witness));
    if constraint_val > 1e-6 {
        return Err(SlemmaError::RecoveryFailed(format!(
            "recovered witness infeasible: constraint value {constraint_val:.3e}"
        )));
    }
    let complementarity_residual = (tau_star * constraint_val).abs();
    if (alpha - dual.beta).abs() > 1e-6 {
        return Err(SlemmaError::GapViolation { alpha, beta: dual.beta, tol: 1e-6 });
    }
    // map back through the weight if present
    let witness = match family.spec.weight_inverse() {
        Some(ri) => ri * witness,
        None => witness,
    };
    Ok(YakubovichOutcome {
        alpha,
        beta: dual.beta,
        tau_star,
        complementarity_residual,
        witness,
    })
}
