//! Trajectory generation for Lur'e systems ż = Az + Bφ(t, Cz) with
//! sector/slope-bounded nonlinearities, and the empirical validation of
//! decay bounds ‖z(t)‖ ≤ e^{−ct}‖z(0)‖, contraction bounds
//! ‖Δz(t)‖ ≤ e^{−ct}‖Δz(0)‖, and the Dini mechanism D⁺‖z‖² = 2⟦ż, z⟧.

use crate::linalg::Vector;
use crate::lure::{ChannelSubstitution, LureError, LureSystem};
use crate::pairings::{self, NormSpec, PairingError};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Lure(#[from] LureError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("declared sector [{lo}, {hi}] violated at t={t}, y={y}: phi*y = {value}")]
    SectorViolation { lo: f64, hi: f64, t: f64, y: f64, value: f64 },
    #[error("declared slope [{lo}, {hi}] violated at t={t} on [{y1}, {y2}]: quotient = {quotient}")]
    SlopeViolation { lo: f64, hi: f64, t: f64, y1: f64, y2: f64, quotient: f64 },
    #[error("trajectories are not on the same time grid")]
    GridMismatch,
}

/// Shapes of the feedback nonlinearity w = φ(t, y).
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinKind {
    /// φ(y) = k·y.
    LinearGain { k: f64 },
    /// φ(y) = clamp(y, −level, level).
    Saturation { level: f64 },
    /// φ(y) = 0 for |y| ≤ width, slope·(y − width·sign y) beyond.
    Deadzone { width: f64, slope: f64 },
    /// φ(y) = gain·tanh(y).
    ScaledTanh { gain: f64 },
    /// Piecewise-linear interpolation through (y, φ(y)) nodes, sorted by y;
    /// extended beyond the end nodes with the end segments' slopes.
    PwLinear { table: Vec<(f64, f64)> },
    /// Time-switched: uses list[i] on [switch_times[i-1], switch_times[i]).
    Switched { list: Vec<NonlinKind>, switch_times: Vec<f64> },
    /// scale·φ(t, y) + gain·y — replays the input substitutions recorded by
    /// sector normalization on top of an existing shape.
    Affine { inner: Box<NonlinKind>, scale: f64, gain: f64 },
}

impl NonlinKind {
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match self {
            NonlinKind::LinearGain { k } => k * y,
            NonlinKind::Saturation { level } => y.clamp(-level, *level),
            NonlinKind::Deadzone { width, slope } => {
                if y.abs() <= *width {
                    0.0
                } else {
                    slope * (y - width * y.signum())
                }
            }
            NonlinKind::ScaledTanh { gain } => gain * y.tanh(),
            NonlinKind::PwLinear { table } => {
                let n = table.len();
                // locate the segment; extrapolate with the end slopes
                let seg = if y <= table[0].0 {
                    0
                } else if y >= table[n - 1].0 {
                    n - 2
                } else {
                    (0..n - 1).find(|&i| y <= table[i + 1].0).unwrap_or(n - 2)
                };
                let (y0, v0) = table[seg];
                let (y1, v1) = table[seg + 1];
                v0 + (v1 - v0) / (y1 - y0) * (y - y0)
            }
            NonlinKind::Switched { list, switch_times } => {
                let idx = switch_times.iter().filter(|&&s| s <= t).count();
                list[idx.min(list.len() - 1)].eval(t, y)
            }
            NonlinKind::Affine { inner, scale, gain } => scale * inner.eval(t, y) + gain * y,
        }
    }

    /// Representative times at which the shape can differ (midpoints of the
    /// switching intervals; a single probe for time-invariant kinds).
    fn probe_times(&self) -> Vec<f64> {
        match self {
            NonlinKind::Switched { switch_times, .. } => {
                let mut ts = vec![0.0];
                for (i, &s) in switch_times.iter().enumerate() {
                    let next = switch_times.get(i + 1).copied().unwrap_or(s + 1.0);
                    ts.push(0.5 * (s + next));
                }
                ts
            }
            NonlinKind::Affine { inner, .. } => inner.probe_times(),
            _ => vec![0.0],
        }
    }

    fn validate_structure(&self) -> Result<(), SimError> {
        match self {
            NonlinKind::Saturation { level } if !(*level > 0.0) => {
                Err(SimError::BadInput(format!("saturation level must be positive, got {level}")))
            }
            NonlinKind::Deadzone { width, .. } if !(*width >= 0.0) => {
                Err(SimError::BadInput(format!("deadzone width must be nonnegative, got {width}")))
            }
            NonlinKind::PwLinear { table } => {
                if table.len() < 2 {
                    return Err(SimError::BadInput("piecewise table needs >= 2 nodes".into()));
                }
                if table.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(SimError::BadInput(
                        "piecewise table must be strictly increasing in y".into(),
                    ));
                }
                if table.iter().any(|(y, v)| !y.is_finite() || !v.is_finite()) {
                    return Err(SimError::BadInput("piecewise table has non-finite nodes".into()));
                }
                Ok(())
            }
            NonlinKind::Switched { list, switch_times } => {
                if list.is_empty() || list.len() != switch_times.len() + 1 {
                    return Err(SimError::BadInput(
                        "switched needs len(list) = len(switch_times) + 1 >= 1".into(),
                    ));
                }
                if switch_times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(SimError::BadInput(
                        "switch times must be strictly increasing".into(),
                    ));
                }
                for k in list {
                    k.validate_structure()?;
                    if matches!(k, NonlinKind::Switched { .. }) {
                        return Err(SimError::BadInput("nested switched is not supported".into()));
                    }
                }
                Ok(())
            }
            NonlinKind::Affine { inner, scale, gain } => {
                if !scale.is_finite() || !gain.is_finite() {
                    return Err(SimError::BadInput("affine wrapper needs finite coefficients".into()));
                }
                inner.validate_structure()
            }
            _ => Ok(()),
        }
    }
}

/// A nonlinearity together with the constraint classes it claims to belong
/// to. The claims are validated at construction over a dense y-grid — the
/// declarations are checked, never trusted.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinKind,
    declared_sector: Option<(f64, f64)>,
    declared_slope: Option<(f64, f64)>,
}

/// Validation grid: dense on [−8, 8] with extra points near the origin,
/// where sector quotients are most delicate.
fn validation_grid() -> Vec<f64> {
    let mut ys = Vec::with_capacity(4128);
    for k in 0..=4000 {
        ys.push(-8.0 + 16.0 * k as f64 / 4000.0);
    }
    for k in 1..=60 {
        let y = 1e-6 * 1.26f64.powi(k);
        ys.push(y);
        ys.push(-y);
    }
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    ys
}

impl Nonlinearity {
    pub fn new(
        kind: NonlinKind,
        declared_sector: Option<(f64, f64)>,
        declared_slope: Option<(f64, f64)>,
    ) -> Result<Self, SimError> {
        kind.validate_structure()?;
        let ys = validation_grid();
        let times = kind.probe_times();
        if let Some((lo, hi)) = declared_sector {
            if !(lo < hi) {
                return Err(SimError::BadInput(format!("empty sector [{lo}, {hi}]")));
            }
            for &t in &times {
                for &y in &ys {
                    let v = kind.eval(t, y) * y;
                    let tol = 1e-9 * (1.0 + y * y);
                    let lo_ok = !lo.is_finite() || v >= lo * y * y - tol;
                    let hi_ok = !hi.is_finite() || v <= hi * y * y + tol;
                    if !lo_ok || !hi_ok {
                        return Err(SimError::SectorViolation { lo, hi, t, y, value: v });
                    }
                }
            }
        }
        if let Some((lo, hi)) = declared_slope {
            if !(lo < hi) {
                return Err(SimError::BadInput(format!("empty slope range [{lo}, {hi}]")));
            }
            for &t in &times {
                for pair in ys.windows(2) {
                    let (y1, y2) = (pair[0], pair[1]);
                    let q = (kind.eval(t, y2) - kind.eval(t, y1)) / (y2 - y1);
                    let tol = 1e-7;
                    let lo_ok = !lo.is_finite() || q >= lo - tol;
                    let hi_ok = !hi.is_finite() || q <= hi + tol;
                    if !lo_ok || !hi_ok {
                        return Err(SimError::SlopeViolation { lo, hi, t, y1, y2, quotient: q });
                    }
                }
            }
        }
        Ok(Nonlinearity { kind, declared_sector, declared_slope })
    }

    pub fn kind(&self) -> &NonlinKind {
        &self.kind
    }

    pub fn declared_sector(&self) -> Option<(f64, f64)> {
        self.declared_sector
    }

    pub fn declared_slope(&self) -> Option<(f64, f64)> {
        self.declared_slope
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        self.kind.eval(t, y)
    }

    /// Replay this nonlinearity through the substitution recorded by sector
    /// normalization: Shift gives v = φ(t,y) − ζy, Reflect gives
    /// v = ϰy − φ(t,y). The result carries no declared bounds (they would
    /// have to be recomputed for the substituted signal).
    pub fn substituted(&self, sub: ChannelSubstitution) -> Nonlinearity {
        let kind = match sub {
            ChannelSubstitution::Identity => self.kind.clone(),
            ChannelSubstitution::Shift { zeta } => NonlinKind::Affine {
                inner: Box::new(self.kind.clone()),
                scale: 1.0,
                gain: -zeta,
            },
            ChannelSubstitution::Reflect { kappa } => NonlinKind::Affine {
                inner: Box::new(self.kind.clone()),
                scale: -1.0,
                gain: kappa,
            },
        };
        Nonlinearity { kind, declared_sector: None, declared_slope: None }
    }
}

/// Five representatives of the sector/slope class [0, ϰ], used for
/// certificate validation: the sector-edge gain, a mid gain, a saturating
/// ramp, a deadzone, and a time-switched combination.
pub fn in_class_nonlinearities(kappa: f64, horizon: f64) -> Result<Vec<Nonlinearity>, SimError> {
    let bounds = Some((0.0, kappa));
    let items = vec![
        NonlinKind::LinearGain { k: kappa },
        NonlinKind::LinearGain { k: 0.5 * kappa },
        // ϰ-sloped ramp saturating at |y| = 1 (constant beyond the end nodes)
        NonlinKind::PwLinear {
            table: vec![(-100.0, -kappa), (-1.0, -kappa), (1.0, kappa), (100.0, kappa)],
        },
        NonlinKind::Deadzone { width: 0.5, slope: kappa },
        NonlinKind::Switched {
            list: vec![
                NonlinKind::ScaledTanh { gain: kappa },
                NonlinKind::LinearGain { k: kappa },
                NonlinKind::Deadzone { width: 0.25, slope: kappa },
            ],
            switch_times: vec![horizon / 3.0, 2.0 * horizon / 3.0],
        },
    ];
    items
        .into_iter()
        .map(|kind| Nonlinearity::new(kind, bounds, bounds))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub ts: Vec<f64>,
    pub zs: Vec<Vector>,
    pub ws: Vec<Vector>,
    pub ys: Vec<Vector>,
    /// true if integration stopped early on a non-finite or exploding state
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

const BLOWUP_NORM: f64 = 1e12;

/// Classical fixed-step 4th-order Runge–Kutta for ż = Az + Bφ(t, Cz); φ is
/// applied channelwise to y = Cz. Records w and y at the grid nodes. A
/// non-finite or exploding state truncates the trajectory and sets the flag.
pub fn integrate(
    sys: &LureSystem,
    phi: &Nonlinearity,
    z0: &Vector,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    if !(dt > 0.0) || !(t_final >= dt) {
        return Err(SimError::BadInput(format!("need dt > 0 and T >= dt, got dt={dt}, T={t_final}")));
    }
    if z0.len() != sys.d() {
        return Err(SimError::BadInput(format!(
            "z0 has length {}, expected {}",
            z0.len(),
            sys.d()
        )));
    }
    let steps = (t_final / dt).round() as usize;
    let m = sys.m();
    let feedback = |t: f64, y: &Vector| Vector::from_fn(m, |i, _| phi.eval(t, y[i]));
    let deriv = |t: f64, z: &Vector| -> Vector {
        let y = &sys.c * z;
        &sys.a * z + &sys.b * feedback(t, &y)
    };
    let mut ts = Vec::with_capacity(steps + 1);
    let mut zs = Vec::with_capacity(steps + 1);
    let mut ws = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut truncated = false;
    let mut z = z0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let y = &sys.c * &z;
        ts.push(t);
        ws.push(feedback(t, &y));
        ys.push(y);
        zs.push(z.clone());
        if k == steps {
            break;
        }
        let k1 = deriv(t, &z);
        let k2 = deriv(t + 0.5 * dt, &(&z + &k1 * (0.5 * dt)));
        let k3 = deriv(t + 0.5 * dt, &(&z + &k2 * (0.5 * dt)));
        let k4 = deriv(t + dt, &(&z + &k3 * dt));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if z.iter().any(|v| !v.is_finite()) || z.norm() > BLOWUP_NORM {
            truncated = true;
            break;
        }
    }
    Ok(Trajectory { ts, zs, ws, ys, truncated })
}

/// max_t ‖z(t)‖·e^{ct}/‖z(0)‖ — at most 1 (+ tolerance) iff the decay
/// estimate ‖z(t)‖ ≤ e^{−ct}‖z(0)‖ holds along the trajectory. Returns 0
/// for a zero initial state.
pub fn check_decay(traj: &Trajectory, spec: &NormSpec, c: f64) -> Result<f64, SimError> {
    if traj.is_empty() {
        return Err(SimError::BadInput("empty trajectory".into()));
    }
    let n0 = pairings::vector_norm(&traj.zs[0], spec)?;
    if n0 == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for (t, z) in traj.ts.iter().zip(&traj.zs) {
        let r = pairings::vector_norm(z, spec)? * (c * t).exp() / n0;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// max_t ‖z₁(t) − z₂(t)‖·e^{ct}/‖z₁(0) − z₂(0)‖ over a pair of trajectories
/// on the same grid. Returns 0 for identical initial states.
pub fn check_contraction(
    tr1: &Trajectory,
    tr2: &Trajectory,
    spec: &NormSpec,
    c: f64,
) -> Result<f64, SimError> {
    if tr1.is_empty() || tr2.is_empty() {
        return Err(SimError::BadInput("empty trajectory".into()));
    }
    if tr1.len() != tr2.len()
        || tr1.ts.iter().zip(&tr2.ts).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(SimError::GridMismatch);
    }
    let d0 = pairings::vector_norm(&(&tr1.zs[0] - &tr2.zs[0]), spec)?;
    if d0 == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for k in 0..tr1.len() {
        let diff = &tr1.zs[k] - &tr2.zs[k];
        let r = pairings::vector_norm(&diff, spec)? * (c * tr1.ts[k]).exp() / d0;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// For p = 1, a step is skipped when any coordinate changes sign (or sits at
/// zero); for p = ∞, when the active index set changes. The curve norm
/// derivative formula holds for almost every t, so kinks are excluded.
fn dini_skip(spec: &NormSpec, z0: &Vector, z1: &Vector) -> bool {
    let p = spec.p();
    if p == 1.0 {
        z0.iter()
            .zip(z1.iter())
            .any(|(&a, &b)| a * b <= 0.0 && (a.abs() > 0.0 || b.abs() > 0.0))
    } else if p.is_infinite() {
        let active = |z: &Vector| -> Vec<usize> {
            let m = z.amax();
            (0..z.len()).filter(|&i| z[i].abs() >= m * (1.0 - 1e-9)).collect()
        };
        active(z0) != active(z1)
    } else {
        false
    }
}

/// Max over (non-skipped) steps of |Δ(‖z‖²)/Δt − 2⟦ż, z⟧| where ż = Az + Bw
/// from the recorded feedback — confirms the Lyapunov mechanism
/// D⁺‖z‖² = 2⟦ż, z⟧ along the trajectory, not just the endpoint bound.
pub fn dini_residual(
    traj: &Trajectory,
    sys: &LureSystem,
    spec: &NormSpec,
) -> Result<f64, SimError> {
    if traj.len() < 2 {
        return Err(SimError::BadInput("need at least two trajectory points".into()));
    }
    let mut worst: f64 = 0.0;
    for k in 0..traj.len() - 1 {
        let (z0, z1) = (&traj.zs[k], &traj.zs[k + 1]);
        let dt = traj.ts[k + 1] - traj.ts[k];
        let n0 = pairings::vector_norm(z0, spec)?;
        if n0 < 1e-12 {
            continue;
        }
        // transform to the weighted coordinates once: the skip rules concern
        // the transformed vector whose norm is being differentiated
        let v0 = spec.transform(z0)?;
        let v1 = spec.transform(z1)?;
        if dini_skip(spec, &v0, &v1) {
            continue;
        }
        let n1 = pairings::vector_norm(z1, spec)?;
        let zdot = &sys.a * z0 + &sys.b * &traj.ws[k];
        let pairing = pairings::weak_pairing(&zdot, z0, spec)?.value;
        let residual = ((n1 * n1 - n0 * n0) / dt - 2.0 * pairing).abs();
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// CSV export with columns t, z_1..z_d, w_1..w_m, y_1..y_m.
pub fn export_csv<W: Write>(traj: &Trajectory, out: &mut W) -> std::io::Result<()> {
    let d = traj.zs.first().map_or(0, |z| z.len());
    let m = traj.ws.first().map_or(0, |w| w.len());
    let mut header = String::from("t");
    for i in 1..=d {
        header.push_str(&format!(",z_{i}"));
    }
    for i in 1..=m {
        header.push_str(&format!(",w_{i}"));
    }
    for i in 1..=m {
        header.push_str(&format!(",y_{i}"));
    }
    writeln!(out, "{header}")?;
    for k in 0..traj.len() {
        let mut row = format!("{}", traj.ts[k]);
        for v in traj.zs[k].iter().chain(traj.ws[k].iter()).chain(traj.ys[k].iter()) {
            row.push_str(&format!(",{v}"));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}
