//! `npsl` — batch front door for the certification library: log norms,
//! S-Lemma gap reports, Lur'e certification, trajectory validation, and a
//! reproduction suite for the bundled worked examples.
//!
//! Reports are JSON on stdout (keys sorted, byte-identical across runs for
//! the same inputs and seed); `--pretty` renders the same data as aligned
//! text. Exit codes: 0 success, 1 certification/validation failure, 2 input
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use npsl::linalg;
use npsl::lure::{self, Certificate, LureError};
use npsl::pairings::{self, NormSpec};
use npsl::schema;
use npsl::simulate::{self, NonlinKind, Trajectory};
use npsl::slemma::{self, DualStatus, FormFamily};
use npsl::{Matrix, Vector};

// ---------------------------------------------------------------------------
// Errors: everything that prevents a report from being produced is an input
// error (exit 2). A report that *says* certification or validation failed is
// not an error; the command prints it and exits 1.
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

macro_rules! from_err {
    ($($ty:ty),*) => {$(
        impl From<$ty> for InputError {
            fn from(e: $ty) -> Self {
                InputError(e.to_string())
            }
        }
    )*};
}

from_err!(
    schema::SchemaError,
    lure::LureError,
    slemma::SlemmaError,
    pairings::PairingError,
    simulate::SimError,
    npsl::linalg::LinalgError,
    serde_json::Error,
    std::io::Error
);

type CmdResult = Result<(Value, bool), InputError>;

fn fail(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "npsl",
    version,
    about = "Stability and contraction certificates for Lur'e systems in weighted l^p norms"
)]
struct Cli {
    /// JSON job file supplying defaults for the flags below (and optionally
    /// the command and input paths); CLI flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    job: Option<PathBuf>,

    /// Render the report as aligned text instead of JSON
    #[arg(long, global = true)]
    pretty: bool,

    /// Print the effective configuration (defaults, overrides, sources) and exit
    #[arg(long, global = true)]
    show_config: bool,

    /// Seed for sampling oracles, random suites, and initial conditions
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Ratio tolerance: validation fails above 1 + tol
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Log norm mu_p of a matrix, with the conic variant and a limit cross-check
    Lognorm {
        /// JSON matrix file: a nested array, or an object with field "A"
        file: Option<PathBuf>,
        /// Norm exponent: 1, 2, inf, or any p > 1 (sampled lower bound)
        #[arg(long)]
        p: Option<String>,
        /// Diagonal weight entries, comma separated (e.g. "2,1")
        #[arg(long)]
        weight: Option<String>,
    },
    /// Primal/dual gap report for a constrained family of forms
    Slemma {
        /// Form family JSON: {"P": [...], "rho": [...], "p": ..., "conic": ...}
        file: Option<PathBuf>,
    },
    /// Run the certification paths on a Lur'e system
    Certify {
        /// Lur'e system JSON: {"A", "B", "C", "zeta", "kappa"}
        file: Option<PathBuf>,
        /// Norm exponents for the LP-dual and Metzler paths, comma separated
        #[arg(long)]
        p: Option<String>,
        /// Diagonal state weight for the LP-dual path, comma separated
        #[arg(long)]
        weight: Option<String>,
        /// Decay rate c to certify at (default 0: plain absolute stability)
        #[arg(long)]
        rate: Option<f64>,
        /// Bisect each path for its largest certified rate
        #[arg(long)]
        rate_search: bool,
        /// Write the strongest certificate found to this file
        #[arg(long, value_name = "FILE")]
        save_cert: Option<PathBuf>,
    },
    /// Validate a stored certificate against simulated trajectories
    Validate {
        /// Lur'e system JSON
        file: Option<PathBuf>,
        /// Certificate JSON (as written by `certify --save-cert`)
        cert: Option<PathBuf>,
        /// Simulation horizon
        #[arg(long)]
        t_final: Option<f64>,
        /// Integration step
        #[arg(long)]
        dt: Option<f64>,
        /// Initial conditions per nonlinearity
        #[arg(long)]
        trials: Option<usize>,
        /// Write each trajectory as CSV (t, z_1.., w_1.., y_1..) into this directory
        #[arg(long, value_name = "DIR")]
        export_csv: Option<PathBuf>,
    },
    /// Re-derive the bundled worked examples and the zero-gap suites
    Repro,
}

// ---------------------------------------------------------------------------
// Configuration: defaults < job file < CLI flags; NPSL_THREADS from the
// environment. Sources are tracked so --show-config can display precedence.
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Config {
    p_list: Vec<f64>,
    weight: Option<Vec<f64>>,
    rate: f64,
    rate_search: bool,
    t_final: f64,
    dt: f64,
    trials: usize,
    tol: f64,
    seed: u64,
    budget: usize,
    threads: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            p_list: vec![1.0, 2.0, f64::INFINITY],
            weight: None,
            rate: 0.0,
            rate_search: false,
            t_final: 10.0,
            dt: 1e-3,
            trials: 10,
            tol: 1e-3,
            seed: 2024,
            budget: 4000,
            threads: 1,
        }
    }
}

/// Job-file keys that are not configuration fields (they select the action).
const JOB_ACTION_KEYS: [&str; 3] = ["command", "input", "certificate"];
const JOB_CONFIG_KEYS: [&str; 10] = [
    "p", "weight", "rate", "rate_search", "t_final", "dt", "trials", "tol", "seed", "budget",
];

fn parse_p(text: &str) -> Result<f64, InputError> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>().map_err(|_| fail(format!("invalid norm exponent {t:?}")))
}

fn parse_float_list(text: &str, what: &str) -> Result<Vec<f64>, InputError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| fail(format!("invalid {what} entry {s:?}"))))
        .collect()
}

fn job_number(v: &Value, key: &str) -> Result<f64, InputError> {
    schema::value_to_f64(v, key).map_err(InputError::from)
}

fn build_config(
    cli: &Cli,
    job: Option<&Map<String, Value>>,
) -> Result<(Config, Map<String, Value>), InputError> {
    let mut cfg = Config::default();
    let mut sources: Map<String, Value> = JOB_CONFIG_KEYS
        .iter()
        .chain(std::iter::once(&"threads"))
        .map(|k| (k.to_string(), Value::String("default".into())))
        .collect();
    let set = |sources: &mut Map<String, Value>, key: &str, origin: &str| {
        sources.insert(key.to_string(), Value::String(origin.into()));
    };

    if let Some(obj) = job {
        for key in obj.keys() {
            if !JOB_CONFIG_KEYS.contains(&key.as_str())
                && !JOB_ACTION_KEYS.contains(&key.as_str())
            {
                return Err(fail(format!("unknown job-file key {key:?}")));
            }
        }
        if let Some(v) = obj.get("p") {
            let items: Vec<&Value> = match v {
                Value::Array(items) => items.iter().collect(),
                single => vec![single],
            };
            cfg.p_list = items
                .iter()
                .map(|x| job_number(x, "p"))
                .collect::<Result<_, _>>()?;
            set(&mut sources, "p", "job");
        }
        if let Some(v) = obj.get("weight") {
            if !v.is_null() {
                let w = schema::value_to_vector(v, "weight")?;
                cfg.weight = Some(w.iter().copied().collect());
                set(&mut sources, "weight", "job");
            }
        }
        if let Some(v) = obj.get("rate") {
            cfg.rate = job_number(v, "rate")?;
            set(&mut sources, "rate", "job");
        }
        if let Some(v) = obj.get("rate_search") {
            cfg.rate_search = v
                .as_bool()
                .ok_or_else(|| fail("job-file key \"rate_search\" must be a boolean"))?;
            set(&mut sources, "rate_search", "job");
        }
        if let Some(v) = obj.get("t_final") {
            cfg.t_final = job_number(v, "t_final")?;
            set(&mut sources, "t_final", "job");
        }
        if let Some(v) = obj.get("dt") {
            cfg.dt = job_number(v, "dt")?;
            set(&mut sources, "dt", "job");
        }
        if let Some(v) = obj.get("trials") {
            cfg.trials = v
                .as_u64()
                .ok_or_else(|| fail("job-file key \"trials\" must be a nonnegative integer"))?
                as usize;
            set(&mut sources, "trials", "job");
        }
        if let Some(v) = obj.get("tol") {
            cfg.tol = job_number(v, "tol")?;
            set(&mut sources, "tol", "job");
        }
        if let Some(v) = obj.get("seed") {
            cfg.seed = v
                .as_u64()
                .ok_or_else(|| fail("job-file key \"seed\" must be a nonnegative integer"))?;
            set(&mut sources, "seed", "job");
        }
        if let Some(v) = obj.get("budget") {
            cfg.budget = v
                .as_u64()
                .ok_or_else(|| fail("job-file key \"budget\" must be a nonnegative integer"))?
                as usize;
            set(&mut sources, "budget", "job");
        }
    }

    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        set(&mut sources, "seed", "cli");
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
        set(&mut sources, "tol", "cli");
    }
    match &cli.command {
        Some(Command::Lognorm { p, weight, .. }) => {
            if let Some(p) = p {
                cfg.p_list = vec![parse_p(p)?];
                set(&mut sources, "p", "cli");
            }
            if let Some(w) = weight {
                cfg.weight = Some(parse_float_list(w, "weight")?);
                set(&mut sources, "weight", "cli");
            }
        }
        Some(Command::Certify { p, weight, rate, rate_search, .. }) => {
            if let Some(p) = p {
                cfg.p_list =
                    p.split(',').map(parse_p).collect::<Result<Vec<_>, _>>()?;
                set(&mut sources, "p", "cli");
            }
            if let Some(w) = weight {
                cfg.weight = Some(parse_float_list(w, "weight")?);
                set(&mut sources, "weight", "cli");
            }
            if let Some(rate) = rate {
                cfg.rate = *rate;
                set(&mut sources, "rate", "cli");
            }
            if *rate_search {
                cfg.rate_search = true;
                set(&mut sources, "rate_search", "cli");
            }
        }
        Some(Command::Validate { t_final, dt, trials, .. }) => {
            if let Some(t) = t_final {
                cfg.t_final = *t;
                set(&mut sources, "t_final", "cli");
            }
            if let Some(h) = dt {
                cfg.dt = *h;
                set(&mut sources, "dt", "cli");
            }
            if let Some(n) = trials {
                cfg.trials = *n;
                set(&mut sources, "trials", "cli");
            }
        }
        _ => {}
    }

    if let Ok(text) = std::env::var("NPSL_THREADS") {
        cfg.threads = text
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| fail(format!("NPSL_THREADS must be a positive integer, got {text:?}")))?;
        set(&mut sources, "threads", "env");
    }

    if !(cfg.tol > 0.0) {
        return Err(fail(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    if cfg.p_list.is_empty() {
        return Err(fail("at least one norm exponent is required"));
    }
    Ok((cfg, sources))
}

fn config_to_value(cfg: &Config) -> Value {
    let mut obj = Map::new();
    obj.insert("p".into(), Value::Array(cfg.p_list.iter().map(|&p| num(p)).collect()));
    obj.insert(
        "weight".into(),
        match &cfg.weight {
            Some(w) => Value::Array(w.iter().map(|&x| num(x)).collect()),
            None => Value::Null,
        },
    );
    obj.insert("rate".into(), num(cfg.rate));
    obj.insert("rate_search".into(), Value::Bool(cfg.rate_search));
    obj.insert("t_final".into(), num(cfg.t_final));
    obj.insert("dt".into(), num(cfg.dt));
    obj.insert("trials".into(), Value::from(cfg.trials as u64));
    obj.insert("tol".into(), num(cfg.tol));
    obj.insert("seed".into(), Value::from(cfg.seed));
    obj.insert("budget".into(), Value::from(cfg.budget as u64));
    obj.insert("threads".into(), Value::from(cfg.threads as u64));
    Value::Object(obj)
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

/// Extended-real JSON encoding (infinities as "inf"/"-inf" strings).
fn num(v: f64) -> Value {
    schema::f64_to_value(v).unwrap_or_else(|_| Value::String("nan".into()))
}

fn read_file(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path)
        .map_err(|e| fail(format!("cannot read {}: {e}", path.display())))
}

fn parse_json(path: &Path, text: &str) -> Result<Value, InputError> {
    serde_json::from_str(text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else if p == p.trunc() && p.abs() < 1e15 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

fn diagonal_weight(entries: &[f64], n: usize, what: &str) -> Result<Matrix, InputError> {
    if entries.len() != n {
        return Err(fail(format!(
            "{what} weight has {} entries, expected {n}",
            entries.len()
        )));
    }
    if entries.iter().any(|&x| !(x > 0.0)) {
        return Err(fail(format!("{what} weight entries must be positive")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { 0.0 }))
}

fn obj(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

// ---------------------------------------------------------------------------
// lognorm
// ---------------------------------------------------------------------------

fn cmd_lognorm(path: &Path, cfg: &Config) -> CmdResult {
    let text = read_file(path)?;
    let v = parse_json(path, &text)?;
    let a = schema::value_to_matrix(v.get("A").unwrap_or(&v), "matrix")?;
    let n = a.nrows();
    let p = cfg.p_list[0];
    let spec = match &cfg.weight {
        Some(w) => {
            let entries = Vector::from_fn(w.len(), |i, _| w[i]);
            diagonal_weight(w, n, "matrix")?;
            NormSpec::with_diagonal_weight(p, &entries)?
        }
        None => NormSpec::new(p)?,
    };
    let exact = p == 1.0 || p == 2.0 || p.is_infinite();

    let mut result = Map::new();
    result.insert("n".into(), Value::from(n as u64));
    result.insert("p".into(), num(p));
    result.insert("weighted".into(), Value::Bool(spec.is_weighted()));
    result.insert("approximate".into(), Value::Bool(!exact));
    if exact {
        let mu = pairings::log_norm(&a, &spec)?;
        result.insert("mu".into(), num(mu));
        // independent cross-check against the limit definition (‖I+hA‖−1)/h
        let est = pairings::log_norm_limit_estimate(&a, &spec, 1e-6)?;
        result.insert("limit_estimate".into(), num(est));
        result.insert("limit_gap".into(), num((mu - est).abs()));
        if (p == 1.0 || p.is_infinite()) && (!spec.is_weighted() || spec.diagonal_weight()) {
            result.insert("mu_plus".into(), num(pairings::conic_log_norm(&a, &spec)?));
        }
    } else {
        // p outside {1, 2, inf}: only a sampled lower bound is available
        let aw = spec.similarity(&a)?;
        let lower = pairings::log_norm_sampled(&aw, p, cfg.budget.max(64), cfg.seed)?;
        result.insert("mu_lower".into(), num(lower));
    }
    Ok((Value::Object(result), true))
}

// ---------------------------------------------------------------------------
// slemma
// ---------------------------------------------------------------------------

fn dual_status_str(status: &DualStatus) -> &'static str {
    match status {
        DualStatus::Optimal => "optimal",
        DualStatus::UnboundedBelow => "unbounded_below",
        DualStatus::MaxIter => "max_iter",
    }
}

fn cmd_slemma(path: &Path, cfg: &Config) -> CmdResult {
    let text = read_file(path)?;
    let family = schema::family_from_str(&text)
        .map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let primal = slemma::primal_oracle(&family, cfg.budget)?;
    let dual = slemma::solve_dual(&family)?;
    let gap = dual.beta - primal.alpha_lower;

    // zero-gap special cases: attempted whenever the norm matches, with
    // hypothesis violations reported rather than silently skipped
    let mut zero_gap = Vec::new();
    let p = family.spec.p();
    if p == 1.0 {
        zero_gap.push(match slemma::metzler_zero_gap(&family) {
            Ok((alpha, beta, _tau)) => obj(vec![
                ("case", Value::String("metzler_l1".into())),
                ("alpha", num(alpha)),
                ("beta", num(beta)),
                ("gap", num((alpha - beta).abs())),
                ("verified", Value::Bool((alpha - beta).abs() <= 1e-6)),
            ]),
            Err(e) => obj(vec![
                ("case", Value::String("metzler_l1".into())),
                ("applicable", Value::Bool(false)),
                ("reason", Value::String(e.to_string())),
            ]),
        });
    }
    if p == 2.0 && family.s() == 1 {
        zero_gap.push(match slemma::yakubovich_zero_gap(&family) {
            Ok(out) => obj(vec![
                ("case", Value::String("yakubovich_l2".into())),
                ("alpha", num(out.alpha)),
                ("beta", num(out.beta)),
                ("tau_star", num(out.tau_star)),
                ("complementarity_residual", num(out.complementarity_residual)),
                ("verified", Value::Bool((out.alpha - out.beta).abs() <= 1e-6)),
            ]),
            Err(e) => obj(vec![
                ("case", Value::String("yakubovich_l2".into())),
                ("applicable", Value::Bool(false)),
                ("reason", Value::String(e.to_string())),
            ]),
        });
    }
    if zero_gap.is_empty() {
        zero_gap.push(obj(vec![
            ("case", Value::String("none".into())),
            (
                "reason",
                Value::String(
                    "zero-gap cases cover p = 1 (Metzler) and p = 2 with one constraint \
                     (Yakubovich)"
                        .into(),
                ),
            ),
        ]));
    }

    let result = obj(vec![
        ("n", Value::from(family.n() as u64)),
        ("s", Value::from(family.s() as u64)),
        ("p", num(p)),
        ("conic", Value::Bool(family.conic)),
        ("alpha_lower", num(primal.alpha_lower)),
        ("alpha_exact", Value::Bool(primal.exact)),
        ("beta", num(dual.beta)),
        ("dual_status", Value::String(dual_status_str(&dual.status).into())),
        ("dual_iterations", Value::from(dual.iterations as u64)),
        ("tau", Value::Array(dual.tau.iter().map(|&t| num(t)).collect())),
        ("gap", num(gap)),
        ("zero_gap", Value::Array(zero_gap)),
    ]);
    Ok((result, true))
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

/// Largest rate at which `certified_at` holds, by doubling then bisection.
/// Returns None when even rate 0 is not certified.
fn max_rate_search(
    mut certified_at: impl FnMut(f64) -> Result<bool, LureError>,
) -> Result<Option<f64>, LureError> {
    if !certified_at(0.0)? {
        return Ok(None);
    }
    let mut hi = 1e-3;
    while certified_at(hi)? {
        hi *= 2.0;
        if hi > 1e9 {
            return Ok(Some(hi));
        }
    }
    let mut lo = if hi > 1e-3 { hi / 2.0 } else { 0.0 };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if certified_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

struct PathCollector {
    paths: Map<String, Value>,
    max_rates: Map<String, Value>,
    best: Option<Certificate>,
    any_certified: bool,
}

impl PathCollector {
    fn new() -> Self {
        PathCollector {
            paths: Map::new(),
            max_rates: Map::new(),
            best: None,
            any_certified: false,
        }
    }

    /// Record one path outcome; library errors (unsupported p, channel shape)
    /// become refusal-style entries so the report stays complete.
    fn record(
        &mut self,
        key: &str,
        outcome: Result<Certificate, LureError>,
    ) -> Result<(), InputError> {
        let entry = match outcome {
            Ok(cert) => {
                if cert.is_certified() {
                    self.any_certified = true;
                    let better = self.best.as_ref().map_or(true, |b| cert.c > b.c);
                    if better {
                        self.best = Some(cert.clone());
                    }
                }
                schema::certificate_to_value(&cert)?
            }
            Err(e) => obj(vec![
                ("status", Value::String("error".into())),
                ("reason", Value::String(e.to_string())),
            ]),
        };
        self.paths.insert(key.to_string(), entry);
        Ok(())
    }
}

fn cmd_certify(path: &Path, cfg: &Config, save_cert: Option<&Path>) -> CmdResult {
    let text = read_file(path)?;
    let sys = schema::system_from_str(&text)
        .map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let (d, m) = (sys.d(), sys.m());
    let weight = match &cfg.weight {
        Some(w) => Some(diagonal_weight(w, d, "state")?),
        None => None,
    };

    let mut col = PathCollector::new();
    for &p in &cfg.p_list {
        let label = p_label(p);
        let lp_key = format!("lp_dual_p{label}");
        if cfg.rate_search {
            match lure::max_certified_rate(&sys, p, weight.as_ref()) {
                Ok((c, cert)) => {
                    if cert.is_certified() {
                        col.max_rates.insert(lp_key.clone(), num(c));
                    }
                    col.record(&lp_key, Ok(cert))?;
                }
                Err(e) => col.record(&lp_key, Err(e))?,
            }
        } else {
            col.record(&lp_key, lure::certify_lp_dual(&sys, p, weight.as_ref(), cfg.rate))?;
        }

        let mz_key = format!("metzler_p{label}");
        if cfg.rate_search {
            let searched = max_rate_search(|c| {
                lure::metzler_path(&sys, p, c).map(|cert| cert.is_certified())
            });
            match searched {
                Ok(Some(c)) => {
                    col.max_rates.insert(mz_key.clone(), num(c));
                    col.record(&mz_key, lure::metzler_path(&sys, p, c))?;
                }
                Ok(None) => col.record(&mz_key, lure::metzler_path(&sys, p, 0.0))?,
                Err(e) => col.record(&mz_key, Err(e))?,
            }
        } else {
            col.record(&mz_key, lure::metzler_path(&sys, p, cfg.rate))?;
        }
    }

    if cfg.rate_search {
        let searched =
            max_rate_search(|c| lure::certify_l2_schur(&sys, c).map(|cert| cert.is_certified()));
        match searched {
            Ok(Some(c)) => {
                col.max_rates.insert("l2_schur".into(), num(c));
                col.record("l2_schur", lure::certify_l2_schur(&sys, c))?;
            }
            Ok(None) => col.record("l2_schur", lure::certify_l2_schur(&sys, 0.0))?,
            Err(e) => col.record("l2_schur", Err(e))?,
        }
    } else {
        col.record("l2_schur", lure::certify_l2_schur(&sys, cfg.rate))?;
    }
    col.record("circle", lure::circle_halfplane(&sys))?;

    let aizerman = if m == 1 && sys.sector_lo[0].is_finite() && sys.sector_hi[0].is_finite() {
        obj(vec![
            ("grid_size", Value::from(200u64)),
            ("holds", Value::Bool(lure::aizerman_scan(&sys, 200)?)),
        ])
    } else {
        obj(vec![
            ("holds", Value::Null),
            (
                "reason",
                Value::String(
                    "the scan needs a single channel with finite sector bounds".into(),
                ),
            ),
        ])
    };

    let mut result = Map::new();
    result.insert("d".into(), Value::from(d as u64));
    result.insert("m".into(), Value::from(m as u64));
    result.insert("rate".into(), num(cfg.rate));
    result.insert("rate_search".into(), Value::Bool(cfg.rate_search));
    result.insert("paths".into(), Value::Object(col.paths));
    if cfg.rate_search {
        result.insert("max_rates".into(), Value::Object(col.max_rates));
    }
    result.insert("aizerman".into(), aizerman);
    result.insert("certified".into(), Value::Bool(col.any_certified));
    if let Some(out) = save_cert {
        match &col.best {
            Some(cert) => {
                let encoded = serde_json::to_string(&schema::certificate_to_value(cert)?)
                    .map_err(InputError::from)?;
                std::fs::write(out, encoded + "\n")
                    .map_err(|e| fail(format!("cannot write {}: {e}", out.display())))?;
                result.insert(
                    "saved_certificate".into(),
                    Value::String(out.display().to_string()),
                );
            }
            None => {
                result.insert("saved_certificate".into(), Value::Null);
            }
        }
    }
    Ok((Value::Object(result), col.any_certified))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn kind_label(kind: &NonlinKind) -> String {
    match kind {
        NonlinKind::LinearGain { k } => format!("linear_gain(k={k:?})"),
        NonlinKind::Saturation { level } => format!("saturation(level={level:?})"),
        NonlinKind::Deadzone { width, slope } => {
            format!("deadzone(width={width:?}, slope={slope:?})")
        }
        NonlinKind::ScaledTanh { gain } => format!("scaled_tanh(gain={gain:?})"),
        NonlinKind::PwLinear { table } => format!("pw_linear({} nodes)", table.len()),
        NonlinKind::Switched { list, .. } => format!("switched({} modes)", list.len()),
        NonlinKind::Affine { inner, scale, gain } => {
            format!("affine({}, scale={scale:?}, gain={gain:?})", kind_label(inner))
        }
    }
}

fn cmd_validate(
    sys_path: &Path,
    cert_path: &Path,
    cfg: &Config,
    export_csv: Option<&Path>,
) -> CmdResult {
    let sys = schema::system_from_str(&read_file(sys_path)?)
        .map_err(|e| fail(format!("{}: {e}", sys_path.display())))?;
    let cert = schema::certificate_from_str(&read_file(cert_path)?)
        .map_err(|e| fail(format!("{}: {e}", cert_path.display())))?;
    let d = sys.d();
    let spec = cert
        .state_norm_spec(d)
        .map_err(|e| fail(format!("certificate/system mismatch: {e}")))?;

    let mut result = Map::new();
    result.insert("method".into(), Value::String(cert.method.as_str().into()));
    result.insert("p".into(), num(cert.p));
    result.insert("c".into(), num(cert.c));
    if !cert.is_certified() {
        result.insert("ok".into(), Value::Bool(false));
        result.insert(
            "reason".into(),
            Value::String(format!(
                "certificate status is \"{}\": nothing to validate",
                cert.status.as_str()
            )),
        );
        return Ok((Value::Object(result), false));
    }
    let reverified = cert
        .reverify(&sys)
        .map_err(|e| fail(format!("certificate/system mismatch: {e}")))?;
    result.insert("reverified".into(), Value::Bool(reverified));
    if !reverified {
        result.insert("ok".into(), Value::Bool(false));
        result.insert(
            "reason".into(),
            Value::String(
                "stored certificate fails re-verification against this system".into(),
            ),
        );
        return Ok((Value::Object(result), false));
    }

    let kappa = sys.sector_hi[0];
    if !kappa.is_finite() {
        return Err(fail(
            "the built-in validation class needs a finite upper sector bound",
        ));
    }
    let phis = simulate::in_class_nonlinearities(kappa, cfg.t_final)?;
    let labels: Vec<Value> =
        phis.iter().map(|phi| Value::String(kind_label(phi.kind()))).collect();

    if let Some(dir) = export_csv {
        std::fs::create_dir_all(dir)
            .map_err(|e| fail(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut decay_rows = Vec::new();
    let mut contraction_rows = Vec::new();
    let mut max_decay = 0.0f64;
    let mut max_contraction = 0.0f64;
    let mut truncated = 0usize;
    for (phi_idx, phi) in phis.iter().enumerate() {
        let label = kind_label(phi.kind());
        let mut prev: Option<Trajectory> = None;
        for trial in 0..cfg.trials {
            let z0 = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let tr = simulate::integrate(&sys, phi, &z0, cfg.t_final, cfg.dt)?;
            if let Some(dir) = export_csv {
                let path = dir.join(format!("phi{phi_idx}_trial{trial}.csv"));
                let mut out = std::fs::File::create(&path)
                    .map_err(|e| fail(format!("cannot write {}: {e}", path.display())))?;
                simulate::export_csv(&tr, &mut out)?;
            }
            if tr.truncated {
                truncated += 1;
                decay_rows.push(obj(vec![
                    ("phi", Value::String(label.clone())),
                    ("trial", Value::from(trial as u64)),
                    ("truncated", Value::Bool(true)),
                ]));
                prev = None;
                continue;
            }
            let ratio = simulate::check_decay(&tr, &spec, cert.c)?;
            max_decay = max_decay.max(ratio);
            decay_rows.push(obj(vec![
                ("phi", Value::String(label.clone())),
                ("trial", Value::from(trial as u64)),
                ("ratio", num(ratio)),
            ]));
            if trial % 2 == 0 {
                prev = Some(tr);
            } else if let Some(first) = prev.take() {
                let ratio = simulate::check_contraction(&first, &tr, &spec, cert.c)?;
                max_contraction = max_contraction.max(ratio);
                contraction_rows.push(obj(vec![
                    ("phi", Value::String(label.clone())),
                    ("trial_pair", Value::String(format!("{}-{}", trial - 1, trial))),
                    ("ratio", num(ratio)),
                ]));
            }
        }
    }

    let threshold = 1.0 + cfg.tol;
    let ok = truncated == 0 && max_decay <= threshold && max_contraction <= threshold;
    result.insert("nonlinearities".into(), Value::Array(labels));
    result.insert("trials".into(), Value::from(cfg.trials as u64));
    result.insert("decay".into(), Value::Array(decay_rows));
    result.insert("contraction".into(), Value::Array(contraction_rows));
    result.insert("max_decay".into(), num(max_decay));
    result.insert("max_contraction".into(), num(max_contraction));
    result.insert("truncated".into(), Value::from(truncated as u64));
    result.insert("threshold".into(), num(threshold));
    result.insert("ok".into(), Value::Bool(ok));
    Ok((Value::Object(result), ok))
}

// ---------------------------------------------------------------------------
// repro
// ---------------------------------------------------------------------------

fn mat2(rows: [[f64; 2]; 2]) -> Matrix {
    Matrix::from_fn(2, 2, |i, j| rows[i][j])
}

/// The three bundled gap examples: (name, P0, P1, rho, alpha_ref, beta_ref).
fn gap_examples() -> Vec<(&'static str, Matrix, Matrix, f64, f64, f64)> {
    vec![
        (
            "example 1",
            mat2([[1.0, 1.0], [0.0, 0.0]]),
            mat2([[0.0, 0.0], [0.0, -1.0]]),
            -1.0,
            0.0,
            1.0,
        ),
        (
            "example 2a",
            mat2([[1.0, 0.0], [-1.0, 0.0]]),
            mat2([[0.0, 0.0], [-1.0, 0.0]]),
            -0.5,
            0.0,
            0.5,
        ),
        (
            "example 2b",
            mat2([[1.0, 0.0], [1.0, 0.0]]),
            mat2([[0.0, 0.0], [1.0, 0.0]]),
            0.25,
            1.0,
            1.25,
        ),
    ]
}

fn random_metzler_family(rng: &mut ChaCha8Rng, n: usize, s: usize) -> FormFamily {
    let mut p0 = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..2.0));
    for i in 0..n {
        p0[(i, i)] = rng.random_range(-3.0..1.0);
    }
    let mut mats = vec![p0];
    for _ in 0..s {
        let mut pj = Matrix::from_fn(n, n, |_, _| -rng.random_range(0.0..1.5));
        for i in 0..n {
            pj[(i, i)] = rng.random_range(-1.0..1.0);
        }
        mats.push(pj);
    }
    // ρ above the barycenter values keeps the constraint interior nonempty
    let x = Vector::from_element(n, 1.0 / n as f64);
    let rho = Vector::from_fn(s, |j, _| {
        (&mats[j + 1] * &x).iter().sum::<f64>() + rng.random_range(0.05..0.6)
    });
    FormFamily::new(mats, rho, NormSpec::l1(), false).expect("generator produces valid families")
}

fn cmd_repro(cfg: &Config) -> CmdResult {
    let mut rows = Vec::new();
    let mut all_pass = true;

    for (name, p0, p1, rho, alpha_ref, beta_ref) in gap_examples() {
        let family = FormFamily::new(
            vec![p0, p1],
            Vector::from_element(1, rho),
            NormSpec::l1(),
            true,
        )
        .expect("bundled example is a valid family");
        let primal = slemma::primal_oracle(&family, cfg.budget)?;
        let dual = slemma::solve_dual(&family)?;
        let pass = primal.exact
            && (primal.alpha_lower - alpha_ref).abs() <= 1e-9
            && (dual.beta - beta_ref).abs() <= 1e-9;
        all_pass &= pass;
        rows.push(obj(vec![
            ("name", Value::String(name.into())),
            ("alpha", num(primal.alpha_lower)),
            ("alpha_ref", num(alpha_ref)),
            ("beta", num(dual.beta)),
            ("beta_ref", num(beta_ref)),
            ("gap", num(dual.beta - primal.alpha_lower)),
            ("pass", Value::Bool(pass)),
        ]));
    }

    // Metzler ℓ¹ zero-gap suite
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d7a31);
        let families = 40usize;
        let mut max_gap = 0.0f64;
        let mut errors = 0usize;
        for _ in 0..families {
            let n = rng.random_range(2..=4);
            let s = rng.random_range(1..=2);
            let family = random_metzler_family(&mut rng, n, s);
            match slemma::metzler_zero_gap(&family) {
                Ok((alpha, beta, _)) => max_gap = max_gap.max((alpha - beta).abs()),
                Err(_) => errors += 1,
            }
        }
        let pass = errors == 0 && max_gap <= 1e-6;
        all_pass &= pass;
        rows.push(obj(vec![
            ("name", Value::String("metzler l1 zero-gap suite".into())),
            ("families", Value::from(families as u64)),
            ("errors", Value::from(errors as u64)),
            ("max_gap", num(max_gap)),
            ("tol", num(1e-6)),
            ("pass", Value::Bool(pass)),
        ]));
    }

    // ℓ² single-constraint zero-gap suite, cross-checked by the primal oracle
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6c3232);
        let families = 25usize;
        let mut max_gap = 0.0f64;
        let mut errors = 0usize;
        let mut count = 0usize;
        while count < families {
            let n = rng.random_range(2..=4);
            let p0 = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.5..1.5));
            let p1 = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.5..1.5));
            let rho = rng.random_range(-0.5..1.0);
            let q1s = linalg::symmetric_part(&p1)?;
            let evs = linalg::eig_sym(&q1s)?.0;
            // require a clear Slater margin so the zero-gap theorem applies
            if evs[n - 1] - rho >= -1e-3 {
                continue;
            }
            count += 1;
            let family = FormFamily::new(
                vec![p0, p1],
                Vector::from_element(1, rho),
                NormSpec::l2(),
                false,
            )
            .expect("generator produces valid families");
            match slemma::yakubovich_zero_gap(&family) {
                Ok(out) => {
                    let oracle = slemma::primal_oracle(&family, 6000)?;
                    max_gap = max_gap
                        .max((oracle.alpha_lower - out.beta).abs())
                        .max((out.alpha - out.beta).abs());
                }
                Err(_) => errors += 1,
            }
        }
        let pass = errors == 0 && max_gap <= 1e-4;
        all_pass &= pass;
        rows.push(obj(vec![
            ("name", Value::String("l2 zero-gap suite".into())),
            ("families", Value::from(families as u64)),
            ("errors", Value::from(errors as u64)),
            ("max_gap", num(max_gap)),
            ("tol", num(1e-4)),
            ("pass", Value::Bool(pass)),
        ]));
    }

    let result = obj(vec![
        ("rows", Value::Array(rows)),
        ("all_pass", Value::Bool(all_pass)),
    ]);
    Ok((result, all_pass))
}

// ---------------------------------------------------------------------------
// Pretty rendering: the same report data as aligned text. Scalars and flat
// arrays print as `key = value` columns; arrays of flat objects print as
// tables; anything deeper falls back to compact JSON.
// ---------------------------------------------------------------------------

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_flat_object(v: &Value) -> bool {
    v.as_object().is_some_and(|m| m.values().all(is_scalar))
}

fn render_table(items: &[Value], indent: usize, out: &mut String) {
    let mut columns: Vec<String> = Vec::new();
    for item in items {
        for key in item.as_object().expect("table rows are objects").keys() {
            if !columns.contains(key) {
                columns.push(key.clone());
            }
        }
    }
    columns.sort();
    let cell = |item: &Value, col: &str| -> String {
        item.get(col).map(scalar_text).unwrap_or_default()
    };
    let widths: Vec<usize> = columns
        .iter()
        .map(|col| items.iter().map(|it| cell(it, col).len()).max().unwrap_or(0).max(col.len()))
        .collect();
    let pad = " ".repeat(indent);
    let _ = write!(out, "{pad}");
    for (col, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "{col:<w$}  ");
    }
    let _ = writeln!(out);
    for item in items {
        let _ = write!(out, "{pad}");
        for (col, w) in columns.iter().zip(&widths) {
            let _ = write!(out, "{:<w$}  ", cell(item, col));
        }
        let _ = writeln!(out);
    }
}

fn render_map(map: &Map<String, Value>, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    let width = map
        .iter()
        .filter(|(_, v)| !matches!(v, Value::Object(_)))
        .map(|(k, _)| k.len())
        .max()
        .unwrap_or(0);
    for (key, value) in map {
        match value {
            Value::Object(inner) => {
                let _ = writeln!(out, "{pad}{key}:");
                render_map(inner, indent + 2, out);
            }
            Value::Array(items) if !items.is_empty() && items.iter().all(is_flat_object) => {
                let _ = writeln!(out, "{pad}{key}:");
                render_table(items, indent + 2, out);
            }
            Value::Array(items) if items.iter().all(is_scalar) => {
                let joined =
                    items.iter().map(scalar_text).collect::<Vec<_>>().join(", ");
                let _ = writeln!(out, "{pad}{key:<width$} = [{joined}]");
            }
            Value::Array(_) => {
                let _ = writeln!(out, "{pad}{key:<width$} = {value}");
            }
            scalar => {
                let _ = writeln!(out, "{pad}{key:<width$} = {}", scalar_text(scalar));
            }
        }
    }
}

fn render_pretty(report: &Value) -> String {
    let mut out = String::new();
    match report {
        Value::Object(map) => render_map(map, 0, &mut out),
        other => {
            let _ = writeln!(out, "{}", scalar_text(other));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

enum Action {
    Lognorm(PathBuf),
    Slemma(PathBuf),
    Certify(PathBuf, Option<PathBuf>),
    Validate(PathBuf, PathBuf, Option<PathBuf>),
    Repro,
}

impl Action {
    fn name(&self) -> &'static str {
        match self {
            Action::Lognorm(_) => "lognorm",
            Action::Slemma(_) => "slemma",
            Action::Certify(..) => "certify",
            Action::Validate(..) => "validate",
            Action::Repro => "repro",
        }
    }
}

fn job_path(job: Option<&Map<String, Value>>, key: &str) -> Option<PathBuf> {
    job.and_then(|m| m.get(key)).and_then(Value::as_str).map(PathBuf::from)
}

/// Resolve the action: an explicit subcommand wins; otherwise the job file
/// must name the command and its input files.
fn resolve_action(cli: Cli, job: Option<&Map<String, Value>>) -> Result<Action, InputError> {
    let input = |file: Option<PathBuf>| -> Result<PathBuf, InputError> {
        file.or_else(|| job_path(job, "input"))
            .ok_or_else(|| fail("no input file given (positional argument or job-file \"input\")"))
    };
    match cli.command {
        Some(Command::Lognorm { file, .. }) => Ok(Action::Lognorm(input(file)?)),
        Some(Command::Slemma { file }) => Ok(Action::Slemma(input(file)?)),
        Some(Command::Certify { file, save_cert, .. }) => {
            Ok(Action::Certify(input(file)?, save_cert))
        }
        Some(Command::Validate { file, cert, export_csv, .. }) => {
            let cert = cert
                .or_else(|| job_path(job, "certificate"))
                .ok_or_else(|| {
                    fail("no certificate file given (second positional argument or job-file \
                          \"certificate\")")
                })?;
            Ok(Action::Validate(input(file)?, cert, export_csv))
        }
        Some(Command::Repro) => Ok(Action::Repro),
        None => {
            let name = job
                .and_then(|m| m.get("command"))
                .and_then(Value::as_str)
                .ok_or_else(|| fail("no command given (subcommand or job-file \"command\")"))?;
            match name {
                "lognorm" => Ok(Action::Lognorm(input(None)?)),
                "slemma" => Ok(Action::Slemma(input(None)?)),
                "certify" => Ok(Action::Certify(input(None)?, None)),
                "validate" => {
                    let cert = job_path(job, "certificate").ok_or_else(|| {
                        fail("job-file command \"validate\" needs a \"certificate\" path")
                    })?;
                    Ok(Action::Validate(input(None)?, cert, None))
                }
                "repro" => Ok(Action::Repro),
                other => Err(fail(format!("unknown job-file command {other:?}"))),
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool, InputError> {
    let job_value = match &cli.job {
        Some(path) => {
            let text = read_file(path)?;
            let v = parse_json(path, &text)?;
            match v {
                Value::Object(map) => Some(map),
                _ => return Err(fail(format!("{}: job file must be a JSON object", path.display()))),
            }
        }
        None => None,
    };
    let (cfg, sources) = build_config(&cli, job_value.as_ref())?;
    let pretty = cli.pretty;

    if cli.show_config {
        let report = obj(vec![
            ("command", Value::String("show-config".into())),
            ("defaults", config_to_value(&Config::default())),
            ("effective", config_to_value(&cfg)),
            ("sources", Value::Object(sources)),
        ]);
        emit(&report, pretty);
        return Ok(true);
    }

    let action = resolve_action(cli, job_value.as_ref())?;
    let name = action.name();
    let (inputs, outcome) = match &action {
        Action::Lognorm(file) => {
            (vec![("input", file.clone())], cmd_lognorm(file, &cfg)?)
        }
        Action::Slemma(file) => (vec![("input", file.clone())], cmd_slemma(file, &cfg)?),
        Action::Certify(file, save_cert) => (
            vec![("input", file.clone())],
            cmd_certify(file, &cfg, save_cert.as_deref())?,
        ),
        Action::Validate(file, cert, export_csv) => (
            vec![("input", file.clone()), ("certificate_input", cert.clone())],
            cmd_validate(file, cert, &cfg, export_csv.as_deref())?,
        ),
        Action::Repro => (Vec::new(), cmd_repro(&cfg)?),
    };
    let (result, ok) = outcome;

    let mut report = Map::new();
    report.insert("command".into(), Value::String(name.into()));
    for (key, path) in inputs {
        report.insert(key.into(), Value::String(path.display().to_string()));
    }
    report.insert("config".into(), config_to_value(&cfg));
    report.insert("result".into(), result);
    emit(&Value::Object(report), pretty);
    Ok(ok)
}

fn emit(report: &Value, pretty: bool) {
    if pretty {
        print!("{}", render_pretty(report));
    } else {
        println!("{}", serde_json::to_string(report).expect("reports contain no non-string keys"));
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
