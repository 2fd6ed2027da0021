//! End-to-end tests of the `npsl` binary: worked example values, exit-code
//! semantics, report determinism, and the configuration precedence rules.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn npsl() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_npsl"));
    cmd.env_remove("NPSL_THREADS");
    cmd
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn capture(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8(out.stdout).expect("utf-8 stdout"),
        String::from_utf8(out.stderr).expect("utf-8 stderr"),
    )
}

/// Run expecting `code`; parse stdout as a JSON report.
fn report(args: &[&str], code: i32) -> Value {
    let (got, stdout, stderr) = capture(npsl().args(args));
    assert_eq!(got, code, "args {args:?}: stderr {stderr}");
    serde_json::from_str(&stdout).expect("stdout is a JSON report")
}

fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("field {key} in {v}"))
}

fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn lognorm_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_tmp(&dir, "a.json", "[[-2, 1], [3, -4]]");
    let rep = report(&["lognorm", &m, "--p", "1"], 0);
    let r = &rep["result"];
    assert_eq!(f(r, "mu"), 1.0);
    assert_eq!(f(r, "mu_plus"), 1.0);
    assert!(f(r, "limit_gap") <= 1e-4);
    assert_eq!(r["approximate"], Value::Bool(false));
}

#[test]
fn lognorm_weighted_and_approximate() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_tmp(&dir, "a.json", "[[-2, 1], [3, -4]]");
    // R = diag(2,1): RAR⁻¹ = [[-2, 2], [1.5, -4]], so μ∞ = max(0, -2.5) = 0
    let rep = report(&["lognorm", &m, "--p", "inf", "--weight", "2,1"], 0);
    assert!(f(&rep["result"], "mu").abs() <= 1e-12);
    assert_eq!(rep["result"]["weighted"], Value::Bool(true));

    let rep = report(&["lognorm", &m, "--p", "7"], 0);
    let r = &rep["result"];
    assert_eq!(r["approximate"], Value::Bool(true));
    assert!(f(r, "mu_lower").is_finite());
    assert!(r.get("mu").is_none());
}

#[test]
fn lognorm_parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_tmp(&dir, "bad.json", "[[1, 2,");
    let (code, _, stderr) = capture(npsl().args(["lognorm", &m]));
    assert_eq!(code, 2);
    assert!(stderr.contains("line"), "parse errors carry a position: {stderr}");
}

#[test]
fn slemma_reproduces_bundled_gap_examples() {
    let cases = [
        ("example1.json", 0.0, 1.0),
        ("example2a.json", 0.0, 0.5),
        ("example2b.json", 1.0, 1.25),
    ];
    for (name, alpha, beta) in cases {
        let rep = report(&["slemma", &fixture(name)], 0);
        let r = &rep["result"];
        assert!((f(r, "alpha_lower") - alpha).abs() <= 1e-9, "{name}");
        assert!((f(r, "beta") - beta).abs() <= 1e-9, "{name}");
        assert!((f(r, "gap") - (beta - alpha)).abs() <= 1e-9, "{name}");
        assert_eq!(r["alpha_exact"], Value::Bool(true));
        // the gap examples sit outside the zero-gap hypotheses; the report
        // must say so rather than stay silent
        let zg = &r["zero_gap"][0];
        assert_eq!(zg["case"], Value::String("metzler_l1".into()));
        assert_eq!(zg["applicable"], Value::Bool(false));
        assert!(!zg["reason"].as_str().unwrap().is_empty());
    }
}

#[test]
fn certify_positive2d_rate_search() {
    let dir = tempfile::tempdir().unwrap();
    let cert_path = dir.path().join("cert.json").display().to_string();
    let args = [
        "certify",
        &fixture("positive2d.json"),
        "--rate-search",
        "--save-cert",
        &cert_path,
    ];
    let rep = report(&args, 0);
    let r = &rep["result"];
    assert_eq!(r["certified"], Value::Bool(true));
    assert_eq!(r["aizerman"]["holds"], Value::Bool(true));
    let status = r["paths"]["metzler_p1"]["status"].as_str().unwrap();
    assert!(status.starts_with("certified"));
    // the bisected rate must hit the spectral value c* = (5 − √21)/2
    let c_star = (5.0 - 21f64.sqrt()) / 2.0;
    assert!((f(&r["max_rates"], "metzler_p1") - c_star).abs() <= 1e-6);
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert!(saved["status"].as_str().unwrap().starts_with("certified"));

    // identical invocations produce byte-identical reports
    let (_, first, _) = capture(npsl().args(args));
    let (_, second, _) = capture(npsl().args(args));
    assert_eq!(first, second);
}

#[test]
fn certify_critical_gain_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_tmp(
        &dir,
        "pos6.json",
        r#"{"A": [[-2, 1], [0, -3]], "B": [0, 1], "C": [1, 0], "zeta": 0, "kappa": 6}"#,
    );
    let rep = report(&["certify", &sys, "--rate-search"], 1);
    let r = &rep["result"];
    assert_eq!(r["certified"], Value::Bool(false));
    assert_eq!(r["aizerman"]["holds"], Value::Bool(false));
    for (path, entry) in r["paths"].as_object().unwrap() {
        let status = entry["status"].as_str().unwrap();
        assert!(!status.starts_with("certified"), "{path} certified at the critical gain");
    }
}

#[test]
fn certify_scalar_circle() {
    let rep = report(&["certify", &fixture("scalar1d.json")], 0);
    let r = &rep["result"];
    assert_eq!(r["certified"], Value::Bool(true));
    let circle = &r["paths"]["circle"];
    assert!(circle["status"].as_str().unwrap().starts_with("certified"));
    // the frequency sweep peaks at ω = 0 with Re C(iω − A)⁻¹B = 1
    let max_re: f64 = circle["diagnostics"]["max_re"].as_str().unwrap().parse().unwrap();
    assert!((max_re - 1.0).abs() <= 1e-9);
}

#[test]
fn validate_certificate_and_tamper_tripwire() {
    let dir = tempfile::tempdir().unwrap();
    let cert_path = dir.path().join("cert.json").display().to_string();
    report(
        &[
            "certify",
            &fixture("positive2d.json"),
            "--rate-search",
            "--save-cert",
            &cert_path,
        ],
        0,
    );

    let csv_dir = dir.path().join("csv");
    let args = [
        "validate",
        &fixture("positive2d.json"),
        &cert_path,
        "--trials",
        "4",
        "--t-final",
        "6",
        "--export-csv",
        &csv_dir.display().to_string(),
    ];
    let rep = report(&args, 0);
    let r = &rep["result"];
    assert_eq!(r["reverified"], Value::Bool(true));
    assert_eq!(r["ok"], Value::Bool(true));
    assert!(f(r, "max_decay") <= 1.001);
    assert!(f(r, "max_contraction") <= 1.001);
    // the class includes the sector-edge linear gain φ(y) = ϰy
    let phis = r["nonlinearities"].as_array().unwrap();
    assert!(phis[0].as_str().unwrap().starts_with("linear_gain(k=5"));
    assert_eq!(r["decay"].as_array().unwrap().len(), 5 * 4);
    assert_eq!(r["contraction"].as_array().unwrap().len(), 5 * 2);
    let csv = std::fs::read_to_string(csv_dir.join("phi0_trial0.csv")).unwrap();
    assert!(csv.starts_with("t,z_1,z_2,w_1,y_1\n"));
    assert_eq!(std::fs::read_dir(&csv_dir).unwrap().count(), 5 * 4);

    // inflating the rate must trip re-verification and exit nonzero
    let mut cert: Value =
        serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    cert["c"] = Value::from(5.0);
    let tampered = write_tmp(&dir, "tampered.json", &cert.to_string());
    let rep = report(&["validate", &fixture("positive2d.json"), &tampered], 1);
    assert_eq!(rep["result"]["reverified"], Value::Bool(false));

    // a certificate for a different state dimension is an input error
    let scalar_cert = dir.path().join("scalar_cert.json").display().to_string();
    report(&["certify", &fixture("scalar1d.json"), "--save-cert", &scalar_cert], 0);
    let (code, _, stderr) =
        capture(npsl().args(["validate", &fixture("positive2d.json"), &scalar_cert]));
    assert_eq!(code, 2);
    assert!(stderr.contains("mismatch"), "{stderr}");
}

#[test]
fn repro_regenerates_reference_values() {
    let rep = report(&["repro"], 0);
    let r = &rep["result"];
    assert_eq!(r["all_pass"], Value::Bool(true));
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row["pass"], Value::Bool(true), "{}", row["name"]);
    }
    assert!((f(&rows[0], "beta") - 1.0).abs() <= 1e-9);
    assert!(f(&rows[3], "max_gap") <= 1e-6);
    assert!(f(&rows[4], "max_gap") <= 1e-4);
}

#[test]
fn config_precedence_and_show_config() {
    let dir = tempfile::tempdir().unwrap();
    let job = write_tmp(&dir, "job.json", r#"{"tol": 0.01, "seed": 7, "dt": 0.002}"#);
    let rep = report(&["--job", &job, "--tol", "0.002", "--show-config"], 0);
    assert_eq!(f(&rep["defaults"], "dt"), 0.001);
    assert_eq!(f(&rep["effective"], "tol"), 0.002);
    assert_eq!(f(&rep["effective"], "dt"), 0.002);
    assert_eq!(rep["effective"]["seed"], Value::from(7));
    assert_eq!(rep["sources"]["tol"], Value::String("cli".into()));
    assert_eq!(rep["sources"]["seed"], Value::String("job".into()));
    assert_eq!(rep["sources"]["dt"], Value::String("job".into()));
    assert_eq!(rep["sources"]["trials"], Value::String("default".into()));

    let (code, stdout, _) =
        capture(npsl().args(["--show-config"]).env("NPSL_THREADS", "3"));
    assert_eq!(code, 0);
    let rep: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(rep["effective"]["threads"], Value::from(3));
    assert_eq!(rep["sources"]["threads"], Value::String("env".into()));

    let (code, _, stderr) = capture(npsl().args(["repro"]).env("NPSL_THREADS", "zero"));
    assert_eq!(code, 2);
    assert!(stderr.contains("NPSL_THREADS"));

    let bad_job = write_tmp(&dir, "bad_job.json", r#"{"bogus": 1}"#);
    let (code, _, stderr) = capture(npsl().args(["--job", &bad_job, "repro"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("bogus"), "{stderr}");
}

#[test]
fn job_file_drives_command_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let job = write_tmp(
        &dir,
        "job.json",
        &format!(r#"{{"command": "slemma", "input": "{}"}}"#, fixture("example1.json")),
    );
    let rep = report(&["--job", &job], 0);
    assert_eq!(rep["command"], Value::String("slemma".into()));
    assert!((f(&rep["result"], "beta") - 1.0).abs() <= 1e-9);
}

#[test]
fn pretty_report_is_aligned_text() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_tmp(&dir, "a.json", "[[-2, 1], [3, -4]]");
    let (code, stdout, _) = capture(npsl().args(["lognorm", &m, "--p", "1", "--pretty"]));
    assert_eq!(code, 0);
    assert!(stdout.starts_with("command = lognorm"));
    assert!(stdout.lines().any(|l| l.trim_start().starts_with("mu ") && l.contains("= 1.0")));
    assert!(!stdout.contains('{'));
}
