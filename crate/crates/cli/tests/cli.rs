use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn epicheck(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_epicheck"));
    cmd.args(args)
        .env_remove("EPICHECK_TOL")
        .env_remove("EPICHECK_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PUBLISHED: &str = r#"{
  "label": "published",
  "n": 2,
  "sigma_x": [[200, 100], [100, 51]],
  "sigma_z": [[200, 0], [0, 1]],
  "a_sqrt": [[0.5, 0.25], [0.25, 0.85]]
}"#;

const DIAGONAL: &str = r#"{
  "n": 2,
  "sigma_x": [[200, 100], [100, 51]],
  "sigma_z": [[200, 0], [0, 1]],
  "a": [[0.25, 0], [0, 0.81]]
}"#;

fn f64_at(v: &Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_f64().unwrap_or_else(|| panic!("{path:?} = {cur}"))
}

#[test]
fn reproduce_succeeds_with_schema() {
    let r = epicheck(&["reproduce", "--json"], &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v = r.json();
    for key in [
        "tool",
        "version",
        "command",
        "input_digest",
        "timestamp",
        "tol",
        "warnings",
        "body",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["command"], "reproduce");
    assert_eq!(v["input_digest"].as_str().unwrap().len(), 64);
    assert_eq!(v["body"]["all_match"], true);
    assert_eq!(v["body"]["report"]["violated"], true);
    assert_eq!(v["body"]["commutes"], false);
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let r = epicheck(&["reproduce", "--json"], &[]);
    let line = r
        .stdout
        .lines()
        .find(|l| l.contains("\"lhs_over_2pie\""))
        .unwrap();
    let number = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = number
        .trim_start_matches('-')
        .split('e')
        .next()
        .unwrap()
        .replace('.', "");
    assert_eq!(mantissa.len(), 17, "{number}");
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let published = write(&dir, "p.json", PUBLISHED);
    let r = epicheck(&["check", s(&published), "--json"], &[]);
    assert_eq!(r.code, 3);
    let v = r.json();
    assert_eq!(v["body"]["report"]["violated"], true);
    assert_eq!(v["body"]["commutes"], false);
    assert!(v["body"].get("note").is_none());

    let diagonal = write(&dir, "d.json", DIAGONAL);
    let r = epicheck(&["check", s(&diagonal), "--json"], &[]);
    assert_eq!(r.code, 0);
    let v = r.json();
    assert_eq!(v["body"]["commutes"], true);
    assert!(v["body"]["note"].as_str().unwrap().contains("theorem"));
}

#[test]
fn check_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let asym = write(
        &dir,
        "asym.json",
        &PUBLISHED.replace("[[200, 100], [100, 51]]", "[[200, 100.5], [100, 51]]"),
    );
    let r = epicheck(&["check", s(&asym)], &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("sigma_x"), "{}", r.stderr);

    let slight = write(
        &dir,
        "slight.json",
        &PUBLISHED.replace("[[200, 100], [100, 51]]", "[[200, 100.00001], [100, 51]]"),
    );
    let r = epicheck(&["check", s(&slight)], &[]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("warning"), "{}", r.stderr);

    let broken = write(
        &dir,
        "broken.json",
        "{\n  \"n\": 2,\n  \"sigma_x\": [[1, 0], [0, 1]\n}",
    );
    let r = epicheck(&["check", s(&broken)], &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line"), "{}", r.stderr);

    let not_below = write(&dir, "big.json", &DIAGONAL.replace("0.81", "1.5"));
    assert_eq!(epicheck(&["check", s(&not_below)], &[]).code, 2);

    let missing = dir.path().join("nope.json");
    assert_eq!(epicheck(&["check", s(&missing)], &[]).code, 2);
    assert_eq!(epicheck(&["check"], &[]).code, 2);
}

#[test]
fn check_csv() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PUBLISHED);
    let r = epicheck(&["check", s(&p), "--csv"], &[]);
    assert_eq!(r.code, 3);
    let mut rdr = csv::Reader::from_reader(r.stdout.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |name: &str| {
        row.get(headers.iter().position(|h| h == name).unwrap())
            .unwrap()
            .to_string()
    };
    assert_eq!(get("violated"), "true");
    assert_eq!(get("label"), "published");
    assert!(get("gap").parse::<f64>().unwrap() < 0.0);
}

#[test]
fn gamma_path_rows() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PUBLISHED);
    let v = epicheck(&["gamma-path", s(&p), "--gammas", "0,0.5", "--json"], &[]).json();
    let rows = v["body"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for e in rows[0]["eigenvalues"].as_array().unwrap() {
        assert_eq!(e["re"].as_f64(), Some(0.0));
    }
    assert_eq!(rows[0]["amgm_holds"], true);
    assert_eq!(rows[1]["amgm_holds"], false);

    let d = write(&dir, "d.json", DIAGONAL);
    let v = epicheck(&["gamma-path", s(&d), "--json"], &[]).json();
    let rows = v["body"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r["amgm_holds"] == true));

    let r = epicheck(&["gamma-path", s(&p), "--gammas", "0:1:0.25"], &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("[0, 1)"), "{}", r.stderr);
}

fn body_without_timestamp(v: &Value) -> Value {
    let mut v = v.clone();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn search_round_trips_through_check() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("found.json");
    let r = epicheck(
        &[
            "search",
            "--n",
            "2",
            "--seed",
            "42",
            "--out",
            s(&out),
            "--json",
        ],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["seed"].as_u64(), Some(42));
    let gap = f64_at(&v, &["body", "best_gap"]);

    let c = epicheck(&["check", s(&out), "--json"], &[]);
    assert_eq!(c.code, 3);
    let cv = c.json();
    let again = f64_at(&cv, &["body", "report", "gap"]);
    let scale =
        f64_at(&cv, &["body", "report", "lhs"]).max(f64_at(&cv, &["body", "report", "rhs"]));
    assert!((gap - again).abs() <= 1e-9 * gap.abs(), "{gap} vs {again}");
    assert!(again < -1e-6 * scale);
}

#[test]
fn search_is_thread_count_independent() {
    let args = [
        "search",
        "--n",
        "2",
        "--restarts",
        "8",
        "--iters",
        "400",
        "--seed",
        "7",
        "--json",
    ];
    let serial = epicheck(&args, &[("EPICHECK_THREADS", "1")]);
    let parallel = epicheck(
        &[&args[..], &["--threads", "4"]].concat(),
        &[("EPICHECK_THREADS", "1")],
    );
    assert_eq!(serial.code, parallel.code);
    assert_eq!(
        body_without_timestamp(&serial.json()),
        body_without_timestamp(&parallel.json())
    );
}

#[test]
fn search_negative_cases() {
    let r = epicheck(
        &["search", "--n", "1", "--restarts", "4", "--iters", "300"],
        &[],
    );
    assert_eq!(r.code, 1);
    let r = epicheck(
        &[
            "search",
            "--n",
            "2",
            "--commuting-only",
            "--restarts",
            "8",
            "--iters",
            "500",
        ],
        &[],
    );
    assert_eq!(r.code, 1);
    assert_eq!(epicheck(&["search", "--restarts", "0"], &[]).code, 2);
    assert_eq!(epicheck(&["search", "--eig-range", "5:1"], &[]).code, 2);
}

#[test]
fn tolerance_from_environment() {
    assert_eq!(epicheck(&["reproduce"], &[("EPICHECK_TOL", "-1")]).code, 2);
    assert_eq!(
        epicheck(&["reproduce", "--tol", "1e-9"], &[("EPICHECK_TOL", "-1")]).code,
        0
    );
    let v = epicheck(&["reproduce", "--json"], &[("EPICHECK_TOL", "1e-7")]).json();
    assert_eq!(v["tol"].as_f64(), Some(1e-7));
    assert_eq!(
        epicheck(&["reproduce"], &[("EPICHECK_THREADS", "0")]).code,
        2
    );
}

#[test]
fn reruns_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PUBLISHED);
    let a = epicheck(&["gamma-path", s(&p), "--json"], &[]).json();
    let b = epicheck(&["gamma-path", s(&p), "--json"], &[]).json();
    assert_eq!(body_without_timestamp(&a), body_without_timestamp(&b));
}

fn mc_files(dir: &TempDir, a: &str) -> [PathBuf; 3] {
    [
        write(
            dir,
            "mix.json",
            r#"{"components": [{"weight": 1, "cov": [[200, 100], [100, 51]]}]}"#,
        ),
        write(dir, "sz.json", "[[200, 0], [0, 1]]"),
        write(dir, "a.json", a),
    ]
}

#[test]
fn mc_single_component_matches_exact() {
    let dir = TempDir::new().unwrap();
    let [mix, sz, a] = mc_files(&dir, "[[0.25, 0], [0, 0.81]]");
    let r = epicheck(
        &[
            "mc",
            "--mixture",
            s(&mix),
            "--sigma-z",
            s(&sz),
            "--a",
            s(&a),
            "--json",
        ],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["body"]["conclusion"], "consistent");
    assert_eq!(v["seed"].as_u64(), Some(42));

    let inst = write(&dir, "d.json", DIAGONAL);
    let exact = epicheck(&["check", s(&inst), "--json"], &[]).json();
    for (est, side) in [("lhs_estimate", "lhs"), ("rhs_estimate", "rhs")] {
        let got = f64_at(&v, &["body", est]);
        let want = f64_at(&exact, &["body", "report", side]);
        assert!((got - want).abs() <= 0.05 * want, "{side}: {got} vs {want}");
    }
}

#[test]
fn mc_edge_and_error_cases() {
    let dir = TempDir::new().unwrap();
    let [mix, sz, a] = mc_files(&dir, "[[0, 0], [0, 0]]");
    let r = epicheck(
        &[
            "mc",
            "--mixture",
            s(&mix),
            "--sigma-z",
            s(&sz),
            "--a",
            s(&a),
            "--m",
            "20000",
            "--json",
        ],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["body"]["conclusion"], "consistent");

    let skew = write(&dir, "skew.json", "[[0.3125, 0.3375], [0.3375, 0.785]]");
    let r = epicheck(
        &[
            "mc",
            "--mixture",
            s(&mix),
            "--sigma-z",
            s(&sz),
            "--a",
            s(&skew),
            "--m",
            "100",
        ],
        &[],
    );
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("epicheck check"), "{}", r.stderr);

    let wrong_dim = write(&dir, "a3.json", "[[0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5]]");
    let r = epicheck(
        &[
            "mc",
            "--mixture",
            s(&mix),
            "--sigma-z",
            s(&sz),
            "--a",
            s(&wrong_dim),
        ],
        &[],
    );
    assert_eq!(r.code, 2);

    let bad_weights = write(
        &dir,
        "bad.json",
        r#"{"components": [{"weight": 0.7, "cov": [[1, 0], [0, 1]]}]}"#,
    );
    let r = epicheck(
        &[
            "mc",
            "--mixture",
            s(&bad_weights),
            "--sigma-z",
            s(&sz),
            "--a",
            s(&a),
        ],
        &[],
    );
    assert_eq!(r.code, 2);
}
