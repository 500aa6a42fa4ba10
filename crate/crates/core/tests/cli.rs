use std::process::Command;

use hrlab::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hrlab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = call(args);
    assert!(err.is_empty(), "{err}");
    (code, serde_json::from_str(&out).unwrap())
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn golden_documents() {
    let cases: [(&str, &[&str]); 3] = [
        ("oracle_rellich_n5.json", &["oracle", "--problem", "rellich", "--N", "5"]),
        ("con2_v1_n5.json", &["check-cond", "--id", "con2", "--V", "1", "--N", "5"]),
        ("catalog_ckn_blt1.json", &["catalog", "--name", "ckn_blt1", "--N", "5", "--b", "0.5"]),
    ];
    for (file, args) in cases {
        let (code, out, _) = call(args);
        assert_eq!(code, 0);
        assert_eq!(out, golden(file), "{file}");
    }
}

#[test]
fn golden_scan_csv() {
    let (code, out, _) = call(&[
        "mode-scan", "--problem", "hardy-rellich", "--N", "4", "--kmax", "3", "--grid-m", "256", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    let want = golden("scan_hr_n4_m256.csv");
    let (got, want): (Vec<&str>, Vec<&str>) = (out.lines().collect(), want.lines().collect());
    assert_eq!(got.len(), want.len());
    assert_eq!(got[0], "problem,N,k,value,converged,sensitivity");
    for (g, w) in got.iter().zip(&want).skip(1) {
        let (g, w): (Vec<&str>, Vec<&str>) = (g.split(',').collect(), w.split(',').collect());
        assert_eq!(g[..3], w[..3]);
        assert_eq!(g[4], w[4]);
        for i in [3, 5] {
            let (a, b): (f64, f64) = (g[i].parse().unwrap(), w[i].parse().unwrap());
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
        }
    }
}

#[test]
fn mode_scan_reports_the_hardy_rellich_constant() {
    let (code, v) = json(&["mode-scan", "--problem", "hardy-rellich", "--N", "5", "--V", "1", "--W", "1/r^2", "--kmax", "4"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["argmin_k"], 0);
    assert!((v["global_value"].as_f64().unwrap() - 6.25).abs() < 0.0625);
    let ks: Vec<u64> = v["modes"].as_array().unwrap().iter().map(|m| m["k"].as_u64().unwrap()).collect();
    assert_eq!(ks, [0, 1, 2, 3, 4]);
}

#[test]
fn symmetry_line() {
    let (code, out, _) = call(&["symmetry", "--problem", "hardy-rellich", "--N", "4", "--V", "1", "--W", "1/r^2"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next(), Some("SYMMETRY BREAKING: argmin k=1"));
    let gap: f64 = out.lines().nth(1).unwrap().trim_start_matches("gap: ").parse().unwrap();
    assert!((gap + 1.0).abs() < 2e-2);
    let (_, out, _) = call(&["symmetry", "--problem", "hardy-rellich", "--N", "5", "--kmax", "3"]);
    assert!(out.starts_with("RADIAL OPTIMAL: argmin k=0\ngap: 0\n"), "{out}");
}

#[test]
fn condition_exit_codes() {
    for n in 2..=8 {
        let (code, _, _) = call(&["check-cond", "--id", "con2", "--V", "1", "--N", &n.to_string()]);
        assert_eq!(code, if n >= 5 { 0 } else { 1 }, "N={n}");
    }
    let w = "N^2/(4*r^2)";
    assert_eq!(call(&["check-cond", "--id", "conm", "--V", "1", "--W", w, "--N", "5", "--grid-m", "512"]).0, 0);
    let (code, v) = json(&["check-cond", "--id", "conm", "--V", "1", "--W", w, "--N", "4", "--grid-m", "512"]);
    assert_eq!(code, 1);
    assert!(v["witness"].as_array().is_some_and(|a| a.len() == 512));
}

#[test]
fn pair_exit_codes() {
    assert_eq!(call(&["check-pair", "--dim", "5", "--V", "1", "--W", "2.25/r^2"]).0, 0);
    let (code, v) = json(&["check-pair", "--dim", "5", "--V", "1", "--W", "2.5/r^2"]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "not_pair");
    assert!(v["violating_profile"].is_array());
    assert_eq!(call(&["check-pair", "--catalog", "heisenberg2", "--N", "5"]).0, 0);
    // the unshifted attained critical pair cannot be resolved by the ODE
    assert_eq!(call(&["check-pair", "--catalog", "hydrogen2", "--N", "5", "--tol", "0"]).0, 2);
}

#[test]
fn usage_and_computation_errors() {
    let usage: [&[&str]; 8] = [
        &["bogus"],
        &["check-pair", "--dim", "3", "--V", "r^", "--W", "1"],
        &["check-pair", "--dim", "3", "--V", "1"],
        &["check-pair", "--catalog", "ckn_blt1", "--N", "5"],
        &["check-cond", "--id", "con9", "--V", "1", "--N", "5"],
        &["check-cond", "--id", "conm", "--V", "1", "--N", "5"],
        &["oracle", "--problem", "hardy", "--N", "5", "--grid-m", "2"],
        &["best-constant", "--problem", "hardy", "--N", "5", "--W", "b/r^2"],
    ];
    for args in usage {
        let (code, out, err) = call(args);
        assert_eq!(code, 64, "{args:?}");
        assert!(out.is_empty() && !err.is_empty());
    }
    let (code, _, err) = call(&["check-pair", "--dim", "3", "--V", "1-r", "--W", "1"]);
    assert_eq!(code, 70);
    assert!(err.contains("positive"), "{err}");
    let (code, _, _) = call(&["best-constant", "--problem", "hardy-rellich", "--N", "5", "--W", "N+2-r^2"]);
    assert_eq!(code, 70);
    assert_eq!(call(&["--help"]).0, 0);
}

#[test]
fn every_subcommand_takes_format_and_grid_flags() {
    let runs: [&[&str]; 8] = [
        &["check-pair", "--catalog", "hardy", "--N", "5"],
        &["check-cond", "--id", "con", "--V", "1", "--W", "1", "--N", "5"],
        &["best-constant", "--problem", "hardy", "--N", "5"],
        &["mode-scan", "--problem", "hardy", "--N", "5", "--kmax", "1"],
        &["symmetry", "--problem", "hardy-rellich", "--N", "5", "--kmax", "1"],
        &["catalog", "--list"],
        &["oracle", "--problem", "hardy", "--N", "5"],
        &["equiv-check", "--W", "1/r^2", "--N", "5"],
    ];
    let grid = ["--grid-m", "128", "--grid-rmin", "0.001", "--grid-rmax", "1000", "--grid-kind", "log"];
    for args in runs {
        for format in ["json", "csv", "text"] {
            let mut a = args.to_vec();
            a.extend(grid);
            a.extend(["--format", format]);
            let (code, out, err) = call(&a);
            assert!(code <= 1, "{a:?}: {err}");
            assert!(!out.is_empty());
            if format == "json" {
                assert!(serde_json::from_str::<Value>(&out).is_ok(), "{a:?}");
            }
        }
    }
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("hrlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("oracle.json");
    let (code, out, _) = call(&["oracle", "--problem", "rellich", "--N", "5", "-o", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), golden("oracle_rellich_n5.json"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn binary_runs_are_byte_identical() {
    let args = ["mode-scan", "--problem", "hardy-rellich", "--N", "4", "--kmax", "3", "--grid-m", "512"];
    let once = || Command::new(env!("CARGO_BIN_EXE_hrlab")).args(args).output().unwrap();
    let (a, b) = (once(), once());
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}
