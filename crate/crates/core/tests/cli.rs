use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const AGE_TEMPLATE: &str =
    "[domain]\nx0 = 0\nx_max = inf\n\n[rates]\ngamma = const:1\nmu = const:MU\nbeta = BETA\n\n[diffusion]\nD = DIFF\n";

fn model(dir: &TempDir, name: &str, beta: &str, mu: &str, d: &str) -> PathBuf {
    let path = dir.path().join(name);
    let text = AGE_TEMPLATE.replace("BETA", beta).replace("MU", mu).replace("DIFF", d);
    fs::write(&path, text).unwrap();
    path
}

fn r0kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_r0kit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data rows (no comments, no column header) split into fields.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn compute_all_routes_agree_for_constant_fertility() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "c.txt", "const:2", "1", "1");
    let out = r0kit(&["compute", p(&m)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("# r0kit v0.1.0 compute --grid-n 4096 --tol 0.001 --family uniform"));
    let rs = rows(&text);
    assert_eq!(rs.len(), 3);
    for r in &rs {
        let v: f64 = r[1].parse().unwrap();
        assert!((v - 2.0).abs() < 1e-3, "{r:?}");
    }
}

#[test]
fn zero_mortality_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "z.txt", "const:2", "0", "1");
    let out = r0kit(&["compute", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid model"));
}

#[test]
fn zero_fertility_gives_zero_on_every_route() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "b0.txt", "const:0", "1", "1");
    let out = r0kit(&["compute", p(&m)]);
    assert_eq!(out.status.code(), Some(0));
    for r in rows(&stdout(&out)) {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0, "{r:?}");
    }
}

#[test]
fn disagreement_beyond_tolerance_exits_3() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "q.txt", "powexp:1,2,1", "1", "2");
    assert_eq!(r0kit(&["compute", p(&m)]).status.code(), Some(0));
    assert_eq!(r0kit(&["compute", p(&m), "--tol", "1e-12"]).status.code(), Some(3));
}

#[test]
fn solver_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "c.txt", "const:2", "1", "1");
    let out = r0kit(&["simulate", p(&m), "--dt", "10", "--grid-n", "256", "--k", "8"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn converge_ends_with_the_limit_and_families_agree() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "q.txt", "powexp:1,2,1", "1", "2");
    let mut limits = Vec::new();
    for fam in ["uniform", "bump"] {
        let out = r0kit(&["converge", p(&m), "--family", fam]);
        assert_eq!(out.status.code(), Some(0));
        let rs = rows(&stdout(&out));
        assert_eq!(rs.len(), 7);
        let ks: Vec<&str> = rs[..6].iter().map(|r| r[0].as_str()).collect();
        assert_eq!(ks, ["8", "16", "32", "64", "128", "256"]);
        let last = &rs[6];
        assert_eq!(last[0], "limit");
        limits.push((last[1].parse::<f64>().unwrap(), last[2].parse::<f64>().unwrap()));
    }
    let (a, ea) = limits[0];
    let (b, eb) = limits[1];
    assert!((a - b).abs() <= ea + eb, "{a} ± {ea} vs {b} ± {eb}");
}

#[test]
fn converge_with_one_k_warns_and_skips_the_limit() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "c.txt", "const:2", "1", "1");
    let out = r0kit(&["converge", p(&m), "--k", "16"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let rs = rows(&stdout(&out));
    assert_eq!(rs.len(), 1);
    assert_eq!(rs[0][0], "16");
}

fn sweep(beta: &str) -> (Vec<(f64, f64)>, String) {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "s.txt", beta, "1", "1");
    let out = r0kit(&["sweep-d", p(&m), "--d-min", "0.01", "--d-max", "100", "--points", "41"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let curve = rows(&text)
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    (curve, text)
}

#[test]
fn sweep_shows_an_interior_peak_above_one() {
    let (curve, text) = sweep("powexp:3.6,2,1");
    let above: Vec<f64> = curve.iter().filter(|p| p.1 > 1.0).map(|p| p.0).collect();
    assert!(!above.is_empty());
    assert!(curve[0].1 < 1.0 && curve[40].1 < 1.0);
    let peak = curve
        .iter()
        .cloned()
        .fold((0.0, 0.0), |a, p| if p.1 > a.1 { p } else { a });
    assert!(
        (peak.0 / 2.0).ln().abs() <= 0.5 * 10f64.ln() / 10.0 + 1e-12,
        "peak at {}",
        peak.0
    );
    let opt = text.lines().find(|l| l.starts_with("# optimum")).unwrap();
    assert!(opt.contains("interior"), "{opt}");
    let d_star: f64 = opt
        .split("D*=")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((d_star - 2.0).abs() < 1e-5);
}

#[test]
fn sweep_is_increasing_for_step_and_flat_for_constant_fertility() {
    let (step, _) = sweep("step:1,2.718281828459045");
    assert!(step.windows(2).all(|w| w[1].1 > w[0].1));
    let (flat, _) = sweep("const:3");
    assert!(flat.iter().all(|p| p.1 == 3.0));
}

#[test]
fn output_is_deterministic_with_unix_line_endings() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "q.txt", "powexp:1,2,1", "1", "2");
    let out_a = dir.path().join("a.csv");
    let a = r0kit(&["sweep-d", p(&m), "--out", p(&out_a)]);
    let b = r0kit(&["sweep-d", p(&m)]);
    assert_eq!(a.status.code(), Some(0));
    let file = fs::read(&out_a).unwrap();
    assert_eq!(file, b.stdout);
    assert!(!file.contains(&b'\r'));
    let text = String::from_utf8(file).unwrap();
    let value = &rows(&text)[0][1];
    // d.ddddddddddde±x: twelve significant digits.
    let mantissa = value.split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 12, "{value}");
}

#[test]
fn simulate_emits_mass_history() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "c.txt", "const:0.5", "1", "1");
    let out = r0kit(&[
        "simulate",
        p(&m),
        "--k",
        "16",
        "--dt",
        "0.01",
        "--t-end",
        "1",
        "--every",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rs = rows(&stdout(&out));
    assert_eq!(rs.len(), 11);
    let masses: Vec<f64> = rs.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((masses[0] - 1.0).abs() < 1e-12);
    // Subcritical: the population declines.
    assert!(masses.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn validate_filter_selects_the_heat_kernel_checks() {
    let out = r0kit(&["validate", "--filter", "appendix"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with('[')).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains(" 4 appendix") && lines[1].contains(" 5 appendix"));
}

#[test]
fn mutated_kernel_fails_at_least_three_rows() {
    let filter = ["validate", "--filter", "1,2,4,5,6,11"];
    let clean = r0kit(&filter);
    assert_eq!(clean.status.code(), Some(0), "{}", stdout(&clean));
    let mut args = filter.to_vec();
    args.extend(["--mutate", "lambda2-sign"]);
    let broken = r0kit(&args);
    assert_ne!(broken.status.code(), Some(0));
    let failed = stdout(&broken).lines().filter(|l| l.starts_with("[FAIL]")).count();
    assert!(failed >= 3, "{}", stdout(&broken));
}
