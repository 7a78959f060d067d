use std::path::PathBuf;

use freelab::cli::run_with;
use serde_json::Value;

const SEMICIRCLE: &str = r#"{"kind":"additive","gamma":0,"sigma":{"carrier":"real","atoms":[[0,1]]}}"#;
const WISHART_MU: &str =
    r#"{"carrier":"real","pieces":[{"interval":[-2,1],"poly":{"center":0,"coeffs":[0,0,0,0,"5/33"]}}]}"#;
const WISHART_G: &str = r#"{"kind":"additive","gamma":"5200/6161","sigma":{"carrier":"real","atoms":[["44/65","3520/6161"]]}}"#;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("freelab").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("freelab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn error_json(r: &Run) -> Value {
    let v: Value = serde_json::from_str(r.err.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", r.err));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["exit_code"], r.code);
    v
}

#[test]
fn semicircle_density_has_one_row_per_grid_point() {
    let path = scratch("p.csv");
    let r = run(&["density", "--generator", SEMICIRCLE, "--grid", "-2:2:401", "--out", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "location,value,flag");
    assert_eq!(lines.len(), 402);
    let mid: Vec<&str> = lines[201].split(',').collect();
    let (t, p): (f64, f64) = (mid[0].parse().unwrap(), mid[1].parse().unwrap());
    assert_eq!(t, 0.0);
    assert!((p - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    let summary: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["points"], 401);
}

#[test]
fn negative_mass_is_a_validation_error() {
    let bad = r#"{"carrier":"real","atoms":[[0,-0.5],[1,1.5]]}"#;
    let r = run(&["convolve", "--mu1", bad, "--generator", SEMICIRCLE, "--grid=-2:2:5"]);
    assert_eq!(r.code, 2);
    assert_eq!(error_json(&r)["error"]["kind"], "NegativeMass");
    assert!(r.out.is_empty());
}

#[test]
fn malformed_inputs_exit_2() {
    for args in [
        vec!["density", "--generator", SEMICIRCLE, "--grid", "2:-2:5"],
        vec!["density", "--generator", SEMICIRCLE, "--grid", "0:1:1"],
        vec!["density", "--generator", "/nonexistent/g.json", "--grid", "0:1:3"],
        vec!["density", "--generator", "{not json", "--grid", "0:1:3"],
        vec!["density", "--generator", SEMICIRCLE, "--grid", "0:1:3", "--mass-tol", "-1"],
        vec!["frobnicate"],
    ] {
        let r = run(&args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.err);
        error_json(&r);
    }
}

#[test]
fn csv_output_is_deterministic() {
    let args = |p: &str| {
        vec!["convolve", "--mu1", WISHART_MU, "--generator", WISHART_G, "--grid", "-1:3:201", "--out", p]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let (a, b) = (scratch("a.csv"), scratch("b.csv"));
    for p in [&a, &b] {
        let v = args(p.to_str().unwrap());
        let r = run(&v.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(r.code, 0, "{}", r.err);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn every_json_mode_is_versioned() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["density", "--generator", SEMICIRCLE, "--grid=-2:2:11", "--json"],
        vec!["semigroup", "--nu", r#"{"carrier":"real","atoms":[[-1,0.5],[1,0.5]]}"#, "--order", "2", "--grid=-1:1:5", "--json"],
        vec!["boundary", "--generator", SEMICIRCLE, "--grid=-1:1:5", "--json"],
        vec!["classify", "--mu1", WISHART_MU, "--generator", WISHART_G, "--alpha", "0", "--json"],
        vec!["cusp", "--mu1", WISHART_MU, "--generator", WISHART_G, "--alpha", "0", "--json"],
        vec!["superconv", "--bernoulli-clt", "4,16", "--window=-1.9:1.9:51", "--json"],
        vec!["verify", "--suite", "properties", "--trials", "5", "--only", "mapping", "--json"],
    ];
    for args in cases {
        let r = run(&args);
        assert_eq!(r.code, 0, "{args:?}: {}", r.err);
        let v: Value = serde_json::from_str(&r.out).unwrap();
        assert_eq!(v["schema_version"], 1, "{args:?}");
    }
}

#[test]
fn classification_and_cusp_tables() {
    let r = run(&["classify", "--mu1", WISHART_MU, "--generator", WISHART_G, "--alpha", "0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("alpha,location,set,lhs,rhs,equality_flag\n"));
    let r = run(&["cusp", "--mu1", WISHART_MU, "--generator", WISHART_G, "--alpha", "0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let rows: Vec<&str> = r.out.lines().collect();
    assert_eq!(rows[0], "n,a,b,c");
    assert_eq!(rows[1].split(',').nth(3), Some("2"));
    assert_eq!(rows[2].split(',').nth(3), Some("0"));
}

#[test]
fn point_off_the_zero_set_is_a_numerical_failure() {
    let r = run(&["classify", "--mu1", WISHART_MU, "--generator", WISHART_G, "--alpha", "1/2"]);
    assert_eq!(r.code, 3);
    assert_eq!(error_json(&r)["error"]["kind"], "NotAZero");
}

#[test]
fn verify_reports_criteria() {
    let r = run(&["verify", "--only", "1,9"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("PASS  1"));
    assert!(r.out.ends_with("2/2 criteria passed\n"));
    assert_eq!(freelab::cli::Failure::Verify("x".into()).exit_code(), 4);
    let r = run(&["verify", "--only", "11"]);
    assert_eq!(r.code, 2);
}

#[test]
fn svg_plot_is_written() {
    let svg = scratch("p.svg");
    let r = run(&["density", "--generator", SEMICIRCLE, "--grid=-2:2:101", "--out", "/dev/null", "--svg", svg.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    let s = std::fs::read_to_string(&svg).unwrap();
    assert!(s.starts_with("<svg") && s.contains("<polyline"));
}
