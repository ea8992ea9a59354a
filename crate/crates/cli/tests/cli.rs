use std::path::Path;

use xorchaos::map::parse_map_expr;
use xorchaos::pa::{PaJson, PiecewiseAffineMap};
use xorchaos_cli::{run_with, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["xorchaos"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn only_file(dir: &Path, ext: &str) -> std::path::PathBuf {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    assert_eq!(files.len(), 1, "{files:?}");
    files.pop().unwrap()
}

#[test]
fn eval_prints_value() {
    let (code, out, _) = run(&["eval", "xor(tent,inverted_tent)", "0.125"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "0.5");
}

#[test]
fn branches_summary_line() {
    let (code, out, _) = run(&["branches", "xor(tent,inverted_tent)"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next(), Some("4 full branches / 4 branches"));
}

#[test]
fn parse_errors_are_usage_errors_with_position() {
    let (code, _, err) = run(&["eval", "xor(tent,bogus)", "0.1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("offset 9"), "{err}");
    assert!(err.contains("\n           ^"), "{err}");
    let (code, _, _) = run(&["eval", "tent", "1.5"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = run(&["diagnose", "tent", "--seeds", "0"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("diagnose"));
}

#[test]
fn emitted_exact_form_round_trips() {
    for text in [
        "xor(tent,inverted_tent)",
        "xor(doubling,tent)",
        "and(mirror(doubling),tent)",
    ] {
        let (code, out, _) = run(&["combine", text, "--emit-pa"]);
        assert_eq!(code, EXIT_OK);
        let json: PaJson = serde_json::from_str(&out).unwrap();
        let pa = PiecewiseAffineMap::from_json(&json).unwrap();
        let f = parse_map_expr(text).unwrap();
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            assert!(
                (pa.eval(x) - f.eval(x).unwrap()).abs() <= 1e-12,
                "{text} at {x}"
            );
        }
    }
    let (code, _, _) = run(&["combine", "xor(logistic,tent)", "--emit-pa"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn diagnose_writes_report_histogram_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let (code, out, _) = run(&[
        "diagnose",
        "xor(tent,inverted_tent)",
        "--iters",
        "20000",
        "--seeds",
        "8",
        "--out",
        out_dir,
        "--format",
        "json",
        "--format",
        "csv",
        "--format",
        "svg",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let json = std::fs::read_to_string(only_file(dir.path(), "json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["verdict"], "Chaotic");
    assert_eq!(value["fixtures_match"], true);
    assert_eq!(value["schema_version"], 1);

    let csv = std::fs::read_to_string(only_file(dir.path(), "csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,count,density"));
    let rows: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 1000);
    assert!((rows.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(std::fs::read_to_string(only_file(dir.path(), "svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn file_names_depend_on_command_expression_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let args = |seed: &'static str| {
        vec![
            "diagnose",
            "xor(tent,tent)",
            "--iters",
            "2000",
            "--seeds",
            "2",
            "--grid",
            "1000",
            "--out",
            out_dir,
            "--seed",
            seed,
        ]
    };
    assert_eq!(run(&args("5")).0, EXIT_OK);
    assert_eq!(run(&args("5")).0, EXIT_OK);
    assert_eq!(run(&args("6")).0, EXIT_OK);
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    assert!(names[0].starts_with("diagnose-") && names[0].ends_with("-5.json"));
}

#[test]
fn strict_mode_controls_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let common = [
        "--out", out_dir, "--grid", "2000", "--iters", "5000", "--seeds", "4",
    ];
    let with = |extra: &[&'static str]| {
        let mut v: Vec<&str> = extra.to_vec();
        v.extend_from_slice(&common);
        run(&v)
    };
    assert_eq!(with(&["example1", "--strict"]).0, EXIT_OK);
    assert_eq!(with(&["example1", "--r", "0.5"]).0, EXIT_OK);
    let (code, out, _) = with(&["example1", "--r", "0.5", "--strict"]);
    assert_eq!(code, EXIT_MISMATCH);
    assert!(out.contains("FAIL"));
    let (code, out, _) = run(&[
        "example2", "--strict", "--out", out_dir, "--iters", "50000", "--seeds", "4",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn plots() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let (code, out, _) = run(&["plot", "graph:tent", "--out", out_dir]);
    assert_eq!(code, EXIT_OK);
    let path = out.trim().strip_prefix("wrote ").unwrap();
    let svg = std::fs::read_to_string(path).unwrap();
    assert!(svg.contains(r#"points="40.000,360.000 200.000,40.000 360.000,360.000""#));

    for spec in [
        "cobweb:xor(logistic(r=3.9),tent)",
        "basin:xor(logistic(r=3.9),tent)",
        "histogram:xor(tent,inverted_tent)",
    ] {
        let (code, out, err) = run(&[
            "plot",
            spec,
            "--overlay",
            "diagonal",
            "--overlay",
            "half",
            "--out",
            out_dir,
            "--iters",
            "100000",
            "--seeds",
            "2",
        ]);
        assert_eq!(code, EXIT_OK, "{spec}: {err}");
        assert!(out.contains(".svg"));
    }
    assert_eq!(run(&["plot", "tent"]).0, EXIT_USAGE);
    assert_eq!(
        run(&["plot", "graph:tent", "--resolution", "8"]).0,
        EXIT_USAGE
    );
}

#[test]
fn fixed_points_and_basin_commands() {
    let (code, out, _) = run(&["fixed-points", "xor(logistic(r=3.9),tent)"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 2);
    assert!(out.contains("0.230769230769 multiplier 0.100000000 Stable"));
    let (code, out, _) = run(&["basin", "xor(tent,tent)", "--target", "0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("0.000000000000 1.000000"));
    let (code, _, _) = run(&["basin", "xor(tent,inverted_tent)"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, out, _) = run(&["catalog"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 5);
}
