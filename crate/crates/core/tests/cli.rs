use std::path::Path;
use std::process::{Command, Output};

fn convexdual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexdual"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn certify_example1_as_json() {
    let out = convexdual(&["certify", "--builtin", "example1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["gap"].as_f64().unwrap() <= 1e-6);
    assert!((v["primal_value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert!((v["dual_value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(v["verdict"], "StrongDualityVerified");
    assert!(stdout(&out).ends_with("}\n"));
}

#[test]
fn synthesize_double_integrator() {
    let out = convexdual(&["synthesize", "--builtin", "ct_double_integrator"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("F: "), "{text}");
    let line = text
        .lines()
        .find(|l| l.starts_with("max_real_eig:"))
        .expect("max_real_eig line");
    let value: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(value < 0.0);
}

#[test]
fn output_feedback_has_no_certificate() {
    let out = convexdual(&["certify", "--builtin", "sof_demo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out)
        .contains("no lossless convexification available for kind static_output_feedback"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn help_lists_every_flag() {
    let out = convexdual(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for flag in [
        "--builtin",
        "--input",
        "--tol-gap",
        "--tol-feas",
        "--epsilon",
        "--samples",
        "--seed",
        "--grid",
        "--format",
        "--output",
    ] {
        assert!(text.contains(flag), "help is missing {flag}");
    }
    for cmd in ["solve", "synthesize", "certify", "spotcheck", "oracle"] {
        assert!(text.contains(cmd), "help is missing {cmd}");
    }
}

#[test]
fn json_output_is_reproducible() {
    for args in [
        &["certify", "--builtin", "example2", "--format", "json"][..],
        &[
            "synthesize",
            "--builtin",
            "dt_unstable_scalar",
            "--format",
            "json",
        ][..],
        &[
            "spotcheck",
            "--builtin",
            "example1",
            "--format",
            "json",
            "--seed",
            "9",
        ][..],
    ] {
        let a = convexdual(args);
        let b = convexdual(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["certify"][..],
        &["certify", "--builtin", "example1", "--input", "x.json"][..],
        &["certify", "--builtin", "no_such_instance"][..],
        &["certify", "--builtin", "example1", "--format", "yaml"][..],
        &["frobnicate"][..],
        &["certify", "--input", "/nonexistent/instance.json"][..],
        &["synthesize", "--builtin", "example1"][..],
    ] {
        let out = convexdual(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn unstabilizable_systems_exit_1() {
    for name in ["ct_unstabilizable_scalar", "dt_unstabilizable_scalar"] {
        let out = convexdual(&["synthesize", "--builtin", name]);
        assert_eq!(out.status.code(), Some(1), "{name}: {}", stderr(&out));
    }
}

#[test]
fn output_flag_and_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("ex1.json");
    convexdual::corpus::save(&convexdual::corpus::builtin("example1").unwrap(), &instance).unwrap();
    let report = dir.path().join("report.json");
    let out = convexdual(&[
        "certify",
        "--input",
        path(&instance),
        "--format",
        "json",
        "--output",
        path(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let direct = convexdual(&["certify", "--builtin", "example1", "--format", "json"]);
    assert_eq!(std::fs::read(&report).unwrap(), direct.stdout);
}

#[test]
fn in_process_runner_matches_binary() {
    let argv = [
        "convexdual",
        "solve",
        "--builtin",
        "example2",
        "--format",
        "json",
    ];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = convexdual::cli::run_with(argv, &mut out, &mut err);
    assert_eq!(code, convexdual::cli::EXIT_OK);
    assert_eq!(out, convexdual(&argv[1..]).stdout);
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}
