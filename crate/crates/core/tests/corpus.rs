use convexdual::cert::{certify, cross_check_with_oracle, CertifyOptions, Verdict};
use convexdual::corpus::{self, InstanceKind};
use convexdual::Error;

#[test]
fn save_then_load_is_identity_on_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    for (name, inst) in corpus::builtins() {
        let path = dir.path().join(format!("{name}.json"));
        corpus::save(&inst, &path).unwrap();
        let back = corpus::load(&path).unwrap();
        assert_eq!(back, inst, "{name}");
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(back.to_canonical_string().unwrap(), text, "{name}");
    }
}

#[test]
fn truncated_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let text = corpus::builtin("example2")
        .unwrap()
        .to_canonical_string()
        .unwrap();
    let path = dir.path().join("cut.json");
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    match corpus::load(&path) {
        Err(Error::Parse { line, offset, .. }) => {
            assert!(line >= 1);
            assert!(offset > 0 && offset <= text.len() / 2);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(
        &corpus::builtin("example1")
            .unwrap()
            .to_canonical_string()
            .unwrap(),
    )
    .unwrap();
    v["data"]["extra"] = serde_json::json!(1);
    assert!(matches!(
        corpus::InstanceFile::from_json_str(&v.to_string()),
        Err(Error::SchemaMismatch(_))
    ));
}

#[test]
fn builtins_reproduce_their_expected_values() {
    let opts = CertifyOptions::default();
    for (name, inst) in corpus::builtins() {
        let Some((Some(p_star), Some(d_star))) =
            inst.expected.as_ref().map(|e| (e.p_star, e.d_star))
        else {
            continue;
        };
        let p = inst.source_problem().unwrap();
        let c = inst.change_of_variables().unwrap();
        let cert = certify(&p, &c, &opts);
        assert_eq!(
            cert.verdict_at(opts.tol_gap, opts.tol_feas),
            Verdict::StrongDualityVerified,
            "{name}"
        );
        assert!(
            (cert.primal_value - p_star).abs() <= 1e-6 * (1.0 + p_star.abs()),
            "{name}: p {}",
            cert.primal_value
        );
        assert!(
            (cert.dual_value - d_star).abs() <= 1e-6 * (1.0 + d_star.abs()),
            "{name}: d {}",
            cert.dual_value
        );
        if inst.kind == InstanceKind::ScalarBmi {
            let check = cross_check_with_oracle(&cert, &p, 401).unwrap();
            assert!(check.pass, "{name}: {check:?}");
        }
    }
}

#[test]
fn output_feedback_instance_has_no_map() {
    let inst = corpus::builtin("sof_demo").unwrap();
    assert!(inst.source_problem().is_ok());
    match inst.change_of_variables() {
        Err(e @ Error::NoLosslessMap(_)) => {
            assert_eq!(
                e.to_string(),
                "no lossless convexification available for kind static_output_feedback"
            )
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn output_feedback_constraint_is_state_feedback_at_f_equals_kc() {
    // u = K C x is state feedback with F = K C
    let inst = corpus::builtin("sof_demo").unwrap();
    let p = inst.source_problem().unwrap();
    let sys = inst.system().unwrap();
    let c = inst.output_matrix().unwrap().unwrap();
    let k =
        nalgebra::DMatrix::from_fn(sys.m(), c.nrows(), |i, j| 0.3 * (i as f64 - j as f64) - 0.2);
    let pm =
        nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 0.8, -0.2, 0.0, -0.2, 0.6]);
    let x = convexdual::bmi::Assignment::new()
        .with("P", pm.clone())
        .with("K", k.clone())
        .with_scalar("t", 0.25);
    let phi = p.constraint_values(&x).unwrap();
    let f = &k * &c;
    let expect = convexdual::control::ct_bilinear_residual(
        &sys,
        inst.epsilon().unwrap(),
        &convexdual::symmat::SymMat::new(pm).unwrap(),
        &f,
    )
    .unwrap();
    let shifted = expect.as_matrix() - nalgebra::DMatrix::identity(3, 3) * 0.25;
    assert!((phi[0].as_matrix() - shifted).amax() < 1e-12);
}
