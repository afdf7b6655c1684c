//! Command-line front end. Exit codes: 0 success or verified, 1 inconclusive
//! or not stabilizable, 2 usage error, 3 internal error.

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::cert::{self, matrix_json, num, CertifyOptions, Verdict};
use crate::control::{self, Clock, SynthesisOptions};
use crate::convexify::{inclusion_spotcheck, surjection_spotcheck};
use crate::corpus::{self, canonical_json, InstanceFile, InstanceKind};
use crate::error::Error;
use crate::sdp::{self, SdpStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the convexified SDP and recover the original variables
    Solve,
    /// Synthesize a stabilizing state feedback (stabilization instances)
    Synthesize,
    /// Produce a strong-duality certificate
    Certify,
    /// Run the surjection and inclusion spot checks of the change of variables
    Spotcheck,
    /// Cross-check a certificate against brute-force grid oracles
    Oracle,
}

#[derive(Debug, Parser)]
#[command(
    name = "convexdual",
    version,
    about = "Lossless convexification and strong-duality certificates"
)]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Built-in instance name
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "input")]
    pub builtin: Option<String>,
    /// Instance file (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<std::path::PathBuf>,
    /// Relative duality-gap tolerance
    #[arg(long, global = true, default_value_t = sdp::DEFAULT_TOL_GAP)]
    pub tol_gap: f64,
    /// Feasibility tolerance
    #[arg(long, global = true, default_value_t = sdp::DEFAULT_TOL_FEAS)]
    pub tol_feas: f64,
    /// Override the stability margin epsilon of control instances
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Spot-check sample count
    #[arg(long, global = true, default_value_t = 100)]
    pub samples: usize,
    /// Sampling seed
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grid points per dimension for the oracle
    #[arg(long, global = true, default_value_t = 2001)]
    pub grid: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<std::path::PathBuf>,
}

/// A finished report: body plus exit code.
struct Report {
    json: Value,
    text: String,
    code: i32,
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NotStabilizable { .. } => EXIT_NEGATIVE,
        Error::InvalidArgument(_)
        | Error::NoLosslessMap(_)
        | Error::SchemaMismatch(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::GridBudgetExceeded { .. }
        | Error::MissingBounds(_) => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}

/// Runs the CLI on `argv` (program name first) with the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match CliConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cfg) {
        Ok(report) => {
            let body = match cfg.format {
                Format::Json => canonical_json(&report.json),
                Format::Text => report.text,
            };
            let written = match &cfg.output {
                Some(path) => std::fs::write(path, body.as_bytes()),
                None => out.write_all(body.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: cannot write report: {e}");
                return EXIT_INTERNAL;
            }
            report.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn load_instance(cfg: &CliConfig) -> crate::Result<InstanceFile> {
    let mut inst = match (&cfg.builtin, &cfg.input) {
        (Some(name), None) => corpus::builtin(name)?,
        (None, Some(path)) => corpus::load(path)?,
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of --builtin or --input is required".into(),
            ))
        }
    };
    if let Some(eps) = cfg.epsilon {
        inst.data.epsilon = Some(eps);
        inst.validate()?;
    }
    Ok(inst)
}

fn execute(cfg: &CliConfig) -> crate::Result<Report> {
    for (name, v) in [("--tol-gap", cfg.tol_gap), ("--tol-feas", cfg.tol_feas)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let inst = load_instance(cfg)?;
    let opts = CertifyOptions {
        tol_gap: cfg.tol_gap,
        tol_feas: cfg.tol_feas,
        samples: cfg.samples,
        seed: cfg.seed,
    };
    match cfg.command {
        Command::Solve => solve(&inst, &opts),
        Command::Synthesize => synthesize(&inst, cfg, &opts),
        Command::Certify => certify(&inst, &opts),
        Command::Spotcheck => spotcheck(&inst, &opts),
        Command::Oracle => oracle(&inst, &opts, cfg.grid),
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.10e}")
}

fn solve(inst: &InstanceFile, opts: &CertifyOptions) -> crate::Result<Report> {
    let c = inst.change_of_variables()?;
    let sol = sdp::solve(c.target(), opts.tol_gap, opts.tol_feas);
    let optimal = sol.status == SdpStatus::Optimal;
    let recovered = if optimal {
        Some(c.recover(&c.image_from_sdp(&sol.v)?)?)
    } else {
        None
    };
    let json = json!({
        "kind": inst.kind.name(),
        "status": format!("{:?}", sol.status),
        "primal_value": num(sol.primal_value),
        "dual_value": num(sol.dual_value),
        "gap": num(sol.gap()),
        "iterations": sol.iterations,
        "v": sol.v.iter().map(|x| num(*x)).collect::<Vec<_>>(),
        "recovered_x": recovered.as_ref().map(cert::assignment_json),
    });
    let mut text = format!(
        "status: {:?}\nprimal_value: {}\ndual_value: {}\ngap: {}\niterations: {}\n",
        sol.status,
        fmt_num(sol.primal_value),
        fmt_num(sol.dual_value),
        fmt_num(sol.gap()),
        sol.iterations
    );
    if let Some(x) = &recovered {
        for (name, m) in x.iter() {
            text.push_str(&format!("{name}: {}\n", matrix_text(m)));
        }
    }
    let code = match sol.status {
        SdpStatus::Optimal => EXIT_OK,
        SdpStatus::Infeasible | SdpStatus::Unbounded => EXIT_NEGATIVE,
        SdpStatus::NumericalFailure => EXIT_INTERNAL,
    };
    Ok(Report { json, text, code })
}

fn matrix_text(m: &nalgebra::DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            format!(
                "[{}]",
                (0..m.ncols())
                    .map(|j| fmt_num(m[(i, j)]))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn synthesize(
    inst: &InstanceFile,
    cfg: &CliConfig,
    opts: &CertifyOptions,
) -> crate::Result<Report> {
    match inst.kind {
        InstanceKind::CtStabilization | InstanceKind::DtStabilization => {}
        InstanceKind::StaticOutputFeedback => {
            return Err(Error::NoLosslessMap(inst.kind.name().into()))
        }
        InstanceKind::ScalarBmi => {
            return Err(Error::InvalidArgument(
                "synthesize needs a stabilization instance".into(),
            ))
        }
    }
    let sys = inst.system()?;
    let sopts = SynthesisOptions {
        epsilon: cfg.epsilon.or(inst.data.epsilon),
        certify: *opts,
        ..SynthesisOptions::default()
    };
    let r = control::synthesize(&sys, &sopts)?;
    let measure = r.stability_measure(sys.clock());
    let measure_name = match sys.clock() {
        Clock::ContinuousTime => "max_real_eig",
        Clock::DiscreteTime => "spectral_radius",
    };
    let verified =
        r.certificate.verdict_at(opts.tol_gap, opts.tol_feas) == Verdict::StrongDualityVerified;
    let json = json!({
        "kind": inst.kind.name(),
        "epsilon": num(r.epsilon),
        "margin": num(r.margin),
        "P": matrix_json(r.p.as_matrix()),
        "M": matrix_json(&r.m),
        "F": matrix_json(&r.f),
        "closed_loop_eigs": r.closed_loop_eigs.iter().map(|l| json!([num(l.re), num(l.im)])).collect::<Vec<_>>(),
        measure_name: num(measure),
        "nonlinear_residual": r.nonlinear_residual.map(num),
        "certificate": r.certificate.to_json(),
    });
    let eigs: Vec<String> = r
        .closed_loop_eigs
        .iter()
        .map(|l| format!("{:.6e}{:+.6e}i", l.re, l.im))
        .collect();
    let text = format!(
        "F: {}\n{measure_name}: {}\nepsilon: {}\nmargin: {}\nclosed_loop_eigs: [{}]\nverdict: {}\n",
        matrix_text(&r.f),
        fmt_num(measure),
        fmt_num(r.epsilon),
        fmt_num(r.margin),
        eigs.join(", "),
        r.certificate.verdict.name()
    );
    Ok(Report {
        json,
        text,
        code: if verified { EXIT_OK } else { EXIT_NEGATIVE },
    })
}

fn certificate_text(c: &cert::DualityCertificate) -> String {
    let mut text = format!(
        "kind: {}\nverdict: {}\np_star: {}\nd_star: {}\ngap: {}\nslater_margin: {}\n",
        c.kind,
        c.verdict.name(),
        fmt_num(c.primal_value),
        fmt_num(c.dual_value),
        fmt_num(c.gap),
        fmt_num(c.slater_margin)
    );
    if let Some(s) = &c.surjection {
        text.push_str(&format!(
            "surjection: pass={} worst_roundtrip={}\n",
            s.pass,
            fmt_num(s.worst_roundtrip)
        ));
    }
    if let Some(s) = &c.inclusion {
        text.push_str(&format!(
            "inclusion: pass={} counterexamples={}\n",
            s.pass, s.counterexamples
        ));
    }
    if let Some(stage) = &c.failed_stage {
        text.push_str(&format!("failed_stage: {stage}\n"));
    }
    text
}

fn certify(inst: &InstanceFile, opts: &CertifyOptions) -> crate::Result<Report> {
    let c = inst.change_of_variables()?;
    let cert = cert::certify(c.source(), &c, opts);
    let code = if cert.verdict == Verdict::StrongDualityVerified {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    };
    Ok(Report {
        json: cert.to_json(),
        text: certificate_text(&cert),
        code,
    })
}

fn spotcheck(inst: &InstanceFile, opts: &CertifyOptions) -> crate::Result<Report> {
    let c = inst.change_of_variables()?;
    let surj = surjection_spotcheck(&c, opts.samples, opts.seed)?;
    let incl = inclusion_spotcheck(c.source(), &c, opts.samples, opts.seed)?;
    let pass = surj.pass && incl.pass;
    let json = json!({
        "kind": c.kind().name(),
        "pass": pass,
        "surjection_report": {
            "pass": surj.pass,
            "samples": surj.samples,
            "seed": surj.seed,
            "worst_roundtrip": num(surj.worst_roundtrip),
            "worst_source_violation": num(surj.worst_source_violation),
            "worst_transport": num(surj.worst_transport),
        },
        "inclusion_report": {
            "pass": incl.pass,
            "samples": incl.samples,
            "seed": incl.seed,
            "counterexamples": incl.counterexamples,
            "worst_violation": num(incl.worst_violation),
        },
    });
    let text = format!(
        "surjection: pass={} samples={} worst_roundtrip={} worst_source_violation={}\ninclusion: pass={} samples={} counterexamples={}\n",
        surj.pass,
        surj.samples,
        fmt_num(surj.worst_roundtrip),
        fmt_num(surj.worst_source_violation),
        incl.pass,
        incl.samples,
        incl.counterexamples
    );
    Ok(Report {
        json,
        text,
        code: if pass { EXIT_OK } else { EXIT_NEGATIVE },
    })
}

fn oracle(inst: &InstanceFile, opts: &CertifyOptions, grid: usize) -> crate::Result<Report> {
    let c = inst.change_of_variables()?;
    let cert = cert::certify(c.source(), &c, opts);
    let x = cert::cross_check_with_oracle(&cert, c.source(), grid)?;
    let json = json!({
        "kind": c.kind().name(),
        "pass": x.pass,
        "certificate_primal": num(cert.primal_value),
        "certificate_dual": num(cert.dual_value),
        "primal_oracle": num(x.primal_oracle),
        "grid_step": num(x.grid_step),
        "slack": num(x.slack),
        "primal_ok": x.primal_ok,
        "dual_oracle": num(x.dual_oracle),
        "dual_oracle_unbounded": x.dual_oracle == f64::NEG_INFINITY,
        "dual_ok": x.dual_ok,
    });
    let text = format!(
        "pass: {}\ncertificate p_star: {}\nprimal_oracle: {} (slack {})\ndual_oracle: {}\n",
        x.pass,
        fmt_num(cert.primal_value),
        fmt_num(x.primal_oracle),
        fmt_num(x.slack),
        fmt_num(x.dual_oracle)
    );
    Ok(Report {
        json,
        text,
        code: if x.pass { EXIT_OK } else { EXIT_NEGATIVE },
    })
}
