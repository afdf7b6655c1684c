//! End-to-end strong-duality certificates for a non-convex program with a
//! lossless convexification.

use serde_json::{json, Value};

use crate::bmi::{
    dual_oracle, primal_oracle, weak_duality_check, Assignment, BmiProblem, Multipliers,
};
use crate::convexify::{
    inclusion_spotcheck, surjection_spotcheck, ChangeOfVariables, InclusionReport, SurjectionReport,
};
use crate::error::Result;
use crate::sdp::{self, SdpStatus};
use crate::symmat::SymMat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol_gap: sdp::DEFAULT_TOL_GAP,
            tol_feas: sdp::DEFAULT_TOL_FEAS,
            samples: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    StrongDualityVerified,
    /// Gap closed numerically but a hypothesis (Slater, surjection, feasibility) lacks evidence.
    WeakOnly,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::StrongDualityVerified => "StrongDualityVerified",
            Verdict::WeakOnly => "WeakOnly",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityCertificate {
    pub kind: String,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub slater_margin: f64,
    pub surjection: Option<SurjectionReport>,
    pub inclusion: Option<InclusionReport>,
    pub recovered_x: Assignment,
    /// Image point `h(x)` read from the target solution.
    pub image_point: Assignment,
    /// Source multipliers read off the target dual blocks.
    pub multipliers: Vec<SymMat>,
    pub original_residuals: Vec<f64>,
    pub sdp_status: Option<SdpStatus>,
    pub sdp_iterations: usize,
    pub options: CertifyOptions,
    pub verdict: Verdict,
    pub failed_stage: Option<String>,
}

impl DualityCertificate {
    /// The verdict the recorded evidence supports at the given tolerances.
    pub fn verdict_at(&self, tol_gap: f64, tol_feas: f64) -> Verdict {
        if self.failed_stage.is_some() {
            return Verdict::Inconclusive;
        }
        let gap_ok = self.gap <= tol_gap * (1.0 + self.primal_value.abs());
        if !gap_ok
            || !weak_duality_check(
                self.primal_value,
                self.dual_value,
                tol_gap * (1.0 + self.primal_value.abs()),
            )
        {
            return Verdict::Inconclusive;
        }
        let surjective = self.surjection.as_ref().is_some_and(|s| s.pass);
        let feasible = self.original_residuals.iter().all(|r| *r <= tol_feas);
        if self.slater_margin > 0.0 && surjective && feasible {
            Verdict::StrongDualityVerified
        } else {
            Verdict::WeakOnly
        }
    }

    pub fn to_json(&self) -> Value {
        let surj = self.surjection.as_ref().map(|s| {
            json!({
                "pass": s.pass,
                "samples": s.samples,
                "seed": s.seed,
                "worst_roundtrip": num(s.worst_roundtrip),
                "worst_source_violation": num(s.worst_source_violation),
                "worst_transport": num(s.worst_transport),
            })
        });
        let incl = self.inclusion.as_ref().map(|s| {
            json!({
                "pass": s.pass,
                "samples": s.samples,
                "seed": s.seed,
                "counterexamples": s.counterexamples,
                "worst_violation": num(s.worst_violation),
            })
        });
        json!({
            "kind": self.kind,
            "primal_value": num(self.primal_value),
            "dual_value": num(self.dual_value),
            "gap": num(self.gap),
            "slater_margin": num(self.slater_margin),
            "surjection_report": surj,
            "inclusion_report": incl,
            "recovered_x": assignment_json(&self.recovered_x),
            "image_point": assignment_json(&self.image_point),
            "multipliers": self.multipliers.iter().map(|m| matrix_json(m.as_matrix())).collect::<Vec<_>>(),
            "original_residuals": self.original_residuals.iter().map(|r| num(*r)).collect::<Vec<_>>(),
            "sdp_status": self.sdp_status.map(|s| format!("{s:?}")),
            "sdp_iterations": self.sdp_iterations,
            "tolerances": {
                "tol_gap": num(self.options.tol_gap),
                "tol_feas": num(self.options.tol_feas),
                "samples": self.options.samples,
                "seed": self.options.seed,
            },
            "verdict": self.verdict.name(),
            "failed_stage": self.failed_stage,
        })
    }
}

/// Non-finite values have no JSON spelling and become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn assignment_json(x: &Assignment) -> Value {
    Value::Object(
        x.iter()
            .map(|(k, v)| (k.to_string(), matrix_json(v)))
            .collect(),
    )
}

/// Strict feasibility of the source: control maps report `−t*` of the margin
/// program; the examples take the phase-1 point of the target, recover it,
/// and measure the source residuals there.
fn slater_margin(p: &BmiProblem, c: &ChangeOfVariables, target_value: f64) -> Result<f64> {
    if c.kind().is_control() {
        return Ok(-target_value);
    }
    let ph = sdp::slater_margin(c.target());
    if !(ph.margin > 0.0) {
        return Ok(ph.margin);
    }
    let x = c.recover(&c.image_from_sdp(&ph.point)?)?;
    let worst = p
        .residuals(&x)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(-worst)
}

/// Slater margin, target solve, recovery, original evaluation, spot checks
/// and verdict. Stage failures produce an `Inconclusive` certificate naming
/// the stage.
pub fn certify(p: &BmiProblem, c: &ChangeOfVariables, opts: &CertifyOptions) -> DualityCertificate {
    let mut cert = DualityCertificate {
        kind: c.kind().name().to_string(),
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        gap: f64::INFINITY,
        slater_margin: f64::NAN,
        surjection: None,
        inclusion: None,
        recovered_x: Assignment::new(),
        image_point: Assignment::new(),
        multipliers: Vec::new(),
        original_residuals: Vec::new(),
        sdp_status: None,
        sdp_iterations: 0,
        options: *opts,
        verdict: Verdict::Inconclusive,
        failed_stage: None,
    };
    if let Err(stage) = run_pipeline(p, c, opts, &mut cert) {
        cert.failed_stage = Some(stage);
    }
    cert.verdict = cert.verdict_at(opts.tol_gap, opts.tol_feas);
    cert
}

fn run_pipeline(
    p: &BmiProblem,
    c: &ChangeOfVariables,
    opts: &CertifyOptions,
    cert: &mut DualityCertificate,
) -> std::result::Result<(), String> {
    let stage = |name: &str| {
        let name = name.to_string();
        move |e: crate::Error| format!("{name}: {e}")
    };
    let sol = sdp::solve(c.target(), opts.tol_gap, opts.tol_feas);
    cert.sdp_status = Some(sol.status);
    cert.sdp_iterations = sol.iterations;
    if sol.status != SdpStatus::Optimal {
        return Err(format!("solve: target status {:?}", sol.status));
    }
    cert.dual_value = sdp::sdp_dual_value(c.target(), &sol);
    cert.image_point = c.image_from_sdp(&sol.v).map_err(stage("recover"))?;
    cert.recovered_x = c.recover(&cert.image_point).map_err(stage("recover"))?;
    cert.primal_value = p
        .objective_value(&cert.recovered_x)
        .map_err(stage("evaluate"))?;
    cert.original_residuals = p.residuals(&cert.recovered_x).map_err(stage("evaluate"))?;
    cert.gap = (cert.primal_value - cert.dual_value).abs();
    cert.multipliers = c
        .source_multipliers(&sol.z)
        .map_err(stage("multipliers"))?
        .as_slice()
        .to_vec();
    cert.slater_margin = slater_margin(p, c, sol.primal_value).map_err(stage("slater"))?;
    cert.surjection =
        Some(surjection_spotcheck(c, opts.samples, opts.seed).map_err(stage("surjection"))?);
    if p.coord_bounds().is_ok() {
        cert.inclusion = inclusion_spotcheck(p, c, opts.samples, opts.seed).ok();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCrossCheck {
    pub primal_oracle: f64,
    pub grid_step: f64,
    pub slack: f64,
    pub primal_ok: bool,
    /// Grid value of the dual function at the certificate's multipliers; `−∞` when unbounded.
    pub dual_oracle: f64,
    pub dual_ok: bool,
    pub pass: bool,
}

/// Compares a certificate against the brute-force grid oracles of `p`.
pub fn cross_check_with_oracle(
    cert: &DualityCertificate,
    p: &BmiProblem,
    grid: usize,
) -> Result<OracleCrossCheck> {
    let po = primal_oracle(p, grid)?;
    // first-order bound on how far the grid minimum can sit above the true one
    let coords = p.coords_from_assignment(&po.argmin)?;
    let mut variation = 0.0;
    for j in 0..coords.len() {
        let mut c = coords.clone();
        c[j] += po.step;
        variation += (p.objective_value(&p.assignment_from_coords(&c))? - po.value).abs();
    }
    let slack = 2.0 * po.step.max(variation);
    let primal_ok = (po.value - cert.primal_value).abs() <= slack;

    let m = if cert.multipliers.is_empty() {
        Multipliers::zeros_for(p)
    } else {
        Multipliers::new(cert.multipliers.clone())?
    };
    let d = dual_oracle(p, &m, grid)?.value();
    let dual_ok = weak_duality_check(cert.primal_value, d, slack);
    Ok(OracleCrossCheck {
        primal_oracle: po.value,
        grid_step: po.step,
        slack,
        primal_ok,
        dual_oracle: d,
        dual_ok,
        pass: primal_ok && dual_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmi::Monomial;

    fn quick() -> CertifyOptions {
        CertifyOptions {
            samples: 30,
            ..CertifyOptions::default()
        }
    }

    #[test]
    fn example1_certificate() {
        let c = ChangeOfVariables::example1();
        let cert = certify(c.source(), &c, &quick());
        assert_eq!(cert.verdict, Verdict::StrongDualityVerified, "{cert:?}");
        assert!((cert.primal_value - 1.0).abs() < 1e-6);
        assert!((cert.dual_value - 1.0).abs() < 1e-6);
        assert!(cert.gap <= 1e-6);
        assert!(cert.slater_margin > 0.0);
    }

    #[test]
    fn example2_certificate() {
        let c = ChangeOfVariables::example2();
        let cert = certify(c.source(), &c, &quick());
        assert_eq!(cert.verdict, Verdict::StrongDualityVerified, "{cert:?}");
        assert!((cert.primal_value - 2.0).abs() < 1e-6);
        assert!((cert.dual_value - 2.0).abs() < 1e-6);
        let lam: Vec<f64> = cert.multipliers.iter().map(|m| m.get(0, 0)).collect();
        assert!(
            (lam[0] - 1.0).abs() < 1e-5 && (lam[1] - 2.0).abs() < 1e-5,
            "{lam:?}"
        );
    }

    #[test]
    fn tightening_never_upgrades() {
        let c = ChangeOfVariables::example1();
        let cert = certify(c.source(), &c, &quick());
        assert_eq!(
            cert.verdict_at(1e-20, cert.options.tol_feas),
            Verdict::Inconclusive
        );
        assert_eq!(
            cert.verdict_at(cert.options.tol_gap, cert.options.tol_feas),
            cert.verdict
        );
    }

    #[test]
    fn oracle_cross_checks() {
        let c = ChangeOfVariables::example1();
        let cert = certify(c.source(), &c, &quick());
        let r = cross_check_with_oracle(&cert, c.source(), 2001).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.primal_oracle - 1.0).abs() <= 2.0 * r.grid_step);

        let c = ChangeOfVariables::example2();
        let cert = certify(c.source(), &c, &quick());
        let r = cross_check_with_oracle(&cert, c.source(), 501).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn unconstrained_cross_check() {
        let p = BmiProblem::from_polynomials(
            &["x".into()],
            Some(&[(-1.0, 1.0)]),
            &[Monomial {
                coeff: 1.0,
                exponents: vec![2],
            }],
            &[],
        )
        .unwrap();
        let c = ChangeOfVariables::example1();
        let mut cert = certify(c.source(), &c, &quick());
        cert.primal_value = 0.0;
        cert.multipliers.clear();
        let r = cross_check_with_oracle(&cert, &p, 201).unwrap();
        assert_eq!(r.primal_oracle, 0.0);
        assert!(r.pass);
    }
}
