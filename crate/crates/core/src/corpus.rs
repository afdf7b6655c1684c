//! Instance files: JSON schema, canonical serialization and the built-in corpus.
//!
//! Canonical form: object keys sorted, two-space indentation, every float
//! written as `{:.16e}` (17 significant digits, exact round trip), integers
//! (monomial exponents) written plainly, one trailing newline.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bmi::{BmiProblem, Monomial};
use crate::control::{default_epsilon, Clock, LtiSystem};
use crate::convexify::{output_feedback_source, ChangeOfVariables};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    ScalarBmi,
    CtStabilization,
    DtStabilization,
    StaticOutputFeedback,
}

impl InstanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstanceKind::ScalarBmi => "scalar_bmi",
            InstanceKind::CtStabilization => "ct_stabilization",
            InstanceKind::DtStabilization => "dt_stabilization",
            InstanceKind::StaticOutputFeedback => "static_output_feedback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// Scalar polynomial program: minimize `objective` s.t. every constraint `≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polynomials {
    pub variables: Vec<String>,
    pub objective: Vec<MonomialSpec>,
    pub constraints: Vec<Vec<MonomialSpec>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceData {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    /// One `[lo, hi]` interval per scalar variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomials: Option<Polynomials>,
    /// Change of variables for `scalar_bmi` instances: `example1` or `example2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_star: Option<f64>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: String,
    pub kind: InstanceKind,
    pub data: InstanceData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

// ---------------------------------------------------------------------------
// canonical JSON

/// Canonical text of an arbitrary JSON value.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64().filter(|_| !n.is_f64()) {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64().filter(|_| !n.is_f64()) {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap_or(f64::NAN));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

// ---------------------------------------------------------------------------
// parsing and validation

impl InstanceFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let inst: InstanceFile = serde_json::from_str(text).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Data => Error::SchemaMismatch(e.to_string()),
                _ => Error::Parse {
                    line: e.line(),
                    column: e.column(),
                    offset: byte_offset(text, e.line(), e.column()),
                    message: e.to_string(),
                },
            }
        })?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_canonical_string(&self) -> Result<String> {
        self.validate()?;
        let v = serde_json::to_value(self).map_err(|e| Error::Internal(e.to_string()))?;
        Ok(canonical_json(&v))
    }

    /// Schema checks beyond what the JSON types enforce.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "unsupported schema_version {:?} (expected {SCHEMA_VERSION:?})",
                self.schema_version
            )));
        }
        let d = &self.data;
        let mut floats: Vec<f64> = Vec::new();
        for m in [&d.a, &d.b, &d.c].into_iter().flatten() {
            floats.extend(m.iter().flatten());
        }
        if let Some(bx) = &d.boxes {
            floats.extend(bx.iter().flatten());
        }
        floats.extend(d.epsilon);
        if let Some(p) = &d.polynomials {
            floats.extend(
                p.objective
                    .iter()
                    .chain(p.constraints.iter().flatten())
                    .map(|m| m.coeff),
            );
        }
        if let Some(e) = &self.expected {
            floats.extend(e.p_star.iter().chain(&e.d_star));
        }
        if floats.iter().any(|x| !x.is_finite()) {
            return Err(Error::SchemaMismatch("non-finite number".into()));
        }
        if let Some(eps) = d.epsilon {
            if eps <= 0.0 {
                return Err(Error::SchemaMismatch(format!(
                    "epsilon must be positive, got {eps}"
                )));
            }
        }
        let field = |name: &str| {
            Error::SchemaMismatch(format!("kind {} requires data.{name}", self.kind.name()))
        };
        match self.kind {
            InstanceKind::ScalarBmi => {
                let p = d.polynomials.as_ref().ok_or_else(|| field("polynomials"))?;
                let nv = p.variables.len();
                for m in p.objective.iter().chain(p.constraints.iter().flatten()) {
                    if m.exponents.len() != nv {
                        return Err(Error::SchemaMismatch(format!(
                            "monomial has {} exponents for {nv} variables",
                            m.exponents.len()
                        )));
                    }
                }
                if let Some(bx) = &d.boxes {
                    if bx.len() != nv {
                        return Err(Error::SchemaMismatch(format!(
                            "{} boxes for {nv} variables",
                            bx.len()
                        )));
                    }
                    if bx.iter().any(|[lo, hi]| lo > hi) {
                        return Err(Error::SchemaMismatch("box with lo > hi".into()));
                    }
                }
            }
            _ => {
                let a = matrix("A", d.a.as_ref().ok_or_else(|| field("A"))?)?;
                let b = matrix("B", d.b.as_ref().ok_or_else(|| field("B"))?)?;
                if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
                    return Err(Error::SchemaMismatch(format!(
                        "A is {}x{} and B is {}x{}",
                        a.nrows(),
                        a.ncols(),
                        b.nrows(),
                        b.ncols()
                    )));
                }
                if self.kind == InstanceKind::StaticOutputFeedback {
                    let c = matrix("C", d.c.as_ref().ok_or_else(|| field("C"))?)?;
                    if c.ncols() != a.nrows() {
                        return Err(Error::SchemaMismatch(format!(
                            "C has {} columns for n = {}",
                            c.ncols(),
                            a.nrows()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    // -----------------------------------------------------------------------
    // conversions

    /// The LTI system of a stabilization or output-feedback instance.
    pub fn system(&self) -> Result<LtiSystem> {
        let clock = match self.kind {
            InstanceKind::CtStabilization | InstanceKind::StaticOutputFeedback => {
                Clock::ContinuousTime
            }
            InstanceKind::DtStabilization => Clock::DiscreteTime,
            InstanceKind::ScalarBmi => {
                return Err(Error::InvalidArgument(
                    "scalar_bmi instances carry no LTI system".into(),
                ))
            }
        };
        let a = matrix(
            "A",
            self.data
                .a
                .as_ref()
                .ok_or_else(|| Error::SchemaMismatch("missing A".into()))?,
        )?;
        let b = matrix(
            "B",
            self.data
                .b
                .as_ref()
                .ok_or_else(|| Error::SchemaMismatch("missing B".into()))?,
        )?;
        LtiSystem::new(a, b, clock)
    }

    pub fn output_matrix(&self) -> Result<Option<DMatrix<f64>>> {
        self.data.c.as_ref().map(|c| matrix("C", c)).transpose()
    }

    /// `ε` for control instances: the stored value or the default for the system.
    pub fn epsilon(&self) -> Result<f64> {
        match self.data.epsilon {
            Some(e) => Ok(e),
            None => Ok(default_epsilon(&self.system()?)),
        }
    }

    /// The lossless change of variables for this instance. Output feedback
    /// has none.
    pub fn change_of_variables(&self) -> Result<ChangeOfVariables> {
        match self.kind {
            InstanceKind::ScalarBmi => {
                let source = self.scalar_source()?;
                let name =
                    self.data.map.as_deref().ok_or_else(|| {
                        Error::NoLosslessMap("scalar_bmi without data.map".into())
                    })?;
                let (canonical, build): (Polynomials, fn(BmiProblem) -> Result<ChangeOfVariables>) =
                    match name {
                        "example1" => (example1_polynomials(), ChangeOfVariables::example1_for),
                        "example2" => (example2_polynomials(), ChangeOfVariables::example2_for),
                        other => {
                            return Err(Error::NoLosslessMap(format!(
                                "scalar_bmi with unknown map {other:?}"
                            )))
                        }
                    };
                if !same_polynomials(
                    self.data.polynomials.as_ref().expect("validated"),
                    &canonical,
                ) {
                    return Err(Error::NoLosslessMap(format!(
                        "scalar_bmi whose polynomials differ from map {name:?}"
                    )));
                }
                build(source)
            }
            InstanceKind::CtStabilization | InstanceKind::DtStabilization => {
                ChangeOfVariables::control(&self.system()?, self.epsilon()?)
            }
            InstanceKind::StaticOutputFeedback => {
                Err(Error::NoLosslessMap(self.kind.name().into()))
            }
        }
    }

    /// The original (non-convex) problem.
    pub fn source_problem(&self) -> Result<BmiProblem> {
        match self.kind {
            InstanceKind::ScalarBmi => self.scalar_source(),
            InstanceKind::StaticOutputFeedback => {
                let c = self
                    .output_matrix()?
                    .ok_or_else(|| Error::SchemaMismatch("missing C".into()))?;
                output_feedback_source(&self.system()?, &c, self.epsilon()?)
            }
            _ => Ok(self.change_of_variables()?.source().clone()),
        }
    }

    fn scalar_source(&self) -> Result<BmiProblem> {
        let p =
            self.data.polynomials.as_ref().ok_or_else(|| {
                Error::SchemaMismatch("scalar_bmi requires data.polynomials".into())
            })?;
        let mono = |m: &MonomialSpec| Monomial {
            coeff: m.coeff,
            exponents: m.exponents.clone(),
        };
        let boxes: Option<Vec<(f64, f64)>> = self
            .data
            .boxes
            .as_ref()
            .map(|b| b.iter().map(|[l, h]| (*l, *h)).collect());
        BmiProblem::from_polynomials(
            &p.variables,
            boxes.as_deref(),
            &p.objective.iter().map(mono).collect::<Vec<_>>(),
            &p.constraints
                .iter()
                .map(|c| c.iter().map(mono).collect())
                .collect::<Vec<_>>(),
        )
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::SchemaMismatch(format!(
            "{name} must be a non-empty rectangular array"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Order-insensitive comparison of polynomial programs.
fn same_polynomials(a: &Polynomials, b: &Polynomials) -> bool {
    let norm = |ms: &[MonomialSpec]| {
        let mut v: Vec<(Vec<u32>, u64)> = ms
            .iter()
            .filter(|m| m.coeff != 0.0)
            .map(|m| (m.exponents.clone(), m.coeff.to_bits()))
            .collect();
        v.sort();
        v
    };
    let mut ca: Vec<_> = a.constraints.iter().map(|c| norm(c)).collect();
    let mut cb: Vec<_> = b.constraints.iter().map(|c| norm(c)).collect();
    ca.sort();
    cb.sort();
    a.variables == b.variables && norm(&a.objective) == norm(&b.objective) && ca == cb
}

pub fn load(path: impl AsRef<Path>) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path)?;
    InstanceFile::from_json_str(&text)
}

pub fn save(instance: &InstanceFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance.to_canonical_string()?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// built-in instances

fn m(coeff: f64, exponents: &[u32]) -> MonomialSpec {
    MonomialSpec {
        coeff,
        exponents: exponents.to_vec(),
    }
}

/// `min x²  s.t.  1 − x² ≤ 0`.
pub fn example1_polynomials() -> Polynomials {
    Polynomials {
        variables: vec!["x".into()],
        objective: vec![m(1.0, &[2])],
        constraints: vec![vec![m(1.0, &[0]), m(-1.0, &[2])]],
    }
}

/// `min x₁² + x₁x₂²  s.t.  1 − x₁x₂² ≤ 0,  1 − x₁ ≤ 0`.
pub fn example2_polynomials() -> Polynomials {
    Polynomials {
        variables: vec!["x1".into(), "x2".into()],
        objective: vec![m(1.0, &[2, 0]), m(1.0, &[1, 2])],
        constraints: vec![
            vec![m(1.0, &[0, 0]), m(-1.0, &[1, 2])],
            vec![m(1.0, &[0, 0]), m(-1.0, &[1, 0])],
        ],
    }
}

fn control_instance(
    kind: InstanceKind,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: Option<&DMatrix<f64>>,
) -> InstanceFile {
    InstanceFile {
        schema_version: SCHEMA_VERSION.into(),
        kind,
        data: InstanceData {
            a: Some(rows_of(a)),
            b: Some(rows_of(b)),
            c: c.map(rows_of),
            ..Default::default()
        },
        expected: None,
    }
}

fn sof_demo() -> InstanceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut draw = |r: usize, c: usize| {
        DMatrix::from_fn(r, c, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            // two decimals keep the golden file readable
            (z / 3f64.sqrt() * 100.0).round() / 100.0
        })
    };
    let a = draw(3, 3);
    let b = draw(3, 1);
    let c = draw(2, 3);
    control_instance(InstanceKind::StaticOutputFeedback, &a, &b, Some(&c))
}

pub const BUILTIN_NAMES: [&str; 7] = [
    "example1",
    "example2",
    "ct_double_integrator",
    "dt_unstable_scalar",
    "sof_demo",
    "ct_unstabilizable_scalar",
    "dt_unstabilizable_scalar",
];

pub fn builtin(name: &str) -> Result<InstanceFile> {
    let scalar =
        |poly: Polynomials, boxes: Vec<[f64; 2]>, map: &str, value: f64, provenance: &str| {
            InstanceFile {
                schema_version: SCHEMA_VERSION.into(),
                kind: InstanceKind::ScalarBmi,
                data: InstanceData {
                    boxes: Some(boxes),
                    polynomials: Some(poly),
                    map: Some(map.into()),
                    ..Default::default()
                },
                expected: Some(Expected {
                    p_star: Some(value),
                    d_star: Some(value),
                    provenance: provenance.into(),
                }),
            }
        };
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    Ok(match name {
        "example1" => scalar(
            example1_polynomials(),
            vec![[-3.0, 3.0]],
            "example1",
            1.0,
            "closed form: optimum at x = ±1, dual maximized at λ = 1",
        ),
        "example2" => scalar(
            example2_polynomials(),
            vec![[0.5, 3.0], [0.5, 3.0]],
            "example2",
            2.0,
            "closed form: optimum at x = (1, 1); dual attained at λ = (1, 2)",
        ),
        "ct_double_integrator" => control_instance(
            InstanceKind::CtStabilization,
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            None,
        ),
        "dt_unstable_scalar" => {
            control_instance(InstanceKind::DtStabilization, &s(1.2), &s(1.0), None)
        }
        "sof_demo" => sof_demo(),
        "ct_unstabilizable_scalar" => {
            control_instance(InstanceKind::CtStabilization, &s(1.0), &s(0.0), None)
        }
        "dt_unstabilizable_scalar" => {
            control_instance(InstanceKind::DtStabilization, &s(2.0), &s(0.0), None)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown builtin {other:?}; known: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    })
}

/// Every built-in instance with its name.
pub fn builtins() -> Vec<(&'static str, InstanceFile)> {
    BUILTIN_NAMES
        .iter()
        .map(|n| (*n, builtin(n).expect("builtin names are valid")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmi::Assignment;

    #[test]
    fn builtin_corpus_shape() {
        let all = builtins();
        assert!(all.len() >= 5);
        let ex1 = builtin("example1").unwrap();
        assert_eq!(ex1.kind, InstanceKind::ScalarBmi);
        assert_eq!(ex1.expected.as_ref().unwrap().p_star, Some(1.0));
        assert_eq!(
            builtin("example2").unwrap().expected.unwrap().p_star,
            Some(2.0)
        );
        let sof = builtin("sof_demo").unwrap();
        let c = sof.output_matrix().unwrap().unwrap();
        assert_eq!((c.nrows(), c.ncols()), (2, 3));
        assert_eq!(sof.system().unwrap().m(), 1);
        for (_, inst) in &all {
            inst.validate().unwrap();
        }
    }

    #[test]
    fn example1_constraint_boundary() {
        let p = builtin("example1").unwrap().source_problem().unwrap();
        let r = p
            .constraint_values(&Assignment::new().with_scalar("x", 1.0))
            .unwrap();
        assert_eq!(r[0].get(0, 0), 0.0);
    }

    #[test]
    fn canonical_round_trip_is_identity() {
        for (name, inst) in builtins() {
            let text = inst.to_canonical_string().unwrap();
            assert!(text.ends_with("}\n"), "{name}");
            let back = InstanceFile::from_json_str(&text).unwrap();
            assert_eq!(back, inst, "{name}");
            assert_eq!(back.to_canonical_string().unwrap(), text, "{name}");
        }
    }

    #[test]
    fn canonical_float_format() {
        let text = builtin("dt_unstable_scalar")
            .unwrap()
            .to_canonical_string()
            .unwrap();
        assert!(text.contains("1.2000000000000000e0"), "{text}");
        assert!(text.contains("\"schema_version\": \"1.0\""));
    }

    #[test]
    fn truncated_file_reports_offset() {
        let text = builtin("example1").unwrap().to_canonical_string().unwrap();
        let cut = &text[..text.len() / 2];
        match InstanceFile::from_json_str(cut) {
            Err(Error::Parse { offset, line, .. }) => {
                assert!(line >= 1);
                assert!(offset <= cut.len());
                assert!(offset > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_and_non_finite_rejected() {
        let mut v = serde_json::to_value(builtin("example1").unwrap()).unwrap();
        v["data"]["bogus"] = Value::from(1.0);
        assert!(matches!(
            InstanceFile::from_json_str(&v.to_string()),
            Err(Error::SchemaMismatch(_))
        ));
        let bad = r#"{"schema_version":"1.0","kind":"dt_stabilization","data":{"A":[[1e400]],"B":[[1]]}}"#;
        assert!(InstanceFile::from_json_str(bad).is_err());
        let mut inst = builtin("dt_unstable_scalar").unwrap();
        inst.data.a = Some(vec![vec![f64::NAN]]);
        assert!(matches!(
            inst.to_canonical_string(),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn sof_has_no_lossless_map() {
        let err = builtin("sof_demo")
            .unwrap()
            .change_of_variables()
            .unwrap_err();
        assert_eq!(
            err.to_string(),
            "no lossless convexification available for kind static_output_feedback"
        );
    }

    #[test]
    fn mismatched_polynomials_refused() {
        let mut inst = builtin("example1").unwrap();
        inst.data.polynomials.as_mut().unwrap().objective[0].coeff = 2.0;
        assert!(matches!(
            inst.change_of_variables(),
            Err(Error::NoLosslessMap(_))
        ));
        let mut inst = builtin("example2").unwrap();
        inst.data.map = Some("example1".into());
        assert!(matches!(
            inst.change_of_variables(),
            Err(Error::NoLosslessMap(_))
        ));
    }

    #[test]
    fn conversions_build_maps() {
        for name in [
            "example1",
            "example2",
            "ct_double_integrator",
            "dt_unstable_scalar",
        ] {
            let c = builtin(name).unwrap().change_of_variables().unwrap();
            assert!(c.target().nvars() > 0, "{name}");
        }
    }
}
