//! Lossless convexification maps: forward map `h`, recovery `q`, the
//! convexified target program, and sampled evidence for surjectivity and for
//! the epigraph inclusion `𝒜 ⊆ 𝒜′`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bmi::{
    Assignment, BilinearMatrixExpr, BlockKind, BmiProblem, Domain, Factor, Monomial, Multipliers,
    Objective, ProductTerm, VariableBlock,
};
use crate::control::{Clock, LtiSystem};
use crate::error::{Error, Result};
use crate::sdp::{self, SdpBuilder, SdpProblem, SdpStatus, VarShape};
use crate::symmat::{is_nsd, SymMat};

/// `P` counts as singular when `min |eig(P)|` is at or below this.
pub const SINGULAR_GATE: f64 = 1e-10;
pub const ROUNDTRIP_TOL: f64 = 1e-8;
pub const SOURCE_VIOLATION_TOL: f64 = 1e-7;
pub const EPIGRAPH_TOL: f64 = 1e-10;
/// Normalization constant: `Tr(P) ≤ n·CONTROL_SCALE` and `‖M‖₂ ≤ n·CONTROL_SCALE`.
pub const CONTROL_SCALE: f64 = 1e3;
/// Box used by the grid oracles and the inclusion sampler for control sources.
pub const CONTROL_BOX: f64 = 2.0;

const RANDOM_OBJECTIVES: usize = 10;
const VERTEX_TOL_GAP: f64 = 1e-4;
const VERTEX_TOL_FEAS: f64 = 1e-6;
const INCLUSION_TOL: f64 = 1e-9;
/// Inclusion samples of control sources keep `min |eig(P)|` above this.
const SAMPLE_P_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// `v = −x²`
    Example1,
    /// `(v₁, v₂) = (x₁, x₁x₂²)`
    Example2,
    /// `(P, M, t) = (P, FP, t)` for the continuous-time Lyapunov margin program
    ControlCt,
    /// `(P, M, t) = (P, FP, t)` for the discrete-time Lyapunov margin program
    ControlDt,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Example1 => "example1",
            MapKind::Example2 => "example2",
            MapKind::ControlCt => "control_ct",
            MapKind::ControlDt => "control_dt",
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, MapKind::ControlCt | MapKind::ControlDt)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ControlData {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    epsilon: f64,
    trace_bound: f64,
    gain_bound: f64,
}

/// A change of variables together with its source (non-convex) and target (SDP) programs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeOfVariables {
    kind: MapKind,
    source: BmiProblem,
    target: SdpProblem,
    control: Option<ControlData>,
}

fn mono(coeff: f64, exps: &[u32]) -> Monomial {
    Monomial {
        coeff,
        exponents: exps.to_vec(),
    }
}

/// `min x²  s.t.  1 − x² ≤ 0` over the box `[lo, hi]`.
pub fn example1_source(lo: f64, hi: f64) -> BmiProblem {
    BmiProblem::from_polynomials(
        &["x".to_string()],
        Some(&[(lo, hi)]),
        &[mono(1.0, &[2])],
        &[vec![mono(1.0, &[0]), mono(-1.0, &[2])]],
    )
    .expect("example 1 is well formed")
}

/// `min x₁² + x₁x₂²  s.t.  1 − x₁x₂² ≤ 0,  1 − x₁ ≤ 0` over `[lo, hi]²`.
pub fn example2_source(lo: f64, hi: f64) -> BmiProblem {
    BmiProblem::from_polynomials(
        &["x1".to_string(), "x2".to_string()],
        Some(&[(lo, hi), (lo, hi)]),
        &[mono(1.0, &[2, 0]), mono(1.0, &[1, 2])],
        &[
            vec![mono(1.0, &[0, 0]), mono(-1.0, &[1, 2])],
            vec![mono(1.0, &[0, 0]), mono(-1.0, &[1, 0])],
        ],
    )
    .expect("example 2 is well formed")
}

fn require_scalars(source: &BmiProblem, names: &[&str]) -> Result<()> {
    for n in names {
        match source.block(n) {
            Some(b) if b.kind == BlockKind::Scalar => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "source problem needs a scalar block `{n}`"
                )))
            }
        }
    }
    Ok(())
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

fn scalar_m(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

impl ChangeOfVariables {
    pub fn example1() -> Self {
        Self::example1_for(example1_source(-3.0, 3.0)).expect("canonical source")
    }

    /// Example 1 map over a caller-supplied source with a scalar block `x`.
    pub fn example1_for(source: BmiProblem) -> Result<Self> {
        require_scalars(&source, &["x"])?;
        let mut b = SdpBuilder::new();
        let v = b.add_var("v", VarShape::Scalar);
        b.minimize(v, |e| -e[(0, 0)]);
        let blk = b
            .block(1)
            .constant(&scalar_m(1.0))
            .linear(v, |e| e.clone())?
            .finish()?;
        b.push_block(blk);
        Ok(Self {
            kind: MapKind::Example1,
            source,
            target: b.build()?,
            control: None,
        })
    }

    pub fn example2() -> Self {
        Self::example2_for(example2_source(0.5, 3.0)).expect("canonical source")
    }

    /// Example 2 map; the target carries an epigraph variable `w ≥ v₁²`.
    pub fn example2_for(source: BmiProblem) -> Result<Self> {
        require_scalars(&source, &["x1", "x2"])?;
        let mut b = SdpBuilder::new();
        let v1 = b.add_var("v1", VarShape::Scalar);
        let v2 = b.add_var("v2", VarShape::Scalar);
        let w = b.add_var("w", VarShape::Scalar);
        b.minimize(w, |e| e[(0, 0)]);
        b.minimize(v2, |e| e[(0, 0)]);
        let epi = b
            .block(2)
            .constant(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]))
            .linear(w, |e| {
                DMatrix::from_row_slice(2, 2, &[-e[(0, 0)], 0.0, 0.0, 0.0])
            })?
            .linear(v1, |e| {
                DMatrix::from_row_slice(2, 2, &[0.0, e[(0, 0)], e[(0, 0)], 0.0])
            })?
            .finish()?;
        b.push_block(epi);
        let c1 = b
            .block(1)
            .constant(&scalar_m(1.0))
            .linear(v2, |e| -e)?
            .finish()?;
        b.push_block(c1);
        let c2 = b
            .block(1)
            .constant(&scalar_m(1.0))
            .linear(v1, |e| -e)?
            .finish()?;
        b.push_block(c2);
        Ok(Self {
            kind: MapKind::Example2,
            source,
            target: b.build()?,
            control: None,
        })
    }

    /// Lyapunov margin program `min t` in `(P, F, t)` and its convexification in `(P, M, t)`.
    pub fn control(sys: &LtiSystem, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let (n, m) = (sys.n(), sys.m());
        let data = ControlData {
            a: sys.a().clone(),
            b: sys.b().clone(),
            epsilon,
            trace_bound: n as f64 * CONTROL_SCALE,
            gain_bound: n as f64 * CONTROL_SCALE,
        };
        let kind = match sys.clock() {
            Clock::ContinuousTime => MapKind::ControlCt,
            Clock::DiscreteTime => MapKind::ControlDt,
        };
        let source = control_source(kind, &data, n, m)?;
        let target = control_target(kind, &data, n, m)?;
        Ok(Self {
            kind,
            source,
            target,
            control: Some(data),
        })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn source(&self) -> &BmiProblem {
        &self.source
    }

    pub fn target(&self) -> &SdpProblem {
        &self.target
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.control.as_ref().map(|c| c.epsilon)
    }

    /// `h`: source point to image point.
    pub fn forward(&self, x: &Assignment) -> Result<Assignment> {
        match self.kind {
            MapKind::Example1 => {
                let x = x.scalar("x")?;
                Ok(Assignment::new().with_scalar("v", -x * x))
            }
            MapKind::Example2 => {
                let (x1, x2) = (x.scalar("x1")?, x.scalar("x2")?);
                Ok(Assignment::new()
                    .with_scalar("v1", x1)
                    .with_scalar("v2", x1 * x2 * x2))
            }
            MapKind::ControlCt | MapKind::ControlDt => {
                let p = x.get("P")?;
                check_invertible(p)?;
                Ok(Assignment::new()
                    .with("P", p.clone())
                    .with("M", x.get("F")? * p)
                    .with("t", x.get("t")?.clone()))
            }
        }
    }

    /// `q`: image point to source point, with `h(q(v)) = v`.
    pub fn recover(&self, v: &Assignment) -> Result<Assignment> {
        match self.kind {
            MapKind::Example1 => {
                let v = v.scalar("v")?;
                if v > 0.0 {
                    return Err(Error::DomainViolation(format!(
                        "v = {v} has no real square root of −v"
                    )));
                }
                Ok(Assignment::new().with_scalar("x", (-v).sqrt()))
            }
            MapKind::Example2 => {
                let (v1, v2) = (v.scalar("v1")?, v.scalar("v2")?);
                let ratio = v2 / v1;
                if v1 == 0.0 || !(ratio >= 0.0) {
                    return Err(Error::DomainViolation(format!(
                        "(v1, v2) = ({v1}, {v2}) needs v2/v1 ≥ 0"
                    )));
                }
                Ok(Assignment::new()
                    .with_scalar("x1", v1)
                    .with_scalar("x2", ratio.sqrt()))
            }
            MapKind::ControlCt | MapKind::ControlDt => {
                let p = v.get("P")?;
                let f = right_divide(v.get("M")?, p)?;
                Ok(Assignment::new()
                    .with("P", p.clone())
                    .with("F", f)
                    .with("t", v.get("t")?.clone()))
            }
        }
    }

    /// Image point from target SDP coordinates.
    pub fn image_from_sdp(&self, v: &[f64]) -> Result<Assignment> {
        let names: &[&str] = match self.kind {
            MapKind::Example1 => &["v"],
            MapKind::Example2 => &["v1", "v2"],
            MapKind::ControlCt | MapKind::ControlDt => &["P", "M", "t"],
        };
        let mut out = Assignment::new();
        for n in names {
            out.set(n, self.target.extract(n, v)?);
        }
        Ok(out)
    }

    /// `f′(v)`.
    pub fn image_objective(&self, v: &Assignment) -> Result<f64> {
        match self.kind {
            MapKind::Example1 => Ok(-v.scalar("v")?),
            MapKind::Example2 => {
                let v1 = v.scalar("v1")?;
                Ok(v1 * v1 + v.scalar("v2")?)
            }
            MapKind::ControlCt | MapKind::ControlDt => v.scalar("t"),
        }
    }

    /// `Φ′ᵢ(v)` in the same order as the source constraints.
    pub fn image_constraints(&self, v: &Assignment) -> Result<Vec<SymMat>> {
        match self.kind {
            MapKind::Example1 => Ok(vec![SymMat::scalar(v.scalar("v")? + 1.0)]),
            MapKind::Example2 => Ok(vec![
                SymMat::scalar(1.0 - v.scalar("v2")?),
                SymMat::scalar(1.0 - v.scalar("v1")?),
            ]),
            MapKind::ControlCt | MapKind::ControlDt => {
                let c = self.control.as_ref().expect("control data");
                let (p, mm, t) = (v.get("P")?, v.get("M")?, v.scalar("t")?);
                let n = p.nrows();
                let m = mm.nrows();
                let shift = DMatrix::identity(n, n) * (c.epsilon - t);
                let x = &c.a * p + &c.b * mm;
                let lyap = if self.kind == MapKind::ControlCt {
                    &x + x.transpose() + &shift
                } else {
                    sym(&right_divide(&x, p)? * x.transpose()) - p + &shift
                };
                let mut gain = DMatrix::zeros(m + n, m + n);
                gain.fill_diagonal(-c.gain_bound);
                gain.view_mut((0, m), (m, n)).copy_from(mm);
                gain.view_mut((m, 0), (n, m)).copy_from(&mm.transpose());
                Ok(vec![
                    SymMat::new(sym(lyap))?,
                    SymMat::new(sym(&shift - p))?,
                    SymMat::scalar(p.trace() - c.trace_bound),
                    SymMat::new(gain)?,
                ])
            }
        }
    }

    /// Source multipliers read off the target SDP's dual blocks, clipped to
    /// the PSD cone to remove rounding-level negative eigenvalues.
    pub fn source_multipliers(&self, z: &[SymMat]) -> Result<Multipliers> {
        let need = self.target.blocks().len();
        if z.len() < need {
            return Err(Error::DimensionMismatch(format!(
                "{} dual blocks for {need} target blocks",
                z.len()
            )));
        }
        let picked = match self.kind {
            MapKind::Example1 => vec![z[0].clone()],
            MapKind::Example2 => vec![z[1].clone(), z[2].clone()],
            MapKind::ControlCt => z[..4].to_vec(),
            MapKind::ControlDt => {
                let n = z[1].dim();
                vec![
                    SymMat::new(sym(z[0].block(0, 0, n, n)))?,
                    z[1].clone(),
                    z[2].clone(),
                    z[3].clone(),
                ]
            }
        };
        Multipliers::new(picked.iter().map(psd_part).collect::<Result<_>>()?)
    }

    /// Region sampled for surjection evidence: the target's feasible set,
    /// restricted for control maps to `t ≤ 0` so that `P ⪰ εI`.
    fn sampling_region(&self) -> Result<SdpProblem> {
        if !self.kind.is_control() {
            return Ok(self.target.clone());
        }
        let mut b = self.target.clone();
        let t = b.var("t").expect("control target has t").offset;
        let cap = sdp::AffineMatrixExpr::new(SymMat::scalar(0.0), vec![(t, SymMat::scalar(1.0))])?;
        b = sdp::SdpProblem::new(
            b.objective().to_vec(),
            b.blocks()
                .iter()
                .cloned()
                .chain(std::iter::once(cap))
                .collect(),
            b.vars().to_vec(),
        )?;
        Ok(b)
    }

    /// Uniform source sample inside the bounds box and the domain.
    fn sample_source(&self, p: &BmiProblem, rng: &mut ChaCha8Rng) -> Result<Option<Assignment>> {
        let bounds = p.coord_bounds()?;
        for _ in 0..1000 {
            let coords: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            let x = p.assignment_from_coords(&coords);
            if !p.in_domain(&x)? {
                continue;
            }
            if self.kind.is_control() {
                let pm = SymMat::new(sym(x.get("P")?.clone()))?;
                let e = pm.eig()?;
                if e.eigenvalues.iter().any(|l| l.abs() < SAMPLE_P_FLOOR) {
                    continue;
                }
            }
            return Ok(Some(x));
        }
        Ok(None)
    }
}

fn psd_part(s: &SymMat) -> Result<SymMat> {
    if s.min_eig() >= 0.0 {
        return Ok(s.clone());
    }
    let mut e = s.eig()?;
    for l in &mut e.eigenvalues {
        *l = l.max(0.0);
    }
    Ok(SymMat::symmetrized(e.reconstruct()))
}

/// `M P⁻¹` through an LU solve, after the singularity gate.
fn right_divide(m: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_invertible(p)?;
    let ft = p
        .transpose()
        .lu()
        .solve(&m.transpose())
        .ok_or(Error::SingularP)?;
    Ok(ft.transpose())
}

fn check_invertible(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::NotSquare {
            rows: p.nrows(),
            cols: p.ncols(),
        });
    }
    let s = SymMat::new(p.clone()).map_err(|_| Error::SingularP)?;
    let e = s.eig().map_err(|_| Error::SingularP)?;
    if e.eigenvalues.iter().any(|l| l.abs() <= SINGULAR_GATE) {
        return Err(Error::SingularP);
    }
    Ok(())
}

fn control_source(kind: MapKind, c: &ControlData, n: usize, m: usize) -> Result<BmiProblem> {
    let eye = DMatrix::<f64>::identity(n, n);
    let blocks = vec![
        VariableBlock::new("P", BlockKind::Symmetric(n)).bounded(-CONTROL_BOX, CONTROL_BOX),
        VariableBlock::new("F", BlockKind::Matrix { rows: m, cols: n })
            .bounded(-CONTROL_BOX, CONTROL_BOX),
        VariableBlock::new("t", BlockKind::Scalar).bounded(-CONTROL_BOX, CONTROL_BOX),
    ];
    let objective = Objective::new(0.0, vec![ProductTerm::new(1.0, vec![Factor::var("t")])]);
    let k = |m: &DMatrix<f64>| Factor::konst(m.clone());
    let minus_t = ProductTerm::new(-1.0, vec![k(&eye), Factor::var("t")]);
    let lyap_terms = match kind {
        MapKind::ControlCt => vec![
            ProductTerm::new(2.0, vec![k(&c.a), Factor::var("P")]),
            ProductTerm::new(2.0, vec![k(&c.b), Factor::var("F"), Factor::var("P")]),
            minus_t.clone(),
        ],
        _ => vec![
            ProductTerm::new(1.0, vec![k(&c.a), Factor::var("P"), k(&c.a.transpose())]),
            ProductTerm::new(
                2.0,
                vec![
                    k(&c.a),
                    Factor::var("P"),
                    Factor::var_t("F"),
                    k(&c.b.transpose()),
                ],
            ),
            ProductTerm::new(
                1.0,
                vec![
                    k(&c.b),
                    Factor::var("F"),
                    Factor::var("P"),
                    Factor::var_t("F"),
                    k(&c.b.transpose()),
                ],
            ),
            ProductTerm::new(-1.0, vec![Factor::var("P")]),
            minus_t.clone(),
        ],
    };
    let eps_i = SymMat::from_diag(&vec![c.epsilon; n]);
    let lyap = BilinearMatrixExpr::new(eps_i.clone(), lyap_terms);
    let lower = BilinearMatrixExpr::new(
        eps_i,
        vec![ProductTerm::new(-1.0, vec![Factor::var("P")]), minus_t],
    );
    let trace = BilinearMatrixExpr::new(
        SymMat::scalar(-c.trace_bound),
        vec![ProductTerm::new(1.0, vec![Factor::var("P")]).traced()],
    );
    let gain = BilinearMatrixExpr::new(
        SymMat::from_diag(&vec![-c.gain_bound; m + n]),
        vec![ProductTerm::new(2.0, vec![Factor::var("F"), Factor::var("P")]).at(0, m)],
    );
    BmiProblem::new(
        blocks,
        objective,
        vec![lyap, lower, trace, gain],
        Domain::InvertibleBlock("P"),
    )
}

/// Static output feedback `u = K y`, `y = C x`: minimize `t` subject to
/// `(A + BKC)P + P(A + BKC)ᵀ + εI − tI ⪯ 0` and `εI − P − tI ⪯ 0`.
///
/// There is no lossless change of variables for this program; it exists so the
/// instance can be evaluated and brute-forced like any other source problem.
pub fn output_feedback_source(
    sys: &LtiSystem,
    c: &DMatrix<f64>,
    epsilon: f64,
) -> Result<BmiProblem> {
    let (n, m) = (sys.n(), sys.m());
    if c.ncols() != n || c.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "C must have {n} columns and at least one row, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let blocks = vec![
        VariableBlock::new("P", BlockKind::Symmetric(n)).bounded(-CONTROL_BOX, CONTROL_BOX),
        VariableBlock::new(
            "K",
            BlockKind::Matrix {
                rows: m,
                cols: c.nrows(),
            },
        )
        .bounded(-CONTROL_BOX, CONTROL_BOX),
        VariableBlock::new("t", BlockKind::Scalar).bounded(-CONTROL_BOX, CONTROL_BOX),
    ];
    let objective = Objective::new(0.0, vec![ProductTerm::new(1.0, vec![Factor::var("t")])]);
    let k = |m: &DMatrix<f64>| Factor::konst(m.clone());
    let minus_t = ProductTerm::new(-1.0, vec![k(&eye), Factor::var("t")]);
    let eps_i = SymMat::from_diag(&vec![epsilon; n]);
    let lyap = BilinearMatrixExpr::new(
        eps_i.clone(),
        vec![
            ProductTerm::new(2.0, vec![k(sys.a()), Factor::var("P")]),
            ProductTerm::new(
                2.0,
                vec![k(sys.b()), Factor::var("K"), k(c), Factor::var("P")],
            ),
            minus_t.clone(),
        ],
    );
    let lower = BilinearMatrixExpr::new(
        eps_i,
        vec![ProductTerm::new(-1.0, vec![Factor::var("P")]), minus_t],
    );
    BmiProblem::new(blocks, objective, vec![lyap, lower], Domain::Whole)
}

fn control_target(kind: MapKind, c: &ControlData, n: usize, m: usize) -> Result<SdpProblem> {
    let mut b = SdpBuilder::new();
    let p = b.add_var("P", VarShape::Symmetric(n));
    let mm = b.add_var("M", VarShape::Matrix { rows: m, cols: n });
    let t = b.add_var("t", VarShape::Scalar);
    b.minimize(t, |e| e[(0, 0)]);
    let eye = DMatrix::<f64>::identity(n, n);
    let (a, bm) = (&c.a, &c.b);

    let lyap = match kind {
        MapKind::ControlCt => b
            .block(n)
            .constant(&(&eye * c.epsilon))
            .linear(p, |e| a * e + e * a.transpose())?
            .linear(mm, |e| bm * e + (bm * e).transpose())?
            .linear(t, |e| -&eye * e[(0, 0)])?
            .finish()?,
        _ => {
            let embed = |tl: DMatrix<f64>, tr: DMatrix<f64>, br: DMatrix<f64>| {
                let mut out = DMatrix::zeros(2 * n, 2 * n);
                out.view_mut((0, 0), (n, n)).copy_from(&tl);
                out.view_mut((0, n), (n, n)).copy_from(&tr);
                out.view_mut((n, 0), (n, n)).copy_from(&tr.transpose());
                out.view_mut((n, n), (n, n)).copy_from(&br);
                out
            };
            let zero = DMatrix::zeros(n, n);
            b.block(2 * n)
                .constant(&embed(&eye * c.epsilon, zero.clone(), zero.clone()))
                .linear(p, |e| embed(-e, a * e, -e))?
                .linear(mm, |e| embed(zero.clone(), bm * e, zero.clone()))?
                .linear(t, |e| embed(-&eye * e[(0, 0)], zero.clone(), zero.clone()))?
                .finish()?
        }
    };
    b.push_block(lyap);
    let lower = b
        .block(n)
        .constant(&(&eye * c.epsilon))
        .linear(p, |e| -e)?
        .linear(t, |e| -&eye * e[(0, 0)])?
        .finish()?;
    b.push_block(lower);
    let trace = b
        .block(1)
        .constant(&scalar_m(-c.trace_bound))
        .linear(p, |e| scalar_m(e.trace()))?
        .finish()?;
    b.push_block(trace);
    let mut g0 = DMatrix::zeros(m + n, m + n);
    g0.fill_diagonal(-c.gain_bound);
    let gain = b
        .block(m + n)
        .constant(&g0)
        .linear(mm, |e| {
            let mut out = DMatrix::zeros(m + n, m + n);
            out.view_mut((0, m), (m, n)).copy_from(e);
            out.view_mut((m, 0), (n, m)).copy_from(&e.transpose());
            out
        })?
        .finish()?;
    b.push_block(gain);
    b.build()
}

/// Strictly feasible target points: convex combinations of the analytic
/// center with solutions for random linear objectives, inside a box around
/// the optimum.
pub fn strict_target_samples(
    c: &ChangeOfVariables,
    nsamples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let region = c.sampling_region()?;
    let opt = sdp::solve(&region, sdp::DEFAULT_TOL_GAP, sdp::DEFAULT_TOL_FEAS);
    if opt.status != SdpStatus::Optimal {
        return Err(Error::SamplingFailed);
    }
    let radius = 1.0 + opt.v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let boxed = region.with_box(&opt.v, radius);
    let ph = sdp::slater_margin(&boxed);
    if !(ph.margin > 0.0) {
        return Err(Error::SamplingFailed);
    }
    let center = sdp::analytic_center(&boxed, &ph.point).map_err(|_| Error::SamplingFailed)?;
    let strict = |v: &[f64]| sdp::residuals(&boxed, v).iter().all(|r| *r < 0.0);
    if !strict(&center) {
        return Err(Error::SamplingFailed);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::new();
    for _ in 0..RANDOM_OBJECTIVES {
        let obj: Vec<f64> = (0..boxed.nvars())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let sol = sdp::solve(&boxed.with_objective(obj)?, VERTEX_TOL_GAP, VERTEX_TOL_FEAS);
        if strict(&sol.v) {
            vertices.push(sol.v);
        }
    }
    if vertices.is_empty() {
        vertices.push(center.clone());
    }
    let samples = (0..nsamples)
        .map(|_| {
            let vert = &vertices[rng.random_range(0..vertices.len())];
            let theta: f64 = rng.random();
            vert.iter()
                .zip(&center)
                .map(|(a, b)| theta * a + (1.0 - theta) * b)
                .collect()
        })
        .collect();
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurjectionReport {
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    /// `max ‖h(q(v)) − v‖∞ / max(1, ‖v‖∞)`.
    pub worst_roundtrip: f64,
    /// Largest source constraint eigenvalue at `q(v)`, clamped at 0.
    pub worst_source_violation: f64,
    /// Largest `|f(q(v)) − f′(v)|` or entrywise `|Φᵢ(q(v)) − Φ′ᵢ(v)|`, relative to `max(1, scale)`.
    pub worst_transport: f64,
}

pub fn surjection_spotcheck(
    c: &ChangeOfVariables,
    nsamples: usize,
    seed: u64,
) -> Result<SurjectionReport> {
    let samples = strict_target_samples(c, nsamples, seed)?;
    let mut worst_roundtrip = 0.0_f64;
    let mut worst_violation = 0.0_f64;
    let mut worst_transport = 0.0_f64;
    let mut pass = true;
    for s in &samples {
        let v = c.image_from_sdp(s)?;
        let x = match c.recover(&v) {
            Ok(x) => x,
            Err(_) => {
                pass = false;
                worst_roundtrip = f64::INFINITY;
                continue;
            }
        };
        let back = match c.forward(&x) {
            Ok(b) => b,
            Err(_) => {
                pass = false;
                worst_roundtrip = f64::INFINITY;
                continue;
            }
        };
        worst_roundtrip = worst_roundtrip.max(v.max_abs_diff(&back) / v.max_abs().max(1.0));
        for r in c.source.residuals(&x)? {
            worst_violation = worst_violation.max(r);
        }
        let (f, fp) = (c.source.objective_value(&x)?, c.image_objective(&v)?);
        worst_transport = worst_transport.max((f - fp).abs() / fp.abs().max(1.0));
        for (phi, phip) in c
            .source
            .constraint_values(&x)?
            .iter()
            .zip(c.image_constraints(&v)?)
        {
            let diff = (phi - &phip).max_abs();
            worst_transport = worst_transport.max(diff / phip.max_abs().max(1.0));
        }
    }
    pass &= worst_roundtrip <= ROUNDTRIP_TOL && worst_violation <= SOURCE_VIOLATION_TOL;
    Ok(SurjectionReport {
        pass,
        samples: samples.len(),
        seed,
        worst_roundtrip,
        worst_source_violation: worst_violation,
        worst_transport,
    })
}

/// A point `(Ū, t)` of the epigraph space.
#[derive(Debug, Clone, PartialEq)]
pub struct EpigraphPoint {
    pub u: Vec<SymMat>,
    pub t: f64,
}

/// `Φᵢ(x) ⪯ Uᵢ` for all `i` and `f(x) ≤ t`, so `x` witnesses `(Ū, t) ∈ 𝒜`.
pub fn epigraph_member_source(p: &BmiProblem, pt: &EpigraphPoint, x: &Assignment) -> bool {
    let (Ok(vals), Ok(f)) = (p.constraint_values(x), p.objective_value(x)) else {
        return false;
    };
    if vals.len() != pt.u.len() {
        return false;
    }
    let dominated = vals
        .iter()
        .zip(&pt.u)
        .all(|(phi, u)| phi.dim() == u.dim() && is_nsd(&(phi - u), EPIGRAPH_TOL));
    dominated && f <= pt.t + EPIGRAPH_TOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionReport {
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    pub counterexamples: usize,
    /// Largest amount by which `Φ′(h(x)) ⪯ U` or `f′(h(x)) ≤ t` failed.
    pub worst_violation: f64,
}

/// Samples `x` in the box of `p`, lifts it to `(Φ(x) + S, f(x) + r)` with random
/// `S ⪰ 0`, `r ≥ 0`, and checks that `h(x)` witnesses membership in `𝒜′`.
pub fn inclusion_spotcheck(
    p: &BmiProblem,
    c: &ChangeOfVariables,
    nsamples: usize,
    seed: u64,
) -> Result<InclusionReport> {
    inclusion_spotcheck_with(p, c, |x| c.forward(x), nsamples, seed)
}

/// [`inclusion_spotcheck`] with a replacement forward map.
pub fn inclusion_spotcheck_with(
    p: &BmiProblem,
    c: &ChangeOfVariables,
    forward: impl Fn(&Assignment) -> Result<Assignment>,
    nsamples: usize,
    seed: u64,
) -> Result<InclusionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counterexamples = 0;
    let mut worst = 0.0_f64;
    let mut done = 0;
    for _ in 0..nsamples {
        let Some(x) = c.sample_source(p, &mut rng)? else {
            break;
        };
        let phis = p.constraint_values(&x)?;
        let f = p.objective_value(&x)?;
        let u: Vec<SymMat> = phis
            .iter()
            .map(|phi| {
                let k = phi.dim();
                let g = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal));
                let scale: f64 = rng.random();
                phi + &SymMat::symmetrized(&g * g.transpose() * scale)
            })
            .collect();
        let t = f + rng.random::<f64>();
        let pt = EpigraphPoint { u, t };
        if !epigraph_member_source(p, &pt, &x) {
            return Err(Error::Internal(
                "lifted point is not in the source epigraph".into(),
            ));
        }
        done += 1;
        let Ok(v) = forward(&x) else {
            counterexamples += 1;
            worst = f64::INFINITY;
            continue;
        };
        let mut violation = c.image_objective(&v)? - pt.t;
        for (phip, ui) in c.image_constraints(&v)?.iter().zip(&pt.u) {
            violation = violation.max((phip - ui).max_eig() / (1.0 + ui.max_abs()));
        }
        worst = worst.max(violation);
        if violation > INCLUSION_TOL {
            counterexamples += 1;
        }
    }
    if done == 0 {
        return Err(Error::SamplingFailed);
    }
    Ok(InclusionReport {
        pass: counterexamples == 0,
        samples: done,
        seed,
        counterexamples,
        worst_violation: worst,
    })
}
