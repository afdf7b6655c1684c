//! Non-convex matrix-inequality programs: polynomial matrix constraints in
//! named variable blocks, the Lagrangian, and brute-force grid oracles for
//! the primal value and the dual function.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sdp::VarShape;
use crate::symmat::{is_psd, SymMat};

/// Largest number of grid points an oracle will enumerate.
pub const GRID_BUDGET: f64 = 1e7;
/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 4;
/// Multipliers must satisfy `Λ ⪰ −MULTIPLIER_TOL·I`.
pub const MULTIPLIER_TOL: f64 = 1e-10;
/// Feasibility slack used by the primal grid oracle.
pub const GRID_FEAS_TOL: f64 = 1e-9;

const UNBOUNDED_VALUE: f64 = -1e9;
const PROBE_REL_DROP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Scalar,
    Vector(usize),
    Matrix { rows: usize, cols: usize },
    Symmetric(usize),
}

impl BlockKind {
    pub fn shape(&self) -> (usize, usize) {
        self.coords().shape()
    }

    /// Coordinate layout shared with the SDP flattening.
    pub fn coords(&self) -> VarShape {
        match *self {
            BlockKind::Scalar => VarShape::Scalar,
            BlockKind::Vector(n) => VarShape::Matrix { rows: n, cols: 1 },
            BlockKind::Matrix { rows, cols } => VarShape::Matrix { rows, cols },
            BlockKind::Symmetric(n) => VarShape::Symmetric(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableBlock {
    pub name: String,
    pub kind: BlockKind,
    /// Box applied to every scalar coordinate of the block by the grid oracles.
    pub bounds: Option<(f64, f64)>,
}

impl VariableBlock {
    pub fn new(name: &str, kind: BlockKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            bounds: None,
        }
    }

    pub fn bounded(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some((lo, hi));
        self
    }
}

/// Values for named variable blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    values: BTreeMap<String, DMatrix<f64>>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: DMatrix<f64>) -> Self {
        self.set(name, value);
        self
    }

    pub fn with_scalar(self, name: &str, x: f64) -> Self {
        self.with(name, DMatrix::from_element(1, 1, x))
    }

    pub fn set(&mut self, name: &str, value: DMatrix<f64>) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.values
            .get(name)
            .ok_or_else(|| Error::MissingBlock(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        Ok(self.get(name)?[(0, 0)])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DMatrix<f64>)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Largest entrywise difference over the union of names; a missing block counts as infinite.
    pub fn max_abs_diff(&self, other: &Assignment) -> f64 {
        let mut worst = 0.0_f64;
        for (k, v) in &self.values {
            match other.values.get(k) {
                Some(w) if w.shape() == v.shape() => worst = worst.max((v - w).amax()),
                _ => return f64::INFINITY,
            }
        }
        if other.values.keys().any(|k| !self.values.contains_key(k)) {
            return f64::INFINITY;
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0_f64, |a, v| a.max(v.amax()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Const(DMatrix<f64>),
    Var { name: String, transpose: bool },
}

impl Factor {
    pub fn konst(m: DMatrix<f64>) -> Self {
        Factor::Const(m)
    }

    pub fn var(name: &str) -> Self {
        Factor::Var {
            name: name.to_string(),
            transpose: false,
        }
    }

    pub fn var_t(name: &str) -> Self {
        Factor::Var {
            name: name.to_string(),
            transpose: true,
        }
    }
}

/// `scale · sym(embed(F₁ F₂ ⋯ Fₖ))` where `sym(E) = (E + Eᵀ)/2` and the
/// product is placed at `at` inside the constraint block (or reduced to its
/// trace when `trace` is set). A `1×1` factor multiplies as a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub scale: f64,
    pub factors: Vec<Factor>,
    pub at: (usize, usize),
    pub trace: bool,
}

impl ProductTerm {
    pub fn new(scale: f64, factors: Vec<Factor>) -> Self {
        Self {
            scale,
            factors,
            at: (0, 0),
            trace: false,
        }
    }

    pub fn at(mut self, row: usize, col: usize) -> Self {
        self.at = (row, col);
        self
    }

    pub fn traced(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn degree(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| matches!(f, Factor::Var { .. }))
            .count()
    }

    fn shape(&self, kinds: &BTreeMap<&str, BlockKind>) -> Result<(usize, usize)> {
        let mut acc: Option<(usize, usize)> = None;
        for f in &self.factors {
            let s = match f {
                Factor::Const(m) => m.shape(),
                Factor::Var { name, transpose } => {
                    let k = kinds
                        .get(name.as_str())
                        .ok_or_else(|| Error::UnknownBlock(name.clone()))?;
                    let (r, c) = k.shape();
                    if *transpose {
                        (c, r)
                    } else {
                        (r, c)
                    }
                }
            };
            acc = Some(match acc {
                None => s,
                Some((1, 1)) => s,
                Some(a) if s == (1, 1) => a,
                Some(a) if a.1 == s.0 => (a.0, s.1),
                Some(a) => {
                    return Err(Error::DimensionMismatch(format!(
                        "cannot multiply {}x{} by {}x{}",
                        a.0, a.1, s.0, s.1
                    )))
                }
            });
        }
        let shape = acc.unwrap_or((1, 1));
        if self.trace {
            if shape.0 != shape.1 {
                return Err(Error::DimensionMismatch(
                    "trace of a non-square product".into(),
                ));
            }
            return Ok((1, 1));
        }
        Ok(shape)
    }

    fn product(&self, x: &Assignment) -> Result<DMatrix<f64>> {
        let mut acc: Option<DMatrix<f64>> = None;
        for f in &self.factors {
            let owned;
            let m: &DMatrix<f64> = match f {
                Factor::Const(m) => m,
                Factor::Var { name, transpose } => {
                    let v = x.get(name)?;
                    if *transpose {
                        owned = v.transpose();
                        &owned
                    } else {
                        v
                    }
                }
            };
            acc = Some(match acc {
                None => m.clone(),
                Some(a) if a.shape() == (1, 1) => m * a[(0, 0)],
                Some(a) if m.shape() == (1, 1) => a * m[(0, 0)],
                Some(a) => a * m,
            });
        }
        let p = acc.unwrap_or_else(|| DMatrix::from_element(1, 1, 1.0));
        Ok(if self.trace {
            DMatrix::from_element(1, 1, p.trace())
        } else {
            p
        })
    }
}

/// A symmetric-matrix-valued polynomial `Φ(x) = C + Σ terms`, constrained `⪯ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearMatrixExpr {
    constant: SymMat,
    terms: Vec<ProductTerm>,
}

impl BilinearMatrixExpr {
    pub fn new(constant: SymMat, terms: Vec<ProductTerm>) -> Self {
        Self { constant, terms }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn constant(&self) -> &SymMat {
        &self.constant
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(ProductTerm::degree)
            .max()
            .unwrap_or(0)
    }

    fn validate(&self, kinds: &BTreeMap<&str, BlockKind>) -> Result<()> {
        let n = self.dim();
        for t in &self.terms {
            let (r, c) = t.shape(kinds)?;
            let (r0, c0) = t.at;
            if r0 + r > n || c0 + c > n {
                return Err(Error::DimensionMismatch(format!(
                    "{r}x{c} term at ({r0},{c0}) does not fit a {n}x{n} constraint"
                )));
            }
            if r0 == c0 && r != c {
                return Err(Error::DimensionMismatch(
                    "diagonal term must be square".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &Assignment) -> Result<SymMat> {
        let n = self.dim();
        let mut out = self.constant.as_matrix().clone();
        for t in &self.terms {
            let p = t.product(x)?;
            let (r0, c0) = t.at;
            let (r, c) = p.shape();
            let half = 0.5 * t.scale;
            for i in 0..r {
                for j in 0..c {
                    let val = half * p[(i, j)];
                    out[(r0 + i, c0 + j)] += val;
                    out[(c0 + j, r0 + i)] += val;
                }
            }
        }
        debug_assert_eq!(out.nrows(), n);
        Ok(SymMat::symmetrized(out))
    }
}

/// `f(x) = constant + Σ scale·Tr(product)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub constant: f64,
    pub terms: Vec<ProductTerm>,
}

impl Objective {
    pub fn new(constant: f64, terms: Vec<ProductTerm>) -> Self {
        Self {
            constant,
            terms: terms.into_iter().map(ProductTerm::traced).collect(),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vec::new())
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(ProductTerm::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &Assignment) -> Result<f64> {
        let mut acc = self.constant;
        for t in &self.terms {
            acc += t.scale * t.product(x)?[(0, 0)];
        }
        Ok(acc)
    }
}

/// A monomial `coeff · Π xᵢ^eᵢ` over the scalar blocks of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn term(&self, names: &[String]) -> ProductTerm {
        let factors = names
            .iter()
            .zip(&self.exponents)
            .flat_map(|(n, &e)| std::iter::repeat_n(Factor::var(n), e as usize))
            .collect();
        ProductTerm::new(self.coeff, factors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Whole,
    /// The named square block must be invertible.
    InvertibleBlock(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmiProblem {
    blocks: Vec<VariableBlock>,
    objective: Objective,
    constraints: Vec<BilinearMatrixExpr>,
    domain: Domain,
}

impl BmiProblem {
    pub fn new(
        blocks: Vec<VariableBlock>,
        objective: Objective,
        constraints: Vec<BilinearMatrixExpr>,
        domain: Domain,
    ) -> Result<Self> {
        let kinds: BTreeMap<&str, BlockKind> =
            blocks.iter().map(|b| (b.name.as_str(), b.kind)).collect();
        if kinds.len() != blocks.len() {
            return Err(Error::InvalidArgument(
                "duplicate variable block names".into(),
            ));
        }
        if objective.degree() > MAX_DEGREE {
            return Err(Error::DegreeTooHigh(objective.degree()));
        }
        for t in &objective.terms {
            t.shape(&kinds)?;
        }
        for c in &constraints {
            if c.degree() > MAX_DEGREE {
                return Err(Error::DegreeTooHigh(c.degree()));
            }
            c.validate(&kinds)?;
        }
        for b in &blocks {
            if let Some((lo, hi)) = b.bounds {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidArgument(format!(
                        "bad bounds for `{}`",
                        b.name
                    )));
                }
            }
        }
        if let Domain::InvertibleBlock(name) = domain {
            match kinds.get(name) {
                Some(k) if k.shape().0 == k.shape().1 => {}
                _ => return Err(Error::UnknownBlock(name.to_string())),
            }
        }
        Ok(Self {
            blocks,
            objective,
            constraints,
            domain,
        })
    }

    /// Scalar polynomial program over scalar variables named `names`.
    pub fn from_polynomials(
        names: &[String],
        boxes: Option<&[(f64, f64)]>,
        objective: &[Monomial],
        constraints: &[Vec<Monomial>],
    ) -> Result<Self> {
        let check = |m: &Monomial| {
            if m.exponents.len() != names.len() {
                Err(Error::DimensionMismatch(format!(
                    "monomial has {} exponents for {} variables",
                    m.exponents.len(),
                    names.len()
                )))
            } else {
                Ok(())
            }
        };
        let mut blocks = Vec::new();
        for (i, n) in names.iter().enumerate() {
            let mut b = VariableBlock::new(n, BlockKind::Scalar);
            if let Some(bx) = boxes {
                let &(lo, hi) = bx.get(i).ok_or_else(|| Error::MissingBounds(n.clone()))?;
                b = b.bounded(lo, hi);
            }
            blocks.push(b);
        }
        let mut obj_terms = Vec::new();
        let mut obj_const = 0.0;
        for m in objective {
            check(m)?;
            if m.exponents.iter().all(|&e| e == 0) {
                obj_const += m.coeff;
            } else {
                obj_terms.push(m.term(names));
            }
        }
        let mut cons = Vec::new();
        for poly in constraints {
            let mut c0 = 0.0;
            let mut terms = Vec::new();
            for m in poly {
                check(m)?;
                if m.exponents.iter().all(|&e| e == 0) {
                    c0 += m.coeff;
                } else {
                    terms.push(m.term(names));
                }
            }
            cons.push(BilinearMatrixExpr::new(SymMat::scalar(c0), terms));
        }
        Self::new(
            blocks,
            Objective::new(obj_const, obj_terms),
            cons,
            Domain::Whole,
        )
    }

    pub fn blocks(&self) -> &[VariableBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn constraints(&self) -> &[BilinearMatrixExpr] {
        &self.constraints
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Same problem with every block boxed to `[lo, hi]`.
    pub fn with_uniform_box(&self, lo: f64, hi: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.bounds = Some((lo, hi));
        }
        out
    }

    pub fn objective_value(&self, x: &Assignment) -> Result<f64> {
        self.objective.eval(x)
    }

    pub fn constraint_values(&self, x: &Assignment) -> Result<Vec<SymMat>> {
        self.constraints.iter().map(|c| c.eval(x)).collect()
    }

    /// `max_eig(Φᵢ(x))` per constraint.
    pub fn residuals(&self, x: &Assignment) -> Result<Vec<f64>> {
        Ok(self
            .constraint_values(x)?
            .iter()
            .map(SymMat::max_eig)
            .collect())
    }

    pub fn in_domain(&self, x: &Assignment) -> Result<bool> {
        match self.domain {
            Domain::Whole => Ok(true),
            Domain::InvertibleBlock(name) => {
                let m = x.get(name)?;
                Ok(m.clone().try_inverse().is_some())
            }
        }
    }

    pub fn ncoords(&self) -> usize {
        self.blocks.iter().map(|b| b.kind.coords().len()).sum()
    }

    /// Assignment from the concatenated block coordinates.
    pub fn assignment_from_coords(&self, coords: &[f64]) -> Assignment {
        let mut x = Assignment::new();
        let mut off = 0;
        for b in &self.blocks {
            let s = b.kind.coords();
            x.set(&b.name, s.unflatten(&coords[off..off + s.len()]));
            off += s.len();
        }
        x
    }

    pub fn coords_from_assignment(&self, x: &Assignment) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.ncoords());
        for b in &self.blocks {
            out.extend(b.kind.coords().flatten(x.get(&b.name)?));
        }
        Ok(out)
    }

    /// Per-coordinate bounds.
    pub fn coord_bounds(&self) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let bounds = b
                .bounds
                .ok_or_else(|| Error::MissingBounds(b.name.clone()))?;
            out.extend(std::iter::repeat_n(bounds, b.kind.coords().len()));
        }
        Ok(out)
    }
}

pub fn eval_constraint(e: &BilinearMatrixExpr, x: &Assignment) -> Result<SymMat> {
    e.eval(x)
}

/// Lagrange multipliers `Λᵢ ⪰ 0`, one per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers(Vec<SymMat>);

impl Multipliers {
    pub fn new(lambdas: Vec<SymMat>) -> Result<Self> {
        for (i, l) in lambdas.iter().enumerate() {
            let tol = MULTIPLIER_TOL * l.max_abs().max(1.0);
            if !is_psd(l, tol) {
                return Err(Error::InvalidArgument(format!("multiplier {i} is not PSD")));
            }
        }
        Ok(Self(lambdas))
    }

    pub fn scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| SymMat::scalar(v)).collect())
    }

    pub fn zeros_for(p: &BmiProblem) -> Self {
        Self(
            p.constraints
                .iter()
                .map(|c| SymMat::zeros(c.dim()))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[SymMat] {
        &self.0
    }

    fn check_against(&self, p: &BmiProblem) -> Result<()> {
        if self.0.len() != p.constraints.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} multipliers for {} constraints",
                self.0.len(),
                p.constraints.len()
            )));
        }
        for (l, c) in self.0.iter().zip(&p.constraints) {
            if l.dim() != c.dim() {
                return Err(Error::DimensionMismatch("multiplier dimension".into()));
            }
        }
        Ok(())
    }
}

/// `L(x, Λ) = f(x) + Σ Tr(Λᵢ Φᵢ(x))`.
pub fn lagrangian(p: &BmiProblem, x: &Assignment, m: &Multipliers) -> Result<f64> {
    m.check_against(p)?;
    let mut acc = p.objective.eval(x)?;
    for (c, l) in p.constraints.iter().zip(&m.0) {
        acc += l.inner(&c.eval(x)?);
    }
    Ok(acc)
}

/// `d ≤ p + tol`; `d = −∞` always passes.
pub fn weak_duality_check(p_val: f64, d_val: f64, tol: f64) -> bool {
    d_val == f64::NEG_INFINITY || d_val <= p_val + tol
}

struct Grid {
    bounds: Vec<(f64, f64)>,
    per_dim: usize,
    total: usize,
}

impl Grid {
    fn new(p: &BmiProblem, per_dim: usize) -> Result<Self> {
        if per_dim == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one point per dimension".into(),
            ));
        }
        let bounds = p.coord_bounds()?;
        let points = (per_dim as f64).powi(bounds.len() as i32);
        if points > GRID_BUDGET {
            return Err(Error::GridBudgetExceeded {
                points,
                budget: GRID_BUDGET,
            });
        }
        Ok(Self {
            total: per_dim.pow(bounds.len() as u32),
            bounds,
            per_dim,
        })
    }

    /// Includes both endpoints; an odd count on a symmetric box hits 0 exactly.
    fn coord(&self, d: usize, k: usize) -> f64 {
        let (lo, hi) = self.bounds[d];
        if self.per_dim == 1 {
            return 0.5 * (lo + hi);
        }
        lo + (hi - lo) * (k as f64) / ((self.per_dim - 1) as f64)
    }

    fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.bounds.len()];
        for d in (0..self.bounds.len()).rev() {
            out[d] = idx % self.per_dim;
            idx /= self.per_dim;
        }
        out
    }

    fn point(&self, idx: usize) -> Vec<f64> {
        self.digits(idx)
            .iter()
            .enumerate()
            .map(|(d, &k)| self.coord(d, k))
            .collect()
    }

    fn on_boundary(&self, idx: usize) -> bool {
        self.per_dim > 1
            && self
                .digits(idx)
                .iter()
                .any(|&k| k == 0 || k == self.per_dim - 1)
    }

    fn max_step(&self) -> f64 {
        if self.per_dim <= 1 {
            return 0.0;
        }
        self.bounds.iter().fold(0.0_f64, |a, (lo, hi)| {
            a.max((hi - lo) / (self.per_dim - 1) as f64)
        })
    }

    fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Deterministic parallel argmin; ties go to the lowest index.
    fn argmin(&self, f: impl Fn(&[f64]) -> Option<f64> + Sync) -> Option<(f64, usize)> {
        (0..self.total)
            .into_par_iter()
            .filter_map(|i| f(&self.point(i)).filter(|v| !v.is_nan()).map(|v| (v, i)))
            .reduce_with(|a, b| match a.0.total_cmp(&b.0) {
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DualOracle {
    Value { value: f64, argmin: Assignment },
    UnboundedBelow,
}

impl DualOracle {
    /// `−∞` for an unbounded verdict.
    pub fn value(&self) -> f64 {
        match self {
            DualOracle::Value { value, .. } => *value,
            DualOracle::UnboundedBelow => f64::NEG_INFINITY,
        }
    }
}

/// Grid approximation of `g(Λ) = inf_x L(x, Λ)` over the problem's box.
///
/// Reports `UnboundedBelow` when the grid minimum sits on the box boundary and
/// the Lagrangian keeps dropping at twice the box radius along the ray from
/// the box center, or when the minimum falls below `−1e9`.
pub fn dual_oracle(p: &BmiProblem, m: &Multipliers, grid_per_dim: usize) -> Result<DualOracle> {
    m.check_against(p)?;
    let grid = Grid::new(p, grid_per_dim)?;
    let eval = |c: &[f64]| -> Option<f64> {
        let x = p.assignment_from_coords(c);
        match p.in_domain(&x) {
            Ok(true) => lagrangian(p, &x, m).ok(),
            _ => None,
        }
    };
    let (value, idx) = grid.argmin(eval).ok_or(Error::NoFeasibleGridPoint)?;
    if value < UNBOUNDED_VALUE {
        return Ok(DualOracle::UnboundedBelow);
    }
    if grid.on_boundary(idx) {
        let center = grid.center();
        let probe: Vec<f64> = grid
            .point(idx)
            .iter()
            .zip(&center)
            .map(|(x, c)| c + 2.0 * (x - c))
            .collect();
        if let Some(pv) = eval(&probe) {
            if pv < value - PROBE_REL_DROP * (1.0 + value.abs()) {
                return Ok(DualOracle::UnboundedBelow);
            }
        }
    }
    Ok(DualOracle::Value {
        value,
        argmin: p.assignment_from_coords(&grid.point(idx)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalOracle {
    pub value: f64,
    pub argmin: Assignment,
    /// Largest grid spacing over all coordinates.
    pub step: f64,
}

/// Best feasible grid point of the original problem.
pub fn primal_oracle(p: &BmiProblem, grid_per_dim: usize) -> Result<PrimalOracle> {
    let grid = Grid::new(p, grid_per_dim)?;
    let eval = |c: &[f64]| -> Option<f64> {
        let x = p.assignment_from_coords(c);
        if !p.in_domain(&x).ok()? {
            return None;
        }
        let feasible = p.residuals(&x).ok()?.iter().all(|r| *r <= GRID_FEAS_TOL);
        if feasible {
            p.objective_value(&x).ok()
        } else {
            None
        }
    };
    let (value, idx) = grid.argmin(eval).ok_or(Error::NoFeasibleGridPoint)?;
    Ok(PrimalOracle {
        value,
        argmin: p.assignment_from_coords(&grid.point(idx)),
        step: grid.max_step(),
    })
}
